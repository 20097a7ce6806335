#include "latvar/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <atomic>

namespace latvar::parallel {

namespace {
std::atomic<int> g_threads{0};
}

void set_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int threads() {
    int n = g_threads.load();
#ifdef _OPENMP
    if (n == 0) return omp_get_max_threads();
    return n;
#else
    return n == 0 ? 1 : n;
#endif
}

bool enabled() {
#ifdef _OPENMP
    return threads() > 1;
#else
    return false;
#endif
}

} // namespace latvar::parallel

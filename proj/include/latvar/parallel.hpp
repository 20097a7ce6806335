#pragma once

// Runtime switch between the serial reference loops and the OpenMP kernels.
// 0 threads = library default (OpenMP's max), 1 = serial reference.

namespace latvar::parallel {

void set_threads(int n);
int threads();
bool enabled();

} // namespace latvar::parallel

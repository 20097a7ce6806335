#include "latvar/matrix_ops.hpp"

#include <algorithm>

namespace latvar {

namespace {
void check_indices(Index n, const std::vector<Index>& idx, const char* what) {
    for (Index i : idx) {
        if (i < 0 || i >= n)
            throw Error::spec(std::string(what) + " index out of range: " + std::to_string(i) +
                              " for dimension " + std::to_string(n));
    }
}
} // namespace

SelectionMatrix::SelectionMatrix(Index n_, const std::vector<Index>& drop) : n(n_) {
    check_indices(n, drop, "selection");
    std::vector<bool> dropped(static_cast<size_t>(n), false);
    for (Index i : drop) dropped[static_cast<size_t>(i)] = true;
    for (Index i = 0; i < n; ++i)
        if (!dropped[static_cast<size_t>(i)]) kept.push_back(i);
}

Mat SelectionMatrix::dense() const {
    Mat J = Mat::Zero(rows(), n);
    for (Index r = 0; r < rows(); ++r) J(r, kept[static_cast<size_t>(r)]) = 1.0;
    return J;
}

Vec SelectionMatrix::apply(const Vec& x) const {
    Vec out(rows());
    for (Index r = 0; r < rows(); ++r) out[r] = x[kept[static_cast<size_t>(r)]];
    return out;
}

Mat SelectionMatrix::apply(const Mat& B) const {
    Mat out(rows(), B.cols());
    for (Index r = 0; r < rows(); ++r) out.row(r) = B.row(kept[static_cast<size_t>(r)]);
    return out;
}

Mat SelectionMatrix::both(const Mat& B) const {
    Mat out(rows(), rows());
    for (Index r = 0; r < rows(); ++r)
        for (Index c = 0; c < rows(); ++c)
            out(r, c) = B(kept[static_cast<size_t>(r)], kept[static_cast<size_t>(c)]);
    return out;
}

CancellationMatrix::CancellationMatrix(Index n_, const std::vector<Index>& zero)
    : n(n_), zeroed(static_cast<size_t>(n_), false) {
    check_indices(n, zero, "cancellation");
    for (Index i : zero) zeroed[static_cast<size_t>(i)] = true;
}

Mat CancellationMatrix::dense() const {
    Mat p = Mat::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        if (!zeroed[static_cast<size_t>(i)]) p(i, i) = 1.0;
    return p;
}

Vec CancellationMatrix::apply(const Vec& x) const {
    Vec out = x;
    for (Index i = 0; i < n; ++i)
        if (zeroed[static_cast<size_t>(i)]) out[i] = 0.0;
    return out;
}

Mat CancellationMatrix::apply_left(const Mat& B) const {
    Mat out = B;
    for (Index i = 0; i < n; ++i)
        if (zeroed[static_cast<size_t>(i)]) out.row(i).setZero();
    return out;
}

Mat CancellationMatrix::apply_right(const Mat& B) const {
    Mat out = B;
    for (Index i = 0; i < n; ++i)
        if (zeroed[static_cast<size_t>(i)]) out.col(i).setZero();
    return out;
}

Mat CancellationMatrix::both(const Mat& B) const { return apply_right(apply_left(B)); }

Mat selection_matrix(Index n, const std::vector<Index>& drop) {
    return SelectionMatrix(n, drop).dense();
}

Mat cancellation_matrix(Index n, const std::vector<Index>& zero) {
    return CancellationMatrix(n, zero).dense();
}

Mat commutation_matrix(Index m, Index n) {
    Mat K = Mat::Zero(m * n, m * n);
    // vec(A)[i + j*m] = A(i,j) maps to vec(A')[j + i*n].
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) K(j + i * n, i + j * m) = 1.0;
    return K;
}

Vec apply_commutation(Index m, Index n, const Vec& x) {
    if (x.size() != m * n) throw Error::spec("apply_commutation: size mismatch");
    Vec y(m * n);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) y[j + i * n] = x[i + j * m];
    return y;
}

Vec symmetrize_vec(Index k, const Vec& x) {
    Vec y(k * k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) y[i + j * k] = x[i + j * k] + x[j + i * k];
    return y;
}

Mat kron(const Mat& A, const Mat& B) {
    Mat out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index i = 0; i < A.rows(); ++i)
        for (Index j = 0; j < A.cols(); ++j)
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

} // namespace latvar

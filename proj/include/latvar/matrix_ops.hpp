#pragma once

// Zero-one matrix operators (selection, cancellation, commutation) and the
// small vec/Kronecker helpers the moment derivatives are built from.

#include <vector>

#include "latvar/types.hpp"

namespace latvar {

// Identity with the listed rows removed; shape (n-|drop|) x n. Acts on the
// left to select the kept coordinates. Indices are 0-based.
struct SelectionMatrix {
    Index n = 0;
    std::vector<Index> kept; // ascending

    SelectionMatrix() = default;
    SelectionMatrix(Index n, const std::vector<Index>& drop);

    Index rows() const { return static_cast<Index>(kept.size()); }
    Mat dense() const;

    // J * x and J * B (row selection) without materializing the matrix.
    Vec apply(const Vec& x) const;
    Mat apply(const Mat& B) const;
    // J * B * J' (principal submatrix on the kept set).
    Mat both(const Mat& B) const;
};

// Square identity with the diagonal zeroed on the given index set.
struct CancellationMatrix {
    Index n = 0;
    std::vector<bool> zeroed;

    CancellationMatrix() = default;
    CancellationMatrix(Index n, const std::vector<Index>& zero);

    Mat dense() const;
    Vec apply(const Vec& x) const;     // zero listed coordinates
    Mat apply_left(const Mat& B) const;  // zero listed rows
    Mat apply_right(const Mat& B) const; // zero listed columns
    Mat both(const Mat& B) const;
};

Mat selection_matrix(Index n, const std::vector<Index>& drop);
Mat cancellation_matrix(Index n, const std::vector<Index>& zero);

// K^(m,n) vec(A) = vec(A') for m x n A. Products with K are index
// permutations; commutation_matrix materializes it only for tests/printing.
Mat commutation_matrix(Index m, Index n);

// y = K^(m,n) x for x = vec(A), A m x n.
Vec apply_commutation(Index m, Index n, const Vec& x);

// (1 + K^(k,k)) x, the symmetrizing operator on vec'd k x k matrices.
Vec symmetrize_vec(Index k, const Vec& x);

inline Vec vec(const Mat& A) { return Eigen::Map<const Vec>(A.data(), A.size()); }

inline Mat unvec(const Vec& x, Index rows, Index cols) {
    return Eigen::Map<const Mat>(x.data(), rows, cols);
}

Mat kron(const Mat& A, const Mat& B);

} // namespace latvar

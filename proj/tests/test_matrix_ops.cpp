#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "latvar/matrix_ops.hpp"
#include "latvar/rng.hpp"

using namespace latvar;

TEST_CASE("selection matrix removes rows of the identity") {
    // 6x6 identity with rows 3,4 (1-based) removed
    Mat J = selection_matrix(6, {2, 3});
    Mat expect(4, 6);
    expect << 1, 0, 0, 0, 0, 0,
              0, 1, 0, 0, 0, 0,
              0, 0, 0, 0, 1, 0,
              0, 0, 0, 0, 0, 1;
    CHECK((J - expect).cwiseAbs().maxCoeff() == 0.0);

    CHECK(selection_matrix(5, {}).isIdentity(0.0));
    Mat J2 = selection_matrix(2, {0});
    CHECK(J2.rows() == 1);
    CHECK(J2(0, 0) == 0.0);
    CHECK(J2(0, 1) == 1.0);
}

TEST_CASE("selection identities") {
    SelectionMatrix J(7, {1, 4, 5});
    Mat Jd = J.dense();
    CHECK((Jd * Jd.transpose()).isIdentity(0.0));
    CHECK_THROWS_AS(SelectionMatrix(4, {7}), Error);

    Rng rng(7);
    Mat B(7, 7);
    for (Index i = 0; i < 7; ++i)
        for (Index j = 0; j < 7; ++j) B(i, j) = rng.normal();
    CHECK((J.apply(B) - Jd * B).cwiseAbs().maxCoeff() == 0.0);
    CHECK((J.both(B) - Jd * B * Jd.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cancellation matrix zeroes the listed diagonal") {
    Mat p = cancellation_matrix(6, {2, 3});
    Mat expect = Mat::Identity(6, 6);
    expect(2, 2) = 0;
    expect(3, 3) = 0;
    CHECK((p - expect).cwiseAbs().maxCoeff() == 0.0);

    CHECK(cancellation_matrix(4, {}).isIdentity(0.0));
    CHECK(cancellation_matrix(3, {0, 1, 2}).cwiseAbs().maxCoeff() == 0.0);

    // idempotent projector; complementary pair sums to identity
    CHECK((p * p - p).cwiseAbs().maxCoeff() == 0.0);
    Mat pc = cancellation_matrix(6, {0, 1, 4, 5});
    CHECK((p + pc).isIdentity(0.0));
}

TEST_CASE("commutation matrix") {
    Mat K = commutation_matrix(2, 3);
    Mat expect(6, 6);
    expect << 1, 0, 0, 0, 0, 0,
              0, 0, 1, 0, 0, 0,
              0, 0, 0, 0, 1, 0,
              0, 1, 0, 0, 0, 0,
              0, 0, 0, 1, 0, 0,
              0, 0, 0, 0, 0, 1;
    CHECK((K - expect).cwiseAbs().maxCoeff() == 0.0);

    CHECK(commutation_matrix(1, 5).isIdentity(0.0));
    CHECK(commutation_matrix(5, 1).isIdentity(0.0));
    CHECK((commutation_matrix(3, 4) * commutation_matrix(4, 3)).isIdentity(0.0));

    Rng rng(3);
    Mat A(2, 3);
    for (Index i = 0; i < A.size(); ++i) A(i / 3, i % 3) = rng.normal();
    CHECK((K * vec(A) - vec(Mat(A.transpose()))).cwiseAbs().maxCoeff() == 0.0);
    CHECK((apply_commutation(2, 3, vec(A)) - vec(Mat(A.transpose()))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vec/Kronecker identity vec(ABC) = (C' kron A) vec(B)") {
    Rng rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        Mat A(3, 4), B(4, 2), C(2, 5);
        for (Index i = 0; i < A.size(); ++i) A(i % 3, i / 3) = rng.normal();
        for (Index i = 0; i < B.size(); ++i) B(i % 4, i / 4) = rng.normal();
        for (Index i = 0; i < C.size(); ++i) C(i % 2, i / 2) = rng.normal();
        Vec lhs = vec(Mat(A * B * C));
        Vec rhs = kron(C.transpose(), A) * vec(B);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("symmetrize_vec equals (1 + K) action") {
    Index k = 4;
    Rng rng(5);
    Mat M(k, k);
    for (Index i = 0; i < M.size(); ++i) M(i % k, i / k) = rng.normal();
    Mat op = Mat::Identity(k * k, k * k) + commutation_matrix(k, k);
    CHECK((symmetrize_vec(k, vec(M)) - op * vec(M)).cwiseAbs().maxCoeff() < 1e-14);
}

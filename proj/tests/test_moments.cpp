#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "latvar/matrix_ops.hpp"
#include "latvar/moments.hpp"
#include "test_models.hpp"

using namespace latvar;
using namespace latvar::testing;

namespace {

Vec admissible_theta(const ParameterTable& t, Rng& rng) {
    Vec theta(t.theta_dim);
    for (int j = 0; j < t.theta_dim; ++j)
        theta[j] = t.variance_like[static_cast<size_t>(j)] ? rng.uniform(0.5, 1.8)
                                                          : rng.uniform(-0.8, 0.8);
    return theta;
}

ExoMoments random_exo(const ParameterTable& t, Rng& rng) {
    Index ne = static_cast<Index>(t.exo_names.size());
    ExoMoments e;
    e.mean = rng.normal_vec(ne);
    Mat L(ne, ne);
    for (Index i = 0; i < ne; ++i)
        for (Index j = 0; j < ne; ++j) L(i, j) = (j > i) ? 0.0 : rng.uniform(0.2, 1.0);
    e.cov = L * L.transpose();
    return e;
}

} // namespace

TEST_CASE("single observed variable") {
    ModelSpec m;
    m.set_variance("y", ParameterBinding::labeled("s2")); // declared response
    auto t = compile(m);
    REQUIRE(t.theta_dim == 2); // intercept + variance
    Vec theta(2);
    theta[t.theta_index("y")] = 1.5;
    theta[t.theta_index("s2")] = 2.25;
    auto b = model_moments(t, theta);
    CHECK(b.omega(0, 0) == doctest::Approx(2.25));
    CHECK(b.xi[0] == doctest::Approx(1.5));
}

TEST_CASE("one-factor model closed form") {
    ModelSpec m;
    for (const auto& y : {"y1", "y2", "y3"}) m.add_regression(y, "f");
    m.set_latent("f");
    m.set_intercept("f", ParameterBinding::fixed(0));
    auto t = compile(m);
    Rng rng(2);
    Vec theta = admissible_theta(t, rng);
    auto b = model_moments(t, theta);
    Vec lambda(3);
    lambda << theta[t.theta_index("y1<-f")], theta[t.theta_index("y2<-f")],
        theta[t.theta_index("y3<-f")];
    double psi = theta[t.theta_index("f<->f")];
    Mat D = Mat::Zero(3, 3);
    D(0, 0) = theta[t.theta_index("y1<->y1")];
    D(1, 1) = theta[t.theta_index("y2<->y2")];
    D(2, 2) = theta[t.theta_index("y3<->y3")];
    Mat expect = psi * lambda * lambda.transpose() + D;
    CHECK((b.omega - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("joint moments with exogenous block: cov(y,x) = beta var(x)") {
    ModelSpec m;
    m.add_regression("y", "x");
    auto t = compile(m);
    Vec theta = Vec::Zero(t.theta_dim);
    theta[t.theta_index("y<-x")] = 0.7;
    theta[t.theta_index("y<->y")] = 1.3;
    ExoMoments exo;
    exo.mean = Vec::Constant(1, 0.4);
    exo.cov = Mat::Constant(1, 1, 2.0);
    auto b = model_moments(t, theta, nullptr, &exo);
    Index y = t.u_index("y"), x = t.u_index("x");
    CHECK(b.omega(y, x) == doctest::Approx(0.7 * 2.0));
    CHECK(b.omega(x, x) == doctest::Approx(2.0));
    CHECK(b.omega(y, y) == doctest::Approx(0.7 * 0.7 * 2.0 + 1.3));
    CHECK(b.xi[x] == doctest::Approx(0.4));
    CHECK(b.xi[y] == doctest::Approx(0.7 * 0.4));
}

TEST_CASE("singular (1-A) raises a numerical error naming theta") {
    ModelSpec m;
    m.add_regression("b", "a");
    m.add_regression("a", "b");
    auto t = compile(m);
    Vec theta = Vec::Zero(t.theta_dim);
    theta[t.theta_index("b<-a")] = 1.0;
    theta[t.theta_index("a<-b")] = 1.0;
    try {
        model_moments(t, theta);
        FAIL("expected singularity error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("singular") != std::string::npos);
        CHECK(std::string(e.what()).find("theta") != std::string::npos);
    }
}

TEST_CASE("analytic first derivatives match finite differences on random models") {
    Rng rng(31);
    int checked = 0;
    for (int rep = 0; rep < 12; ++rep) {
        ModelSpec m = random_model(rng);
        auto t = compile(m);
        if (t.theta_dim == 0) continue;
        ExoMoments exo = random_exo(t, rng);
        Vec theta = admissible_theta(t, rng);
        auto b = d_moments(t, theta, nullptr, &exo);
        const double h = 1e-5;
        for (int j = 0; j < t.theta_dim; ++j) {
            Vec tp = theta, tm = theta;
            tp[j] += h;
            tm[j] -= h;
            auto bp = model_moments(t, tp, nullptr, &exo);
            auto bm = model_moments(t, tm, nullptr, &exo);
            Mat fd_om = (bp.omega - bm.omega) / (2 * h);
            Vec fd_xi = (bp.xi - bm.xi) / (2 * h);
            Mat an_om = unvec(b.d_omega.col(j), t.k, t.k);
            double scale = std::max(1.0, fd_om.cwiseAbs().maxCoeff());
            CHECK((an_om - fd_om).cwiseAbs().maxCoeff() / scale < 1e-6);
            double scale_xi = std::max(1.0, fd_xi.cwiseAbs().maxCoeff());
            CHECK((b.d_xi.col(j) - fd_xi).cwiseAbs().maxCoeff() / scale_xi < 1e-6);
        }
        ++checked;
    }
    CHECK(checked >= 8);
}

TEST_CASE("pure mean parameter has a zero d_omega column") {
    ModelSpec m;
    m.set_variance("y", ParameterBinding::labeled("s2"));
    auto t = compile(m);
    Vec theta(2);
    theta.setConstant(1.0);
    auto b = d_moments(t, theta);
    int mu = t.theta_index("y");
    CHECK(b.d_omega.col(mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK(b.d_xi(0, mu) == 1.0);
}

TEST_CASE("fully fixed model has zero-column Jacobians") {
    ModelSpec m;
    m.add_regression("y", "x", ParameterBinding::fixed(1));
    m.set_intercept("y", ParameterBinding::fixed(0));
    m.set_variance("y", ParameterBinding::fixed(1));
    auto t = compile(m);
    CHECK(t.theta_dim == 0);
    auto b = d_moments(t, Vec::Zero(0));
    CHECK(b.d_omega.cols() == 0);
    CHECK(b.d_xi.cols() == 0);
}

TEST_CASE("second derivatives match finite differences of first derivatives") {
    Rng rng(47);
    int checked = 0;
    for (int rep = 0; rep < 8 && checked < 4; ++rep) {
        ModelSpec m = random_model(rng);
        auto t = compile(m);
        if (t.theta_dim == 0 || !t.affine()) continue;
        ExoMoments exo = random_exo(t, rng);
        Vec theta = admissible_theta(t, rng);
        auto d2 = d2_moments(t, theta, &exo);
        const double h = 1e-5;
        for (int i = 0; i < t.theta_dim; ++i) {
            Vec tp = theta, tm = theta;
            tp[i] += h;
            tm[i] -= h;
            auto bp = d_moments(t, tp, nullptr, &exo);
            auto bm = d_moments(t, tm, nullptr, &exo);
            for (int j = 0; j < t.theta_dim; ++j) {
                Mat fd = unvec((bp.d_omega.col(j) - bm.d_omega.col(j)) / (2 * h), t.k, t.k);
                const Mat& an = d2.d2_omega(i, j);
                double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
                CHECK((an - fd).cwiseAbs().maxCoeff() / scale < 1e-5);
                Vec fdxi = (bp.d_xi.col(j) - bm.d_xi.col(j)) / (2 * h);
                double sx = std::max(1.0, fdxi.cwiseAbs().maxCoeff());
                CHECK((d2.d2_xi(i, j) - fdxi).cwiseAbs().maxCoeff() / sx < 1e-5);
                // exact slice symmetry by construction
                CHECK((d2.d2_omega(i, j) - d2.d2_omega(j, i)).cwiseAbs().maxCoeff() == 0.0);
            }
        }
        ++checked;
    }
    CHECK(checked >= 3);
}

TEST_CASE("no theta in A means the d2G contribution vanishes") {
    // all regression slots fixed: second derivative of omega is exactly zero
    ModelSpec m;
    m.add_regression("y1", "x", ParameterBinding::fixed(0.5));
    m.add_regression("y2", "x", ParameterBinding::fixed(0.25));
    auto t = compile(m);
    Rng rng(3);
    Vec theta = admissible_theta(t, rng);
    auto d2 = d2_moments(t, theta);
    for (int i = 0; i < t.theta_dim; ++i)
        for (int j = 0; j < t.theta_dim; ++j)
            CHECK(d2.d2_omega(i, j).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conditional moments") {
    SUBCASE("no latent variables reduces to linear regression") {
        ModelSpec m;
        m.add_regression("y", "x");
        auto t = compile(m);
        Vec theta(t.theta_dim);
        theta[t.theta_index("y")] = 0.3;     // intercept
        theta[t.theta_index("y<-x")] = 1.7;  // slope
        theta[t.theta_index("y<->y")] = 0.9; // residual variance
        Vec x(1);
        x[0] = 2.0;
        auto cm = conditional_moments(t, theta, x);
        REQUIRE(cm.names == std::vector<std::string>{"y"});
        CHECK(cm.mu[0] == doctest::Approx(0.3 + 1.7 * 2.0));
        CHECK(cm.sigma(0, 0) == doctest::Approx(0.9));
    }

    SUBCASE("m1 conditional covariance equals the measurement-form closed formula") {
        auto t = compile(m1().identified(IdentParam::Hybrid));
        Rng rng(11);
        Vec theta = admissible_theta(t, rng);
        Vec x(2);
        x << 0.5, -1.0;
        auto cm = conditional_moments(t, theta, x);

        // Lambda (6x2), B (2x2), Psi, Sigma_eps built by hand
        Mat L = Mat::Zero(6, 2);
        L(0, 0) = 1.0;
        L(1, 0) = theta[t.theta_index("y2<-u1")];
        L(2, 0) = theta[t.theta_index("y3<-u1")];
        L(3, 1) = 1.0;
        L(4, 1) = theta[t.theta_index("z2<-u2")];
        L(5, 1) = theta[t.theta_index("z3<-u2")];
        Mat B = Mat::Zero(2, 2);
        B(1, 0) = theta[t.theta_index("u2<-u1")];
        Mat Psi = Mat::Zero(2, 2);
        Psi(0, 0) = theta[t.theta_index("u1<->u1")];
        Psi(1, 1) = theta[t.theta_index("u2<->u2")];
        Mat Seps = Mat::Zero(6, 6);
        const char* endo[] = {"y1", "y2", "y3", "z1", "z2", "z3"};
        for (int i = 0; i < 6; ++i)
            Seps(i, i) = theta[t.theta_index(std::string(endo[i]) + "<->" + endo[i])];
        Mat IB = (Mat::Identity(2, 2) - B).inverse();
        Mat expect = L * IB * Psi * IB.transpose() * L.transpose() + Seps;
        CHECK((cm.sigma - expect).cwiseAbs().maxCoeff() < 1e-10);

        // conditional mean at x=0 equals marginal xi over endogenous rows
        // when the exogenous means are zero
        ExoMoments exo;
        exo.mean = Vec::Zero(2);
        exo.cov = Mat::Identity(2, 2);
        auto joint = model_moments(t, theta, nullptr, &exo);
        auto cm0 = conditional_moments(t, theta, Vec::Zero(2));
        for (size_t i = 0; i < cm0.names.size(); ++i) {
            Index pos = t.u_index(cm0.names[i]);
            CHECK(cm0.mu[static_cast<Index>(i)] == doctest::Approx(joint.xi[pos]).epsilon(1e-12));
        }
    }

    SUBCASE("missing exogenous value is an error") {
        ModelSpec m;
        m.add_regression("y", "x");
        auto t = compile(m);
        Vec theta = Vec::Zero(t.theta_dim);
        CHECK_THROWS_AS(conditional_moments(t, theta, Vec::Zero(0)), Error);
    }
}

TEST_CASE("law of total variance over simulated exogenous values") {
    auto t = compile(m1().identified(IdentParam::Hybrid));
    Rng rng(13);
    Vec theta = admissible_theta(t, rng);
    ExoMoments exo;
    exo.mean = Vec::Zero(2);
    exo.cov = Mat::Identity(2, 2);
    auto joint = model_moments(t, theta, nullptr, &exo);

    const int nmc = 4000;
    Mat mus(nmc, 6);
    Mat sig = Mat::Zero(6, 6);
    for (int i = 0; i < nmc; ++i) {
        Vec x = rng.normal_vec(2);
        auto cm = conditional_moments(t, theta, x);
        mus.row(i) = cm.mu.transpose();
        sig += cm.sigma / nmc;
    }
    Vec mbar = mus.colwise().mean();
    Mat C = mus.rowwise() - mbar.transpose();
    Mat var_mu = C.transpose() * C / nmc;
    Mat total = sig + var_mu;
    // marginal omega over the endogenous block
    Mat endo_block(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            endo_block(i, j) = joint.omega(t.endo_pos[static_cast<size_t>(i)],
                                           t.endo_pos[static_cast<size_t>(j)]);
    // Monte Carlo tolerance ~ 3 standard errors of a covariance entry
    double tol = 3.0 * endo_block.cwiseAbs().maxCoeff() * 2.0 / std::sqrt(double(nmc));
    CHECK((total - endo_block).cwiseAbs().maxCoeff() < tol);
}

TEST_CASE("omega is positive definite at admissible theta") {
    Rng rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        ModelSpec m = random_model(rng);
        auto t = compile(m);
        if (t.theta_dim == 0) continue;
        ExoMoments exo = random_exo(t, rng);
        Vec theta = admissible_theta(t, rng);
        // covariance slots at 0 keep P positive definite here
        for (const auto& s : t.slots)
            if (s.kind == Slot::Kind::Theta && s.mat == Slot::M::P && s.row != s.col)
                theta[s.index] = 0.0;
        auto b = model_moments(t, theta, nullptr, &exo);
        Eigen::LLT<Mat> llt(b.omega);
        CHECK(llt.info() == Eigen::Success);
        CHECK((b.omega - b.omega.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <queue>
#include <set>

#include "latvar/model.hpp"
#include "test_models.hpp"

using namespace latvar;
using namespace latvar::testing;

TEST_CASE("mregr graph queries match the worked example") {
    ModelSpec m = mregr();
    CHECK(m.variables().size() == 6);
    CHECK(m.exogenous() == std::vector<std::string>{"x", "z"});
    CHECK(m.endogenous(true) == std::vector<std::string>{"w"});
    CHECK(m.children({"x", "y1"}) == std::vector<std::string>{"y1", "y2", "y3", "w"});
    CHECK(m.parents({"w"}) == std::vector<std::string>{"y1", "y2", "y3"});

    auto p = m.paths("x", "w");
    REQUIRE(p.size() == 3);
    CHECK(p[0] == std::vector<std::string>{"x", "y1", "w"});
    CHECK(p[1] == std::vector<std::string>{"x", "y2", "w"});
    CHECK(p[2] == std::vector<std::string>{"x", "y3", "w"});

    CHECK_THROWS_AS(m.children({"nosuch"}), Error);
}

TEST_CASE("coef names reproduce the printed ordering") {
    ModelSpec m = mregr();
    std::vector<std::string> expect = {"y1",      "w",       "y1<-z",   "y2<-z",  "y3<-x",
                                       "w<-y1",   "w<-y2",   "w<-y3",   "y1<->y1", "y2<->y2",
                                       "y3<->y3", "w<->w",   "y1<->y3"};
    CHECK(m.coef_names(false) == expect);
    std::vector<std::string> expect_lab = {"mu", "w",       "a",       "b",       "b1",
                                           "w<-y1", "w<-y2", "w<-y3",  "v",       "r0",
                                           "y3<->y3", "w<->w", "r"};
    CHECK(m.coef_names(true) == expect_lab);

    ModelSpec empty;
    CHECK(empty.coef_names().empty());

    // fully fixed model -> empty list
    ModelSpec fixed;
    fixed.add_regression("y", "x", ParameterBinding::fixed(1));
    fixed.set_intercept("y", ParameterBinding::fixed(0));
    fixed.set_variance("y", ParameterBinding::fixed(1));
    CHECK(fixed.coef_names().empty());
}

TEST_CASE("empty statement list gives the empty model") {
    ModelSpec m;
    CHECK(m.variables().empty());
    CHECK(m.coef_names().empty());
}

TEST_CASE("m1 structure") {
    ModelSpec m = m1();
    CHECK(m.latent_vars() == std::vector<std::string>{"u1", "u2"});
    CHECK(m.exogenous() == std::vector<std::string>{"x1", "x2"});
    auto endo = m.endogenous();
    CHECK(endo == std::vector<std::string>{"y1", "y2", "y3", "z1", "z2", "z3"});
    // after cancel + new regression: exactly one directed edge, no covariance
    CHECK(m.find_reg("u2", "u1") != nullptr);
    CHECK(m.find_reg("u1", "u2") == nullptr);
    CHECK(m.find_cov("u1", "u2") == nullptr);
}

TEST_CASE("later declarations overwrite bindings but keep other predictors") {
    ModelSpec m;
    m.add_regression("u2", "x1");
    m.add_regression("u2", "x2");
    m.add_regression("u2", "u1", ParameterBinding::labeled("g"));
    m.add_regression("u2", "u1", ParameterBinding::free());
    CHECK(m.parents({"u2"}) == std::vector<std::string>{"x1", "x2", "u1"});
    CHECK(m.find_reg("u2", "u1")->bind.kind == ParameterBinding::Kind::Free);
}

TEST_CASE("edit operations") {
    ModelSpec m = mregr();

    SUBCASE("subset keeps restrictions among kept slots") {
        ModelSpec s = m.subset({"y1", "y2", "y3", "w"});
        CHECK(s.variables().size() == 4);
        CHECK(s.intercept("y1") == ParameterBinding::labeled("mu"));
        CHECK(s.intercept("y3") == ParameterBinding::fixed(0));
        CHECK(s.variance("y1") == ParameterBinding::labeled("v"));
        CHECK(s.find_cov("y1", "y3")->bind == ParameterBinding::labeled("r"));
        CHECK(s.find_cov("y1", "y2")->bind == ParameterBinding::fixed(0.5));
        CHECK(s.find_reg("w", "y1") != nullptr);
        CHECK(s.find_reg("y1", "x") == nullptr);
        CHECK_THROWS_AS(m.subset({"y1", "nope"}), Error);
    }

    SUBCASE("merge with empty model is identity") {
        ModelSpec empty;
        CHECK(m.merged(empty).structurally_equal(m));
    }

    SUBCASE("subset + merge with complement restores shared edges") {
        ModelSpec a = m.subset({"y1", "y2", "y3", "w"});
        ModelSpec b = m.subset({"y1", "y2", "y3", "x", "z"});
        ModelSpec u = a.merged(b);
        for (const auto& e : m.reg_edges()) CHECK(u.find_reg(e.to, e.from) != nullptr);
        for (const auto& e : m.cov_edges()) CHECK(u.find_cov(e.a, e.b) != nullptr);
    }

    SUBCASE("merge conflict on fixed values") {
        ModelSpec a, b;
        a.add_regression("y", "x", ParameterBinding::fixed(1));
        b.add_regression("y", "x", ParameterBinding::fixed(2));
        CHECK_THROWS_AS(a.merged(b), Error);
    }

    SUBCASE("cancel is idempotent") {
        ModelSpec c = m;
        c.cancel({"y1", "y2"});
        ModelSpec c2 = c;
        c2.cancel({"y1", "y2"});
        CHECK(c.structurally_equal(c2));
        CHECK(c.find_cov("y1", "y2") == nullptr);
    }

    SUBCASE("kill removes variables and edges; absent kill is a no-op") {
        ModelSpec k = m;
        auto missing = k.kill({"w"});
        CHECK(missing.empty());
        CHECK_FALSE(k.has_var("w"));
        CHECK(k.parents({"y1"}) == std::vector<std::string>{"x", "z"});
        auto missing2 = k.kill({"w"});
        CHECK(missing2 == std::vector<std::string>{"w"});
        CHECK(k.variables().size() == 5);
    }
}

TEST_CASE("identification") {
    SUBCASE("hybrid fixes latent intercepts and one loading each") {
        ModelSpec m = m1().identified(IdentParam::Hybrid);
        CHECK(m.find_reg("y1", "u1")->bind == ParameterBinding::fixed(1));
        CHECK(m.find_reg("z1", "u2")->bind == ParameterBinding::fixed(1));
        CHECK(m.intercept("u1") == ParameterBinding::fixed(0));
        CHECK(m.intercept("u2") == ParameterBinding::fixed(0));
        CHECK(m.find_reg("y2", "u1")->bind.kind == ParameterBinding::Kind::Free);
        CHECK(m.intercept("y1").kind == ParameterBinding::Kind::Free);
    }

    SUBCASE("none leaves the model unchanged") {
        ModelSpec m = m1();
        CHECK(m.identified(IdentParam::None).structurally_equal(m));
    }

    SUBCASE("absolute fixes latent variance and mean") {
        ModelSpec m;
        for (const auto& y : {"y1", "y2", "y3"}) m.add_regression(y, "f");
        m.set_latent("f");
        ModelSpec a = m.identified(IdentParam::Absolute);
        CHECK(a.variance("f") == ParameterBinding::fixed(1));
        CHECK(a.intercept("f") == ParameterBinding::fixed(0));
        CHECK(a.find_reg("y1", "f")->bind.kind == ParameterBinding::Kind::Free);
    }

    SUBCASE("relative fixes the reference indicator") {
        ModelSpec m;
        for (const auto& y : {"y1", "y2"}) m.add_regression(y, "f");
        m.set_latent("f");
        ModelSpec r = m.identified(IdentParam::Relative);
        CHECK(r.find_reg("y1", "f")->bind == ParameterBinding::fixed(1));
        CHECK(r.intercept("y1") == ParameterBinding::fixed(0));
        CHECK(r.intercept("f").kind == ParameterBinding::Kind::Free);
    }

    SUBCASE("pre-fixed loadings are not clobbered") {
        ModelSpec m;
        m.add_regression("y1", "f", ParameterBinding::fixed(2));
        m.add_regression("y2", "f");
        m.set_latent("f");
        ModelSpec h = m.identified(IdentParam::Hybrid);
        CHECK(h.find_reg("y1", "f")->bind == ParameterBinding::fixed(2));
        CHECK(h.find_reg("y2", "f")->bind.kind == ParameterBinding::Kind::Free);
    }

    SUBCASE("latent without indicator errors for relative/hybrid") {
        ModelSpec m;
        m.add_regression("f2", "f1");
        m.set_latent("f1");
        m.set_latent("f2");
        CHECK_THROWS_AS(m.identified(IdentParam::Hybrid), Error);
    }
}

TEST_CASE("feedback loops and regression+covariance pairs are allowed") {
    ModelSpec m;
    m.add_regression("y", "x");
    m.add_regression("x", "i");
    m.add_covariance("x", "y");
    m.add_regression("x", "y"); // feedback
    CHECK(m.find_reg("x", "y") != nullptr);
    CHECK(m.find_reg("y", "x") != nullptr);
    CHECK(m.find_cov("x", "y") != nullptr);
    CHECK(m.exogenous() == std::vector<std::string>{"i"});
}

static bool reachable_bfs(const ModelSpec& m, const std::string& from, const std::string& to) {
    std::queue<std::string> q;
    std::set<std::string> seen;
    q.push(from);
    seen.insert(from);
    while (!q.empty()) {
        auto cur = q.front();
        q.pop();
        if (cur == to) return true;
        for (const auto& e : m.reg_edges())
            if (e.from == cur && !seen.count(e.to)) {
                seen.insert(e.to);
                q.push(e.to);
            }
    }
    return false;
}

TEST_CASE("random model invariants") {
    Rng rng(99);
    for (int rep = 0; rep < 40; ++rep) {
        ModelSpec m = random_model(rng);
        auto all = m.var_names();
        auto lat = m.latent_vars();
        auto man = m.manifest();
        CHECK(lat.size() + man.size() == all.size());
        auto exo = m.exogenous();
        auto endo = m.endogenous();
        for (const auto& e : exo)
            CHECK(std::find(endo.begin(), endo.end(), e) == endo.end());
        CHECK(exo.size() + endo.size() == man.size());

        // paths non-empty iff reachable in the regression digraph
        for (const auto& a : all)
            for (const auto& b : all) {
                if (a == b) continue;
                bool has_path = !m.paths(a, b).empty();
                CHECK(has_path == reachable_bfs(m, a, b));
            }

        // coef_names deterministic across copies
        ModelSpec copy = m;
        CHECK(m.coef_names() == copy.coef_names());
        CHECK(m.coef_names(true) == copy.coef_names(true));
    }
}

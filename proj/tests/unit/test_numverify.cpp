// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <limits>

#include "doctest.h"
#include "support/generators.hpp"
#include "varfield/modeldsl.hpp"
#include "varfield/numverify.hpp"
#include "varfield/varops.hpp"
#include "varfield/ymcase.hpp"

using namespace varfield;

namespace {

MultiIndex mi(std::vector<int> e) { return MultiIndex::from_entries(e); }
Expr y(std::vector<int> J = {}, int s = 0) { return Expr(Atom::jet(s, mi(J))); }
Expr x(int i = 0) { return Expr(Atom::base(i)); }

Form free_particle() { return (Expr(Rational(1, 2)) * y({0}) * y({0})) * Form::volume(1); }

std::string model_path(const char* name) { return std::string(VARFIELD_SOURCE_DIR) + "/models/" + name; }

/// Exact value at rational base coordinates, rounded once.
double exact_at(const Expr& e, const std::vector<Rational>& pt) {
    const Expr c = substitute(e, [&](const Atom& a) -> std::optional<Expr> {
        if (a.is_base()) return Expr(pt[a.id]);
        return std::nullopt;
    });
    REQUIRE(c.is_constant());
    return c.constant_value().to_double();
}

/// Random polynomial in the base coordinates, optionally wrapped in sin/cos/exp.
Expr random_smooth(gen::Rng& r, int n, bool with_functions) {
    Expr e = gen::random_base_poly(r, n, 4, 3);
    if (with_functions) {
        const Expr arg = gen::random_base_poly(r, n, 2, 1);
        switch (r.uniform(0, 2)) {
            case 0:
                e += sin(arg) * x(r.uniform(0, n - 1));
                break;
            case 1:
                e += cos(arg) * cos(arg);
                break;
            default:
                e += Expr(Rational(1, 3)) * exp(arg);
        }
    }
    return e;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("grid enumeration and parsing") {
    const GridSpec g = parse_grid("0:1:3", 2);
    CHECK(g.size() == 9);
    CHECK(g.point(1) == std::vector<double>{0.0, 0.5});
    CHECK(g.point(3) == std::vector<double>{0.5, 0.0});
    CHECK(g.grid_index(8) == std::vector<int>{2, 2});
    const GridSpec h = parse_grid("-1:1:5,0:2:3", 2, 1e-6);
    CHECK(h.size() == 15);
    CHECK(h.tolerance == 1e-6);
    CHECK(h.point(14) == std::vector<double>{1.0, 2.0});
    CHECK_THROWS_AS(parse_grid("0:1", 1), std::invalid_argument);
    CHECK_THROWS_AS(parse_grid("0:1:1", 1), std::invalid_argument);
    CHECK_THROWS_AS(parse_grid("1:0:4", 1), std::invalid_argument);
    CHECK_THROWS_AS(parse_grid("0:1:4,0:1:4", 3), std::invalid_argument);
    CHECK_THROWS_AS(parse_grid("0:1:4x", 1), std::invalid_argument);
    CHECK_THROWS_AS(parse_grid("0:1:4", 1, 0.0), std::invalid_argument);
}

TEST_CASE("grid values agree with pointwise evaluation") {
    gen::Rng r(71);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = r.uniform(1, 3);
        const Expr e = random_smooth(r, n, true);
        const GridSpec g = GridSpec::uniform(n, -1.0, 1.0, n == 3 ? 4 : 7);
        const auto vals = evaluate_on_grid(e, g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            NumericBinding b;
            const auto p = g.point(k);
            for (int i = 0; i < n; ++i) b[Atom::base(i)] = p[static_cast<std::size_t>(i)];
            const double ref = eval_numeric(e, b);
            CHECK(std::fabs(vals[k] - ref) <= 1e-12 * (1.0 + std::fabs(ref)));
        }
    }
}

TEST_CASE("scalar and AVX2 kernels are bitwise identical") {
    if (!avx2_supported()) {
        CHECK_THROWS_AS(evaluate_on_grid(x(), GridSpec::uniform(1, 0, 1, 5), {SimdKernel::Avx2, 1}), std::runtime_error);
        return;
    }
    gen::Rng r(72);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = r.uniform(1, 3);
        const Expr e = random_smooth(r, n, trial % 2 == 0);
        // Odd sizes exercise the scalar tail of every block.
        const GridSpec g = GridSpec::uniform(n, -2.0, 1.5, n == 1 ? 1031 : n == 2 ? 23 : 9);
        const auto s = evaluate_on_grid(e, g, {SimdKernel::Scalar, 1});
        const auto v = evaluate_on_grid(e, g, {SimdKernel::Avx2, 3});
        CHECK(bitwise_equal(s, v));
        const VerifyReport rs = max_abs_on_grid({e}, g, {SimdKernel::Scalar, 1});
        const VerifyReport rv = max_abs_on_grid({e}, g, {SimdKernel::Avx2, 2});
        CHECK(rs.max_residual == rv.max_residual);
        CHECK(rs.scale == rv.scale);
        CHECK(rs.argmax_index == rv.argmax_index);
        CHECK(rs.kernel == "scalar");
        CHECK(rv.kernel == "avx2");
    }
}

TEST_CASE("roundoff stays within the magnitude bound") {
    gen::Rng r(73);
    const double eps = std::numeric_limits<double>::epsilon();
    for (int trial = 0; trial < 100; ++trial) {
        const int n = r.uniform(1, 2);
        const Expr e = random_smooth(r, n, false);
        const GridSpec g = GridSpec::uniform(n, -1.0, 1.0, 9);
        const auto vals = evaluate_on_grid(e, g);
        const VerifyReport rep = max_abs_on_grid({e}, g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            std::vector<Rational> pt;
            for (int idx : g.grid_index(k)) pt.push_back(Rational(-1) + Rational(idx, 4));
            CHECK(std::fabs(vals[k] - exact_at(e, pt)) <= 1e3 * eps * rep.scale);
        }
    }
}

TEST_CASE("argmax is deterministic with ties to the first index") {
    const GridSpec g = GridSpec::uniform(1, 0.0, 1.0, 3);
    const Expr c = (x() - Expr(Rational(1, 2))) * (x() - Expr(Rational(1, 2)));
    for (int workers : {1, 2, 4}) {
        const VerifyReport rep = max_abs_on_grid({c}, g, {SimdKernel::Auto, workers});
        CHECK(rep.argmax_index == std::vector<int>{0});
        CHECK(rep.max_residual == 0.25);
    }
    const GridSpec g2 = GridSpec::uniform(2, 0.0, 1.0, 600);
    const VerifyReport constant = max_abs_on_grid({Expr(3)}, g2);
    CHECK(constant.argmax_index == std::vector<int>{0, 0});
    const VerifyReport peak = max_abs_on_grid({x(0) * x(1), Expr(Rational(1, 2))}, g2);
    CHECK(peak.argmax_index == std::vector<int>{599, 599});
    CHECK(peak.samples == 360000);
}

TEST_CASE("non-finite values fail") {
    const GridSpec g = GridSpec::uniform(1, 0.0, 1.0, 5, 1.0);
    const VerifyReport rep = max_abs_on_grid({exp(Expr(1000) * x())}, g);
    CHECK_FALSE(rep.pass);
}

TEST_CASE("unbound atoms are rejected") {
    const GridSpec g = GridSpec::uniform(1, 0.0, 1.0, 5);
    CHECK_THROWS_AS(evaluate_on_grid(y(), g), EvalError);
    CHECK_THROWS_AS(evaluate_on_grid(Expr(Atom::param("f")), g), EvalError);
    CHECK_THROWS_AS(evaluate_on_grid(x(1), g), EvalError);
}

TEST_CASE("Wronskian current is conserved along the straight line") {
    const ModelSpec fp = load_model(model_path("free_particle.vf"));
    const Form lambda = fp.lagrangian_form();
    const NoetherCurrent w = pair_current(lambda, fp.vecfield("psiA"), fp.vecfield("psiB"));
    const GridSpec g = GridSpec::uniform(1, 0.0, 1.0, 33, 1e-12);
    const VerifyReport rep = pullback_eval(w.current, fp.section("ext1"), g);
    CHECK(rep.pass);
    CHECK(rep.max_residual <= 1e-12);
    CHECK(rep.samples == 33);
    // The current itself is the nonzero constant Wronskian.
    SectionPullback pb(fp.section("ext1"));
    const Expr value = pullback(w.current, pb).coefficient({});
    CHECK(value.is_constant());
    CHECK_FALSE(value.is_zero());
}

TEST_CASE("non-extremal section reports the Euler-Lagrange residual") {
    const Section cubic{{x() * x() * x()}};
    const GridSpec g = GridSpec::uniform(1, 0.0, 1.0, 33, 1e-12);
    const VerifyReport rep = pullback_eval(euler_lagrange(free_particle()).form, cubic, g);
    CHECK_FALSE(rep.pass);
    CHECK(rep.max_residual == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(rep.argmax_index == std::vector<int>{32});
    // Residual -6x pointwise.
    SectionPullback pb(cubic);
    CHECK(pb(euler_lagrange(free_particle()).coefficient(0)) == Expr(-6) * x());
}

TEST_CASE("plane-wave pair current is conserved along the flat connection") {
    const YMModel m = build_ym(GaugeGroup::SU2, 4);
    const auto waves = default_plane_waves(4);
    const NoetherCurrent pc = pair_current_parallel(m.lagrangian(), plane_wave_field(m, waves[0]),
                                                    plane_wave_field(m, waves[1]));
    const GridSpec g = GridSpec::uniform(4, -1.0, 1.0, 9, 1e-9);
    const VerifyReport rep = pullback_eval(pc.current, m.flat_section(), g);
    CHECK(rep.pass);
    CHECK(rep.samples == 6561);
    // The current does not vanish identically, so the check is not vacuous.
    SectionPullback pb(m.flat_section());
    std::vector<Expr> comps;
    const Form along = pullback(pc.current, pb);
    for (const auto& [wedge, c] : along.terms()) comps.push_back(c);
    REQUIRE_FALSE(comps.empty());
    CHECK(max_abs_on_grid(comps, g).max_residual > 1e-3);
}

TEST_CASE("finite differences match the first variation on the free particle") {
    const Section gamma{{x() * x()}};
    const VecField psi = VecField::vertical({x() * (Expr(1) - x())}, 1);
    const GridSpec g = GridSpec::uniform(1, 0.0, 1.0, 1001, 1e-6);
    const VerifyReport rep = finite_difference_check(free_particle(), gamma, psi, 1e-5, g);
    CHECK(rep.pass);
    CHECK(rep.max_residual <= 1e-6);
    CHECK(rep.reference == doctest::Approx(-1.0 / 3.0).epsilon(1e-5));
    CHECK(rep.estimate == doctest::Approx(-1.0 / 3.0).epsilon(1e-5));

    const VerifyReport zero = finite_difference_check(free_particle(), gamma, VecField::vertical({Expr()}, 1), 1e-5, g);
    CHECK(zero.reference == 0.0);
    CHECK(zero.estimate == 0.0);
    CHECK(zero.pass);

    CHECK_THROWS_AS(finite_difference_check(free_particle(), gamma, VecField::vertical({y()}, 1), 1e-5, g),
                    std::invalid_argument);
    CHECK_THROWS_AS(finite_difference_check(free_particle(), gamma, psi, 0.0, g), std::invalid_argument);
}

TEST_CASE("finite-difference error scales with the square of the step") {
    const Form quartic = (Expr(Rational(1, 4)) * pow(y({0}), 4)) * Form::volume(1);
    const Section gamma{{x() * x()}};
    const VecField psi = VecField::vertical({x() * (Expr(1) - x())}, 1);
    const GridSpec g = GridSpec::uniform(1, 0.0, 1.0, 201, 1e-6);
    const double e1 = finite_difference_check(quartic, gamma, psi, 1e-2, g).max_residual;
    const double e2 = finite_difference_check(quartic, gamma, psi, 2e-2, g).max_residual;
    REQUIRE(e1 > 0.0);
    CHECK(e2 / e1 == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("wave equation: extremal pullback and finite differences") {
    const ModelSpec wave = load_model(model_path("wave.vf"));
    const Form lambda = wave.lagrangian_form();
    const GridSpec g = GridSpec::uniform(2, 0.0, 1.0, 41, 1e-12);
    CHECK(pullback_eval(euler_lagrange(lambda).form, wave.section("travelling"), g).pass);
    CHECK_FALSE(pullback_eval(euler_lagrange(lambda).form, wave.section("separable"), g).pass);
    GridSpec gf = g;
    gf.tolerance = 1e-6;
    const VerifyReport rep = finite_difference_check(lambda, wave.section("separable"), wave.vecfield("profile"), 1e-5, gf);
    CHECK(rep.pass);
    CHECK(std::fabs(rep.reference) > 1e-2);
    const VerifyReport bump = finite_difference_check(lambda, wave.section("separable"), wave.vecfield("bump"), 1e-5, gf);
    CHECK(bump.pass);
    CHECK(std::fabs(bump.reference) > 1e-3);
}

TEST_CASE("relative floor widens the tolerance") {
    GridSpec g = GridSpec::uniform(1, 0.0, 1.0, 5, 1e-12);
    const Expr e = Expr(1000) * x() + Expr(Rational(1, 1000));
    CHECK_FALSE(max_abs_on_grid({e}, g).pass);
    g.relative_floor = 2.0;
    const VerifyReport rep = max_abs_on_grid({e}, g);
    CHECK(rep.pass);
    CHECK(rep.tolerance == doctest::Approx(1e-12 + 2.0 * rep.scale));
}

TEST_CASE("report JSON") {
    const VerifyReport rep = max_abs_on_grid({x()}, GridSpec::uniform(1, 0.0, 2.0, 3));
    const auto j = nlohmann::json::parse(report_json(rep));
    CHECK(j["schema"] == "varfield-json/1");
    CHECK(j["kind"] == "verify_report");
    CHECK(j["max_residual"].get<double>() == 2.0);
    CHECK(j["argmax_index"] == nlohmann::json::array({2}));
    CHECK(j["pass"] == false);
    CHECK(j["samples"] == 3);
}

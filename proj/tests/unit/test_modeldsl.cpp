// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support/generators.hpp"
#include "varfield/modeldsl.hpp"
#include "varfield/render.hpp"
#include "varfield/varops.hpp"

using namespace varfield;

namespace {
MultiIndex mi(std::vector<int> e) { return MultiIndex::from_entries(e); }
Expr y(std::vector<int> J = {}, int s = 0) { return Expr(Atom::jet(s, mi(J))); }
Expr x(int i = 0) { return Expr(Atom::base(i)); }

std::string model_path(const char* name) { return std::string(VARFIELD_SOURCE_DIR) + "/models/" + name; }

ParseError parse_error_of(const std::string& text) {
    try {
        (void)parse_model(text);
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("model parsed without error: " << text);
    return ParseError(0, 0, "");
}
}  // namespace

TEST_CASE("free particle model file") {
    const ModelSpec m = load_model(model_path("free_particle.vf"));
    CHECK(m.n == 1);
    CHECK(m.m() == 1);
    REQUIRE(m.lagrangian.has_value());
    CHECK(*m.lagrangian == Expr(Rational(1, 2)) * y({0}) * y({0}));
    CHECK(m.vecfield("psiA").psi[0] == Expr(1));
    CHECK(m.vecfield("psiB").psi[0] == x());
    CHECK(m.vecfield("psiB").xi[0].is_zero());
    CHECK(m.section("ext1").components[0] == Expr(2) + Expr(3) * x());
    const JetContext ctx = m.context();
    CHECK(ctx.base_names == std::vector<std::string>{"x"});
    CHECK(ctx.field_names == std::vector<std::string>{"y"});
}

TEST_CASE("Euler-Lagrange form rendering") {
    const ModelSpec m = load_model(model_path("free_particle.vf"));
    const SourceForm e = euler_lagrange(m.lagrangian_form());
    const JetContext ctx = m.context();
    CHECK(render_form(e.form, ctx) == "-y_{1,1} ω∧dx");
    CHECK(render_form(e.form, ctx, OutputFormat::Latex) == "-y_{11}\\,\\omega\\wedge dx");
    CHECK(render_form(Form(), ctx) == "0");
    CHECK(render_form(Form::volume(1), ctx) == "dx");
    CHECK(render_expr(Expr(Rational(1, 2)) * y({0}) * y({0}), ctx) == "1/2*y_{1}^2");
    CHECK(render_expr(Expr(Rational(-3, 2)) * y({0}) * y({0}), ctx, OutputFormat::Latex) == "-\\frac{3}{2} y_{1}^{2}");
}

TEST_CASE("two-dimensional rendering") {
    const JetContext ctx(2, 2);
    const Form f = (x(0) + y({1}, 1)) * wedge(Form::omega(2, 0), Form::volume(2));
    CHECK(render_form(f, ctx) == "(x1 + y2_{2}) ω^{y1}∧dx1∧dx2");
    const Form current = x(1) * Form::volume_minus(2, 0) - y({0}) * Form::volume_minus(2, 1);
    CHECK(render_current(current, ctx) == "(x2) ds_1 + (-y1_{1}) ds_2");
    CHECK_THROWS_AS(render_current(Form::volume(2), ctx), std::invalid_argument);
}

TEST_CASE("JSON round trip of the Wronskian current") {
    const ModelSpec m = load_model(model_path("free_particle.vf"));
    const Form lambda = m.lagrangian_form();
    const NoetherCurrent w = pair_current(lambda, m.vecfield("psiA"), m.vecfield("psiB"));
    const JetContext ctx = m.context();
    const std::string doc = render_form(w.current, ctx, OutputFormat::Json);
    CHECK(form_from_json(doc) == w.current);
    const std::string edoc = render_expr(w.component(0), ctx, OutputFormat::Json);
    CHECK(expr_from_json(edoc) == w.component(0));
    CHECK_THROWS_AS(form_from_json(edoc), std::invalid_argument);
    CHECK_THROWS_AS(expr_from_json("{not json"), std::invalid_argument);
}

TEST_CASE("random expressions and forms survive plain and JSON round trips") {
    gen::Rng r(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = r.uniform(1, 3);
        const int m = r.uniform(1, 2);
        const JetContext ctx(n, m);
        const ModelSpec spec = ModelSpec::from_context(ctx);
        gen::PolyShape s;
        s.n = n;
        s.m = m;
        s.max_jet_order = 2;
        Expr e = gen::random_poly(r, s);
        if (trial % 3 == 0) e = e + Expr(r.small_rational()) * sin(gen::random_base_poly(r, n));
        if (trial % 5 == 0) e = e * exp(x(0) * y({}, 0));
        const std::string text = render_expr(e, ctx);
        CHECK_MESSAGE(parse_expression(text, ModelSpec(spec)) == e, text);
        CHECK(expr_from_json(render_expr(e, ctx, OutputFormat::Json)) == e);
        const Form f = gen::random_form(r, n, m, 2, r.uniform(0, n + 1));
        CHECK(form_from_json(render_form(f, ctx, OutputFormat::Json)) == f);
    }
}

TEST_CASE("Einstein summation agrees with explicit loops") {
    const ModelSpec einstein = parse_model(R"(
dim 2
metric = diag(1, -1)
field u[a:2]
lagrangian = 1/2*ginv[mu,nu]*d(mu, u[a])*d(nu, u[a]) - 1/2*u[a]*u[a]
)");
    const ModelSpec explicit_model = parse_model(R"(
dim 2
field u[a:2]
lagrangian = 1/2*(u[1]_{1}^2 - u[1]_{2}^2 + u[2]_{1}^2 - u[2]_{2}^2) \
             - 1/2*(u[1]^2 + u[2]^2)
)");
    CHECK(*einstein.lagrangian == *explicit_model.lagrangian);
    CHECK(einstein.context().field_names == std::vector<std::string>{"u[1]", "u[2]"});

    const ModelSpec traces = parse_model(R"(
dim 3
const delta[a:3, b:3] symmetric = identity
const eps[a:3, b:3, c:3] antisymmetric = levicivita
field y
def tr = delta[a,a]
def full = eps[a,b,c]*eps[a,b,c]
def contracted[c, d] = eps[a,b,c]*eps[a,b,d]
lagrangian = tr + full
)");
    CHECK(traces.def("tr").scalar() == Expr(3));
    CHECK(traces.def("full").scalar() == Expr(6));
    CHECK(traces.def("contracted").at({1, 1}) == Expr(2));
    CHECK(traces.def("contracted").at({0, 1}).is_zero());
    CHECK(*traces.lagrangian == Expr(9));
}

TEST_CASE("divergence through a repeated derivative index") {
    const ModelSpec m = parse_model(R"(
dim 2
field v[i:2]
def div = d(i, v[i])
def grad[i] = d(i, v[1]*v[2])
lagrangian = div^2
)");
    const Expr v1 = Expr(Atom::jet(0)), v2 = Expr(Atom::jet(1));
    CHECK(m.def("div").scalar() == y({0}, 0) + y({1}, 1));
    CHECK(m.def("grad").at({1}) == total_derivative(v1 * v2, 1));
    CHECK(parse_indexed("d2(v[1])", m).scalar() == y({1}, 0));
}

TEST_CASE("Yang-Mills style model with indexed field") {
    const ModelSpec m = parse_model(R"(
dim 4
metric = diag(1, -1, -1, -1)
const c[A:3, B:3, C:3] antisymmetric = levicivita
const delta[A:3, B:3] symmetric = identity
field w[A:3, mu:4]
def F[A, mu, nu] = d(mu, w[A,nu]) - d(nu, w[A,mu]) + c[A,B,C]*w[B,mu]*w[C,nu]
def Fup[A, mu, nu] = ginv[mu,a]*ginv[nu,b]*F[A,a,b]
lagrangian = -1/4*delta[A,B]*F[A,mu,nu]*Fup[B,mu,nu]
)");
    CHECK(m.m() == 12);
    CHECK(m.field("w").coordinate({1, 2}) == 6);
    CHECK(m.context().field_names[6] == "w[2,3]");
    const IndexedTensor& F = m.def("F");
    CHECK(F.at({0, 0, 1}) == -F.at({0, 1, 0}));
    CHECK(F.at({2, 3, 3}).is_zero());
    // F^1_{12} = d_1 w^1_2 - d_2 w^1_1 + w^2_1 w^3_2 - w^3_1 w^2_2
    auto w = [](int A, int mu, std::vector<int> J = {}) { return Expr(Atom::jet(A * 4 + mu, MultiIndex::from_entries(J))); };
    CHECK(F.at({0, 0, 1}) == w(0, 1, {0}) - w(0, 0, {1}) + w(1, 0) * w(2, 1) - w(2, 0) * w(1, 1));
    REQUIRE(m.lagrangian.has_value());
    CHECK(jet_order(*m.lagrangian) == 1);
}

TEST_CASE("parse errors carry positions") {
    SUBCASE("free index in scalar position") {
        const ParseError e = parse_error_of("dim 2\nfield w[A:3, mu:2]\nlagrangian = w[A, mu]\n");
        CHECK(e.line() == 3);
        CHECK(e.column() == 14);
        CHECK(e.message().find("free index in scalar position") != std::string::npos);
    }
    SUBCASE("unbalanced sum") {
        const ParseError e = parse_error_of("dim 2\nfield w[A:3]\ndef s[A] = w[A] + w[1]\n");
        CHECK(e.line() == 3);
        CHECK(e.message().find("unbalanced index") != std::string::npos);
    }
    SUBCASE("index three times") {
        const ParseError e = parse_error_of("dim 2\nfield w[A:3]\nlagrangian = w[A]*w[A]*w[A]\n");
        CHECK(e.message().find("3 or more times") != std::string::npos);
    }
    SUBCASE("range mismatch") {
        const ParseError e = parse_error_of("dim 2\nfield w[A:3]\nfield v[a:2]\nlagrangian = w[A]*v[A]\n");
        CHECK(e.message().find("ranges") != std::string::npos);
    }
    SUBCASE("unknown symbol") {
        const ParseError e = parse_error_of("dim 1\nfield y\n\n# comment\nlagrangian = z + y\n");
        CHECK(e.line() == 5);
        CHECK(e.column() == 14);
        CHECK(e.message() == "unknown symbol 'z'");
    }
    SUBCASE("missing dim") { CHECK(parse_error_of("field y\n").message().find("dim") != std::string::npos); }
    SUBCASE("symmetry violation") {
        CHECK(parse_error_of("dim 1\nconst k[a:2,b:2] symmetric = table(1,2,3,4)\nfield y\n").message().find("symmetry") !=
              std::string::npos);
    }
    SUBCASE("non-projectable vector field") {
        CHECK(parse_error_of("dim 1\nfield y\nvecfield bad = x: y\n").message().find("projectable") != std::string::npos);
    }
    SUBCASE("section depending on jets") {
        CHECK_THROWS_AS(parse_model("dim 1\nfield y\nsection s = y: y_{1}\n"), ParseError);
    }
    SUBCASE("division by a field") {
        CHECK(parse_error_of("dim 1\nfield y\nlagrangian = 1/y\n").message().find("division") != std::string::npos);
    }
    SUBCASE("jet index out of range") {
        CHECK(parse_error_of("dim 1\nfield y\nlagrangian = y_{2}\n").message().find("out of range") != std::string::npos);
    }
    CHECK_THROWS_AS(load_model("/nonexistent/model.vf"), std::runtime_error);
}

TEST_CASE("vector fields with base and indexed components") {
    const ModelSpec m = parse_model(R"(
dim 2
field u[a:2]
param f
vecfield rot = u[1]: -u[2]; u[2]: u[1]
vecfield shift = x1: 1; u[a]: f*u[a]
section s = u[1]: x1 + x2; u[2]: x1*x2
)");
    const VecField& rot = m.vecfield("rot");
    CHECK(rot.psi[0] == -Expr(Atom::jet(1)));
    CHECK(rot.psi[1] == Expr(Atom::jet(0)));
    const VecField& shift = m.vecfield("shift");
    CHECK(shift.xi[0] == Expr(1));
    CHECK(shift.psi[1] == Expr(Atom::param("f")) * Expr(Atom::jet(1)));
    CHECK(m.section("s").components[1] == x(0) * x(1));
}

// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "doctest.h"
#include "varfield/parallel.hpp"
#include "varfield/ymcase.hpp"

using namespace varfield;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

const YMModel& model(int dim) {
    static const YMModel m2 = build_ym(GaugeGroup::SU2, 2);
    static const YMModel m3 = build_ym(GaugeGroup::SU2, 3);
    static const YMModel m4 = build_ym(GaugeGroup::SU2, 4);
    return dim == 2 ? m2 : dim == 3 ? m3 : m4;
}

/// Part of e homogeneous of the given degree in the jet coordinates.
Expr jet_degree_part(const Expr& e, unsigned degree) {
    ExprBuilder acc;
    for (const auto& t : e.terms()) {
        unsigned d = 0;
        for (const auto& f : t.mono)
            if (f.atom.is_jet()) d += f.power;
        if (d == degree) acc.add(Term{t.mono, t.coeff});
    }
    return acc.build();
}

/// Replaces every jet w^sigma_J by the matching derivative of the symbolic field psi.
Expr jets_to_psi(const Expr& e, const YMModel& m) {
    return substitute(e, [&m](const Atom& a) -> std::optional<Expr> {
        if (!a.is_jet()) return std::nullopt;
        const int A = a.id / m.dim;
        const int mu = a.id % m.dim;
        return Expr(Atom::param("psi[" + std::to_string(A + 1) + "," + std::to_string(mu + 1) + "]", a.index));
    });
}

Expr flat(const Expr& e) {
    return substitute(e, [](const Atom& a) -> std::optional<Expr> {
        if (a.is_jet()) return Expr();
        return std::nullopt;
    });
}

}  // namespace

TEST_CASE("shipped model files match the generator") {
    for (int d = 2; d <= 4; ++d) {
        const std::string path = std::string(VARFIELD_SOURCE_DIR) + "/models/yangmills_su2_d" + std::to_string(d) + ".vf";
        CHECK(read_file(path) == ym_model_text(GaugeGroup::SU2, d));
    }
    CHECK_THROWS_AS(ym_model_text(GaugeGroup::SU2, 5), std::invalid_argument);
    CHECK_THROWS_AS(build_ym(GaugeGroup::SU2, 1), std::invalid_argument);
    CHECK_THROWS_AS(parse_gauge_group("su3"), std::invalid_argument);
}

TEST_CASE("model structure") {
    CHECK(model(2).m() == 6);
    CHECK(model(2).spec.m() == 6);
    CHECK(model(4).spec.m() == 12);
    // Regression snapshot of the expanded Lagrangian size.
    CHECK(model(2).spec.lagrangian->size() == 30);
    CHECK(model(3).spec.lagrangian->size() == 90);
    CHECK(model(4).spec.lagrangian->size() == 180);
    CHECK(model(4).context().field_names[model(4).coordinate(2, 3)] == "w[3,4]");

    const YMModel& m = model(4);
    CHECK(flat(*m.spec.lagrangian).is_zero());
    const IndexedTensor& F = m.spec.def("F");
    for (int A = 0; A < 3; ++A)
        for (int mu = 0; mu < 4; ++mu)
            for (int nu = 0; nu < 4; ++nu) CHECK((F.at({A, mu, nu}) + F.at({A, nu, mu})).is_zero());
    const ConstDecl& c = m.spec.constants.at("c");
    const IndexedTensor shape{{}, c.ranges, {}};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int e = 0; e < 3; ++e) {
                const Rational v = c.values[shape.flat({a, b, e})];
                CHECK(v == -c.values[shape.flat({b, a, e})]);
                CHECK(v == -c.values[shape.flat({a, e, b})]);
            }
    CHECK(c.values[shape.flat({0, 1, 2})] == Rational(1));
}

TEST_CASE("engine reproduces the reference expressions") {
    for (int d : {2, 3}) {
        CAPTURE(d);
        const ComparisonReport e = compare_euler(model(d));
        CHECK(e.match);
        CHECK(e.components == 3 * d);
        const ComparisonReport j = compare_jacobi(model(d));
        CHECK(j.match);
        const ComparisonReport p = compare_pair_current(model(d));
        CHECK(p.match);
        CHECK(p.components == d);
        const ComparisonReport z = compare_degenerate_pair(model(d));
        CHECK(z.match);
    }
    // The references are not trivially zero.
    CHECK_FALSE(ym_reference_euler(model(2)).is_zero());
    CHECK_FALSE(ym_reference_jacobi(model(2)).antisymmetric.is_zero());
    CHECK_FALSE(ym_reference_pair_current(model(2)).current.is_zero());
}

TEST_CASE("a corrupted reference is reported") {
    std::string text = ym_model_text(GaugeGroup::SU2, 2);
    const std::string term = "+ c[A,Z,D]*w[Z,la]*d(mu, w[D,ep])";
    const auto pos = text.find(term);
    REQUIRE(pos != std::string::npos);
    text[pos] = '-';
    YMModel bad = build_ym(GaugeGroup::SU2, 2);
    bad.spec = parse_model(text);
    const ComparisonReport r = compare_euler(bad);
    CHECK_FALSE(r.match);
    CHECK(r.mismatched > 0);
    CHECK_FALSE(r.first_residual.empty());

    std::string pair_text = ym_model_text(GaugeGroup::SU2, 2);
    const std::string eta = "(ginv[xi,s]*ginv[rho,nu] - etaS2";
    const auto p2 = pair_text.find(eta);
    REQUIRE(p2 != std::string::npos);
    pair_text.replace(p2, eta.size(), "(ginv[xi,s]*ginv[rho,nu] + etaS2");
    bad.spec = parse_model(pair_text);
    CHECK_FALSE(compare_pair_current(bad).match);
}

TEST_CASE("gauge Noether identity: covariant divergence of E vanishes off shell") {
    for (int d : {2, 3}) {
        const YMModel& m = model(d);
        const SourceForm e = euler_lagrange(m.lagrangian());
        for (int B = 0; B < 3; ++B) {
            Expr div;
            for (int nu = 0; nu < d; ++nu) {
                div += total_derivative(e.coefficient(m.coordinate(B, nu)), nu);
                for (int C = 0; C < 3; ++C)
                    for (int D = 0; D < 3; ++D) {
                        const int sign = (C - B + 3) % 3 == 1 && (D - C + 3) % 3 == 1 ? 1
                                         : (B - C + 3) % 3 == 1 && (C - D + 3) % 3 == 1 ? -1
                                                                                        : 0;
                        if (sign == 0) continue;
                        div += Expr(sign) * Expr(Atom::jet(m.coordinate(C, nu))) * e.coefficient(m.coordinate(D, nu));
                    }
            }
            CHECK(div.is_zero());
        }
    }
}

TEST_CASE("linearization at the flat connection") {
    for (int d : {2, 3}) {
        const YMModel& m = model(d);
        const SourceForm e = euler_lagrange(m.lagrangian());
        const SourceForm j = jacobi_morphism(m.lagrangian(), m.generic_field("psi"));
        // Quadratic truncation of the Lagrangian, a free Maxwell-type theory per generator.
        const Form quad = jet_degree_part(*m.spec.lagrangian, 2) * Form::volume(d);
        const SourceForm maxwell = euler_lagrange(quad);
        for (int s = 0; s < m.m(); ++s) {
            CHECK(flat(j.coefficient(s)) == jets_to_psi(maxwell.coefficient(s), m));
            CHECK(jet_degree_part(e.coefficient(s), 1) == maxwell.coefficient(s));
        }
        // Maxwell operator: eta^{la mu} eta^{ep nu} (w_{ep,la mu} - w_{la,ep mu}).
        for (int B = 0; B < 3; ++B)
            for (int nu = 0; nu < d; ++nu) {
                Expr ref;
                for (int la = 0; la < d; ++la) {
                    const Rational g(la == 0 ? 1 : -1);
                    const Rational gn(nu == 0 ? 1 : -1);
                    ref += (g * gn) * (Expr(Atom::jet(m.coordinate(B, nu), MultiIndex::from_entries({la, la}))) -
                                       Expr(Atom::jet(m.coordinate(B, la), MultiIndex::from_entries({nu, la}))));
                }
                CHECK(maxwell.coefficient(m.coordinate(B, nu)) == ref);
            }
    }
}

TEST_CASE("parallel fan-out agrees with the serial operators") {
    const YMModel& m = model(2);
    const VecField& psi = m.generic_field("psi");
    const VecField& psit = m.generic_field("psit");
    const SourceForm serial = jacobi_morphism(m.lagrangian(), psi);
    CHECK(jacobi_morphism_parallel(m.lagrangian(), psi, 1).form == serial.form);
    CHECK(jacobi_morphism_parallel(m.lagrangian(), psi, 3).form == serial.form);
    const NoetherCurrent pc = pair_current(m.lagrangian(), psi, psit);
    CHECK(pair_current_parallel(m.lagrangian(), psi, psit, 4).current == pc.current);
}

TEST_CASE("plane waves are Jacobi fields along the flat connection") {
    for (int d : {2, 3, 4}) {
        CAPTURE(d);
        const YMModel& m = model(d);
        const Section vacuum = m.flat_section();
        const auto waves = default_plane_waves(d);
        std::vector<VecField> fields;
        for (const auto& w : waves) {
            CHECK(minkowski_product(w.k, w.k).is_zero());
            CHECK(minkowski_product(w.k, w.eps).is_zero());
            const VecField f = plane_wave_field(m, w);
            const JacobiCheck jc = is_jacobi_field(m.lagrangian(), f, &vacuum);
            CHECK(jc.is_jacobi);
            fields.push_back(f);
        }
        if (d >= 3) {
            // Both halves of the reference split vanish separately for these waves.
            auto bind = [&](const Expr& e, const VecField& f) {
                return substitute(flat(e), [&](const Atom& a) -> std::optional<Expr> {
                    if (!a.is_param()) return std::nullopt;
                    const std::string& nm = ParamRegistry::name(a.id);
                    if (nm.rfind("psi[", 0) != 0) return std::nullopt;
                    const int A = nm[4] - '1';
                    const int mu = nm[6] - '1';
                    return iterated_derivative(f.psi[static_cast<std::size_t>(m.coordinate(A, mu))], a.index);
                });
            };
            const JacobiSplit split = ym_reference_jacobi(m);
            for (int s = 0; s < m.m(); ++s) {
                CHECK(bind(split.antisymmetric.coefficient(s), fields[0]).is_zero());
                CHECK(bind(split.symmetric.coefficient(s), fields[0]).is_zero());
            }
        }
        // A massive wave is not a Jacobi field.
        PlaneWave heavy = waves[0];
        heavy.k[1] = Rational(2);
        CHECK_FALSE(is_jacobi_field(m.lagrangian(), plane_wave_field(m, heavy), &vacuum).is_jacobi);
        CHECK_THROWS_AS(plane_wave_field(m, PlaneWave{{Rational(1)}, {Rational(1)}, {}}), std::invalid_argument);
    }
}

TEST_CASE("self-adjointness along the flat connection") {
    for (int d : {2, 4}) {
        const YMModel& m = model(d);
        const auto waves = default_plane_waves(d);
        const VecField f1 = plane_wave_field(m, waves[0]);
        const VecField f2 = plane_wave_field(m, waves[1]);
        const Form lambda = m.lagrangian();
        const Form pairing = contract_source(f2, jacobi_morphism(lambda, f1)) - contract_source(f1, jacobi_morphism(lambda, f2));
        CHECK(pullback(pairing, m.flat_section()).is_zero());
    }
}

TEST_CASE("harness JSON and cancellation") {
    const std::vector<ComparisonReport> reports{compare_euler(model(2)), compare_pair_current(model(2))};
    const auto j = nlohmann::json::parse(reports_json(reports));
    CHECK(j["schema"] == "varfield-json/1");
    CHECK(j["reports"].size() == 2);
    CHECK(j["reports"][0]["match"] == true);

    CancelToken token;
    token.cancel();
    HarnessOptions opts;
    opts.cancel = &token;
    CHECK_THROWS_AS(compare_jacobi(model(3), opts), Cancelled);
    CHECK(worker_count() >= 1);
}

// SPDX-License-Identifier: Apache-2.0
#include "varfield/ymcase.hpp"

#include <json.hpp>

#include <chrono>
#include <sstream>

#include "varfield/render.hpp"

namespace varfield {

GaugeGroup parse_gauge_group(const std::string& name) {
    if (name == "su2") return GaugeGroup::SU2;
    throw std::invalid_argument("unsupported gauge group '" + name + "'");
}

const VecField& YMModel::generic_field(const std::string& param) const {
    if (param != "psi" && param != "psit") throw std::invalid_argument("generic fields are 'psi' and 'psit'");
    return spec.vecfield(param);
}

Section YMModel::flat_section() const { return Section{std::vector<Expr>(static_cast<std::size_t>(m()))}; }

std::string ym_model_text(GaugeGroup group, int dim) {
    if (group != GaugeGroup::SU2) throw std::invalid_argument("unsupported gauge group");
    if (dim < 2 || dim > 4) throw std::invalid_argument("Yang-Mills models exist for dim 2, 3 and 4");
    std::string diag = "1";
    for (int i = 1; i < dim; ++i) diag += ", -1";
    const std::string N = std::to_string(dim);
    std::ostringstream os;
    os << "# SU(2) Yang-Mills theory on flat " << N << "-dimensional space-time.\n"
       << "# Generated by build_ym; signature (+,-,...,-), c = eps, delta = identity.\n"
       << "dim " << N << "\n"
       << "metric = diag(" << diag << ")\n"
       << "const c[A:3, B:3, C:3] antisymmetric = levicivita\n"
       << "const delta[A:3, B:3] symmetric = identity\n"
       << "field w[A:3, mu:" << N << "]\n"
       << "param psi[A:3, mu:" << N << "]\n"
       << "param psit[A:3, mu:" << N << "]\n"
       << "\n"
       << "# Field strength and Lagrangian.\n"
       << "def F[A, mu, nu] = d(mu, w[A,nu]) - d(nu, w[A,mu]) + c[A,B,C]*w[B,mu]*w[C,nu]\n"
       << "lagrangian = -1/4*F[A,mu,nu]*ginv[mu,rho]*ginv[nu,sig]*F[B,rho,sig]*delta[A,B]\n"
       << "\n"
       << "# Symbolic vertical variations.\n"
       << "vecfield psi = w[A,mu]: psi[A,mu]\n"
       << "vecfield psit = w[A,mu]: psit[A,mu]\n"
       << "\n"
       << "# Euler-Lagrange expressions E^nu_B.\n"
       << "def EulerRef[nu, B] = delta[B,A]*ginv[la,mu]*ginv[ep,nu]*(d(mu, d(la, w[A,ep])) - d(mu, d(ep, w[A,la])) \\\n"
       << "        + c[A,Z,D]*d(mu, w[Z,la])*w[D,ep] + c[A,Z,D]*w[Z,la]*d(mu, w[D,ep])) \\\n"
       << "    + ginv[la,mu]*ginv[ep,nu]*delta[D,A]*(d(la, w[D,ep]) - d(ep, w[D,la]) + c[D,E,G]*w[E,la]*w[G,ep]) \\\n"
       << "        *c[A,B,Z]*w[Z,mu]\n"
       << "\n"
       << "# Adjoint covariant derivatives, (nabla_mu psi)^A_s and of delta-lowered fields.\n"
       << "def Dpsi[A, mu, s] = d(mu, psi[A,s]) + c[A,C,D]*w[C,mu]*psi[D,s]\n"
       << "def DpsiL[Z, mu, s] = d(mu, psi[B,s]*delta[B,Z]) + c[Z,C,D]*w[C,mu]*(psi[B,s]*delta[B,D])\n"
       << "def DpsitL[Z, mu, s] = d(mu, psit[B,s]*delta[B,Z]) + c[Z,C,D]*w[C,mu]*(psit[B,s]*delta[B,D])\n"
       << "def Gd[B, al, s] = (Dpsi[A,al,s] - Dpsi[A,s,al])*delta[B,A]\n"
       << "def DG[B, be, al, s] = d(be, Gd[B,al,s]) + c[B,C,D]*w[C,be]*Gd[D,al,s]\n"
       << "\n"
       << "# Jacobi operator: antisymmetric and symmetric halves in (s, be).\n"
       << "def etaA[nu, s, be, al] = 1/2*(ginv[nu,s]*ginv[be,al] - ginv[nu,be]*ginv[s,al])\n"
       << "def etaS[nu, s, be, al] = 1/2*(ginv[nu,s]*ginv[be,al] + ginv[nu,be]*ginv[s,al])\n"
       << "def JacAnti[nu, B] = etaA[nu,s,be,al]*(DG[B,be,al,s] + F[D,be,s]*delta[A,D]*c[A,B,Z]*psi[Z,al])\n"
       << "def JacSym[nu, B] = etaS[nu,s,be,al]*DG[B,be,al,s]\n"
       << "\n"
       << "# Current of the pair (psi, psit), components along ds_xi.\n"
       << "def etaA2[rho, xi, s, nu] = 1/2*(ginv[rho,xi]*ginv[s,nu] - ginv[rho,s]*ginv[xi,nu])\n"
       << "def etaS2[rho, s, xi, nu] = 1/2*(ginv[rho,s]*ginv[xi,nu] + ginv[rho,xi]*ginv[s,nu])\n"
       << "def PairRef[xi] = etaA2[rho,xi,s,nu]*delta[B,A]*c[A,Z,D]*w[D,s]*(psi[B,nu]*psit[Z,rho] - psi[Z,rho]*psit[B,nu]) \\\n"
       << "    + (ginv[xi,s]*ginv[rho,nu] - etaS2[rho,s,xi,nu])*(psi[Z,nu]*DpsitL[Z,s,rho] - psit[Z,rho]*DpsiL[Z,s,nu])\n";
    return os.str();
}

YMModel build_ym(GaugeGroup group, int dim) {
    YMModel m;
    m.group = group;
    m.dim = dim;
    m.generators = 3;
    m.spec = parse_model(ym_model_text(group, dim));
    return m;
}

namespace {

std::vector<Expr> def_by_field(const YMModel& m, const std::string& name) {
    const IndexedTensor& t = m.spec.def(name);
    std::vector<Expr> out(static_cast<std::size_t>(m.m()));
    for (int A = 0; A < m.generators; ++A)
        for (int mu = 0; mu < m.dim; ++mu) out[static_cast<std::size_t>(m.coordinate(A, mu))] = t.at({mu, A});
    return out;
}

}  // namespace

SourceForm ym_reference_euler(const YMModel& model) { return make_source_form(model.dim, def_by_field(model, "EulerRef")); }

JacobiSplit ym_reference_jacobi(const YMModel& model) {
    return {make_source_form(model.dim, def_by_field(model, "JacAnti")),
            make_source_form(model.dim, def_by_field(model, "JacSym"))};
}

Expr identify_variation_fields(const Expr& e) {
    return substitute(e, [](const Atom& a) -> std::optional<Expr> {
        if (!a.is_param()) return std::nullopt;
        const std::string& nm = ParamRegistry::name(a.id);
        if (nm.rfind("psit[", 0) != 0) return std::nullopt;
        return Expr(Atom::param("psi" + nm.substr(4), a.index));
    });
}

NoetherCurrent ym_reference_pair_current(const YMModel& model, bool same_fields) {
    const int n = model.dim;
    const IndexedTensor& t = model.spec.def("PairRef");
    NoetherCurrent out;
    out.current = Form(n, 1, n - 1);
    for (int xi = 0; xi < n; ++xi) {
        Expr c = t.at({xi});
        if (same_fields) c = identify_variation_fields(c);
        out.current += c * Form::volume_minus(n, xi);
    }
    out.vertical_part = out.current;
    out.horizontal_part = Form(n, 1, n - 1);
    return out;
}

VecField plane_wave_field(const YMModel& model, const PlaneWave& wave) {
    if (static_cast<int>(wave.k.size()) != model.dim || static_cast<int>(wave.eps.size()) != model.dim)
        throw std::invalid_argument("plane wave vectors must have one entry per base dimension");
    Expr phase;
    for (int mu = 0; mu < model.dim; ++mu) phase += wave.k[static_cast<std::size_t>(mu)] * Expr(Atom::base(mu));
    const Expr profile = cos(phase);
    std::vector<Expr> fiber(static_cast<std::size_t>(model.m()));
    for (int A = 0; A < model.generators; ++A)
        for (int mu = 0; mu < model.dim; ++mu)
            fiber[static_cast<std::size_t>(model.coordinate(A, mu))] =
                (wave.eps[static_cast<std::size_t>(mu)] * wave.a[static_cast<std::size_t>(A)]) * profile;
    return VecField::vertical(fiber, model.dim);
}

Rational minkowski_product(const std::vector<Rational>& q, const std::vector<Rational>& p) {
    if (q.size() != p.size() || q.empty()) throw std::invalid_argument("covector size mismatch");
    Rational s = q[0] * p[0];
    for (std::size_t i = 1; i < q.size(); ++i) s -= q[i] * p[i];
    return s;
}

std::array<PlaneWave, 2> default_plane_waves(int dim) {
    auto vec = [dim](std::vector<int> v) {
        std::vector<Rational> out;
        for (int i = 0; i < dim; ++i) out.emplace_back(v[static_cast<std::size_t>(i)]);
        return out;
    };
    PlaneWave w1;
    PlaneWave w2;
    w1.a = {Rational(1), Rational(0), Rational(0)};
    w2.a = dim == 2 ? std::array<Rational, 3>{Rational(0), Rational(1), Rational(0)}
                    : std::array<Rational, 3>{Rational(1), Rational(1), Rational(0)};
    switch (dim) {
        case 2:
            w1.k = vec({1, 1});
            w1.eps = vec({1, 1});
            w2.k = vec({1, -1});
            w2.eps = vec({1, -1});
            break;
        case 3:
            w1.k = vec({1, 1, 0});
            w1.eps = vec({0, 0, 1});
            w2.k = vec({1, -1, 0});
            w2.eps = vec({0, 0, 1});
            break;
        case 4:
            w1.k = vec({1, 1, 0, 0});
            w1.eps = vec({0, 0, 1, 0});
            w2.k = vec({1, -1, 0, 0});
            w2.eps = vec({0, 0, 1, 0});
            break;
        default:
            throw std::invalid_argument("plane waves are defined for dim 2, 3 and 4");
    }
    return {w1, w2};
}

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

void record(ComparisonReport& r, const Expr& residual, const JetContext& ctx) {
    ++r.components;
    if (residual.is_zero()) return;
    if (r.mismatched++ == 0) {
        r.residual_terms = residual.size();
        r.first_residual = render_expr(residual, ctx);
    }
}

void finish(ComparisonReport& r, Clock::time_point start) {
    r.match = r.mismatched == 0;
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

ComparisonReport compare_euler(const YMModel& model, const HarnessOptions& opts) {
    CancelScope scope(opts.cancel);
    ComparisonReport r;
    r.name = "euler";
    const auto start = Clock::now();
    const SourceForm engine = euler_lagrange(model.lagrangian());
    const SourceForm ref = ym_reference_euler(model);
    const JetContext ctx = model.context();
    for (int s = 0; s < model.m(); ++s) record(r, engine.coefficient(s) - ref.coefficient(s), ctx);
    finish(r, start);
    return r;
}

ComparisonReport compare_jacobi(const YMModel& model, const HarnessOptions& opts) {
    CancelScope scope(opts.cancel);
    ComparisonReport r;
    r.name = "jacobi";
    const auto start = Clock::now();
    const SourceForm engine = jacobi_morphism_parallel(model.lagrangian(), model.generic_field("psi"), opts.workers);
    const SourceForm ref = ym_reference_jacobi(model).total();
    const JetContext ctx = model.context();
    for (int s = 0; s < model.m(); ++s) record(r, engine.coefficient(s) - ref.coefficient(s), ctx);
    finish(r, start);
    return r;
}

ComparisonReport compare_pair_current(const YMModel& model, const HarnessOptions& opts) {
    CancelScope scope(opts.cancel);
    ComparisonReport r;
    r.name = "pair_current";
    const auto start = Clock::now();
    const NoetherCurrent engine =
        pair_current_parallel(model.lagrangian(), model.generic_field("psi"), model.generic_field("psit"), opts.workers);
    const NoetherCurrent ref = ym_reference_pair_current(model);
    const JetContext ctx = model.context();
    for (int i = 0; i < model.dim; ++i) record(r, engine.component(i) - ref.component(i), ctx);
    finish(r, start);
    return r;
}

ComparisonReport compare_degenerate_pair(const YMModel& model, const HarnessOptions& opts) {
    CancelScope scope(opts.cancel);
    ComparisonReport r;
    r.name = "degenerate_pair";
    const auto start = Clock::now();
    const VecField& psi = model.generic_field("psi");
    const NoetherCurrent engine = pair_current_parallel(model.lagrangian(), psi, psi, opts.workers);
    const NoetherCurrent ref = ym_reference_pair_current(model, true);
    const JetContext ctx = model.context();
    for (int i = 0; i < model.dim; ++i) {
        record(r, engine.component(i), ctx);
        record(r, ref.component(i), ctx);
    }
    finish(r, start);
    return r;
}

std::string reports_json(const std::vector<ComparisonReport>& reports, bool include_timing) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json j{{"name", r.name},
                         {"match", r.match},
                         {"components", r.components},
                         {"mismatched", r.mismatched},
                         {"residual_terms", r.residual_terms},
                         {"first_residual", r.first_residual}};
        if (include_timing) j["seconds"] = r.seconds;
        arr.push_back(j);
    }
    return nlohmann::json{{"schema", "varfield-json/1"}, {"kind", "ym_harness"}, {"reports", arr}}.dump();
}

}  // namespace varfield

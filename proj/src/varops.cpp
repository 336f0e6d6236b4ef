// SPDX-License-Identifier: Apache-2.0
#include "varfield/varops.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "varfield/parallel.hpp"

namespace varfield {

namespace {

Rational parity(int k) { return Rational(k % 2 == 0 ? 1 : -1); }

Form formal_derivative_iter(Form rho, const MultiIndex& J) {
    for (int i : J.entries()) {
        if (rho.is_zero()) break;
        rho = formal_derivative_form(rho, i);
    }
    return rho;
}

/// All (sigma, I) with omega^sigma_I occurring in rho.
std::set<std::pair<int, MultiIndex>> contact_factors(const Form& rho) {
    std::set<std::pair<int, MultiIndex>> out;
    for (const auto& [w, c] : rho.terms())
        for (const auto& b : w)
            if (b.is_omega()) out.emplace(b.index, b.J);
    return out;
}

/// Every sub-multi-index of M, M itself included.
std::vector<MultiIndex> sub_indices(const MultiIndex& M, int n) {
    std::vector<MultiIndex> out{MultiIndex{}};
    for (int i = 0; i < n; ++i) {
        std::vector<MultiIndex> next;
        for (const auto& base : out) {
            MultiIndex cur = base;
            next.push_back(cur);
            for (int c = 0; c < M.count(i); ++c) {
                cur = cur.with(i);
                next.push_back(cur);
            }
        }
        out = std::move(next);
    }
    return out;
}

/// prod_i binom(I_i + J_i, J_i).
Rational sorted_weight(const MultiIndex& I, const MultiIndex& J) {
    Rational w(1);
    for (int i = 0; i < kMaxBaseDim; ++i) w = w * binomial(I.count(i) + J.count(i), J.count(i));
    return w;
}

void require_horizontal_top(const Form& lambda) {
    if (lambda.is_zero()) return;
    if (!lambda.is_horizontal() || lambda.degree() != lambda.base_dim())
        throw std::invalid_argument("expected a horizontal n-form");
}

void require_vertical(const VecField& psi) {
    if (!psi.is_vertical()) throw std::invalid_argument("vector field must be vertical");
}

Form zero_top(const Form& like) { return Form(like.base_dim(), like.order(), like.base_dim()); }

}  // namespace

// ---------------------------------------------------------------------------

Expr SourceForm::coefficient(int sigma) const {
    const int n = form.base_dim();
    Wedge w;
    for (int i = 0; i < n; ++i) w.push_back(BasisOne::dx(i));
    w.push_back(BasisOne::omega(sigma));
    return parity(n) * form.coefficient(w);
}

SourceForm make_source_form(int n, const std::vector<Expr>& coefficients) {
    Form f(n, 1, n + 1);
    for (std::size_t s = 0; s < coefficients.size(); ++s) {
        Wedge w{BasisOne::omega(static_cast<int>(s))};
        for (int i = 0; i < n; ++i) w.push_back(BasisOne::dx(i));
        f.add_term(w, coefficients[s]);
    }
    return {1, f};
}

SourceForm interior_euler(const Form& rho, int k) {
    if (k < 1) throw std::invalid_argument("interior Euler operator needs contact degree k >= 1");
    const int n = rho.base_dim();
    const Form p = contact_part(rho, k);
    std::map<int, Form> blocks;
    for (const auto& [sigma, I] : contact_factors(p)) {
        poll_active();
        const Form a = interior_jet_direction(p, sigma, I);
        blocks[sigma] += Expr(parity(I.order())) * formal_derivative_iter(a, I);
    }
    Form out(n, p.order(), n + k);
    for (const auto& [sigma, b] : blocks) out += wedge(Form::omega(n, sigma), b);
    return {k, Expr(Rational(1, k)) * out};
}

Form strip_volume(const Form& rho) {
    const int n = rho.base_dim();
    const int k = rho.degree() - n;
    if (k < 0) throw std::invalid_argument("form degree below base dimension");
    FormBuilder out(n, rho.order(), k);
    for (const auto& [w, c] : rho.terms()) {
        for (int i = 0; i < n; ++i)
            if (!(w[static_cast<std::size_t>(i)] == BasisOne::dx(i)))
                throw std::invalid_argument("term does not contain the volume form");
        Wedge rest(w.begin() + n, w.end());
        out.add(rest, c, parity(n * k));
    }
    return out.build();
}

ResidualDecomposition residual(const Form& rho, int k) {
    if (k < 1) throw std::invalid_argument("residual operator needs contact degree k >= 1");
    const int n = rho.base_dim();
    const Form p = contact_part(rho, k);
    ResidualDecomposition out;

    std::map<int, std::vector<MultiIndex>> present;
    for (const auto& [sigma, I] : contact_factors(p)) {
        out.psi[{sigma, I}] = Expr(Rational(1, k)) * interior_jet_direction(p, sigma, I);
        present[sigma].push_back(I);
    }

    // d_J psi^M, memoized along J.
    std::map<std::tuple<int, MultiIndex, MultiIndex>, Form> dpsi;
    std::function<const Form&(int, const MultiIndex&, const MultiIndex&)> derived =
        [&](int sigma, const MultiIndex& M, const MultiIndex& J) -> const Form& {
        const auto key = std::make_tuple(sigma, M, J);
        if (auto it = dpsi.find(key); it != dpsi.end()) return it->second;
        Form value;
        if (J.empty()) {
            value = out.psi.at({sigma, M});
        } else {
            const int last = J.last();
            value = formal_derivative_form(derived(sigma, M, J.without(last)), last);
        }
        return dpsi.emplace(key, std::move(value)).first->second;
    };

    std::map<MultiIndex, Form> omega_zeta;
    for (const auto& [sigma, Ms] : present) {
        std::set<MultiIndex> targets;
        for (const auto& M : Ms)
            for (const auto& I : sub_indices(M, n)) targets.insert(I);
        for (const auto& I : targets) {
            poll_active();
            Form z(n, p.order(), n + k - 1);
            for (const auto& M : Ms) {
                if (!M.contains(I)) continue;
                const MultiIndex J = M.minus(I);
                z += Expr(parity(J.order()) * sorted_weight(I, J)) * derived(sigma, M, J);
            }
            omega_zeta[I] += wedge(Form::omega(n, sigma), z);
            out.zeta[{sigma, I}] = std::move(z);
        }
    }

    Form i_form(n, p.order(), n + k);
    if (auto it = omega_zeta.find(MultiIndex{}); it != omega_zeta.end()) i_form = it->second;
    out.i_part = {k, i_form};

    Form r(n, p.order(), n + k - 1);
    for (const auto& [I, oz] : omega_zeta) {
        if (I.empty()) continue;
        const Form phi = strip_volume(oz);
        out.phi[I] = phi;
        for (int j = 0; j < n; ++j) {
            if (I.count(j) == 0) continue;
            const Rational weight(I.count(j), I.order());
            r += Expr(weight) * wedge(formal_derivative_iter(phi, I.without(j)), Form::volume_minus(n, j));
        }
    }
    out.r_part = Expr(parity(k)) * r;
    return out;
}

SourceForm euler_lagrange(const Form& lambda) {
    require_horizontal_top(lambda);
    if (lambda.is_zero()) {
        const int n = lambda.base_dim();
        return {1, Form(n, lambda.order(), n + 1)};
    }
    return interior_euler(ext_d(lambda), 1);
}

Form momentum(const Form& lambda) {
    require_horizontal_top(lambda);
    const int n = lambda.base_dim();
    if (lambda.is_zero()) return Form(n, lambda.order(), n);
    return -residual(ext_d(lambda), 1).r_part;
}

Expr NoetherCurrent::component(int i) const {
    const int n = current.base_dim();
    Wedge w;
    for (int j = 0; j < n; ++j)
        if (j != i) w.push_back(BasisOne::dx(j));
    return parity(i) * current.coefficient(w);
}

NoetherCurrent noether_current(const Form& lambda, const VecField& psi) {
    require_horizontal_top(lambda);
    const int n = lambda.base_dim();
    NoetherCurrent out;
    out.vertical_part = Form(n, lambda.order(), n - 1);
    out.horizontal_part = Form(n, lambda.order(), n - 1);
    if (!lambda.is_zero()) {
        ProlongedField pf(psi);
        out.vertical_part = interior_vertical(pf, momentum(lambda));
        out.horizontal_part = interior_horizontal(psi, lambda);
    }
    out.current = out.vertical_part + out.horizontal_part;
    if (out.current.is_zero()) out.current = Form(n, lambda.order(), n - 1);
    return out;
}

Form contract_source(const VecField& psi, const SourceForm& e) {
    const int n = e.form.base_dim();
    Form out = interior_vertical(psi, e.form);
    if (out.is_zero()) return Form(n, e.form.order(), n);
    return out;
}

// ---------------------------------------------------------------------------

Form VariationDecomposition::total() const {
    Form out = euler_term;
    for (const auto& t : current_terms) out += t;
    return out;
}

VariationDecomposition variation_decompose(const Form& lambda, const std::vector<VecField>& fields) {
    if (fields.empty()) throw std::invalid_argument("variation needs at least one vector field");
    const int n = lambda.base_dim();
    const std::size_t l = fields.size();
    std::vector<Form> nested{lambda};
    for (std::size_t s = 0; s < l; ++s) nested.push_back(contract_source(fields[s], euler_lagrange(nested.back())));

    VariationDecomposition out;
    out.euler_term = nested.back();
    for (std::size_t s = 0; s < l; ++s) {
        Form t = nested[s];
        Form current;
        for (std::size_t u = s; u < l; ++u) {
            poll_active();
            current = noether_current(t, fields[u]).current;
            t = horizontal_d(current, n);
            if (t.is_zero()) t = Form(n, current.order(), n);
        }
        out.currents.push_back(current);
        out.current_terms.push_back(t);
    }
    return out;
}

Form iterated_lie_derivative(const Form& lambda, const std::vector<VecField>& fields) {
    Form t = lambda;
    for (const auto& psi : fields) {
        t = horizontal_part(lie_derivative(psi, t));
        if (t.is_zero()) t = zero_top(lambda);
    }
    return t;
}

SourceForm jacobi_morphism(const Form& lambda, const VecField& psi) {
    require_vertical(psi);
    return euler_lagrange(contract_source(psi, euler_lagrange(lambda)));
}

namespace {

/// The deformed Lagrangian psi . E split into its nonzero fiber components.
std::vector<Form> deformed_components(const Form& lambda, const VecField& psi) {
    const int n = lambda.base_dim();
    const SourceForm e = euler_lagrange(lambda);
    std::vector<Form> parts;
    for (int s = 0; s < psi.m(); ++s) {
        const Expr c = psi.psi[static_cast<std::size_t>(s)] * e.coefficient(s);
        if (!c.is_zero()) parts.push_back(c * Form::volume(n));
    }
    return parts;
}

}  // namespace

SourceForm jacobi_morphism_parallel(const Form& lambda, const VecField& psi, int workers) {
    require_vertical(psi);
    const int n = lambda.base_dim();
    const std::vector<Form> parts = deformed_components(lambda, psi);
    std::vector<SourceForm> results(parts.size());
    parallel_for(parts.size(), [&](std::size_t i) { results[i] = euler_lagrange(parts[i]); }, workers);
    Form total(n, 1, n + 1);
    for (const auto& r : results) total += r.form;
    return {1, total};
}

NoetherCurrent pair_current_parallel(const Form& lambda, const VecField& psi1, const VecField& psi2, int workers) {
    require_vertical(psi1);
    require_vertical(psi2);
    const int n = lambda.base_dim();
    const std::vector<Form> parts = deformed_components(lambda, psi1);
    std::vector<NoetherCurrent> results(parts.size());
    parallel_for(parts.size(), [&](std::size_t i) { results[i] = noether_current(parts[i], psi2); }, workers);
    NoetherCurrent out;
    out.current = Form(n, 1, n - 1);
    out.vertical_part = out.current;
    out.horizontal_part = out.current;
    for (const auto& r : results) {
        out.current += r.current;
        out.vertical_part += r.vertical_part;
        out.horizontal_part += r.horizontal_part;
    }
    return out;
}

SourceForm jacobi_linearized(const Form& lambda, const VecField& psi) {
    require_vertical(psi);
    const int n = lambda.base_dim();
    const SourceForm e = euler_lagrange(lambda);
    ProlongedField pf(psi);
    std::vector<Expr> coeffs(psi.psi.size());
    for (std::size_t rho = 0; rho < coeffs.size(); ++rho) {
        ExprBuilder acc;
        for (const auto& [a, g] : gradient(e.coefficient(static_cast<int>(rho)))) {
            if (!a.is_jet()) continue;
            acc.add(pf.vertical(a.id, a.index) * g);
        }
        coeffs[rho] = acc.build();
    }
    return make_source_form(n, coeffs);
}

void require_extremal(const Form& lambda, const Section& gamma) {
    SectionPullback pb(gamma);
    const Form on_shell = coefficients_along(euler_lagrange(lambda).form, pb);
    if (!on_shell.is_zero()) throw NotExtremal("section is not an extremal: the Euler-Lagrange form does not vanish", on_shell);
}

JacobiCheck is_jacobi_field(const Form& lambda, const VecField& psi, const Section* gamma) {
    const SourceForm j = jacobi_morphism(lambda, psi);
    JacobiCheck out;
    if (gamma != nullptr) {
        require_extremal(lambda, *gamma);
        SectionPullback pb(*gamma);
        out.residual = coefficients_along(j.form, pb);
    } else {
        out.residual = j.form;
    }
    out.is_jacobi = out.residual.is_zero();
    return out;
}

NoetherCurrent pair_current(const Form& lambda, const VecField& psi1, const VecField& psi2) {
    require_vertical(psi1);
    require_vertical(psi2);
    return noether_current(contract_source(psi1, euler_lagrange(lambda)), psi2);
}

Form check_commutator_identity(const Form& lambda, const VecField& psi1, const VecField& psi2) {
    require_vertical(psi1);
    require_vertical(psi2);
    const int n = lambda.base_dim();
    const SourceForm e = euler_lagrange(lambda);
    const Form lhs = contract_source(psi1, euler_lagrange(contract_source(psi2, e))) -
                     contract_source(psi2, euler_lagrange(contract_source(psi1, e)));
    const Form rhs = contract_source(lie_bracket(psi1, psi2), e) +
                     horizontal_d(pair_current(lambda, psi1, psi2).current, n);
    const Form diff = lhs - rhs;
    return diff.is_zero() ? zero_top(lambda) : diff;
}

Form strong_conservation_check(const Form& lambda, const std::vector<VecField>& fields, int s) {
    const int l = static_cast<int>(fields.size());
    if (s < 1 || s >= l) throw std::invalid_argument("strong conservation needs 1 <= s < l");
    const int n = lambda.base_dim();
    const std::vector<VecField> first(fields.begin(), fields.begin() + s);
    Form t = iterated_lie_derivative(lambda, first);
    for (int u = s; u < l; ++u) {
        poll_active();
        t = horizontal_d(noether_current(t, fields[static_cast<std::size_t>(u)]).current, n);
        if (t.is_zero()) t = zero_top(lambda);
    }
    return t;
}

}  // namespace varfield

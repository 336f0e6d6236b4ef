// SPDX-License-Identifier: Apache-2.0
#include "varfield/jet.hpp"

#include <stdexcept>

namespace varfield {

JetContext::JetContext(int base_dim, int fiber_dim, int order) : n(base_dim), m(fiber_dim), max_order(order) {
    if (n < 1 || n > kMaxBaseDim) throw std::invalid_argument("base dimension out of range");
    if (m < 1) throw std::invalid_argument("fiber dimension must be positive");
    if (max_order < 1) throw std::invalid_argument("jet order must be positive");
    for (int i = 0; i < n; ++i) base_names.push_back(n == 1 ? "x" : "x" + std::to_string(i + 1));
    for (int s = 0; s < m; ++s) field_names.push_back(m == 1 ? "y" : "y" + std::to_string(s + 1));
}

Expr total_derivative(const Expr& e, int i) {
    return apply_derivation(e, [i](const Atom& a) -> Expr {
        switch (a.kind) {
            case AtomKind::Base:
                return a.id == i ? Expr(1) : Expr();
            case AtomKind::Jet:
                return Expr(Atom::jet(a.id, a.index.with(i)));
            case AtomKind::Param:
                return Expr(Atom::param(a.id, a.index.with(i)));
            case AtomKind::Func:
                break;
        }
        return {};
    });
}

Expr iterated_derivative(const Expr& e, const MultiIndex& J) {
    Expr out = e;
    for (int i : J.entries()) {
        if (out.is_zero()) break;
        out = total_derivative(out, i);
    }
    return out;
}

Expr base_partial(const Expr& e, int i) {
    return apply_derivation(e, [i](const Atom& a) -> Expr {
        if (a.is_base()) return a.id == i ? Expr(1) : Expr();
        if (a.is_param()) return Expr(Atom::param(a.id, a.index.with(i)));
        return {};
    });
}

// ---------------------------------------------------------------------------

VecField::VecField(std::vector<Expr> base, std::vector<Expr> fiber) : xi(std::move(base)), psi(std::move(fiber)) {}

VecField VecField::zero(int n, int m) {
    return VecField(std::vector<Expr>(static_cast<std::size_t>(n)), std::vector<Expr>(static_cast<std::size_t>(m)));
}

VecField VecField::vertical(std::vector<Expr> fiber, int n) {
    return VecField(std::vector<Expr>(static_cast<std::size_t>(n)), std::move(fiber));
}

bool VecField::is_vertical() const {
    for (const auto& c : xi)
        if (!c.is_zero()) return false;
    return true;
}

void VecField::validate() const {
    for (const auto& c : xi)
        if (depends_on_jets(c)) throw std::invalid_argument("vector field is not projectable: base component depends on fiber");
    for (const auto& c : psi)
        if (jet_order(c) > 0) throw std::invalid_argument("vector field component depends on derivatives");
}

Expr VecField::characteristic(int sigma) const {
    Expr q = psi.at(static_cast<std::size_t>(sigma));
    for (int i = 0; i < n(); ++i) {
        const auto& c = xi[static_cast<std::size_t>(i)];
        if (!c.is_zero()) q -= Expr(Atom::jet(sigma, MultiIndex().with(i))) * c;
    }
    return q;
}

VecField VecField::horizontal_part() const {
    return VecField(xi, std::vector<Expr>(psi.size()));
}

VecField operator+(const VecField& a, const VecField& b) {
    if (a.n() != b.n() || a.m() != b.m()) throw std::invalid_argument("vector field shape mismatch");
    VecField out = a;
    for (std::size_t i = 0; i < out.xi.size(); ++i) out.xi[i] += b.xi[i];
    for (std::size_t s = 0; s < out.psi.size(); ++s) out.psi[s] += b.psi[s];
    return out;
}

VecField operator*(const Expr& c, const VecField& a) {
    VecField out = a;
    for (auto& e : out.xi) e = c * e;
    for (auto& e : out.psi) e = c * e;
    return out;
}

namespace {

/// Directional derivative of a function on Y along a projectable field.
Expr apply_field(const VecField& v, const Expr& f) {
    Expr out;
    for (int i = 0; i < v.n(); ++i) {
        const auto& c = v.xi[static_cast<std::size_t>(i)];
        if (!c.is_zero()) out += c * base_partial(f, i);
    }
    for (int s = 0; s < v.m(); ++s) {
        const auto& c = v.psi[static_cast<std::size_t>(s)];
        if (!c.is_zero()) out += c * partial(f, Atom::jet(s));
    }
    return out;
}

}  // namespace

VecField lie_bracket(const VecField& a, const VecField& b) {
    if (a.n() != b.n() || a.m() != b.m()) throw std::invalid_argument("vector field shape mismatch");
    VecField out = VecField::zero(a.n(), a.m());
    for (int i = 0; i < a.n(); ++i)
        out.xi[static_cast<std::size_t>(i)] =
            apply_field(a, b.xi[static_cast<std::size_t>(i)]) - apply_field(b, a.xi[static_cast<std::size_t>(i)]);
    for (int s = 0; s < a.m(); ++s)
        out.psi[static_cast<std::size_t>(s)] =
            apply_field(a, b.psi[static_cast<std::size_t>(s)]) - apply_field(b, a.psi[static_cast<std::size_t>(s)]);
    return out;
}

// ---------------------------------------------------------------------------

ProlongedField::ProlongedField(const VecField& field) : field_(field) {}

const Expr& ProlongedField::vertical(int sigma, const MultiIndex& J) {
    const auto key = std::make_pair(sigma, J);
    if (auto it = verticals_.find(key); it != verticals_.end()) return it->second;
    Expr value;
    if (J.empty()) {
        value = field_.characteristic(sigma);
    } else {
        const int last = J.last();
        value = total_derivative(vertical(sigma, J.without(last)), last);
    }
    return verticals_.emplace(key, std::move(value)).first->second;
}

const Expr& ProlongedField::component(int sigma, const MultiIndex& J) {
    const auto key = std::make_pair(sigma, J);
    if (auto it = components_.find(key); it != components_.end()) return it->second;
    Expr value = vertical(sigma, J);
    for (int i = 0; i < field_.n(); ++i) {
        const auto& c = field_.xi[static_cast<std::size_t>(i)];
        if (!c.is_zero()) value += Expr(Atom::jet(sigma, J.with(i))) * c;
    }
    return components_.emplace(key, std::move(value)).first->second;
}

std::map<std::pair<int, MultiIndex>, Expr> prolong_field(const VecField& psi, int k) {
    ProlongedField pf(psi);
    std::map<std::pair<int, MultiIndex>, Expr> out;
    for (int s = 0; s < psi.m(); ++s)
        for (int order = 0; order <= k; ++order)
            for (const auto& J : multi_indices_of_order(psi.n(), order)) out.emplace(std::make_pair(s, J), pf.component(s, J));
    return out;
}

// ---------------------------------------------------------------------------

void Section::validate() const {
    for (const auto& c : components)
        if (depends_on_jets(c)) throw std::invalid_argument("section component depends on fiber coordinates");
}

std::unordered_map<Atom, Expr, AtomHash> prolong_section(const Section& gamma, int n, int k) {
    SectionPullback pb(gamma);
    std::unordered_map<Atom, Expr, AtomHash> out;
    for (std::size_t s = 0; s < gamma.components.size(); ++s)
        for (int order = 0; order <= k; ++order)
            for (const auto& J : multi_indices_of_order(n, order))
                out.emplace(Atom::jet(static_cast<int>(s), J), pb.jet_value(static_cast<int>(s), J));
    return out;
}

SectionPullback::SectionPullback(Section gamma) : gamma_(std::move(gamma)) { gamma_.validate(); }

const Expr& SectionPullback::jet_value(int sigma, const MultiIndex& J) {
    const Atom key = Atom::jet(sigma, J);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    Expr value;
    if (J.empty()) {
        value = gamma_.components.at(static_cast<std::size_t>(sigma));
    } else {
        const int last = J.last();
        value = total_derivative(jet_value(sigma, J.without(last)), last);
    }
    return cache_.emplace(key, std::move(value)).first->second;
}

Expr SectionPullback::operator()(const Expr& e) {
    return substitute(e, [this](const Atom& a) -> std::optional<Expr> {
        if (!a.is_jet()) return std::nullopt;
        return jet_value(a.id, a.index);
    });
}

}  // namespace varfield

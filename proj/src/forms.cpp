// SPDX-License-Identifier: Apache-2.0
#include "varfield/forms.hpp"

#include <algorithm>
#include <stdexcept>

namespace varfield {

int contact_count(const Wedge& w) {
    int c = 0;
    for (const auto& b : w) c += b.is_omega() ? 1 : 0;
    return c;
}

int sort_wedge(Wedge& w) {
    int sign = 1;
    for (std::size_t i = 1; i < w.size(); ++i) {
        for (std::size_t j = i; j > 0; --j) {
            const auto c = w[j - 1] <=> w[j];
            if (c == 0) return 0;
            if (c < 0) break;
            std::swap(w[j - 1], w[j]);
            sign = -sign;
        }
    }
    return sign;
}

int merge_wedges(const Wedge& a, const Wedge& b, Wedge& out) {
    out.clear();
    out.reserve(a.size() + b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t inversions = 0;
    while (i < a.size() && j < b.size()) {
        const auto c = a[i] <=> b[j];
        if (c == 0) return 0;
        if (c < 0) {
            out.push_back(a[i++]);
        } else {
            inversions += a.size() - i;
            out.push_back(b[j++]);
        }
    }
    while (i < a.size()) out.push_back(a[i++]);
    while (j < b.size()) out.push_back(b[j++]);
    return (inversions % 2 == 0) ? 1 : -1;
}

namespace {

Rational sign_of(int s) { return Rational(s); }

int required_order(const Wedge& w, int floor) {
    int k = floor;
    for (const auto& b : w) {
        if (b.is_omega()) k = std::max(k, b.J.order() + 1);
        if (b.is_dytop()) k = std::max(k, b.J.order());
    }
    return k;
}

Expr y_of(int sigma, const MultiIndex& J) { return Expr(Atom::jet(sigma, J)); }

}  // namespace

// ---------------------------------------------------------------------------
// FormBuilder
// ---------------------------------------------------------------------------

void FormBuilder::add(const Wedge& w, const Expr& c, const Rational& scale) {
    if (c.is_zero() || scale.is_zero()) return;
    if (static_cast<int>(w.size()) != degree_) throw std::logic_error("form degree mismatch");
    acc_[w].add(c, scale);
}

Form FormBuilder::build() {
    Form f(n_, order_, degree_);
    int required = order_;
    for (auto& [w, b] : acc_) {
        Expr c = b.build();
        if (c.is_zero()) continue;
        required = std::max({required, jet_order(c), required_order(w, order_)});
        f.terms_.emplace(w, std::move(c));
    }
    acc_.clear();
    if (required > order_) f.raise_to(required);
    return f;
}

// ---------------------------------------------------------------------------
// Form
// ---------------------------------------------------------------------------

Form Form::scalar(int n, const Expr& c) {
    Form f(n, std::max(0, jet_order(c)), 0);
    if (!c.is_zero()) f.terms_.emplace(Wedge{}, c);
    return f;
}

Form Form::basis(int n, const BasisOne& b, const Expr& c) {
    Form f(n, 0, 1);
    f.add_term({b}, c);
    return f;
}

Form Form::omega(int n, int sigma, const MultiIndex& J) { return basis(n, BasisOne::omega(sigma, J)); }

Form Form::dy(int n, int sigma, const MultiIndex& J) {
    Form f(n, J.order(), 1);
    f.add_term({BasisOne::dytop(sigma, J)}, Expr(1));
    return f;
}

Form Form::volume(int n) {
    Wedge w;
    for (int i = 0; i < n; ++i) w.push_back(BasisOne::dx(i));
    Form f(n, 0, n);
    f.terms_.emplace(std::move(w), Expr(1));
    return f;
}

Form Form::volume_minus(int n, int i) {
    if (i < 0 || i >= n) throw std::out_of_range("volume_minus index out of range");
    Wedge w;
    for (int j = 0; j < n; ++j)
        if (j != i) w.push_back(BasisOne::dx(j));
    Form f(n, 0, n - 1);
    f.terms_.emplace(std::move(w), Expr(i % 2 == 0 ? 1 : -1));
    return f;
}

Expr Form::coefficient(const Wedge& w) const {
    if (auto it = terms_.find(w); it != terms_.end()) return it->second;
    return {};
}

bool Form::is_horizontal() const {
    for (const auto& [w, c] : terms_)
        for (const auto& b : w)
            if (!b.is_dx()) return false;
    return true;
}

bool Form::has_top_basis() const {
    for (const auto& [w, c] : terms_)
        for (const auto& b : w)
            if (b.is_dytop()) return true;
    return false;
}

void Form::add_term(Wedge w, const Expr& c) {
    if (c.is_zero()) return;
    const int sign = sort_wedge(w);
    if (sign == 0) return;
    if (terms_.empty() && degree_ != static_cast<int>(w.size())) degree_ = static_cast<int>(w.size());
    if (static_cast<int>(w.size()) != degree_) throw std::invalid_argument("form degree mismatch");
    const int need = std::max(required_order(w, order_), jet_order(c));
    if (need > order_) raise_to(need);
    for (std::size_t k = 0; k < w.size(); ++k) {
        const BasisOne b = w[k];
        if (!b.is_dytop() || b.J.order() == order_) continue;
        if (n_ < 1) throw std::logic_error("form has no base dimension");
        // dy_J = omega_J + y_{Ji} dx^i below the top order.
        Wedge w1 = w;
        w1[k] = BasisOne::omega(b.index, b.J);
        add_term(w1, sign_of(sign) * c);
        for (int i = 0; i < n_; ++i) {
            Wedge w2 = w;
            w2[k] = BasisOne::dx(i);
            add_term(w2, sign_of(sign) * c * y_of(b.index, b.J.with(i)));
        }
        return;
    }
    auto [it, inserted] = terms_.try_emplace(std::move(w), sign_of(sign) * c);
    if (!inserted) {
        it->second += sign_of(sign) * c;
        if (it->second.is_zero()) terms_.erase(it);
    }
}

void Form::raise_to(int new_order) {
    if (new_order < order_) throw std::invalid_argument("cannot lower the order of a form");
    if (new_order == order_) return;
    if (!has_top_basis()) {
        order_ = new_order;
        return;
    }
    if (n_ < 1) throw std::logic_error("form has no base dimension");
    FormBuilder out(n_, new_order, degree_);
    for (const auto& [w, c] : terms_) {
        // Expand the product of all top factors; the others pass through.
        std::vector<std::pair<Wedge, Expr>> partial{{Wedge{}, Expr(1)}};
        for (const auto& b : w) {
            if (!b.is_dytop()) continue;
            std::vector<std::pair<Wedge, Expr>> next;
            std::vector<std::pair<BasisOne, Expr>> pieces{{BasisOne::omega(b.index, b.J), Expr(1)}};
            for (int i = 0; i < n_; ++i) pieces.emplace_back(BasisOne::dx(i), y_of(b.index, b.J.with(i)));
            for (const auto& [pw, pc] : partial) {
                for (const auto& [piece, coeff] : pieces) {
                    // Append on the right to keep the original factor order.
                    Wedge appended = pw;
                    appended.push_back(piece);
                    next.emplace_back(std::move(appended), pc * coeff);
                }
            }
            partial = std::move(next);
        }
        // Put each expansion back in the slot of the factor it replaces.
        for (auto& [pw, pc] : partial) {
            Wedge full;
            full.reserve(w.size());
            std::size_t t = 0;
            for (const auto& b : w) full.push_back(b.is_dytop() ? pw[t++] : b);
            const int s = sort_wedge(full);
            if (s == 0) continue;
            out.add(full, pc * c, sign_of(s));
        }
    }
    *this = out.build();
    order_ = std::max(order_, new_order);
}

namespace {

Form combine(const Form& a, const Form& b, int sign) {
    if (a.is_zero() && a.base_dim() == 0) return sign > 0 ? b : -b;
    if (b.is_zero() && b.base_dim() == 0) return a;
    if (a.base_dim() != b.base_dim()) throw std::invalid_argument("forms over different bases");
    const int k = std::max(a.order(), b.order());
    const Form ra = raise_order(a, k);
    const Form rb = raise_order(b, k);
    if (!ra.is_zero() && !rb.is_zero() && ra.degree() != rb.degree())
        throw std::invalid_argument("adding forms of different degree");
    const int degree = ra.is_zero() ? rb.degree() : ra.degree();
    FormBuilder out(a.base_dim(), k, degree);
    for (const auto& [w, c] : ra.terms()) out.add(w, c);
    for (const auto& [w, c] : rb.terms()) out.add(w, c, Rational(sign));
    return out.build();
}

}  // namespace

Form operator+(const Form& a, const Form& b) { return combine(a, b, 1); }
Form operator-(const Form& a, const Form& b) { return combine(a, b, -1); }

Form Form::operator-() const {
    Form f = *this;
    for (auto& [w, c] : f.terms_) c = -c;
    return f;
}

Form operator*(const Expr& c, const Form& a) {
    FormBuilder out(a.base_dim(), a.order(), a.degree());
    for (const auto& [w, e] : a.terms()) out.add(w, c * e);
    return out.build();
}

bool operator==(const Form& a, const Form& b) {
    if (a.is_zero() || b.is_zero()) return a.is_zero() && b.is_zero();
    if (a.degree() != b.degree()) return false;
    const int k = std::max(a.order(), b.order());
    return raise_order(a, k).terms() == raise_order(b, k).terms();
}

Form Form::map_coefficients(const std::function<Expr(const Expr&)>& f) const {
    FormBuilder out(n_, order_, degree_);
    for (const auto& [w, c] : terms_) out.add(w, f(c));
    return out.build();
}

Form raise_order(const Form& rho, int new_order) {
    Form f = rho;
    f.raise_to(new_order);
    return f;
}

int coefficient_order(const Form& rho) {
    int k = -1;
    for (const auto& [w, c] : rho.terms()) k = std::max(k, jet_order(c));
    return k;
}

// ---------------------------------------------------------------------------
// Exterior algebra
// ---------------------------------------------------------------------------

Form wedge(const Form& a, const Form& b) {
    if (a.is_zero() || b.is_zero()) {
        const int n = std::max(a.base_dim(), b.base_dim());
        return Form(n, std::max(a.order(), b.order()), a.degree() + b.degree());
    }
    if (a.base_dim() != b.base_dim()) throw std::invalid_argument("forms over different bases");
    const int k = std::max(a.order(), b.order());
    const Form ra = raise_order(a, k);
    const Form rb = raise_order(b, k);
    FormBuilder out(a.base_dim(), k, a.degree() + b.degree());
    Wedge merged;
    for (const auto& [wa, ca] : ra.terms())
        for (const auto& [wb, cb] : rb.terms()) {
            const int s = merge_wedges(wa, wb, merged);
            if (s != 0) out.add(merged, ca * cb, Rational(s));
        }
    return out.build();
}

Form ext_d(const Form& rho) {
    const int n = rho.base_dim();
    const int K = rho.order();
    FormBuilder out(n, K, rho.degree() + 1);
    Wedge merged;
    auto push = [&](const Wedge& front, const Wedge& w, const Expr& e, int extra_sign) {
        const int s = merge_wedges(front, w, merged);
        if (s != 0) out.add(merged, e, Rational(s * extra_sign));
    };
    for (const auto& [w, c] : rho.terms()) {
        poll_active();
        for (const auto& [a, g] : gradient(c)) {
            switch (a.kind) {
                case AtomKind::Base:
                    push({BasisOne::dx(a.id)}, w, g, 1);
                    break;
                case AtomKind::Jet:
                    if (a.index.order() < K) {
                        push({BasisOne::omega(a.id, a.index)}, w, g, 1);
                        for (int i = 0; i < n; ++i) push({BasisOne::dx(i)}, w, g * y_of(a.id, a.index.with(i)), 1);
                    } else {
                        push({BasisOne::dytop(a.id, a.index)}, w, g, 1);
                    }
                    break;
                case AtomKind::Param:
                    for (int i = 0; i < n; ++i) push({BasisOne::dx(i)}, w, g * Expr(Atom::param(a.id, a.index.with(i))), 1);
                    break;
                case AtomKind::Func:
                    break;
            }
        }
        for (std::size_t j = 0; j < w.size(); ++j) {
            const BasisOne& b = w[j];
            if (!b.is_omega()) continue;
            Wedge rest = w;
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(j));
            const int sj = (j % 2 == 0) ? 1 : -1;
            for (int i = 0; i < n; ++i) {
                const MultiIndex Ji = b.J.with(i);
                const BasisOne next = Ji.order() < K ? BasisOne::omega(b.index, Ji) : BasisOne::dytop(b.index, Ji);
                push({BasisOne::dx(i), next}, rest, c, sj);
            }
        }
    }
    return out.build();
}

// ---------------------------------------------------------------------------
// Contact structure
// ---------------------------------------------------------------------------

ContactSplit contact_split(const Form& rho) {
    const Form r = raise_order(rho, rho.order() + 1);
    std::vector<FormBuilder> builders;
    for (int l = 0; l <= r.degree(); ++l) builders.emplace_back(r.base_dim(), r.order(), r.degree());
    for (const auto& [w, c] : r.terms()) builders[static_cast<std::size_t>(contact_count(w))].add(w, c);
    ContactSplit split;
    for (auto& b : builders) split.parts.push_back(b.build());
    return split;
}

Form contact_part(const Form& rho, int l) {
    const Form r = raise_order(rho, rho.order() + 1);
    FormBuilder out(r.base_dim(), r.order(), r.degree());
    for (const auto& [w, c] : r.terms())
        if (contact_count(w) == l) out.add(w, c);
    return out.build();
}

HVDifferentials horizontal_vertical_d(const Form& rho) {
    const ContactSplit split = contact_split(rho);
    HVDifferentials out;
    for (int l = 0; l < static_cast<int>(split.parts.size()); ++l) {
        const Form& p = split.part(l);
        if (p.is_zero()) continue;
        const Form dp = ext_d(p);
        out.dh += contact_part(dp, l);
        out.dv += contact_part(dp, l + 1);
    }
    if (out.dh.is_zero()) out.dh = Form(rho.base_dim(), rho.order() + 2, rho.degree() + 1);
    if (out.dv.is_zero()) out.dv = Form(rho.base_dim(), rho.order() + 2, rho.degree() + 1);
    return out;
}

Form formal_derivative_form(const Form& rho, int i) {
    const Form r = raise_order(rho, rho.order() + 1);
    FormBuilder out(r.base_dim(), r.order(), r.degree());
    for (const auto& [w, c] : r.terms()) {
        out.add(w, total_derivative(c, i));
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (!w[j].is_omega()) continue;
            Wedge shifted = w;
            shifted[j].J = shifted[j].J.with(i);
            const int s = sort_wedge(shifted);
            if (s != 0) out.add(shifted, c, Rational(s));
        }
    }
    return out.build();
}

Form horizontal_d(const Form& rho, int n) {
    Form out(n, rho.order() + 1, rho.degree() + 1);
    const Rational sign(rho.degree() % 2 == 0 ? 1 : -1);
    for (int i = 0; i < n; ++i) out += Expr(sign) * wedge(formal_derivative_form(rho, i), Form::dx(n, i));
    return out;
}

// ---------------------------------------------------------------------------
// Contractions
// ---------------------------------------------------------------------------

Form contract(const Form& rho, const std::function<Expr(const BasisOne&)>& pairing) {
    if (rho.degree() == 0) return Form(rho.base_dim(), rho.order(), 0);
    std::map<BasisOne, Expr> cache;
    auto pair_of = [&](const BasisOne& b) -> const Expr& {
        auto it = cache.find(b);
        if (it == cache.end()) it = cache.emplace(b, pairing(b)).first;
        return it->second;
    };
    FormBuilder out(rho.base_dim(), rho.order(), rho.degree() - 1);
    for (const auto& [w, c] : rho.terms()) {
        for (std::size_t j = 0; j < w.size(); ++j) {
            const Expr& p = pair_of(w[j]);
            if (p.is_zero()) continue;
            Wedge rest = w;
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(j));
            out.add(rest, c * p, Rational(j % 2 == 0 ? 1 : -1));
        }
    }
    return out.build();
}

Form interior(ProlongedField& psi, const Form& rho) {
    const VecField& v = psi.field();
    return contract(rho, [&](const BasisOne& b) -> Expr {
        switch (b.kind) {
            case BasisKind::DX:
                return v.xi.at(static_cast<std::size_t>(b.index));
            case BasisKind::Omega:
                return psi.vertical(b.index, b.J);
            case BasisKind::DyTop:
                return psi.component(b.index, b.J);
        }
        return {};
    });
}

Form interior(const VecField& psi, const Form& rho) {
    ProlongedField pf(psi);
    return interior(pf, rho);
}

Form interior_vertical(ProlongedField& psi, const Form& rho) {
    const Form r = rho.has_top_basis() ? raise_order(rho, rho.order() + 1) : rho;
    return contract(r, [&](const BasisOne& b) -> Expr {
        if (b.is_omega()) return psi.vertical(b.index, b.J);
        return {};
    });
}

Form interior_vertical(const VecField& psi, const Form& rho) {
    ProlongedField pf(psi);
    return interior_vertical(pf, rho);
}

Form interior_horizontal(const VecField& psi, const Form& rho) {
    const Form r = rho.has_top_basis() ? raise_order(rho, rho.order() + 1) : rho;
    return contract(r, [&](const BasisOne& b) -> Expr {
        if (b.is_dx()) return psi.xi.at(static_cast<std::size_t>(b.index));
        return {};
    });
}

Form interior_jet_direction(const Form& rho, int sigma, const MultiIndex& I) {
    return contract(rho, [&](const BasisOne& b) -> Expr {
        if (!b.is_dx() && b.index == sigma && b.J == I) return Expr(1);
        return {};
    });
}

Form lie_derivative(const VecField& psi, const Form& rho) {
    ProlongedField pf(psi);
    Form out = interior(pf, ext_d(rho));
    if (rho.degree() > 0) out += ext_d(interior(pf, rho));
    return out;
}

Form pullback(const Form& rho, SectionPullback& gamma) {
    const Form r = rho.has_top_basis() ? raise_order(rho, rho.order() + 1) : rho;
    FormBuilder out(r.base_dim(), 0, r.degree());
    for (const auto& [w, c] : r.terms())
        if (contact_count(w) == 0) out.add(w, gamma(c));
    return out.build();
}

Form pullback(const Form& rho, const Section& gamma) {
    SectionPullback pb(gamma);
    return pullback(rho, pb);
}

Form coefficients_along(const Form& rho, SectionPullback& gamma) {
    return rho.map_coefficients([&](const Expr& c) { return gamma(c); });
}

}  // namespace varfield

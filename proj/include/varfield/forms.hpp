// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <functional>
#include <map>
#include <vector>

#include "varfield/expr.hpp"
#include "varfield/jet.hpp"

namespace varfield {

enum class BasisKind : std::uint8_t { DX = 0, Omega = 1, DyTop = 2 };

/// One element of the contact-adapted coframe of J^kY:
/// dx^i, omega^sigma_J (|J| < k) or dy^sigma_J (|J| = k).
struct BasisOne {
    BasisKind kind = BasisKind::DX;
    int index = 0;  ///< base coordinate i for DX, field sigma otherwise
    MultiIndex J;

    static BasisOne dx(int i) { return {BasisKind::DX, i, {}}; }
    static BasisOne omega(int sigma, MultiIndex J = {}) { return {BasisKind::Omega, sigma, J}; }
    static BasisOne dytop(int sigma, MultiIndex J = {}) { return {BasisKind::DyTop, sigma, J}; }

    [[nodiscard]] bool is_dx() const noexcept { return kind == BasisKind::DX; }
    [[nodiscard]] bool is_omega() const noexcept { return kind == BasisKind::Omega; }
    [[nodiscard]] bool is_dytop() const noexcept { return kind == BasisKind::DyTop; }

    friend bool operator==(const BasisOne&, const BasisOne&) = default;
    friend std::strong_ordering operator<=>(const BasisOne& a, const BasisOne& b) noexcept {
        if (auto c = a.kind <=> b.kind; c != 0) return c;
        if (auto c = a.index <=> b.index; c != 0) return c;
        return a.J <=> b.J;
    }
};

/// Strictly increasing list of basis one-forms.
using Wedge = std::vector<BasisOne>;

/// Number of omega factors in a wedge monomial.
int contact_count(const Wedge& w);

/// Differential form on J^kY over an n-dimensional base, stored in the
/// contact-adapted basis of order k.
///
/// Coefficients never depend on jets above the ambient order; adding a term
/// whose coefficient does raises the whole form first. A default-constructed
/// form is the zero form and adopts the shape of whatever it is combined with.
class Form {
public:
    Form() = default;
    Form(int n, int order, int degree) : n_(n), order_(order), degree_(degree) {}

    static Form scalar(int n, const Expr& c);
    static Form basis(int n, const BasisOne& b, const Expr& c = Expr(1));
    static Form dx(int n, int i) { return basis(n, BasisOne::dx(i)); }
    /// omega^sigma_J, at order |J| + 1.
    static Form omega(int n, int sigma, const MultiIndex& J = {});
    /// dy^sigma_J, stored as the top basis element of order |J|.
    static Form dy(int n, int sigma, const MultiIndex& J = {});
    /// ds = dx^1 ^ ... ^ dx^n.
    static Form volume(int n);
    /// ds_i = d/dx^i contracted into ds.
    static Form volume_minus(int n, int i);

    [[nodiscard]] int base_dim() const noexcept { return n_; }
    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] const std::map<Wedge, Expr>& terms() const noexcept { return terms_; }
    [[nodiscard]] bool is_zero() const noexcept { return terms_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return terms_.size(); }
    /// Coefficient of a wedge monomial (0 when absent).
    [[nodiscard]] Expr coefficient(const Wedge& w) const;
    /// True iff every term is built from dx factors only.
    [[nodiscard]] bool is_horizontal() const;
    [[nodiscard]] bool has_top_basis() const;

    /// Adds c * w, sorting w with the permutation sign. Repeated factors
    /// vanish; dy^sigma_J below the top order is rewritten in the adapted basis.
    void add_term(Wedge w, const Expr& c);
    /// Rewrites every top-order dy^sigma_J and relabels to new_order.
    void raise_to(int new_order);

    friend Form operator+(const Form& a, const Form& b);
    friend Form operator-(const Form& a, const Form& b);
    friend Form operator*(const Expr& c, const Form& a);
    Form operator-() const;
    Form& operator+=(const Form& o) { return *this = *this + o; }
    Form& operator-=(const Form& o) { return *this = *this - o; }

    /// Equality as forms on the larger of the two ambient orders.
    friend bool operator==(const Form& a, const Form& b);

    /// Applies f to every coefficient, keeping the basis.
    [[nodiscard]] Form map_coefficients(const std::function<Expr(const Expr&)>& f) const;

private:
    friend class FormBuilder;
    int n_ = 0;
    int order_ = 0;
    int degree_ = 0;
    std::map<Wedge, Expr> terms_;
};

/// Bulk accumulator for forms: coefficients of equal monomials are summed
/// once at build time. Monomials passed in must already be sorted and valid
/// at the builder's order.
class FormBuilder {
public:
    FormBuilder(int n, int order, int degree) : n_(n), order_(order), degree_(degree) {}
    void add(const Wedge& w, const Expr& c, const Rational& scale = Rational(1));
    /// The accumulated form; its order is raised as needed by coefficients
    /// and contact factors.
    [[nodiscard]] Form build();

private:
    int n_, order_, degree_;
    std::map<Wedge, ExprBuilder> acc_;
};

/// Sorts a wedge monomial in place; returns the permutation sign, or 0 when
/// a factor repeats.
int sort_wedge(Wedge& w);
/// Concatenation a ^ b of sorted monomials: writes the sorted result and
/// returns its sign, 0 on a repeated factor.
int merge_wedges(const Wedge& a, const Wedge& b, Wedge& out);

/// Same form on J^{k'}Y, k' >= ambient order.
Form raise_order(const Form& rho, int new_order);

Form wedge(const Form& a, const Form& b);
/// Exterior derivative.
Form ext_d(const Form& rho);

struct ContactSplit {
    std::vector<Form> parts;  ///< parts[l] = p_l rho, each on order k+1
    [[nodiscard]] const Form& part(int l) const { return parts.at(static_cast<std::size_t>(l)); }
};

/// Canonical decomposition into contact-homogeneous components after one
/// order raise. parts has size degree + 1.
ContactSplit contact_split(const Form& rho);
/// p_l rho (empty form of the right degree when l is out of range).
Form contact_part(const Form& rho, int l);
/// Horizontalization h = p_0.
inline Form horizontal_part(const Form& rho) { return contact_part(rho, 0); }

struct HVDifferentials {
    Form dh;
    Form dv;
};

/// (d_H rho, d_V rho) from their definitions through the contact split.
HVDifferentials horizontal_vertical_d(const Form& rho);
/// d_H rho through formal derivatives: (-1)^q sum_i d_i rho ^ dx^i.
Form horizontal_d(const Form& rho, int n);
/// Formal derivative d_i acting on forms.
Form formal_derivative_form(const Form& rho, int i);

/// Generic contraction: pairing maps each basis one-form to a function.
Form contract(const Form& rho, const std::function<Expr(const BasisOne&)>& pairing);
/// j^k psi contracted into rho.
Form interior(ProlongedField& psi, const Form& rho);
Form interior(const VecField& psi, const Form& rho);
/// Vertical part of the prolongation, sum_J d_J Q^sigma d/dy^sigma_J, contracted into rho.
Form interior_vertical(ProlongedField& psi, const Form& rho);
Form interior_vertical(const VecField& psi, const Form& rho);
/// Horizontal part of the prolongation, xi^i d_i, contracted into rho.
Form interior_horizontal(const VecField& psi, const Form& rho);
/// Coordinate field d/dy^sigma_I (on a form raised above |I|) contracted into rho.
Form interior_jet_direction(const Form& rho, int sigma, const MultiIndex& I);

/// Lie derivative along j^k psi via Cartan's formula.
Form lie_derivative(const VecField& psi, const Form& rho);

/// Pullback along the prolongation of a section: a form on the base.
Form pullback(const Form& rho, SectionPullback& gamma);
Form pullback(const Form& rho, const Section& gamma);

/// Substitutes the prolonged section into every coefficient, keeping the
/// basis (contact factors included). Used to evaluate source forms on shell.
Form coefficients_along(const Form& rho, SectionPullback& gamma);

/// Highest jet order among all coefficients of rho (-1 when none).
int coefficient_order(const Form& rho);

}  // namespace varfield

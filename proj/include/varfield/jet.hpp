// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "varfield/cancel.hpp"
#include "varfield/expr.hpp"

namespace varfield {

/// Fibered chart (x^i, y^sigma) of a jet prolongation, with display names.
///
/// Indices are 0-based internally; names are what renderers print.
struct JetContext {
    int n = 1;          ///< base dimension
    int m = 1;          ///< fiber dimension
    int max_order = 2;  ///< working order; operations extend it as needed
    std::vector<std::string> base_names;   ///< size n
    std::vector<std::string> field_names;  ///< size m
    const CancelToken* cancel = nullptr;

    JetContext() = default;
    JetContext(int base_dim, int fiber_dim, int order = 2);

    [[nodiscard]] Atom x(int i) const { return Atom::base(i); }
    [[nodiscard]] Atom y(int sigma, const MultiIndex& J = {}) const { return Atom::jet(sigma, J); }
    [[nodiscard]] Expr xe(int i) const { return Expr(x(i)); }
    [[nodiscard]] Expr ye(int sigma, std::vector<int> entries = {}) const {
        return Expr(y(sigma, MultiIndex::from_entries(entries)));
    }
};

/// d_i e: the total (formal) derivative. d_i x^j = delta, d_i y_J = y_{Ji},
/// and param functions of x differentiate to their next derivative.
Expr total_derivative(const Expr& e, int i);
/// d_J e, composition of total derivatives over the entries of J.
Expr iterated_derivative(const Expr& e, const MultiIndex& J);
/// Partial derivative along x^i of a function on Y (jets held fixed,
/// param functions differentiated).
Expr base_partial(const Expr& e, int i);

/// Projectable vector field xi^i(x) d/dx^i + psi^sigma(x, y) d/dy^sigma.
struct VecField {
    std::vector<Expr> xi;   ///< size n, functions of x only
    std::vector<Expr> psi;  ///< size m, functions of x and order-0 jets

    VecField() = default;
    VecField(std::vector<Expr> base, std::vector<Expr> fiber);
    static VecField zero(int n, int m);
    static VecField vertical(std::vector<Expr> fiber, int n);

    [[nodiscard]] bool is_vertical() const;
    /// Throws std::invalid_argument when the field is not projectable.
    void validate() const;
    /// Characteristic Q^sigma = psi^sigma - y^sigma_i xi^i of the vertical part.
    [[nodiscard]] Expr characteristic(int sigma) const;
    [[nodiscard]] VecField horizontal_part() const;
    [[nodiscard]] int n() const { return static_cast<int>(xi.size()); }
    [[nodiscard]] int m() const { return static_cast<int>(psi.size()); }

    friend VecField operator+(const VecField& a, const VecField& b);
    friend VecField operator*(const Expr& c, const VecField& a);
};

/// Lie bracket of projectable vector fields on Y.
VecField lie_bracket(const VecField& a, const VecField& b);

/// Lazily evaluated jet prolongation j^k psi (memoized per instance).
class ProlongedField {
public:
    explicit ProlongedField(const VecField& field);

    /// psi^sigma_J = d_J Q^sigma + y^sigma_{Ji} xi^i.
    const Expr& component(int sigma, const MultiIndex& J);
    /// d_J Q^sigma: the pairing with the contact form omega^sigma_J.
    const Expr& vertical(int sigma, const MultiIndex& J);
    [[nodiscard]] const VecField& field() const { return field_; }

private:
    VecField field_;
    std::map<std::pair<int, MultiIndex>, Expr> components_;
    std::map<std::pair<int, MultiIndex>, Expr> verticals_;
};

/// Table {psi^sigma_J : |J| <= k}.
std::map<std::pair<int, MultiIndex>, Expr> prolong_field(const VecField& psi, int k);

/// Local section x -> (x, f^sigma(x)).
struct Section {
    std::vector<Expr> components;  ///< size m, no jet coordinates

    void validate() const;
};

/// Table {y^sigma_J -> d_J f^sigma : |J| <= k} for n base coordinates.
std::unordered_map<Atom, Expr, AtomHash> prolong_section(const Section& gamma, int n, int k);

/// Pulls an expression back along the infinite prolongation of gamma: every
/// jet coordinate y^sigma_J is replaced by d_J f^sigma.
class SectionPullback {
public:
    explicit SectionPullback(Section gamma);
    Expr operator()(const Expr& e);
    const Expr& jet_value(int sigma, const MultiIndex& J);

private:
    Section gamma_;
    std::unordered_map<Atom, Expr, AtomHash> cache_;
};

}  // namespace varfield

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "varfield/rational.hpp"

namespace varfield {

/// Largest supported base dimension.
inline constexpr int kMaxBaseDim = 8;

/// Symmetric multi-index over base coordinates 0..n-1.
///
/// Stored as per-coordinate counts, which is the same information as the
/// sorted entry list. Ordering: by total order, then by sorted entry list.
class MultiIndex {
public:
    MultiIndex() = default;
    static MultiIndex from_entries(const std::vector<int>& entries);

    [[nodiscard]] int order() const noexcept {
        int s = 0;
        for (auto c : counts_) s += c;
        return s;
    }
    [[nodiscard]] bool empty() const noexcept { return order() == 0; }
    [[nodiscard]] int count(int i) const { return counts_.at(static_cast<std::size_t>(i)); }
    /// Sorted nondecreasing entry list.
    [[nodiscard]] std::vector<int> entries() const;
    /// Concatenation I j.
    [[nodiscard]] MultiIndex with(int i) const;
    /// Concatenation I J.
    [[nodiscard]] MultiIndex plus(const MultiIndex& other) const;
    /// I with one copy of i removed; requires count(i) > 0.
    [[nodiscard]] MultiIndex without(int i) const;
    /// Whether other is a sub-multi-index of this one.
    [[nodiscard]] bool contains(const MultiIndex& other) const noexcept;
    /// this - other; requires contains(other).
    [[nodiscard]] MultiIndex minus(const MultiIndex& other) const;
    /// Largest coordinate present, or -1.
    [[nodiscard]] int last() const noexcept;

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
    friend std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b) noexcept;

    [[nodiscard]] std::size_t hash() const noexcept;

private:
    std::array<std::uint8_t, kMaxBaseDim> counts_{};
};

/// All multi-indices over n coordinates with order exactly s (sorted order).
std::vector<MultiIndex> multi_indices_of_order(int n, int s);

enum class AtomKind : std::uint8_t { Base = 0, Jet = 1, Param = 2, Func = 3 };
enum class FuncKind : std::uint8_t { Sin = 0, Cos = 1, Exp = 2 };

class Expr;

/// Indivisible factor of a monomial.
///
///  - Base:  base coordinate x^id.
///  - Jet:   jet coordinate y^id_index.
///  - Param: derivative d_index of a named function of the base coordinates
///           (id is a ParamRegistry handle). Used for symbolic variation fields.
///  - Func:  sin/cos/exp applied to an interned argument expression.
struct Atom {
    AtomKind kind = AtomKind::Base;
    FuncKind func = FuncKind::Sin;
    std::uint16_t id = 0;
    std::uint32_t arg = 0;
    MultiIndex index;

    static Atom base(int i);
    static Atom jet(int field, MultiIndex index = {});
    static Atom param(std::uint16_t handle, MultiIndex index = {});
    static Atom param(const std::string& name, MultiIndex index = {});
    static Atom function(FuncKind f, const Expr& argument);

    [[nodiscard]] bool is_base() const noexcept { return kind == AtomKind::Base; }
    [[nodiscard]] bool is_jet() const noexcept { return kind == AtomKind::Jet; }
    [[nodiscard]] bool is_param() const noexcept { return kind == AtomKind::Param; }
    [[nodiscard]] bool is_func() const noexcept { return kind == AtomKind::Func; }
    [[nodiscard]] const Expr& argument() const;

    friend bool operator==(const Atom& a, const Atom& b) noexcept {
        return a.kind == b.kind && a.func == b.func && a.id == b.id && a.arg == b.arg && a.index == b.index;
    }
    friend std::strong_ordering operator<=>(const Atom& a, const Atom& b);
    [[nodiscard]] std::size_t hash() const noexcept;
};

struct AtomHash {
    std::size_t operator()(const Atom& a) const noexcept { return a.hash(); }
};

/// Process-wide table of Param names. Thread safe; handles are stable.
class ParamRegistry {
public:
    static std::uint16_t intern(const std::string& name);
    static const std::string& name(std::uint16_t handle);
};

struct Factor {
    Atom atom;
    std::uint32_t power = 1;
    friend bool operator==(const Factor&, const Factor&) = default;
};

/// Product of atom powers, sorted by atom with unique atoms.
using Monomial = std::vector<Factor>;

std::strong_ordering compare_monomials(const Monomial& a, const Monomial& b);
Monomial multiply_monomials(const Monomial& a, const Monomial& b);

struct Term {
    Monomial mono;
    Rational coeff;
};

/// Canonical scalar expression: a sum of rational multiples of monomials.
///
/// Every Expr value is canonical: terms are sorted by monomial, like terms are
/// merged and no zero coefficient survives. Structural equality is therefore
/// polynomial equality for FuncAtom-free expressions.
class Expr {
public:
    Expr() = default;
    Expr(Rational c);  // NOLINT(google-explicit-constructor)
    Expr(std::int64_t c) : Expr(Rational(c)) {}  // NOLINT(google-explicit-constructor)
    explicit Expr(const Atom& a);

    /// Builds the canonical form of an arbitrary term list.
    static Expr from_terms(std::vector<Term> raw);

    [[nodiscard]] const std::vector<Term>& terms() const noexcept { return terms_; }
    [[nodiscard]] std::size_t size() const noexcept { return terms_.size(); }
    [[nodiscard]] bool is_zero() const noexcept { return terms_.empty(); }
    [[nodiscard]] bool is_constant() const noexcept {
        return terms_.empty() || (terms_.size() == 1 && terms_[0].mono.empty());
    }
    /// Value of a constant expression; throws if not constant.
    [[nodiscard]] Rational constant_value() const;

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator*(const Rational& c, const Expr& a);
    Expr operator-() const;
    Expr& operator+=(const Expr& o) { return *this = *this + o; }
    Expr& operator-=(const Expr& o) { return *this = *this - o; }
    Expr& operator*=(const Expr& o) { return *this = *this * o; }

    friend bool operator==(const Expr& a, const Expr& b) noexcept;
    friend std::strong_ordering operator<=>(const Expr& a, const Expr& b);

    [[nodiscard]] std::size_t hash() const noexcept;

private:
    std::vector<Term> terms_;
};

Expr pow(const Expr& base, unsigned exponent);
Expr sin(const Expr& e);
Expr cos(const Expr& e);
Expr exp(const Expr& e);

/// Accumulates terms cheaply and canonicalizes once.
class ExprBuilder {
public:
    void add(Term t) {
        if (!t.coeff.is_zero()) raw_.push_back(std::move(t));
    }
    void add(const Expr& e, const Rational& scale = Rational(1));
    /// Adds scale * mono * e.
    void add_product(const Expr& e, const Monomial& mono, const Rational& scale);
    [[nodiscard]] Expr build() { return Expr::from_terms(std::move(raw_)); }
    [[nodiscard]] std::size_t pending() const noexcept { return raw_.size(); }

private:
    std::vector<Term> raw_;
};

/// Canonical form of an expression (every Expr already is one; idempotent).
inline Expr canonicalize(const Expr& e) { return e; }
/// Canonical form of a raw term list.
inline Expr canonicalize(std::vector<Term> raw) { return Expr::from_terms(std::move(raw)); }

/// Applies a derivation: Leibniz over products, chain rule through FuncAtoms,
/// with delta(atom) giving the image of each non-function atom.
Expr apply_derivation(const Expr& e, const std::function<Expr(const Atom&)>& delta);

/// Formal partial derivative with respect to a base, jet or param atom.
/// Each sorted jet coordinate is an independent variable. Throws
/// std::invalid_argument for function atoms.
Expr partial(const Expr& e, const Atom& a);

/// All first partial derivatives at once: pairs (atom, d e / d atom) for the
/// base, jet and param atoms e depends on (through function arguments too),
/// sorted by atom.
std::vector<std::pair<Atom, Expr>> gradient(const Expr& e);

/// Substitutes atoms (also inside function arguments). Unmapped atoms stay.
Expr substitute(const Expr& e, const std::function<std::optional<Expr>(const Atom&)>& map);
Expr substitute(const Expr& e, const std::unordered_map<Atom, Expr, AtomHash>& map);

/// Every atom occurring in e; function atoms and, recursively, the atoms of
/// their arguments.
std::vector<Atom> collect_atoms(const Expr& e);

/// Highest jet order occurring (recursively), -1 if no jet coordinate occurs.
int jet_order(const Expr& e);
/// Whether any jet coordinate occurs (recursively).
bool depends_on_jets(const Expr& e);
/// Whether any function atom occurs.
bool has_functions(const Expr& e);

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using NumericBinding = std::unordered_map<Atom, double, AtomHash>;

/// IEEE double value of e; function atoms are evaluated recursively.
/// Throws EvalError naming the first unbound atom.
double eval_numeric(const Expr& e, const NumericBinding& bind);

/// Context-free atom label used in diagnostics ("x1", "y[2]_{1,1}", ...).
std::string debug_name(const Atom& a);
std::string debug_string(const Expr& e);

}  // namespace varfield

template <>
struct std::hash<varfield::Atom> {
    std::size_t operator()(const varfield::Atom& a) const noexcept { return a.hash(); }
};

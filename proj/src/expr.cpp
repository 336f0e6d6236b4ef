// SPDX-License-Identifier: Apache-2.0
#include "varfield/expr.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>
#include <shared_mutex>
#include <sstream>

namespace varfield {

// ---------------------------------------------------------------------------
// MultiIndex
// ---------------------------------------------------------------------------

MultiIndex MultiIndex::from_entries(const std::vector<int>& entries) {
    MultiIndex m;
    for (int e : entries) {
        if (e < 0 || e >= kMaxBaseDim) throw std::out_of_range("multi-index entry out of range");
        ++m.counts_[static_cast<std::size_t>(e)];
    }
    return m;
}

std::vector<int> MultiIndex::entries() const {
    std::vector<int> out;
    for (int i = 0; i < kMaxBaseDim; ++i)
        for (int c = 0; c < counts_[static_cast<std::size_t>(i)]; ++c) out.push_back(i);
    return out;
}

MultiIndex MultiIndex::with(int i) const {
    MultiIndex m = *this;
    ++m.counts_.at(static_cast<std::size_t>(i));
    return m;
}

MultiIndex MultiIndex::plus(const MultiIndex& other) const {
    MultiIndex m = *this;
    for (std::size_t i = 0; i < m.counts_.size(); ++i) m.counts_[i] += other.counts_[i];
    return m;
}

MultiIndex MultiIndex::without(int i) const {
    MultiIndex m = *this;
    auto& c = m.counts_.at(static_cast<std::size_t>(i));
    if (c == 0) throw std::logic_error("multi-index does not contain entry");
    --c;
    return m;
}

bool MultiIndex::contains(const MultiIndex& other) const noexcept {
    for (std::size_t i = 0; i < counts_.size(); ++i)
        if (other.counts_[i] > counts_[i]) return false;
    return true;
}

MultiIndex MultiIndex::minus(const MultiIndex& other) const {
    if (!contains(other)) throw std::logic_error("multi-index difference undefined");
    MultiIndex m = *this;
    for (std::size_t i = 0; i < m.counts_.size(); ++i) m.counts_[i] -= other.counts_[i];
    return m;
}

int MultiIndex::last() const noexcept {
    for (int i = kMaxBaseDim - 1; i >= 0; --i)
        if (counts_[static_cast<std::size_t>(i)] > 0) return i;
    return -1;
}

std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b) noexcept {
    if (auto c = a.order() <=> b.order(); c != 0) return c;
    // Same order: lexicographic on sorted entries equals reverse lexicographic on counts.
    for (std::size_t i = 0; i < a.counts_.size(); ++i)
        if (a.counts_[i] != b.counts_[i]) return b.counts_[i] <=> a.counts_[i];
    return std::strong_ordering::equal;
}

std::size_t MultiIndex::hash() const noexcept {
    std::uint64_t h = 0;
    for (auto c : counts_) h = h * 131u + c;
    return static_cast<std::size_t>(h);
}

std::vector<MultiIndex> multi_indices_of_order(int n, int s) {
    std::vector<MultiIndex> out;
    std::vector<int> entries(static_cast<std::size_t>(s), 0);
    if (s == 0) return {MultiIndex{}};
    // Enumerate nondecreasing sequences over 0..n-1.
    while (true) {
        out.push_back(MultiIndex::from_entries(entries));
        int pos = s - 1;
        while (pos >= 0 && entries[static_cast<std::size_t>(pos)] == n - 1) --pos;
        if (pos < 0) break;
        const int v = ++entries[static_cast<std::size_t>(pos)];
        for (int k = pos + 1; k < s; ++k) entries[static_cast<std::size_t>(k)] = v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Interning tables
// ---------------------------------------------------------------------------

namespace {

class ParamTable {
public:
    std::uint16_t intern(const std::string& name) {
        {
            std::shared_lock lock(mutex_);
            if (auto it = ids_.find(name); it != ids_.end()) return it->second;
        }
        std::unique_lock lock(mutex_);
        if (auto it = ids_.find(name); it != ids_.end()) return it->second;
        if (names_.size() >= 0xffff) throw std::length_error("too many parameter functions");
        const auto id = static_cast<std::uint16_t>(names_.size());
        names_.push_back(name);
        ids_.emplace(name, id);
        return id;
    }
    const std::string& name(std::uint16_t id) {
        std::shared_lock lock(mutex_);
        return names_.at(id);
    }

private:
    std::shared_mutex mutex_;
    std::deque<std::string> names_;
    std::unordered_map<std::string, std::uint16_t> ids_;
};

ParamTable& param_table() {
    static ParamTable table;
    return table;
}

struct ExprHashKey {
    std::size_t operator()(const Expr& e) const noexcept { return e.hash(); }
};

class ArgumentPool {
public:
    std::uint32_t intern(const Expr& e) {
        {
            std::shared_lock lock(mutex_);
            if (auto it = ids_.find(e); it != ids_.end()) return it->second;
        }
        std::unique_lock lock(mutex_);
        if (auto it = ids_.find(e); it != ids_.end()) return it->second;
        const auto id = static_cast<std::uint32_t>(exprs_.size());
        exprs_.push_back(e);
        ids_.emplace(e, id);
        return id;
    }
    const Expr& get(std::uint32_t id) {
        std::shared_lock lock(mutex_);
        return exprs_.at(id);
    }

private:
    std::shared_mutex mutex_;
    std::deque<Expr> exprs_;
    std::unordered_map<Expr, std::uint32_t, ExprHashKey> ids_;
};

ArgumentPool& argument_pool() {
    static ArgumentPool pool;
    return pool;
}

}  // namespace

std::uint16_t ParamRegistry::intern(const std::string& name) { return param_table().intern(name); }
const std::string& ParamRegistry::name(std::uint16_t handle) { return param_table().name(handle); }

// ---------------------------------------------------------------------------
// Atom
// ---------------------------------------------------------------------------

Atom Atom::base(int i) {
    if (i < 0 || i >= kMaxBaseDim) throw std::out_of_range("base coordinate index out of range");
    Atom a;
    a.kind = AtomKind::Base;
    a.id = static_cast<std::uint16_t>(i);
    return a;
}

Atom Atom::jet(int field, MultiIndex index) {
    if (field < 0 || field > 0xffff) throw std::out_of_range("field index out of range");
    Atom a;
    a.kind = AtomKind::Jet;
    a.id = static_cast<std::uint16_t>(field);
    a.index = index;
    return a;
}

Atom Atom::param(std::uint16_t handle, MultiIndex index) {
    Atom a;
    a.kind = AtomKind::Param;
    a.id = handle;
    a.index = index;
    return a;
}

Atom Atom::param(const std::string& name, MultiIndex index) {
    return param(ParamRegistry::intern(name), index);
}

Atom Atom::function(FuncKind f, const Expr& argument) {
    Atom a;
    a.kind = AtomKind::Func;
    a.func = f;
    a.arg = argument_pool().intern(argument);
    return a;
}

const Expr& Atom::argument() const {
    if (kind != AtomKind::Func) throw std::logic_error("atom has no argument");
    return argument_pool().get(arg);
}

std::strong_ordering operator<=>(const Atom& a, const Atom& b) {
    if (auto c = a.kind <=> b.kind; c != 0) return c;
    switch (a.kind) {
        case AtomKind::Base:
            return a.id <=> b.id;
        case AtomKind::Jet:
            if (auto c = a.id <=> b.id; c != 0) return c;
            return a.index <=> b.index;
        case AtomKind::Param:
            if (a.id != b.id) {
                const auto c = ParamRegistry::name(a.id).compare(ParamRegistry::name(b.id));
                return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
            }
            return a.index <=> b.index;
        case AtomKind::Func:
            if (auto c = a.func <=> b.func; c != 0) return c;
            if (a.arg == b.arg) return std::strong_ordering::equal;
            return a.argument() <=> b.argument();
    }
    return std::strong_ordering::equal;
}

std::size_t Atom::hash() const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(kind);
    h = h * 1000003u + static_cast<std::uint64_t>(func);
    h = h * 1000003u + id;
    h = h * 1000003u + arg;
    h = h * 1000003u + index.hash();
    return static_cast<std::size_t>(h ^ (h >> 29));
}

// ---------------------------------------------------------------------------
// Monomials
// ---------------------------------------------------------------------------

std::strong_ordering compare_monomials(const Monomial& a, const Monomial& b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!(a[i].atom == b[i].atom)) return a[i].atom <=> b[i].atom;
        if (a[i].power != b[i].power) return a[i].power <=> b[i].power;
    }
    return a.size() <=> b.size();
}

Monomial multiply_monomials(const Monomial& a, const Monomial& b) {
    Monomial out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].atom == b[j].atom) {
            out.push_back({a[i].atom, a[i].power + b[j].power});
            ++i;
            ++j;
        } else if ((a[i].atom <=> b[j].atom) < 0) {
            out.push_back(a[i++]);
        } else {
            out.push_back(b[j++]);
        }
    }
    while (i < a.size()) out.push_back(a[i++]);
    while (j < b.size()) out.push_back(b[j++]);
    return out;
}

namespace {

void normalize_monomial(Monomial& m) {
    bool sorted = true;
    for (std::size_t i = 0; i + 1 < m.size(); ++i)
        if (!((m[i].atom <=> m[i + 1].atom) < 0)) {
            sorted = false;
            break;
        }
    bool positive = std::all_of(m.begin(), m.end(), [](const Factor& f) { return f.power > 0; });
    if (sorted && positive) return;
    std::sort(m.begin(), m.end(), [](const Factor& x, const Factor& y) { return (x.atom <=> y.atom) < 0; });
    Monomial merged;
    for (const auto& f : m) {
        if (f.power == 0) continue;
        if (!merged.empty() && merged.back().atom == f.atom)
            merged.back().power += f.power;
        else
            merged.push_back(f);
    }
    m = std::move(merged);
}

}  // namespace

// ---------------------------------------------------------------------------
// Expr
// ---------------------------------------------------------------------------

Expr::Expr(Rational c) {
    if (!c.is_zero()) terms_.push_back({{}, c});
}

Expr::Expr(const Atom& a) { terms_.push_back({{Factor{a, 1}}, Rational(1)}); }

Expr Expr::from_terms(std::vector<Term> raw) {
    for (auto& t : raw) normalize_monomial(t.mono);
    std::sort(raw.begin(), raw.end(),
              [](const Term& x, const Term& y) { return compare_monomials(x.mono, y.mono) < 0; });
    Expr out;
    out.terms_.reserve(raw.size());
    for (auto& t : raw) {
        if (!out.terms_.empty() && out.terms_.back().mono == t.mono) {
            out.terms_.back().coeff += t.coeff;
        } else {
            if (!out.terms_.empty() && out.terms_.back().coeff.is_zero()) out.terms_.pop_back();
            out.terms_.push_back(std::move(t));
        }
    }
    if (!out.terms_.empty() && out.terms_.back().coeff.is_zero()) out.terms_.pop_back();
    return out;
}

Rational Expr::constant_value() const {
    if (terms_.empty()) return {};
    if (!is_constant()) throw std::logic_error("expression is not constant");
    return terms_[0].coeff;
}

Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    Expr out;
    out.terms_.reserve(a.terms_.size() + b.terms_.size());
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.terms_.size() && j < b.terms_.size()) {
        const auto c = compare_monomials(a.terms_[i].mono, b.terms_[j].mono);
        if (c == 0) {
            Rational s = a.terms_[i].coeff + b.terms_[j].coeff;
            if (!s.is_zero()) out.terms_.push_back({a.terms_[i].mono, s});
            ++i;
            ++j;
        } else if (c < 0) {
            out.terms_.push_back(a.terms_[i++]);
        } else {
            out.terms_.push_back(b.terms_[j++]);
        }
    }
    while (i < a.terms_.size()) out.terms_.push_back(a.terms_[i++]);
    while (j < b.terms_.size()) out.terms_.push_back(b.terms_[j++]);
    return out;
}

Expr Expr::operator-() const {
    Expr out = *this;
    for (auto& t : out.terms_) t.coeff = -t.coeff;
    return out;
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Rational& c, const Expr& a) {
    if (c.is_zero()) return {};
    Expr out = a;
    for (auto& t : out.terms_) t.coeff *= c;
    return out;
}

Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_zero() || b.is_zero()) return {};
    if (a.is_constant()) return a.constant_value() * b;
    if (b.is_constant()) return b.constant_value() * a;
    std::vector<Term> raw;
    raw.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& x : a.terms_)
        for (const auto& y : b.terms_) raw.push_back({multiply_monomials(x.mono, y.mono), x.coeff * y.coeff});
    return Expr::from_terms(std::move(raw));
}

bool operator==(const Expr& a, const Expr& b) noexcept {
    if (a.terms_.size() != b.terms_.size()) return false;
    for (std::size_t i = 0; i < a.terms_.size(); ++i)
        if (!(a.terms_[i].coeff == b.terms_[i].coeff) || !(a.terms_[i].mono == b.terms_[i].mono)) return false;
    return true;
}

std::strong_ordering operator<=>(const Expr& a, const Expr& b) {
    const std::size_t n = std::min(a.terms_.size(), b.terms_.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (auto c = compare_monomials(a.terms_[i].mono, b.terms_[i].mono); c != 0) return c;
        if (auto c = a.terms_[i].coeff <=> b.terms_[i].coeff; c != 0) return c;
    }
    return a.terms_.size() <=> b.terms_.size();
}

std::size_t Expr::hash() const noexcept {
    std::uint64_t h = terms_.size();
    for (const auto& t : terms_) {
        h = h * 31u + static_cast<std::uint64_t>(t.coeff.num()) * 7u + static_cast<std::uint64_t>(t.coeff.den());
        for (const auto& f : t.mono) h = h * 1000003u + f.atom.hash() * 17u + f.power;
    }
    return static_cast<std::size_t>(h);
}

Expr pow(const Expr& base, unsigned exponent) {
    Expr result(1);
    Expr b = base;
    while (exponent > 0) {
        if (exponent & 1u) result = result * b;
        exponent >>= 1u;
        if (exponent > 0) b = b * b;
    }
    return result;
}

Expr sin(const Expr& e) {
    if (e.is_zero()) return {};
    return Expr(Atom::function(FuncKind::Sin, e));
}
Expr cos(const Expr& e) {
    if (e.is_zero()) return Expr(1);
    return Expr(Atom::function(FuncKind::Cos, e));
}
Expr exp(const Expr& e) {
    if (e.is_zero()) return Expr(1);
    return Expr(Atom::function(FuncKind::Exp, e));
}

// ---------------------------------------------------------------------------
// Builder
// ---------------------------------------------------------------------------

void ExprBuilder::add(const Expr& e, const Rational& scale) {
    if (scale.is_zero()) return;
    for (const auto& t : e.terms()) raw_.push_back({t.mono, t.coeff * scale});
}

void ExprBuilder::add_product(const Expr& e, const Monomial& mono, const Rational& scale) {
    if (scale.is_zero()) return;
    for (const auto& t : e.terms()) raw_.push_back({multiply_monomials(t.mono, mono), t.coeff * scale});
}

// ---------------------------------------------------------------------------
// Calculus
// ---------------------------------------------------------------------------

namespace {

Expr function_derivative(const Atom& f) {
    const Expr& u = f.argument();
    switch (f.func) {
        case FuncKind::Sin:
            return cos(u);
        case FuncKind::Cos:
            return -sin(u);
        case FuncKind::Exp:
            return Expr(f);
    }
    return {};
}

}  // namespace

Expr apply_derivation(const Expr& e, const std::function<Expr(const Atom&)>& delta) {
    ExprBuilder out;
    std::unordered_map<Atom, Expr, AtomHash> cache;
    for (const auto& t : e.terms()) {
        for (std::size_t k = 0; k < t.mono.size(); ++k) {
            const Atom& a = t.mono[k].atom;
            auto it = cache.find(a);
            if (it == cache.end()) {
                Expr d = a.is_func() ? function_derivative(a) * apply_derivation(a.argument(), delta) : delta(a);
                it = cache.emplace(a, std::move(d)).first;
            }
            if (it->second.is_zero()) continue;
            Monomial rest = t.mono;
            const std::uint32_t p = rest[k].power;
            if (p == 1)
                rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
            else
                rest[k].power = p - 1;
            out.add_product(it->second, rest, t.coeff * Rational(p));
        }
    }
    return out.build();
}

Expr partial(const Expr& e, const Atom& a) {
    if (a.is_func()) throw std::invalid_argument("cannot differentiate with respect to a function atom");
    return apply_derivation(e, [&a](const Atom& b) { return b == a ? Expr(1) : Expr(); });
}

namespace {

void accumulate_gradient(const Expr& e, const Expr& outer, std::map<Atom, ExprBuilder>& buckets) {
    for (const auto& t : e.terms()) {
        for (std::size_t k = 0; k < t.mono.size(); ++k) {
            Monomial rest = t.mono;
            const std::uint32_t p = rest[k].power;
            const Atom a = rest[k].atom;
            if (p == 1)
                rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
            else
                rest[k].power = p - 1;
            if (a.is_func()) {
                ExprBuilder chain;
                chain.add_product(outer * function_derivative(a), rest, t.coeff * Rational(p));
                accumulate_gradient(a.argument(), chain.build(), buckets);
            } else {
                buckets[a].add_product(outer, rest, t.coeff * Rational(p));
            }
        }
    }
}

}  // namespace

std::vector<std::pair<Atom, Expr>> gradient(const Expr& e) {
    std::map<Atom, ExprBuilder> buckets;
    accumulate_gradient(e, Expr(1), buckets);
    std::vector<std::pair<Atom, Expr>> out;
    out.reserve(buckets.size());
    for (auto& [a, b] : buckets) {
        Expr g = b.build();
        if (!g.is_zero()) out.emplace_back(a, std::move(g));
    }
    return out;
}

Expr substitute(const Expr& e, const std::function<std::optional<Expr>(const Atom&)>& map) {
    std::unordered_map<Atom, std::optional<Expr>, AtomHash> cache;
    auto image = [&](const Atom& a) -> const std::optional<Expr>& {
        auto it = cache.find(a);
        if (it != cache.end()) return it->second;
        std::optional<Expr> r;
        if (a.is_func()) {
            Expr arg = substitute(a.argument(), map);
            if (!(arg == a.argument())) {
                switch (a.func) {
                    case FuncKind::Sin: r = sin(arg); break;
                    case FuncKind::Cos: r = cos(arg); break;
                    case FuncKind::Exp: r = exp(arg); break;
                }
            }
        } else {
            r = map(a);
        }
        return cache.emplace(a, std::move(r)).first->second;
    };

    ExprBuilder out;
    for (const auto& t : e.terms()) {
        Monomial kept;
        Expr product(t.coeff);
        for (const auto& f : t.mono) {
            const auto& img = image(f.atom);
            if (img)
                product = product * pow(*img, f.power);
            else
                kept.push_back(f);
            if (product.is_zero()) break;
        }
        out.add_product(product, kept, Rational(1));
    }
    return out.build();
}

Expr substitute(const Expr& e, const std::unordered_map<Atom, Expr, AtomHash>& map) {
    return substitute(e, [&map](const Atom& a) -> std::optional<Expr> {
        auto it = map.find(a);
        if (it == map.end()) return std::nullopt;
        return it->second;
    });
}

namespace {

void collect_into(const Expr& e, std::vector<Atom>& out) {
    for (const auto& t : e.terms())
        for (const auto& f : t.mono) {
            out.push_back(f.atom);
            if (f.atom.is_func()) collect_into(f.atom.argument(), out);
        }
}

}  // namespace

std::vector<Atom> collect_atoms(const Expr& e) {
    std::vector<Atom> out;
    collect_into(e, out);
    std::sort(out.begin(), out.end(), [](const Atom& a, const Atom& b) { return (a <=> b) < 0; });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

int jet_order(const Expr& e) {
    int best = -1;
    for (const auto& t : e.terms())
        for (const auto& f : t.mono) {
            if (f.atom.is_jet()) best = std::max(best, f.atom.index.order());
            if (f.atom.is_func()) best = std::max(best, jet_order(f.atom.argument()));
        }
    return best;
}

bool depends_on_jets(const Expr& e) { return jet_order(e) >= 0; }

bool has_functions(const Expr& e) {
    for (const auto& t : e.terms())
        for (const auto& f : t.mono)
            if (f.atom.is_func()) return true;
    return false;
}

double eval_numeric(const Expr& e, const NumericBinding& bind) {
    double total = 0.0;
    for (const auto& t : e.terms()) {
        double v = t.coeff.to_double();
        for (const auto& f : t.mono) {
            double a = 0.0;
            if (f.atom.is_func()) {
                const double u = eval_numeric(f.atom.argument(), bind);
                switch (f.atom.func) {
                    case FuncKind::Sin: a = std::sin(u); break;
                    case FuncKind::Cos: a = std::cos(u); break;
                    case FuncKind::Exp: a = std::exp(u); break;
                }
            } else {
                auto it = bind.find(f.atom);
                if (it == bind.end()) throw EvalError("unbound atom '" + debug_name(f.atom) + "'");
                a = it->second;
            }
            v *= f.power == 1 ? a : std::pow(a, static_cast<double>(f.power));
        }
        total += v;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

namespace {

std::string index_suffix(const MultiIndex& mi) {
    if (mi.empty()) return {};
    std::string s = "_{";
    bool first = true;
    for (int e : mi.entries()) {
        if (!first) s += ",";
        s += std::to_string(e + 1);
        first = false;
    }
    return s + "}";
}

}  // namespace

std::string debug_name(const Atom& a) {
    switch (a.kind) {
        case AtomKind::Base:
            return "x" + std::to_string(a.id + 1);
        case AtomKind::Jet:
            return "y[" + std::to_string(a.id + 1) + "]" + index_suffix(a.index);
        case AtomKind::Param:
            return ParamRegistry::name(a.id) + index_suffix(a.index);
        case AtomKind::Func: {
            const char* names[] = {"sin", "cos", "exp"};
            return std::string(names[static_cast<int>(a.func)]) + "(" + debug_string(a.argument()) + ")";
        }
    }
    return "?";
}

std::string debug_string(const Expr& e) {
    if (e.is_zero()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& t : e.terms()) {
        if (!first) os << " + ";
        first = false;
        os << t.coeff.str();
        for (const auto& f : t.mono) {
            os << "*" << debug_name(f.atom);
            if (f.power != 1) os << "^" << f.power;
        }
    }
    return os.str();
}

}  // namespace varfield

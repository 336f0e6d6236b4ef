// SPDX-License-Identifier: Apache-2.0
#include "varfield/modeldsl.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace varfield {

ParseError::ParseError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      message_(message) {}

// ---------------------------------------------------------------------------
// Model data
// ---------------------------------------------------------------------------

std::size_t IndexedTensor::flat(const std::vector<int>& values) const {
    if (values.size() != ranges.size()) throw std::invalid_argument("tensor rank mismatch");
    std::size_t k = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0 || values[i] >= ranges[i]) throw std::out_of_range("tensor index out of range");
        k = k * static_cast<std::size_t>(ranges[i]) + static_cast<std::size_t>(values[i]);
    }
    return k;
}

const Expr& IndexedTensor::scalar() const {
    if (!is_scalar()) throw std::logic_error("indexed expression is not a scalar");
    return data.at(0);
}

int FieldDecl::size() const {
    int s = 1;
    for (int r : ranges) s *= r;
    return s;
}

int FieldDecl::coordinate(const std::vector<int>& values) const {
    if (values.size() != ranges.size()) throw std::invalid_argument("field '" + name + "' rank mismatch");
    int k = 0;
    for (std::size_t i = 0; i < values.size(); ++i) k = k * ranges[i] + values[i];
    return offset + k;
}

namespace {

std::string bracket(const std::vector<int>& values) {
    if (values.empty()) return {};
    std::string s = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) s += ",";
        s += std::to_string(values[i] + 1);
    }
    return s + "]";
}

void for_each_assignment(const std::vector<int>& ranges, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> v(ranges.size(), 0);
    for (int r : ranges)
        if (r <= 0) return;
    while (true) {
        fn(v);
        int pos = static_cast<int>(v.size()) - 1;
        while (pos >= 0) {
            auto& slot = v[static_cast<std::size_t>(pos)];
            if (++slot < ranges[static_cast<std::size_t>(pos)]) break;
            slot = 0;
            --pos;
        }
        if (pos < 0) return;
    }
}

}  // namespace

std::string ParamDecl::component_name(const std::vector<int>& values) const { return name + bracket(values); }

int ModelSpec::m() const {
    int s = 0;
    for (const auto& f : fields) s += f.size();
    return s;
}

JetContext ModelSpec::context() const {
    if (fields.empty()) throw std::invalid_argument("model declares no fields");
    const int order = lagrangian ? std::max(1, jet_order(*lagrangian)) : 1;
    JetContext ctx(n, m(), order);
    ctx.field_names.clear();
    for (const auto& f : fields) {
        for_each_assignment(f.ranges, [&](const std::vector<int>& v) { ctx.field_names.push_back(f.name + bracket(v)); });
    }
    return ctx;
}

Form ModelSpec::lagrangian_form() const {
    if (!lagrangian) throw std::invalid_argument("model has no lagrangian");
    return *lagrangian * Form::volume(n);
}

const IndexedTensor& ModelSpec::def(const std::string& name) const {
    auto it = defs.find(name);
    if (it == defs.end()) throw std::invalid_argument("model has no definition named '" + name + "'");
    return it->second;
}

const VecField& ModelSpec::vecfield(const std::string& name) const {
    auto it = vecfields.find(name);
    if (it == vecfields.end()) throw std::invalid_argument("model has no vecfield named '" + name + "'");
    return it->second;
}

const Section& ModelSpec::section(const std::string& name) const {
    auto it = sections.find(name);
    if (it == sections.end()) throw std::invalid_argument("model has no section named '" + name + "'");
    return it->second;
}

const FieldDecl& ModelSpec::field(const std::string& name) const {
    for (const auto& f : fields)
        if (f.name == name) return f;
    throw std::invalid_argument("model has no field named '" + name + "'");
}

ModelSpec ModelSpec::from_context(const JetContext& ctx) {
    ModelSpec spec;
    spec.n = ctx.n;
    for (int s = 0; s < ctx.m; ++s) spec.fields.push_back({ctx.field_names.at(static_cast<std::size_t>(s)), {}, s});
    return spec;
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace {

enum class Tok { Number, Ident, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int column = 0;
};

std::vector<Token> tokenize(const std::string& src, int line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < src.size()) {
        const char c = src[i];
        const int col = static_cast<int>(i) + 1;
        if (c == '#') break;
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            out.push_back({Tok::Number, src.substr(i, j - i), col});
            i = j;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) {
                if (src[j] == '_' && j + 1 < src.size() && src[j + 1] == '{') break;
                ++j;
            }
            out.push_back({Tok::Ident, src.substr(i, j - i), col});
            i = j;
            continue;
        }
        static const std::string punct = "+-*/^()[],:;={}_";
        if (punct.find(c) != std::string::npos) {
            out.push_back({Tok::Punct, std::string(1, c), col});
            ++i;
            continue;
        }
        throw ParseError(line, col, std::string("unexpected character '") + c + "'");
    }
    out.push_back({Tok::End, "", static_cast<int>(src.size()) + 1});
    return out;
}

// ---------------------------------------------------------------------------
// Index algebra
// ---------------------------------------------------------------------------

IndexedTensor scalar_tensor(const Expr& e) { return {{}, {}, {e}}; }

/// Contracts repeated index names (each may occur at most twice).
IndexedTensor reduce_repeated(const IndexedTensor& raw, int line, int col) {
    std::vector<std::string> names;
    std::map<std::string, int> counts;
    std::map<std::string, int> range_of;
    for (std::size_t i = 0; i < raw.indices.size(); ++i) {
        const auto& nm = raw.indices[i];
        if (counts[nm]++ == 0) {
            names.push_back(nm);
            range_of[nm] = raw.ranges[i];
        } else if (range_of[nm] != raw.ranges[i]) {
            throw ParseError(line, col, "index '" + nm + "' used with ranges " + std::to_string(range_of[nm]) + " and " +
                                            std::to_string(raw.ranges[i]));
        }
    }
    bool any_repeat = false;
    for (const auto& [nm, c] : counts) {
        if (c > 2) throw ParseError(line, col, "index '" + nm + "' appears " + std::to_string(c) + " times");
        any_repeat = any_repeat || c == 2;
    }
    if (!any_repeat) return raw;
    IndexedTensor out;
    std::vector<std::string> summed;
    for (const auto& nm : names) {
        if (counts[nm] == 1) {
            out.indices.push_back(nm);
            out.ranges.push_back(range_of[nm]);
        } else {
            summed.push_back(nm);
        }
    }
    std::vector<int> summed_ranges;
    for (const auto& nm : summed) summed_ranges.push_back(range_of[nm]);
    for_each_assignment(out.ranges, [&](const std::vector<int>& fv) {
        ExprBuilder acc;
        for_each_assignment(summed_ranges, [&](const std::vector<int>& sv) {
            std::vector<int> raw_values;
            for (const auto& nm : raw.indices) {
                auto f = std::find(out.indices.begin(), out.indices.end(), nm);
                if (f != out.indices.end()) {
                    raw_values.push_back(fv[static_cast<std::size_t>(f - out.indices.begin())]);
                } else {
                    auto s = std::find(summed.begin(), summed.end(), nm);
                    raw_values.push_back(sv[static_cast<std::size_t>(s - summed.begin())]);
                }
            }
            acc.add(raw.at(raw_values));
        });
        out.data.push_back(acc.build());
    });
    return out;
}

/// Product with summation over indices shared by a and b.
IndexedTensor contract_product(const IndexedTensor& a, const IndexedTensor& b, int line, int col) {
    if (a.is_scalar()) {
        IndexedTensor out = b;
        for (auto& e : out.data) e = a.scalar() * e;
        return out;
    }
    if (b.is_scalar()) {
        IndexedTensor out = a;
        for (auto& e : out.data) e = e * b.scalar();
        return out;
    }
    std::vector<std::string> common;
    for (const auto& nm : a.indices)
        if (std::find(b.indices.begin(), b.indices.end(), nm) != b.indices.end()) common.push_back(nm);
    IndexedTensor out;
    std::vector<int> common_ranges;
    auto range_in = [](const IndexedTensor& t, const std::string& nm) {
        return t.ranges[static_cast<std::size_t>(std::find(t.indices.begin(), t.indices.end(), nm) - t.indices.begin())];
    };
    for (const auto& nm : common) {
        if (range_in(a, nm) != range_in(b, nm))
            throw ParseError(line, col, "index '" + nm + "' used with ranges " + std::to_string(range_in(a, nm)) + " and " +
                                            std::to_string(range_in(b, nm)));
        common_ranges.push_back(range_in(a, nm));
    }
    for (std::size_t i = 0; i < a.indices.size(); ++i)
        if (std::find(common.begin(), common.end(), a.indices[i]) == common.end()) {
            out.indices.push_back(a.indices[i]);
            out.ranges.push_back(a.ranges[i]);
        }
    for (std::size_t i = 0; i < b.indices.size(); ++i)
        if (std::find(common.begin(), common.end(), b.indices[i]) == common.end()) {
            out.indices.push_back(b.indices[i]);
            out.ranges.push_back(b.ranges[i]);
        }
    // value lookup plans: for each index of a/b, where to read it from (free slot or common slot)
    auto plan = [&](const IndexedTensor& t) {
        std::vector<std::pair<bool, std::size_t>> p;
        for (const auto& nm : t.indices) {
            auto c = std::find(common.begin(), common.end(), nm);
            if (c != common.end()) {
                p.emplace_back(true, static_cast<std::size_t>(c - common.begin()));
            } else {
                p.emplace_back(false, static_cast<std::size_t>(std::find(out.indices.begin(), out.indices.end(), nm) -
                                                                out.indices.begin()));
            }
        }
        return p;
    };
    const auto pa = plan(a);
    const auto pb = plan(b);
    std::vector<int> va(a.indices.size());
    std::vector<int> vb(b.indices.size());
    for_each_assignment(out.ranges, [&](const std::vector<int>& fv) {
        ExprBuilder acc;
        for_each_assignment(common_ranges, [&](const std::vector<int>& cv) {
            for (std::size_t i = 0; i < pa.size(); ++i) va[i] = pa[i].first ? cv[pa[i].second] : fv[pa[i].second];
            const Expr& ea = a.at(va);
            if (ea.is_zero()) return;
            for (std::size_t i = 0; i < pb.size(); ++i) vb[i] = pb[i].first ? cv[pb[i].second] : fv[pb[i].second];
            const Expr& eb = b.at(vb);
            if (eb.is_zero()) return;
            acc.add(ea * eb);
        });
        out.data.push_back(acc.build());
    });
    return out;
}

/// b re-laid out in the index order of `order` (same index set).
IndexedTensor align(const IndexedTensor& b, const std::vector<std::string>& order) {
    if (b.indices == order) return b;
    IndexedTensor out;
    out.indices = order;
    for (const auto& nm : order)
        out.ranges.push_back(
            b.ranges[static_cast<std::size_t>(std::find(b.indices.begin(), b.indices.end(), nm) - b.indices.begin())]);
    std::vector<std::size_t> where;
    for (const auto& nm : b.indices)
        where.push_back(static_cast<std::size_t>(std::find(order.begin(), order.end(), nm) - order.begin()));
    std::vector<int> vb(b.indices.size());
    for_each_assignment(out.ranges, [&](const std::vector<int>& v) {
        for (std::size_t i = 0; i < where.size(); ++i) vb[i] = v[where[i]];
        out.data.push_back(b.at(vb));
    });
    return out;
}

bool same_index_set(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return std::set<std::string>(a.begin(), a.end()) == std::set<std::string>(b.begin(), b.end()) && a.size() == b.size();
}

std::string join(const std::vector<std::string>& v) {
    if (v.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

// ---------------------------------------------------------------------------
// Expression parser
// ---------------------------------------------------------------------------

class ExprParser {
public:
    ExprParser(const std::vector<Token>& toks, const ModelSpec& model, int line, std::size_t start = 0)
        : toks_(toks), model_(model), line_(line), pos_(start) {}

    IndexedTensor parse_sum() {
        const Token first = peek();
        IndexedTensor acc = parse_product();
        while (is_punct("+") || is_punct("-")) {
            const Token op = next();
            IndexedTensor rhs = parse_product();
            if (!same_index_set(acc.indices, rhs.indices))
                throw error(op, "unbalanced index: summands have free indices {" + join(acc.indices) + "} and {" +
                                    join(rhs.indices) + "}");
            rhs = align(rhs, acc.indices);
            const Rational s(op.text == "+" ? 1 : -1);
            for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += s * rhs.data[i];
        }
        (void)first;
        return acc;
    }

    [[nodiscard]] const Token& peek() const { return toks_[pos_]; }
    Token next() { return toks_[pos_++]; }
    [[nodiscard]] bool at_end() const { return peek().kind == Tok::End; }
    [[nodiscard]] bool is_punct(const char* p) const { return peek().kind == Tok::Punct && peek().text == p; }
    [[nodiscard]] std::size_t position() const { return pos_; }

    void expect(const char* p) {
        if (!is_punct(p)) throw error(peek(), std::string("expected '") + p + "'");
        ++pos_;
    }

    ParseError error(const Token& t, const std::string& msg) const { return ParseError(line_, t.column, msg); }

    /// Slot list "[a, 2, mu]": index names or 1-based integers.
    std::vector<Token> parse_slots() {
        std::vector<Token> slots;
        if (!is_punct("[")) return slots;
        ++pos_;
        while (true) {
            const Token t = next();
            if (t.kind != Tok::Ident && t.kind != Tok::Number) throw error(t, "expected index name or number");
            slots.push_back(t);
            if (is_punct(",")) {
                ++pos_;
                continue;
            }
            expect("]");
            break;
        }
        return slots;
    }

private:
    IndexedTensor parse_product() {
        const Token start = peek();
        IndexedTensor acc = parse_unary();
        std::set<std::string> consumed;
        while (is_punct("*") || is_punct("/")) {
            const Token op = next();
            IndexedTensor rhs = parse_unary();
            if (op.text == "/") {
                if (!rhs.is_scalar() || !rhs.scalar().is_constant() || rhs.scalar().is_zero())
                    throw error(op, "division is only by nonzero constants");
                const Rational inv = Rational(1) / rhs.scalar().constant_value();
                for (auto& e : acc.data) e = inv * e;
                continue;
            }
            for (const auto& nm : rhs.indices)
                if (consumed.count(nm) != 0) throw error(op, "index '" + nm + "' appears 3 or more times in a product");
            for (const auto& nm : rhs.indices)
                if (std::find(acc.indices.begin(), acc.indices.end(), nm) != acc.indices.end()) consumed.insert(nm);
            acc = contract_product(acc, rhs, line_, op.column);
        }
        (void)start;
        return acc;
    }

    IndexedTensor parse_unary() {
        if (is_punct("-")) {
            ++pos_;
            IndexedTensor t = parse_unary();
            for (auto& e : t.data) e = -e;
            return t;
        }
        if (is_punct("+")) {
            ++pos_;
            return parse_unary();
        }
        return parse_power();
    }

    IndexedTensor parse_power() {
        IndexedTensor base = parse_primary();
        if (is_punct("^")) {
            const Token op = next();
            const Token e = next();
            if (e.kind != Tok::Number) throw error(e, "exponent must be a nonnegative integer");
            if (!base.is_scalar()) throw error(op, "power of an indexed expression with free indices {" + join(base.indices) + "}");
            base.data[0] = pow(base.data[0], static_cast<unsigned>(std::stoul(e.text)));
        }
        return base;
    }

    int base_coordinate(const std::string& name) const {
        if (model_.n == 1 && name == "x") return 0;
        if (name.size() >= 2 && name[0] == 'x' &&
            std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            const int i = std::stoi(name.substr(1));
            if (i >= 1 && i <= model_.n) return i - 1;
        }
        return -1;
    }

    /// "_{1,2}" jet suffix; empty multi-index when absent.
    MultiIndex parse_jet_suffix() {
        std::vector<int> entries;
        if (!is_punct("_")) return {};
        ++pos_;
        expect("{");
        while (true) {
            const Token t = next();
            if (t.kind != Tok::Number) throw error(t, "derivative index must be a number");
            const int i = std::stoi(t.text);
            if (i < 1 || i > model_.n) throw error(t, "derivative index " + t.text + " out of range 1.." + std::to_string(model_.n));
            entries.push_back(i - 1);
            if (is_punct(",")) {
                ++pos_;
                continue;
            }
            expect("}");
            break;
        }
        return MultiIndex::from_entries(entries);
    }

    /// Builds the tensor of an indexed symbol from a component function.
    IndexedTensor access(const Token& name_tok, const std::vector<Token>& slots, const std::vector<int>& ranges,
                         const std::function<Expr(const std::vector<int>&)>& component) {
        if (slots.size() != ranges.size())
            throw error(name_tok, "'" + name_tok.text + "' takes " + std::to_string(ranges.size()) + " indices, got " +
                                      std::to_string(slots.size()));
        IndexedTensor raw;
        std::vector<int> fixed(slots.size(), -1);
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (slots[i].kind == Tok::Number) {
                const int v = std::stoi(slots[i].text);
                if (v < 1 || v > ranges[i])
                    throw error(slots[i], "index value " + slots[i].text + " out of range 1.." + std::to_string(ranges[i]));
                fixed[i] = v - 1;
            } else {
                raw.indices.push_back(slots[i].text);
                raw.ranges.push_back(ranges[i]);
            }
        }
        std::vector<int> full(slots.size());
        for_each_assignment(raw.ranges, [&](const std::vector<int>& v) {
            std::size_t k = 0;
            for (std::size_t i = 0; i < slots.size(); ++i) full[i] = fixed[i] >= 0 ? fixed[i] : v[k++];
            raw.data.push_back(component(full));
        });
        return reduce_repeated(raw, line_, name_tok.column);
    }

    IndexedTensor derivative(const Token& at, const Token& idx, const IndexedTensor& arg) {
        if (idx.kind == Tok::Number) {
            const int i = std::stoi(idx.text);
            if (i < 1 || i > model_.n) throw error(idx, "derivative index out of range 1.." + std::to_string(model_.n));
            IndexedTensor out = arg;
            for (auto& e : out.data) e = total_derivative(e, i - 1);
            return out;
        }
        IndexedTensor raw;
        raw.indices.push_back(idx.text);
        raw.ranges.push_back(model_.n);
        raw.indices.insert(raw.indices.end(), arg.indices.begin(), arg.indices.end());
        raw.ranges.insert(raw.ranges.end(), arg.ranges.begin(), arg.ranges.end());
        for (int i = 0; i < model_.n; ++i)
            for (const auto& e : arg.data) raw.data.push_back(total_derivative(e, i));
        return reduce_repeated(raw, line_, at.column);
    }

    IndexedTensor parse_primary() {
        const Token t = next();
        if (t.kind == Tok::Number) return scalar_tensor(Expr(Rational(std::stoll(t.text))));
        if (t.kind == Tok::Punct && t.text == "(") {
            IndexedTensor inner = parse_sum();
            expect(")");
            return inner;
        }
        if (t.kind != Tok::Ident) throw error(t, t.kind == Tok::End ? "unexpected end of expression" : "unexpected '" + t.text + "'");
        const std::string& name = t.text;

        if (name == "sin" || name == "cos" || name == "exp") {
            expect("(");
            IndexedTensor arg = parse_sum();
            expect(")");
            for (auto& e : arg.data) e = name == "sin" ? sin(e) : name == "cos" ? cos(e) : exp(e);
            return arg;
        }
        if (name == "d" && is_punct("(")) {
            ++pos_;
            const Token idx = next();
            if (idx.kind != Tok::Ident && idx.kind != Tok::Number) throw error(idx, "expected derivative index");
            expect(",");
            IndexedTensor arg = parse_sum();
            expect(")");
            return derivative(t, idx, arg);
        }
        if (name.size() >= 2 && name[0] == 'd' && is_punct("(") &&
            std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
            model_.defs.count(name) == 0) {
            ++pos_;
            IndexedTensor arg = parse_sum();
            expect(")");
            Token idx{Tok::Number, name.substr(1), t.column};
            return derivative(t, idx, arg);
        }
        if (auto it = model_.defs.find(name); it != model_.defs.end()) {
            const auto slots = parse_slots();
            const IndexedTensor& def = it->second;
            return access(t, slots, def.ranges, [&](const std::vector<int>& v) { return def.at(v); });
        }
        for (const auto& f : model_.fields) {
            if (f.name != name) continue;
            const auto slots = parse_slots();
            const MultiIndex J = parse_jet_suffix();
            return access(t, slots, f.ranges, [&](const std::vector<int>& v) { return Expr(Atom::jet(f.coordinate(v), J)); });
        }
        if (auto it = model_.constants.find(name); it != model_.constants.end()) {
            const auto slots = parse_slots();
            const ConstDecl& c = it->second;
            IndexedTensor shape{{}, c.ranges, {}};
            return access(t, slots, c.ranges, [&](const std::vector<int>& v) {
                return Expr(c.values.at(shape.flat(v)));
            });
        }
        if (auto it = model_.params.find(name); it != model_.params.end()) {
            const auto slots = parse_slots();
            const MultiIndex J = parse_jet_suffix();
            const ParamDecl& p = it->second;
            return access(t, slots, p.ranges, [&](const std::vector<int>& v) { return Expr(Atom::param(p.component_name(v), J)); });
        }
        if (const int i = base_coordinate(name); i >= 0) return scalar_tensor(Expr(Atom::base(i)));
        throw error(t, "unknown symbol '" + name + "'");
    }

    const std::vector<Token>& toks_;
    const ModelSpec& model_;
    int line_;
    std::size_t pos_;
};

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

struct Declared {
    std::vector<std::string> names;
    std::vector<int> ranges;
};

/// "[A:3, mu:4]" declaration list.
Declared parse_declared(ExprParser& p) {
    Declared d;
    if (!p.is_punct("[")) return d;
    p.next();
    while (true) {
        const Token nm = p.next();
        if (nm.kind != Tok::Ident) throw p.error(nm, "expected index name");
        p.expect(":");
        const Token r = p.next();
        if (r.kind != Tok::Number || std::stoi(r.text) < 1) throw p.error(r, "expected a positive index range");
        d.names.push_back(nm.text);
        d.ranges.push_back(std::stoi(r.text));
        if (p.is_punct(",")) {
            p.next();
            continue;
        }
        p.expect("]");
        break;
    }
    return d;
}

Rational parse_signed_rational(ExprParser& p) {
    bool neg = false;
    if (p.is_punct("-") || p.is_punct("+")) neg = p.next().text == "-";
    const Token num = p.next();
    if (num.kind != Tok::Number) throw p.error(num, "expected a number");
    Rational value(std::stoll(num.text));
    if (p.is_punct("/")) {
        p.next();
        const Token den = p.next();
        if (den.kind != Tok::Number || std::stoll(den.text) == 0) throw p.error(den, "expected a nonzero denominator");
        value = value / Rational(std::stoll(den.text));
    }
    return neg ? -value : value;
}

std::vector<Rational> parse_value_list(ExprParser& p) {
    std::vector<Rational> out;
    p.expect("(");
    while (true) {
        out.push_back(parse_signed_rational(p));
        if (p.is_punct(",")) {
            p.next();
            continue;
        }
        p.expect(")");
        break;
    }
    return out;
}

void check_symmetry(const ConstDecl& c, ExprParser& p, const Token& at) {
    if (c.symmetry == Symmetry::None || c.ranges.size() < 2) return;
    const IndexedTensor shape{{}, c.ranges, {}};
    const Rational s(c.symmetry == Symmetry::Symmetric ? 1 : -1);
    bool ok = true;
    for_each_assignment(c.ranges, [&](const std::vector<int>& v) {
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            if (c.ranges[i] != c.ranges[i + 1]) {
                ok = false;
                return;
            }
            std::vector<int> w = v;
            std::swap(w[i], w[i + 1]);
            if (!(c.values[shape.flat(w)] == s * c.values[shape.flat(v)])) ok = false;
        }
    });
    if (!ok) throw p.error(at, "table of '" + c.name + "' violates its declared symmetry");
}

ConstDecl build_constant(const std::string& name, const Declared& d, Symmetry sym, ExprParser& p, const Token& at) {
    ConstDecl c{name, d.ranges, sym, {}};
    std::size_t size = 1;
    for (int r : d.ranges) size *= static_cast<std::size_t>(r);
    const Token rule = p.peek();
    if (rule.kind == Tok::Ident && rule.text == "identity") {
        p.next();
        if (d.ranges.size() != 2 || d.ranges[0] != d.ranges[1]) throw p.error(rule, "identity needs two equal ranges");
        c.values.assign(size, Rational(0));
        for (int i = 0; i < d.ranges[0]; ++i) c.values[static_cast<std::size_t>(i * d.ranges[0] + i)] = Rational(1);
    } else if (rule.kind == Tok::Ident && rule.text == "levicivita") {
        p.next();
        const int k = static_cast<int>(d.ranges.size());
        for (int r : d.ranges)
            if (r != k) throw p.error(rule, "levicivita needs rank equal to every range");
        c.values.assign(size, Rational(0));
        for_each_assignment(d.ranges, [&](const std::vector<int>& v) {
            std::vector<int> w = v;
            int sign = 1;
            for (std::size_t i = 0; i < w.size(); ++i)
                for (std::size_t j = i + 1; j < w.size(); ++j) {
                    if (w[i] == w[j]) sign = 0;
                    if (w[i] > w[j]) sign = -sign;
                }
            c.values[IndexedTensor{{}, d.ranges, {}}.flat(v)] = Rational(sign);
        });
    } else if (rule.kind == Tok::Ident && rule.text == "diag") {
        p.next();
        const auto vals = parse_value_list(p);
        if (d.ranges.size() != 2 || d.ranges[0] != d.ranges[1] || static_cast<int>(vals.size()) != d.ranges[0])
            throw p.error(rule, "diag needs two equal ranges and one value per row");
        c.values.assign(size, Rational(0));
        for (int i = 0; i < d.ranges[0]; ++i) c.values[static_cast<std::size_t>(i * d.ranges[0] + i)] = vals[static_cast<std::size_t>(i)];
    } else if (rule.kind == Tok::Ident && rule.text == "table") {
        p.next();
        c.values = parse_value_list(p);
        if (c.values.size() != size)
            throw p.error(rule, "table needs " + std::to_string(size) + " values, got " + std::to_string(c.values.size()));
    } else {
        if (!d.ranges.empty()) throw p.error(rule, "expected identity, levicivita, diag(...) or table(...)");
        c.values = {parse_signed_rational(p)};
    }
    check_symmetry(c, p, at);
    return c;
}

struct Target {
    bool base = false;
    int base_index = 0;
    const FieldDecl* field = nullptr;
    std::vector<Token> slots;
};

/// Parses "target: expr; target: expr".
void parse_components(ExprParser& p, ModelSpec& model, bool allow_base,
                      const std::function<void(const Target&, const IndexedTensor&, const Token&)>& sink) {
    while (true) {
        const Token nm = p.next();
        if (nm.kind != Tok::Ident) throw p.error(nm, "expected a field or coordinate name");
        Target tgt;
        bool found = false;
        for (const auto& f : model.fields)
            if (f.name == nm.text) {
                tgt.field = &f;
                found = true;
            }
        if (!found) {
            int i = -1;
            if (model.n == 1 && nm.text == "x") i = 0;
            if (nm.text.size() >= 2 && nm.text[0] == 'x' &&
                std::all_of(nm.text.begin() + 1, nm.text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
                const int v = std::stoi(nm.text.substr(1));
                if (v >= 1 && v <= model.n) i = v - 1;
            }
            if (i < 0) throw p.error(nm, "unknown component target '" + nm.text + "'");
            if (!allow_base) throw p.error(nm, "sections have no base components");
            tgt.base = true;
            tgt.base_index = i;
        }
        tgt.slots = p.parse_slots();
        p.expect(":");
        const IndexedTensor value = p.parse_sum();
        sink(tgt, value, nm);
        if (p.is_punct(";")) {
            p.next();
            if (p.at_end()) break;
            continue;
        }
        if (!p.at_end()) throw p.error(p.peek(), "expected ';' or end of line");
        break;
    }
}

/// Assigns each component named by target with the matching entry of value.
void assign_components(ExprParser& p, const Target& tgt, const IndexedTensor& value, const Token& at,
                       std::vector<Expr>& fiber, std::vector<Expr>* base) {
    if (tgt.base) {
        if (!tgt.slots.empty()) throw p.error(at, "base coordinates take no indices");
        if (!value.is_scalar()) throw p.error(at, "free index in scalar position: " + join(value.indices));
        (*base)[static_cast<std::size_t>(tgt.base_index)] = value.scalar();
        return;
    }
    const FieldDecl& f = *tgt.field;
    if (tgt.slots.size() != f.ranges.size()) throw p.error(at, "'" + f.name + "' takes " + std::to_string(f.ranges.size()) + " indices");
    std::vector<std::string> names;
    std::vector<int> ranges;
    std::vector<int> fixed(tgt.slots.size(), -1);
    for (std::size_t i = 0; i < tgt.slots.size(); ++i) {
        const Token& s = tgt.slots[i];
        if (s.kind == Tok::Number) {
            const int v = std::stoi(s.text);
            if (v < 1 || v > f.ranges[i]) throw p.error(s, "index value out of range");
            fixed[i] = v - 1;
        } else {
            if (std::find(names.begin(), names.end(), s.text) != names.end()) throw p.error(s, "repeated index in a component target");
            names.push_back(s.text);
            ranges.push_back(f.ranges[i]);
        }
    }
    if (!same_index_set(names, value.indices))
        throw p.error(at, "unbalanced index: target has {" + join(names) + "}, value has {" + join(value.indices) + "}");
    const IndexedTensor v = align(value, names);
    std::vector<int> full(tgt.slots.size());
    for_each_assignment(ranges, [&](const std::vector<int>& a) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < full.size(); ++i) full[i] = fixed[i] >= 0 ? fixed[i] : a[k++];
        fiber[static_cast<std::size_t>(f.coordinate(full))] = v.at(a);
    });
}

void check_new_name(const ModelSpec& m, ExprParser& p, const Token& t) {
    const std::string& nm = t.text;
    bool taken = m.constants.count(nm) || m.params.count(nm) || m.defs.count(nm) || nm == "sin" || nm == "cos" ||
                 nm == "exp" || nm == "d";
    for (const auto& f : m.fields) taken = taken || f.name == nm;
    if (taken) throw p.error(t, "name '" + nm + "' is already in use");
}

void parse_statement(const std::vector<Token>& toks, ModelSpec& model, bool& have_dim, int line) {
    ExprParser p(toks, model, line);
    const Token kw = p.next();
    if (kw.kind != Tok::Ident) throw p.error(kw, "expected a statement keyword");
    if (kw.text == "dim") {
        const Token v = p.next();
        if (v.kind != Tok::Number) throw p.error(v, "expected the base dimension");
        const int n = std::stoi(v.text);
        if (n < 1 || n > kMaxBaseDim) throw p.error(v, "base dimension out of range 1.." + std::to_string(kMaxBaseDim));
        if (have_dim) throw p.error(kw, "dim declared twice");
        model.n = n;
        have_dim = true;
    } else {
        if (!have_dim) throw p.error(kw, "the first statement must be 'dim'");
        if (kw.text == "field") {
            const Token nm = p.next();
            if (nm.kind != Tok::Ident) throw p.error(nm, "expected a field name");
            check_new_name(model, p, nm);
            const Declared d = parse_declared(p);
            model.fields.push_back({nm.text, d.ranges, model.m()});
        } else if (kw.text == "param") {
            const Token nm = p.next();
            if (nm.kind != Tok::Ident) throw p.error(nm, "expected a parameter name");
            check_new_name(model, p, nm);
            const Declared d = parse_declared(p);
            model.params[nm.text] = {nm.text, d.ranges};
        } else if (kw.text == "const") {
            const Token nm = p.next();
            if (nm.kind != Tok::Ident) throw p.error(nm, "expected a constant name");
            check_new_name(model, p, nm);
            const Declared d = parse_declared(p);
            const Token sym = p.next();
            Symmetry s = Symmetry::None;
            if (sym.text == "symmetric")
                s = Symmetry::Symmetric;
            else if (sym.text == "antisymmetric")
                s = Symmetry::Antisymmetric;
            else if (sym.text != "none")
                throw p.error(sym, "expected symmetric, antisymmetric or none");
            p.expect("=");
            model.constants[nm.text] = build_constant(nm.text, d, s, p, nm);
        } else if (kw.text == "metric") {
            p.expect("=");
            const Token rule = p.next();
            if (rule.text != "diag") throw p.error(rule, "metric must be diag(...)");
            const auto vals = parse_value_list(p);
            if (static_cast<int>(vals.size()) != model.n) throw p.error(rule, "metric needs one entry per base dimension");
            ConstDecl g{"g", {model.n, model.n}, Symmetry::Symmetric, {}};
            ConstDecl gi{"ginv", {model.n, model.n}, Symmetry::Symmetric, {}};
            g.values.assign(static_cast<std::size_t>(model.n * model.n), Rational(0));
            gi.values = g.values;
            for (int i = 0; i < model.n; ++i) {
                if (vals[static_cast<std::size_t>(i)].is_zero()) throw p.error(rule, "degenerate metric");
                g.values[static_cast<std::size_t>(i * model.n + i)] = vals[static_cast<std::size_t>(i)];
                gi.values[static_cast<std::size_t>(i * model.n + i)] = Rational(1) / vals[static_cast<std::size_t>(i)];
            }
            model.constants["g"] = g;
            model.constants["ginv"] = gi;
        } else if (kw.text == "def") {
            const Token nm = p.next();
            if (nm.kind != Tok::Ident) throw p.error(nm, "expected a definition name");
            check_new_name(model, p, nm);
            const auto slots = p.parse_slots();
            std::vector<std::string> header;
            for (const auto& s : slots) {
                if (s.kind != Tok::Ident) throw p.error(s, "definition indices must be names");
                if (std::find(header.begin(), header.end(), s.text) != header.end()) throw p.error(s, "repeated index in definition");
                header.push_back(s.text);
            }
            p.expect("=");
            const Token body_at = p.peek();
            IndexedTensor value = p.parse_sum();
            if (!p.at_end()) throw p.error(p.peek(), "unexpected '" + p.peek().text + "'");
            if (!same_index_set(header, value.indices))
                throw p.error(body_at, "unbalanced index: definition declares {" + join(header) + "}, body has {" +
                                           join(value.indices) + "}");
            model.defs[nm.text] = align(value, header);
        } else if (kw.text == "lagrangian") {
            p.expect("=");
            const Token body_at = p.peek();
            IndexedTensor value = p.parse_sum();
            if (!p.at_end()) throw p.error(p.peek(), "unexpected '" + p.peek().text + "'");
            if (!value.is_scalar()) throw p.error(body_at, "free index in scalar position: " + join(value.indices));
            if (model.lagrangian) throw p.error(kw, "lagrangian declared twice");
            model.lagrangian = value.scalar();
        } else if (kw.text == "vecfield" || kw.text == "section") {
            const bool is_field = kw.text == "vecfield";
            const Token nm = p.next();
            if (nm.kind != Tok::Ident) throw p.error(nm, "expected a name");
            if (model.fields.empty()) throw p.error(nm, "declare fields before " + kw.text + "s");
            p.expect("=");
            std::vector<Expr> fiber(static_cast<std::size_t>(model.m()));
            std::vector<Expr> base(static_cast<std::size_t>(model.n));
            parse_components(p, model, is_field, [&](const Target& t, const IndexedTensor& v, const Token& at) {
                assign_components(p, t, v, at, fiber, &base);
            });
            try {
                if (is_field) {
                    VecField f(base, fiber);
                    f.validate();
                    model.vecfields[nm.text] = std::move(f);
                } else {
                    Section s{fiber};
                    s.validate();
                    model.sections[nm.text] = std::move(s);
                }
            } catch (const std::invalid_argument& e) {
                throw p.error(nm, e.what());
            }
        } else {
            throw p.error(kw, "unknown statement '" + kw.text + "'");
        }
    }
    if (!p.at_end()) throw p.error(p.peek(), "unexpected '" + p.peek().text + "'");
}

}  // namespace

ModelSpec parse_model(const std::string& text) {
    ModelSpec model;
    bool have_dim = false;
    std::istringstream in(text);
    std::string line;
    std::string pending;
    int line_no = 0;
    int start_line = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // strip comments before checking for continuation
        const auto hash = line.find('#');
        std::string body = hash == std::string::npos ? line : line.substr(0, hash);
        while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.pop_back();
        if (pending.empty()) start_line = line_no;
        if (!body.empty() && body.back() == '\\') {
            body.pop_back();
            pending += body + " ";
            continue;
        }
        pending += body;
        const auto toks = tokenize(pending, start_line);
        pending.clear();
        if (toks.size() == 1) continue;
        parse_statement(toks, model, have_dim, start_line);
    }
    if (!pending.empty()) throw ParseError(start_line, 1, "line continuation at end of input");
    if (!have_dim) throw ParseError(line_no, 1, "missing 'dim' statement");
    if (model.fields.empty()) throw ParseError(line_no, 1, "model declares no fields");
    return model;
}

ModelSpec load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read model file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_model(ss.str());
}

IndexedTensor parse_indexed(const std::string& text, const ModelSpec& model) {
    const auto toks = tokenize(text, 1);
    ExprParser p(toks, model, 1);
    IndexedTensor t = p.parse_sum();
    if (!p.at_end()) throw p.error(p.peek(), "unexpected '" + p.peek().text + "'");
    return t;
}

Expr parse_expression(const std::string& text, const ModelSpec& model) {
    const IndexedTensor t = parse_indexed(text, model);
    if (!t.is_scalar()) throw ParseError(1, 1, "free index in scalar position: " + join(t.indices));
    return t.scalar();
}

}  // namespace varfield

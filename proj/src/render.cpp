// SPDX-License-Identifier: Apache-2.0
#include "varfield/render.hpp"

#include <json.hpp>

#include <stdexcept>

namespace varfield {

using nlohmann::json;

namespace {

constexpr const char* kSchema = "varfield-json/1";

std::string plain_suffix(const MultiIndex& J) {
    if (J.empty()) return {};
    std::string s = "_{";
    bool first = true;
    for (int e : J.entries()) {
        if (!first) s += ",";
        s += std::to_string(e + 1);
        first = false;
    }
    return s + "}";
}

std::string latex_suffix(const MultiIndex& J, int n) {
    if (J.empty()) return {};
    std::string s = "_{";
    bool first = true;
    for (int e : J.entries()) {
        if (!first && n > 9) s += ",";
        s += std::to_string(e + 1);
        first = false;
    }
    return s + "}";
}

/// "w[1,2]" -> {"w", "1,2"}.
std::pair<std::string, std::string> split_name(const std::string& name) {
    const auto b = name.find('[');
    if (b == std::string::npos || name.back() != ']') return {name, {}};
    return {name.substr(0, b), name.substr(b + 1, name.size() - b - 2)};
}

const std::string& field_name(const JetContext& ctx, int sigma) {
    if (sigma < 0 || sigma >= static_cast<int>(ctx.field_names.size()))
        throw std::invalid_argument("field index " + std::to_string(sigma) + " outside the chart");
    return ctx.field_names[static_cast<std::size_t>(sigma)];
}

const std::string& base_name(const JetContext& ctx, int i) {
    if (i < 0 || i >= static_cast<int>(ctx.base_names.size()))
        throw std::invalid_argument("base index " + std::to_string(i) + " outside the chart");
    return ctx.base_names[static_cast<std::size_t>(i)];
}

const char* func_name(FuncKind f) {
    switch (f) {
        case FuncKind::Sin:
            return "sin";
        case FuncKind::Cos:
            return "cos";
        case FuncKind::Exp:
            return "exp";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Plain
// ---------------------------------------------------------------------------

std::string plain_expr(const Expr& e, const JetContext& ctx);

std::string plain_atom(const Atom& a, const JetContext& ctx) {
    switch (a.kind) {
        case AtomKind::Base:
            return base_name(ctx, a.id);
        case AtomKind::Jet:
            return field_name(ctx, a.id) + plain_suffix(a.index);
        case AtomKind::Param:
            return ParamRegistry::name(a.id) + plain_suffix(a.index);
        case AtomKind::Func:
            return std::string(func_name(a.func)) + "(" + plain_expr(a.argument(), ctx) + ")";
    }
    return "?";
}

std::string plain_expr(const Expr& e, const JetContext& ctx) {
    if (e.is_zero()) return "0";
    std::string out;
    bool first = true;
    for (const auto& t : e.terms()) {
        Rational c = t.coeff;
        const bool neg = c < Rational(0);
        if (neg) c = -c;
        if (first) {
            if (neg) out += "-";
        } else {
            out += neg ? " - " : " + ";
        }
        first = false;
        std::string mono;
        for (const auto& f : t.mono) {
            if (!mono.empty()) mono += "*";
            mono += plain_atom(f.atom, ctx);
            if (f.power != 1) mono += "^" + std::to_string(f.power);
        }
        if (mono.empty()) {
            out += c.str();
        } else if (c.is_one()) {
            out += mono;
        } else {
            out += c.str() + "*" + mono;
        }
    }
    return out;
}

std::string plain_basis(const BasisOne& b, const JetContext& ctx) {
    switch (b.kind) {
        case BasisKind::DX:
            return "d" + base_name(ctx, b.index);
        case BasisKind::Omega:
            if (ctx.m == 1) return "ω" + plain_suffix(b.J);
            return "ω^{" + field_name(ctx, b.index) + "}" + plain_suffix(b.J);
        case BasisKind::DyTop:
            return "d" + field_name(ctx, b.index) + plain_suffix(b.J);
    }
    return "?";
}

/// Contact factors first; returns the sign of that reordering.
int display_order(const Wedge& w, Wedge& out) {
    out.clear();
    int dx_seen = 0;
    int sign = 1;
    for (const auto& b : w)
        if (!b.is_dx()) out.push_back(b);
    for (const auto& b : w) {
        if (b.is_dx()) {
            out.push_back(b);
            ++dx_seen;
        } else if (dx_seen % 2 == 1) {
            sign = -sign;
        }
    }
    return sign;
}

bool needs_parens(const Expr& c) { return c.size() > 1; }

std::string plain_form(const Form& rho, const JetContext& ctx) {
    if (rho.is_zero()) return "0";
    std::string out;
    bool first = true;
    Wedge shown;
    for (const auto& [w, c0] : rho.terms()) {
        const int s = display_order(w, shown);
        const Expr c = s > 0 ? c0 : -c0;
        std::string basis;
        for (const auto& b : shown) basis += (basis.empty() ? "" : "∧") + plain_basis(b, ctx);
        std::string coeff;
        bool neg = false;
        if (needs_parens(c)) {
            coeff = "(" + plain_expr(c, ctx) + ")";
        } else {
            const Term& t = c.terms().front();
            neg = t.coeff < Rational(0);
            coeff = plain_expr(neg ? -c : c, ctx);
            if (coeff == "1" && !basis.empty()) coeff.clear();
        }
        std::string term = coeff;
        if (!basis.empty()) term += (term.empty() ? "" : " ") + basis;
        if (first) {
            out += (neg ? "-" : "") + term;
        } else {
            out += (neg ? " - " : " + ") + term;
        }
        first = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// LaTeX
// ---------------------------------------------------------------------------

std::string latex_expr(const Expr& e, const JetContext& ctx);

std::string latex_rational(const Rational& c) {
    if (c.is_integer()) return std::to_string(c.num());
    return "\\frac{" + std::to_string(c.num()) + "}{" + std::to_string(c.den()) + "}";
}

std::string latex_name(const std::string& name, const MultiIndex& J, int n) {
    const auto [stem, slots] = split_name(name);
    std::string s = stem;
    if (!slots.empty()) s += "^{" + slots + "}";
    return s + latex_suffix(J, n);
}

std::string latex_atom(const Atom& a, const JetContext& ctx) {
    switch (a.kind) {
        case AtomKind::Base: {
            const std::string& b = base_name(ctx, a.id);
            if (b.size() > 1 && b[0] == 'x') return "x_{" + b.substr(1) + "}";
            return b;
        }
        case AtomKind::Jet:
            return latex_name(field_name(ctx, a.id), a.index, ctx.n);
        case AtomKind::Param:
            return latex_name(ParamRegistry::name(a.id), a.index, ctx.n);
        case AtomKind::Func:
            return std::string("\\") + func_name(a.func) + "\\left(" + latex_expr(a.argument(), ctx) + "\\right)";
    }
    return "?";
}

std::string latex_expr(const Expr& e, const JetContext& ctx) {
    if (e.is_zero()) return "0";
    std::string out;
    bool first = true;
    for (const auto& t : e.terms()) {
        Rational c = t.coeff;
        const bool neg = c < Rational(0);
        if (neg) c = -c;
        out += first ? (neg ? "-" : "") : (neg ? " - " : " + ");
        first = false;
        std::string mono;
        for (const auto& f : t.mono) {
            if (!mono.empty()) mono += " ";
            const std::string a = latex_atom(f.atom, ctx);
            mono += f.power == 1 ? a : (f.atom.is_func() ? "\\left(" + a + "\\right)" : a) + "^{" + std::to_string(f.power) + "}";
        }
        if (mono.empty()) {
            out += latex_rational(c);
        } else if (c.is_one()) {
            out += mono;
        } else {
            out += latex_rational(c) + " " + mono;
        }
    }
    return out;
}

std::string latex_basis(const BasisOne& b, const JetContext& ctx) {
    switch (b.kind) {
        case BasisKind::DX: {
            const std::string& nm = base_name(ctx, b.index);
            if (nm.size() > 1 && nm[0] == 'x') return "dx^{" + nm.substr(1) + "}";
            return "d" + nm;
        }
        case BasisKind::Omega: {
            std::string s = "\\omega";
            if (ctx.m > 1) s += "^{" + latex_name(field_name(ctx, b.index), {}, ctx.n) + "}";
            return s + latex_suffix(b.J, ctx.n);
        }
        case BasisKind::DyTop:
            return "d" + latex_name(field_name(ctx, b.index), b.J, ctx.n);
    }
    return "?";
}

std::string latex_form(const Form& rho, const JetContext& ctx) {
    if (rho.is_zero()) return "0";
    std::string out;
    bool first = true;
    Wedge shown;
    for (const auto& [w, c0] : rho.terms()) {
        const int s = display_order(w, shown);
        const Expr c = s > 0 ? c0 : -c0;
        std::string basis;
        for (const auto& b : shown) basis += (basis.empty() ? "" : "\\wedge ") + latex_basis(b, ctx);
        std::string coeff;
        bool neg = false;
        if (needs_parens(c)) {
            coeff = "\\left(" + latex_expr(c, ctx) + "\\right)";
        } else {
            neg = c.terms().front().coeff < Rational(0);
            coeff = latex_expr(neg ? -c : c, ctx);
            if (coeff == "1" && !basis.empty()) coeff.clear();
        }
        std::string term = coeff;
        if (!basis.empty()) term += (term.empty() ? "" : "\\,") + basis;
        out += first ? (neg ? "-" : "") + term : (neg ? " - " : " + ") + term;
        first = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

json expr_json(const Expr& e, const JetContext* ctx);

json index_json(const MultiIndex& J) { return J.entries(); }

json atom_json(const Atom& a, const JetContext* ctx) {
    json j;
    switch (a.kind) {
        case AtomKind::Base:
            j = {{"kind", "base"}, {"index", a.id}};
            if (ctx != nullptr) j["name"] = base_name(*ctx, a.id);
            break;
        case AtomKind::Jet:
            j = {{"kind", "jet"}, {"field", a.id}, {"J", index_json(a.index)}};
            if (ctx != nullptr) j["name"] = field_name(*ctx, a.id);
            break;
        case AtomKind::Param:
            j = {{"kind", "param"}, {"name", ParamRegistry::name(a.id)}, {"J", index_json(a.index)}};
            break;
        case AtomKind::Func:
            j = {{"kind", func_name(a.func)}, {"arg", expr_json(a.argument(), ctx)}};
            break;
    }
    return j;
}

json expr_json(const Expr& e, const JetContext* ctx) {
    json terms = json::array();
    for (const auto& t : e.terms()) {
        json atoms = json::array();
        for (const auto& f : t.mono) {
            json a = atom_json(f.atom, ctx);
            a["power"] = f.power;
            atoms.push_back(std::move(a));
        }
        terms.push_back({{"coeff", t.coeff.str()}, {"atoms", std::move(atoms)}});
    }
    return {{"terms", std::move(terms)}};
}

json basis_json(const BasisOne& b) {
    switch (b.kind) {
        case BasisKind::DX:
            return {{"kind", "dx"}, {"index", b.index}};
        case BasisKind::Omega:
            return {{"kind", "omega"}, {"field", b.index}, {"J", index_json(b.J)}};
        case BasisKind::DyTop:
            return {{"kind", "dy"}, {"field", b.index}, {"J", index_json(b.J)}};
    }
    return {};
}

MultiIndex index_from(const json& j) { return MultiIndex::from_entries(j.get<std::vector<int>>()); }

Expr expr_from(const json& j);

Atom atom_from(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "base") return Atom::base(j.at("index").get<int>());
    if (kind == "jet") return Atom::jet(j.at("field").get<int>(), index_from(j.at("J")));
    if (kind == "param") return Atom::param(j.at("name").get<std::string>(), index_from(j.at("J")));
    if (kind == "sin") return Atom::function(FuncKind::Sin, expr_from(j.at("arg")));
    if (kind == "cos") return Atom::function(FuncKind::Cos, expr_from(j.at("arg")));
    if (kind == "exp") return Atom::function(FuncKind::Exp, expr_from(j.at("arg")));
    throw std::invalid_argument("unknown atom kind '" + kind + "'");
}

Expr expr_from(const json& j) {
    ExprBuilder acc;
    for (const auto& t : j.at("terms")) {
        Expr term(Rational::parse(t.at("coeff").get<std::string>()));
        for (const auto& a : t.at("atoms")) term *= pow(Expr(atom_from(a)), a.at("power").get<unsigned>());
        acc.add(term);
    }
    return acc.build();
}

BasisOne basis_from(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dx") return BasisOne::dx(j.at("index").get<int>());
    if (kind == "omega") return BasisOne::omega(j.at("field").get<int>(), index_from(j.at("J")));
    if (kind == "dy") return BasisOne::dytop(j.at("field").get<int>(), index_from(j.at("J")));
    throw std::invalid_argument("unknown basis kind '" + kind + "'");
}

json document(const char* kind) { return {{"schema", kSchema}, {"kind", kind}}; }

json parse_document(const std::string& text, const char* kind) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
    }
    if (j.value("schema", "") != kSchema) throw std::invalid_argument("unsupported JSON schema");
    if (j.value("kind", "") != kind) throw std::invalid_argument(std::string("JSON document is not a ") + kind);
    return j;
}

/// Components c_i of current = sum_i c_i ds_i.
std::vector<Expr> current_components(const Form& current, int n) {
    if (!current.is_zero() && (current.degree() != n - 1 || !current.is_horizontal()))
        throw std::invalid_argument("a current must be a horizontal (n-1)-form");
    std::vector<Expr> out;
    for (int i = 0; i < n; ++i) {
        const Form dsi = Form::volume_minus(n, i);
        const auto& [w, sign] = *dsi.terms().begin();
        out.push_back(sign * current.coefficient(w));
    }
    return out;
}

}  // namespace

OutputFormat parse_format(const std::string& name) {
    if (name == "plain") return OutputFormat::Plain;
    if (name == "latex") return OutputFormat::Latex;
    if (name == "json") return OutputFormat::Json;
    throw std::invalid_argument("unknown output format '" + name + "'");
}

std::string render_expr(const Expr& e, const JetContext& ctx, OutputFormat fmt) {
    switch (fmt) {
        case OutputFormat::Plain:
            return plain_expr(e, ctx);
        case OutputFormat::Latex:
            return latex_expr(e, ctx);
        case OutputFormat::Json: {
            json j = document("expr");
            j["expr"] = expr_json(e, &ctx);
            j["text"] = plain_expr(e, ctx);
            return j.dump();
        }
    }
    return {};
}

std::string render_form(const Form& rho, const JetContext& ctx, OutputFormat fmt) {
    switch (fmt) {
        case OutputFormat::Plain:
            return plain_form(rho, ctx);
        case OutputFormat::Latex:
            return latex_form(rho, ctx);
        case OutputFormat::Json: {
            json j = document("form");
            j["n"] = rho.base_dim() == 0 ? ctx.n : rho.base_dim();
            j["order"] = rho.order();
            j["degree"] = rho.degree();
            json terms = json::array();
            for (const auto& [w, c] : rho.terms()) {
                json basis = json::array();
                for (const auto& b : w) basis.push_back(basis_json(b));
                terms.push_back({{"coeff", expr_json(c, &ctx)}, {"basis", std::move(basis)}});
            }
            j["terms"] = std::move(terms);
            j["text"] = plain_form(rho, ctx);
            return j.dump();
        }
    }
    return {};
}

std::string render_current(const Form& current, const JetContext& ctx, OutputFormat fmt) {
    const auto comps = current_components(current, ctx.n);
    if (fmt == OutputFormat::Json) {
        json j = document("current");
        j["n"] = ctx.n;
        json cs = json::array();
        for (const auto& c : comps) cs.push_back(expr_json(c, &ctx));
        j["components"] = std::move(cs);
        j["text"] = render_current(current, ctx, OutputFormat::Plain);
        return j.dump();
    }
    const bool latex = fmt == OutputFormat::Latex;
    if (ctx.n == 1) return latex ? latex_expr(comps[0], ctx) : plain_expr(comps[0], ctx);
    std::string out;
    for (int i = 0; i < ctx.n; ++i) {
        const Expr& c = comps[static_cast<std::size_t>(i)];
        if (c.is_zero()) continue;
        if (!out.empty()) out += " + ";
        const std::string body = latex ? latex_expr(c, ctx) : plain_expr(c, ctx);
        const std::string ds = latex ? "\\,ds_{" + std::to_string(i + 1) + "}" : " ds_" + std::to_string(i + 1);
        out += (latex ? "\\left(" + body + "\\right)" : "(" + body + ")") + ds;
    }
    return out.empty() ? "0" : out;
}

Expr expr_from_json(const std::string& text) {
    const json j = parse_document(text, "expr");
    return expr_from(j.at("expr"));
}

Form form_from_json(const std::string& text) {
    const json j = parse_document(text, "form");
    Form out(j.at("n").get<int>(), j.at("order").get<int>(), j.at("degree").get<int>());
    for (const auto& t : j.at("terms")) {
        Wedge w;
        for (const auto& b : t.at("basis")) w.push_back(basis_from(b));
        out.add_term(std::move(w), expr_from(t.at("coeff")));
    }
    return out;
}

}  // namespace varfield

// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "varfield/cancel.hpp"
#include "varfield/modeldsl.hpp"
#include "varfield/numverify.hpp"
#include "varfield/parallel.hpp"
#include "varfield/render.hpp"
#include "varfield/varops.hpp"
#include "varfield/ymcase.hpp"

namespace varfield::cli {

namespace {

/// Failure of a command that is not a verification failure.
class CommandError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string model_path;
    std::string format = "plain";
    std::optional<int> max_order;
    std::optional<double> timeout_s;
    std::string grid;
    std::optional<double> tol;
};

struct VerifyArgs {
    std::string what;
    std::string section;
    std::vector<std::string> fields;
    double step = 1e-5;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

std::string point_text(const std::vector<double>& p) {
    std::string s = "(";
    for (std::size_t i = 0; i < p.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", p[i]);
        s += (i ? ", " : "") + std::string(buf);
    }
    return s + ")";
}

/// Applies config-file values for every option not given on the command line.
void merge_config_file(const std::string& path, RunConfig& cfg, const CLI::App& app) {
    std::ifstream f(path);
    if (!f) throw CommandError("cannot read config file '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CommandError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw CommandError("config file '" + path + "' must hold a JSON object");
    auto given = [&app](const char* opt) { return app.count(opt) > 0; };
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "format") {
                if (!given("--format")) cfg.format = value.get<std::string>();
            } else if (key == "max_order") {
                if (!given("--max-order")) cfg.max_order = value.get<int>();
            } else if (key == "timeout_s") {
                if (!given("--timeout-s")) cfg.timeout_s = value.get<double>();
            } else if (key == "grid") {
                if (!given("--grid")) cfg.grid = value.get<std::string>();
            } else if (key == "tol") {
                if (!given("--tol")) cfg.tol = value.get<double>();
            } else {
                throw CommandError("config file '" + path + "': unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw CommandError("config file '" + path + "': " + e.what());
    }
}

void validate(const RunConfig& cfg) {
    (void)parse_format(cfg.format);
    if (cfg.timeout_s && !(*cfg.timeout_s > 0.0)) throw CommandError("--timeout-s must be positive");
    if (cfg.max_order && *cfg.max_order < 0) throw CommandError("--max-order must be nonnegative");
    if (cfg.tol && !(*cfg.tol > 0.0)) throw CommandError("--tol must be positive");
}

class Session {
public:
    Session(const RunConfig& cfg, std::ostream& out) : cfg_(cfg), out_(out), fmt_(parse_format(cfg.format)) {}

    ModelSpec& model() {
        if (!model_) {
            try {
                model_ = load_model(cfg_.model_path);
            } catch (const ParseError& e) {
                throw CommandError(cfg_.model_path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) +
                                   ": " + e.message());
            }
            if (cfg_.max_order && model_->lagrangian) {
                const int order = jet_order(*model_->lagrangian);
                if (*cfg_.max_order < order)
                    throw CommandError("--max-order " + std::to_string(*cfg_.max_order) +
                                       " is below the Lagrangian order " + std::to_string(order));
            }
        }
        return *model_;
    }

    Form lagrangian() {
        if (!model().lagrangian) throw CommandError(cfg_.model_path + ": model has no lagrangian");
        return model().lagrangian_form();
    }

    const VecField& field(const std::string& name) {
        if (model().vecfields.count(name) == 0) throw CommandError("unknown vector field '" + name + "'");
        return model().vecfields.at(name);
    }

    const Section& section(const std::string& name) {
        if (model().sections.count(name) == 0) throw CommandError("unknown section '" + name + "'");
        return model().sections.at(name);
    }

    /// Enforces --max-order on a derived form.
    const Form& capped(const Form& f) const {
        if (cfg_.max_order) {
            const int order = coefficient_order(f);
            if (order > *cfg_.max_order)
                throw CommandError("result needs jet order " + std::to_string(order) + ", above --max-order " +
                                   std::to_string(*cfg_.max_order));
        }
        return f;
    }

    void print_form(const Form& f) { out_ << render_form(capped(f), model().context(), fmt_) << '\n'; }
    void print_current(const Form& f) { out_ << render_current(capped(f), model().context(), fmt_) << '\n'; }

    GridSpec grid(int n, int default_count, double default_tol, double lo = 0.0, double hi = 1.0) const {
        const double tol = cfg_.tol.value_or(default_tol);
        if (cfg_.grid.empty()) {
            GridSpec g = GridSpec::uniform(n, lo, hi, default_count, tol);
            g.validate();
            return g;
        }
        return parse_grid(cfg_.grid, n, tol);
    }

    [[nodiscard]] OutputFormat format() const { return fmt_; }
    std::ostream& out() { return out_; }

private:
    const RunConfig& cfg_;
    std::ostream& out_;
    OutputFormat fmt_;
    std::optional<ModelSpec> model_;
};

int print_report(Session& s, const std::string& label, const VerifyReport& r, bool finite_difference) {
    if (s.format() == OutputFormat::Json) {
        auto j = nlohmann::json::parse(report_json(r));
        j["check"] = label;
        s.out() << j.dump() << '\n';
    } else if (finite_difference) {
        s.out() << (r.pass ? "PASS " : "FAIL ") << label << ": |estimate - reference| = " << sci(r.max_residual)
                << ", estimate " << sci(r.estimate) << ", reference " << sci(r.reference) << ", " << r.samples
                << " points, tolerance " << sci(r.tolerance) << '\n';
    } else {
        s.out() << (r.pass ? "PASS " : "FAIL ") << label << ": max residual " << sci(r.max_residual) << " at "
                << point_text(r.argmax) << ", " << r.samples << " points, tolerance " << sci(r.tolerance) << '\n';
    }
    return r.pass ? kExitOk : kExitVerifyFailed;
}

int cmd_verify(Session& s, const VerifyArgs& a) {
    const Form lambda = s.lagrangian();
    const Section& gamma = s.section(a.section);
    const int n = s.model().n;
    std::vector<const VecField*> fields;
    for (const auto& name : a.fields) fields.push_back(&s.field(name));
    auto need_fields = [&](std::size_t count) {
        if (fields.empty())
            for (const auto& [name, f] : s.model().vecfields) {
                if (fields.size() == count) break;
                fields.push_back(&f);
            }
        if (fields.size() != count)
            throw CommandError("'" + a.what + "' needs " + std::to_string(count) + " vector field(s)");
    };
    const std::string label = a.what + " along " + a.section;
    const int count = n == 1 ? 33 : n == 2 ? 33 : 9;
    if (a.what == "el") {
        return print_report(s, label, pullback_eval(euler_lagrange(lambda).form, gamma, s.grid(n, count, 1e-9)), false);
    }
    if (a.what == "noether") {
        need_fields(1);
        return print_report(s, label, pullback_eval(noether_current(lambda, *fields[0]).current, gamma, s.grid(n, count, 1e-9)),
                            false);
    }
    if (a.what == "jacobi") {
        need_fields(1);
        return print_report(s, label, pullback_eval(jacobi_morphism(lambda, *fields[0]).form, gamma, s.grid(n, count, 1e-9)),
                            false);
    }
    if (a.what == "paircurrent") {
        need_fields(2);
        const NoetherCurrent pc = pair_current_parallel(lambda, *fields[0], *fields[1]);
        return print_report(s, label, pullback_eval(pc.current, gamma, s.grid(n, count, 1e-9)), false);
    }
    if (a.what == "fd") {
        need_fields(1);
        const GridSpec g = s.grid(n, n == 1 ? 1001 : 41, 1e-6);
        return print_report(s, label, finite_difference_check(lambda, gamma, *fields[0], a.step, g), true);
    }
    throw CommandError("unknown check '" + a.what + "' (el, noether, jacobi, paircurrent, fd)");
}

int cmd_varsplit(Session& s, const std::vector<std::string>& names, int order) {
    if (order != 0 && order != static_cast<int>(names.size()))
        throw CommandError("--order " + std::to_string(order) + " needs " + std::to_string(order) + " vector fields, got " +
                           std::to_string(names.size()));
    const Form lambda = s.lagrangian();
    std::vector<VecField> fields;
    for (const auto& n : names) fields.push_back(s.field(n));
    const VariationDecomposition dec = variation_decompose(lambda, fields);
    const Form residual = iterated_lie_derivative(lambda, fields) - dec.total();
    const JetContext ctx = s.model().context();
    if (s.format() == OutputFormat::Json) {
        nlohmann::json j{{"schema", "varfield-json/1"},
                         {"kind", "variation_split"},
                         {"euler_term", nlohmann::json::parse(render_form(s.capped(dec.euler_term), ctx, s.format()))}};
        j["current_terms"] = nlohmann::json::array();
        for (const auto& c : dec.current_terms)
            j["current_terms"].push_back(nlohmann::json::parse(render_form(s.capped(c), ctx, s.format())));
        j["residual"] = nlohmann::json::parse(render_form(residual, ctx, s.format()));
        s.out() << j.dump() << '\n';
    } else {
        s.out() << "euler term: " << render_form(s.capped(dec.euler_term), ctx, s.format()) << '\n';
        for (std::size_t k = 0; k < dec.current_terms.size(); ++k)
            s.out() << "current term " << k + 1 << ": " << render_form(s.capped(dec.current_terms[k]), ctx, s.format())
                    << '\n';
        s.out() << "residual: " << render_form(residual, ctx, s.format()) << '\n';
    }
    return residual.is_zero() ? kExitOk : kExitVerifyFailed;
}

int cmd_ym_demo(Session& s, const std::string& group, int dim) {
    const YMModel model = build_ym(parse_gauge_group(group), dim);
    std::vector<ComparisonReport> reports{compare_euler(model), compare_jacobi(model), compare_pair_current(model)};
    const auto waves = default_plane_waves(dim);
    const NoetherCurrent pc =
        pair_current_parallel(model.lagrangian(), plane_wave_field(model, waves[0]), plane_wave_field(model, waves[1]));
    const GridSpec g = s.grid(dim, 9, 1e-9, -1.0, 1.0);
    const VerifyReport conservation = pullback_eval(pc.current, model.flat_section(), g);
    bool ok = conservation.pass;
    for (const auto& r : reports) ok = ok && r.match;
    if (s.format() == OutputFormat::Json) {
        nlohmann::json j = nlohmann::json::parse(reports_json(reports));
        j["kind"] = "ym_demo";
        j["dim"] = dim;
        j["conservation"] = nlohmann::json::parse(report_json(conservation));
        s.out() << j.dump() << '\n';
    } else {
        for (const auto& r : reports) {
            s.out() << (r.match ? "PASS " : "FAIL ") << r.name << ": " << r.components << " components";
            if (!r.match) s.out() << ", " << r.mismatched << " differ, first residual " << r.first_residual;
            s.out() << '\n';
        }
        s.out() << (conservation.pass ? "PASS " : "FAIL ") << "plane-wave current conservation: max residual "
                << sci(conservation.max_residual) << " on " << conservation.samples << " points, tolerance "
                << sci(conservation.tolerance) << '\n';
    }
    return ok ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Variational calculus on jet bundles: derivations and numeric verification", "varfield"};
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;
    std::string config_path;
    app.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"plain", "latex", "json"}));
    app.add_option("--max-order", cfg.max_order, "Highest jet order allowed in results");
    app.add_option("--timeout-s", cfg.timeout_s, "Cancel derivations after this many seconds");
    app.add_option("--grid", cfg.grid, "Sample grid: lo:hi:count for every axis, or one triple per axis");
    app.add_option("--tol", cfg.tol, "Absolute tolerance for numeric checks");
    app.add_option("--config", config_path, "JSON file with format, max_order, timeout_s, grid, tol");

    std::string field_a;
    std::string field_b;
    std::vector<std::string> field_list;
    int order = 0;
    VerifyArgs verify;
    std::string group = "su2";
    int dim = 2;

    auto* elform = app.add_subcommand("elform", "Euler-Lagrange source form of the model Lagrangian");
    auto* noether = app.add_subcommand("noether", "Noether current of a vector field");
    auto* jacobi = app.add_subcommand("jacobi", "Jacobi morphism along a vector field");
    auto* varsplit = app.add_subcommand("varsplit", "Split of the iterated variation into Euler and current terms");
    auto* paircurrent = app.add_subcommand("paircurrent", "Current of a pair of variation fields");
    auto* verify_cmd = app.add_subcommand("verify", "Numeric check along a section; exit 1 when it fails");
    auto* ym = app.add_subcommand("ym-demo", "Yang-Mills reference comparisons and plane-wave conservation");
    for (auto* sub : {elform, noether, jacobi, varsplit, paircurrent, verify_cmd})
        sub->add_option("model", cfg.model_path, "Model file")->required();
    noether->add_option("field", field_a, "Vector field")->required();
    jacobi->add_option("field", field_a, "Vector field")->required();
    varsplit->add_option("fields", field_list, "Vector fields psi_1 .. psi_l")->required();
    varsplit->add_option("-l,--order", order, "Variation order; must equal the number of fields");
    paircurrent->add_option("field1", field_a, "First field")->required();
    paircurrent->add_option("field2", field_b, "Second field")->required();
    verify_cmd->add_option("what", verify.what, "el, noether, jacobi, paircurrent or fd")->required();
    verify_cmd->add_option("--section", verify.section, "Section to pull back along")->required();
    verify_cmd->add_option("--field", verify.fields, "Vector field (repeatable)");
    verify_cmd->add_option("--step", verify.step, "Finite-difference step for fd");
    ym->add_option("--group", group, "Gauge group")->check(CLI::IsMember({"su2"}));
    ym->add_option("--dim", dim, "Space-time dimension")->check(CLI::Range(2, 4));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (!config_path.empty()) merge_config_file(config_path, cfg, app);
        validate(cfg);
        std::unique_ptr<CancelToken> token;
        if (cfg.timeout_s)
            token = std::make_unique<CancelToken>(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(*cfg.timeout_s)));
        CancelScope scope(token.get());
        Session s(cfg, out);
        if (*elform) {
            s.print_form(euler_lagrange(s.lagrangian()).form);
        } else if (*noether) {
            s.print_current(noether_current(s.lagrangian(), s.field(field_a)).current);
        } else if (*jacobi) {
            s.print_form(jacobi_morphism_parallel(s.lagrangian(), s.field(field_a)).form);
        } else if (*varsplit) {
            return cmd_varsplit(s, field_list, order);
        } else if (*paircurrent) {
            s.print_current(pair_current_parallel(s.lagrangian(), s.field(field_a), s.field(field_b)).current);
        } else if (*verify_cmd) {
            return cmd_verify(s, verify);
        } else if (*ym) {
            return cmd_ym_demo(s, group, dim);
        }
        return kExitOk;
    } catch (const Cancelled&) {
        err << "error: timed out after " << *cfg.timeout_s << " s\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitError;
}

}  // namespace varfield::cli

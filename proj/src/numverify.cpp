// SPDX-License-Identifier: Apache-2.0
#include "varfield/numverify.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define VARFIELD_HAVE_X86 1
#endif

#include "varfield/parallel.hpp"
#include "varfield/varops.hpp"

namespace varfield {

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

GridSpec GridSpec::uniform(int n, double lo, double hi, int count, double tolerance) {
    GridSpec g;
    g.axes.assign(static_cast<std::size_t>(n), AxisSpec{lo, hi, count});
    g.tolerance = tolerance;
    return g;
}

void GridSpec::validate() const {
    if (axes.empty()) throw std::invalid_argument("grid needs at least one axis");
    for (const auto& a : axes) {
        if (a.count < 2) throw std::invalid_argument("grid axes need at least 2 samples");
        if (!(a.lo < a.hi)) throw std::invalid_argument("grid axis needs lo < hi");
    }
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (relative_floor < 0.0) throw std::invalid_argument("relative floor must be nonnegative");
}

std::size_t GridSpec::size() const {
    std::size_t s = 1;
    for (const auto& a : axes) s *= static_cast<std::size_t>(a.count);
    return s;
}

std::vector<int> GridSpec::grid_index(std::size_t k) const {
    std::vector<int> idx(axes.size());
    for (std::size_t i = axes.size(); i-- > 0;) {
        const auto c = static_cast<std::size_t>(axes[i].count);
        idx[i] = static_cast<int>(k % c);
        k /= c;
    }
    return idx;
}

std::vector<double> GridSpec::point(std::size_t k) const {
    const auto idx = grid_index(k);
    std::vector<double> p(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const auto& a = axes[i];
        p[i] = a.lo + (a.hi - a.lo) * static_cast<double>(idx[i]) / static_cast<double>(a.count - 1);
    }
    return p;
}

GridSpec parse_grid(const std::string& text, int n, double tolerance) {
    std::vector<AxisSpec> axes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        AxisSpec a;
        char c1 = 0;
        char c2 = 0;
        std::istringstream is(item);
        if (!(is >> a.lo >> c1 >> a.hi >> c2 >> a.count) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
            throw std::invalid_argument("grid axis '" + item + "' is not lo:hi:count");
        axes.push_back(a);
    }
    if (axes.size() == 1 && n > 1) axes.assign(static_cast<std::size_t>(n), axes[0]);
    if (static_cast<int>(axes.size()) != n)
        throw std::invalid_argument("grid has " + std::to_string(axes.size()) + " axes, base has " + std::to_string(n));
    GridSpec g;
    g.axes = axes;
    g.tolerance = tolerance;
    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// Compiled expressions
// ---------------------------------------------------------------------------

namespace {

struct Program {
    struct Slot {
        bool is_func = false;
        int base = 0;
        FuncKind func = FuncKind::Sin;
        int sub = 0;
    };
    struct Factor {
        int slot;
        unsigned power;
    };
    struct TermCode {
        double coeff;
        std::size_t first;
        std::size_t count;
    };
    std::vector<Slot> slots;
    std::vector<Program> subs;
    std::vector<TermCode> terms;
    std::vector<Factor> factors;
};

Program compile(const Expr& e, int n) {
    Program p;
    std::unordered_map<Atom, int, AtomHash> slot_of;
    for (const auto& t : e.terms()) {
        const std::size_t first = p.factors.size();
        for (const auto& f : t.mono) {
            auto it = slot_of.find(f.atom);
            if (it == slot_of.end()) {
                Program::Slot s;
                if (f.atom.is_base()) {
                    if (f.atom.id >= n) throw EvalError("base coordinate '" + debug_name(f.atom) + "' outside the grid");
                    s.base = f.atom.id;
                } else if (f.atom.is_func()) {
                    s.is_func = true;
                    s.func = f.atom.func;
                    s.sub = static_cast<int>(p.subs.size());
                    p.subs.push_back(compile(f.atom.argument(), n));
                } else {
                    throw EvalError("unbound atom '" + debug_name(f.atom) + "'");
                }
                it = slot_of.emplace(f.atom, static_cast<int>(p.slots.size())).first;
                p.slots.push_back(s);
            }
            p.factors.push_back({it->second, f.power});
        }
        p.terms.push_back({t.coeff.to_double(), first, p.factors.size() - first});
    }
    return p;
}

double apply_func(FuncKind f, double v) {
    switch (f) {
        case FuncKind::Sin:
            return std::sin(v);
        case FuncKind::Cos:
            return std::cos(v);
        case FuncKind::Exp:
            return std::exp(v);
    }
    return v;
}

/// One point; x holds the n base coordinates.
double eval_scalar(const Program& p, const double* x, double* scale) {
    std::vector<double> slot(p.slots.size());
    for (std::size_t k = 0; k < p.slots.size(); ++k) {
        const auto& s = p.slots[k];
        slot[k] = s.is_func ? apply_func(s.func, eval_scalar(p.subs[static_cast<std::size_t>(s.sub)], x, nullptr))
                            : x[s.base];
    }
    double acc = 0.0;
    double sacc = 0.0;
    for (const auto& t : p.terms) {
        double v = t.coeff;
        for (std::size_t f = t.first; f < t.first + t.count; ++f) {
            const auto& fac = p.factors[f];
            for (unsigned r = 0; r < fac.power; ++r) v *= slot[static_cast<std::size_t>(fac.slot)];
        }
        acc += v;
        sacc += std::fabs(v);
    }
    if (scale != nullptr) *scale = sacc;
    return acc;
}

#ifdef VARFIELD_HAVE_X86
/// Four points; xs holds coordinate i of lane l at xs[4 i + l]. Performs the
/// same operations in the same order as eval_scalar, lane by lane.
__attribute__((target("avx2"))) void eval_avx2(const Program& p, const double* xs, double* out, double* scale) {
    std::vector<double> slot(p.slots.size() * 4);
    for (std::size_t k = 0; k < p.slots.size(); ++k) {
        const auto& s = p.slots[k];
        double* dst = slot.data() + 4 * k;
        if (s.is_func) {
            eval_avx2(p.subs[static_cast<std::size_t>(s.sub)], xs, dst, nullptr);
            for (int l = 0; l < 4; ++l) dst[l] = apply_func(s.func, dst[l]);
        } else {
            for (int l = 0; l < 4; ++l) dst[l] = xs[4 * s.base + l];
        }
    }
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    __m256d sacc = _mm256_setzero_pd();
    for (const auto& t : p.terms) {
        __m256d v = _mm256_set1_pd(t.coeff);
        for (std::size_t f = t.first; f < t.first + t.count; ++f) {
            const auto& fac = p.factors[f];
            const __m256d s = _mm256_loadu_pd(slot.data() + 4 * static_cast<std::size_t>(fac.slot));
            for (unsigned r = 0; r < fac.power; ++r) v = _mm256_mul_pd(v, s);
        }
        acc = _mm256_add_pd(acc, v);
        sacc = _mm256_add_pd(sacc, _mm256_andnot_pd(sign_mask, v));
    }
    _mm256_storeu_pd(out, acc);
    if (scale != nullptr) _mm256_storeu_pd(scale, sacc);
}
#endif

bool use_avx2(SimdKernel k) {
    switch (k) {
        case SimdKernel::Scalar:
            return false;
        case SimdKernel::Avx2:
            if (!avx2_supported()) throw std::runtime_error("AVX2 kernel requested on a CPU without AVX2");
            return true;
        case SimdKernel::Auto:
            return avx2_supported();
    }
    return false;
}

constexpr std::size_t kBlock = 256;

/// values[k], scales[k] at every grid point.
void evaluate(const Program& prog, const GridSpec& grid, const EvalOptions& opts, std::vector<double>& values,
              std::vector<double>& scales) {
    const std::size_t total = grid.size();
    const int n = grid.dim();
    values.assign(total, 0.0);
    scales.assign(total, 0.0);
    const bool simd = use_avx2(opts.kernel);
    const std::size_t blocks = (total + kBlock - 1) / kBlock;
    parallel_for(
        blocks,
        [&](std::size_t b) {
            const std::size_t begin = b * kBlock;
            const std::size_t end = std::min(total, begin + kBlock);
            std::size_t k = begin;
#ifdef VARFIELD_HAVE_X86
            if (simd) {
                std::vector<double> xs(static_cast<std::size_t>(4 * n));
                for (; k + 4 <= end; k += 4) {
                    for (int l = 0; l < 4; ++l) {
                        const auto pt = grid.point(k + static_cast<std::size_t>(l));
                        for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(4 * i + l)] = pt[static_cast<std::size_t>(i)];
                    }
                    eval_avx2(prog, xs.data(), values.data() + k, scales.data() + k);
                }
            }
#else
            (void)simd;
#endif
            for (; k < end; ++k) {
                const auto pt = grid.point(k);
                values[k] = eval_scalar(prog, pt.data(), &scales[k]);
            }
        },
        opts.workers);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

const char* kernel_name(SimdKernel k) { return use_avx2(k) ? "avx2" : "scalar"; }

}  // namespace

bool avx2_supported() {
#ifdef VARFIELD_HAVE_X86
    static const bool ok = __builtin_cpu_supports("avx2");
    return ok;
#else
    return false;
#endif
}

std::vector<double> evaluate_on_grid(const Expr& e, const GridSpec& grid, const EvalOptions& opts) {
    grid.validate();
    std::vector<double> values;
    std::vector<double> scales;
    evaluate(compile(e, grid.dim()), grid, opts, values, scales);
    return values;
}

VerifyReport max_abs_on_grid(const std::vector<Expr>& exprs, const GridSpec& grid, const EvalOptions& opts) {
    grid.validate();
    const auto start = Clock::now();
    const std::size_t total = grid.size();
    std::vector<double> residual(total, 0.0);
    std::vector<double> scale(total, 0.0);
    std::vector<double> values;
    std::vector<double> scales;
    for (const auto& e : exprs) {
        evaluate(compile(e, grid.dim()), grid, opts, values, scales);
        for (std::size_t k = 0; k < total; ++k) {
            const double a = std::isnan(values[k]) ? std::numeric_limits<double>::infinity() : std::fabs(values[k]);
            residual[k] = std::max(residual[k], a);
            scale[k] = std::max(scale[k], scales[k]);
        }
    }
    VerifyReport r;
    std::size_t best = 0;
    for (std::size_t k = 0; k < total; ++k) {
        if (residual[k] > residual[best]) best = k;
        r.scale = std::max(r.scale, scale[k]);
    }
    r.max_residual = residual[best];
    r.argmax = grid.point(best);
    r.argmax_index = grid.grid_index(best);
    r.samples = total;
    r.tolerance = grid.tolerance + grid.relative_floor * r.scale;
    r.pass = r.max_residual <= r.tolerance;
    r.kernel = kernel_name(opts.kernel);
    r.seconds = seconds_since(start);
    return r;
}

VerifyReport pullback_eval(const Form& rho, const Section& gamma, const GridSpec& grid, const EvalOptions& opts) {
    const int n = rho.base_dim() == 0 ? grid.dim() : rho.base_dim();
    if (grid.dim() != n) throw std::invalid_argument("grid dimension differs from the base dimension");
    const auto start = Clock::now();
    Form f = rho;
    if (!f.is_zero() && f.is_horizontal() && f.degree() == n - 1) f = horizontal_d(f, n);
    SectionPullback pb(gamma);
    const Form along = coefficients_along(f, pb);
    std::vector<Expr> exprs;
    for (const auto& [w, c] : along.terms()) exprs.push_back(c);
    if (exprs.empty()) exprs.emplace_back();
    VerifyReport r = max_abs_on_grid(exprs, grid, opts);
    r.seconds = seconds_since(start);
    return r;
}

VerifyReport finite_difference_check(const Form& lambda, const Section& gamma, const VecField& psi, double h,
                                     const GridSpec& grid, const EvalOptions& opts) {
    grid.validate();
    const int n = lambda.base_dim();
    if (grid.dim() != n) throw std::invalid_argument("grid dimension differs from the base dimension");
    if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
    if (!lambda.is_zero() && (!lambda.is_horizontal() || lambda.degree() != n))
        throw std::invalid_argument("finite-difference check needs a horizontal n-form");
    if (!psi.is_vertical()) throw std::invalid_argument("finite-difference check needs a vertical field");
    for (const auto& c : psi.psi)
        if (depends_on_jets(c)) throw std::invalid_argument("finite-difference check needs psi depending on x only");
    const auto start = Clock::now();
    const std::size_t total = grid.size();

    Wedge top;
    for (int i = 0; i < n; ++i) top.push_back(BasisOne::dx(i));
    const Expr L = lambda.coefficient(top);

    // Symbolic first-variation integrand along gamma.
    const Form variation = horizontal_part(contract_source(psi, euler_lagrange(lambda)) +
                                           horizontal_d(noether_current(lambda, psi).current, n));
    SectionPullback pb(gamma);
    const Expr integrand = pullback(variation, pb).coefficient(top);
    const std::vector<double> iv = evaluate_on_grid(integrand, grid, opts);

    // Trapezoid weights.
    std::vector<double> weight(total, 1.0);
    for (std::size_t k = 0; k < total; ++k) {
        const auto idx = grid.grid_index(k);
        for (int i = 0; i < n; ++i) {
            const auto& a = grid.axes[static_cast<std::size_t>(i)];
            const double dx = (a.hi - a.lo) / static_cast<double>(a.count - 1);
            const bool end = idx[static_cast<std::size_t>(i)] == 0 || idx[static_cast<std::size_t>(i)] == a.count - 1;
            weight[k] *= end ? 0.5 * dx : dx;
        }
    }

    // Jet values of gamma and psi at every point.
    std::vector<Atom> jets;
    for (const auto& a : collect_atoms(L))
        if (a.is_jet()) jets.push_back(a);
    const int m = static_cast<int>(gamma.components.size());
    std::vector<std::vector<double>> gamma_vals;
    std::vector<std::vector<double>> psi_vals;
    for (const auto& a : jets) {
        if (a.id >= m || a.id >= psi.m()) throw std::invalid_argument("section or field has too few components");
        gamma_vals.push_back(evaluate_on_grid(iterated_derivative(gamma.components[a.id], a.index), grid, opts));
        psi_vals.push_back(evaluate_on_grid(iterated_derivative(psi.psi[a.id], a.index), grid, opts));
    }
    auto action = [&](double eps) {
        double s = 0.0;
        NumericBinding bind;
        for (std::size_t k = 0; k < total; ++k) {
            const auto pt = grid.point(k);
            for (int i = 0; i < n; ++i) bind[Atom::base(i)] = pt[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < jets.size(); ++j) bind[jets[j]] = gamma_vals[j][k] + eps * psi_vals[j][k];
            s += weight[k] * eval_numeric(L, bind);
        }
        return s;
    };

    VerifyReport r;
    double reference = 0.0;
    for (std::size_t k = 0; k < total; ++k) reference += weight[k] * iv[k];
    r.reference = reference;
    r.estimate = (action(h) - action(-h)) / (2.0 * h);
    r.max_residual = std::fabs(r.estimate - r.reference);
    r.scale = std::fabs(reference);
    r.samples = total;
    r.tolerance = grid.tolerance + grid.relative_floor * r.scale;
    r.pass = r.max_residual <= r.tolerance;
    r.kernel = kernel_name(opts.kernel);
    r.seconds = seconds_since(start);
    return r;
}

std::string report_json(const VerifyReport& r, bool include_timing) {
    nlohmann::json j{{"schema", "varfield-json/1"},
                     {"kind", "verify_report"},
                     {"max_residual", r.max_residual},
                     {"argmax", r.argmax},
                     {"argmax_index", r.argmax_index},
                     {"pass", r.pass},
                     {"samples", r.samples},
                     {"tolerance", r.tolerance},
                     {"scale", r.scale},
                     {"kernel", r.kernel}};
    if (include_timing) j["seconds"] = r.seconds;
    if (r.reference != 0.0 || r.estimate != 0.0) {
        j["reference"] = r.reference;
        j["estimate"] = r.estimate;
    }
    return j.dump();
}

}  // namespace varfield

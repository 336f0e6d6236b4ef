// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "varfield/forms.hpp"
#include "varfield/jet.hpp"

namespace varfield {

struct AxisSpec {
    double lo = 0.0;
    double hi = 1.0;
    int count = 2;
};

/// Tensor-product sample grid over the base, one axis per coordinate.
/// Points are enumerated lexicographically, the last axis fastest.
struct GridSpec {
    std::vector<AxisSpec> axes;
    double tolerance = 1e-9;      ///< absolute
    double relative_floor = 0.0;  ///< adds relative_floor * scale to the tolerance

    static GridSpec uniform(int n, double lo, double hi, int count, double tolerance = 1e-9);
    /// Throws std::invalid_argument unless every count >= 2, lo < hi and tolerance > 0.
    void validate() const;
    [[nodiscard]] int dim() const { return static_cast<int>(axes.size()); }
    [[nodiscard]] std::size_t size() const;
    /// Coordinates of the point with flat index k.
    [[nodiscard]] std::vector<double> point(std::size_t k) const;
    [[nodiscard]] std::vector<int> grid_index(std::size_t k) const;
};

/// "lo:hi:count" for every axis, or one such triple per axis separated by
/// commas.
GridSpec parse_grid(const std::string& text, int n, double tolerance = 1e-9);

struct VerifyReport {
    double max_residual = 0.0;
    std::vector<double> argmax;       ///< point of the maximum
    std::vector<int> argmax_index;    ///< its grid index
    bool pass = false;
    std::size_t samples = 0;
    double seconds = 0.0;
    double tolerance = 0.0;           ///< effective tolerance used for pass
    double scale = 0.0;               ///< max over points of the summed |term| magnitudes
    double reference = 0.0;           ///< finite-difference check: symbolic integral
    double estimate = 0.0;            ///< finite-difference check: difference quotient
    std::string kernel;               ///< "scalar" or "avx2"
};

enum class SimdKernel { Auto, Scalar, Avx2 };

/// Whether this CPU can run the AVX2 kernel.
bool avx2_supported();

struct EvalOptions {
    SimdKernel kernel = SimdKernel::Auto;
    int workers = 0;  ///< 0: VARFIELD_THREADS or hardware default
};

/// Values of an expression in the base coordinates at every grid point.
/// Function atoms are allowed; any jet or param atom raises EvalError.
std::vector<double> evaluate_on_grid(const Expr& e, const GridSpec& grid, const EvalOptions& opts = {});

/// Max over points and expressions of |value|, with a deterministic argmax
/// (ties go to the lexicographically first grid index).
VerifyReport max_abs_on_grid(const std::vector<Expr>& exprs, const GridSpec& grid, const EvalOptions& opts = {});

/// Pulls rho back along j gamma and reports the largest coefficient on the
/// grid. A horizontal (n-1)-form is differentiated with d_H first.
VerifyReport pullback_eval(const Form& rho, const Section& gamma, const GridSpec& grid, const EvalOptions& opts = {});

/// Central difference (step h) of the trapezoid action of lambda along
/// gamma + eps psi against the trapezoid integral of the pulled-back first
/// variation integrand psi . E(lambda) + d_H eps_psi(lambda).
/// psi must be vertical with components depending on x only.
VerifyReport finite_difference_check(const Form& lambda, const Section& gamma, const VecField& psi, double h,
                                     const GridSpec& grid, const EvalOptions& opts = {});

/// The report in the varfield-json/1 schema; wall time only on request so
/// that repeated runs print identical documents.
std::string report_json(const VerifyReport& report, bool include_timing = false);

}  // namespace varfield

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "varfield/cancel.hpp"
#include "varfield/modeldsl.hpp"
#include "varfield/varops.hpp"

namespace varfield {

enum class GaugeGroup { SU2 };

/// "su2"; std::invalid_argument otherwise.
GaugeGroup parse_gauge_group(const std::string& name);

/// Yang-Mills theory of a gauge group on flat space-time with signature
/// (+,-,...,-), c^A_BC = eps_ABC and delta_AB = identity.
///
/// The model text defines the reference expressions as data:
///   EulerRef[nu,B]           Euler-Lagrange expressions in components
///   JacAnti[nu,B], JacSym    antisymmetric and symmetric halves of the Jacobi operator
///   PairRef[xi]              current of the pair (psi, psit)
/// with psi, psit symbolic variation fields (params) and F the field strength.
struct YMModel {
    GaugeGroup group = GaugeGroup::SU2;
    int dim = 4;
    int generators = 3;
    ModelSpec spec;

    [[nodiscard]] JetContext context() const { return spec.context(); }
    [[nodiscard]] Form lagrangian() const { return spec.lagrangian_form(); }
    /// Fiber coordinate of w[A, mu] (0-based, A-major).
    [[nodiscard]] int coordinate(int A, int mu) const { return A * dim + mu; }
    [[nodiscard]] int m() const { return generators * dim; }
    /// Vertical field with components psi[A,mu](x) ("psi") or psit[A,mu](x) ("psit").
    [[nodiscard]] const VecField& generic_field(const std::string& param) const;
    /// The flat connection w = 0.
    [[nodiscard]] Section flat_section() const;
};

/// DSL text of the model; shipped as models/yangmills_su2_d<dim>.vf.
std::string ym_model_text(GaugeGroup group, int dim);

/// Parses the model for dim in {2, 3, 4}.
YMModel build_ym(GaugeGroup group, int dim);

/// Euler-Lagrange source form built from EulerRef.
SourceForm ym_reference_euler(const YMModel& model);

struct JacobiSplit {
    SourceForm antisymmetric;  ///< from JacAnti
    SourceForm symmetric;      ///< from JacSym
    [[nodiscard]] SourceForm total() const { return {1, antisymmetric.form + symmetric.form}; }
};

/// Both halves of the reference Jacobi operator applied to psi.
JacobiSplit ym_reference_jacobi(const YMModel& model);

/// Current ds_xi components of PairRef; with same_fields the second field is
/// replaced by the first.
NoetherCurrent ym_reference_pair_current(const YMModel& model, bool same_fields = false);

/// Replaces every derivative of psit[...] by the same derivative of psi[...].
Expr identify_variation_fields(const Expr& e);

struct PlaneWave {
    std::vector<Rational> k;    ///< covector, null
    std::vector<Rational> eps;  ///< polarization covector, eta(k, eps) = 0
    std::array<Rational, 3> a{};  ///< Lie algebra direction
};

/// psi^A_mu = eps_mu a^A cos(k . x).
VecField plane_wave_field(const YMModel& model, const PlaneWave& wave);

/// Two counter-propagating null transverse waves with overlapping algebra directions:
/// dim 4: k=(1,1,0,0), eps=(0,0,1,0), a=(1,0,0); k'=(1,-1,0,0), eps'=eps, a'=(1,1,0).
/// dim 3 drops the last coordinate. dim 2 has no transverse waves and uses the
/// longitudinal eps = k, eps' = k', a'=(0,1,0).
std::array<PlaneWave, 2> default_plane_waves(int dim);

/// eta^{mu nu} q_mu p_nu for the signature of the model.
Rational minkowski_product(const std::vector<Rational>& q, const std::vector<Rational>& p);

struct ComparisonReport {
    std::string name;
    bool match = false;
    int components = 0;
    int mismatched = 0;
    std::size_t residual_terms = 0;  ///< terms of the first nonzero component residual
    std::string first_residual;      ///< rendered, empty when matching
    double seconds = 0.0;
};

struct HarnessOptions {
    int workers = 0;  ///< 0: VARFIELD_THREADS or hardware default
    const CancelToken* cancel = nullptr;
};

/// Engine euler_lagrange against EulerRef.
ComparisonReport compare_euler(const YMModel& model, const HarnessOptions& opts = {});
/// Engine jacobi_morphism with the generic field psi against JacAnti + JacSym.
ComparisonReport compare_jacobi(const YMModel& model, const HarnessOptions& opts = {});
/// Engine pair_current(psi, psit) against PairRef.
ComparisonReport compare_pair_current(const YMModel& model, const HarnessOptions& opts = {});
/// Engine pair_current(psi, psi) and the reduced reference both vanish.
ComparisonReport compare_degenerate_pair(const YMModel& model, const HarnessOptions& opts = {});

/// JSON array of reports in the varfield-json/1 schema; wall time only on request.
std::string reports_json(const std::vector<ComparisonReport>& reports, bool include_timing = false);

}  // namespace varfield

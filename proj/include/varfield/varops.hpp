// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "varfield/forms.hpp"
#include "varfield/jet.hpp"

namespace varfield {

/// omega-generated k-contact (n+k)-form.
struct SourceForm {
    int contact_degree = 1;
    Form form;

    /// E_sigma for k = 1, where the form is sum_sigma E_sigma omega^sigma ^ ds.
    [[nodiscard]] Expr coefficient(int sigma) const;
    [[nodiscard]] bool is_zero() const { return form.is_zero(); }
};

/// Form equal to sum_sigma E_sigma omega^sigma ^ ds.
SourceForm make_source_form(int n, const std::vector<Expr>& coefficients);

/// Projects the n+k form rho onto its source-form part
/// (1/k) omega^sigma ^ sum_I (-1)^|I| d_I (d/dy^sigma_I contracted into p_k rho).
SourceForm interior_euler(const Form& rho, int k);

/// Integration-by-parts decomposition p_k rho = I(rho) + p_k d p_k R(rho).
struct ResidualDecomposition {
    SourceForm i_part;
    Form r_part;
    /// p_k rho = sum omega^sigma_I ^ psi[(sigma, I)]
    std::map<std::pair<int, MultiIndex>, Form> psi;
    /// sum_sigma omega^sigma ^ zeta[(sigma, I)] recovers p_k rho after d_I
    std::map<std::pair<int, MultiIndex>, Form> zeta;
    /// omega^sigma ^ zeta^I_sigma = phi[I] ^ ds
    std::map<MultiIndex, Form> phi;
};

ResidualDecomposition residual(const Form& rho, int k);

/// Splits an (n+k)-form whose terms all contain ds as phi ^ ds.
Form strip_volume(const Form& rho);

/// E(lambda) = I(d lambda) for a horizontal n-form lambda.
SourceForm euler_lagrange(const Form& lambda);

/// Generalized momentum p_{d_V lambda} = -p_1 R(d lambda).
Form momentum(const Form& lambda);

struct NoetherCurrent {
    Form current;          ///< epsilon_psi(lambda), an (n-1)-form
    Form vertical_part;    ///< psi_V contracted into the momentum
    Form horizontal_part;  ///< psi_H contracted into lambda
    /// Coefficient of ds_i.
    [[nodiscard]] Expr component(int i) const;
};

/// epsilon_psi(lambda) = psi_V contracted into p_{d_V lambda} plus psi_H contracted into lambda.
NoetherCurrent noether_current(const Form& lambda, const VecField& psi);

/// psi_V contracted into a source form: the horizontal n-form Q^sigma E_sigma ds.
Form contract_source(const VecField& psi, const SourceForm& e);

struct VariationDecomposition {
    /// psi_l,V contracted into E(... psi_1,V contracted into E(lambda))
    Form euler_term;
    /// current_terms[s] = d_H eps_{psi_l}( ... d_H eps_{psi_{s+1}}(A_s)), A_s the s-fold nested term.
    std::vector<Form> current_terms;
    /// The d_H eps tower before the final d_H, one entry per s.
    std::vector<Form> currents;
    [[nodiscard]] Form total() const;
};

/// Right-hand side of the l-th variation formula.
VariationDecomposition variation_decompose(const Form& lambda, const std::vector<VecField>& fields);

/// Iterated Lie derivative h L_{psi_l} ... h L_{psi_1} lambda.
Form iterated_lie_derivative(const Form& lambda, const std::vector<VecField>& fields);

/// J_psi(lambda) = E(psi contracted into E(lambda)).
SourceForm jacobi_morphism(const Form& lambda, const VecField& psi);

/// J_psi(lambda) evaluated one deformed-Lagrangian component psi^sigma E_sigma ds
/// at a time across `workers` threads (0: default cap); equal to jacobi_morphism.
SourceForm jacobi_morphism_parallel(const Form& lambda, const VecField& psi, int workers = 0);

/// The adjoint coordinate expression sum_J d_J psi^sigma dE_rho/dy^sigma_J omega^rho ^ ds.
SourceForm jacobi_linearized(const Form& lambda, const VecField& psi);

class NotExtremal : public std::invalid_argument {
public:
    NotExtremal(const std::string& what, Form residual) : std::invalid_argument(what), residual_(std::move(residual)) {}
    [[nodiscard]] const Form& residual() const { return residual_; }

private:
    Form residual_;
};

struct JacobiCheck {
    bool is_jacobi = false;
    Form residual;  ///< J_psi(lambda), pulled back when a section was given
};

/// Throws NotExtremal when E(lambda) does not vanish along gamma.
void require_extremal(const Form& lambda, const Section& gamma);

JacobiCheck is_jacobi_field(const Form& lambda, const VecField& psi, const Section* gamma = nullptr);

/// Noether current of the deformed Lagrangian psi1 contracted into E(lambda), for psi2.
NoetherCurrent pair_current(const Form& lambda, const VecField& psi1, const VecField& psi2);

/// pair_current split over the components of psi1 . E and run on `workers` threads.
NoetherCurrent pair_current_parallel(const Form& lambda, const VecField& psi1, const VecField& psi2, int workers = 0);

/// LHS - RHS of
/// psi1 . E(psi2 . E) - psi2 . E(psi1 . E) = [psi1, psi2] . E + d_H eps_{psi2}(psi1 . E).
Form check_commutator_identity(const Form& lambda, const VecField& psi1, const VecField& psi2);

/// d_H eps_{psi_l} ... d_H eps_{psi_{s+1}} (h L_{psi_s} ... h L_{psi_1} lambda), 1 <= s < l.
Form strong_conservation_check(const Form& lambda, const std::vector<VecField>& fields, int s);

}  // namespace varfield

#pragma once

#include "cerase/matrix.hpp"

namespace cerase {

/// Column-paired concept embeddings: erase targets, their guide (anchor)
/// replacements, and the set to preserve. All share the embedding dimension
/// m; the preserve set may be empty.
class ConceptMatrices {
public:
    /// erase and guide must have identical shape (one guide per target);
    /// preserve must share the row dimension or be empty (0x0 is accepted
    /// and normalized to m x 0).
    ConceptMatrices(DenseMatrix erase, DenseMatrix guide, DenseMatrix preserve);

    const DenseMatrix& erase() const noexcept { return erase_; }
    const DenseMatrix& guide() const noexcept { return guide_; }
    const DenseMatrix& preserve() const noexcept { return preserve_; }

    std::size_t embed_dim() const noexcept { return erase_.rows(); }
    std::size_t n_erase() const noexcept { return erase_.cols(); }
    std::size_t n_preserve() const noexcept { return preserve_.cols(); }

private:
    DenseMatrix erase_;
    DenseMatrix guide_;
    DenseMatrix preserve_;
};

/// One layer's erasure problem: original projection weights W0 (n x m),
/// the concept matrices, and the trade-off scalars. The guide and preserve
/// targets (W0 * guide, W0 * preserve) are computed once on construction
/// and held fixed: the problem is always anchored to the original weights,
/// not to the evolving iterate.
class ErasureObjective {
public:
    ErasureObjective(DenseMatrix original, ConceptMatrices concepts,
                     double lambda1 = 1.0, double lambda2 = 1.0,
                     double erase_scale = 1.0);

    const DenseMatrix& original() const noexcept { return original_; }
    const ConceptMatrices& concepts() const noexcept { return concepts_; }
    double lambda1() const noexcept { return lambda1_; }
    double lambda2() const noexcept { return lambda2_; }
    double erase_scale() const noexcept { return erase_scale_; }

    /// W0 * guide, the fixed outputs the erased concepts are mapped onto.
    const DenseMatrix& guide_targets() const noexcept { return guide_targets_; }
    /// W0 * preserve, the fixed outputs the preserved concepts must keep.
    const DenseMatrix& preserve_targets() const noexcept { return preserve_targets_; }

    /// Transposed copies of the concept matrices, cached for the solver's
    /// gradient accumulation.
    const DenseMatrix& erase_transposed() const noexcept { return erase_t_; }
    const DenseMatrix& preserve_transposed() const noexcept { return preserve_t_; }

    std::size_t out_dim() const noexcept { return original_.rows(); }
    std::size_t embed_dim() const noexcept { return original_.cols(); }

private:
    DenseMatrix original_;
    ConceptMatrices concepts_;
    double lambda1_;
    double lambda2_;
    double erase_scale_;
    DenseMatrix guide_targets_;
    DenseMatrix preserve_targets_;
    DenseMatrix erase_t_;
    DenseMatrix preserve_t_;
};

/// Smooth part of the editing loss at W:
///   erase_scale * |W*Ce - W0*Cg|_F^2 + lambda1 * |W*Cp - W0*Cp|_F^2
///   + lambda2 * |W - W0|_F^2.
double smooth_loss(const ErasureObjective& obj, const DenseMatrix& w);

/// smooth_loss + lambda * entrywise_l1_norm(W).
double total_objective(const ErasureObjective& obj, const DenseMatrix& w, double lambda);

/// Analytic gradient of the smooth loss:
///   2*erase_scale*(W*Ce - W0*Cg)*Ce^T + 2*lambda1*(W*Cp - W0*Cp)*Cp^T
///   + 2*lambda2*(W - W0).
DenseMatrix gradient(const ErasureObjective& obj, const DenseMatrix& w);

/// One-shot dense minimizer of the smooth loss:
///   W0 * (erase_scale*Cg*Ce^T + lambda1*Cp*Cp^T + lambda2*I)
///      * (erase_scale*Ce*Ce^T + lambda1*Cp*Cp^T + lambda2*I)^{-1}.
/// The right-hand Gram matrix is symmetric positive definite for
/// lambda2 > 0 and is solved by Cholesky factorization; a condition
/// estimate above 1e14 raises numerical_error.
DenseMatrix closed_form_uce(const ErasureObjective& obj);

/// Lipschitz constant of the smooth-loss gradient:
///   2*(erase_scale*sigma_max(Ce*Ce^T) + lambda1*sigma_max(Cp*Cp^T) + lambda2).
/// Empty concept sets contribute zero.
double lipschitz_constant(const ErasureObjective& obj);

/// max_ij |grad(0)_ij|. Any L1 weight at or above this value makes the
/// all-zero matrix the global minimizer of the penalized objective.
double zero_solution_threshold(const ErasureObjective& obj);

namespace detail {

/// Reusable buffers for the solver hot loop.
struct ObjectiveWorkspace {
    DenseMatrix erase_prod;    // W * Ce
    DenseMatrix preserve_prod; // W * Cp
};

/// grad <- gradient of the smooth loss at w, allocation-free after warmup.
void gradient_into(const ErasureObjective& obj, const DenseMatrix& w,
                   DenseMatrix& grad, ObjectiveWorkspace& ws);

/// Smooth loss at w using the workspace buffers.
double smooth_loss_ws(const ErasureObjective& obj, const DenseMatrix& w,
                      ObjectiveWorkspace& ws);

} // namespace detail

} // namespace cerase

#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "cerase/objective.hpp"

namespace cerase {

enum class Algorithm {
    Fista, // proximal gradient with momentum
    Ista,  // plain proximal gradient, kept as the rate-comparison baseline
};

struct SolverConfig {
    Algorithm algorithm = Algorithm::Fista;
    std::size_t iterations = 1000;
    double lambda = 0.0; // L1 weight
    /// When set, stop early once the relative objective change over a
    /// 10-iteration window falls below this value. Off by default: the
    /// iteration budget is a user decision, not an automatic one.
    std::optional<double> rel_objective_tol;
    /// Record objective/sparsity history every trace_stride iterations.
    std::size_t trace_stride = 1;
};

/// Iteration state. `current` is W^(k), `previous` is W^(k-1), `theta` is
/// the auxiliary iterate the next gradient is evaluated at, and `t` the
/// momentum scalar consumed by the next step (t = 1 before the first step,
/// which makes the first extrapolation coefficient zero).
struct SolverState {
    DenseMatrix current;
    DenseMatrix previous;
    DenseMatrix theta;
    double t = 1.0;
    std::size_t k = 0;
};

/// W^(0) = theta = W0, t = 1.
SolverState make_initial_state(const ErasureObjective& obj);

struct SolveTrace {
    std::vector<std::pair<std::size_t, double>> objective_history; // (k, J(W^(k)))
    std::vector<std::pair<std::size_t, double>> sparsity_history;  // (k, zero fraction)
    double lipschitz_used = 0.0;
    double step_size = 0.0; // 1 / lipschitz_used
    double wall_seconds = 0.0;
};

/// Soft-thresholding: elementwise (|x| - alpha)_+ * sgn(x). Entries with
/// |x| <= alpha become exactly zero. alpha = 0 is the identity.
DenseMatrix shrinkage(const DenseMatrix& x, double alpha);

/// t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2.
double momentum_next(double t);

/// One momentum-accelerated proximal step:
///   W^(k)   = shrinkage(theta - gamma * grad(theta), lambda * gamma)
///   t_{k+1} = momentum_next(t_k)
///   theta'  = W^(k) + ((t_k - 1) / t_{k+1}) * (W^(k) - W^(k-1)).
SolverState fista_step(const ErasureObjective& obj, const SolverState& state,
                       double gamma, double lambda);

/// Same proximal update without momentum: theta' = W^(k).
SolverState ista_step(const ErasureObjective& obj, const SolverState& state,
                      double gamma, double lambda);

/// Runs cfg.iterations steps of the selected algorithm with step size
/// 1 / lipschitz_constant(obj) starting from W0. Returns W^(K) (the
/// shrinkage output, so zeros are bit-exact) and the recorded trace.
std::pair<DenseMatrix, SolveTrace> solve(const ErasureObjective& obj, const SolverConfig& cfg);

/// Distance from first-order optimality of the L1-penalized objective:
/// max over entries of |grad_ij + lambda*sgn(w_ij)| where w_ij != 0 and
/// max(0, |grad_ij| - lambda) where w_ij = 0. Zero at the global optimum.
double optimality_residual(const ErasureObjective& obj, const DenseMatrix& w, double lambda);

} // namespace cerase

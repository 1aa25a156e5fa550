#include "cerase/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>

namespace cerase {

namespace {

inline double soft_threshold(double x, double alpha) {
    const double ax = std::fabs(x);
    if (ax <= alpha) return 0.0;
    const double shrunk = ax - alpha;
    return x > 0.0 ? shrunk : -shrunk;
}

struct StepBuffers {
    DenseMatrix grad;
    detail::ObjectiveWorkspace ws;
};

// One proximal iteration, shared by fista_step/ista_step and the solve loop
// so the public step operations and the driver produce identical arithmetic.
// `next` is scratch; on return `w` holds W^(k) and `w_prev` holds W^(k-1).
void step_in_place(const ErasureObjective& obj, bool momentum, double gamma, double lambda,
                   DenseMatrix& w, DenseMatrix& w_prev, DenseMatrix& theta, double& t,
                   DenseMatrix& next, StepBuffers& buf) {
    detail::gradient_into(obj, theta, buf.grad, buf.ws);
    if (!next.same_shape(w)) next = DenseMatrix(w.rows(), w.cols());

    const double alpha = lambda * gamma;
    const auto& grad_d = buf.grad.data();
    auto& theta_d = theta.data();
    auto& next_d = next.data();
    if (momentum) {
        const double t_next = momentum_next(t);
        const double coef = (t - 1.0) / t_next;
        const auto& w_d = w.data(); // still W^(k-1)
        for (std::size_t i = 0; i < next_d.size(); ++i) {
            const double wn = soft_threshold(theta_d[i] - gamma * grad_d[i], alpha);
            next_d[i] = wn;
            theta_d[i] = wn + coef * (wn - w_d[i]);
        }
        t = t_next;
    } else {
        for (std::size_t i = 0; i < next_d.size(); ++i) {
            const double wn = soft_threshold(theta_d[i] - gamma * grad_d[i], alpha);
            next_d[i] = wn;
            theta_d[i] = wn;
        }
    }
    swap(w_prev, w);
    swap(w, next);
}

void check_step_args(const ErasureObjective& obj, const SolverState& state,
                     double gamma, double lambda) {
    if (!state.current.same_shape(obj.original()) ||
        !state.previous.same_shape(obj.original()) ||
        !state.theta.same_shape(obj.original())) {
        throw invalid_input_error("solver step: state matrices must match the weight shape");
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw invalid_input_error("solver step: gamma must be positive");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw invalid_input_error("solver step: lambda must be non-negative");
    }
    if (!(state.t >= 1.0)) {
        throw invalid_input_error("solver step: momentum scalar must be >= 1");
    }
}

SolverState run_step(const ErasureObjective& obj, const SolverState& state,
                     double gamma, double lambda, bool momentum) {
    check_step_args(obj, state, gamma, lambda);
    SolverState out = state;
    StepBuffers buf;
    DenseMatrix next;
    step_in_place(obj, momentum, gamma, lambda, out.current, out.previous, out.theta, out.t, next, buf);
    out.k = state.k + 1;
    return out;
}

} // namespace

SolverState make_initial_state(const ErasureObjective& obj) {
    SolverState s;
    s.current = obj.original();
    s.previous = obj.original();
    s.theta = obj.original();
    s.t = 1.0;
    s.k = 0;
    return s;
}

DenseMatrix shrinkage(const DenseMatrix& x, double alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw invalid_input_error("shrinkage: alpha must be non-negative");
    }
    DenseMatrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.data()[i] = soft_threshold(x.data()[i], alpha);
    }
    return out;
}

double momentum_next(double t) {
    return (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
}

SolverState fista_step(const ErasureObjective& obj, const SolverState& state,
                       double gamma, double lambda) {
    return run_step(obj, state, gamma, lambda, true);
}

SolverState ista_step(const ErasureObjective& obj, const SolverState& state,
                      double gamma, double lambda) {
    return run_step(obj, state, gamma, lambda, false);
}

std::pair<DenseMatrix, SolveTrace> solve(const ErasureObjective& obj, const SolverConfig& cfg) {
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
        throw invalid_input_error("solve: lambda must be non-negative");
    }
    if (cfg.trace_stride == 0) {
        throw invalid_input_error("solve: trace_stride must be >= 1");
    }
    if (cfg.rel_objective_tol && !(*cfg.rel_objective_tol > 0.0)) {
        throw invalid_input_error("solve: rel_objective_tol must be positive");
    }

    SolveTrace trace;
    const double lipschitz = lipschitz_constant(obj);
    if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) {
        throw numerical_error("solve: Lipschitz constant is not positive; objective has no curvature");
    }
    const double gamma = 1.0 / lipschitz;
    trace.lipschitz_used = lipschitz;
    trace.step_size = gamma;

    DenseMatrix w = obj.original();
    if (cfg.iterations == 0) return {std::move(w), std::move(trace)};

    DenseMatrix w_prev = w;
    DenseMatrix theta = w;
    DenseMatrix next;
    StepBuffers buf;
    double t = 1.0;

    const bool momentum = cfg.algorithm == Algorithm::Fista;
    const bool early_stop = cfg.rel_objective_tol.has_value();
    std::deque<double> window; // objective values for the early-stop window

    const auto start = std::chrono::steady_clock::now();
    for (std::size_t k = 1; k <= cfg.iterations; ++k) {
        step_in_place(obj, momentum, gamma, cfg.lambda, w, w_prev, theta, t, next, buf);

        const bool record = (k % cfg.trace_stride == 0) || k == cfg.iterations;
        double objective = 0.0;
        if (record || early_stop) {
            objective = detail::smooth_loss_ws(obj, w, buf.ws) + cfg.lambda * entrywise_l1_norm(w);
        }
        if (record) {
            trace.objective_history.emplace_back(k, objective);
            trace.sparsity_history.emplace_back(k, sparsity_fraction(w));
        }
        if (early_stop) {
            window.push_back(objective);
            if (window.size() > 11) window.pop_front();
            if (window.size() == 11 &&
                std::fabs(window.back() - window.front()) <
                    *cfg.rel_objective_tol * std::max(std::fabs(window.back()), 1e-300)) {
                if (!record) {
                    trace.objective_history.emplace_back(k, objective);
                    trace.sparsity_history.emplace_back(k, sparsity_fraction(w));
                }
                break;
            }
        }
    }
    trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    w.ensure_finite("solve");
    return {std::move(w), std::move(trace)};
}

double optimality_residual(const ErasureObjective& obj, const DenseMatrix& w, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw invalid_input_error("optimality_residual: lambda must be non-negative");
    }
    DenseMatrix grad = gradient(obj, w);
    double residual = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double wi = w.data()[i];
        const double gi = grad.data()[i];
        double r;
        if (wi != 0.0) {
            r = std::fabs(gi + (wi > 0.0 ? lambda : -lambda));
        } else {
            r = std::max(0.0, std::fabs(gi) - lambda);
        }
        residual = std::max(residual, r);
    }
    return residual;
}

} // namespace cerase

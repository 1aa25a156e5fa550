#include "cerase/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace cerase {

namespace {

constexpr double kConditionLimit = 1e14;

void check_scalar(double v, const char* name, bool allow_zero) {
    if (!std::isfinite(v) || v < 0.0 || (!allow_zero && v == 0.0)) {
        throw invalid_input_error(std::string("ErasureObjective: ") + name + " out of range");
    }
}

void check_same_shape_as_original(const ErasureObjective& obj, const DenseMatrix& w, const char* op) {
    if (!w.same_shape(obj.original())) {
        throw invalid_input_error(std::string(op) + ": W must match the original weight shape " +
                                  std::to_string(obj.original().rows()) + "x" +
                                  std::to_string(obj.original().cols()));
    }
}

// Lower-triangular Cholesky factor of a symmetric positive definite matrix,
// stored densely. Returns false on a non-positive pivot.
bool cholesky_factor(DenseMatrix& a) {
    const std::size_t n = a.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / ljj;
        }
    }
    return true;
}

// Solves L L^T x = b in place given the factor from cholesky_factor.
void cholesky_solve(const DenseMatrix& l, std::vector<double>& b) {
    const std::size_t n = l.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
        b[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * b[k];
        b[ii] = s / l(ii, ii);
    }
}

// Largest eigenvalue of the inverse via inverse power iteration with the
// Cholesky factor. Used only as a condition estimate, so the tolerance is
// loose and the cap small.
double inverse_spectral_estimate(const DenseMatrix& l) {
    const std::size_t n = l.rows();
    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> w(n);
    double rho_prev = -1.0;
    double rho = 0.0;
    for (int it = 0; it < 200; ++it) {
        w = v;
        cholesky_solve(l, w);
        rho = 0.0;
        double wnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            rho += v[i] * w[i];
            wnorm += w[i] * w[i];
        }
        wnorm = std::sqrt(wnorm);
        if (!std::isfinite(wnorm) || wnorm == 0.0) {
            throw numerical_error("closed_form_uce: ill-conditioned system");
        }
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wnorm;
        if (rho_prev >= 0.0 && std::fabs(rho - rho_prev) <= 1e-8 * std::fabs(rho)) break;
        rho_prev = rho;
    }
    return rho;
}

// out += alpha * C * C^T (m x m dense).
void add_scaled_gram(DenseMatrix& out, double alpha, const DenseMatrix& c) {
    const std::size_t m = c.rows();
    const std::size_t k = c.cols();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t l = 0; l < k; ++l) dot += c(i, l) * c(j, l);
            out(i, j) += alpha * dot;
        }
    }
}

// out += alpha * A * B^T for m x k inputs (shapes already checked by caller).
void add_scaled_abt(DenseMatrix& out, double alpha, const DenseMatrix& a, const DenseMatrix& b) {
    const std::size_t m = a.rows();
    const std::size_t k = a.cols();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t l = 0; l < k; ++l) dot += a(i, l) * b(j, l);
            out(i, j) += alpha * dot;
        }
    }
}

} // namespace

ConceptMatrices::ConceptMatrices(DenseMatrix erase, DenseMatrix guide, DenseMatrix preserve)
    : erase_(std::move(erase)), guide_(std::move(guide)), preserve_(std::move(preserve)) {
    if (erase_.rows() != guide_.rows() || erase_.cols() != guide_.cols()) {
        throw invalid_input_error("ConceptMatrices: erase and guide must have identical shape");
    }
    if (preserve_.cols() == 0) {
        preserve_ = DenseMatrix(erase_.rows(), 0);
    } else if (preserve_.rows() != erase_.rows()) {
        throw invalid_input_error("ConceptMatrices: preserve must share the embedding dimension");
    }
}

ErasureObjective::ErasureObjective(DenseMatrix original, ConceptMatrices concepts,
                                   double lambda1, double lambda2, double erase_scale)
    : original_(std::move(original)),
      concepts_(std::move(concepts)),
      lambda1_(lambda1),
      lambda2_(lambda2),
      erase_scale_(erase_scale) {
    check_scalar(lambda1_, "lambda1", true);
    // lambda2 = 0 is accepted so the pure least-squares limit can be probed;
    // the closed-form path still refuses systems it cannot solve reliably.
    check_scalar(lambda2_, "lambda2", true);
    check_scalar(erase_scale_, "erase_scale", false);
    if (original_.cols() != concepts_.embed_dim()) {
        throw invalid_input_error("ErasureObjective: weight columns (" +
                                  std::to_string(original_.cols()) +
                                  ") must equal the concept embedding dimension (" +
                                  std::to_string(concepts_.embed_dim()) + ")");
    }
    guide_targets_ = multiply(original_, concepts_.guide());
    preserve_targets_ = multiply(original_, concepts_.preserve());
    erase_t_ = transpose(concepts_.erase());
    preserve_t_ = transpose(concepts_.preserve());
}

namespace detail {

double smooth_loss_ws(const ErasureObjective& obj, const DenseMatrix& w, ObjectiveWorkspace& ws) {
    const ConceptMatrices& c = obj.concepts();
    double loss = 0.0;
    if (c.n_erase() > 0) {
        multiply_into(w, c.erase(), ws.erase_prod);
        const auto& target = obj.guide_targets().data();
        const auto& prod = ws.erase_prod.data();
        double acc = 0.0;
        for (std::size_t i = 0; i < prod.size(); ++i) {
            const double r = prod[i] - target[i];
            acc += r * r;
        }
        loss += obj.erase_scale() * acc;
    }
    if (c.n_preserve() > 0) {
        multiply_into(w, c.preserve(), ws.preserve_prod);
        const auto& target = obj.preserve_targets().data();
        const auto& prod = ws.preserve_prod.data();
        double acc = 0.0;
        for (std::size_t i = 0; i < prod.size(); ++i) {
            const double r = prod[i] - target[i];
            acc += r * r;
        }
        loss += obj.lambda1() * acc;
    }
    {
        const auto& w0 = obj.original().data();
        const auto& wd = w.data();
        double acc = 0.0;
        for (std::size_t i = 0; i < wd.size(); ++i) {
            const double r = wd[i] - w0[i];
            acc += r * r;
        }
        loss += obj.lambda2() * acc;
    }
    return loss;
}

void gradient_into(const ErasureObjective& obj, const DenseMatrix& w,
                   DenseMatrix& grad, ObjectiveWorkspace& ws) {
    const ConceptMatrices& c = obj.concepts();
    if (!grad.same_shape(w)) grad = DenseMatrix(w.rows(), w.cols());

    // 2*lambda2*(W - W0) seeds the accumulator.
    {
        const double two_l2 = 2.0 * obj.lambda2();
        const auto& w0 = obj.original().data();
        const auto& wd = w.data();
        auto& gd = grad.data();
        for (std::size_t i = 0; i < wd.size(); ++i) gd[i] = two_l2 * (wd[i] - w0[i]);
    }
    if (c.n_erase() > 0) {
        multiply_into(w, c.erase(), ws.erase_prod);
        const auto& target = obj.guide_targets().data();
        auto& prod = ws.erase_prod.data();
        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] -= target[i];
        multiply_accum(2.0 * obj.erase_scale(), ws.erase_prod, obj.erase_transposed(), grad);
    }
    if (c.n_preserve() > 0) {
        multiply_into(w, c.preserve(), ws.preserve_prod);
        const auto& target = obj.preserve_targets().data();
        auto& prod = ws.preserve_prod.data();
        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] -= target[i];
        multiply_accum(2.0 * obj.lambda1(), ws.preserve_prod, obj.preserve_transposed(), grad);
    }
}

} // namespace detail

double smooth_loss(const ErasureObjective& obj, const DenseMatrix& w) {
    check_same_shape_as_original(obj, w, "smooth_loss");
    detail::ObjectiveWorkspace ws;
    return detail::smooth_loss_ws(obj, w, ws);
}

double total_objective(const ErasureObjective& obj, const DenseMatrix& w, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw invalid_input_error("total_objective: lambda must be non-negative");
    }
    return smooth_loss(obj, w) + lambda * entrywise_l1_norm(w);
}

DenseMatrix gradient(const ErasureObjective& obj, const DenseMatrix& w) {
    check_same_shape_as_original(obj, w, "gradient");
    detail::ObjectiveWorkspace ws;
    DenseMatrix grad;
    detail::gradient_into(obj, w, grad, ws);
    grad.ensure_finite("gradient");
    return grad;
}

DenseMatrix closed_form_uce(const ErasureObjective& obj) {
    const ConceptMatrices& c = obj.concepts();
    const std::size_t m = obj.embed_dim();

    // Right-hand Gram: erase_scale*Ce*Ce^T + lambda1*Cp*Cp^T + lambda2*I.
    DenseMatrix gram(m, m);
    for (std::size_t i = 0; i < m; ++i) gram(i, i) = obj.lambda2();
    if (c.n_erase() > 0) add_scaled_gram(gram, obj.erase_scale(), c.erase());
    if (c.n_preserve() > 0) add_scaled_gram(gram, obj.lambda1(), c.preserve());

    // Numerator: erase_scale*Cg*Ce^T + lambda1*Cp*Cp^T + lambda2*I.
    DenseMatrix numer(m, m);
    for (std::size_t i = 0; i < m; ++i) numer(i, i) = obj.lambda2();
    if (c.n_erase() > 0) add_scaled_abt(numer, obj.erase_scale(), c.guide(), c.erase());
    if (c.n_preserve() > 0) add_scaled_gram(numer, obj.lambda1(), c.preserve());

    const double sigma_max = detail::power_iteration_sym(gram).value;

    DenseMatrix factor = gram;
    if (!cholesky_factor(factor)) {
        throw numerical_error("closed_form_uce: system is not positive definite (singular or near-singular)");
    }
    const double inv_spectral = inverse_spectral_estimate(factor);
    if (sigma_max * inv_spectral > kConditionLimit) {
        throw numerical_error("closed_form_uce: condition estimate " +
                              std::to_string(sigma_max * inv_spectral) + " exceeds 1e14");
    }

    DenseMatrix rhs = multiply(obj.original(), numer); // n x m
    DenseMatrix result(rhs.rows(), m);
    std::vector<double> col(m);
    for (std::size_t i = 0; i < rhs.rows(); ++i) {
        for (std::size_t j = 0; j < m; ++j) col[j] = rhs(i, j);
        cholesky_solve(factor, col);
        for (std::size_t j = 0; j < m; ++j) result(i, j) = col[j];
    }
    result.ensure_finite("closed_form_uce");
    return result;
}

double lipschitz_constant(const ErasureObjective& obj) {
    const ConceptMatrices& c = obj.concepts();
    double erase_term = 0.0;
    if (c.n_erase() > 0) erase_term = obj.erase_scale() * spectral_norm_gram(c.erase()).value;
    double preserve_term = 0.0;
    if (c.n_preserve() > 0) preserve_term = obj.lambda1() * spectral_norm_gram(c.preserve()).value;
    return 2.0 * (erase_term + preserve_term + obj.lambda2());
}

double zero_solution_threshold(const ErasureObjective& obj) {
    DenseMatrix zero(obj.out_dim(), obj.embed_dim());
    DenseMatrix grad = gradient(obj, zero);
    double max_abs = 0.0;
    for (double v : grad.data()) max_abs = std::max(max_abs, std::fabs(v));
    return max_abs;
}

} // namespace cerase

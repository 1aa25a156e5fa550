#include "cerase/matrix.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

namespace cerase {

namespace {

constexpr std::size_t kPowerIterationCap = 10000;
constexpr double kRayleighTol = 1e-10;

void check_shape_match(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw invalid_input_error(std::string(op) + ": shape mismatch (" +
                                  std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                                  std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
    }
}

} // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw invalid_input_error("DenseMatrix: data length " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    ensure_finite("DenseMatrix construction");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw invalid_input_error("DenseMatrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return DenseMatrix(r, c, std::move(data));
}

void DenseMatrix::ensure_finite(const char* context) const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw numerical_error(std::string(context) + ": non-finite entry");
        }
    }
}

void CsrMatrix::validate() const {
    if (row_ptr.size() != static_cast<std::size_t>(rows) + 1) {
        throw format_error("CsrMatrix: row_ptr length must be rows+1");
    }
    if (row_ptr.front() != 0) throw format_error("CsrMatrix: row_ptr[0] must be 0");
    if (row_ptr.back() != col_idx.size() || col_idx.size() != values.size()) {
        throw format_error("CsrMatrix: row_ptr[rows] must equal nnz");
    }
    for (std::size_t r = 0; r < rows; ++r) {
        if (row_ptr[r] > row_ptr[r + 1]) throw format_error("CsrMatrix: row_ptr not non-decreasing");
        for (std::uint32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            if (col_idx[k] >= cols) throw format_error("CsrMatrix: column index out of range");
            if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1]) {
                throw format_error("CsrMatrix: column indices not strictly increasing within a row");
            }
            if (values[k] == 0.0f) throw format_error("CsrMatrix: explicit zero stored");
            if (!std::isfinite(values[k])) throw format_error("CsrMatrix: non-finite value");
        }
    }
}

double frobenius_norm(const DenseMatrix& m) {
    double acc = 0.0;
    for (double v : m.data()) acc += v * v;
    return std::sqrt(acc);
}

double entrywise_l1_norm(const DenseMatrix& m) {
    double acc = 0.0;
    for (double v : m.data()) acc += std::fabs(v);
    return acc;
}

double sparsity_fraction(const DenseMatrix& m) {
    if (m.size() == 0) return 0.0;
    std::size_t zeros = 0;
    for (double v : m.data()) {
        if (v == 0.0) ++zeros;
    }
    return static_cast<double>(zeros) / static_cast<double>(m.size());
}

namespace {

// Frobenius norm of C*C^T computed through the smaller Gram side:
// ||C C^T||_F = ||C^T C||_F (both equal sqrt(sum of fourth powers of the
// singular values of C).
double gram_frobenius_norm(const DenseMatrix& c) {
    const std::size_t m = c.rows();
    const std::size_t k = c.cols();
    const bool small_side_cols = k <= m;
    const std::size_t dim = small_side_cols ? k : m;
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            double g = 0.0;
            if (small_side_cols) {
                for (std::size_t l = 0; l < m; ++l) g += c(l, i) * c(l, j);
            } else {
                for (std::size_t l = 0; l < k; ++l) g += c(i, l) * c(j, l);
            }
            acc += g * g;
        }
    }
    return std::sqrt(acc);
}

} // namespace

SpectralNorm spectral_norm_gram(const DenseMatrix& c) {
    if (c.rows() == 0 || c.cols() == 0) {
        throw invalid_input_error("spectral_norm_gram: matrix has no columns");
    }
    const std::size_t m = c.rows();
    const std::size_t k = c.cols();

    std::vector<double> v(m, 1.0 / std::sqrt(static_cast<double>(m)));
    std::vector<double> u(k, 0.0);
    std::vector<double> w(m, 0.0);

    double rayleigh_prev = -1.0;
    for (std::size_t it = 1; it <= kPowerIterationCap; ++it) {
        // u = C^T v, w = C u; Rayleigh quotient v^T (C C^T) v = ||u||^2.
        std::fill(u.begin(), u.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double vi = v[i];
            for (std::size_t j = 0; j < k; ++j) u[j] += c(i, j) * vi;
        }
        double rayleigh = 0.0;
        for (double uj : u) rayleigh += uj * uj;
        if (rayleigh == 0.0) return {0.0, false, it};

        for (std::size_t i = 0; i < m; ++i) {
            double wi = 0.0;
            for (std::size_t j = 0; j < k; ++j) wi += c(i, j) * u[j];
            w[i] = wi;
        }
        double wnorm = 0.0;
        for (double wi : w) wnorm += wi * wi;
        wnorm = std::sqrt(wnorm);
        if (wnorm == 0.0) return {0.0, false, it};
        for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / wnorm;

        if (rayleigh_prev >= 0.0 && std::fabs(rayleigh - rayleigh_prev) <= kRayleighTol * rayleigh) {
            return {rayleigh, false, it};
        }
        rayleigh_prev = rayleigh;
    }
    return {gram_frobenius_norm(c), true, kPowerIterationCap};
}

CsrMatrix dense_to_csr(const DenseMatrix& m) {
    constexpr std::size_t kU32Max = std::numeric_limits<std::uint32_t>::max();
    if (m.rows() > kU32Max || m.cols() > kU32Max) {
        throw capacity_error("dense_to_csr: dimensions exceed 32-bit index range");
    }
    CsrMatrix s;
    s.rows = static_cast<std::uint32_t>(m.rows());
    s.cols = static_cast<std::uint32_t>(m.cols());
    s.row_ptr.reserve(m.rows() + 1);
    s.row_ptr.push_back(0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const float f = static_cast<float>(m(i, j));
            if (f != 0.0f) {
                if (s.values.size() == kU32Max) {
                    throw capacity_error("dense_to_csr: nonzero count exceeds 32-bit range");
                }
                s.col_idx.push_back(static_cast<std::uint32_t>(j));
                s.values.push_back(f);
            }
        }
        s.row_ptr.push_back(static_cast<std::uint32_t>(s.values.size()));
    }
    return s;
}

DenseMatrix csr_to_dense(const CsrMatrix& s) {
    s.validate();
    DenseMatrix m(s.rows, s.cols);
    for (std::size_t r = 0; r < s.rows; ++r) {
        for (std::uint32_t k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) {
            m(r, s.col_idx[k]) = static_cast<double>(s.values[k]);
        }
    }
    return m;
}

DenseMatrix quantize_f32(const DenseMatrix& m) {
    DenseMatrix q(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) {
        q.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
    }
    // Values beyond the float range overflow to infinity.
    q.ensure_finite("quantize_f32");
    return q;
}

namespace detail {

void multiply_into(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.cols() != b.rows()) {
        throw invalid_input_error("multiply: inner dimensions " + std::to_string(a.cols()) +
                                  " and " + std::to_string(b.rows()) + " differ");
    }
    if (out.rows() != a.rows() || out.cols() != b.cols()) {
        out = DenseMatrix(a.rows(), b.cols());
    }
    const std::size_t n = a.rows(), k = a.cols(), p = b.cols();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    if (p <= 4) {
        // Skinny right-hand side (concept matrices): keep the running sums
        // in registers instead of re-reading the output row.
        for (std::size_t i = 0; i < n; ++i) {
            const double* arow = ad + i * k;
            double acc[4] = {0.0, 0.0, 0.0, 0.0};
            for (std::size_t l = 0; l < k; ++l) {
                const double al = arow[l];
                const double* brow = bd + l * p;
                for (std::size_t j = 0; j < p; ++j) acc[j] += al * brow[j];
            }
            double* orow = od + i * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] = acc[j];
        }
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = od + i * p;
        std::fill(orow, orow + p, 0.0);
        for (std::size_t l = 0; l < k; ++l) {
            const double ail = ad[i * k + l];
            const double* brow = bd + l * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += ail * brow[j];
        }
    }
}

void multiply_accum(double alpha, const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.cols() != b.rows()) {
        throw invalid_input_error("multiply_accum: inner dimensions differ");
    }
    if (out.rows() != a.rows() || out.cols() != b.cols()) {
        throw invalid_input_error("multiply_accum: output shape mismatch");
    }
    const std::size_t n = a.rows(), k = a.cols(), p = b.cols();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = ad + i * k;
        double* orow = od + i * p;
        for (std::size_t l = 0; l < k; ++l) {
            const double al = alpha * arow[l];
            const double* brow = bd + l * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += al * brow[j];
        }
    }
}

void multiply_bt_accum(double alpha, const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.cols() != b.cols()) {
        throw invalid_input_error("multiply_bt: inner dimensions differ");
    }
    if (out.rows() != a.rows() || out.cols() != b.rows()) {
        throw invalid_input_error("multiply_bt: output shape mismatch");
    }
    const std::size_t n = a.rows(), k = a.cols(), p = b.rows();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = ad + i * k;
        double* orow = od + i * p;
        for (std::size_t j = 0; j < p; ++j) {
            const double* brow = bd + j * k;
            double dot = 0.0;
            for (std::size_t l = 0; l < k; ++l) dot += arow[l] * brow[l];
            orow[j] += alpha * dot;
        }
    }
}

SpectralNorm power_iteration_sym(const DenseMatrix& a) {
    if (a.rows() == 0 || a.rows() != a.cols()) {
        throw invalid_input_error("power_iteration_sym: square non-empty matrix required");
    }
    const std::size_t n = a.rows();
    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> w(n, 0.0);
    double rayleigh_prev = -1.0;
    for (std::size_t it = 1; it <= kPowerIterationCap; ++it) {
        double rayleigh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double wi = 0.0;
            for (std::size_t j = 0; j < n; ++j) wi += a(i, j) * v[j];
            w[i] = wi;
            rayleigh += wi * v[i];
        }
        double wnorm = 0.0;
        for (double wi : w) wnorm += wi * wi;
        wnorm = std::sqrt(wnorm);
        if (wnorm == 0.0) return {0.0, false, it};
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wnorm;
        if (rayleigh_prev >= 0.0 && std::fabs(rayleigh - rayleigh_prev) <= kRayleighTol * std::fabs(rayleigh)) {
            return {rayleigh, false, it};
        }
        rayleigh_prev = rayleigh;
    }
    return {frobenius_norm(a), true, kPowerIterationCap};
}

} // namespace detail

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out;
    detail::multiply_into(a, b, out);
    out.ensure_finite("multiply");
    return out;
}

DenseMatrix multiply_bt(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows(), b.rows());
    detail::multiply_bt_accum(1.0, a, b, out);
    out.ensure_finite("multiply_bt");
    return out;
}

DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    }
    return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    check_shape_match(a, b, "add");
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    out.ensure_finite("add");
    return out;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    check_shape_match(a, b, "subtract");
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    out.ensure_finite("subtract");
    return out;
}

DenseMatrix scaled(const DenseMatrix& m, double alpha) {
    DenseMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = alpha * m.data()[i];
    out.ensure_finite("scaled");
    return out;
}

} // namespace cerase

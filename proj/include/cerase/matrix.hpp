#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "cerase/error.hpp"

namespace cerase {

/// Row-major dense matrix of doubles. The carrier type for projection
/// weights and concept embeddings. Entries are finite on construction and
/// after every public operation; solving happens in double precision,
/// serialization rounds to float (see storage module).
class DenseMatrix {
public:
    DenseMatrix() = default;

    /// Zero-filled rows x cols matrix.
    DenseMatrix(std::size_t rows, std::size_t cols);

    /// Adopts `data` (row-major, length rows*cols). Throws
    /// invalid_input_error on length mismatch, numerical_error on NaN/Inf.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);

    /// Convenience constructor for literals in tests and small fixtures.
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    bool same_shape(const DenseMatrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    /// Throws numerical_error naming `context` if any entry is NaN/Inf.
    void ensure_finite(const char* context) const;

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

    friend void swap(DenseMatrix& a, DenseMatrix& b) noexcept {
        std::swap(a.rows_, b.rows_);
        std::swap(a.cols_, b.cols_);
        a.data_.swap(b.data_);
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Compressed sparse row matrix with 32-bit indices and float values.
/// Canonical form: row_ptr non-decreasing with row_ptr[0]=0 and
/// row_ptr[rows]=nnz, column indices strictly increasing within a row,
/// and no stored value equal to zero.
struct CsrMatrix {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint32_t> row_ptr; // rows + 1 offsets
    std::vector<std::uint32_t> col_idx; // nnz column indices
    std::vector<float> values;          // nnz stored values

    std::size_t nnz() const noexcept { return values.size(); }

    /// Throws format_error if any canonical-form invariant is violated.
    void validate() const;
};

/// sqrt of the sum of squared entries.
double frobenius_norm(const DenseMatrix& m);

/// Sum of absolute values of all entries (L1 norm of the vectorized matrix).
double entrywise_l1_norm(const DenseMatrix& m);

/// Fraction of entries that are exactly zero. No epsilon threshold: the
/// shrinkage operator produces bit-exact zeros, so anything else would
/// misreport.
double sparsity_fraction(const DenseMatrix& m);

struct SpectralNorm {
    double value = 0.0;
    /// True when power iteration did not converge and the Frobenius norm of
    /// the Gram matrix (a valid upper bound) was returned instead.
    bool frobenius_fallback = false;
    std::size_t iterations = 0;
};

/// Largest singular value of C*C^T (equivalently sigma_max(C)^2), computed
/// by power iteration on the Gram operator without forming it. Deterministic
/// all-ones start vector, tolerance 1e-10 on successive Rayleigh quotients,
/// cap 10000 iterations. Throws invalid_input_error on an empty matrix.
SpectralNorm spectral_norm_gram(const DenseMatrix& c);

/// Dense -> canonical CSR. Values are rounded to float first; entries whose
/// float value is exactly zero are dropped. Throws capacity_error when a
/// dimension or the nonzero count does not fit 32 bits.
CsrMatrix dense_to_csr(const DenseMatrix& m);

/// CSR -> dense with stored values placed and zeros elsewhere. Validates the
/// input invariants (format_error).
DenseMatrix csr_to_dense(const CsrMatrix& s);

/// Every entry rounded to float and widened back (round to nearest even).
DenseMatrix quantize_f32(const DenseMatrix& m);

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);

/// a * b^T without materializing the transpose.
DenseMatrix multiply_bt(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix transpose(const DenseMatrix& m);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& m, double alpha);

namespace detail {

/// out = a * b. Resizes out; out must not alias a or b.
void multiply_into(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);

/// out += alpha * a * b. Shapes must already agree; no aliasing.
void multiply_accum(double alpha, const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);

/// out += alpha * a * b^T. Shapes must already agree; no aliasing.
void multiply_bt_accum(double alpha, const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);

/// Largest eigenvalue of a symmetric positive semi-definite matrix by power
/// iteration (same start vector and tolerances as spectral_norm_gram).
SpectralNorm power_iteration_sym(const DenseMatrix& a);

} // namespace detail

} // namespace cerase

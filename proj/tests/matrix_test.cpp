#include "doctest.h"

#include <cmath>

#include "cerase/matrix.hpp"
#include "oracles.hpp"

using namespace cerase;

TEST_CASE("dense matrix construction validates shape and finiteness") {
    CHECK_THROWS_AS(DenseMatrix(2, 2, {1.0, 2.0, 3.0}), invalid_input_error);
    CHECK_THROWS_AS(DenseMatrix(1, 2, {1.0, std::nan("")}), numerical_error);
    CHECK_THROWS_AS(DenseMatrix(1, 1, {INFINITY}), numerical_error);
    const DenseMatrix m(3, 4);
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 4);
    CHECK(frobenius_norm(m) == 0.0);
}

TEST_CASE("frobenius norm") {
    CHECK(frobenius_norm(DenseMatrix(3, 3)) == 0.0);
    CHECK(frobenius_norm(DenseMatrix::identity(4)) == doctest::Approx(2.0).epsilon(1e-15));

    Rng rng(11);
    const DenseMatrix m = oracle::random_matrix(rng, 6, 5);
    double acc = 0.0;
    for (double v : m.data()) acc += v * v;
    CHECK(frobenius_norm(m) == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));
}

TEST_CASE("entrywise l1 norm") {
    CHECK(entrywise_l1_norm(DenseMatrix(2, 2)) == 0.0);
    CHECK(entrywise_l1_norm(DenseMatrix::from_rows({{1, -2}, {3, -4}})) == 10.0);

    Rng rng(12);
    const DenseMatrix m = oracle::random_matrix(rng, 8, 8);
    double acc = 0.0;
    for (double v : m.data()) acc += std::fabs(v);
    CHECK(entrywise_l1_norm(m) == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("norms are absolutely homogeneous") {
    Rng rng(13);
    const DenseMatrix m = oracle::random_matrix(rng, 5, 7);
    for (double alpha : {-3.5, -1.0, 0.0, 0.25, 2.0, 117.0}) {
        const DenseMatrix scaled_m = scaled(m, alpha);
        CHECK(frobenius_norm(scaled_m) ==
              doctest::Approx(std::fabs(alpha) * frobenius_norm(m)).epsilon(1e-12));
        CHECK(entrywise_l1_norm(scaled_m) ==
              doctest::Approx(std::fabs(alpha) * entrywise_l1_norm(m)).epsilon(1e-12));
    }
}

TEST_CASE("sparsity fraction counts exact zeros only") {
    CHECK(sparsity_fraction(DenseMatrix(5, 5)) == 1.0);
    CHECK(sparsity_fraction(DenseMatrix::from_rows({{1, 2}, {3, 4}})) == 0.0);

    DenseMatrix m = DenseMatrix::from_rows({{0, 1, 2, 3}, {4, 0, 5, 6}, {7, 8, 0, 9}});
    CHECK(sparsity_fraction(m) == doctest::Approx(0.25));

    // A denormal-but-nonzero entry must not be treated as zero.
    m(0, 0) = 1e-300;
    CHECK(sparsity_fraction(m) == doctest::Approx(2.0 / 12.0));
}

TEST_CASE("spectral norm of the Gram matrix") {
    CHECK(spectral_norm_gram(DenseMatrix::identity(3)).value == doctest::Approx(1.0).epsilon(1e-10));

    Rng rng(14);
    const DenseMatrix column = oracle::random_matrix(rng, 9, 1);
    double norm_sq = 0.0;
    for (double v : column.data()) norm_sq += v * v;
    const SpectralNorm rank1 = spectral_norm_gram(column);
    CHECK(rank1.value == doctest::Approx(norm_sq).epsilon(1e-10));
    CHECK_FALSE(rank1.frobenius_fallback);

    const DenseMatrix c = oracle::random_matrix(rng, 16, 8);
    const double exact = oracle::gram_spectral_norm(c);
    CHECK(spectral_norm_gram(c).value == doctest::Approx(exact).epsilon(1e-8));

    CHECK_THROWS_AS(spectral_norm_gram(DenseMatrix(4, 0)), invalid_input_error);
    CHECK_THROWS_AS(spectral_norm_gram(DenseMatrix()), invalid_input_error);

    CHECK(spectral_norm_gram(DenseMatrix(3, 2)).value == 0.0); // zero matrix
}

TEST_CASE("spectral norm bounds: Rayleigh quotient below, Gram Frobenius above") {
    Rng rng(15);
    const DenseMatrix c = oracle::random_matrix(rng, 12, 5);
    const double sigma = spectral_norm_gram(c).value;

    const std::size_t m = c.rows();
    for (int trial = 0; trial < 20; ++trial) {
        DenseMatrix v = oracle::random_unit_columns(rng, m, 1);
        // |G v| / |v| for G = C C^T and unit v.
        const DenseMatrix gv = multiply(c, multiply(transpose(c), v));
        CHECK(sigma * (1 + 1e-9) >= frobenius_norm(gv));
    }

    const DenseMatrix gram = multiply_bt(c, c);
    CHECK(sigma <= frobenius_norm(gram) * (1 + 1e-9));
}

TEST_CASE("dense/CSR conversions") {
    SUBCASE("zero matrix") {
        const CsrMatrix s = dense_to_csr(DenseMatrix(4, 4));
        CHECK(s.nnz() == 0);
        CHECK(s.row_ptr == std::vector<std::uint32_t>{0, 0, 0, 0, 0});
        CHECK(csr_to_dense(s) == DenseMatrix(4, 4));
    }
    SUBCASE("identity") {
        const CsrMatrix s = dense_to_csr(DenseMatrix::identity(3));
        CHECK(s.nnz() == 3);
        CHECK(s.col_idx == std::vector<std::uint32_t>{0, 1, 2});
        CHECK(csr_to_dense(s) == DenseMatrix::identity(3));
    }
    SUBCASE("random sparse round trips at storage precision") {
        Rng rng(16);
        for (int trial = 0; trial < 20; ++trial) {
            DenseMatrix m(32, 32);
            for (auto& v : m.data()) {
                v = rng.next_unit() < 0.7 ? 0.0 : static_cast<double>(static_cast<float>(rng.next_gaussian()));
            }
            const DenseMatrix back = csr_to_dense(dense_to_csr(m));
            CHECK(back == m);
        }
    }
    SUBCASE("values that round to zero in f32 are dropped") {
        DenseMatrix m(1, 2);
        m(0, 0) = 1e-300; // underflows to 0.0f
        m(0, 1) = 1.5;
        const CsrMatrix s = dense_to_csr(m);
        CHECK(s.nnz() == 1);
        CHECK(s.col_idx == std::vector<std::uint32_t>{1});
    }
}

TEST_CASE("CSR invariant validation") {
    CsrMatrix good;
    good.rows = 2;
    good.cols = 3;
    good.row_ptr = {0, 2, 3};
    good.col_idx = {0, 2, 1};
    good.values = {1.0f, 2.0f, 3.0f};
    CHECK_NOTHROW(good.validate());

    CsrMatrix zero_value = good;
    zero_value.values[1] = 0.0f;
    CHECK_THROWS_AS(zero_value.validate(), format_error);

    CsrMatrix unsorted = good;
    unsorted.col_idx = {2, 0, 1};
    CHECK_THROWS_AS(unsorted.validate(), format_error);

    CsrMatrix bad_ptr = good;
    bad_ptr.row_ptr = {0, 3, 2};
    CHECK_THROWS_AS(bad_ptr.validate(), format_error);

    CsrMatrix out_of_range = good;
    out_of_range.col_idx = {0, 2, 3};
    CHECK_THROWS_AS(out_of_range.validate(), format_error);

    CsrMatrix bad_front = good;
    bad_front.row_ptr = {1, 2, 3};
    CHECK_THROWS_AS(bad_front.validate(), format_error);
}

TEST_CASE("products and transpose") {
    const DenseMatrix a = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    const DenseMatrix b = DenseMatrix::from_rows({{7, 8}, {9, 10}, {11, 12}});
    CHECK(multiply(a, b) == DenseMatrix::from_rows({{58, 64}, {139, 154}}));
    CHECK_THROWS_AS(multiply(a, a), invalid_input_error);

    CHECK(transpose(transpose(a)) == a);

    Rng rng(17);
    const DenseMatrix x = oracle::random_matrix(rng, 4, 6);
    const DenseMatrix y = oracle::random_matrix(rng, 5, 6);
    CHECK(multiply_bt(x, y) == multiply(x, transpose(y)));

    const DenseMatrix sum = add(a, a);
    CHECK(sum == scaled(a, 2.0));
    CHECK(subtract(sum, a) == a);
}

TEST_CASE("quantize to storage precision") {
    DenseMatrix m(1, 3);
    m(0, 0) = 0.1;             // not representable in f32
    m(0, 1) = 1.5;             // exactly representable
    m(0, 2) = 1e-300;          // underflows to zero
    const DenseMatrix q = quantize_f32(m);
    CHECK(q(0, 0) == static_cast<double>(0.1f));
    CHECK(q(0, 1) == 1.5);
    CHECK(q(0, 2) == 0.0);
    CHECK(quantize_f32(q) == q);
}

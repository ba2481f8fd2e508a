#include <doctest.h>

#include <cmath>
#include <random>

#include "ega/errors.hpp"
#include "ega/matrix.hpp"

#include "oracles.hpp"

using ega::Matrix;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t i = 0;
    for (const auto& row : rows) {
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST_SUITE_BEGIN("matrix");

TEST_CASE("matmul identity leaves operand unchanged") {
    const Matrix m = ega::seeded_init(3, 3, 7, 1.0);
    CHECK(ega::max_abs_diff(ega::matmul(Matrix::identity(3), m), m) == 0.0);
}

TEST_CASE("matmul hand example") {
    const Matrix a = from_rows({{1, 2}, {3, 4}});
    const Matrix b = from_rows({{5}, {6}});
    const Matrix c = ega::matmul(a, b);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 1);
    CHECK(c(0, 0) == 17.0);
    CHECK(c(1, 0) == 39.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    const Matrix a = ega::seeded_init(7, 5, 11, 1.0);
    const Matrix b = ega::seeded_init(5, 4, 13, 1.0);
    const Matrix expected = oracle::to_matrix(oracle::matmul(oracle::to_grid(a), oracle::to_grid(b)));
    CHECK(ega::max_abs_diff(ega::matmul(a, b), expected) < 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
    const Matrix a(2, 3), b(4, 2);
    CHECK_THROWS_WITH_AS(ega::matmul(a, b), doctest::Contains("2x3"), ega::ShapeError);
    CHECK_THROWS_WITH_AS(ega::matmul(a, b), doctest::Contains("4x2"), ega::ShapeError);
}

TEST_CASE("matmul associativity on random triples") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng() % 8, k = 1 + rng() % 8;
        const std::size_t n = 1 + rng() % 8, p = 1 + rng() % 8;
        const Matrix a = ega::seeded_init(m, k, rng(), 1.0);
        const Matrix b = ega::seeded_init(k, n, rng(), 1.0);
        const Matrix c = ega::seeded_init(n, p, rng(), 1.0);
        const Matrix left = ega::matmul(ega::matmul(a, b), c);
        const Matrix right = ega::matmul(a, ega::matmul(b, c));
        double scale = 0.0;
        for (double v : left.data()) scale = std::max(scale, std::abs(v));
        CHECK(ega::max_abs_diff(left, right) <= 1e-9 * std::max(1.0, scale));
    }
}

TEST_CASE("softmax of a constant row is uniform") {
    const Matrix p = ega::softmax_rows(Matrix(1, 3, 0.0));
    for (std::size_t j = 0; j < 3; ++j) CHECK(p(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax is stable under large logits") {
    const Matrix p = ega::softmax_rows(from_rows({{1000.0, 0.0, 0.0}}));
    CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p.is_finite());
}

TEST_CASE("softmax matches the naive oracle at small magnitudes") {
    const Matrix m = ega::seeded_init(4, 6, 23, 2.0);
    const Matrix p = ega::softmax_rows(m);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.cols());
        for (std::size_t j = 0; j < m.cols(); ++j) row[j] = m(i, j);
        const std::vector<double> expected = oracle::naive_softmax(row);
        for (std::size_t j = 0; j < m.cols(); ++j)
            CHECK(std::abs(p(i, j) - expected[j]) < 1e-12);
    }
}

TEST_CASE("softmax rows sum to one and shifting a row changes nothing") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix m = ega::seeded_init(1 + rng() % 6, 1 + rng() % 9, rng(), 4.0);
        const Matrix p = ega::softmax_rows(m);
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double row_sum = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) row_sum += p(i, j);
            CHECK(std::abs(row_sum - 1.0) < 1e-12);
        }
        Matrix shifted = m;
        for (std::size_t j = 0; j < m.cols(); ++j) shifted(0, j) += 3.25;
        CHECK(ega::max_abs_diff(ega::softmax_rows(shifted), p) < 1e-12);
    }
}

TEST_CASE("concat_rows stacks parts in order") {
    const Matrix a = ega::seeded_init(220, 64, 1, 1.0);
    const Matrix b = ega::seeded_init(220, 64, 2, 1.0);
    const Matrix stacked = ega::concat_rows({a, b});
    CHECK(stacked.rows() == 440);  // two neighbors at the 11x20 scale
    CHECK(stacked.cols() == 64);

    const Matrix single = ega::concat_rows({a});
    CHECK(ega::max_abs_diff(single, a) == 0.0);

    const Matrix six = ega::concat_rows({a, b, a, b, a, b});
    CHECK(six.rows() == 1320);  // all six views joined

    CHECK_THROWS_AS(ega::concat_rows({a, ega::Matrix(3, 5)}), ega::ShapeError);
}

TEST_CASE("concat then slice recovers the parts exactly") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Matrix> parts;
        const std::size_t cols = 1 + rng() % 7;
        const std::size_t count = 1 + rng() % 4;
        for (std::size_t i = 0; i < count; ++i)
            parts.push_back(ega::seeded_init(1 + rng() % 9, cols, rng(), 1.0));
        const Matrix stacked = ega::concat_rows(parts);
        std::size_t r = 0;
        for (const Matrix& part : parts) {
            CHECK(ega::max_abs_diff(ega::slice_rows(stacked, r, r + part.rows()), part) == 0.0);
            r += part.rows();
        }
    }
}

TEST_CASE("seeded_init is deterministic and seed-sensitive") {
    const Matrix a = ega::seeded_init(6, 5, 99, 0.5);
    const Matrix b = ega::seeded_init(6, 5, 99, 0.5);
    CHECK(a.data() == b.data());

    const Matrix c = ega::seeded_init(6, 5, 100, 0.5);
    CHECK(ega::max_abs_diff(a, c) > 0.0);

    for (double v : a.data()) {
        CHECK(v >= -0.5);
        CHECK(v <= 0.5);
    }
}

TEST_CASE("seeded_init sample mean obeys the uniform moment bound") {
    const double scale = 2.0;
    const std::size_t n = 1000000;
    const Matrix draws = ega::seeded_init(1000, 1000, 4242, scale);
    const double mean = ega::sum(draws) / static_cast<double>(n);
    // Uniform(-s, s) has sd s/sqrt(3); three sigma of the sample mean.
    CHECK(std::abs(mean) < 3.0 * scale / std::sqrt(3.0 * static_cast<double>(n)));
}

TEST_CASE("finite inputs stay finite through the core ops") {
    const Matrix a = ega::seeded_init(5, 8, 3, 100.0);
    const Matrix b = ega::seeded_init(8, 4, 4, 100.0);
    CHECK(ega::matmul(a, b).is_finite());
    CHECK(ega::softmax_rows(a).is_finite());
    CHECK(ega::add(a, a).is_finite());
}

TEST_CASE("transpose and column slicing round-trip") {
    const Matrix m = ega::seeded_init(4, 7, 31, 1.0);
    CHECK(ega::max_abs_diff(ega::transpose(ega::transpose(m)), m) == 0.0);
    const Matrix left = ega::slice_cols(m, 0, 3);
    const Matrix right = ega::slice_cols(m, 3, 7);
    CHECK(ega::max_abs_diff(ega::concat_cols({left, right}), m) == 0.0);
}

TEST_CASE("flop counter sees matmul and softmax work") {
    ega::FlopCounter counter;
    {
        ega::ScopedFlopCounter guard(counter);
        ega::matmul(Matrix(3, 4), Matrix(4, 5));
        ega::softmax_rows(Matrix(2, 6));
    }
    CHECK(counter.total() == 2ull * 3 * 5 * 4 + 5ull * 2 * 6);
    ega::matmul(Matrix(3, 4), Matrix(4, 5));  // outside the guard: uncounted
    CHECK(counter.total() == 2ull * 3 * 5 * 4 + 5ull * 2 * 6);
}

TEST_SUITE_END();

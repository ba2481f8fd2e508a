#include "ega/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ega/errors.hpp"

namespace ega {

namespace {

thread_local FlopCounter* g_flop_counter = nullptr;

void count_flops(std::uint64_t n) {
    if (g_flop_counter != nullptr) g_flop_counter->add(n);
}

[[noreturn]] void shape_fail(const std::string& op, const Matrix& a, const Matrix& b) {
    throw ShapeError(op + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::is_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

ScopedFlopCounter::ScopedFlopCounter(FlopCounter& counter) : previous_(g_flop_counter) {
    g_flop_counter = &counter;
}

ScopedFlopCounter::~ScopedFlopCounter() { g_flop_counter = previous_; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_fail("matmul", a, b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Matrix out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double* out_row = out.row(i);
        const double* a_row = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a_row[p];
            const double* b_row = b.row(p);
            for (std::size_t j = 0; j < n; ++j) out_row[j] += aip * b_row[j];
        }
    }
    count_flops(2ull * m * n * k);
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* in_row = m.row(i);
        double* out_row = out.row(i);
        double row_max = in_row[0];
        for (std::size_t j = 1; j < m.cols(); ++j) row_max = std::max(row_max, in_row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out_row[j] = std::exp(in_row[j] - row_max);
            denom += out_row[j];
        }
        for (std::size_t j = 0; j < m.cols(); ++j) out_row[j] /= denom;
    }
    count_flops(5ull * m.rows() * m.cols());
    return out;
}

Matrix concat_rows(const std::vector<Matrix>& parts) {
    if (parts.empty()) throw UsageError("concat_rows: empty part list");
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    for (const Matrix& p : parts) {
        if (p.cols() != cols) shape_fail("concat_rows", parts.front(), p);
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::size_t r = 0;
    for (const Matrix& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.row(r));
        r += p.rows();
    }
    return out;
}

Matrix concat_cols(const std::vector<Matrix>& parts) {
    if (parts.empty()) throw UsageError("concat_cols: empty part list");
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (const Matrix& p : parts) {
        if (p.rows() != rows) shape_fail("concat_cols", parts.front(), p);
        cols += p.cols();
    }
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        double* out_row = out.row(i);
        for (const Matrix& p : parts) {
            out_row = std::copy(p.row(i), p.row(i) + p.cols(), out_row);
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("add", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("sub", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("hadamard", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
    return out;
}

Matrix scaled(const Matrix& m, double factor) {
    Matrix out = m;
    for (double& v : out.data()) v *= factor;
    return out;
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
    if (begin > end || end > m.rows())
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") outside " + m.shape_str());
    Matrix out(end - begin, m.cols());
    std::copy(m.row(begin), m.row(begin) + out.size(), out.data().begin());
    return out;
}

Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t end) {
    if (begin > end || end > m.cols())
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") outside " + m.shape_str());
    Matrix out(m.rows(), end - begin);
    for (std::size_t i = 0; i < m.rows(); ++i)
        std::copy(m.row(i) + begin, m.row(i) + end, out.row(i));
    return out;
}

double sum(const Matrix& m) {
    double total = 0.0;
    for (double v : m.data()) total += v;
    return total;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("max_abs_diff", a, b);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

Matrix seeded_init(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    Matrix out(rows, cols);
    for (double& v : out.data()) {
        // 53 random mantissa bits -> u in [0,1), then stretch to [-scale, scale).
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = scale * (2.0 * u - 1.0);
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t x = seed;
    for (std::uint64_t tag : {a, b, c}) {
        x += 0x9e3779b97f4a7c15ull + tag;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        x = x ^ (x >> 31);
    }
    return x;
}

}  // namespace ega

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ega {

// Dense row-major matrix of doubles. This is the only tensor type in the
// library: feature maps, projection weights and attention maps are all
// Matrix. Double precision throughout; gradient checks need the headroom.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const double* row(std::size_t i) const { return data_.data() + i * cols_; }
    double* row(std::size_t i) { return data_.data() + i * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool is_finite() const;

    // "RxC" string for error messages.
    std::string shape_str() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// FLOP accounting hook used by the cost-model oracle. By convention only
// matmul (2 FLOPs per multiply-add) and softmax_rows (5 FLOPs per element)
// report work; transposes, slices, elementwise ops and norms are free.
class FlopCounter {
public:
    void add(std::uint64_t n) { total_ += n; }
    std::uint64_t total() const { return total_; }
    void reset() { total_ = 0; }

private:
    std::uint64_t total_ = 0;
};

// Installs a counter for the current thread for the guard's lifetime.
class ScopedFlopCounter {
public:
    explicit ScopedFlopCounter(FlopCounter& counter);
    ~ScopedFlopCounter();
    ScopedFlopCounter(const ScopedFlopCounter&) = delete;
    ScopedFlopCounter& operator=(const ScopedFlopCounter&) = delete;

private:
    FlopCounter* previous_;
};

Matrix matmul(const Matrix& a, const Matrix& b);

// Numerically stable row-wise softmax (max subtraction); rows sum to 1.
Matrix softmax_rows(const Matrix& m);

Matrix concat_rows(const std::vector<Matrix>& parts);
Matrix concat_cols(const std::vector<Matrix>& parts);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& m, double factor);
Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end);
Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t end);
double sum(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Deterministic uniform draws in [-scale, scale]. The mapping from the
// mt19937_64 stream to doubles is fixed here rather than delegated to
// std::uniform_real_distribution, so identical seeds give identical bytes
// on every platform. Pre: scale > 0.
Matrix seeded_init(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale);

// Derives an independent stream id from a base seed and up to three tags
// (view, scale, matrix index). Splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

}  // namespace ega

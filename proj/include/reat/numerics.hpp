#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace reat {

using Vector = std::vector<double>;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Denominator clamp used by safe_divide.
inline constexpr double kDivideEpsilon = 1e-8;

// M v + b
Vector affine(const Matrix& m, std::span<const double> v, std::span<const double> b);
// M v
Vector matvec(const Matrix& m, std::span<const double> v);
// M^T v
Vector matvec_transposed(const Matrix& m, std::span<const double> v);
// out += M v
void matvec_accumulate(const Matrix& m, std::span<const double> v, std::span<double> out);
// out += M^T v
void matvec_transposed_accumulate(const Matrix& m, std::span<const double> v, std::span<double> out);
// G += a b^T
void outer_accumulate(Matrix& g, std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

enum class Elementwise { sigmoid, tanh, hadamard, safe_divide };

/// Unary kinds ignore `b`; binary kinds require equal lengths.
Vector elementwise(Elementwise kind, std::span<const double> a, std::span<const double> b = {});

double sigmoid(double x) noexcept;
Vector sigmoid(std::span<const double> a);
Vector tanh(std::span<const double> a);
Vector hadamard(std::span<const double> a, std::span<const double> b);
double safe_divide(double num, double den) noexcept;
Vector safe_divide(std::span<const double> a, std::span<const double> b);
/// True when safe_divide would clamp this denominator.
inline bool divide_clamps(double den) noexcept { return den > -kDivideEpsilon && den < kDivideEpsilon; }

Vector add(std::span<const double> a, std::span<const double> b);
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector concat(std::span<const double> a, std::span<const double> b);

/// Numerically stable softmax (max subtraction). Throws on empty input.
Vector softmax(std::span<const double> z);

std::size_t argmax(std::span<const double> v);

/// SplitMix64 generator. `split()` derives an independent child stream,
/// so components can be seeded from one root without sharing state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;
    Rng split() noexcept { return Rng(next() ^ 0x6a09e667f3bcc909ULL); }

private:
    std::uint64_t state_;
};

/// Stateless 64-bit mixer used to derive per-item seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

void fill_uniform(std::span<double> out, Rng& rng, double lo, double hi);

}  // namespace reat

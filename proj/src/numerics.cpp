#include "reat/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace reat {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw DimensionError(what);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows * cols, "matrix: data length != rows*cols");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector affine(const Matrix& m, std::span<const double> v, std::span<const double> b) {
    require(m.cols() == v.size(), "affine: matrix cols != vector length");
    require(m.rows() == b.size(), "affine: matrix rows != bias length");
    Vector out(b.begin(), b.end());
    matvec_accumulate(m, v, out);
    return out;
}

Vector matvec(const Matrix& m, std::span<const double> v) {
    Vector out(m.rows(), 0.0);
    matvec_accumulate(m, v, out);
    return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
    Vector out(m.cols(), 0.0);
    matvec_transposed_accumulate(m, v, out);
    return out;
}

void matvec_accumulate(const Matrix& m, std::span<const double> v, std::span<double> out) {
    require(m.cols() == v.size(), "matvec: matrix cols != vector length");
    require(m.rows() == out.size(), "matvec: matrix rows != output length");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto row = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * v[j];
        out[i] += acc;
    }
}

void matvec_transposed_accumulate(const Matrix& m, std::span<const double> v, std::span<double> out) {
    require(m.rows() == v.size(), "matvec_transposed: matrix rows != vector length");
    require(m.cols() == out.size(), "matvec_transposed: matrix cols != output length");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto row = m.row(i);
        const double vi = v[i];
        for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j] * vi;
    }
}

void outer_accumulate(Matrix& g, std::span<const double> a, std::span<const double> b) {
    require(g.rows() == a.size() && g.cols() == b.size(), "outer: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto row = g.row(i);
        const double ai = a[i];
        for (std::size_t j = 0; j < b.size(); ++j) row[j] += ai * b[j];
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double sigmoid(double x) noexcept {
    // Split on sign so exp never overflows.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector sigmoid(std::span<const double> a) {
    Vector out(a.size());
    std::transform(a.begin(), a.end(), out.begin(), [](double x) { return sigmoid(x); });
    return out;
}

Vector tanh(std::span<const double> a) {
    Vector out(a.size());
    std::transform(a.begin(), a.end(), out.begin(), [](double x) { return std::tanh(x); });
    return out;
}

Vector hadamard(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "hadamard: length mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

double safe_divide(double num, double den) noexcept {
    if (divide_clamps(den)) den = den < 0.0 ? -kDivideEpsilon : kDivideEpsilon;
    return num / den;
}

Vector safe_divide(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "safe_divide: length mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = safe_divide(a[i], b[i]);
    return out;
}

Vector elementwise(Elementwise kind, std::span<const double> a, std::span<const double> b) {
    switch (kind) {
        case Elementwise::sigmoid: return sigmoid(a);
        case Elementwise::tanh: return tanh(a);
        case Elementwise::hadamard: return hadamard(a, b);
        case Elementwise::safe_divide: return safe_divide(a, b);
    }
    throw std::invalid_argument("elementwise: unknown kind");
}

Vector add(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "add: length mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "subtract: length mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vector concat(std::span<const double> a, std::span<const double> b) {
    Vector out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

Vector softmax(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("softmax: empty input");
    const double top = *std::max_element(z.begin(), z.end());
    Vector out(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - top);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

std::size_t argmax(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("argmax: empty input");
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t Rng::next() noexcept {
    const std::uint64_t out = mix64(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
}

double Rng::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift; bias is < n / 2^64.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
}

void fill_uniform(std::span<double> out, Rng& rng, double lo, double hi) {
    for (double& x : out) x = rng.uniform(lo, hi);
}

}  // namespace reat

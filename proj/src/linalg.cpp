#include "petnn/linalg.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace petnn {

void shape_error(const std::string& what) { throw std::invalid_argument("petnn: " + what); }

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double Rng::normal() {
    // Box-Muller; u1 shifted away from 0 so log is finite
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) shape_error("Rng::below(0)");
    const std::uint64_t threshold = (0ULL - n) % n;  // 2^64 mod n
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

Vector matvec(const Matrix& w, const Vector& x) {
    if (w.cols != x.size())
        shape_error("matvec shape mismatch: W is " + std::to_string(w.rows) + "x" +
                    std::to_string(w.cols) + ", x has length " + std::to_string(x.size()));
    Vector y(w.rows);
    const double* wp = w.data.data();
    const double* xp = x.data.data();
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double* row = wp + i * w.cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < w.cols; ++j) acc += row[j] * xp[j];
        y[i] = acc;
    }
    return y;
}

void matvec_transpose_add(const Matrix& w, const Vector& y, Vector& out) {
    if (w.rows != y.size() || w.cols != out.size())
        shape_error("matvec_transpose_add shape mismatch: W is " + std::to_string(w.rows) + "x" +
                    std::to_string(w.cols) + ", y " + std::to_string(y.size()) + ", out " +
                    std::to_string(out.size()));
    const double* wp = w.data.data();
    double* op = out.data.data();
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double yi = y[i];
        const double* row = wp + i * w.cols;
        for (std::size_t j = 0; j < w.cols; ++j) op[j] += yi * row[j];
    }
}

void outer_add(Matrix& g, const Vector& y, const Vector& x) {
    if (g.rows != y.size() || g.cols != x.size())
        shape_error("outer_add shape mismatch: G is " + std::to_string(g.rows) + "x" +
                    std::to_string(g.cols) + ", y " + std::to_string(y.size()) + ", x " +
                    std::to_string(x.size()));
    double* gp = g.data.data();
    const double* xp = x.data.data();
    for (std::size_t i = 0; i < g.rows; ++i) {
        const double yi = y[i];
        double* row = gp + i * g.cols;
        for (std::size_t j = 0; j < g.cols; ++j) row[j] += yi * xp[j];
    }
}

Vector concat(const Vector& a, const Vector& b) {
    Vector r(a.size() + b.size());
    std::copy(a.data.begin(), a.data.end(), r.data.begin());
    std::copy(b.data.begin(), b.data.end(), r.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return r;
}

Vector slice(const Vector& v, std::size_t begin, std::size_t end) {
    if (begin > end || end > v.size()) shape_error("slice out of range");
    Vector r(end - begin);
    std::copy(v.data.begin() + static_cast<std::ptrdiff_t>(begin),
              v.data.begin() + static_cast<std::ptrdiff_t>(end), r.data.begin());
    return r;
}

namespace {
void check_same_len(const Vector& a, const Vector& b, const char* op) {
    if (a.size() != b.size())
        shape_error(std::string(op) + " length mismatch: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
}
}  // namespace

Vector add(const Vector& a, const Vector& b) {
    check_same_len(a, b, "add");
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

Vector sub(const Vector& a, const Vector& b) {
    check_same_len(a, b, "sub");
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

Vector mul(const Vector& a, const Vector& b) {
    check_same_len(a, b, "mul");
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
    return r;
}

Vector scale(const Vector& a, double c) {
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * c;
    return r;
}

void add_inplace(Vector& a, const Vector& b) {
    check_same_len(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

namespace {
constexpr double kOneBelow = 0x1.fffffffffffffp-1;  // largest double below 1
constexpr double kTinyPositive = 0x1p-1074;         // smallest positive double
}  // namespace

double sigmoid_scalar(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    if (s >= 1.0) return kOneBelow;
    if (s <= 0.0) return kTinyPositive;
    return s;
}

double tanh_scalar(double x) {
    const double t = std::tanh(x);
    if (t >= 1.0) return kOneBelow;
    if (t <= -1.0) return -kOneBelow;
    return t;
}

Vector sigmoid(const Vector& x) {
    Vector r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = sigmoid_scalar(x[i]);
    return r;
}

Vector tanh(const Vector& x) {
    Vector r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = tanh_scalar(x[i]);
    return r;
}

bool all_finite(const Vector& v) {
    for (double x : v.data)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Matrix& m) {
    for (double x : m.data)
        if (!std::isfinite(x)) return false;
    return true;
}

double sum(const Vector& v) {
    double acc = 0.0;
    for (double x : v.data) acc += x;
    return acc;
}

double dot(const Vector& a, const Vector& b) {
    check_same_len(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

Matrix init_weights(Rng& rng, std::size_t rows, std::size_t cols, InitScheme scheme) {
    if (rows == 0 || cols == 0) shape_error("init_weights: zero dimension");
    Matrix m(rows, cols, 0.0);
    if (scheme == InitScheme::glorot_uniform) {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (double& w : m.data) w = rng.uniform(-bound, bound);
    }
    return m;
}

}  // namespace petnn

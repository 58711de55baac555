#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace petnn {

// Dense row-major matrix of 64-bit floats. All shape mismatches are hard
// errors; there is no implicit broadcasting anywhere in this library.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }

    static Matrix identity(std::size_t n);
};

struct Vector {
    std::vector<double> data;

    Vector() = default;
    explicit Vector(std::size_t n, double fill = 0.0) : data(n, fill) {}
    Vector(std::initializer_list<double> xs) : data(xs) {}

    std::size_t size() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// Counter-based deterministic generator (splitmix64). Identical seeds give
// identical streams on every platform; the whole state is one u64 counter,
// which makes checkpointing the stream trivial.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller; two uniform draws per call
    double normal();

    // unbiased integer in [0, n)
    std::uint64_t below(std::uint64_t n);

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

private:
    std::uint64_t state_;
};

enum class InitScheme { glorot_uniform, zero };

// y = W x
Vector matvec(const Matrix& w, const Vector& x);

// out += W^T y  (reverse-mode counterpart of matvec)
void matvec_transpose_add(const Matrix& w, const Vector& y, Vector& out);

// g += y x^T  (rank-1 gradient accumulation)
void outer_add(Matrix& g, const Vector& y, const Vector& x);

Vector concat(const Vector& a, const Vector& b);
Vector slice(const Vector& v, std::size_t begin, std::size_t end);

Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector mul(const Vector& a, const Vector& b);
Vector scale(const Vector& a, double c);
void add_inplace(Vector& a, const Vector& b);

// scalar activations, clamped so saturation cannot round onto the closed
// boundary: sigmoid stays in (0,1), tanh in (-1,1)
double sigmoid_scalar(double x);
double tanh_scalar(double x);

Vector sigmoid(const Vector& x);
Vector tanh(const Vector& x);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

double sum(const Vector& v);
double dot(const Vector& a, const Vector& b);

Matrix init_weights(Rng& rng, std::size_t rows, std::size_t cols, InitScheme scheme);

// thrown by shape checks; maps to "bad input" at the CLI boundary
[[noreturn]] void shape_error(const std::string& what);

}  // namespace petnn

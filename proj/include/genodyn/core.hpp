#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

// Extended-precision support (a long double with at least 64 significand
// bits). Auto-detected; define GENODYN_ENABLE_EXTENDED=0 to build without it.
#ifndef GENODYN_ENABLE_EXTENDED
#define GENODYN_ENABLE_EXTENDED (LDBL_MANT_DIG >= 64)
#endif

namespace genodyn {

template <typename T>
using Vec = std::vector<T>;

/// Minimal dense row-major matrix. Only the small sizes this library needs
/// (2x2, 3x3, n x n Jacobians) are ever constructed.
template <typename T>
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::span<const T> data() const { return data_; }
    std::span<T> data() { return data_; }

    /// Max absolute row sum.
    T norm_inf() const {
        T best = T(0);
        for (std::size_t i = 0; i < rows_; ++i) {
            T s = T(0);
            for (std::size_t j = 0; j < cols_; ++j) s += std::abs((*this)(i, j));
            best = std::max(best, s);
        }
        return best;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<T> data_;
};

template <typename T>
constexpr T machine_epsilon() {
    return std::numeric_limits<T>::epsilon();
}

template <typename T>
T sup_norm(std::span<const T> v) {
    T m = T(0);
    for (const T& x : v) m = std::max(m, std::abs(x));
    return m;
}

template <typename T>
T euclid_norm(std::span<const T> v) {
    T s = T(0);
    for (const T& x : v) s += x * x;
    return std::sqrt(s);
}

template <typename T>
bool all_finite(std::span<const T> v) {
    for (const T& x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
    T s = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace genodyn

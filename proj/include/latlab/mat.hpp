#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "latlab/error.hpp"

namespace latlab {

// Dense row-major matrix. T is float for storage/production paths and double
// inside gradient verification.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, T(0)) {}

    T& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    std::span<T> row(int r) { return {a.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
    std::span<const T> row(int r) const {
        return {a.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }

    size_t size() const { return a.size(); }
};

// y = M x. Accumulates in double regardless of T.
template <typename T>
inline void matvec(const Mat<T>& m, std::span<const T> x, std::span<T> y) {
    if (static_cast<int>(x.size()) != m.cols || static_cast<int>(y.size()) != m.rows)
        throw DataError("matvec: dimension mismatch");
    for (int r = 0; r < m.rows; ++r) {
        const T* row = m.a.data() + static_cast<size_t>(r) * m.cols;
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) acc += static_cast<double>(row[c]) * static_cast<double>(x[c]);
        y[r] = static_cast<T>(acc);
    }
}

template <typename T>
inline std::vector<T> matvec(const Mat<T>& m, std::span<const T> x) {
    std::vector<T> y(m.rows);
    matvec(m, x, std::span<T>(y));
    return y;
}

template <typename T>
inline double dot(std::span<const T> a, std::span<const T> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

template <typename T>
inline bool all_finite(std::span<const T> v) {
    for (const T x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

template <typename T>
inline bool all_finite(const Mat<T>& m) {
    return all_finite(std::span<const T>(m.a));
}

}  // namespace latlab

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rdm {

// Dense row-major matrix of doubles. All in-memory math in this project is
// double; 32-bit floats appear only in the file formats.
struct MatrixD {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    MatrixD() = default;
    MatrixD(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    double* row(std::size_t i) { return v.data() + i * cols; }
    const double* row(std::size_t i) const { return v.data() + i * cols; }
    std::span<double> row_span(std::size_t i) { return {row(i), cols}; }
    std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }
    double& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

// y[j] += sum_k x[k] * W[k*out + j]   (W stored in-major: [in][out])
// Stream-shaped: the j-inner loop vectorizes without reassociation.
inline void affine_accum(const double* W, const double* x, double* y,
                         std::size_t in, std::size_t out) {
    for (std::size_t k = 0; k < in; ++k) {
        const double xk = x[k];
        const double* w = W + k * out;
        for (std::size_t j = 0; j < out; ++j) y[j] += xk * w[j];
    }
}

// dot product with four partial sums; deterministic and SIMD-friendly
inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

// dx[k] = sum_j dy[j] * W[k*out + j]  (transpose-apply of the in-major layout)
inline void affine_transpose_apply(const double* W, const double* dy, double* dx,
                                   std::size_t in, std::size_t out) {
    for (std::size_t k = 0; k < in; ++k) dx[k] = dot(W + k * out, dy, out);
}

// dW[k*out + j] += x[k] * dy[j]
inline void outer_accum(double* dW, const double* x, const double* dy,
                        std::size_t in, std::size_t out) {
    for (std::size_t k = 0; k < in; ++k) {
        const double xk = x[k];
        double* w = dW + k * out;
        for (std::size_t j = 0; j < out; ++j) w[j] += xk * dy[j];
    }
}

inline double squared_norm(std::span<const double> x) {
    return dot(x.data(), x.data(), x.size());
}

}  // namespace rdm

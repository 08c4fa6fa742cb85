#pragma once

// Dense affine-layer kernels over row-major batches.
//
// Two implementations share one contract:
//   reference::  plain serial loops, kept as the oracle for tests
//   parallel::   OpenMP over fixed row blocks with Eigen block products
//
// The parallel kernels reduce parameter gradients over fixed-size row
// blocks in block order, so results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace amrl::kernels {

/// Rows per block in the parallel kernels.
inline constexpr std::size_t kRowBlock = 64;

struct AffineShape {
  std::size_t rows;  // batch size
  std::size_t in;
  std::size_t out;
};

namespace reference {

/// y[r, o] = b[o] + sum_i x[r, i] * w[o, i]; w is out x in.
void affine_forward(AffineShape s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y);

/// Accumulates dW += dY^T X and db += colsum(dY); writes dX = dY W when
/// dx is non-empty.
void affine_backward(AffineShape s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dw, std::span<double> db,
                     std::span<double> dx);

}  // namespace reference

namespace parallel {

void affine_forward(AffineShape s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y);

void affine_backward(AffineShape s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dw, std::span<double> db,
                     std::span<double> dx);

}  // namespace parallel

/// In-place ReLU; returns nothing, the pre-activation is kept by the caller.
void relu(std::span<double> v);

/// dz = dy where z > 0, else 0.
void relu_backward(std::span<const double> z, std::span<double> dy);

/// Number of OpenMP threads the parallel kernels would use (1 without OpenMP).
int max_threads();

}  // namespace amrl::kernels

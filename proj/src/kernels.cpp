#include "amrl/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <vector>

#if defined(AMRL_USE_OPENMP)
#include <omp.h>
#endif

namespace amrl::kernels {

namespace reference {

void affine_forward(AffineShape s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t o = 0; o < s.out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < s.in; ++i) acc += x[r * s.in + i] * w[o * s.in + i];
      y[r * s.out + o] = acc;
    }
  }
}

void affine_backward(AffineShape s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dw, std::span<double> db,
                     std::span<double> dx) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t o = 0; o < s.out; ++o) {
      const double g = dy[r * s.out + o];
      db[o] += g;
      for (std::size_t i = 0; i < s.in; ++i) dw[o * s.in + i] += g * x[r * s.in + i];
    }
  }
  if (dx.empty()) return;
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t i = 0; i < s.in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < s.out; ++o) acc += dy[r * s.out + o] * w[o * s.in + i];
      dx[r * s.in + i] = acc;
    }
  }
}

}  // namespace reference

namespace parallel {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

std::size_t block_count(std::size_t rows) { return (rows + kRowBlock - 1) / kRowBlock; }

}  // namespace

void affine_forward(AffineShape s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const ConstMap wm(w.data(), static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in));
  const Eigen::Map<const Eigen::RowVectorXd> bv(b.data(), static_cast<Eigen::Index>(s.out));
  const auto blocks = static_cast<std::ptrdiff_t>(block_count(s.rows));
#if defined(AMRL_USE_OPENMP)
#pragma omp parallel for schedule(static) if (blocks > 1)
#endif
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t r0 = static_cast<std::size_t>(blk) * kRowBlock;
    const auto n = static_cast<Eigen::Index>(std::min(kRowBlock, s.rows - r0));
    const ConstMap xm(x.data() + r0 * s.in, n, static_cast<Eigen::Index>(s.in));
    Map ym(y.data() + r0 * s.out, n, static_cast<Eigen::Index>(s.out));
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += bv;
  }
}

void affine_backward(AffineShape s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dw, std::span<double> db,
                     std::span<double> dx) {
  const auto in = static_cast<Eigen::Index>(s.in);
  const auto out = static_cast<Eigen::Index>(s.out);
  const ConstMap wm(w.data(), out, in);
  const std::size_t blocks = block_count(s.rows);
  std::vector<RowMajor> partial_w(blocks);
  std::vector<Eigen::RowVectorXd> partial_b(blocks);
  const auto nblocks = static_cast<std::ptrdiff_t>(blocks);
#if defined(AMRL_USE_OPENMP)
#pragma omp parallel for schedule(static) if (nblocks > 1)
#endif
  for (std::ptrdiff_t blk = 0; blk < nblocks; ++blk) {
    const std::size_t r0 = static_cast<std::size_t>(blk) * kRowBlock;
    const auto n = static_cast<Eigen::Index>(std::min(kRowBlock, s.rows - r0));
    const ConstMap xm(x.data() + r0 * s.in, n, in);
    const ConstMap dym(dy.data() + r0 * s.out, n, out);
    partial_w[static_cast<std::size_t>(blk)].noalias() = dym.transpose() * xm;
    partial_b[static_cast<std::size_t>(blk)] = dym.colwise().sum();
    if (!dx.empty()) {
      Map dxm(dx.data() + r0 * s.in, n, in);
      dxm.noalias() = dym * wm;
    }
  }
  Map dwm(dw.data(), out, in);
  Eigen::Map<Eigen::RowVectorXd> dbv(db.data(), out);
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    dwm += partial_w[blk];
    dbv += partial_b[blk];
  }
}

}  // namespace parallel

void relu(std::span<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

void relu_backward(std::span<const double> z, std::span<double> dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (!(z[i] > 0.0)) dy[i] = 0.0;
  }
}

int max_threads() {
#if defined(AMRL_USE_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace amrl::kernels

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "amrl/kernels.hpp"
#include "amrl/netopt.hpp"

namespace {

using amrl::kernels::AffineShape;

struct Buffers {
  AffineShape shape;
  std::vector<double> x, w, b, y, dy, dw, db, dx;

  explicit Buffers(AffineShape s) : shape(s) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto fill = [&](std::vector<double>& v, std::size_t n) {
      v.resize(n);
      for (double& e : v) e = u(rng);
    };
    fill(x, s.rows * s.in);
    fill(w, s.out * s.in);
    fill(b, s.out);
    fill(dy, s.rows * s.out);
    y.assign(s.rows * s.out, 0.0);
    dw.assign(s.out * s.in, 0.0);
    db.assign(s.out, 0.0);
    dx.assign(s.rows * s.in, 0.0);
  }
};

AffineShape shape_of(const benchmark::State& state) {
  return {static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)),
          static_cast<std::size_t>(state.range(2))};
}

void BM_ForwardReference(benchmark::State& state) {
  Buffers buf(shape_of(state));
  for (auto _ : state) {
    amrl::kernels::reference::affine_forward(buf.shape, buf.x, buf.w, buf.b, buf.y);
    benchmark::DoNotOptimize(buf.y.data());
  }
}

void BM_ForwardParallel(benchmark::State& state) {
  Buffers buf(shape_of(state));
  for (auto _ : state) {
    amrl::kernels::parallel::affine_forward(buf.shape, buf.x, buf.w, buf.b, buf.y);
    benchmark::DoNotOptimize(buf.y.data());
  }
}

void BM_BackwardReference(benchmark::State& state) {
  Buffers buf(shape_of(state));
  for (auto _ : state) {
    amrl::kernels::reference::affine_backward(buf.shape, buf.x, buf.w, buf.dy, buf.dw, buf.db, buf.dx);
    benchmark::DoNotOptimize(buf.dw.data());
  }
}

void BM_BackwardParallel(benchmark::State& state) {
  Buffers buf(shape_of(state));
  for (auto _ : state) {
    amrl::kernels::parallel::affine_backward(buf.shape, buf.x, buf.w, buf.dy, buf.dw, buf.db, buf.dx);
    benchmark::DoNotOptimize(buf.dw.data());
  }
}

void BM_CriticGrad(benchmark::State& state) {
  auto net = amrl::netopt::Mlp::init({30, 64, 64, 1}, 1);
  net.set_backend(state.range(0) == 0 ? amrl::netopt::Backend::kReference : amrl::netopt::Backend::kParallel);
  amrl::netopt::Matrix x(256, 30, 0.1), up(256, 1, 1.0 / 256.0);
  for (auto _ : state) {
    auto g = amrl::netopt::grad(net, x, up);
    benchmark::DoNotOptimize(g.params.data());
  }
  state.SetLabel(state.range(0) == 0 ? "reference" : "parallel");
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({256, 30, 64})->Args({256, 64, 64})->Args({1024, 64, 64})->Args({4096, 128, 128});
}

}  // namespace

BENCHMARK(BM_ForwardReference)->Apply(shapes);
BENCHMARK(BM_ForwardParallel)->Apply(shapes);
BENCHMARK(BM_BackwardReference)->Apply(shapes);
BENCHMARK(BM_BackwardParallel)->Apply(shapes);
BENCHMARK(BM_CriticGrad)->Arg(0)->Arg(1);

BENCHMARK_MAIN();

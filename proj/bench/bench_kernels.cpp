// Serial reference vs OpenMP/Eigen kernels on shapes the model actually hits.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cmsep/kernels.hpp"

namespace k = cmsep::kernels;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d;
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// args: channels in, channels out, height, width, kernel
k::ConvGeometry geometry(const benchmark::State& s) {
  return k::conv_geometry(s.range(0), s.range(1), s.range(2), s.range(3), s.range(4), 1,
                          k::Padding::Same);
}

struct ConvData {
  k::ConvGeometry g;
  std::vector<float> in, w, b, out;
  explicit ConvData(const k::ConvGeometry& geo)
      : g(geo),
        in(noise(g.in_channels * g.in_h * g.in_w, 1)),
        w(noise(g.out_channels * g.in_channels * g.kernel * g.kernel, 2)),
        b(noise(g.out_channels, 3)),
        out(noise(g.out_channels * g.out_h * g.out_w, 4)) {}
};

template <bool Parallel>
void conv_forward(benchmark::State& state) {
  ConvData d(geometry(state));
  std::vector<float> y(d.out.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::conv2d_forward(d.g, d.in.data(), d.w.data(), d.b.data(), y.data());
    else
      k::serial::conv2d_forward(d.g, d.in.data(), d.w.data(), d.b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void conv_backward(benchmark::State& state) {
  ConvData d(geometry(state));
  std::vector<float> gi(d.in.size()), gw(d.w.size()), gb(d.b.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv2d_backward_input(d.g, d.out.data(), d.w.data(), gi.data());
      k::parallel::conv2d_backward_weights(d.g, d.in.data(), d.out.data(), gw.data(), gb.data());
    } else {
      k::serial::conv2d_backward_input(d.g, d.out.data(), d.w.data(), gi.data());
      k::serial::conv2d_backward_weights(d.g, d.in.data(), d.out.data(), gw.data(), gb.data());
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = noise(n * n, 5), b = noise(n * n, 6);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::gemm(false, true, n, n, n, a.data(), b.data(), c.data(), false);
    else
      k::serial::gemm(false, true, n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
}

void conv_shapes(benchmark::internal::Benchmark* b) {
  b->Args({2, 16, 129, 96, 3})
      ->Args({48, 16, 64, 48, 3})
      ->Args({96, 96, 32, 24, 1})
      ->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(conv_forward<false>)->Name("conv_forward/serial")->Apply(conv_shapes);
BENCHMARK(conv_forward<true>)->Name("conv_forward/parallel")->Apply(conv_shapes);
BENCHMARK(conv_backward<false>)->Name("conv_backward/serial")->Apply(conv_shapes);
BENCHMARK(conv_backward<true>)->Name("conv_backward/parallel")->Apply(conv_shapes);
BENCHMARK(gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(gemm<true>)->Name("gemm/parallel")->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();

// Serial reference vs OpenMP kernels on CDAE-sized feature maps.
// Args: {height, width}; 4 channels in and out, 3x3 kernel.

#include <benchmark/benchmark.h>

#include <vector>

#include "cdae/kernels.hpp"
#include "cdae/rng.hpp"

namespace {

using cdae::kernels::ConvDims;
using cdae::kernels::Exec;

struct Buffers {
  ConvDims d;
  std::vector<double> in, w, b, out;

  explicit Buffers(const benchmark::State& state)
      : d{4, 4, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), 3},
        in(d.input_size()), w(d.weight_size()), b(d.out_channels), out(d.output_size()) {
    cdae::Rng rng(1);
    for (auto& v : in) v = rng.uniform(-1, 1);
    for (auto& v : w) v = rng.uniform(-1, 1);
  }
};

template <Exec kExec>
void BM_ConvForward(benchmark::State& state) {
  Buffers buf(state);
  for (auto _ : state) {
    cdae::kernels::conv2d_forward(kExec, buf.d, buf.in, buf.w, buf.b, buf.out);
    benchmark::DoNotOptimize(buf.out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(buf.d.output_size()));
}

template <Exec kExec>
void BM_ConvBackward(benchmark::State& state) {
  Buffers buf(state);
  std::vector<double> gin(buf.d.input_size()), gw(buf.d.weight_size()), gb(buf.d.out_channels);
  for (auto _ : state) {
    cdae::kernels::conv2d_backward_input(kExec, buf.d, buf.out, buf.w, gin);
    cdae::kernels::conv2d_backward_weights(kExec, buf.d, buf.in, buf.out, gw, gb);
    benchmark::DoNotOptimize(gin.data());
    benchmark::DoNotOptimize(gw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(buf.d.output_size()));
}

template <Exec kExec>
void BM_PoolUnpool(benchmark::State& state) {
  const cdae::kernels::PlaneDims d{4, static_cast<std::size_t>(state.range(0)),
                                   static_cast<std::size_t>(state.range(1))};
  std::vector<double> in(d.full_size(), 0.5), half(d.half_size()), up(d.full_size());
  std::vector<std::uint8_t> sw(d.half_size());
  for (auto _ : state) {
    cdae::kernels::maxpool2x2_forward(kExec, d, in, half, sw);
    cdae::kernels::unpool2x2_forward(kExec, d, half, up);
    benchmark::DoNotOptimize(up.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<Exec::kSerial>)->Args({96, 48})->Args({240, 120})->Args({960, 480});
BENCHMARK(BM_ConvForward<Exec::kParallel>)->Args({96, 48})->Args({240, 120})->Args({960, 480});
BENCHMARK(BM_ConvBackward<Exec::kSerial>)->Args({96, 48})->Args({240, 120});
BENCHMARK(BM_ConvBackward<Exec::kParallel>)->Args({96, 48})->Args({240, 120});
BENCHMARK(BM_PoolUnpool<Exec::kSerial>)->Args({960, 480});
BENCHMARK(BM_PoolUnpool<Exec::kParallel>)->Args({960, 480});

BENCHMARK_MAIN();

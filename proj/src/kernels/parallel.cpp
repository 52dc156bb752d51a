#include <algorithm>

#include "cdae/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cdae::kernels {

namespace {
int g_workers = 0;  // 0: OpenMP default
}

void set_worker_count(int workers) {
  g_workers = std::max(0, workers);
#ifdef _OPENMP
  if (g_workers > 0) omp_set_num_threads(g_workers);
#endif
}

int worker_count() {
#ifdef _OPENMP
  return g_workers > 0 ? g_workers : omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

// Loop variables are signed for OpenMP; each output element sees the same
// term order as in kernels::serial.

void conv2d_forward(const ConvDims& d, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output) {
  const std::ptrdiff_t F = d.out_channels, C = d.in_channels, H = d.height, W = d.width,
                       K = d.kernel, pad = K / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t f = 0; f < F; ++f) {
    for (std::ptrdiff_t y = 0; y < H; ++y) {
      double* orow = output.data() + (f * H + y) * W;
      std::fill(orow, orow + W, bias[f]);
      for (std::ptrdiff_t c = 0; c < C; ++c) {
        for (std::ptrdiff_t dy = 0; dy < K; ++dy) {
          const std::ptrdiff_t iy = y + dy - pad;
          if (iy < 0 || iy >= H) continue;
          const double* irow = input.data() + (c * H + iy) * W;
          for (std::ptrdiff_t dx = 0; dx < K; ++dx) {
            const std::ptrdiff_t sx = dx - pad;
            const double w = weights[((f * C + c) * K + dy) * K + dx];
            const std::ptrdiff_t xb = std::max<std::ptrdiff_t>(0, -sx);
            const std::ptrdiff_t xe = std::min<std::ptrdiff_t>(W, W - sx);
            for (std::ptrdiff_t x = xb; x < xe; ++x) orow[x] += w * irow[x + sx];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvDims& d, std::span<const double> grad_output,
                           std::span<const double> weights, std::span<double> grad_input) {
  const std::ptrdiff_t F = d.out_channels, C = d.in_channels, H = d.height, W = d.width,
                       K = d.kernel, pad = K / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t c = 0; c < C; ++c) {
    for (std::ptrdiff_t iy = 0; iy < H; ++iy) {
      double* irow = grad_input.data() + (c * H + iy) * W;
      std::fill(irow, irow + W, 0.0);
      for (std::ptrdiff_t f = 0; f < F; ++f) {
        for (std::ptrdiff_t dy = 0; dy < K; ++dy) {
          const std::ptrdiff_t y = iy - (dy - pad);
          if (y < 0 || y >= H) continue;
          const double* grow = grad_output.data() + (f * H + y) * W;
          for (std::ptrdiff_t dx = 0; dx < K; ++dx) {
            const std::ptrdiff_t sx = dx - pad;
            const double w = weights[((f * C + c) * K + dy) * K + dx];
            // grad_input[x + sx] += w * grad_output[x] over valid output x.
            const std::ptrdiff_t xb = std::max<std::ptrdiff_t>(0, -sx);
            const std::ptrdiff_t xe = std::min<std::ptrdiff_t>(W, W - sx);
            for (std::ptrdiff_t x = xb; x < xe; ++x) irow[x + sx] += w * grow[x];
          }
        }
      }
    }
  }
}

void conv2d_backward_weights(const ConvDims& d, std::span<const double> input,
                             std::span<const double> grad_output, std::span<double> grad_weights,
                             std::span<double> grad_bias) {
  const std::ptrdiff_t F = d.out_channels, C = d.in_channels, H = d.height, W = d.width,
                       K = d.kernel, pad = K / 2, plane = H * W;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < F; ++f) {
    const double* gout = grad_output.data() + f * plane;
    double b = 0.0;
    for (std::ptrdiff_t i = 0; i < plane; ++i) b += gout[i];
    grad_bias[f] = b;
  }
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t f = 0; f < F; ++f) {
    for (std::ptrdiff_t c = 0; c < C; ++c) {
      const double* gout = grad_output.data() + f * plane;
      const double* in = input.data() + c * plane;
      for (std::ptrdiff_t dy = 0; dy < K; ++dy) {
        const std::ptrdiff_t sy = dy - pad;
        const std::ptrdiff_t yb = std::max<std::ptrdiff_t>(0, -sy);
        const std::ptrdiff_t ye = std::min<std::ptrdiff_t>(H, H - sy);
        for (std::ptrdiff_t dx = 0; dx < K; ++dx) {
          const std::ptrdiff_t sx = dx - pad;
          const std::ptrdiff_t xb = std::max<std::ptrdiff_t>(0, -sx);
          const std::ptrdiff_t xe = std::min<std::ptrdiff_t>(W, W - sx);
          double acc = 0.0;
          for (std::ptrdiff_t y = yb; y < ye; ++y) {
            const double* grow = gout + y * W;
            const double* irow = in + (y + sy) * W + sx;
            for (std::ptrdiff_t x = xb; x < xe; ++x) acc += grow[x] * irow[x];
          }
          grad_weights[((f * C + c) * K + dy) * K + dx] = acc;
        }
      }
    }
  }
}

void maxpool2x2_forward(const PlaneDims& d, std::span<const double> input,
                        std::span<double> output, std::span<std::uint8_t> switches) {
  const std::ptrdiff_t rows = d.channels * (d.height / 2), w = d.width / 2, W = d.width;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const double* top = input.data() + 2 * r * W;
    const double* bottom = top + W;
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      const double cand[4] = {top[2 * j], top[2 * j + 1], bottom[2 * j], bottom[2 * j + 1]};
      std::uint8_t arg = 0;
      for (std::uint8_t k = 1; k < 4; ++k) {
        if (cand[k] > cand[arg]) arg = k;
      }
      output[r * w + j] = cand[arg];
      switches[r * w + j] = arg;
    }
  }
}

void maxpool2x2_backward(const PlaneDims& d, std::span<const std::uint8_t> switches,
                         std::span<const double> grad_output, std::span<double> grad_input) {
  const std::ptrdiff_t rows = d.channels * (d.height / 2), w = d.width / 2, W = d.width;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double* top = grad_input.data() + 2 * r * W;
    std::fill(top, top + 2 * W, 0.0);
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      const std::uint8_t s = switches[r * w + j];
      top[(s >> 1) * W + 2 * j + (s & 1)] = grad_output[r * w + j];
    }
  }
}

void unpool2x2_forward(const PlaneDims& d, std::span<const double> input,
                       std::span<double> output) {
  const std::ptrdiff_t rows = d.channels * (d.height / 2), w = d.width / 2, W = d.width;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double* top = output.data() + 2 * r * W;
    double* bottom = top + W;
    const double* in = input.data() + r * w;
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      top[2 * j] = top[2 * j + 1] = bottom[2 * j] = bottom[2 * j + 1] = in[j];
    }
  }
}

void unpool2x2_backward(const PlaneDims& d, std::span<const double> grad_output,
                        std::span<double> grad_input) {
  const std::ptrdiff_t rows = d.channels * (d.height / 2), w = d.width / 2, W = d.width;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const double* top = grad_output.data() + 2 * r * W;
    const double* bottom = top + W;
    double* out = grad_input.data() + r * w;
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      out[j] = top[2 * j] + top[2 * j + 1] + bottom[2 * j] + bottom[2 * j + 1];
    }
  }
}

}  // namespace parallel

#define CDAE_DISPATCH(name, ...) \
  (exec == Exec::kSerial ? serial::name(__VA_ARGS__) : parallel::name(__VA_ARGS__))

void conv2d_forward(Exec exec, const ConvDims& d, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output) {
  CDAE_DISPATCH(conv2d_forward, d, input, weights, bias, output);
}
void conv2d_backward_input(Exec exec, const ConvDims& d, std::span<const double> grad_output,
                           std::span<const double> weights, std::span<double> grad_input) {
  CDAE_DISPATCH(conv2d_backward_input, d, grad_output, weights, grad_input);
}
void conv2d_backward_weights(Exec exec, const ConvDims& d, std::span<const double> input,
                             std::span<const double> grad_output, std::span<double> grad_weights,
                             std::span<double> grad_bias) {
  CDAE_DISPATCH(conv2d_backward_weights, d, input, grad_output, grad_weights, grad_bias);
}
void maxpool2x2_forward(Exec exec, const PlaneDims& d, std::span<const double> input,
                        std::span<double> output, std::span<std::uint8_t> switches) {
  CDAE_DISPATCH(maxpool2x2_forward, d, input, output, switches);
}
void maxpool2x2_backward(Exec exec, const PlaneDims& d, std::span<const std::uint8_t> switches,
                         std::span<const double> grad_output, std::span<double> grad_input) {
  CDAE_DISPATCH(maxpool2x2_backward, d, switches, grad_output, grad_input);
}
void unpool2x2_forward(Exec exec, const PlaneDims& d, std::span<const double> input,
                       std::span<double> output) {
  CDAE_DISPATCH(unpool2x2_forward, d, input, output);
}
void unpool2x2_backward(Exec exec, const PlaneDims& d, std::span<const double> grad_output,
                        std::span<double> grad_input) {
  CDAE_DISPATCH(unpool2x2_backward, d, grad_output, grad_input);
}

#undef CDAE_DISPATCH

}  // namespace cdae::kernels

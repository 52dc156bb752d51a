#include <algorithm>

#include "cdae/kernels.hpp"

namespace cdae::kernels::serial {

namespace {

// Output rows/cols y for which y + tap - pad lies inside [0, extent).
struct Range {
  std::ptrdiff_t begin;
  std::ptrdiff_t end;
};

Range valid_range(std::size_t extent, std::size_t tap, std::size_t pad) {
  const auto n = static_cast<std::ptrdiff_t>(extent);
  const auto shift = static_cast<std::ptrdiff_t>(tap) - static_cast<std::ptrdiff_t>(pad);
  return {std::max<std::ptrdiff_t>(0, -shift), std::min<std::ptrdiff_t>(n, n - shift)};
}

}  // namespace

void conv2d_forward(const ConvDims& d, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output) {
  const std::size_t H = d.height, W = d.width, K = d.kernel, pad = K / 2, plane = H * W;
  for (std::size_t f = 0; f < d.out_channels; ++f) {
    double* out = output.data() + f * plane;
    std::fill(out, out + plane, bias[f]);
    for (std::size_t c = 0; c < d.in_channels; ++c) {
      const double* in = input.data() + c * plane;
      for (std::size_t dy = 0; dy < K; ++dy) {
        const auto ry = valid_range(H, dy, pad);
        for (std::size_t dx = 0; dx < K; ++dx) {
          const auto rx = valid_range(W, dx, pad);
          const double w = weights[((f * d.in_channels + c) * K + dy) * K + dx];
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(dy) - static_cast<std::ptrdiff_t>(pad);
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(dx) - static_cast<std::ptrdiff_t>(pad);
          for (auto y = ry.begin; y < ry.end; ++y) {
            double* orow = out + y * static_cast<std::ptrdiff_t>(W);
            const double* irow = in + (y + sy) * static_cast<std::ptrdiff_t>(W) + sx;
            for (auto x = rx.begin; x < rx.end; ++x) orow[x] += w * irow[x];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvDims& d, std::span<const double> grad_output,
                           std::span<const double> weights, std::span<double> grad_input) {
  const std::size_t H = d.height, W = d.width, K = d.kernel, pad = K / 2, plane = H * W;
  std::fill(grad_input.begin(), grad_input.begin() + d.input_size(), 0.0);
  for (std::size_t c = 0; c < d.in_channels; ++c) {
    double* gin = grad_input.data() + c * plane;
    for (std::size_t f = 0; f < d.out_channels; ++f) {
      const double* gout = grad_output.data() + f * plane;
      for (std::size_t dy = 0; dy < K; ++dy) {
        const auto ry = valid_range(H, dy, pad);
        for (std::size_t dx = 0; dx < K; ++dx) {
          const auto rx = valid_range(W, dx, pad);
          const double w = weights[((f * d.in_channels + c) * K + dy) * K + dx];
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(dy) - static_cast<std::ptrdiff_t>(pad);
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(dx) - static_cast<std::ptrdiff_t>(pad);
          for (auto y = ry.begin; y < ry.end; ++y) {
            const double* grow = gout + y * static_cast<std::ptrdiff_t>(W);
            double* irow = gin + (y + sy) * static_cast<std::ptrdiff_t>(W) + sx;
            for (auto x = rx.begin; x < rx.end; ++x) irow[x] += w * grow[x];
          }
        }
      }
    }
  }
}

void conv2d_backward_weights(const ConvDims& d, std::span<const double> input,
                             std::span<const double> grad_output, std::span<double> grad_weights,
                             std::span<double> grad_bias) {
  const std::size_t H = d.height, W = d.width, K = d.kernel, pad = K / 2, plane = H * W;
  for (std::size_t f = 0; f < d.out_channels; ++f) {
    const double* gout = grad_output.data() + f * plane;
    double b = 0.0;
    for (std::size_t i = 0; i < plane; ++i) b += gout[i];
    grad_bias[f] = b;
    for (std::size_t c = 0; c < d.in_channels; ++c) {
      const double* in = input.data() + c * plane;
      for (std::size_t dy = 0; dy < K; ++dy) {
        const auto ry = valid_range(H, dy, pad);
        for (std::size_t dx = 0; dx < K; ++dx) {
          const auto rx = valid_range(W, dx, pad);
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(dy) - static_cast<std::ptrdiff_t>(pad);
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(dx) - static_cast<std::ptrdiff_t>(pad);
          double acc = 0.0;
          for (auto y = ry.begin; y < ry.end; ++y) {
            const double* grow = gout + y * static_cast<std::ptrdiff_t>(W);
            const double* irow = in + (y + sy) * static_cast<std::ptrdiff_t>(W) + sx;
            for (auto x = rx.begin; x < rx.end; ++x) acc += grow[x] * irow[x];
          }
          grad_weights[((f * d.in_channels + c) * K + dy) * K + dx] = acc;
        }
      }
    }
  }
}

void maxpool2x2_forward(const PlaneDims& d, std::span<const double> input,
                        std::span<double> output, std::span<std::uint8_t> switches) {
  const std::size_t h = d.height / 2, w = d.width / 2;
  for (std::size_t c = 0; c < d.channels; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double* top = input.data() + (c * d.height + 2 * i) * d.width + 2 * j;
        const double* bottom = top + d.width;
        const double cand[4] = {top[0], top[1], bottom[0], bottom[1]};
        std::uint8_t arg = 0;
        for (std::uint8_t k = 1; k < 4; ++k) {
          if (cand[k] > cand[arg]) arg = k;
        }
        const std::size_t o = (c * h + i) * w + j;
        output[o] = cand[arg];
        switches[o] = arg;
      }
    }
  }
}

void maxpool2x2_backward(const PlaneDims& d, std::span<const std::uint8_t> switches,
                         std::span<const double> grad_output, std::span<double> grad_input) {
  const std::size_t h = d.height / 2, w = d.width / 2;
  std::fill(grad_input.begin(), grad_input.begin() + d.full_size(), 0.0);
  for (std::size_t c = 0; c < d.channels; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t o = (c * h + i) * w + j;
        const std::size_t dy = switches[o] >> 1, dx = switches[o] & 1;
        grad_input[(c * d.height + 2 * i + dy) * d.width + 2 * j + dx] = grad_output[o];
      }
    }
  }
}

void unpool2x2_forward(const PlaneDims& d, std::span<const double> input,
                       std::span<double> output) {
  const std::size_t h = d.height / 2, w = d.width / 2;
  for (std::size_t c = 0; c < d.channels; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      double* top = output.data() + (c * d.height + 2 * i) * d.width;
      double* bottom = top + d.width;
      const double* in = input.data() + (c * h + i) * w;
      for (std::size_t j = 0; j < w; ++j) {
        top[2 * j] = top[2 * j + 1] = bottom[2 * j] = bottom[2 * j + 1] = in[j];
      }
    }
  }
}

void unpool2x2_backward(const PlaneDims& d, std::span<const double> grad_output,
                        std::span<double> grad_input) {
  const std::size_t h = d.height / 2, w = d.width / 2;
  for (std::size_t c = 0; c < d.channels; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      const double* top = grad_output.data() + (c * d.height + 2 * i) * d.width;
      const double* bottom = top + d.width;
      double* out = grad_input.data() + (c * h + i) * w;
      for (std::size_t j = 0; j < w; ++j) {
        out[j] = top[2 * j] + top[2 * j + 1] + bottom[2 * j] + bottom[2 * j + 1];
      }
    }
  }
}

}  // namespace cdae::kernels::serial

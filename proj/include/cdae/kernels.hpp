#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Raw 2-D kernels over row-major [C,H,W] buffers.
//
// Every kernel exists twice: a serial reference in kernels::serial and an
// OpenMP version in kernels::parallel. Both accumulate each output element in
// the same term order, so their results are bit-identical; the tests rely on
// that.
namespace cdae::kernels {

enum class Exec { kSerial, kParallel };

/// Stride-1 "same" convolution (cross-correlation) with an odd square kernel.
struct ConvDims {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t height;
  std::size_t width;
  std::size_t kernel;

  std::size_t input_size() const { return in_channels * height * width; }
  std::size_t output_size() const { return out_channels * height * width; }
  std::size_t weight_size() const { return out_channels * in_channels * kernel * kernel; }
};

/// Plane geometry for the 2x2 pool/unpool kernels; height/width are of the larger side.
struct PlaneDims {
  std::size_t channels;
  std::size_t height;
  std::size_t width;

  std::size_t full_size() const { return channels * height * width; }
  std::size_t half_size() const { return channels * (height / 2) * (width / 2); }
};

#define CDAE_KERNEL_DECLS                                                                            \
  void conv2d_forward(const ConvDims& d, std::span<const double> input,                             \
                      std::span<const double> weights, std::span<const double> bias,                \
                      std::span<double> output);                                                    \
  void conv2d_backward_input(const ConvDims& d, std::span<const double> grad_output,                \
                             std::span<const double> weights, std::span<double> grad_input);        \
  void conv2d_backward_weights(const ConvDims& d, std::span<const double> input,                    \
                               std::span<const double> grad_output, std::span<double> grad_weights, \
                               std::span<double> grad_bias);                                        \
  void maxpool2x2_forward(const PlaneDims& d, std::span<const double> input,                        \
                          std::span<double> output, std::span<std::uint8_t> switches);              \
  void maxpool2x2_backward(const PlaneDims& d, std::span<const std::uint8_t> switches,              \
                           std::span<const double> grad_output, std::span<double> grad_input);      \
  void unpool2x2_forward(const PlaneDims& d, std::span<const double> input,                         \
                         std::span<double> output);                                                 \
  void unpool2x2_backward(const PlaneDims& d, std::span<const double> grad_output,                  \
                          std::span<double> grad_input);

namespace serial {
CDAE_KERNEL_DECLS
}  // namespace serial

namespace parallel {
CDAE_KERNEL_DECLS
}  // namespace parallel

#undef CDAE_KERNEL_DECLS

// Dispatchers.
void conv2d_forward(Exec exec, const ConvDims& d, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output);
void conv2d_backward_input(Exec exec, const ConvDims& d, std::span<const double> grad_output,
                           std::span<const double> weights, std::span<double> grad_input);
void conv2d_backward_weights(Exec exec, const ConvDims& d, std::span<const double> input,
                             std::span<const double> grad_output, std::span<double> grad_weights,
                             std::span<double> grad_bias);
void maxpool2x2_forward(Exec exec, const PlaneDims& d, std::span<const double> input,
                        std::span<double> output, std::span<std::uint8_t> switches);
void maxpool2x2_backward(Exec exec, const PlaneDims& d, std::span<const std::uint8_t> switches,
                         std::span<const double> grad_output, std::span<double> grad_input);
void unpool2x2_forward(Exec exec, const PlaneDims& d, std::span<const double> input,
                       std::span<double> output);
void unpool2x2_backward(Exec exec, const PlaneDims& d, std::span<const double> grad_output,
                        std::span<double> grad_input);

/// Worker count used by parallel kernels and data-parallel loops (OpenMP threads).
void set_worker_count(int workers);
int worker_count();

}  // namespace cdae::kernels

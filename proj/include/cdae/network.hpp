#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cdae/layers.hpp"
#include "cdae/rng.hpp"
#include "cdae/tensor.hpp"

namespace cdae {

struct CdaeConfig {
  std::size_t input_height = 960;
  std::size_t input_width = 480;
  std::size_t num_pool_stages = 4;
  std::size_t feature_maps = 4;
  std::size_t kernel_size = 3;
  double denoising_rate = 0.20;
  double lr_initial = 0.05;
  double lr_decay = 0.9;
  std::size_t epochs = 30;
  std::size_t minibatch_size = 8;
  bool tied_weights = false;
  std::uint64_t seed = 42;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  std::size_t code_height() const { return input_height >> num_pool_stages; }
  std::size_t code_width() const { return input_width >> num_pool_stages; }
  std::size_t code_length() const { return code_height() * code_width(); }
  double learning_rate(std::size_t epoch) const;

  friend bool operator==(const CdaeConfig&, const CdaeConfig&) = default;
};

enum class LayerKind { kConv, kDeconv, kMaxPool, kUnpool, kRelu, kTanh };

const char* to_string(LayerKind kind);

/// One item of the layer plan. `param` indexes Network::convs() or
/// Network::deconvs() for the two parametric kinds and is unused otherwise.
struct LayerEntry {
  LayerKind kind;
  std::size_t param = 0;

  friend bool operator==(const LayerEntry&, const LayerEntry&) = default;
};

/// Per-sample forward record used by Network::backward.
struct Trace {
  using Cache = std::variant<std::monostate, nn::ConvCache, nn::PoolSwitches, nn::ActivationCache>;
  std::vector<Cache> caches;
};

/// Gradient of the loss w.r.t. every parameter of a Network. Tied deconv
/// layers have no weight entry of their own; their contribution is folded into
/// the source conv layer's entry.
struct NetworkGradients {
  std::vector<Tensor> conv_weights;
  std::vector<Tensor> conv_bias;
  std::vector<Tensor> deconv_weights;
  std::vector<Tensor> deconv_bias;

  void add(const NetworkGradients& other);
  void scale(double s);
};

class Network {
 public:
  /// Builds the layer plan for `config` and initializes all weights from config.seed.
  static Network build(const CdaeConfig& config);

  const CdaeConfig& config() const noexcept { return config_; }
  const std::vector<LayerEntry>& layers() const noexcept { return layers_; }
  /// Index into layers() of the last encoder item (the activation after the
  /// single-filter bottleneck conv).
  std::size_t encoder_boundary() const noexcept { return encoder_boundary_; }

  std::vector<nn::ConvLayer>& convs() noexcept { return convs_; }
  const std::vector<nn::ConvLayer>& convs() const noexcept { return convs_; }
  std::vector<nn::DeconvLayer>& deconvs() noexcept { return deconvs_; }
  const std::vector<nn::DeconvLayer>& deconvs() const noexcept { return deconvs_; }
  /// Index of the conv a tied deconv mirrors.
  std::optional<std::size_t> tied_source(std::size_t deconv) const { return tie_map_.at(deconv); }

  std::size_t parameter_count() const;

  /// Full reconstruction (input shape in, input shape out).
  Tensor reconstruct(const Tensor& image, nn::Exec exec = nn::Exec::kParallel) const;
  /// Row-major flattened encoder output; length config().code_length().
  std::vector<double> encode(const Tensor& image, nn::Exec exec = nn::Exec::kParallel) const;

  Tensor forward(const Tensor& input, Trace& trace, nn::Exec exec = nn::Exec::kSerial) const;
  NetworkGradients backward(const Trace& trace, const Tensor& grad_output,
                            nn::Exec exec = nn::Exec::kSerial) const;
  NetworkGradients zero_gradients() const;
  /// Plain SGD step; throws DivergenceError if any parameter becomes non-finite.
  void apply(const NetworkGradients& grads, double lr);

  bool all_finite() const;

 private:
  Network() = default;
  void require_input(const Tensor& image) const;
  Tensor run(const Tensor& input, std::size_t last_layer, Trace* trace, nn::Exec exec) const;
  const nn::ConvLayer* source_of(std::size_t deconv) const;

  CdaeConfig config_;
  std::vector<LayerEntry> layers_;
  std::size_t encoder_boundary_ = 0;
  std::vector<nn::ConvLayer> convs_;
  std::vector<nn::DeconvLayer> deconvs_;
  std::vector<std::optional<std::size_t>> tie_map_;
};

/// Copy of `image` with exactly round(rate * N) distinct pixels, drawn uniformly
/// without replacement, set to zero.
Tensor corrupt(const Tensor& image, double rate, Rng& rng);

/// Loss 0.5 * mean((output - target)^2) and its gradient w.r.t. output.
double reconstruction_loss(const Tensor& output, const Tensor& target, Tensor* grad = nullptr);

struct LossHistory {
  std::vector<double> mean_loss;
  std::vector<double> learning_rate;

  std::size_t epochs() const { return mean_loss.size(); }
  friend bool operator==(const LossHistory&, const LossHistory&) = default;
};

struct TrainOptions {
  /// Called after each epoch with (epoch, lr, mean loss).
  std::function<void(std::size_t, double, double)> on_epoch;
};

/// Epoch mean loss above this multiple of the all-zero reconstruction's loss
/// is reported as divergence.
inline constexpr double kDivergenceLossFactor = 4.0;

/// SGD on corrupted inputs against the clean images, which must already be
/// normalized and match the configured input size. Minibatch gradients are
/// averaged and reduced in sample order, so results do not depend on the
/// worker count. Throws DivergenceError on a non-finite loss or parameter, or
/// when an epoch's mean loss exceeds kDivergenceLossFactor times the loss of
/// predicting all zeros.
LossHistory train(Network& network, std::span<const Tensor> images,
                  const TrainOptions& options = {});

}  // namespace cdae

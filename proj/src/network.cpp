#include "cdae/network.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "cdae/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cdae {

void CdaeConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid CDAE config: " + msg); };
  if (input_height == 0 || input_width == 0) fail("input dimensions must be positive");
  if (num_pool_stages == 0 || num_pool_stages > 16) fail("num_pool_stages must be in [1,16]");
  const std::size_t div = std::size_t{1} << num_pool_stages;
  if (input_height % div != 0 || input_width % div != 0) {
    std::ostringstream os;
    os << "input " << input_height << "x" << input_width << " not divisible by 2^"
       << num_pool_stages;
    fail(os.str());
  }
  if (feature_maps == 0) fail("feature_maps must be positive");
  if (kernel_size == 0 || kernel_size % 2 == 0) fail("kernel_size must be odd");
  if (!(denoising_rate >= 0.0 && denoising_rate <= 1.0)) fail("denoising_rate must be in [0,1]");
  if (!(lr_initial >= 0.0) || !std::isfinite(lr_initial)) fail("lr_initial must be finite and non-negative");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay must be in (0,1]");
  if (minibatch_size == 0) fail("minibatch_size must be positive");
}

double CdaeConfig::learning_rate(std::size_t epoch) const {
  return lr_initial * std::pow(lr_decay, static_cast<double>(epoch));
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kDeconv: return "deconv";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kUnpool: return "unpool";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kTanh: return "tanh";
  }
  return "?";
}

void NetworkGradients::add(const NetworkGradients& other) {
  auto add_all = [](std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) axpy(1.0, b[i], a[i]);
  };
  add_all(conv_weights, other.conv_weights);
  add_all(conv_bias, other.conv_bias);
  add_all(deconv_weights, other.deconv_weights);
  add_all(deconv_bias, other.deconv_bias);
}

void NetworkGradients::scale(double s) {
  for (auto* group : {&conv_weights, &conv_bias, &deconv_weights, &deconv_bias})
    for (auto& t : *group)
      for (auto& v : t.values()) v *= s;
}

Network Network::build(const CdaeConfig& config) {
  config.validate();
  Network net;
  net.config_ = config;
  const std::size_t F = config.feature_maps, K = config.kernel_size, P = config.num_pool_stages;

  auto add_conv = [&](std::size_t in, std::size_t out) {
    net.layers_.push_back({LayerKind::kConv, net.convs_.size()});
    net.convs_.emplace_back(in, out, K);
    net.layers_.push_back({LayerKind::kRelu});
  };
  auto add_deconv = [&](std::size_t in, std::size_t out, LayerKind activation) {
    net.layers_.push_back({LayerKind::kDeconv, net.deconvs_.size()});
    net.deconvs_.push_back(nn::DeconvLayer::learned(in, out, K));
    net.layers_.push_back({activation});
  };

  std::size_t channels = 1;
  for (std::size_t s = 0; s < P; ++s) {
    add_conv(channels, F);
    add_conv(F, F);
    net.layers_.push_back({LayerKind::kMaxPool});
    channels = F;
  }
  add_conv(F, F);
  add_conv(F, 1);
  net.encoder_boundary_ = net.layers_.size() - 1;

  channels = 1;
  for (std::size_t s = 0; s < P; ++s) {
    net.layers_.push_back({LayerKind::kUnpool});
    add_deconv(channels, F, LayerKind::kRelu);
    add_deconv(F, F, LayerKind::kRelu);
    channels = F;
  }
  add_deconv(F, 1, LayerKind::kTanh);

  // Tie map: first deconv <-> last conv, last deconv <-> first conv, middle
  // deconvs <-> convs in reverse order from the second-to-last. With 2P+2
  // convs and 2P+1 deconvs, conv 1 is left untied.
  const std::size_t n_conv = net.convs_.size(), n_deconv = net.deconvs_.size();
  net.tie_map_.assign(n_deconv, std::nullopt);
  if (config.tied_weights) {
    for (std::size_t j = 0; j < n_deconv; ++j) {
      const std::size_t src = (j == n_deconv - 1) ? 0 : n_conv - 1 - j;
      net.tie_map_[j] = src;
      net.deconvs_[j] = nn::DeconvLayer::tied_to(net.convs_[src]);
    }
  }

  Rng rng = Rng(config.seed).derive("init");
  for (auto& c : net.convs_) c.init_uniform(rng);
  for (auto& d : net.deconvs_) {
    if (!d.tied()) d.own().init_uniform(rng);
  }
  return net;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& c : convs_) n += c.weights().size() + c.bias().size();
  for (const auto& d : deconvs_) n += (d.tied() ? 0 : d.own().weights().size()) + d.own().bias().size();
  return n;
}

const nn::ConvLayer* Network::source_of(std::size_t deconv) const {
  const auto& src = tie_map_[deconv];
  return src ? &convs_[*src] : nullptr;
}

void Network::require_input(const Tensor& image) const {
  const Shape expected{1, config_.input_height, config_.input_width};
  if (image.shape() != expected) {
    throw ShapeError("network expects input " + cdae::to_string(expected) + ", got " +
                     cdae::to_string(image.shape()));
  }
}

Tensor Network::run(const Tensor& input, std::size_t last_layer, Trace* trace,
                    nn::Exec exec) const {
  require_input(input);
  if (trace) trace->caches.assign(last_layer + 1, std::monostate{});
  Tensor x = input;
  for (std::size_t i = 0; i <= last_layer; ++i) {
    const LayerEntry& e = layers_[i];
    switch (e.kind) {
      case LayerKind::kConv: {
        auto fwd = nn::conv_forward(convs_[e.param], x, exec);
        x = std::move(fwd.output);
        if (trace) trace->caches[i] = std::move(fwd.cache);
        break;
      }
      case LayerKind::kDeconv: {
        auto fwd = nn::deconv_forward(deconvs_[e.param], source_of(e.param), x, exec);
        x = std::move(fwd.output);
        if (trace) trace->caches[i] = std::move(fwd.cache);
        break;
      }
      case LayerKind::kMaxPool: {
        auto fwd = nn::maxpool2x2_forward(x, exec);
        x = std::move(fwd.output);
        if (trace) trace->caches[i] = std::move(fwd.switches);
        break;
      }
      case LayerKind::kUnpool:
        x = nn::unpool2x2_forward(x, exec);
        break;
      case LayerKind::kRelu:
      case LayerKind::kTanh: {
        auto cache = nn::activation_forward(
            e.kind == LayerKind::kRelu ? nn::Activation::kRelu : nn::Activation::kTanh, x);
        x = cache.output;
        if (trace) trace->caches[i] = std::move(cache);
        break;
      }
    }
  }
  return x;
}

Tensor Network::reconstruct(const Tensor& image, nn::Exec exec) const {
  return run(image, layers_.size() - 1, nullptr, exec);
}

std::vector<double> Network::encode(const Tensor& image, nn::Exec exec) const {
  Tensor code = run(image, encoder_boundary_, nullptr, exec);
  return {code.values().begin(), code.values().end()};
}

Tensor Network::forward(const Tensor& input, Trace& trace, nn::Exec exec) const {
  return run(input, layers_.size() - 1, &trace, exec);
}

NetworkGradients Network::zero_gradients() const {
  NetworkGradients g;
  for (const auto& c : convs_) {
    g.conv_weights.push_back(Tensor::zeros(c.weights().shape()));
    g.conv_bias.push_back(Tensor::zeros(c.bias().shape()));
  }
  for (const auto& d : deconvs_) {
    g.deconv_weights.push_back(Tensor::zeros(d.own().weights().shape()));
    g.deconv_bias.push_back(Tensor::zeros(d.own().bias().shape()));
  }
  return g;
}

NetworkGradients Network::backward(const Trace& trace, const Tensor& grad_output,
                                   nn::Exec exec) const {
  if (trace.caches.size() != layers_.size()) throw UsageError("backward: trace does not cover the network");
  NetworkGradients grads = zero_gradients();
  Tensor g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const LayerEntry& e = layers_[i];
    const auto& cache = trace.caches[i];
    switch (e.kind) {
      case LayerKind::kConv: {
        auto cg = nn::conv_backward(convs_[e.param], std::get<nn::ConvCache>(cache), g, exec);
        axpy(1.0, cg.weights, grads.conv_weights[e.param]);
        axpy(1.0, cg.bias, grads.conv_bias[e.param]);
        g = std::move(cg.input);
        break;
      }
      case LayerKind::kDeconv: {
        auto dg = nn::deconv_backward(deconvs_[e.param], source_of(e.param),
                                      std::get<nn::ConvCache>(cache), g, exec);
        if (const auto& src = tie_map_[e.param]) {
          axpy(1.0, dg.weights, grads.conv_weights[*src]);
        } else {
          axpy(1.0, dg.weights, grads.deconv_weights[e.param]);
        }
        axpy(1.0, dg.bias, grads.deconv_bias[e.param]);
        g = std::move(dg.input);
        break;
      }
      case LayerKind::kMaxPool:
        g = nn::maxpool2x2_backward(std::get<nn::PoolSwitches>(cache), g, exec);
        break;
      case LayerKind::kUnpool:
        g = nn::unpool2x2_backward(g, exec);
        break;
      case LayerKind::kRelu:
      case LayerKind::kTanh:
        g = nn::activation_backward(std::get<nn::ActivationCache>(cache), g);
        break;
    }
  }
  return grads;
}

bool Network::all_finite() const {
  for (const auto& c : convs_)
    if (!c.weights().all_finite() || !c.bias().all_finite()) return false;
  for (const auto& d : deconvs_)
    if (!d.own().weights().all_finite() || !d.own().bias().all_finite()) return false;
  return true;
}

void Network::apply(const NetworkGradients& grads, double lr) {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].apply_gradient(grads.conv_weights[i], grads.conv_bias[i], lr);
  }
  for (std::size_t i = 0; i < deconvs_.size(); ++i) {
    auto& own = deconvs_[i].own();
    if (deconvs_[i].tied()) {
      axpy(-lr, grads.deconv_bias[i], own.mutable_bias());
    } else {
      own.apply_gradient(grads.deconv_weights[i], grads.deconv_bias[i], lr);
    }
  }
  if (!all_finite()) throw DivergenceError("non-finite parameter after SGD update (lr " + std::to_string(lr) + ")");
}

Tensor corrupt(const Tensor& image, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("corruption rate must be in [0,1]");
  Tensor out = image;
  const std::size_t n = image.size();
  const auto m = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  if (m == 0) return out;
  if (m == n) {
    out.fill(0.0);
    return out;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
    out[idx[i]] = 0.0;
  }
  return out;
}

double reconstruction_loss(const Tensor& output, const Tensor& target, Tensor* grad) {
  require_same_shape(output, target, "reconstruction_loss");
  const double n = static_cast<double>(output.size());
  double acc = 0.0;
  if (grad) *grad = Tensor::zeros(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double r = output[i] - target[i];
    acc += r * r;
    if (grad) (*grad)[i] = r / n;
  }
  return 0.5 * acc / n;
}

LossHistory train(Network& network, std::span<const Tensor> images, const TrainOptions& options) {
  const CdaeConfig& cfg = network.config();
  LossHistory history;
  if (cfg.epochs == 0) return history;
  if (images.empty()) throw DataError("train: empty dataset");
  const Shape expected{1, cfg.input_height, cfg.input_width};
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != expected) {
      throw ShapeError("train: image " + std::to_string(i) + " has shape " +
                       to_string(images[i].shape()) + ", expected " + to_string(expected));
    }
  }

  // Loss of the all-zero reconstruction; an epoch far above it has diverged
  // even when saturated units keep every value finite.
  double zero_output_loss = 0.0;
  for (const auto& img : images) zero_output_loss += 0.5 * dot(img, img) / static_cast<double>(img.size());
  zero_output_loss /= static_cast<double>(images.size());

  Rng rng = Rng(cfg.seed).derive("train");
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate(epoch);
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch_size) {
      const std::size_t count = std::min(cfg.minibatch_size, order.size() - start);
      // Masks are drawn serially so the random stream is independent of scheduling.
      std::vector<Tensor> noisy(count);
      for (std::size_t b = 0; b < count; ++b) {
        noisy[b] = corrupt(images[order[start + b]], cfg.denoising_rate, rng);
      }
      std::vector<NetworkGradients> grads(count);
      std::vector<double> losses(count);

#pragma omp parallel for schedule(dynamic, 1)
      for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(count); ++b) {
        Trace trace;
        const Tensor& clean = images[order[start + b]];
        Tensor out = network.forward(noisy[b], trace, nn::Exec::kSerial);
        Tensor grad_out;
        losses[b] = reconstruction_loss(out, clean, &grad_out);
        grads[b] = network.backward(trace, grad_out, nn::Exec::kSerial);
      }

      for (std::size_t b = 0; b < count; ++b) {
        if (!std::isfinite(losses[b])) {
          throw DivergenceError("non-finite reconstruction loss at epoch " + std::to_string(epoch) +
                                ", sample " + std::to_string(order[start + b]) + " (lr " +
                                std::to_string(lr) + ")");
        }
        epoch_loss += losses[b];
      }
      NetworkGradients total = std::move(grads[0]);
      for (std::size_t b = 1; b < count; ++b) total.add(grads[b]);
      total.scale(1.0 / static_cast<double>(count));
      network.apply(total, lr);
    }

    const double mean_loss = epoch_loss / static_cast<double>(images.size());
    if (mean_loss > kDivergenceLossFactor * zero_output_loss && mean_loss > 0.0) {
      throw DivergenceError("epoch " + std::to_string(epoch) + " mean loss " + std::to_string(mean_loss) +
                            " exceeds " + std::to_string(kDivergenceLossFactor) +
                            "x the zero-output loss " + std::to_string(zero_output_loss) + " (lr " +
                            std::to_string(lr) + ")");
    }
    history.mean_loss.push_back(mean_loss);
    history.learning_rate.push_back(lr);
    if (options.on_epoch) options.on_epoch(epoch, lr, mean_loss);
  }
  return history;
}

}  // namespace cdae

#include "cdae/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "cdae/errors.hpp"
#include "cdae/io.hpp"

namespace cdae {

namespace {

constexpr char kMagic[4] = {'C', 'D', 'A', 'E'};
constexpr char kEnd[4] = {'E', 'N', 'D', '.'};

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void tensor(const Tensor& t) {
    u64(t.size());
    for (double v : t.values()) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{u8()} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool tag(const char (&expected)[4]) {
    need(4);
    const bool ok = std::memcmp(in_.data() + pos_, expected, 4) == 0;
    pos_ += 4;
    return ok;
  }
  void tensor_into(Tensor& t, const char* what) {
    const std::uint64_t n = u64();
    if (n != t.size()) {
      throw FormatError(std::string("checkpoint ") + what + " has " + std::to_string(n) +
                        " values, layer expects " + std::to_string(t.size()));
    }
    need(n * 8);
    for (auto& v : t.values()) v = f64();
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Network& network) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);

  const CdaeConfig& c = network.config();
  for (std::uint64_t v : {std::uint64_t{c.input_height}, std::uint64_t{c.input_width},
                          std::uint64_t{c.num_pool_stages}, std::uint64_t{c.feature_maps},
                          std::uint64_t{c.kernel_size}, std::uint64_t{c.epochs},
                          std::uint64_t{c.minibatch_size}, c.seed}) {
    w.u64(v);
  }
  w.f64(c.denoising_rate);
  w.f64(c.lr_initial);
  w.f64(c.lr_decay);
  w.u8(c.tied_weights ? 1 : 0);

  w.u32(static_cast<std::uint32_t>(network.encoder_boundary()));
  w.u32(static_cast<std::uint32_t>(network.layers().size()));
  for (const auto& e : network.layers()) w.u8(static_cast<std::uint8_t>(e.kind));

  w.u32(static_cast<std::uint32_t>(network.convs().size() + network.deconvs().size()));
  for (const auto& conv : network.convs()) {
    w.u8(0);
    w.u32(static_cast<std::uint32_t>(conv.in_channels()));
    w.u32(static_cast<std::uint32_t>(conv.out_channels()));
    w.u32(static_cast<std::uint32_t>(conv.kernel_size()));
    w.u32(static_cast<std::uint32_t>(-1));
    w.tensor(conv.weights());
    w.tensor(conv.bias());
  }
  for (std::size_t i = 0; i < network.deconvs().size(); ++i) {
    const auto& d = network.deconvs()[i];
    const auto src = network.tied_source(i);
    w.u8(d.tied() ? 2 : 1);
    w.u32(static_cast<std::uint32_t>(d.in_channels()));
    w.u32(static_cast<std::uint32_t>(d.out_channels()));
    w.u32(static_cast<std::uint32_t>(d.kernel_size()));
    w.u32(src ? static_cast<std::uint32_t>(*src) : static_cast<std::uint32_t>(-1));
    if (d.tied()) {
      w.u64(0);
    } else {
      w.tensor(d.own().weights());
    }
    w.tensor(d.own().bias());
  }
  w.bytes(kEnd, 4);
  return w.take();
}

Network deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || !r.tag(kMagic)) throw FormatError("not a CDAE checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version > kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) +
                       " is newer than supported version " + std::to_string(kCheckpointVersion));
  }
  if (version == 0) throw FormatError("checkpoint format version 0 is invalid");

  CdaeConfig c;
  c.input_height = r.u64();
  c.input_width = r.u64();
  c.num_pool_stages = r.u64();
  c.feature_maps = r.u64();
  c.kernel_size = r.u64();
  c.epochs = r.u64();
  c.minibatch_size = r.u64();
  c.seed = r.u64();
  c.denoising_rate = r.f64();
  c.lr_initial = r.f64();
  c.lr_decay = r.f64();
  c.tied_weights = r.u8() != 0;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint holds an invalid config: ") + e.what());
  }

  Network net = Network::build(c);
  if (r.u32() != net.encoder_boundary()) throw FormatError("checkpoint encoder boundary mismatch");
  const std::uint32_t n_layers = r.u32();
  if (n_layers != net.layers().size()) throw FormatError("checkpoint layer plan length mismatch");
  for (const auto& e : net.layers()) {
    if (r.u8() != static_cast<std::uint8_t>(e.kind)) throw FormatError("checkpoint layer plan mismatch");
  }
  const std::uint32_t n_params = r.u32();
  if (n_params != net.convs().size() + net.deconvs().size()) {
    throw FormatError("checkpoint parametric layer count mismatch");
  }

  auto header = [&](std::uint8_t role, const nn::ConvLayer& layer, std::int64_t src) {
    const auto got_role = r.u8();
    const auto in = r.u32(), out = r.u32(), k = r.u32();
    const auto got_src = static_cast<std::int32_t>(r.u32());
    if (got_role != role || in != layer.in_channels() || out != layer.out_channels() ||
        k != layer.kernel_size() || got_src != src) {
      throw FormatError("checkpoint layer header does not match the configured architecture");
    }
  };
  for (auto& conv : net.convs()) {
    header(0, conv, -1);
    r.tensor_into(conv.mutable_weights(), "conv weights");
    r.tensor_into(conv.mutable_bias(), "conv bias");
  }
  for (std::size_t i = 0; i < net.deconvs().size(); ++i) {
    auto& d = net.deconvs()[i];
    const auto src = net.tied_source(i);
    header(d.tied() ? 2 : 1, d.own(), src ? static_cast<std::int64_t>(*src) : -1);
    if (d.tied()) {
      if (r.u64() != 0) throw FormatError("tied deconv must not carry weights");
    } else {
      r.tensor_into(d.own().mutable_weights(), "deconv weights");
    }
    r.tensor_into(d.own().mutable_bias(), "deconv bias");
  }
  if (!r.tag(kEnd)) throw FormatError("checkpoint end marker missing");
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint end marker");
  if (!net.all_finite()) throw FormatError("checkpoint contains non-finite weights");
  return net;
}

void save_checkpoint(const Network& network, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_checkpoint(network));
}

Network load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace cdae

#include "cdae/config.hpp"

#include <charconv>
#include <sstream>

#include "cdae/errors.hpp"
#include "cdae/io.hpp"

namespace cdae {

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::size_t line_no = 0;
  for (const auto& raw : io::split_lines(text)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    line = io::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = io::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    kv.values_[key] = io::trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse(text);
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  read_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? parse_number<double>(key, *v) : fallback;
}

std::size_t KeyValues::get_size(const std::string& key, std::size_t fallback) const {
  auto v = get(key);
  return v ? parse_number<std::size_t>(key, *v) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + *v + "'");
}

std::vector<double> KeyValues::get_doubles(const std::string& key,
                                           const std::vector<double>& fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& part : io::split(*v, ',')) out.push_back(parse_number<double>(key, io::trim(part)));
  return out;
}

std::vector<std::string> KeyValues::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!read_.count(k)) out.push_back(k);
  return out;
}

void KeyValues::reject_unused(const std::string& context) const {
  const auto keys = unused();
  if (keys.empty()) return;
  std::string msg = context + ": unknown config key(s):";
  for (const auto& k : keys) msg += " " + k;
  throw ConfigError(msg);
}

CdaeConfig cdae_config_from(const KeyValues& kv, CdaeConfig base) {
  CdaeConfig c = base;
  c.input_height = kv.get_size("input_height", c.input_height);
  c.input_width = kv.get_size("input_width", c.input_width);
  c.num_pool_stages = kv.get_size("num_pool_stages", c.num_pool_stages);
  c.feature_maps = kv.get_size("feature_maps", c.feature_maps);
  c.kernel_size = kv.get_size("kernel_size", c.kernel_size);
  c.denoising_rate = kv.get_double("denoising_rate", c.denoising_rate);
  c.lr_initial = kv.get_double("lr_initial", c.lr_initial);
  c.lr_decay = kv.get_double("lr_decay", c.lr_decay);
  c.epochs = kv.get_size("epochs", c.epochs);
  c.minibatch_size = kv.get_size("minibatch_size", c.minibatch_size);
  c.tied_weights = kv.get_bool("tied_weights", c.tied_weights);
  c.seed = kv.get_u64("seed", c.seed);
  return c;
}

std::string to_key_values(const CdaeConfig& c) {
  std::ostringstream os;
  os << "input_height = " << c.input_height << '\n'
     << "input_width = " << c.input_width << '\n'
     << "num_pool_stages = " << c.num_pool_stages << '\n'
     << "feature_maps = " << c.feature_maps << '\n'
     << "kernel_size = " << c.kernel_size << '\n'
     << "denoising_rate = " << io::format_double(c.denoising_rate) << '\n'
     << "lr_initial = " << io::format_double(c.lr_initial) << '\n'
     << "lr_decay = " << io::format_double(c.lr_decay) << '\n'
     << "epochs = " << c.epochs << '\n'
     << "minibatch_size = " << c.minibatch_size << '\n'
     << "tied_weights = " << (c.tied_weights ? "true" : "false") << '\n'
     << "seed = " << c.seed << '\n';
  return os.str();
}

}  // namespace cdae

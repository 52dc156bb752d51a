#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cdae/network.hpp"

namespace cdae {

/// `key = value` text config. '#' starts a comment; later keys override earlier ones.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  /// Keys never read through a getter.
  std::vector<std::string> unused() const;
  /// ConfigError listing unused keys, if any.
  void reject_unused(const std::string& context) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> read_;
};

/// Reads the CdaeConfig keys (input_height, input_width, num_pool_stages,
/// feature_maps, kernel_size, denoising_rate, lr_initial, lr_decay, epochs,
/// minibatch_size, tied_weights, seed) on top of `base`.
CdaeConfig cdae_config_from(const KeyValues& kv, CdaeConfig base = {});
std::string to_key_values(const CdaeConfig& config);

}  // namespace cdae

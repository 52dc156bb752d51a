#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cdae/network.hpp"

// Binary checkpoint layout, all integers and doubles little-endian:
//
//   char[4]  magic "CDAE"
//   u32      format version (kCheckpointVersion)
//   config:  u64 input_height, input_width, num_pool_stages, feature_maps,
//            kernel_size, epochs, minibatch_size, seed
//            f64 denoising_rate, lr_initial, lr_decay
//            u8  tied_weights
//   u32      encoder boundary (index into the layer plan)
//   u32      number of layer-plan entries, then one u8 LayerKind each
//   u32      number of parametric layers (convs, then deconvs), each:
//              u8  role (0 conv, 1 learned deconv, 2 tied deconv)
//              u32 in_channels, out_channels, kernel_size
//              i32 tied source conv index, -1 if none
//              u64 weight count, f64[weight count]  (0 for tied deconvs)
//              u64 bias count,   f64[bias count]
//   char[4]  end marker "END."
namespace cdae {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Network& network);
Network deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Network& network, const std::filesystem::path& path);
/// Throws FormatError on bad magic, truncation or layout mismatch, and
/// VersionError on files from a newer format version.
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace cdae

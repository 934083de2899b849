#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>

#include "reid/siamese.hpp"

namespace reid {

enum class Precision { kFloat32, kFloat64 };

/// Training and protocol settings, read from flat `key=value` text.
struct TrainConfig {
  double margin = 2.0;
  double lr = 1e-4;
  std::size_t epochs = 1100;
  std::size_t T = 16;
  std::size_t hops = 3;
  std::uint64_t seed = 0;
  Fusion fusion = Fusion::kLiteral;
  bool fc_tanh = true;
  bool temporal_bias = false;
  Precision precision = Precision::kFloat32;
  /// Frames of a test sequence used for its embedding.
  std::size_t test_max_frames = 128;
  /// Random crop and mirror of training sequences.
  bool augment = true;
  /// Repeated random splits in the evaluation protocol.
  std::size_t runs = 10;
  /// Rescales the whole gradient to this L2 norm when it is larger; 0 disables.
  double grad_clip = 5.0;

  ModelConfig model() const;

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;

  /// Assigns one key; unknown keys and malformed values throw.
  void set(const std::string& key, const std::string& value);
  /// Parses "key=value".
  void apply_override(const std::string& assignment);

  /// Canonical text form, one `key=value` per line in a fixed order.
  std::string to_text() const;
  /// FNV-1a of to_text(), as 16 hex digits.
  std::string hash() const;
};

/// Reads `key=value` lines; blank lines and lines starting with '#' are skipped.
TrainConfig parse_config(std::istream& in);
TrainConfig load_config(const std::filesystem::path& path);

const char* fusion_name(Fusion f);
Fusion parse_fusion(const std::string& name);

}  // namespace reid

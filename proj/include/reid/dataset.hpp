#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace reid {

enum class DatasetFormat { kIlidsVid, kPrid2011, kSyntheticDir };

DatasetFormat parse_dataset_format(const std::string& name);
const char* format_name(DatasetFormat f);

/// One camera's ordered frame files for one person.
struct Track {
  int camera = 0;  // 1 or 2
  std::filesystem::path dir;
  std::vector<std::filesystem::path> frames;
};

struct Identity {
  std::string name;  // e.g. "person001"
  std::vector<Track> tracks;  // sorted by camera
  /// Usable for positive pairs and the probe/gallery protocol.
  bool eligible = false;

  const Track* track(int camera) const;
};

struct Dataset {
  DatasetFormat format = DatasetFormat::kSyntheticDir;
  std::filesystem::path root;
  std::vector<Identity> identities;

  std::vector<std::size_t> eligible_indices() const;
  std::size_t track_count() const;
  std::size_t frame_count() const;
};

/// Load failure carrying one line per problem found.
class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Layouts:
///   ilids-vid      root/cam{1,2}/person<ID>/<name><####>.png
///   prid2011       root/multi_shot/cam_{a,b}/person_<ID>/<####>.png
///   synthetic-dir  ilids-vid layout plus root/manifest.csv
/// PRID-2011 marks only the first 200 two-camera persons eligible.
Dataset load_dataset(const std::filesystem::path& root, DatasetFormat format);

/// Trailing decimal digits of a file stem; throws if there are none.
std::uint64_t frame_index(const std::filesystem::path& file);

/// Disjoint train/test halves of the eligible identities (indices into
/// Dataset::identities). For odd counts train gets the extra identity.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

Split split_dataset(const Dataset& ds, std::uint64_t seed);

/// Parameters of the procedural stand-in dataset.
struct SyntheticSpec {
  std::size_t identities = 8;
  std::size_t frames_per_track = 20;
  std::size_t width = 64;
  std::size_t height = 128;
  std::uint64_t texture_seed = 1;
  double occlusion_probability = 0.0;
  std::size_t occluder_width = 24;
  std::size_t occluder_height = 40;
  /// Added to every channel of camera-2 frames (0..255 scale).
  double camera_brightness_shift = 0.0;
  /// Rotation of the RGB chroma for camera 2, in degrees.
  double camera_hue_shift = 0.0;
  double min_speed = 0.5;  // pixels per frame
  double max_speed = 1.5;

  void validate() const;
  std::string hash() const;
};

/// Writes a synthetic-dir dataset under `root` and returns it loaded.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, const std::filesystem::path& root);

}  // namespace reid

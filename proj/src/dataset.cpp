#include "reid/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

namespace reid {

namespace fs = std::filesystem;

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "ilids-vid") return DatasetFormat::kIlidsVid;
  if (name == "prid2011") return DatasetFormat::kPrid2011;
  if (name == "synthetic-dir") return DatasetFormat::kSyntheticDir;
  throw std::invalid_argument("unknown dataset format '" + name + "' (expected ilids-vid, prid2011, synthetic-dir)");
}

const char* format_name(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::kIlidsVid: return "ilids-vid";
    case DatasetFormat::kPrid2011: return "prid2011";
    case DatasetFormat::kSyntheticDir: return "synthetic-dir";
  }
  return "?";
}

const Track* Identity::track(int camera) const {
  for (const auto& t : tracks)
    if (t.camera == camera) return &t;
  return nullptr;
}

std::vector<std::size_t> Dataset::eligible_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < identities.size(); ++i)
    if (identities[i].eligible) out.push_back(i);
  return out;
}

std::size_t Dataset::track_count() const {
  std::size_t n = 0;
  for (const auto& id : identities) n += id.tracks.size();
  return n;
}

std::size_t Dataset::frame_count() const {
  std::size_t n = 0;
  for (const auto& id : identities)
    for (const auto& t : id.tracks) n += t.frames.size();
  return n;
}

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string msg = "dataset load failed:";
  for (const auto& p : problems) msg += "\n  - " + p;
  return msg;
}

bool is_frame_file(const fs::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png" || ext == ".ppm" || ext == ".pnm";
}

struct CameraDir {
  int camera;
  fs::path path;
};

// Reads every person directory of one camera into `by_id`, keyed by numeric person id.
void scan_camera(const CameraDir& cam, std::map<std::uint64_t, Identity>& by_id, std::vector<std::string>& problems) {
  static const std::regex person_re(R"(person_?(\d+))");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(cam.path))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  for (const auto& dir : dirs) {
    std::smatch m;
    const auto name = dir.filename().string();
    if (!std::regex_match(name, m, person_re)) {
      problems.push_back("unexpected directory '" + dir.string() + "' (expected person<ID>)");
      continue;
    }
    const auto pid = std::stoull(m[1].str());

    std::vector<std::pair<std::uint64_t, fs::path>> frames;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file() || !is_frame_file(e.path())) continue;
      try {
        frames.emplace_back(frame_index(e.path()), e.path());
      } catch (const std::exception& ex) {
        problems.push_back(ex.what());
      }
    }
    if (frames.empty()) {
      problems.push_back("empty track '" + dir.string() + "'");
      continue;
    }
    std::sort(frames.begin(), frames.end());
    for (std::size_t i = 1; i < frames.size(); ++i) {
      if (frames[i].first == frames[i - 1].first) {
        problems.push_back("duplicate frame index in '" + dir.string() + "': " + frames[i].second.filename().string());
      }
    }
    Track track{cam.camera, dir, {}};
    for (auto& [idx, p] : frames) {
      std::ifstream probe(p, std::ios::binary);
      if (!probe || probe.peek() == std::ifstream::traits_type::eof()) {
        problems.push_back("unreadable frame '" + p.string() + "'");
      }
      track.frames.push_back(std::move(p));
    }
    auto& identity = by_id[pid];
    if (identity.name.empty()) identity.name = name;
    if (identity.track(cam.camera)) {
      problems.push_back("person " + std::to_string(pid) + " has two tracks for camera " + std::to_string(cam.camera));
      continue;
    }
    identity.tracks.push_back(std::move(track));
  }
}

void check_manifest(const Dataset& ds, std::vector<std::string>& problems) {
  const auto path = ds.root / "manifest.csv";
  std::ifstream in(path);
  if (!in) {
    problems.push_back("missing manifest '" + path.string() + "'");
    return;
  }
  std::map<std::pair<std::string, int>, std::size_t> listed;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string identity, camera, track_path, count;
    std::getline(ss, identity, ',');
    std::getline(ss, camera, ',');
    std::getline(ss, track_path, ',');
    std::getline(ss, count, ',');
    try {
      listed[{identity, std::stoi(camera)}] = std::stoul(count);
    } catch (const std::exception&) {
      problems.push_back("malformed manifest row: " + line);
    }
  }
  std::size_t found = 0;
  for (const auto& id : ds.identities) {
    for (const auto& t : id.tracks) {
      auto it = listed.find({id.name, t.camera});
      if (it == listed.end()) {
        problems.push_back("track " + id.name + "/cam" + std::to_string(t.camera) + " is not in the manifest");
      } else if (it->second != t.frames.size()) {
        problems.push_back("track " + id.name + "/cam" + std::to_string(t.camera) + " has " +
                           std::to_string(t.frames.size()) + " frames, manifest says " + std::to_string(it->second));
      } else {
        ++found;
      }
    }
  }
  if (found != listed.size()) problems.push_back("manifest lists tracks that are missing on disk");
}

}  // namespace

DatasetError::DatasetError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

std::uint64_t frame_index(const fs::path& file) {
  const auto stem = file.stem().string();
  std::size_t start = stem.size();
  while (start > 0 && std::isdigit(static_cast<unsigned char>(stem[start - 1]))) --start;
  if (start == stem.size()) {
    throw std::invalid_argument("frame file '" + file.string() + "' has no numeric index suffix");
  }
  return std::stoull(stem.substr(start));
}

Dataset load_dataset(const fs::path& root, DatasetFormat format) {
  if (!fs::is_directory(root)) throw DatasetError({"dataset root '" + root.string() + "' is not a directory"});

  std::vector<CameraDir> cams;
  if (format == DatasetFormat::kPrid2011) {
    cams = {{1, root / "multi_shot" / "cam_a"}, {2, root / "multi_shot" / "cam_b"}};
  } else {
    cams = {{1, root / "cam1"}, {2, root / "cam2"}};
  }

  std::vector<std::string> problems;
  std::map<std::uint64_t, Identity> by_id;
  for (const auto& cam : cams) {
    if (!fs::is_directory(cam.path)) {
      problems.push_back("missing camera directory '" + cam.path.string() + "' under '" + root.string() + "'");
      continue;
    }
    scan_camera(cam, by_id, problems);
  }

  Dataset ds{format, root, {}};
  std::size_t two_camera = 0;
  for (auto& [pid, identity] : by_id) {
    std::sort(identity.tracks.begin(), identity.tracks.end(),
              [](const Track& a, const Track& b) { return a.camera < b.camera; });
    const bool both = identity.track(1) && identity.track(2);
    identity.eligible = both && (format != DatasetFormat::kPrid2011 || two_camera < 200);
    if (both) ++two_camera;
    ds.identities.push_back(std::move(identity));
  }
  if (problems.empty() && ds.identities.empty()) problems.push_back("no identities found under '" + root.string() + "'");
  if (problems.empty() && format == DatasetFormat::kSyntheticDir) check_manifest(ds, problems);
  if (!problems.empty()) throw DatasetError(std::move(problems));
  return ds;
}

Split split_dataset(const Dataset& ds, std::uint64_t seed) {
  auto ids = ds.eligible_indices();
  if (ids.size() < 2) {
    throw std::invalid_argument("split: need at least 2 identities seen by both cameras, found " +
                                std::to_string(ids.size()));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t n_train = (ids.size() + 1) / 2;
  Split s;
  s.seed = seed;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace reid

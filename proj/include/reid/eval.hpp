#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "reid/config.hpp"
#include "reid/dataset.hpp"
#include "reid/trainer.hpp"

namespace reid {

/// Embeds the first `max_frames` frames of a prepared track (center crop,
/// checkpoint normalization). Classifier parameters are never read.
template <typename T>
VideoEmbedding<T> embed_sequence(const std::vector<Image>& track, const TrainedModel<T>& model,
                                 std::size_t max_frames = 128, std::size_t workers = 1);

struct GalleryEntry {
  std::size_t identity = 0;
  std::vector<double> embedding;
};

struct RankList {
  std::size_t probe_identity = 0;
  std::vector<std::size_t> identities;  // ascending distance
  std::vector<double> distances;

  /// 1-based rank of `identity`; 0 when absent.
  std::size_t rank_of(std::size_t identity) const;
};

/// Euclidean ranking; equal distances keep the lower identity index first.
RankList rank_gallery(std::span<const double> probe, std::size_t probe_identity,
                      const std::vector<GalleryEntry>& gallery);

struct CmcCurve {
  /// values[k - 1] = CMC(k) for k = 1..gallery size.
  std::vector<double> values;
  std::size_t runs = 1;

  /// CMC(k); ranks beyond the gallery report 1.
  double at(std::size_t k) const;
};

/// Throws when a probe's identity is missing from its rank list.
CmcCurve cmc_curve(const std::vector<RankList>& ranks);

/// Probe = camera 1, gallery = camera 2, over `identities`.
template <typename T>
std::vector<RankList> rank_split(const PreparedDataset& data, const std::vector<std::size_t>& identities,
                                 const TrainedModel<T>& model, std::size_t max_frames, std::size_t workers = 1);

inline constexpr std::size_t kReportRanks[] = {1, 5, 10, 20};

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  Split split;
  CmcCurve cmc;
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  std::optional<std::size_t> diverged_epoch;
};

struct ProtocolResult {
  std::vector<RunResult> runs;
  CmcCurve mean;
  std::vector<double> stddev;  // per k, population deviation over runs
};

/// Element-wise mean and deviation of equally sized curves.
ProtocolResult summarize_runs(std::vector<RunResult> runs);

/// Per run r: split with seed cfg.seed + r, train with that seed, evaluate.
/// cfg.precision selects the arithmetic.
ProtocolResult evaluate_protocol(const Dataset& ds, const PreparedDataset& data, const TrainConfig& cfg,
                                 std::size_t workers = 1,
                                 const std::function<void(const std::string&)>& progress = {});

struct AblationRow {
  std::size_t hops = 0;
  ProtocolResult result;
};

/// Retrains for each hop count on identical splits and seeds.
std::vector<AblationRow> ablate_hops(const Dataset& ds, const PreparedDataset& data, const TrainConfig& cfg,
                                     const std::vector<std::size_t>& hop_values, std::size_t workers = 1,
                                     const std::function<void(const std::string&)>& progress = {});

/// run,k,cmc rows; a run column of "mean" holds the average curve.
void write_cmc_csv(const std::filesystem::path& path, const ProtocolResult& result);
/// run,rank1,rank5,rank10,rank20 plus mean and std rows, in percent.
void write_summary_csv(const std::filesystem::path& path, const ProtocolResult& result);
std::string summary_table(const ProtocolResult& result);

/// hops,rank1,rank5,rank10,rank20 (mean percent) in the given row order.
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace reid

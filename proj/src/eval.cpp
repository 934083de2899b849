#include "reid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "reid/feature_net.hpp"

namespace reid {

template <typename T>
VideoEmbedding<T> embed_sequence(const std::vector<Image>& track, const TrainedModel<T>& model,
                                 std::size_t max_frames, std::size_t workers) {
  if (track.empty()) throw std::invalid_argument("embed_sequence: empty track");
  if (max_frames == 0) throw std::invalid_argument("embed_sequence: max_frames must be >= 1");
  const std::size_t n = std::min(track.size(), max_frames);
  std::vector<Tensor<T>> frames;
  frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto f = center_crop(track[i], kInputHeight, kInputWidth);
    normalize_frame(f, model.stats);
    frames.push_back(f.template cast<T>());
  }
  return embed_frames<T>(frames, model.params, model.model, workers);
}

std::size_t RankList::rank_of(std::size_t identity) const {
  for (std::size_t i = 0; i < identities.size(); ++i)
    if (identities[i] == identity) return i + 1;
  return 0;
}

RankList rank_gallery(std::span<const double> probe, std::size_t probe_identity,
                      const std::vector<GalleryEntry>& gallery) {
  if (gallery.empty()) throw std::invalid_argument("rank_gallery: empty gallery");
  std::vector<std::pair<double, std::size_t>> scored;
  for (const auto& g : gallery) {
    if (g.embedding.size() != probe.size()) throw std::invalid_argument("rank_gallery: embedding sizes differ");
    double sq = 0;
    for (std::size_t i = 0; i < probe.size(); ++i) sq += (probe[i] - g.embedding[i]) * (probe[i] - g.embedding[i]);
    scored.emplace_back(std::sqrt(sq), g.identity);
  }
  std::sort(scored.begin(), scored.end());
  RankList r;
  r.probe_identity = probe_identity;
  for (const auto& [d, id] : scored) {
    r.distances.push_back(d);
    r.identities.push_back(id);
  }
  return r;
}

double CmcCurve::at(std::size_t k) const {
  if (k == 0) throw std::invalid_argument("CMC rank must be >= 1");
  if (k > values.size()) return 1.0;
  return values[k - 1];
}

CmcCurve cmc_curve(const std::vector<RankList>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("cmc_curve: no probes");
  const std::size_t n = ranks.front().identities.size();
  std::vector<std::size_t> hits(n, 0);
  for (const auto& r : ranks) {
    if (r.identities.size() != n) throw std::invalid_argument("cmc_curve: gallery sizes differ between probes");
    const auto k = r.rank_of(r.probe_identity);
    if (k == 0) {
      throw std::invalid_argument("cmc_curve: probe identity " + std::to_string(r.probe_identity) +
                                  " has no gallery match");
    }
    ++hits[k - 1];
  }
  CmcCurve c;
  std::size_t cum = 0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += hits[k];
    c.values.push_back(static_cast<double>(cum) / static_cast<double>(ranks.size()));
  }
  return c;
}

namespace {

template <typename T>
std::vector<double> as_doubles(const Tensor<T>& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

}  // namespace

template <typename T>
std::vector<RankList> rank_split(const PreparedDataset& data, const std::vector<std::size_t>& identities,
                                 const TrainedModel<T>& model, std::size_t max_frames, std::size_t workers) {
  std::vector<GalleryEntry> gallery;
  std::vector<std::vector<double>> probes;
  for (auto id : identities) {
    probes.push_back(as_doubles(embed_sequence(data.track(id, 1), model, max_frames, workers).embedding));
    gallery.push_back({id, as_doubles(embed_sequence(data.track(id, 2), model, max_frames, workers).embedding)});
  }
  std::vector<RankList> out;
  for (std::size_t i = 0; i < identities.size(); ++i) out.push_back(rank_gallery(probes[i], identities[i], gallery));
  return out;
}

ProtocolResult summarize_runs(std::vector<RunResult> runs) {
  if (runs.empty()) throw std::invalid_argument("summarize_runs: no runs");
  ProtocolResult r;
  const std::size_t n = runs.front().cmc.values.size();
  r.mean.values.assign(n, 0.0);
  r.mean.runs = runs.size();
  r.stddev.assign(n, 0.0);
  for (const auto& run : runs) {
    if (run.cmc.values.size() != n) throw std::invalid_argument("summarize_runs: gallery sizes differ");
    for (std::size_t k = 0; k < n; ++k) r.mean.values[k] += run.cmc.values[k];
  }
  for (auto& v : r.mean.values) v /= static_cast<double>(runs.size());
  for (const auto& run : runs)
    for (std::size_t k = 0; k < n; ++k) r.stddev[k] += std::pow(run.cmc.values[k] - r.mean.values[k], 2);
  for (auto& v : r.stddev) v = std::sqrt(v / static_cast<double>(runs.size()));
  r.runs = std::move(runs);
  return r;
}

namespace {

template <typename T>
RunResult run_once(const Dataset& ds, const PreparedDataset& data, const TrainConfig& base, std::size_t run,
                   std::size_t workers, const std::function<void(const std::string&)>& progress) {
  TrainConfig cfg = base;
  cfg.seed = base.seed + run;
  RunResult r;
  r.run = run;
  r.seed = cfg.seed;
  r.split = split_dataset(ds, cfg.seed);
  const auto set = make_training_set(data, r.split.train);
  auto trained = train<T>(set, cfg, workers);
  r.log = std::move(trained.log);
  r.diverged_epoch = trained.diverged_epoch;
  r.checkpoint = make_checkpoint(trained.params, cfg.model(), set.stats);
  if (r.diverged_epoch) {
    throw std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(*r.diverged_epoch) +
                             " of run " + std::to_string(run));
  }
  const auto model = load_model<T>(r.checkpoint, cfg.hops);
  r.cmc = cmc_curve(rank_split(data, r.split.test, model, cfg.test_max_frames, workers));
  if (progress) {
    std::ostringstream os;
    os << "run " << run << " (seed " << cfg.seed << ", J=" << cfg.hops << "): rank-1 " << std::fixed
       << std::setprecision(3) << r.cmc.at(1);
    progress(os.str());
  }
  return r;
}

}  // namespace

ProtocolResult evaluate_protocol(const Dataset& ds, const PreparedDataset& data, const TrainConfig& cfg,
                                 std::size_t workers, const std::function<void(const std::string&)>& progress) {
  cfg.validate();
  std::vector<RunResult> runs;
  for (std::size_t r = 0; r < cfg.runs; ++r) {
    runs.push_back(cfg.precision == Precision::kFloat32 ? run_once<float>(ds, data, cfg, r, workers, progress)
                                                        : run_once<double>(ds, data, cfg, r, workers, progress));
  }
  return summarize_runs(std::move(runs));
}

std::vector<AblationRow> ablate_hops(const Dataset& ds, const PreparedDataset& data, const TrainConfig& cfg,
                                     const std::vector<std::size_t>& hop_values, std::size_t workers,
                                     const std::function<void(const std::string&)>& progress) {
  std::vector<AblationRow> rows;
  for (auto hops : hop_values) {
    TrainConfig c = cfg;
    c.hops = hops;
    rows.push_back({hops, evaluate_protocol(ds, data, c, workers, progress)});
  }
  return rows;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * v;
  return os.str();
}

}  // namespace

void write_cmc_csv(const std::filesystem::path& path, const ProtocolResult& result) {
  auto out = open_output(path);
  out << "run,k,cmc\n";
  out.precision(9);
  for (const auto& run : result.runs)
    for (std::size_t k = 1; k <= run.cmc.values.size(); ++k) out << run.run << ',' << k << ',' << run.cmc.at(k) << '\n';
  for (std::size_t k = 1; k <= result.mean.values.size(); ++k) out << "mean," << k << ',' << result.mean.at(k) << '\n';
}

void write_summary_csv(const std::filesystem::path& path, const ProtocolResult& result) {
  auto out = open_output(path);
  out << "run,seed,rank1,rank5,rank10,rank20\n";
  for (const auto& run : result.runs) {
    out << run.run << ',' << run.seed;
    for (auto k : kReportRanks) out << ',' << pct(run.cmc.at(k));
    out << '\n';
  }
  out << "mean,";
  for (auto k : kReportRanks) out << ',' << pct(result.mean.at(k));
  out << "\nstd,";
  for (auto k : kReportRanks) out << ',' << pct(k <= result.stddev.size() ? result.stddev[k - 1] : 0.0);
  out << '\n';
}

std::string summary_table(const ProtocolResult& result) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "run" << std::right;
  for (auto k : kReportRanks) os << std::setw(10) << ("Rank-" + std::to_string(k));
  os << '\n';
  for (const auto& run : result.runs) {
    os << std::left << std::setw(8) << run.run << std::right;
    for (auto k : kReportRanks) os << std::setw(10) << pct(run.cmc.at(k));
    os << '\n';
  }
  os << std::left << std::setw(8) << "mean" << std::right;
  for (auto k : kReportRanks) os << std::setw(10) << pct(result.mean.at(k));
  os << '\n' << std::left << std::setw(8) << "std" << std::right;
  for (auto k : kReportRanks) os << std::setw(10) << pct(k <= result.stddev.size() ? result.stddev[k - 1] : 0.0);
  os << "\n(gallery size " << result.mean.values.size() << ", " << result.runs.size() << " runs)\n";
  return os.str();
}

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  auto out = open_output(path);
  out << "hops,rank1,rank5,rank10,rank20\n";
  for (const auto& row : rows) {
    out << row.hops;
    for (auto k : kReportRanks) out << ',' << pct(row.result.mean.at(k));
    out << '\n';
  }
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "No. of Att. layers" << std::right;
  for (auto k : kReportRanks) os << std::setw(10) << ("Rank-" + std::to_string(k));
  os << '\n';
  for (const auto& row : rows) {
    os << std::left << std::setw(20) << row.hops << std::right;
    for (auto k : kReportRanks) os << std::setw(10) << pct(row.result.mean.at(k));
    os << '\n';
  }
  return os.str();
}

#define REID_INSTANTIATE_EVAL(T)                                                                               \
  template VideoEmbedding<T> embed_sequence<T>(const std::vector<Image>&, const TrainedModel<T>&, std::size_t,  \
                                               std::size_t);                                                   \
  template std::vector<RankList> rank_split<T>(const PreparedDataset&, const std::vector<std::size_t>&,         \
                                               const TrainedModel<T>&, std::size_t, std::size_t);

REID_INSTANTIATE_EVAL(float)
REID_INSTANTIATE_EVAL(double)

}  // namespace reid

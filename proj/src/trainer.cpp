#include "reid/trainer.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "reid/feature_net.hpp"
#include "reid/parallel.hpp"

namespace reid {

const std::vector<Image>& PreparedDataset::track(std::size_t identity, int camera) const {
  const auto& t = tracks.at(identity).at(static_cast<std::size_t>(camera - 1));
  if (t.empty()) {
    throw std::invalid_argument("identity " + std::to_string(identity) + " has no prepared camera-" +
                                std::to_string(camera) + " track");
  }
  return t;
}

PreparedDataset prepare_dataset(const Dataset& ds, std::size_t workers, const LucasKanadeOptions& lk) {
  struct Job {
    std::size_t identity;
    const Track* track;
  };
  std::vector<Job> jobs;
  for (auto i : ds.eligible_indices())
    for (const auto& t : ds.identities[i].tracks) jobs.push_back({i, &t});

  PreparedDataset out;
  out.tracks.resize(ds.identities.size());
  std::vector<std::vector<Image>> results(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t j) {
    std::vector<RawFrame> frames;
    frames.reserve(jobs[j].track->frames.size());
    for (const auto& p : jobs[j].track->frames) frames.push_back(read_image(p));
    results[j] = prepare_track(frames, lk);
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    out.tracks[jobs[j].identity][static_cast<std::size_t>(jobs[j].track->camera - 1)] = std::move(results[j]);
  }
  return out;
}

TrainingSet make_training_set(const PreparedDataset& data, const std::vector<std::size_t>& identities) {
  if (identities.size() < 2) throw std::invalid_argument("training needs at least 2 identities seen by both cameras");
  TrainingSet set{&data, identities, {}};
  std::vector<const Image*> frames;
  for (auto id : identities)
    for (int cam : {1, 2})
      for (const auto& f : data.track(id, cam)) frames.push_back(&f);
  set.stats = compute_channel_stats(frames);
  return set;
}

namespace {

void draw_window(std::size_t track_length, std::size_t T, std::mt19937_64& rng, std::size_t& start,
                 std::size_t& length) {
  if (track_length <= T) {
    start = 0;
    length = track_length;
    return;
  }
  start = std::uniform_int_distribution<std::size_t>(0, track_length - T)(rng);
  length = T;
}

PairDraw draw_pair(const TrainingSet& set, std::size_t a, std::size_t b, std::size_t T, std::mt19937_64& rng) {
  PairDraw d;
  d.label_first = a;
  d.label_second = b;
  d.camera_first = std::bernoulli_distribution(0.5)(rng) ? 1 : 2;
  d.camera_second = 3 - d.camera_first;
  draw_window(set.track(a, d.camera_first).size(), T, rng, d.start_first, d.length_first);
  draw_window(set.track(b, d.camera_second).size(), T, rng, d.start_second, d.length_second);
  return d;
}

}  // namespace

EpochDraw sample_epoch(const TrainingSet& set, std::size_t T, std::mt19937_64& rng) {
  if (set.classes() < 2) throw std::invalid_argument("sample_epoch: need at least 2 cross-camera identities");
  if (T < 1) throw std::invalid_argument("sample_epoch: T must be >= 1");
  std::uniform_int_distribution<std::size_t> pick(0, set.classes() - 1);
  EpochDraw e;
  const std::size_t p = pick(rng);
  e.positive = draw_pair(set, p, p, T, rng);
  const std::size_t a = pick(rng);
  std::size_t b = std::uniform_int_distribution<std::size_t>(0, set.classes() - 2)(rng);
  if (b >= a) ++b;
  e.negative = draw_pair(set, a, b, T, rng);
  return e;
}

std::vector<Image> materialize_sequence(const std::vector<Image>& track, std::size_t start, std::size_t length,
                                        const ChannelStats& stats, bool augment_frames, std::mt19937_64& rng) {
  if (length == 0 || start + length > track.size()) throw std::out_of_range("materialize_sequence: bad window");
  std::vector<Image> window(track.begin() + static_cast<std::ptrdiff_t>(start),
                            track.begin() + static_cast<std::ptrdiff_t>(start + length));
  std::vector<Image> out;
  if (augment_frames) {
    out = augment(window, rng, kInputHeight, kInputWidth);
  } else {
    for (const auto& f : window) out.push_back(center_crop(f, kInputHeight, kInputWidth));
  }
  for (auto& f : out) normalize_frame(f, stats);
  return out;
}

template <typename T>
PairSample<T> materialize_pair(const TrainingSet& set, const PairDraw& d, bool augment_frames, std::mt19937_64& rng) {
  auto convert = [](std::vector<Image> frames) {
    std::vector<Tensor<T>> out;
    out.reserve(frames.size());
    for (auto& f : frames) out.push_back(f.template cast<T>());
    return out;
  };
  PairSample<T> pair;
  pair.first = convert(materialize_sequence(set.track(d.label_first, d.camera_first), d.start_first, d.length_first,
                                            set.stats, augment_frames, rng));
  pair.second = convert(materialize_sequence(set.track(d.label_second, d.camera_second), d.start_second,
                                             d.length_second, set.stats, augment_frames, rng));
  pair.label_first = d.label_first;
  pair.label_second = d.label_second;
  pair.same = d.same();
  return pair;
}

namespace {

template <typename T>
bool all_finite(const ParamStore<T>& params) {
  for (std::size_t i = 0; i < params.size(); ++i)
    for (auto v : params.value_at(i).values())
      if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
void clip_gradient(ParamStore<T>& params, double max_norm) {
  double sq = 0;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (auto g : params.grad_at(i).values()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const T factor = static_cast<T>(max_norm / norm);
  for (std::size_t i = 0; i < params.size(); ++i)
    for (auto& g : params.grad_at(i).values()) g *= factor;
}

}  // namespace

template <typename T>
TrainResult<T> train(const TrainingSet& set, const TrainConfig& cfg, std::size_t workers,
                     const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  const auto model = cfg.model();
  TrainResult<T> result{init_model<T>(model, cfg.seed), {}, std::nullopt};
  std::mt19937_64 rng(cfg.seed);
  init_classifier(result.params, set.classes(), rng);
  const T margin = static_cast<T>(cfg.margin);
  const T lr = static_cast<T>(cfg.lr);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto draw = sample_epoch(set, cfg.T, rng);
    EpochLog log;
    log.epoch = epoch;
    for (const PairDraw* d : {&draw.positive, &draw.negative}) {
      const auto pair = materialize_pair<T>(set, *d, cfg.augment, rng);
      const auto loss = pair_loss(pair, result.params, model, margin, true, workers);
      (d->same() ? log.pos_loss : log.neg_loss) = loss.hinge;
      log.id_loss_1 += loss.id_first;
      log.id_loss_2 += loss.id_second;
      if (!std::isfinite(loss.total)) {
        result.diverged_epoch = epoch;
        break;
      }
      if (cfg.grad_clip > 0) clip_gradient(result.params, cfg.grad_clip);
      sgd_step(result.params, lr);
      if (!all_finite(result.params)) {
        result.diverged_epoch = epoch;
        break;
      }
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (result.diverged_epoch) break;
  }
  return result;
}

namespace {

Tensor<float> meta_scalar(double v) { return Tensor<float>::vector({static_cast<float>(v)}); }

Tensor<float> stats_tensor(const std::vector<double>& v) {
  Tensor<float> t(Shape{v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
  return t;
}

bool is_embedding_param(const std::string& name) {
  return name.rfind("featnet.", 0) == 0 || name.rfind("attn.", 0) == 0;
}

}  // namespace

template <typename T>
Checkpoint make_checkpoint(const ParamStore<T>& params, const ModelConfig& model, const ChannelStats& stats) {
  Checkpoint ckpt;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (is_embedding_param(params.name_at(i))) ckpt.set(params.name_at(i), params.value_at(i).template cast<float>());
  }
  ckpt.set("preproc.mean", stats_tensor(stats.mean));
  ckpt.set("preproc.std", stats_tensor(stats.stddev));
  ckpt.set("meta.hops", meta_scalar(static_cast<double>(model.attention.hops)));
  ckpt.set("meta.fusion", meta_scalar(model.attention.fusion == Fusion::kLiteral ? 0 : 1));
  ckpt.set("meta.fc_tanh", meta_scalar(model.feature.fc_tanh ? 1 : 0));
  ckpt.set("meta.temporal_bias", meta_scalar(model.attention.temporal_bias ? 1 : 0));
  return ckpt;
}

template <typename T>
TrainedModel<T> load_model(const Checkpoint& ckpt, std::optional<std::size_t> expected_hops) {
  for (const char* key : {"meta.hops", "meta.fusion", "meta.fc_tanh", "meta.temporal_bias", "preproc.mean",
                          "preproc.std"}) {
    if (!ckpt.contains(key)) throw std::invalid_argument(std::string("checkpoint is missing '") + key + "'");
  }
  TrainedModel<T> m;
  m.model.attention.hops = static_cast<std::size_t>(ckpt.at("meta.hops").item());
  m.model.attention.fusion = ckpt.at("meta.fusion").item() == 0 ? Fusion::kLiteral : Fusion::kSingleFt;
  m.model.feature.fc_tanh = ckpt.at("meta.fc_tanh").item() != 0;
  m.model.attention.temporal_bias = ckpt.at("meta.temporal_bias").item() != 0;
  if (expected_hops && *expected_hops != m.model.attention.hops) {
    throw std::invalid_argument("checkpoint has " + std::to_string(m.model.attention.hops) +
                                " spatial hops but the configuration asks for " + std::to_string(*expected_hops));
  }
  for (const auto* key : {"preproc.mean", "preproc.std"}) {
    const auto& t = ckpt.at(key);
    if (t.size() != kInputChannels) throw std::invalid_argument(std::string("checkpoint '") + key + "' has wrong size");
    auto& dst = std::string(key) == "preproc.mean" ? m.stats.mean : m.stats.stddev;
    for (auto v : t.values()) dst.push_back(v);
  }

  const auto reference = init_model<T>(m.model, 0);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& name = reference.name_at(i);
    if (!ckpt.contains(name)) throw std::invalid_argument("checkpoint is missing parameter '" + name + "'");
    const auto& stored = ckpt.at(name);
    if (stored.shape() != reference.value_at(i).shape()) {
      throw std::invalid_argument("checkpoint parameter '" + name + "' has shape " + shape_string(stored.shape()) +
                                  ", expected " + shape_string(reference.value_at(i).shape()));
    }
    m.params.add(name, stored.template cast<T>());
  }
  for (const auto& [name, value] : ckpt.entries) {
    if (is_embedding_param(name) && !m.params.contains(name)) {
      throw std::invalid_argument("checkpoint has unexpected parameter '" + name + "'");
    }
  }
  return m;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.precision(9);
  out << "epoch,pos_loss,neg_loss,id_loss_1,id_loss_2\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << e.pos_loss << ',' << e.neg_loss << ',' << e.id_loss_1 << ',' << e.id_loss_2 << '\n';
  }
}

#define REID_INSTANTIATE_TRAINER(T)                                                                      \
  template PairSample<T> materialize_pair<T>(const TrainingSet&, const PairDraw&, bool, std::mt19937_64&); \
  template TrainResult<T> train<T>(const TrainingSet&, const TrainConfig&, std::size_t,                  \
                                   const std::function<void(const EpochLog&)>&);                         \
  template Checkpoint make_checkpoint<T>(const ParamStore<T>&, const ModelConfig&, const ChannelStats&);  \
  template TrainedModel<T> load_model<T>(const Checkpoint&, std::optional<std::size_t>);

REID_INSTANTIATE_TRAINER(float)
REID_INSTANTIATE_TRAINER(double)

}  // namespace reid

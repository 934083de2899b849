#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "reid/config.hpp"
#include "reid/dataset.hpp"
#include "reid/param_store.hpp"
#include "reid/siamese.hpp"
#include "reid/vision.hpp"

namespace reid {

/// Preprocessed (YUV + flow, margin-sized, unnormalized) tracks of every
/// eligible identity, indexed like Dataset::identities.
struct PreparedDataset {
  /// tracks[id][camera - 1]; empty for ineligible identities.
  std::vector<std::array<std::vector<Image>, 2>> tracks;

  const std::vector<Image>& track(std::size_t identity, int camera) const;
};

PreparedDataset prepare_dataset(const Dataset& ds, std::size_t workers = 1, const LucasKanadeOptions& lk = {});

/// Training identities (class label = position in `identities`) plus the
/// normalization statistics of their frames.
struct TrainingSet {
  const PreparedDataset* data = nullptr;
  std::vector<std::size_t> identities;
  ChannelStats stats;

  std::size_t classes() const { return identities.size(); }
  const std::vector<Image>& track(std::size_t label, int camera) const {
    return data->track(identities.at(label), camera);
  }
};

/// Rejects fewer than two identities or any identity missing a camera.
TrainingSet make_training_set(const PreparedDataset& data, const std::vector<std::size_t>& identities);

/// Which frames a pair uses, before any pixels are touched.
struct PairDraw {
  std::size_t label_first = 0;
  std::size_t label_second = 0;
  int camera_first = 1;
  int camera_second = 2;
  std::size_t start_first = 0;
  std::size_t length_first = 0;
  std::size_t start_second = 0;
  std::size_t length_second = 0;
  bool same() const { return label_first == label_second; }
};

struct EpochDraw {
  PairDraw positive;
  PairDraw negative;
};

/// One positive pair (one identity, both cameras in random order) and one
/// negative pair (two identities, different cameras). Each side is a random
/// window of T consecutive frames, or the whole track when it is shorter.
EpochDraw sample_epoch(const TrainingSet& set, std::size_t T, std::mt19937_64& rng);

/// Frames [start, start + length) of a track, cropped (randomly when
/// augmenting, else centered), mirrored when augmenting, then normalized.
std::vector<Image> materialize_sequence(const std::vector<Image>& track, std::size_t start, std::size_t length,
                                        const ChannelStats& stats, bool augment, std::mt19937_64& rng);

template <typename T>
PairSample<T> materialize_pair(const TrainingSet& set, const PairDraw& draw, bool augment, std::mt19937_64& rng);

struct EpochLog {
  std::size_t epoch = 0;
  double pos_loss = 0;   // hinge term of the positive pair
  double neg_loss = 0;   // hinge term of the negative pair
  double id_loss_1 = 0;  // first-branch identity losses of both pairs
  double id_loss_2 = 0;  // second-branch identity losses of both pairs
  double total() const { return pos_loss + neg_loss + id_loss_1 + id_loss_2; }
};

template <typename T>
struct TrainResult {
  /// Embedding path plus the classifier.
  ParamStore<T> params;
  std::vector<EpochLog> log;
  /// Set when a non-finite loss stopped training; params hold the state at
  /// that moment.
  std::optional<std::size_t> diverged_epoch;
};

/// cfg.epochs epochs of SGD, each a step on the positive pair and then a step
/// on the negative pair.
template <typename T>
TrainResult<T> train(const TrainingSet& set, const TrainConfig& cfg, std::size_t workers = 1,
                     const std::function<void(const EpochLog&)>& on_epoch = {});

/// Embedding-path parameters with preprocessing statistics and the model
/// shape. Classifier parameters are left out.
template <typename T>
Checkpoint make_checkpoint(const ParamStore<T>& params, const ModelConfig& model, const ChannelStats& stats);

/// A checkpoint ready for inference.
template <typename T>
struct TrainedModel {
  ParamStore<T> params;
  ModelConfig model;
  ChannelStats stats;
};

/// Rebuilds the model; throws if `expected_hops` is given and differs from the
/// stored hop count, or if parameters are missing.
template <typename T>
TrainedModel<T> load_model(const Checkpoint& ckpt, std::optional<std::size_t> expected_hops = std::nullopt);

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace reid

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>

#include "reid/config.hpp"
#include "reid/dataset.hpp"
#include "reid/eval.hpp"
#include "reid/gradcheck.hpp"
#include "reid/trainer.hpp"
#include "reid/vision.hpp"

namespace reid::cli {

namespace fs = std::filesystem;

namespace {

/// Options shared by the verbs.
struct Common {
  std::string config_path;
  std::string data;
  std::string format = "ilids-vid";
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::size_t workers = 1;
  std::string model;
};

struct SynthOptions {
  SyntheticSpec spec;
};

struct FlowOptions {
  std::string prev;
  std::string next;
  std::size_t window = 5;
  double min_eigenvalue = 1e-4;
};

struct EvalOptions {
  bool dump_attention = false;
};

struct AblateOptions {
  std::vector<std::size_t> hops{3, 2, 1, 0};
};

TrainConfig resolve_config(const Common& c) {
  TrainConfig cfg = c.config_path.empty() ? TrainConfig{} : load_config(c.config_path);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

fs::path output_dir(const Common& c) {
  if (c.out.empty()) throw std::invalid_argument("--out is required");
  fs::create_directories(c.out);
  return c.out;
}

std::ofstream open_file(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  return f;
}

void write_run_json(const fs::path& dir, const std::string& verb, const std::string& config_hash,
                    std::uint64_t seed, double seconds, nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json j;
  j["verb"] = verb;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["wall_time_seconds"] = seconds;
  for (auto& [k, v] : extra.items()) j[k] = v;
  open_file(dir / "run.json") << j.dump(2) << '\n';
}

void write_split_csv(const fs::path& path, const Dataset& ds, const Split& split) {
  auto f = open_file(path);
  f << "identity,subset\n";
  for (auto i : split.train) f << ds.identities[i].name << ",train\n";
  for (auto i : split.test) f << ds.identities[i].name << ",test\n";
}

Dataset open_dataset(const Common& c) {
  if (c.data.empty()) throw std::invalid_argument("--data is required");
  return load_dataset(c.data, parse_dataset_format(c.format));
}

// ---- train -----------------------------------------------------------------

template <typename T>
int train_verb(const Common& c, const TrainConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = output_dir(c);
  const auto ds = open_dataset(c);
  const auto split = split_dataset(ds, cfg.seed);
  write_split_csv(dir / "split.csv", ds, split);
  out << "dataset: " << ds.identities.size() << " identities, " << split.train.size() << " train / "
      << split.test.size() << " test\n";
  const auto data = prepare_dataset(ds, c.workers);
  const auto set = make_training_set(data, split.train);
  for (auto ch : set.stats.guarded) err << "warning: input channel " << ch << " has zero variance; using stddev 1\n";

  const std::size_t report_every = std::max<std::size_t>(1, cfg.epochs / 20);
  auto result = train<T>(set, cfg, c.workers, [&](const EpochLog& e) {
    if (e.epoch % report_every == 0 || e.epoch == cfg.epochs) {
      out << "epoch " << e.epoch << "  pos " << e.pos_loss << "  neg " << e.neg_loss << "  id1 " << e.id_loss_1
          << "  id2 " << e.id_loss_2 << '\n';
    }
  });
  write_loss_csv(dir / "loss.csv", result.log);
  const auto ckpt = make_checkpoint(result.params, cfg.model(), set.stats);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (result.diverged_epoch) {
    write_checkpoint(dir / "diverged.ckpt", ckpt);
    write_run_json(dir, "train", cfg.hash(), cfg.seed, seconds, {{"diverged_epoch", *result.diverged_epoch}});
    err << "training diverged (non-finite loss or parameters) at epoch " << *result.diverged_epoch
        << "; diagnostic checkpoint written to " << (dir / "diverged.ckpt").string() << '\n';
    return kExitFailure;
  }
  write_checkpoint(dir / "model.ckpt", ckpt);
  open_file(dir / "config.txt") << cfg.to_text();
  write_run_json(dir, "train", cfg.hash(), cfg.seed, seconds, {{"epochs", cfg.epochs}});
  out << "wrote " << (dir / "model.ckpt").string() << '\n';
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

template <typename T>
void dump_attention(const fs::path& path, const Dataset& ds, const PreparedDataset& data,
                    const std::vector<std::size_t>& ids, const TrainedModel<T>& model, std::size_t max_frames,
                    std::size_t workers) {
  auto f = open_file(path);
  f << "identity,camera,frame,kind,row,col,score\n";
  f.precision(9);
  for (auto id : ids) {
    for (int cam : {1, 2}) {
      const auto e = embed_sequence(data.track(id, cam), model, max_frames, workers);
      for (std::size_t i = 0; i < e.temporal.size(); ++i) {
        f << ds.identities[id].name << ',' << cam << ',' << i << ",temporal,,," << e.temporal[i] << '\n';
      }
      for (std::size_t j = 0; j < e.spatial.size(); ++j) {
        for (std::size_t i = 0; i < e.spatial[j].size(); ++i) {
          const auto& m = e.spatial[j][i];
          for (std::size_t r = 0; r < m.dim(1); ++r)
            for (std::size_t col = 0; col < m.dim(2); ++col)
              f << ds.identities[id].name << ',' << cam << ',' << i << ",hop" << j + 1 << ',' << r << ',' << col
                << ',' << m.at(0, r, col) << '\n';
        }
      }
    }
  }
}

template <typename T>
int eval_checkpoint(const Common& c, const TrainConfig& cfg, const EvalOptions& eo, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = output_dir(c);
  const auto ds = open_dataset(c);
  const auto model = load_model<T>(read_checkpoint(c.model), cfg.hops);
  const auto split = split_dataset(ds, cfg.seed);
  const auto data = prepare_dataset(ds, c.workers);
  const auto ranks = rank_split(data, split.test, model, cfg.test_max_frames, c.workers);

  RunResult run;
  run.seed = cfg.seed;
  run.split = split;
  run.cmc = cmc_curve(ranks);
  const auto result = summarize_runs({run});
  write_cmc_csv(dir / "cmc.csv", result);
  write_summary_csv(dir / "summary.csv", result);
  open_file(dir / "summary.txt") << summary_table(result);

  auto rf = open_file(dir / "ranks.csv");
  rf << "probe,rank,gallery,distance\n";
  rf.precision(9);
  for (const auto& r : ranks)
    for (std::size_t k = 0; k < r.identities.size(); ++k)
      rf << ds.identities[r.probe_identity].name << ',' << k + 1 << ',' << ds.identities[r.identities[k]].name << ','
         << r.distances[k] << '\n';
  if (eo.dump_attention) {
    dump_attention(dir / "attention.csv", ds, data, split.test, model, cfg.test_max_frames, c.workers);
  }
  out << summary_table(result);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_json(dir, "eval", cfg.hash(), cfg.seed, seconds, {{"model", c.model}});
  return kExitOk;
}

int eval_protocol_verb(const Common& c, const TrainConfig& cfg, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = output_dir(c);
  const auto ds = open_dataset(c);
  const auto data = prepare_dataset(ds, c.workers);
  const auto result = evaluate_protocol(ds, data, cfg, c.workers, [&](const std::string& s) { out << s << '\n'; });
  write_cmc_csv(dir / "cmc.csv", result);
  write_summary_csv(dir / "summary.csv", result);
  open_file(dir / "summary.txt") << summary_table(result);
  out << summary_table(result);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_json(dir, "eval", cfg.hash(), cfg.seed, seconds, {{"runs", cfg.runs}});
  return kExitOk;
}

// ---- ablate ----------------------------------------------------------------

int ablate_verb(const Common& c, const TrainConfig& cfg, const AblateOptions& ao, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = output_dir(c);
  const auto ds = open_dataset(c);
  const auto data = prepare_dataset(ds, c.workers);
  const auto rows = ablate_hops(ds, data, cfg, ao.hops, c.workers, [&](const std::string& s) { out << s << '\n'; });
  write_ablation_csv(dir / "ablation.csv", rows);
  open_file(dir / "ablation.txt") << ablation_table(rows);
  out << ablation_table(rows);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_json(dir, "ablate", cfg.hash(), cfg.seed, seconds, {{"hops", ao.hops}});
  return kExitOk;
}

// ---- synth -----------------------------------------------------------------

int synth_verb(const Common& c, const SynthOptions& so, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = output_dir(c);
  const std::uint64_t seed = c.seed.value_or(0);
  const auto ds = generate_synthetic(so.spec, seed, dir);
  out << "wrote " << ds.identities.size() << " identities, " << ds.track_count() << " tracks, " << ds.frame_count()
      << " frames to " << dir.string() << '\n';
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_json(dir, "synth", so.spec.hash(), seed, seconds,
                 {{"identities", so.spec.identities}, {"frames_per_track", so.spec.frames_per_track}});
  return kExitOk;
}

// ---- flow ------------------------------------------------------------------

// Direction as hue, magnitude (relative to the largest) as value.
RawFrame flow_image(const FlowField& f) {
  const std::size_t h = f.flow.dim(1), w = f.flow.dim(2);
  double max_mag = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) max_mag = std::max<double>(max_mag, std::hypot(f.flow.at(0, y, x), f.flow.at(1, y, x)));
  RawFrame img(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = f.flow.at(0, y, x), v = f.flow.at(1, y, x);
      const double val = max_mag > 0 ? std::hypot(u, v) / max_mag : 0.0;
      const double hue = (std::atan2(v, u) + std::numbers::pi) / (2 * std::numbers::pi) * 6.0;
      const int sector = static_cast<int>(hue) % 6;
      const double frac = hue - std::floor(hue);
      const double rgb[6][3] = {{1, frac, 0}, {1 - frac, 1, 0}, {0, 1, frac}, {0, 1 - frac, 1}, {frac, 0, 1}, {1, 0, 1 - frac}};
      auto* p = img.pixel(x, y);
      for (int k = 0; k < 3; ++k) p[k] = static_cast<std::uint8_t>(std::lround(255.0 * val * rgb[sector][k]));
    }
  }
  return img;
}

int flow_verb(const Common& c, const FlowOptions& fo, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = output_dir(c);
  const auto a = read_image(fo.prev);
  const auto b = read_image(fo.next);
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("flow: frames differ in size");
  LucasKanadeOptions lk;
  lk.window = fo.window;
  lk.min_eigenvalue = fo.min_eigenvalue;
  const auto field = lucas_kanade_flow(channel(rgb_to_yuv(a), 0), channel(rgb_to_yuv(b), 0), lk);

  auto f = open_file(dir / "flow.csv");
  f << "x,y,u,v,degenerate\n";
  f.precision(7);
  const std::size_t h = field.flow.dim(1), w = field.flow.dim(2);
  double sum_u = 0, sum_v = 0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = field.flow.at(0, y, x), v = field.flow.at(1, y, x);
      sum_u += u;
      sum_v += v;
      f << x << ',' << y << ',' << u << ',' << v << ',' << int(field.degenerate[y * w + x]) << '\n';
    }
  }
  write_png(dir / "flow.png", flow_image(field));
  out << "mean flow (" << sum_u / double(h * w) << ", " << sum_v / double(h * w) << ") px, "
      << field.degenerate_count() << " of " << h * w << " pixels degenerate\n";
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_json(dir, "flow", "", 0, seconds, {{"prev", fo.prev}, {"next", fo.next}});
  return kExitOk;
}

// ---- gradcheck -------------------------------------------------------------

int gradcheck_verb(const Common& c, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = c.seed.value_or(0);
  auto reports = run_op_gradchecks(seed);
  reports.push_back(run_end_to_end_gradcheck(seed));
  std::ostringstream table;
  bool ok = true;
  for (const auto& r : reports) {
    ok = ok && r.passed();
    table << (r.passed() ? "PASS  " : "FAIL  ") << std::left << std::setw(76) << r.name << std::right
          << " max rel err " << std::scientific << std::setprecision(3) << r.max_relative_error << " (< "
          << r.threshold << ")  cases " << r.cases << std::defaultfloat << '\n';
  }
  out << table.str();
  if (!c.out.empty()) {
    const auto dir = output_dir(c);
    open_file(dir / "gradcheck.txt") << table.str();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_json(dir, "gradcheck", "", seed, seconds, {{"passed", ok}});
  }
  return ok ? kExitOk : kExitFailure;
}

void add_out(CLI::App* sub, Common& c) { sub->add_option("--out", c.out, "Output directory")->required(); }

// Options of the verbs that read a dataset and a configuration.
void add_training_options(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "Flat key=value configuration file")->check(CLI::ExistingFile);
  sub->add_option("--data", c.data, "Dataset root directory")->required();
  sub->add_option("--format", c.format, "Dataset layout: ilids-vid, prid2011, synthetic-dir");
  add_out(sub, c);
  sub->add_option("--seed", c.seed, "Seed override");
  sub->add_option("--set", c.overrides, "Configuration override key=value (repeatable)");
  sub->add_option("--workers", c.workers, "Frame-level worker threads")->check(CLI::PositiveNumber);
}

constexpr const char* kVerbs[] = {"train", "eval", "ablate", "synth", "flow", "gradcheck"};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video person re-identification with spatial-temporal attention", "reid"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;
  SynthOptions synth;
  FlowOptions flow;
  EvalOptions eval_opts;
  AblateOptions ablate;

  auto* train_cmd = app.add_subcommand("train", "Train on the train half of a seeded split; writes model.ckpt and loss.csv");
  add_training_options(train_cmd, common);

  auto* eval_cmd = app.add_subcommand(
      "eval", "With --model: CMC of one checkpoint on its split's test half. Without: the repeated-split protocol");
  add_training_options(eval_cmd, common);
  eval_cmd->add_option("--model,--checkpoint", common.model, "Checkpoint from `train`")->check(CLI::ExistingFile);
  eval_cmd->add_flag("--dump-attention", eval_opts.dump_attention, "Write per-frame attention scores (needs --model)");

  auto* ablate_cmd = app.add_subcommand("ablate", "Retrain and evaluate per spatial hop count");
  add_training_options(ablate_cmd, common);
  ablate_cmd->add_option("--hops", ablate.hops, "Hop counts, in row order")->delimiter(',');

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic two-camera dataset with manifest");
  add_out(synth_cmd, common);
  synth_cmd->add_option("--seed", common.seed, "Generator seed");
  synth_cmd->add_option("--identities", synth.spec.identities);
  synth_cmd->add_option("--frames", synth.spec.frames_per_track, "Frames per track");
  synth_cmd->add_option("--width", synth.spec.width);
  synth_cmd->add_option("--height", synth.spec.height);
  synth_cmd->add_option("--texture-seed", synth.spec.texture_seed);
  synth_cmd->add_option("--occlusion", synth.spec.occlusion_probability, "Per-frame occluder probability");
  synth_cmd->add_option("--occluder-width", synth.spec.occluder_width);
  synth_cmd->add_option("--occluder-height", synth.spec.occluder_height);
  synth_cmd->add_option("--brightness-shift", synth.spec.camera_brightness_shift, "Camera-2 brightness offset (0..255)");
  synth_cmd->add_option("--hue-shift", synth.spec.camera_hue_shift, "Camera-2 hue rotation in degrees");
  synth_cmd->add_option("--min-speed", synth.spec.min_speed);
  synth_cmd->add_option("--max-speed", synth.spec.max_speed);

  auto* flow_cmd = app.add_subcommand("flow", "Lucas-Kanade flow between two frames; writes flow.csv and flow.png");
  add_out(flow_cmd, common);
  flow_cmd->add_option("--prev", flow.prev, "First frame")->required()->check(CLI::ExistingFile);
  flow_cmd->add_option("--next", flow.next, "Second frame")->required()->check(CLI::ExistingFile);
  flow_cmd->add_option("--window", flow.window, "Odd window size");
  flow_cmd->add_option("--min-eigenvalue", flow.min_eigenvalue);

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks for every differentiable op");
  grad_cmd->add_option("--seed", common.seed, "Seed for the random cases");
  grad_cmd->add_option("--out", common.out, "Optional output directory for the report");

  if (!args.empty() && args[0].rfind('-', 0) != 0 &&
      std::find(std::begin(kVerbs), std::end(kVerbs), args[0]) == std::end(kVerbs)) {
    err << "error: unknown verb '" << args[0] << "'\n\n" << app.help();
    return kExitUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  // Bad configuration values are usage errors; everything after is a runtime failure.
  TrainConfig cfg;
  try {
    if (*synth_cmd) synth.spec.validate();
    if (*train_cmd || *eval_cmd || *ablate_cmd) cfg = resolve_config(common);
    if (eval_opts.dump_attention && common.model.empty()) throw std::invalid_argument("--dump-attention needs --model");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const bool f32 = cfg.precision == Precision::kFloat32;
    if (*synth_cmd) return synth_verb(common, synth, out);
    if (*flow_cmd) return flow_verb(common, flow, out);
    if (*grad_cmd) return gradcheck_verb(common, out);
    if (*train_cmd) return f32 ? train_verb<float>(common, cfg, out, err) : train_verb<double>(common, cfg, out, err);
    if (*eval_cmd) {
      if (common.model.empty()) return eval_protocol_verb(common, cfg, out);
      return f32 ? eval_checkpoint<float>(common, cfg, eval_opts, out)
                 : eval_checkpoint<double>(common, cfg, eval_opts, out);
    }
    if (*ablate_cmd) return ablate_verb(common, cfg, ablate, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace reid::cli

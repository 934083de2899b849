#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cli.hpp"
#include "reid/config.hpp"
#include "support.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t file_count(const fs::path& root) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(root)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST_CASE("config: defaults") {
  TrainConfig c;
  CHECK(c.margin == 2.0);
  CHECK(c.lr == 1e-4);
  CHECK(c.epochs == 1100);
  CHECK(c.T == 16);
  CHECK(c.hops == 3);
  CHECK(c.fusion == Fusion::kLiteral);
  CHECK(c.fc_tanh);
  CHECK(c.test_max_frames == 128);
  CHECK(c.runs == 10);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config: parsing, comments and canonical text") {
  std::istringstream in(
      "# sweep\n\nmargin = 3\nlr=0.001\nepochs=5\nT=8\nhops=0\nseed=42\nfusion=single_ft\n"
      "fc_activation=none\nprecision=float64\naugment=off\ngrad_clip=0\n");
  auto c = parse_config(in);
  CHECK(c.margin == 3.0);
  CHECK(c.lr == 1e-3);
  CHECK(c.epochs == 5);
  CHECK(c.T == 8);
  CHECK(c.hops == 0);
  CHECK(c.seed == 42);
  CHECK(c.fusion == Fusion::kSingleFt);
  CHECK_FALSE(c.fc_tanh);
  CHECK(c.precision == Precision::kFloat64);
  CHECK_FALSE(c.augment);
  CHECK(c.grad_clip == 0.0);
  CHECK(c.model().attention.hops == 0);
  CHECK_FALSE(c.model().feature.fc_tanh);

  std::istringstream again(c.to_text());
  auto d = parse_config(again);
  CHECK(d.to_text() == c.to_text());
  CHECK(d.hash() == c.hash());
  CHECK(c.hash() != TrainConfig{}.hash());
  CHECK(c.hash().size() == 16);
}

TEST_CASE("config: errors name the key and line") {
  std::istringstream unknown("margin=2\nbogus=1\n");
  try {
    parse_config(unknown);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  TrainConfig c;
  CHECK_THROWS_AS(c.apply_override("noequals"), std::invalid_argument);
  CHECK_THROWS_AS(c.apply_override("epochs=ten"), std::invalid_argument);
  CHECK_THROWS_AS(c.apply_override("fusion=mean"), std::invalid_argument);
  CHECK_THROWS_AS(c.apply_override("augment=maybe"), std::invalid_argument);
  for (const char* bad : {"margin=0", "lr=-1", "T=0", "runs=0"}) {
    TrainConfig b;
    b.apply_override(bad);
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
  }
  CHECK(std::string(fusion_name(parse_fusion("literal"))) == "literal");
}

TEST_CASE("cli: usage errors exit 2") {
  auto unknown = run_cli({"frobnicate"});
  CHECK(unknown.code == cli::kExitUsage);
  CHECK(unknown.err.find("unknown verb 'frobnicate'") != std::string::npos);
  CHECK(unknown.err.find("gradcheck") != std::string::npos);

  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"train", "--out", "x"}).code == cli::kExitUsage);
  CHECK(run_cli({"train", "--data", "x", "--out", "y", "--no-such-flag"}).code == cli::kExitUsage);
  CHECK(run_cli({"train", "--data", "x", "--out", "y", "--set", "bogus=1"}).code == cli::kExitUsage);
  CHECK(run_cli({"train", "--data", "x", "--out", "y", "--set", "margin=-1"}).code == cli::kExitUsage);
  CHECK(run_cli({"synth", "--out", "y", "--occlusion", "2"}).code == cli::kExitUsage);
  CHECK(run_cli({"eval", "--data", "x", "--out", "y", "--dump-attention"}).code == cli::kExitUsage);
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
}

TEST_CASE("cli: runtime failures exit 1") {
  testing::TempDir dir("cli-fail");
  auto r = run_cli({"train", "--data", (dir.path() / "missing").string(), "--out", (dir.path() / "o").string()});
  CHECK(r.code == cli::kExitFailure);
  CHECK(r.err.find("missing") != std::string::npos);
}

TEST_CASE("cli: flow writes a field and an image") {
  testing::TempDir dir("cli-flow");
  testing::write_noise_track(dir.path() / "frames", 2, 5);
  const auto out = dir.path() / "flow";
  auto r = run_cli({"flow", "--prev", (dir.path() / "frames" / "frame0001.png").string(), "--next",
                    (dir.path() / "frames" / "frame0001.png").string(), "--out", out.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("mean flow (0, 0)") != std::string::npos);
  const auto csv = slurp(out / "flow.csv");
  CHECK(csv.rfind("x,y,u,v,degenerate\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 16 * 32);
  CHECK(read_image(out / "flow.png").width == 16);
  auto meta = nlohmann::json::parse(slurp(out / "run.json"));
  CHECK(meta["verb"] == "flow");
}

TEST_CASE("cli: gradcheck reports every op") {
  testing::TempDir dir("cli-grad");
  auto r = run_cli({"gradcheck", "--seed", "3", "--out", dir.path().string()});
  CHECK(r.code == cli::kExitOk);
  for (const char* op : {"conv2d", "maxpool2d", "linear", "tanh", "sigmoid", "softmax_xent", "squared_hinge",
                         "temporal attention", "spatial attention", "fuse", "end-to-end"})
    CHECK(r.out.find(op) != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(slurp(dir.path() / "gradcheck.txt") == r.out);
}

TEST_CASE("cli: synth, train, eval and ablate on a small synthetic set") {
  testing::TempDir dir("cli-pipe");
  const auto data = dir.path() / "data";
  auto s = run_cli({"synth", "--out", data.string(), "--identities", "4", "--frames", "8", "--seed", "2"});
  REQUIRE(s.code == cli::kExitOk);
  CHECK(s.out.find("4 identities, 8 tracks, 64 frames") != std::string::npos);
  CHECK(fs::exists(data / "manifest.csv"));
  const auto data_files = file_count(data);

  const auto cfg_path = dir.path() / "quick.cfg";
  std::ofstream(cfg_path) << "epochs=3\nT=4\nhops=1\nruns=1\n";
  const std::vector<std::string> common = {"--data", data.string(), "--format", "synthetic-dir", "--config",
                                           cfg_path.string(), "--workers", "2"};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail = {}) {
    head.insert(head.end(), common.begin(), common.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };

  const auto train_dir = dir.path() / "train";
  auto t = run_cli(with({"train", "--out", train_dir.string()}, {"--seed", "7"}));
  REQUIRE(t.code == cli::kExitOk);
  for (const char* f : {"model.ckpt", "loss.csv", "split.csv", "config.txt", "run.json"})
    CHECK(fs::exists(train_dir / f));
  CHECK(slurp(train_dir / "loss.csv").rfind("epoch,pos_loss,neg_loss,id_loss_1,id_loss_2\n1,", 0) == 0);
  CHECK(slurp(train_dir / "config.txt").find("seed=7\n") != std::string::npos);
  auto meta = nlohmann::json::parse(slurp(train_dir / "run.json"));
  CHECK(meta["verb"] == "train");
  CHECK(meta["seed"] == 7);
  CHECK(meta.contains("config_hash"));
  CHECK(meta.contains("wall_time_seconds"));
  CHECK(file_count(data) == data_files);

  const auto eval_dir = dir.path() / "eval";
  auto e = run_cli(with({"eval", "--model", (train_dir / "model.ckpt").string(), "--out", eval_dir.string()},
                        {"--seed", "7", "--dump-attention"}));
  REQUIRE(e.code == cli::kExitOk);
  CHECK(e.out.find("Rank-1") != std::string::npos);
  for (const char* f : {"cmc.csv", "summary.csv", "summary.txt", "ranks.csv", "attention.csv", "run.json"})
    CHECK(fs::exists(eval_dir / f));
  CHECK(slurp(eval_dir / "cmc.csv").find("mean,2,1\n") != std::string::npos);
  const auto att = slurp(eval_dir / "attention.csv");
  CHECK(att.find(",temporal,,,") != std::string::npos);
  CHECK(att.find(",hop1,") != std::string::npos);

  auto mismatch = run_cli(with({"eval", "--model", (train_dir / "model.ckpt").string(), "--out",
                                (dir.path() / "bad").string()},
                               {"--set", "hops=2"}));
  CHECK(mismatch.code == cli::kExitFailure);
  CHECK(mismatch.err.find("hop") != std::string::npos);

  const auto proto_dir = dir.path() / "protocol";
  auto p = run_cli(with({"eval", "--out", proto_dir.string()}));
  REQUIRE(p.code == cli::kExitOk);
  CHECK(slurp(proto_dir / "summary.csv").rfind("run,seed,rank1,rank5,rank10,rank20\n0,0,", 0) == 0);

  const auto ablate_dir = dir.path() / "ablate";
  auto a = run_cli(with({"ablate", "--out", ablate_dir.string(), "--hops", "1,0"}));
  REQUIRE(a.code == cli::kExitOk);
  CHECK(a.out.find("No. of Att. layers") != std::string::npos);
  const auto csv = slurp(ablate_dir / "ablation.csv");
  CHECK(csv.rfind("hops,rank1,rank5,rank10,rank20\n1,", 0) == 0);
  CHECK(csv.find("\n0,") != std::string::npos);

  const auto div_dir = dir.path() / "diverged";
  auto d = run_cli(with({"train", "--out", div_dir.string()}, {"--set", "lr=1e30", "--set", "grad_clip=0"}));
  CHECK(d.code == cli::kExitFailure);
  CHECK(fs::exists(div_dir / "diverged.ckpt"));
  CHECK_FALSE(fs::exists(div_dir / "model.ckpt"));
  CHECK(file_count(data) == data_files);
}

#include "reid/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "reid/hash.hpp"

namespace reid {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw std::invalid_argument("config: " + key + "=" + value + " is not " + expected);
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (used != v.size()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

}  // namespace

const char* fusion_name(Fusion f) { return f == Fusion::kLiteral ? "literal" : "single_ft"; }

Fusion parse_fusion(const std::string& name) {
  if (name == "literal") return Fusion::kLiteral;
  if (name == "single_ft") return Fusion::kSingleFt;
  throw std::invalid_argument("config: fusion=" + name + " is not one of literal, single_ft");
}

ModelConfig TrainConfig::model() const {
  ModelConfig m;
  m.feature.fc_tanh = fc_tanh;
  m.attention.hops = hops;
  m.attention.fusion = fusion;
  m.attention.temporal_bias = temporal_bias;
  return m;
}

void TrainConfig::validate() const {
  if (!(margin > 0)) throw std::invalid_argument("config: margin must be > 0");
  if (!(lr >= 0)) throw std::invalid_argument("config: lr must be >= 0");
  if (T < 1) throw std::invalid_argument("config: T must be >= 1");
  if (test_max_frames < 1) throw std::invalid_argument("config: test_max_frames must be >= 1");
  if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
  if (!(grad_clip >= 0)) throw std::invalid_argument("config: grad_clip must be >= 0");
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const auto v = trim(raw);
  if (key == "margin") {
    margin = parse_real(key, v);
  } else if (key == "lr") {
    lr = parse_real(key, v);
  } else if (key == "epochs") {
    epochs = parse_count(key, v);
  } else if (key == "T") {
    T = parse_count(key, v);
  } else if (key == "hops") {
    hops = parse_count(key, v);
  } else if (key == "seed") {
    seed = parse_count(key, v);
  } else if (key == "fusion") {
    fusion = parse_fusion(v);
  } else if (key == "fc_activation") {
    if (v == "tanh") {
      fc_tanh = true;
    } else if (v == "none") {
      fc_tanh = false;
    } else {
      bad_value(key, v, "one of tanh, none");
    }
  } else if (key == "temporal_bias") {
    temporal_bias = parse_bool(key, v);
  } else if (key == "precision") {
    if (v == "float32") {
      precision = Precision::kFloat32;
    } else if (v == "float64") {
      precision = Precision::kFloat64;
    } else {
      bad_value(key, v, "one of float32, float64");
    }
  } else if (key == "test_max_frames") {
    test_max_frames = parse_count(key, v);
  } else if (key == "augment") {
    augment = parse_bool(key, v);
  } else if (key == "runs") {
    runs = parse_count(key, v);
  } else if (key == "grad_clip") {
    grad_clip = parse_real(key, v);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void TrainConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("config: expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "margin=" << margin << "\nlr=" << lr << "\nepochs=" << epochs << "\nT=" << T << "\nhops=" << hops
     << "\nseed=" << seed << "\nfusion=" << fusion_name(fusion) << "\nfc_activation=" << (fc_tanh ? "tanh" : "none")
     << "\ntemporal_bias=" << (temporal_bias ? "true" : "false")
     << "\nprecision=" << (precision == Precision::kFloat32 ? "float32" : "float64")
     << "\ntest_max_frames=" << test_max_frames << "\naugment=" << (augment ? "true" : "false") << "\nruns=" << runs
     << "\ngrad_clip=" << grad_clip << '\n';
  return os.str();
}

std::string TrainConfig::hash() const { return fnv1a_hex(to_text()); }

TrainConfig parse_config(std::istream& in) {
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      cfg.apply_override(t);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

}  // namespace reid

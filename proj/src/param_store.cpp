#include "reid/param_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reid {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Tensor<T> init) {
  if (contains(name)) throw std::invalid_argument("param store: duplicate parameter '" + name + "'");
  Tensor<T> grad(init.shape());
  init.requires_grad = true;
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{name, std::move(init), std::move(grad)});
  return entries_.back().value;
}

template <typename T>
std::size_t ParamStore<T>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("param store: no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.grad.fill(T{0});
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

template <typename T>
void sgd_step(ParamStore<T>& params, T lr) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.value_at(i);
    auto& g = params.grad_at(i);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
    g.fill(T{0});
  }
}

template class ParamStore<float>;
template class ParamStore<double>;
template void sgd_step<float>(ParamStore<float>&, float);
template void sgd_step<double>(ParamStore<double>&, double);

// ---------------------------------------------------------------------------
// Checkpoint container

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& [n, _] : entries)
    if (n == name) return true;
  return false;
}

const Tensor<float>& Checkpoint::at(const std::string& name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return t;
  throw std::out_of_range("checkpoint: no entry named '" + name + "'");
}

void Checkpoint::set(const std::string& name, Tensor<float> value) {
  for (auto& [n, t] : entries) {
    if (n == name) {
      t = std::move(value);
      return;
    }
  }
  entries.emplace_back(name, std::move(value));
}

namespace {

constexpr char kMagic[4] = {'R', 'I', 'D', 'P'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated data");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [name, t] : ckpt.entries) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw std::runtime_error("checkpoint: bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = r.u32();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str(r.u32());
    const auto rank = r.u32();
    if (rank == 0 || rank > 4) throw std::runtime_error("checkpoint: bad rank for '" + name + "'");
    Shape shape(rank);
    for (auto& e : shape) e = r.u32();
    std::vector<float> values(shape_numel(shape));
    for (auto& v : values) v = std::bit_cast<float>(r.u32());
    ckpt.entries.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

template <typename T>
void store_into(Checkpoint& ckpt, const ParamStore<T>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.set(params.name_at(i), params.value_at(i).template cast<float>());
  }
}

template <typename T>
ParamStore<T> params_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix) {
  ParamStore<T> out;
  for (const auto& [name, t] : ckpt.entries) {
    if (name.rfind(prefix, 0) == 0) out.add(name, t.template cast<T>());
  }
  return out;
}

template void store_into<float>(Checkpoint&, const ParamStore<float>&);
template void store_into<double>(Checkpoint&, const ParamStore<double>&);
template ParamStore<float> params_from_checkpoint<float>(const Checkpoint&, const std::string&);
template ParamStore<double> params_from_checkpoint<double>(const Checkpoint&, const std::string&);

}  // namespace reid

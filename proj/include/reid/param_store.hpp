#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "reid/tensor.hpp"

namespace reid {

/// Named parameter tensors, each paired with a gradient buffer of the same
/// shape. References returned by value()/grad() stay valid as entries are added.
template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> init);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  const std::string& name_at(std::size_t i) const { return entries_.at(i).name; }

  Tensor<T>& value(const std::string& name) { return entries_[index_of(name)].value; }
  const Tensor<T>& value(const std::string& name) const { return entries_[index_of(name)].value; }
  Tensor<T>& grad(const std::string& name) { return entries_[index_of(name)].grad; }
  const Tensor<T>& grad(const std::string& name) const { return entries_[index_of(name)].grad; }

  Tensor<T>& value_at(std::size_t i) { return entries_.at(i).value; }
  const Tensor<T>& value_at(std::size_t i) const { return entries_.at(i).value; }
  Tensor<T>& grad_at(std::size_t i) { return entries_.at(i).grad; }
  const Tensor<T>& grad_at(std::size_t i) const { return entries_.at(i).grad; }

  void zero_grad();

  /// Total number of scalar parameters.
  std::size_t scalar_count() const;

  /// Same parameters at another precision; gradients start at zero.
  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

 private:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
  };
  std::deque<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// p <- p - lr * grad(p) for every parameter, then all gradients are zeroed.
template <typename T>
void sgd_step(ParamStore<T>& params, T lr);

/// On-disk parameter container. Values are always stored as 32-bit floats.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor<float>>> entries;

  bool contains(const std::string& name) const;
  const Tensor<float>& at(const std::string& name) const;
  void set(const std::string& name, Tensor<float> value);
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

template <typename T>
void store_into(Checkpoint& ckpt, const ParamStore<T>& params);

/// Builds a parameter store from every checkpoint entry whose name starts with `prefix`.
template <typename T>
ParamStore<T> params_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix = "");

}  // namespace reid

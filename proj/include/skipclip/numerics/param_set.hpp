#pragma once

#include <string>
#include <utility>
#include <vector>

#include "skipclip/errors.hpp"
#include "skipclip/numerics/tensor.hpp"

namespace skipclip::numerics {

/// Ordered collection of uniquely named tensors.
template <typename T>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    BasicTensor<T> tensor;
  };

  void add(std::string name, BasicTensor<T> tensor) {
    if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    entries_.push_back(Entry{std::move(name), std::move(tensor)});
  }

  const BasicTensor<T>* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }
  BasicTensor<T>* find(const std::string& name) {
    for (auto& e : entries_)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }
  const BasicTensor<T>& at(const std::string& name) const {
    if (auto* t = find(name)) return *t;
    throw ConfigError("unknown parameter '" + name + "'");
  }
  BasicTensor<T>& at(const std::string& name) {
    if (auto* t = find(name)) return *t;
    throw ConfigError("unknown parameter '" + name + "'");
  }

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Same names and shapes, zero-filled.
  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& e : entries_) out.add(e.name, BasicTensor<T>(e.tensor.shape()));
    return out;
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.tensor.template cast<U>());
    return out;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i)
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].tensor == b.entries_[i].tensor))
        return false;
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace skipclip::numerics

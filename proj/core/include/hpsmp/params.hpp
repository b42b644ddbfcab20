#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "hpsmp/errors.hpp"
#include "hpsmp/tensor.hpp"

namespace hpsmp {

/// Named collection of parameter tensors with a stable (insertion) order, so
/// optimizer sweeps and checkpoints are deterministic.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor t, bool trainable = true) {
    if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, std::move(t), trainable});
    return entries_.back().tensor;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return entries_[it->second].tensor;
  }

  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return entries_[it->second].tensor;
  }

  bool trainable(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return entries_[it->second].trainable;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
  }

  std::size_t count() const { return entries_.size(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  /// Deep copy: the clone's tensors do not alias this set's storage.
  ParamSet clone() const {
    ParamSet out;
    for (const auto& e : entries_) out.add(e.name, e.tensor.clone(), e.trainable);
    return out;
  }

  /// Registers every tensor with the graph so backward() populates grads.
  void watch_all(Graph& graph) const {
    for (const auto& e : entries_) graph.watch(e.tensor);
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& e : entries_) fn(e.name, e.tensor, e.trainable);
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& e : entries_) fn(e.name, e.tensor, e.trainable);
  }

 private:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace hpsmp

// Copyright 2026 The malsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mal/tensor.hpp"

namespace mal {

/// Deterministic per-name generator: splitmix64 over (seed, FNV-1a(name)).
/// Seeding by name keeps a parameter's initial value independent of which
/// other parameters a model happens to register.
class NamedRng {
 public:
  NamedRng(std::uint64_t seed, std::string_view name) : state_(seed ^ fnv1a(name)) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return h;
  }

 private:
  std::uint64_t state_;
};

/// Insertion-ordered map from dotted parameter name to a leaf tensor that
/// requires gradients.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  /// Registers a parameter. Rank-2 shapes get uniform ±sqrt(6/(fan_in+fan_out))
  /// values drawn from NamedRng(seed, name); other shapes start at zero.
  Tensor<T> add(const std::string& name, Shape shape, std::uint64_t seed) {
    const std::size_t n = shape_size(shape);
    std::vector<T> values(n, T(0));
    if (shape.size() == 2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      NamedRng rng(seed, name);
      for (auto& v : values) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
    }
    return add_values(name, std::move(shape), std::move(values));
  }

  Tensor<T> add_values(const std::string& name, Shape shape, std::vector<T> values) {
    if (index_.contains(name)) throw Error("duplicate parameter name: " + name);
    Tensor<T> t(std::move(shape), std::move(values), true);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, t});
    return t;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  const Tensor<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter: " + name);
    return entries_[it->second].tensor;
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mal

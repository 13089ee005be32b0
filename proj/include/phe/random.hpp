#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace phe {

/// A seeded random stream that can derive independent child streams.
///
/// Every stream remembers the key path that created it. A child stream is
/// seeded from the full path through std::seed_seq, so the numbers it
/// produces depend only on the path and never on how many draws the parent
/// or any sibling has made. Experiments key children by (cell, seed,
/// episode, step) and parallel scheduling cannot change a result.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t root = 0) : path_{root} { reseed(); }

  RandomStream substream(std::uint64_t key) const {
    RandomStream child;
    child.path_ = path_;
    child.path_.push_back(key);
    child.reseed();
    return child;
  }

  RandomStream substream(std::initializer_list<std::uint64_t> keys) const {
    RandomStream child;
    child.path_ = path_;
    child.path_.insert(child.path_.end(), keys.begin(), keys.end());
    child.reseed();
    return child;
  }

  RandomStream substream(std::string_view label) const { return substream(hash_label(label)); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }

  std::mt19937_64& engine() { return engine_; }
  const std::vector<std::uint64_t>& path() const { return path_; }

  /// FNV-1a, stable across platforms and runs.
  static std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : label) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  void reseed() {
    std::vector<std::uint32_t> words;
    words.reserve(2 * path_.size() + 1);
    words.push_back(static_cast<std::uint32_t>(path_.size()));
    for (std::uint64_t k : path_) {
      words.push_back(static_cast<std::uint32_t>(k & 0xffffffffULL));
      words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
    normal_.reset();
  }

  std::vector<std::uint64_t> path_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace phe

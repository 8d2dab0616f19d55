#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace senskit {

// Counter-based generator: output i is mix(key + i*phi), so a stream is fully
// determined by its 64-bit key and substreams are cheap key derivations.
// Deliberately not std::mt19937 + std::uniform_*_distribution: those are
// implementation-defined and experiment outputs must be byte-stable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ kSeedSalt)) {}

  std::uint64_t next_u64() { return mix(key_ + (++ctr_) * kPhi); }

  // 53-bit uniform in [0,1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("Rng::uniform: empty interval");
    return lo + (hi - lo) * next_double();
  }

  // Unbiased index in [0,n) via mask rejection.
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
    std::uint64_t mask = n - 1;
    mask |= mask >> 1; mask |= mask >> 2; mask |= mask >> 4;
    mask |= mask >> 8; mask |= mask >> 16; mask |= mask >> 32;
    for (;;) {
      const std::uint64_t v = next_u64() & mask;
      if (v < n) return static_cast<std::size_t>(v);
    }
  }

  // Weighted index draw; zero-weight entries are never selected.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("Rng::categorical: negative weight");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("Rng::categorical: zero total weight");
    double target = next_double() * total;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last_positive = i;
      target -= weights[i];
      if (target < 0.0) return i;
    }
    return last_positive;  // fp slack lands on the final positive entry
  }

  // Derived substreams: child key depends on the parent key and the label only,
  // never on how much the parent has been consumed.
  Rng sub(std::uint64_t label) const { return Rng(FromKey{}, mix(key_ ^ mix(label * kPhi + kLabelSalt))); }
  Rng sub(std::string_view label) const { return sub(fnv1a(label)); }
  Rng sub(std::string_view label, std::uint64_t index) const { return sub(label).sub(index ^ kIndexSalt); }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  static constexpr std::uint64_t kPhi = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x5851f42d4c957f2dULL;
  static constexpr std::uint64_t kLabelSalt = 0x14057b7ef767814fULL;
  static constexpr std::uint64_t kIndexSalt = 0x2545f4914f6cdd1dULL;

  static std::uint64_t mix(std::uint64_t z) {
    z += kPhi;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

// Cumulative-sum sampler for repeated draws from one fixed weight vector.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::span<const double> weights) {
    cumulative_.reserve(weights.size());
    double run = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("DiscreteSampler: negative weight");
      run += w;
      cumulative_.push_back(run);
    }
    if (cumulative_.empty() || run <= 0.0)
      throw std::invalid_argument("DiscreteSampler: zero total weight");
    total_ = run;
  }

  std::size_t draw(Rng& rng) const {
    const double target = rng.next_double() * total_;
    std::size_t lo = 0, hi = cumulative_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cumulative_[mid] > target) hi = mid; else lo = mid + 1;
    }
    // Interior zero-weight entries are unreachable (strict > search); only the
    // fp corner target == total can land on a zero-weight tail. Walk back.
    while (lo > 0 && weight_at(lo) <= 0.0) --lo;
    return lo;
  }

  double total() const { return total_; }

 private:
  double weight_at(std::size_t i) const {
    return i == 0 ? cumulative_[0] : cumulative_[i] - cumulative_[i - 1];
  }

  std::vector<double> cumulative_;
  double total_ = 0.0;
};

}  // namespace senskit

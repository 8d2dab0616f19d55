#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "senskit/rng.hpp"

namespace senskit {

/// Maximal-coupling transition: given index ~ p_old, produce index ~ p_new
/// while keeping the old index with the largest possible probability
/// (min(1, p_new/p_old); on rejection, redraw from the positive part of
/// p_new - p_old). Marginal correctness holds for every (p_old, p_new) pair,
/// which is what lets lazy mode carry sampled indices across steps.
class CouplingStep {
 public:
  CouplingStep(std::span<const double> p_old, std::span<const double> p_new)
      : p_old_(p_old.begin(), p_old.end()), p_new_(p_new.begin(), p_new.end()) {
    if (p_new_.size() < p_old_.size())
      throw std::invalid_argument("CouplingStep: support cannot shrink");
    p_old_.resize(p_new_.size(), 0.0);
    excess_.reserve(p_new_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p_new_.size(); ++i) {
      const double e = p_new_[i] > p_old_[i] ? p_new_[i] - p_old_[i] : 0.0;
      excess_.push_back(e);
      total += e;
    }
    excess_total_ = total;
  }

  std::size_t advance(std::size_t old_index, Rng& rng) const {
    if (old_index >= p_new_.size()) throw std::out_of_range("CouplingStep: bad index");
    const double po = p_old_[old_index];
    const double pn = p_new_[old_index];
    if (po > 0.0) {
      const double keep = pn >= po ? 1.0 : pn / po;
      if (rng.next_double() < keep) return old_index;
    }
    if (excess_total_ <= 0.0) return old_index;  // p unchanged up to fp noise
    if (!sampler_) sampler_.emplace(excess_);
    return sampler_->draw(rng);
  }

  /// Fresh draw from p_new (used when a slot is created mid-stream).
  std::size_t fresh(Rng& rng) const {
    if (!fresh_sampler_) fresh_sampler_.emplace(p_new_);
    return fresh_sampler_->draw(rng);
  }

 private:
  std::vector<double> p_old_;
  std::vector<double> p_new_;
  std::vector<double> excess_;
  double excess_total_ = 0.0;
  mutable std::optional<DiscreteSampler> sampler_;
  mutable std::optional<DiscreteSampler> fresh_sampler_;
};

/// Bank of coupled sample slots over a drifting discrete law. Each slot holds
/// one index whose marginal tracks the current law exactly; a snapshot marks
/// the multiset the last solve used, and drift is the fraction of live slots
/// differing from it (new slots count as drifted).
class CoupledSlots {
 public:
  void advance(std::span<const double> p_new, std::size_t want_slots, Rng& rng) {
    if (want_slots == 0) throw std::invalid_argument("CoupledSlots: need at least one slot");
    CouplingStep step(last_p_, p_new);
    for (std::size_t j = 0; j < indices_.size(); ++j) {
      Rng slot_rng = rng.sub("slot", j);
      indices_[j] = step.advance(indices_[j], slot_rng);
    }
    while (indices_.size() < want_slots) {
      Rng slot_rng = rng.sub("slot", indices_.size());
      indices_.push_back(step.fresh(slot_rng));
    }
    if (indices_.size() > want_slots) indices_.resize(want_slots);
    last_p_.assign(p_new.begin(), p_new.end());
  }

  void snapshot() { snapshot_ = indices_; }

  /// Fraction of the selected index multiset that differs from the snapshot;
  /// 1 before any snapshot exists. Slot growth and shrinkage both count.
  double drift() const {
    if (snapshot_.empty()) return 1.0;
    std::vector<std::size_t> a(indices_.begin(), indices_.end());
    std::vector<std::size_t> b(snapshot_.begin(), snapshot_.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t shared = 0, ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
      if (a[ia] == b[ib]) { ++shared; ++ia; ++ib; }
      else if (a[ia] < b[ib]) ++ia;
      else ++ib;
    }
    const std::size_t span = std::max(a.size(), b.size());
    return static_cast<double>(span - shared) / static_cast<double>(span);
  }

  std::span<const std::size_t> indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }

 private:
  std::vector<double> last_p_;
  std::vector<std::size_t> indices_;
  std::vector<std::size_t> snapshot_;
};

}  // namespace senskit

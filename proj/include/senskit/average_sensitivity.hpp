#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "senskit/dataset.hpp"
#include "senskit/distribution.hpp"
#include "senskit/rng.hpp"
#include "senskit/sensitivity.hpp"

namespace senskit {

/// A randomized procedure whose output is reduced to a discrete summary.
/// Summaries must identify outcomes stably across the deletion views: keys
/// should name points, not positions (the callbacks receive the post-deletion
/// dataset, so the producer is responsible for stable naming).
struct SummarizedAlgorithm {
  // Full outcome distribution (exhaustive mode, inputs of size <= 8).
  std::function<DiscreteDistribution(const Dataset&)> exact;
  // One sampled outcome (monte-carlo mode).
  std::function<std::string(const Dataset&, Rng&)> sample;
};

enum class SensitivityMode { exhaustive, monte_carlo };

struct AverageSensitivity {
  double value = 0.0;
  double error_bar = 0.0;  // additive, O(sqrt(|support|/trials)); 0 when exact
};

/// Average sensitivity: mean TV between the algorithm's output distribution on
/// X and on X with one point deleted, averaged over which point is deleted.
inline AverageSensitivity estimate_average_sensitivity(const SummarizedAlgorithm& algorithm,
                                                       const Dataset& X, SensitivityMode mode,
                                                       long trials, std::uint64_t seed) {
  const std::size_t n = X.size();
  if (n < 2) throw std::invalid_argument("estimate_average_sensitivity: need n >= 2");
  if (mode == SensitivityMode::exhaustive) {
    if (!algorithm.exact)
      throw std::invalid_argument("estimate_average_sensitivity: no exact distribution exposed");
    if (n > 8)
      throw std::invalid_argument("estimate_average_sensitivity: exhaustive mode requires n <= 8");
    const DiscreteDistribution full = algorithm.exact(X);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += tv_distance(full, algorithm.exact(X.without(i)));
    return {acc / static_cast<double>(n), 0.0};
  }
  if (!algorithm.sample)
    throw std::invalid_argument("estimate_average_sensitivity: no sampler exposed");
  if (trials < 100) throw std::invalid_argument("insufficient trials");
  Rng root = Rng(seed).sub("avg-sensitivity");
  const auto empirical = [&](const Dataset& view, std::uint64_t stream_tag) {
    std::map<std::string, long> counts;
    for (long trial = 0; trial < trials; ++trial) {
      Rng trial_rng = root.sub("view", stream_tag).sub("trial", static_cast<std::uint64_t>(trial));
      counts[algorithm.sample(view, trial_rng)]++;
    }
    return DiscreteDistribution::from_counts(counts);
  };
  const DiscreteDistribution full = empirical(X, 0);
  double acc = 0.0;
  std::size_t support = full.support().size();
  for (std::size_t i = 0; i < n; ++i) {
    const DiscreteDistribution del = empirical(X.without(i), i + 1);
    support = std::max(support, del.support().size());
    acc += tv_distance(full, del);
  }
  const double err = std::sqrt(static_cast<double>(support) / static_cast<double>(trials));
  return {acc / static_cast<double>(n), err};
}

// ---- exact machinery for the sensitivity sampler ----

/// Canonical key for a multiset of point ids: sorted, comma-joined.
inline std::string multiset_key(std::vector<std::size_t> ids) {
  std::sort(ids.begin(), ids.end());
  std::ostringstream out;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (j) out << ',';
    out << ids[j];
  }
  return out.str();
}

/// Exact distribution of the index multiset selected by m independent draws
/// from the profile, outcomes keyed by the supplied stable ids. Enumerates all
/// multisets; intended for n <= 8, m <= 5.
inline DiscreteDistribution selection_distribution(const SensitivityProfile& profile,
                                                   std::span<const std::size_t> ids,
                                                   std::size_t m) {
  const std::size_t n = profile.size();
  if (ids.size() != n) throw std::invalid_argument("selection_distribution: ids mismatch");
  if (n > 8 || m > 5)
    throw std::invalid_argument("selection_distribution: exhaustive enumeration needs n <= 8, m <= 5");
  std::map<std::string, double> mass;
  // Multisets as count vectors; probability = m! / prod(c_i!) * prod p_i^{c_i}.
  std::vector<std::size_t> counts(n, 0);
  const std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t from,
                                                                    std::size_t left) {
    if (left == 0) {
      double logp = std::lgamma(static_cast<double>(m) + 1.0);
      std::vector<std::size_t> chosen;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] == 0) continue;
        if (profile.prob(i) == 0.0) return;  // unreachable multiset
        logp -= std::lgamma(static_cast<double>(counts[i]) + 1.0);
        logp += static_cast<double>(counts[i]) * std::log(profile.prob(i));
        for (std::size_t c = 0; c < counts[i]; ++c) chosen.push_back(ids[i]);
      }
      mass[multiset_key(chosen)] += std::exp(logp);
      return;
    }
    if (from == n) return;
    for (std::size_t take = 0; take <= left; ++take) {
      counts[from] = take;
      recurse(from + 1, left - take);
    }
    counts[from] = 0;
  };
  recurse(0, m);
  // Zero-prob indices can leave mass slightly under 1 only through fp noise.
  double total = 0.0;
  for (auto& [k, p] : mass) total += p;
  for (auto& [k, p] : mass) p /= total;
  return DiscreteDistribution(mass);
}

/// Exact TV between the joint (selected id, perturbation draw) laws of a
/// single sensitivity-sampling draw under two profiles. The weight 1/(m*ptilde)
/// is a bijection of ptilde, so TV is computed in ptilde space, where the
/// conditional law given id i is Uniform[p_i, (1+eps/2)p_i].
inline double joint_draw_tv(const SensitivityProfile& a, std::span<const std::size_t> ids_a,
                            const SensitivityProfile& b, std::span<const std::size_t> ids_b,
                            double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("joint_draw_tv: epsilon must lie in (0,1)");
  if (ids_a.size() != a.size() || ids_b.size() != b.size())
    throw std::invalid_argument("joint_draw_tv: ids mismatch");
  std::map<std::size_t, double> pa, pb;
  for (std::size_t i = 0; i < a.size(); ++i) pa[ids_a[i]] += a.prob(i);
  for (std::size_t i = 0; i < b.size(); ++i) pb[ids_b[i]] += b.prob(i);
  const double half_eps = 0.5 * epsilon;
  std::set<std::size_t> all;
  for (const auto& [id, p] : pa) all.insert(id);
  for (const auto& [id, p] : pb) all.insert(id);
  double acc = 0.0;
  for (std::size_t id : all) {
    const double p = pa.count(id) ? pa[id] : 0.0;
    const double q = pb.count(id) ? pb[id] : 0.0;
    if (p > 0.0 && q > 0.0) {
      acc += mixed_uniform_abs_diff(p, p, (1.0 + half_eps) * p, q, q, (1.0 + half_eps) * q);
    } else {
      acc += p + q;  // one-sided component contributes its full mass
    }
  }
  return std::min(1.0, 0.5 * acc);
}

}  // namespace senskit

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "senskit/dataset.hpp"
#include "senskit/rng.hpp"

namespace senskit {

/// Per-point sensitivities and the induced sampling probabilities.
/// sigma is supplied by the caller: each application module has its own
/// closed-form surrogate and the generic sampler never computes a sup itself.
class SensitivityProfile {
 public:
  explicit SensitivityProfile(std::vector<double> sigma) : sigma_(std::move(sigma)) {
    if (sigma_.empty()) throw std::invalid_argument("SensitivityProfile: empty profile");
    total_ = 0.0;
    for (double s : sigma_) {
      if (!(s >= 0.0) || !std::isfinite(s))
        throw std::invalid_argument("SensitivityProfile: sigma must be finite and >= 0");
      total_ += s;
    }
    if (total_ <= 0.0) throw std::invalid_argument("degenerate sensitivities");
    probs_.reserve(sigma_.size());
    for (double s : sigma_) probs_.push_back(s / total_);
  }

  std::size_t size() const { return sigma_.size(); }
  double sigma(std::size_t i) const { return sigma_.at(i); }
  double total() const { return total_; }
  double prob(std::size_t i) const { return probs_.at(i); }
  std::span<const double> probs() const { return probs_; }

 private:
  std::vector<double> sigma_;
  std::vector<double> probs_;
  double total_ = 0.0;
};

/// Sparse weighted subset: index -> accumulated weight. Weights from repeated
/// draws of one index accumulate onto a single entry.
struct WeightedCoreset {
  std::map<std::size_t, double> entries;
  std::size_t m = 0;       // draws taken
  double epsilon = 0.0;    // perturbation parameter used

  std::size_t distinct() const { return entries.size(); }

  double total_weight() const {
    double acc = 0.0;
    for (const auto& [i, w] : entries) acc += w;
    return acc;
  }
};

/// Sensitivity sampling: m independent draws from p = sigma/total; a draw of x
/// adds 1/(m*ptilde) to w(x) with ptilde ~ Uniform[p(x), (1+eps/2)p(x)].
/// The 1/m factor makes the weighted loss an up-to-perturbation unbiased
/// estimator of the full loss; verbatim_weights drops it (increment 1/ptilde)
/// for fidelity experiments.
inline WeightedCoreset sensitivity_sample(const Dataset& X, const SensitivityProfile& profile,
                                          std::size_t m, double epsilon, std::uint64_t seed,
                                          bool verbatim_weights = false) {
  if (profile.size() != X.size())
    throw std::invalid_argument("sensitivity_sample: profile does not match dataset");
  if (m < 1) throw std::invalid_argument("sensitivity_sample: m must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("sensitivity_sample: epsilon must lie in (0,1)");
  WeightedCoreset out;
  out.m = m;
  out.epsilon = epsilon;
  Rng rng = Rng(seed).sub("sensitivity-sample");
  DiscreteSampler sampler(profile.probs());
  const double denom = verbatim_weights ? 1.0 : static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = sampler.draw(rng);
    const double p = profile.prob(i);
    const double ptilde = rng.uniform(p, (1.0 + 0.5 * epsilon) * p);
    out.entries[i] += 1.0 / (denom * ptilde);
  }
  return out;
}

/// Weighted loss of the coreset: sum over entries of w(y) * loss(theta, y).
template <class Theta, class Loss>
double coreset_loss(const WeightedCoreset& coreset, const Dataset& X, const Theta& theta,
                    Loss&& loss) {
  double acc = 0.0;
  for (const auto& [i, w] : coreset.entries) {
    if (i >= X.size()) throw std::out_of_range("coreset_loss: dangling index");
    acc += w * loss(theta, X[i]);
  }
  return acc;
}

template <class Theta, class Loss>
double aggregate_loss(const Dataset& X, const Theta& theta, Loss&& loss) {
  double acc = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) acc += loss(theta, X[i]);
  return acc;
}

}  // namespace senskit

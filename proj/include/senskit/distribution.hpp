#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace senskit {

/// Probability distribution over string-keyed outcomes. Keys are canonical
/// serializations chosen by the producer (e.g. sorted index multisets), so two
/// distributions over the same phenomenon are directly comparable.
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;

  explicit DiscreteDistribution(std::map<std::string, double> mass) : mass_(std::move(mass)) {
    double total = 0.0;
    for (const auto& [key, p] : mass_) {
      if (!(p >= 0.0)) throw std::invalid_argument("DiscreteDistribution: negative mass");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("DiscreteDistribution: mass must sum to 1");
  }

  /// Empirical distribution from outcome counts.
  static DiscreteDistribution from_counts(const std::map<std::string, long>& counts) {
    long total = 0;
    for (const auto& [key, c] : counts) total += c;
    if (total <= 0) throw std::invalid_argument("DiscreteDistribution: empty counts");
    std::map<std::string, double> mass;
    for (const auto& [key, c] : counts)
      if (c > 0) mass[key] = static_cast<double>(c) / static_cast<double>(total);
    return DiscreteDistribution(std::move(mass));
  }

  double mass(const std::string& key) const {
    auto it = mass_.find(key);
    return it == mass_.end() ? 0.0 : it->second;
  }

  const std::map<std::string, double>& support() const { return mass_; }

 private:
  std::map<std::string, double> mass_;
};

/// (1/2) sum |p - q| over the union of supports; in [0,1].
inline double tv_distance(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  double acc = 0.0;
  for (const auto& [key, pm] : p.support()) acc += std::abs(pm - q.mass(key));
  for (const auto& [key, qm] : q.support())
    if (p.mass(key) == 0.0) acc += qm;
  return std::min(1.0, 0.5 * acc);
}

/// Exact TV between Uniform[a1,b1] and Uniform[a2,b2] with positive widths:
/// densities are constant, so TV = 1 - overlap * min(density).
inline double uniform_tv(double a1, double b1, double a2, double b2) {
  if (!(b1 > a1) || !(b2 > a2)) throw std::invalid_argument("uniform_tv: empty interval");
  const double overlap = std::max(0.0, std::min(b1, b2) - std::max(a1, a2));
  const double dmin = std::min(1.0 / (b1 - a1), 1.0 / (b2 - a2));
  return std::min(1.0, std::max(0.0, 1.0 - overlap * dmin));
}

/// TV between the perturbation laws Uniform[B,(1+eps)B] and Uniform[B',(1+eps)B'].
inline double uniform_interval_tv(double b, double b_prime, double epsilon) {
  if (!(b > 0.0) || !(b_prime > 0.0))
    throw std::invalid_argument("uniform_interval_tv: interval base must be positive");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("uniform_interval_tv: epsilon must be positive");
  return uniform_tv(b, (1.0 + epsilon) * b, b_prime, (1.0 + epsilon) * b_prime);
}

/// Integral of |m1*f1 - m2*f2| where f_i is the Uniform[a_i,b_i] density and
/// m_i >= 0 a component mass. Piecewise constant, so integrate per segment.
/// Building block for exact joint (index, weight) TV of mixture laws.
inline double mixed_uniform_abs_diff(double m1, double a1, double b1,
                                     double m2, double a2, double b2) {
  if (!(b1 > a1) || !(b2 > a2))
    throw std::invalid_argument("mixed_uniform_abs_diff: empty interval");
  const double d1 = m1 / (b1 - a1);
  const double d2 = m2 / (b2 - a2);
  double cuts[4] = {a1, b1, a2, b2};
  std::sort(std::begin(cuts), std::end(cuts));
  double acc = 0.0;
  for (int s = 0; s < 3; ++s) {
    const double lo = cuts[s], hi = cuts[s + 1];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi);
    const double h1 = (mid >= a1 && mid <= b1) ? d1 : 0.0;
    const double h2 = (mid >= a2 && mid <= b2) ? d2 : 0.0;
    acc += std::abs(h1 - h2) * (hi - lo);
  }
  return acc;
}

}  // namespace senskit

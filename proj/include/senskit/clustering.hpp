#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "senskit/coupling.hpp"
#include "senskit/dataset.hpp"
#include "senskit/ledger.hpp"
#include "senskit/online.hpp"
#include "senskit/rng.hpp"

namespace senskit::clustering {

/// k candidate centers for power-z cost. z >= 1; centers share one dimension.
struct CenterSet {
  std::vector<Eigen::VectorXd> centers;
  double z = 2.0;

  CenterSet() = default;
  CenterSet(std::vector<Eigen::VectorXd> c, double zz) : centers(std::move(c)), z(zz) {
    if (centers.empty()) throw std::invalid_argument("CenterSet: no centers");
    if (!(z >= 1.0)) throw std::invalid_argument("CenterSet: z must be >= 1");
    for (const auto& p : centers) {
      if (p.size() != centers.front().size())
        throw std::invalid_argument("CenterSet: mixed dimensions");
      if (!p.allFinite()) throw std::invalid_argument("CenterSet: non-finite center");
    }
  }

  std::size_t k() const { return centers.size(); }

  static CenterSet at_origin(int d, std::size_t k, double z) {
    return {std::vector<Eigen::VectorXd>(k, Eigen::VectorXd::Zero(d)), z};
  }
};

inline bool operator==(const CenterSet& a, const CenterSet& b) {
  if (a.z != b.z || a.centers.size() != b.centers.size()) return false;
  for (std::size_t i = 0; i < a.centers.size(); ++i)
    if (!exactly_equal(a.centers[i], b.centers[i])) return false;
  return true;
}

/// Index of the closest center, lowest index on ties.
inline std::size_t nearest_center(const CenterSet& Z, const Eigen::VectorXd& x) {
  std::size_t best = 0;
  double best_d2 = (x - Z.centers[0]).squaredNorm();
  for (std::size_t c = 1; c < Z.centers.size(); ++c) {
    const double d2 = (x - Z.centers[c]).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

/// Cost of one point: z-th power of the distance to its closest center.
inline double kz_loss(const CenterSet& Z, const Eigen::VectorXd& x) {
  double best_d2 = (x - Z.centers[0]).squaredNorm();
  for (std::size_t c = 1; c < Z.centers.size(); ++c)
    best_d2 = std::min(best_d2, (x - Z.centers[c]).squaredNorm());
  if (Z.z == 2.0) return best_d2;
  return std::pow(std::sqrt(best_d2), Z.z);
}

struct WeightedPoint {
  Eigen::VectorXd point;
  double weight = 0.0;
};

inline double weighted_kz_cost(const std::vector<WeightedPoint>& points, const CenterSet& Z) {
  double total = 0.0;
  for (const auto& wp : points) total += wp.weight * kz_loss(Z, wp.point);
  return total;
}

/// Draw min(k, n) indices: first uniform, the rest proportional to current
/// power-z cost, falling back to uniform whenever every remaining cost is 0.
inline std::vector<std::size_t> dz_sample_indices(const std::vector<WeightedPoint>& pool,
                                                  std::size_t k, double z, Rng& rng) {
  if (pool.empty()) throw std::invalid_argument("dz_sample_indices: empty pool");
  const std::size_t picks = std::min(k, pool.size());
  std::vector<std::size_t> chosen;
  chosen.reserve(picks);
  std::vector<double> cost(pool.size(), 0.0);
  for (std::size_t round = 0; round < picks; ++round) {
    std::size_t next;
    if (round == 0) {
      std::vector<double> w(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) w[i] = pool[i].weight;
      next = DiscreteSampler(w).draw(rng);
    } else {
      double total = 0.0;
      for (double c : cost) total += c;
      if (total > 0.0) {
        next = DiscreteSampler(cost).draw(rng);
      } else {
        next = rng.index(pool.size());
      }
    }
    chosen.push_back(next);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const double d = (pool[i].point - pool[next].point).norm();
      const double c = pool[i].weight * std::pow(d, z);
      if (round == 0 || c < cost[i]) cost[i] = c;
    }
  }
  return chosen;
}

inline std::vector<WeightedPoint> unit_weight_pool(const Dataset& X) {
  std::vector<WeightedPoint> pool;
  pool.reserve(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) pool.push_back({X[i], 1.0});
  return pool;
}

/// Cost-adaptive seeding over the raw dataset.
inline CenterSet dz_sampling(const Dataset& X, std::size_t k, double z, std::uint64_t seed) {
  if (X.empty()) throw std::invalid_argument("dz_sampling: empty dataset");
  Rng rng = Rng(seed).sub("dz-sampling");
  const auto pool = unit_weight_pool(X);
  const auto idx = dz_sample_indices(pool, k, z, rng);
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(idx.size());
  for (std::size_t i : idx) centers.push_back(X[i]);
  return {std::move(centers), z};
}

/// Two-stage coreset: sampled points with importance weights plus the rough
/// centers with their residual weights. Negative residuals are clamped to 0
/// and counted.
struct ClusteringCoreset {
  std::vector<WeightedPoint> points;   // second-stage selections
  std::vector<WeightedPoint> centers;  // rough centers, clamped residual mass
  double z = 2.0;
  long clamped = 0;
  double stage1_weight_total = 0.0;
  std::size_t n1 = 0, n2 = 0;

  std::vector<WeightedPoint> entries() const {
    std::vector<WeightedPoint> all = points;
    all.insert(all.end(), centers.begin(), centers.end());
    return all;
  }

  static ClusteringCoreset unit(const Dataset& X, double z) {
    ClusteringCoreset c;
    c.z = z;
    c.points = unit_weight_pool(X);
    return c;
  }
};

inline double coreset_kz_cost(const ClusteringCoreset& coreset, const CenterSet& Z) {
  return weighted_kz_cost(coreset.points, Z) + weighted_kz_cost(coreset.centers, Z);
}

/// First-stage sample count, evaluated in log space so the huge constants
/// never overflow; always capped at n and floored at 1.
inline std::size_t stage1_size(std::size_t n, std::size_t k, double z, double epsilon,
                               double delta, double multiplier = 1.0) {
  const double logf = std::max(1.0, std::log(static_cast<double>(k) / delta));
  const double log_m = 10.0 * z * std::log(168.0 * z) - (5.0 * z + 15.0) * std::log(epsilon) +
                       5.0 * std::log(static_cast<double>(k)) + std::log(logf) +
                       std::log(multiplier);
  if (log_m >= std::log(static_cast<double>(n))) return n;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(std::exp(log_m))));
}

/// Second-stage sample count, same conventions.
inline std::size_t stage2_size(std::size_t n, std::size_t k, double z, double epsilon,
                               double delta, double multiplier = 1.0) {
  const double kd = static_cast<double>(k);
  const double logk = std::max(1.0, std::log(kd));
  const double logf = std::max(1.0, std::log(kd / (epsilon * delta)));
  const double log_m = -(2.0 * z + 2.0) * std::log(epsilon) + std::log(kd) + std::log(logk) +
                       std::log(logf) + std::log(multiplier);
  if (log_m >= std::log(static_cast<double>(n))) return n;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(std::exp(log_m))));
}

struct TwoStageOptions {
  double const_n1 = 1.0;
  double const_n2 = 1.0;
  double rescale_c = 100.0;      // internal accuracy parameter is epsilon / rescale_c
  bool verbatim_stage2 = false;  // keep the uncorrected second-stage weight
};

namespace detail {

struct Assignment {
  std::vector<std::size_t> cluster;  // per point: index of closest rough center
  std::vector<double> cost;          // per point: power-z distance
  std::vector<double> cluster_size;  // per center: points assigned
  double total_cost = 0.0;
};

inline Assignment assign(const Dataset& X, const CenterSet& rough) {
  Assignment a;
  a.cluster.resize(X.size());
  a.cost.resize(X.size());
  a.cluster_size.assign(rough.k(), 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    a.cluster[i] = nearest_center(rough, X[i]);
    a.cost[i] = kz_loss(rough, X[i]);
    a.cluster_size[a.cluster[i]] += 1.0;
    a.total_cost += a.cost[i];
  }
  return a;
}

/// First-stage sensitivity upper bounds: cost share plus cluster-size share,
/// scaled by 2^(2z+2) eps^2.
inline std::vector<double> stage1_sensitivities(const Assignment& a, double z, double eps_int) {
  const double scale = std::pow(2.0, 2.0 * z + 2.0) * eps_int * eps_int;
  std::vector<double> sigma(a.cluster.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double share = a.total_cost > 0.0 ? a.cost[i] / a.total_cost : 0.0;
    sigma[i] = scale * (share + 1.0 / a.cluster_size[a.cluster[i]]);
  }
  return sigma;
}

}  // namespace detail

/// Builds the two-stage coreset: a cost-biased first stage assembles noisy
/// per-point multiplicities u, a second stage resamples from u x cost mixed
/// half-and-half with a uniform floor over the first-stage support (the floor
/// keeps inverse-probability weights bounded; verbatim_stage2 drops it), and
/// the rough centers absorb the remaining (1 + 10 eps) cluster mass. All
/// sampled weights carry a (1 + eps) uniform perturbation; the internal
/// accuracy parameter is epsilon / rescale_c while the stage sizes use
/// epsilon as given.
inline ClusteringCoreset two_stage_coreset(const Dataset& X, std::size_t k, double z,
                                           double epsilon, double delta, std::uint64_t seed,
                                           TwoStageOptions options = {}) {
  if (X.empty()) throw std::invalid_argument("two_stage_coreset: empty dataset");
  if (k < 1) throw std::invalid_argument("two_stage_coreset: k must be >= 1");
  if (!(z >= 1.0)) throw std::invalid_argument("two_stage_coreset: z must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("two_stage_coreset: epsilon must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("two_stage_coreset: delta must lie in (0,1)");
  if (!(options.rescale_c >= 1.0))
    throw std::invalid_argument("two_stage_coreset: rescale_c must be >= 1");
  const double eps_int = epsilon / options.rescale_c;
  const std::size_t n = X.size();
  const std::size_t n1 = stage1_size(n, k, z, epsilon, delta, options.const_n1);
  const std::size_t n2 = stage2_size(n, k, z, epsilon, delta, options.const_n2);
  Rng root = Rng(seed).sub("two-stage");

  Rng seed_rng = root.sub("bicriteria");
  const auto pool = unit_weight_pool(X);
  const auto center_idx = dz_sample_indices(pool, k, z, seed_rng);
  std::vector<Eigen::VectorXd> rough_centers;
  rough_centers.reserve(center_idx.size());
  for (std::size_t i : center_idx) rough_centers.push_back(X[i]);
  const CenterSet rough(rough_centers, z);

  const detail::Assignment a = detail::assign(X, rough);
  const std::vector<double> sigma1 = detail::stage1_sensitivities(a, z, eps_int);
  double sigma1_total = 0.0;
  for (double s : sigma1) sigma1_total += s;

  Rng stage1_rng = root.sub("stage1");
  DiscreteSampler stage1_sampler(sigma1);
  std::map<std::size_t, double> u;
  for (std::size_t j = 0; j < n1; ++j) {
    const std::size_t i = stage1_sampler.draw(stage1_rng);
    const double q = sigma1_total / (static_cast<double>(n1) * sigma1[i]);
    u[i] += stage1_rng.uniform(q, (1.0 + eps_int) * q);
  }

  ClusteringCoreset out;
  out.z = z;
  out.n1 = n1;
  out.n2 = n2;
  for (const auto& [i, ui] : u) out.stage1_weight_total += ui;

  double covered_mass = 0.0;
  for (const auto& [i, ui] : u) covered_mass += ui * a.cost[i];
  const double u_total = out.stage1_weight_total;

  std::map<std::size_t, double> selected;  // point index -> accumulated weight
  if (covered_mass > 0.0) {
    std::vector<std::size_t> d1;
    std::vector<double> prop;  // second-stage sampling law over D1
    d1.reserve(u.size());
    prop.reserve(u.size());
    // Half the mass follows u x cost, half follows u alone: the u-floor
    // bounds every inverse-probability weight by about 2 u_total / N2 (a
    // point sitting on a rough center would otherwise draw an unbounded
    // one), and dividing by the same mixed law keeps the estimator
    // unbiased. The verbatim variant keeps the pure u x cost law.
    for (const auto& [i, ui] : u) {
      d1.push_back(i);
      const double cost_part = ui * a.cost[i] / covered_mass;
      prop.push_back(options.verbatim_stage2 ? cost_part
                                             : 0.5 * (cost_part + ui / u_total));
    }
    Rng stage2_rng = root.sub("stage2");
    DiscreteSampler stage2_sampler(prop);
    for (std::size_t j = 0; j < n2; ++j) {
      const std::size_t pick = stage2_sampler.draw(stage2_rng);
      const std::size_t i = d1[pick];
      const double base =
          options.verbatim_stage2
              ? covered_mass / (static_cast<double>(n2) * a.cost[i] * u.at(i))
              : u.at(i) / (static_cast<double>(n2) * prop[pick]);
      selected[i] += stage2_rng.uniform(base, (1.0 + eps_int) * base);
    }
  }

  std::vector<double> u_mass(rough.k(), 0.0);
  for (const auto& [i, ui] : u) u_mass[a.cluster[i]] += ui;
  std::vector<double> coverage(rough.k(), 0.0);
  for (const auto& [i, w] : selected) {
    out.points.push_back({X[i], w});
    coverage[a.cluster[i]] += w;
  }
  // Anchoring on the cluster's own first-stage mass pins the total weight a
  // cluster carries at (1 + 10 eps) u_mass no matter how the second stage
  // splits it, so resampling noise moves mass between a cluster's points and
  // its rough center but never off the cluster.
  for (std::size_t c = 0; c < rough.k(); ++c) {
    double w = (1.0 + 10.0 * eps_int) * u_mass[c] - coverage[c];
    if (w < 0.0) {
      w = 0.0;
      ++out.clamped;
    }
    out.centers.push_back({rough.centers[c], w});
  }
  return out;
}

struct KzSolution {
  CenterSet centers;
  double cost = 0.0;
  bool padded = false;  // fewer distinct positions than k
};

namespace detail {

inline double lloyd_refine(std::vector<Eigen::VectorXd>& centers,
                           const std::vector<WeightedPoint>& pool) {
  const std::size_t k = centers.size();
  std::vector<std::size_t> owner(pool.size(), 0);
  for (int iter = 0; iter < 60; ++iter) {
    bool moved = false;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      std::size_t best = 0;
      double best_d2 = (pool[i].point - centers[0]).squaredNorm();
      for (std::size_t c = 1; c < k; ++c) {
        const double d2 = (pool[i].point - centers[c]).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      if (iter == 0 || owner[i] != best) moved = true;
      owner[i] = best;
    }
    if (!moved) break;
    std::vector<Eigen::VectorXd> sum(k, Eigen::VectorXd::Zero(centers[0].size()));
    std::vector<double> mass(k, 0.0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      sum[owner[i]] += pool[i].weight * pool[i].point;
      mass[owner[i]] += pool[i].weight;
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (mass[c] > 0.0) {
        centers[c] = sum[c] / mass[c];
      } else {
        // reseed an empty cluster at the entry paying the most
        std::size_t worst = 0;
        double worst_pay = -1.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
          const double pay =
              pool[i].weight * (pool[i].point - centers[owner[i]]).squaredNorm();
          if (pay > worst_pay) {
            worst_pay = pay;
            worst = i;
          }
        }
        centers[c] = pool[worst].point;
      }
    }
  }
  CenterSet Z(centers, 2.0);
  return weighted_kz_cost(pool, Z);
}

inline double swap_refine(std::vector<Eigen::VectorXd>& centers,
                          const std::vector<WeightedPoint>& pool, double z) {
  double best_cost = weighted_kz_cost(pool, CenterSet(centers, z));
  for (int sweep = 0; sweep < 8; ++sweep) {
    bool improved = false;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      std::size_t best_i = pool.size();
      for (std::size_t i = 0; i < pool.size(); ++i) {
        const Eigen::VectorXd saved = centers[c];
        centers[c] = pool[i].point;
        const double cost = weighted_kz_cost(pool, CenterSet(centers, z));
        centers[c] = saved;
        if (cost < best_cost * (1.0 - 1e-12)) {
          best_cost = cost;
          best_i = i;
        }
      }
      if (best_i < pool.size()) {
        centers[c] = pool[best_i].point;
        improved = true;
      }
    }
    if (!improved) break;
  }
  return best_cost;
}

}  // namespace detail

/// Weighted power-z solver over coreset entries: cost-adaptive seeding per
/// restart, then weighted Lloyd for z = 2 and center-swap local search
/// otherwise. Best restart wins; ties keep the earlier one.
inline KzSolution weighted_kz_solve(const ClusteringCoreset& coreset, std::size_t k, double z,
                                    int restarts, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("weighted_kz_solve: k must be >= 1");
  if (restarts < 1) throw std::invalid_argument("weighted_kz_solve: restarts must be >= 1");
  std::vector<WeightedPoint> pool;
  for (const auto& wp : coreset.entries())
    if (wp.weight > 0.0) pool.push_back(wp);
  if (pool.empty()) throw std::invalid_argument("weighted_kz_solve: no positive-weight entries");
  Rng root = Rng(seed).sub("kz-solve");

  KzSolution best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = root.sub("restart", static_cast<std::uint64_t>(r));
    const auto idx = dz_sample_indices(pool, k, z, rng);
    std::vector<Eigen::VectorXd> centers;
    centers.reserve(k);
    for (std::size_t i : idx) centers.push_back(pool[i].point);
    const bool padded = centers.size() < k;
    while (centers.size() < k) centers.push_back(centers.front());
    const double cost = (z == 2.0) ? detail::lloyd_refine(centers, pool)
                                   : detail::swap_refine(centers, pool, z);
    if (!have || cost < best.cost) {
      best.centers = CenterSet(centers, z);
      best.cost = cost;
      best.padded = padded;
      have = true;
    }
  }
  return best;
}

enum class UpdateMode { fresh, lazy };

struct OnlineOptions {
  double const_n1 = 1.0;
  double const_n2 = 1.0;
  double rescale_c = 100.0;
  double lazy_threshold = 0.1;
  bool verbatim_stage2 = false;
  int restarts = 3;
  bool clip = true;
  bool timed = false;
};

/// Online clustering: at step t, build the two-stage coreset of the prefix at
/// accuracy epsilon / 3 and failure rate epsilon / (10 n), solve on it, then
/// pay the revealed point's power-z cost. Before any data the centers sit at
/// the origin. Lazy mode couples the rough-center choices and both sampling
/// stages slot by slot and re-solves only when the selected index multiset
/// (second stage plus rough centers) drifts past the threshold.
inline RegretLedger online_clustering(Stream& stream, std::size_t k, double z, double epsilon,
                                      UpdateMode mode, std::uint64_t seed,
                                      OnlineOptions options = {}) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("online_clustering: epsilon must lie in (0,1)");
  const std::size_t n = stream.size();
  const int d = stream.source().dim();
  const double eps_run = epsilon / 3.0;
  const double delta = epsilon / (10.0 * static_cast<double>(n));
  const double eps_int = eps_run / options.rescale_c;
  TwoStageOptions stage_options{options.const_n1, options.const_n2, options.rescale_c,
                                options.verbatim_stage2};
  Rng lazy_root = Rng(seed).sub("lazy-clustering");

  std::vector<CoupledSlots> center_slots;  // one single-slot coupling per rough center
  CoupledSlots stage1_slots, stage2_slots;
  std::vector<std::size_t> center_snapshot;
  CenterSet held;
  bool held_valid = false;
  long solves = 0;
  long clamp_events = 0;

  auto fresh_solver = [&](const Dataset& prefix, std::size_t, Rng& step_rng) {
    if (prefix.empty()) return CenterSet::at_origin(d, k, z);
    const ClusteringCoreset coreset =
        two_stage_coreset(prefix, k, z, eps_run, delta, step_rng.next_u64(), stage_options);
    clamp_events += coreset.clamped;
    ++solves;
    return weighted_kz_solve(coreset, k, z, options.restarts, step_rng.next_u64()).centers;
  };

  auto lazy_solver = [&](const Dataset& prefix, std::size_t t, Rng&) {
    if (prefix.empty()) return CenterSet::at_origin(d, k, z);
    const std::size_t s = prefix.size();
    const auto pool = unit_weight_pool(prefix);
    Rng advance_rng = lazy_root.sub("advance", t);

    // rough centers, coupled one at a time against their conditional laws
    const std::size_t want_centers = std::min(k, s);
    while (center_slots.size() < want_centers) center_slots.emplace_back();
    std::vector<std::size_t> center_idx;
    std::vector<double> cost(s, 0.0);
    for (std::size_t c = 0; c < want_centers; ++c) {
      std::vector<double> probs(s);
      if (c == 0) {
        std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(s));
      } else {
        double total = 0.0;
        for (double v : cost) total += v;
        if (total > 0.0) {
          for (std::size_t i = 0; i < s; ++i) probs[i] = cost[i] / total;
        } else {
          std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(s));
        }
      }
      Rng slot_rng = advance_rng.sub("center", c);
      center_slots[c].advance(probs, 1, slot_rng);
      const std::size_t picked = center_slots[c].indices()[0];
      center_idx.push_back(picked);
      for (std::size_t i = 0; i < s; ++i) {
        const double dz = std::pow((prefix[i] - prefix[picked]).norm(), z);
        if (c == 0 || dz < cost[i]) cost[i] = dz;
      }
    }
    std::vector<Eigen::VectorXd> rough_centers;
    for (std::size_t i : center_idx) rough_centers.push_back(prefix[i]);
    const CenterSet rough(rough_centers, z);
    const detail::Assignment a = detail::assign(prefix, rough);
    const std::vector<double> sigma1 = detail::stage1_sensitivities(a, z, eps_int);
    double sigma1_total = 0.0;
    for (double v : sigma1) sigma1_total += v;
    std::vector<double> probs1(s);
    for (std::size_t i = 0; i < s; ++i) probs1[i] = sigma1[i] / sigma1_total;

    const std::size_t n1 = stage1_size(n, k, z, eps_run, delta, options.const_n1);
    const std::size_t n2 = stage2_size(n, k, z, eps_run, delta, options.const_n2);
    Rng stage1_rng = advance_rng.sub("stage1");
    stage1_slots.advance(probs1, std::min(n1, s), stage1_rng);

    std::map<std::size_t, double> u;
    for (std::size_t j = 0; j < stage1_slots.size(); ++j) {
      const std::size_t i = stage1_slots.indices()[j];
      const double q =
          sigma1_total / (static_cast<double>(stage1_slots.size()) * sigma1[i]);
      const double v = lazy_root.sub("stage1-weight", j).next_double();
      u[i] += q * (1.0 + eps_int * v);
    }
    double covered_mass = 0.0;
    double u_total = 0.0;
    for (const auto& [i, ui] : u) {
      covered_mass += ui * a.cost[i];
      u_total += ui;
    }
    std::vector<double> probs2(s, 0.0);
    if (covered_mass > 0.0) {
      // Same floored mixture as the batch construction so the coupled slots
      // track the distribution the fresh sampler would use.
      for (const auto& [i, ui] : u) {
        const double cost_part = ui * a.cost[i] / covered_mass;
        probs2[i] = options.verbatim_stage2 ? cost_part
                                            : 0.5 * (cost_part + ui / u_total);
      }
    }

    std::size_t changed = 0;
    std::size_t tracked = want_centers;
    if (covered_mass > 0.0) {
      Rng stage2_rng = advance_rng.sub("stage2");
      stage2_slots.advance(probs2, std::min(n2, s), stage2_rng);
      tracked += stage2_slots.size();
      changed += static_cast<std::size_t>(
          std::lround(stage2_slots.drift() * static_cast<double>(stage2_slots.size())));
    }
    for (std::size_t c = 0; c < want_centers; ++c)
      if (c >= center_snapshot.size() || center_snapshot[c] != center_idx[c]) ++changed;
    const double drift = static_cast<double>(changed) / static_cast<double>(tracked);

    if (held_valid && drift <= options.lazy_threshold) return held;

    ClusteringCoreset coreset;
    coreset.z = z;
    coreset.n1 = stage1_slots.size();
    coreset.n2 = stage2_slots.size();
    std::map<std::size_t, double> selected;
    if (covered_mass > 0.0) {
      for (std::size_t j = 0; j < stage2_slots.size(); ++j) {
        const std::size_t i = stage2_slots.indices()[j];
        const double base =
            options.verbatim_stage2
                ? covered_mass /
                      (static_cast<double>(stage2_slots.size()) * a.cost[i] * u.at(i))
                : u.at(i) / (static_cast<double>(stage2_slots.size()) * probs2[i]);
        const double v = lazy_root.sub("stage2-weight", j).next_double();
        selected[i] += base * (1.0 + eps_int * v);
      }
    }
    std::vector<double> u_mass(rough.k(), 0.0);
    for (const auto& [i, ui] : u) u_mass[a.cluster[i]] += ui;
    std::vector<double> coverage(rough.k(), 0.0);
    for (const auto& [i, w] : selected) {
      coreset.points.push_back({prefix[i], w});
      coverage[a.cluster[i]] += w;
    }
    for (std::size_t c = 0; c < rough.k(); ++c) {
      double w = (1.0 + 10.0 * eps_int) * u_mass[c] - coverage[c];
      if (w < 0.0) {
        w = 0.0;
        ++coreset.clamped;
      }
      coreset.centers.push_back({rough.centers[c], w});
    }
    clamp_events += coreset.clamped;
    ++solves;
    Rng solve_rng = lazy_root.sub("solve", t);
    held = weighted_kz_solve(coreset, k, z, options.restarts, solve_rng.next_u64()).centers;
    held_valid = true;
    stage1_slots.snapshot();
    stage2_slots.snapshot();
    center_snapshot = center_idx;
    return held;
  };

  LossClipper clipper{options.clip, 0};
  auto loss = [](const CenterSet& Z, const Eigen::VectorXd& x) { return kz_loss(Z, x); };
  auto equal = [](const CenterSet& lhs, const CenterSet& rhs) { return lhs == rhs; };
  RegretLedger ledger =
      (mode == UpdateMode::fresh)
          ? run_online(fresh_solver, stream, loss, seed, equal, &clipper, options.timed)
          : run_online(lazy_solver, stream, loss, seed, equal, &clipper, options.timed);
  ledger.epsilon = epsilon;
  ledger.solve_events = solves;
  ledger.clamp_events = clamp_events;
  return ledger;
}

/// Best-of-restarts solve on the raw data, the OPT oracle.
inline double best_kz_cost(const Dataset& X, std::size_t k, double z, int restarts,
                           std::uint64_t seed, bool clip) {
  const ClusteringCoreset unit = ClusteringCoreset::unit(X, z);
  const KzSolution sol = weighted_kz_solve(unit, k, z, restarts, seed);
  double total = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double loss = kz_loss(sol.centers, X[i]);
    if (clip) loss = std::min(1.0, std::max(0.0, loss));
    total += loss;
  }
  return total;
}

}  // namespace senskit::clustering

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "senskit/dataset.hpp"
#include "senskit/rng.hpp"

namespace senskit::bench {

/// Box-Muller from the counter-based stream; the first uniform is pulled away
/// from 0 so the log is always finite.
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - rng.next_double();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643 * u2);
}

inline Eigen::VectorXd normal_vector(Rng& rng, int d) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = standard_normal(rng);
  return v;
}

struct ClusterGen {
  std::size_t k = 3;
  double separation = 1.0;  // component means land in [-separation, separation]^d
  double noise = 0.1;       // within-component standard deviation
};

/// Gaussian mixture rescaled so every point fits in the unit ball.
inline Dataset generate_cluster(std::size_t n, int d, const ClusterGen& params,
                                std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("generate_cluster: n and d must be >= 1");
  if (params.k < 1) throw std::invalid_argument("generate_cluster: k must be >= 1");
  if (params.noise < 0.0 || params.separation < 0.0)
    throw std::invalid_argument("generate_cluster: negative spread");
  Rng rng = Rng(seed).sub("generate-cluster");
  std::vector<Eigen::VectorXd> means;
  means.reserve(params.k);
  for (std::size_t c = 0; c < params.k; ++c) {
    Eigen::VectorXd mu(d);
    for (int j = 0; j < d; ++j) mu(j) = rng.uniform(-params.separation, params.separation);
    means.push_back(mu);
  }
  std::vector<Eigen::VectorXd> points;
  points.reserve(n);
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = rng.index(params.k);
    Eigen::VectorXd x = means[c] + params.noise * normal_vector(rng, d);
    max_norm = std::max(max_norm, x.norm());
    points.push_back(std::move(x));
  }
  const double scale = 1.0 / std::max(1.0, max_norm);
  Dataset out;
  for (auto& x : points) out.push_back(scale * x);
  return out;
}

struct LowrankGen {
  int rank = 3;
  double noise = 0.05;
};

/// Rank-r factor product plus Gaussian noise, every column normalized to unit
/// length. Points are the columns.
inline Dataset generate_lowrank(int d, std::size_t t, const LowrankGen& params,
                                std::uint64_t seed) {
  if (d < 1 || t < 1) throw std::invalid_argument("generate_lowrank: d and t must be >= 1");
  if (params.rank < 1 || static_cast<std::size_t>(params.rank) > std::min<std::size_t>(d, t))
    throw std::invalid_argument("generate_lowrank: rank out of range");
  if (params.noise < 0.0) throw std::invalid_argument("generate_lowrank: negative noise");
  Rng rng = Rng(seed).sub("generate-lowrank");
  const int r = params.rank;
  Eigen::MatrixXd U(d, r), V(r, static_cast<Eigen::Index>(t));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < r; ++j) U(i, j) = standard_normal(rng);
  for (int i = 0; i < r; ++i)
    for (std::size_t j = 0; j < t; ++j) V(i, static_cast<Eigen::Index>(j)) = standard_normal(rng);
  Eigen::MatrixXd A = U * V / std::sqrt(static_cast<double>(r));
  if (params.noise > 0.0)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) += params.noise * standard_normal(rng);
  Dataset out;
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    Eigen::VectorXd col = A.col(j);
    const double norm = col.norm();
    if (norm > 0.0) col /= norm;
    out.push_back(col);
  }
  return out;
}

struct RegressGen {
  double noise = 0.1;  // bounded: uniform in [-noise, noise] on the target
};

/// Unit-norm Gaussian rows with a planted unit parameter; targets carry
/// bounded uniform noise so honest predictions cost at most about the noise.
/// Points are [a; b] with the target last.
inline Dataset generate_regress(std::size_t n, int d, const RegressGen& params,
                                std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("generate_regress: n and d must be >= 1");
  if (params.noise < 0.0) throw std::invalid_argument("generate_regress: negative noise");
  Rng rng = Rng(seed).sub("generate-regress");
  Eigen::VectorXd planted = normal_vector(rng, d);
  const double pn = planted.norm();
  if (pn > 0.0) planted /= pn;
  Dataset out;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd a = normal_vector(rng, d);
    const double an = a.norm();
    if (an > 0.0) a /= an;
    const double b = a.dot(planted) + rng.uniform(-params.noise, params.noise);
    Eigen::VectorXd point(d + 1);
    point.head(d) = a;
    point(d) = b;
    out.push_back(point);
  }
  return out;
}

}  // namespace senskit::bench

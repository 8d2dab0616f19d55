#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "senskit/coupling.hpp"
#include "senskit/dataset.hpp"
#include "senskit/ledger.hpp"
#include "senskit/online.hpp"
#include "senskit/rng.hpp"

namespace senskit::lowrank {

/// Columns arrive one at a time; the working matrix is d x t.
inline Eigen::MatrixXd columns_from_prefix(const Dataset& prefix) {
  if (prefix.empty()) throw std::invalid_argument("columns_from_prefix: empty prefix");
  Eigen::MatrixXd A(prefix.dim(), static_cast<Eigen::Index>(prefix.size()));
  for (std::size_t i = 0; i < prefix.size(); ++i) A.col(static_cast<Eigen::Index>(i)) = prefix[i];
  return A;
}

struct RidgeLeverage {
  std::vector<double> tau;  // one score per column, each in [0,1]
  double ridge = 0.0;       // ||A - A_k||_F^2 / k
  int rank = 0;
  bool degenerate = false;  // zero matrix
};

/// Ridge leverage scores of the columns of A at regularization
/// ||A - A_k||_F^2 / k: tau_i = sum_j V_ij^2 s_j^2 / (s_j^2 + ridge).
/// Singular values below 1e-12 x largest count as zero.
inline RidgeLeverage ridge_leverage_scores(const Eigen::MatrixXd& A, int k) {
  if (A.rows() == 0 || A.cols() == 0)
    throw std::invalid_argument("ridge_leverage_scores: empty matrix");
  if (k < 1 || k > std::min(A.rows(), A.cols()))
    throw std::invalid_argument("ridge_leverage_scores: k out of range");
  RidgeLeverage out;
  out.tau.assign(static_cast<std::size_t>(A.cols()), 0.0);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() ? 1e-12 * s(0) : 0.0;
  if (s.size() == 0 || s(0) <= 0.0) {
    out.degenerate = true;
    return out;
  }
  int rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  out.rank = rank;
  double residual = 0.0;
  for (int j = k; j < rank; ++j) residual += s(j) * s(j);
  out.ridge = residual / static_cast<double>(k);
  const auto& V = svd.matrixV();
  for (Eigen::Index i = 0; i < A.cols(); ++i) {
    double tau = 0.0;
    for (int j = 0; j < rank; ++j) {
      const double s2 = s(j) * s(j);
      tau += V(i, j) * V(i, j) * s2 / (s2 + out.ridge);
    }
    out.tau[static_cast<std::size_t>(i)] = tau;
  }
  return out;
}

/// m rescaled columns sampled proportionally to ridge leverage; slots are
/// overwritten wholesale on refresh, never appended.
struct ColumnSketch {
  Eigen::MatrixXd matrix;             // d x m
  std::vector<Eigen::Index> sources;  // column of A each slot came from
  std::vector<double> weights;
};

/// Column sampling with the perturbed rescaling
/// w ~ Uniform[1/sqrt(m p_i), (1+eps)/sqrt(m p_i)]. The verbatim variant
/// divides by the stream length t instead of the slot count m.
inline ColumnSketch pcp_sample(const Eigen::MatrixXd& A, int k, std::size_t m, double epsilon,
                               std::uint64_t seed, bool verbatim_weights = false) {
  if (m < 1) throw std::invalid_argument("pcp_sample: m must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("pcp_sample: epsilon must lie in (0,1)");
  const RidgeLeverage lev = ridge_leverage_scores(A, k);
  if (lev.degenerate) throw std::invalid_argument("pcp_sample: zero leverage mass");
  double total = 0.0;
  for (double tau : lev.tau) total += tau;
  std::vector<double> probs(lev.tau.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = lev.tau[i] / total;
  Rng rng = Rng(seed).sub("pcp-sample");
  DiscreteSampler sampler(probs);
  const double denom = verbatim_weights ? static_cast<double>(A.cols()) : static_cast<double>(m);
  ColumnSketch out;
  out.matrix.resize(A.rows(), static_cast<Eigen::Index>(m));
  out.sources.reserve(m);
  out.weights.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = sampler.draw(rng);
    const double base = 1.0 / std::sqrt(denom * probs[i]);
    const double w = rng.uniform(base, (1.0 + epsilon) * base);
    out.sources.push_back(static_cast<Eigen::Index>(i));
    out.weights.push_back(w);
    out.matrix.col(static_cast<Eigen::Index>(j)) = w * A.col(static_cast<Eigen::Index>(i));
  }
  return out;
}

/// Orthonormal rank-k basis with a deterministic sign convention: in each
/// column the entry of largest magnitude (lowest index on ties) is positive.
struct Projector {
  Eigen::MatrixXd basis;  // d x k, orthonormal columns
  bool padded = false;    // rank(M) < k, complement directions fill the gap

  Projector() = default;
  Projector(Eigen::MatrixXd Z, bool pad) : basis(std::move(Z)), padded(pad) {
    Eigen::MatrixXd gram = basis.transpose() * basis;
    gram -= Eigen::MatrixXd::Identity(basis.cols(), basis.cols());
    if (gram.cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("Projector: basis is not orthonormal");
  }

  static Projector coordinate(int d, int k) {
    if (k < 1 || k > d) throw std::invalid_argument("Projector::coordinate: k out of range");
    return {Eigen::MatrixXd::Identity(d, d).leftCols(k), false};
  }
};

inline void fix_column_signs(Eigen::MatrixXd& Z) {
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    Eigen::Index at = 0;
    Z.col(j).cwiseAbs().maxCoeff(&at);
    if (Z(at, j) < 0.0) Z.col(j) = -Z.col(j);
  }
}

/// Top-k left singular vectors of M. When rank(M) < k the remaining columns
/// come from the orthogonal complement delivered by the full factorization.
inline Projector top_k_left_singular(const Eigen::MatrixXd& M, int k) {
  if (M.rows() == 0 || M.cols() == 0)
    throw std::invalid_argument("top_k_left_singular: empty matrix");
  if (k < 1 || k > M.rows()) throw std::invalid_argument("top_k_left_singular: k out of range");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() ? 1e-12 * s(0) : 0.0;
  int rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  Eigen::MatrixXd Z = svd.matrixU().leftCols(k);
  fix_column_signs(Z);
  return {std::move(Z), rank < k};
}

/// Distance from a column to its projection onto span(Z).
inline double projection_loss(const Projector& Z, const Eigen::VectorXd& a) {
  if (a.size() != Z.basis.rows())
    throw std::invalid_argument("projection_loss: dimension mismatch");
  return (a - Z.basis * (Z.basis.transpose() * a)).norm();
}

/// Sketch size m = ceil(eps^-2 k ln(k/delta)) with the hidden constant as a
/// multiplier; log factor floored at 1.
inline std::size_t pcp_sketch_size(int k, double epsilon, double delta, double multiplier = 1.0) {
  if (k < 1 || !(epsilon > 0.0) || !(delta > 0.0) || !(multiplier > 0.0))
    throw std::invalid_argument("pcp_sketch_size: invalid parameters");
  const double logf = std::max(1.0, std::log(static_cast<double>(k) / delta));
  const double m = std::ceil(multiplier * k * logf / (epsilon * epsilon));
  return static_cast<std::size_t>(std::max(1.0, m));
}

enum class UpdateMode { fresh, lazy };

struct OnlineOptions {
  double const_m = 1.0;
  double lazy_threshold = 0.1;
  bool verbatim_weights = false;
  bool clip = true;
  bool timed = false;
};

/// Online low-rank approximation over a column stream: at step t, sample a
/// rescaled column sketch of the prefix, take its top-k left singular basis,
/// then pay the projection distance of the revealed column. Before any data
/// the projector spans the first k coordinate directions.
inline RegretLedger online_lowrank(Stream& stream, int k, double epsilon, UpdateMode mode,
                                   std::uint64_t seed, OnlineOptions options = {}) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("online_lowrank: epsilon must lie in (0,1)");
  const int d = stream.source().dim();
  if (k < 1 || k > d) throw std::invalid_argument("online_lowrank: k out of range");
  const std::size_t n = stream.size();
  const double delta = epsilon / (10.0 * static_cast<double>(n));
  const std::size_t m_formula = pcp_sketch_size(k, epsilon, delta, options.const_m);
  Rng lazy_root = Rng(seed).sub("lazy-lowrank");

  CoupledSlots slots;
  Projector held;
  bool held_valid = false;
  long solves = 0;

  auto solver = [&, k, mode, epsilon](const Dataset& prefix, std::size_t t, Rng& step_rng) {
    if (prefix.empty()) return Projector::coordinate(d, k);
    const Eigen::MatrixXd A = columns_from_prefix(prefix);
    const std::size_t m = std::min<std::size_t>(m_formula, prefix.size());
    const int k_eff = static_cast<int>(std::min<std::size_t>(k, prefix.size()));
    if (mode == UpdateMode::fresh) {
      ++solves;
      const ColumnSketch sketch =
          pcp_sample(A, k_eff, m, epsilon, step_rng.next_u64(), options.verbatim_weights);
      return top_k_left_singular(sketch.matrix, k);
    }
    const RidgeLeverage lev = ridge_leverage_scores(A, k_eff);
    if (lev.degenerate) throw std::invalid_argument("online_lowrank: zero leverage mass");
    double total = 0.0;
    for (double tau : lev.tau) total += tau;
    std::vector<double> probs(lev.tau.size());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = lev.tau[i] / total;
    Rng advance_rng = lazy_root.sub("advance", t);
    slots.advance(probs, m, advance_rng);
    if (held_valid && slots.drift() <= options.lazy_threshold) return held;
    const double denom =
        options.verbatim_weights ? static_cast<double>(A.cols()) : static_cast<double>(slots.size());
    Eigen::MatrixXd C(A.rows(), static_cast<Eigen::Index>(slots.size()));
    for (std::size_t j = 0; j < slots.size(); ++j) {
      const std::size_t i = slots.indices()[j];
      const double base = 1.0 / std::sqrt(denom * probs[i]);
      Rng weight_rng = lazy_root.sub("slot-weight", j);
      C.col(static_cast<Eigen::Index>(j)) =
          weight_rng.uniform(base, (1.0 + epsilon) * base) * A.col(static_cast<Eigen::Index>(i));
    }
    ++solves;
    held = top_k_left_singular(C, k);
    held_valid = true;
    slots.snapshot();
    return held;
  };

  LossClipper clipper{options.clip, 0};
  RegretLedger ledger = run_online(
      solver, stream,
      [](const Projector& Z, const Eigen::VectorXd& a) { return projection_loss(Z, a); }, seed,
      [](const Projector& a, const Projector& b) {
        return a.basis.rows() == b.basis.rows() && a.basis.cols() == b.basis.cols() &&
               exactly_equal(a.basis, b.basis);
      },
      &clipper, options.timed);
  ledger.epsilon = epsilon;
  ledger.solve_events = solves;
  return ledger;
}

/// Exact rank-k projection loss of the full matrix, the OPT oracle:
/// sum over columns of the distance to the span of the true top-k basis.
inline double exact_rank_k_loss(const Eigen::MatrixXd& A, int k, bool clip) {
  const Projector Z = top_k_left_singular(A, k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < A.cols(); ++i) {
    double loss = projection_loss(Z, A.col(i));
    if (clip) loss = std::min(1.0, std::max(0.0, loss));
    total += loss;
  }
  return total;
}

}  // namespace senskit::lowrank

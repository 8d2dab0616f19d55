#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "senskit/coupling.hpp"
#include "senskit/dataset.hpp"
#include "senskit/ledger.hpp"
#include "senskit/online.hpp"
#include "senskit/rng.hpp"

namespace senskit::regression {

/// Design rows stacked with their targets. Stream points for the online
/// pipeline are the rows [a; b] with the target in the last coordinate.
struct RowMatrix {
  Eigen::MatrixXd rows;     // t x d
  Eigen::VectorXd targets;  // t

  RowMatrix() = default;
  RowMatrix(Eigen::MatrixXd a, Eigen::VectorXd b) : rows(std::move(a)), targets(std::move(b)) {
    if (rows.rows() != targets.size())
      throw std::invalid_argument("RowMatrix: rows and targets length mismatch");
    if (!rows.allFinite() || !targets.allFinite())
      throw std::invalid_argument("RowMatrix: non-finite entries");
  }

  static RowMatrix from_prefix(const Dataset& prefix) {
    if (prefix.empty()) return {};
    const int d = prefix.dim() - 1;
    if (d < 1) throw std::invalid_argument("RowMatrix: points must be [a; b] with d >= 1");
    Eigen::MatrixXd a(prefix.size(), d);
    Eigen::VectorXd b(prefix.size());
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      a.row(i) = prefix[i].head(d).transpose();
      b(i) = prefix[i](d);
    }
    return {std::move(a), std::move(b)};
  }

  Eigen::Index n() const { return rows.rows(); }
  Eigen::Index d() const { return rows.cols(); }
};

struct LeverageScores {
  std::vector<double> tau;
  int rank = 0;
  bool degenerate = false;  // zero matrix
};

/// tau_i = squared row norm of the thin left orthonormal factor. Sums to
/// rank(A); singular values below 1e-12 x largest count as zero.
inline LeverageScores leverage_scores(const Eigen::MatrixXd& A) {
  if (A.rows() == 0) throw std::invalid_argument("leverage_scores: empty matrix");
  LeverageScores out;
  out.tau.assign(static_cast<std::size_t>(A.rows()), 0.0);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() ? 1e-12 * s(0) : 0.0;
  if (s.size() == 0 || s(0) <= 0.0) {
    out.degenerate = true;
    return out;
  }
  int rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  out.rank = rank;
  const auto& U = svd.matrixU();
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    out.tau[static_cast<std::size_t>(i)] = U.row(i).head(rank).squaredNorm();
  return out;
}

/// Sparse sampling sketch: m (row index, weight) pairs; applying it selects
/// and rescales rows.
struct RowSketch {
  std::vector<std::pair<Eigen::Index, double>> selected;

  static RowSketch identity(Eigen::Index t) {
    RowSketch s;
    s.selected.reserve(static_cast<std::size_t>(t));
    for (Eigen::Index i = 0; i < t; ++i) s.selected.emplace_back(i, 1.0);
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& A) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(selected.size()), A.cols());
    for (std::size_t j = 0; j < selected.size(); ++j)
      out.row(static_cast<Eigen::Index>(j)) = selected[j].second * A.row(selected[j].first);
    return out;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& b) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(selected.size()));
    for (std::size_t j = 0; j < selected.size(); ++j)
      out(static_cast<Eigen::Index>(j)) = selected[j].second * b(selected[j].first);
    return out;
  }
};

/// Leverage-score row sampling with the perturbed rescaling
/// w ~ Uniform[1/sqrt(m p_i), (1+eps)/sqrt(m p_i)].
inline RowSketch sketch_rows(const RowMatrix& M, std::size_t m, double epsilon,
                             std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sketch_rows: m must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("sketch_rows: epsilon must lie in (0,1)");
  const LeverageScores lev = leverage_scores(M.rows);
  if (lev.degenerate) throw std::invalid_argument("sketch_rows: zero leverage mass");
  double total = 0.0;
  for (double tau : lev.tau) total += tau;
  std::vector<double> probs(lev.tau.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = lev.tau[i] / total;
  Rng rng = Rng(seed).sub("row-sketch");
  DiscreteSampler sampler(probs);
  RowSketch out;
  out.selected.reserve(m);
  const double md = static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = sampler.draw(rng);
    const double base = 1.0 / std::sqrt(md * probs[i]);
    out.selected.emplace_back(static_cast<Eigen::Index>(i),
                              rng.uniform(base, (1.0 + epsilon) * base));
  }
  return out;
}

struct SketchedSolution {
  Eigen::VectorXd x;
  bool rank_deficient = false;
};

/// Minimum-norm least squares on the sketched system via complete orthogonal
/// decomposition (never normal equations). The first-order optimality
/// certificate is checked before returning.
inline SketchedSolution sketched_solve(const RowSketch& S, const RowMatrix& M) {
  if (S.selected.empty()) throw std::invalid_argument("sketched_solve: empty sketch");
  const Eigen::MatrixXd SA = S.apply(M.rows);
  const Eigen::VectorXd Sb = S.apply(M.targets);
  if (SA.norm() == 0.0) throw std::invalid_argument("sketched_solve: sketch has no nonzero row");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(SA);
  SketchedSolution out;
  out.x = cod.solve(Sb);
  out.rank_deficient = cod.rank() < M.d();
  const double certificate = (SA.transpose() * (SA * out.x - Sb)).norm();
  if (certificate > 1e-8 * SA.norm() * Sb.norm() + 1e-12)
    throw std::runtime_error("sketched_solve: optimality certificate violated");
  return out;
}

/// |a.x - b|. Clipping to [0,1] is the harness' job, not the library's.
inline double regression_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& a, double b) {
  if (x.size() != a.size()) throw std::invalid_argument("regression_loss: dimension mismatch");
  return std::abs(a.dot(x) - b);
}

/// Loss against a stream point [a; b].
inline double regression_point_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& point) {
  const Eigen::Index d = point.size() - 1;
  return regression_loss(x, point.head(d), point(d));
}

/// Sketch size m = ceil(eps^-2 d ln(d/delta)) with the hidden constant as a
/// multiplier; log factor floored at 1.
inline std::size_t embedding_sketch_size(int d, double epsilon, double delta,
                                         double multiplier = 1.0) {
  if (d < 1 || !(epsilon > 0.0) || !(delta > 0.0) || !(multiplier > 0.0))
    throw std::invalid_argument("embedding_sketch_size: invalid parameters");
  const double logf = std::max(1.0, std::log(static_cast<double>(d) / delta));
  const double m = std::ceil(multiplier * d * logf / (epsilon * epsilon));
  return static_cast<std::size_t>(std::max(1.0, m));
}

enum class UpdateMode { fresh, lazy };

struct OnlineOptions {
  double const_m = 1.0;         // multiplier on the sketch-size formula
  double lazy_threshold = 0.1;  // re-solve when index-multiset drift exceeds this
  bool clip = true;             // benchmark losses live in [0,1]
  bool timed = false;
};

/// Online regression over a stream of [a; b] rows: at step t, sketch-and-solve
/// on the prefix, predict, then pay |a_t.x_t - b_t|. Lazy mode carries the
/// sketch through per-slot maximal couplings and re-solves only when the
/// selected index multiset has drifted past the threshold.
inline RegretLedger online_regression(Stream& stream, double epsilon, UpdateMode mode,
                                      std::uint64_t seed, OnlineOptions options = {}) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("online_regression: epsilon must lie in (0,1)");
  const std::size_t n = stream.size();
  const int d = stream.source().dim() - 1;
  if (d < 1) throw std::invalid_argument("online_regression: points must be [a; b]");
  const double delta = epsilon / (10.0 * static_cast<double>(n));
  const std::size_t m_formula = embedding_sketch_size(d, epsilon, delta, options.const_m);
  Rng lazy_root = Rng(seed).sub("lazy-regression");

  CoupledSlots slots;
  Eigen::VectorXd held = Eigen::VectorXd::Zero(d);
  bool held_valid = false;
  long solves = 0;

  auto solver = [&, mode, epsilon](const Dataset& prefix, std::size_t t, Rng& step_rng) {
    if (prefix.empty()) return Eigen::VectorXd::Zero(d).eval();
    const RowMatrix M = RowMatrix::from_prefix(prefix);
    const std::size_t m = std::min<std::size_t>(m_formula, prefix.size());
    if (mode == UpdateMode::fresh) {
      ++solves;
      return sketched_solve(sketch_rows(M, m, epsilon, step_rng.next_u64()), M).x;
    }
    const LeverageScores lev = leverage_scores(M.rows);
    if (lev.degenerate) throw std::invalid_argument("online_regression: zero leverage mass");
    double total = 0.0;
    for (double tau : lev.tau) total += tau;
    std::vector<double> probs(lev.tau.size());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = lev.tau[i] / total;
    Rng advance_rng = lazy_root.sub("advance", t);
    slots.advance(probs, m, advance_rng);
    if (held_valid && slots.drift() <= options.lazy_threshold) return held;
    RowSketch sketch;
    sketch.selected.reserve(slots.size());
    const double md = static_cast<double>(slots.size());
    for (std::size_t j = 0; j < slots.size(); ++j) {
      const std::size_t i = slots.indices()[j];
      const double base = 1.0 / std::sqrt(md * probs[i]);
      Rng weight_rng = lazy_root.sub("slot-weight", j);
      sketch.selected.emplace_back(static_cast<Eigen::Index>(i),
                                   weight_rng.uniform(base, (1.0 + epsilon) * base));
    }
    ++solves;
    held = sketched_solve(sketch, M).x;
    held_valid = true;
    slots.snapshot();
    return held;
  };

  LossClipper clipper{options.clip, 0};
  RegretLedger ledger = run_online(
      solver, stream,
      [](const Eigen::VectorXd& x, const Eigen::VectorXd& p) { return regression_point_loss(x, p); },
      seed, [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return exactly_equal(a, b); },
      &clipper, options.timed);
  ledger.epsilon = epsilon;
  ledger.solve_events = solves;
  return ledger;
}

/// Exact full-data least squares (minimum-norm), the OPT oracle.
inline Eigen::VectorXd exact_least_squares(const RowMatrix& M) {
  if (M.n() == 0) throw std::invalid_argument("exact_least_squares: empty system");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(M.rows);
  return cod.solve(M.targets);
}

}  // namespace senskit::regression

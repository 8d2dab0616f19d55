#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "senskit/dataset.hpp"
#include "senskit/ledger.hpp"
#include "senskit/rng.hpp"

namespace senskit {

/// Clamp a loss into [0,1], counting clip events. Off by default in library
/// code; the benchmark harness turns it on because the regret accounting
/// assumes bounded losses.
struct LossClipper {
  bool enabled = false;
  long events = 0;

  double operator()(double raw) {
    if (!enabled) return raw;
    if (raw < 0.0) { ++events; return 0.0; }
    if (raw > 1.0) { ++events; return 1.0; }
    return raw;
  }
};

/// Exact parameter equality (bitwise on coefficients), the default predicate
/// for change counting. theta types must provide operator== or use the
/// tolerance predicate below.
template <class Theta>
bool exactly_equal(const Theta& a, const Theta& b) {
  return a == b;
}

inline bool exactly_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

inline bool exactly_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

/// Optional tolerance predicate: max-norm difference at most tol.
inline bool within_tolerance(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                             double tol = 1e-12) {
  return a.size() == b.size() && (a.size() == 0 || (a - b).lpNorm<Eigen::Infinity>() <= tol);
}

/// Predict-then-reveal driver around an offline solver: at step t the solver
/// sees only X_{t-1} (the first t-1 delivered points), commits theta_t, and
/// then the stream reveals x_t whose loss is recorded. Solver randomness
/// comes from a per-step substream so a run is reproducible from
/// (seed, stream order) alone.
///
/// Solver: theta(const Dataset& prefix, std::size_t step, Rng& rng); step is 1-based.
/// Loss:   double(const Theta&, const Eigen::VectorXd& point).
/// Equal:  bool(const Theta&, const Theta&).
template <class Solver, class Loss, class Equal>
RegretLedger run_online(Solver&& solver, Stream& stream, Loss&& loss, std::uint64_t seed,
                        Equal&& equal, LossClipper* clipper = nullptr, bool timed = false) {
  RegretLedger ledger;
  ledger.seed = seed;
  Rng root(seed);
  Dataset prefix;
  bool have_prev = false;
  typename std::decay_t<decltype(solver(prefix, std::size_t{1}, std::declval<Rng&>()))> prev{};
  const std::size_t n = stream.size();
  ledger.step_losses.reserve(n);
  for (std::size_t t = 1; t <= n; ++t) {
    const auto start = std::chrono::steady_clock::now();
    Rng step_rng = root.sub("step", t);
    decltype(prev) theta;
    try {
      theta = solver(prefix, t, step_rng);
    } catch (const std::exception& e) {
      throw std::runtime_error("run_online: solver failed at step " + std::to_string(t) +
                               ": " + e.what());
    }
    if (have_prev) ledger.changed.push_back(!equal(prev, theta));
    const Eigen::VectorXd& x = stream.next();  // revealed only after theta_t is fixed
    double l = loss(theta, x);
    if (clipper) l = (*clipper)(l);
    ledger.step_losses.push_back(l);
    prefix.push_back(x);
    prev = std::move(theta);
    have_prev = true;
    if (timed) {
      const auto stop = std::chrono::steady_clock::now();
      ledger.wall_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
  }
  if (clipper) ledger.clip_events = clipper->events;
  ledger.check();
  return ledger;
}

template <class Solver, class Loss>
RegretLedger run_online(Solver&& solver, Stream& stream, Loss&& loss, std::uint64_t seed) {
  return run_online(std::forward<Solver>(solver), stream, std::forward<Loss>(loss), seed,
                    [](const auto& a, const auto& b) { return exactly_equal(a, b); });
}

/// Desk-scale OPT oracle: best candidate under aggregate loss, ties broken by
/// lowest index.
template <class Theta, class Loss>
std::pair<Theta, double> brute_force_opt(Loss&& loss, const Dataset& dataset,
                                         const std::vector<Theta>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("brute_force_opt: empty candidate set");
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) acc += loss(candidates[c], dataset[i]);
    if (c == 0 || acc < best_value) {
      best = c;
      best_value = acc;
    }
  }
  return {candidates[best], best_value};
}

}  // namespace senskit

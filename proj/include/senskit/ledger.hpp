#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace senskit {

/// Per-run record of the online protocol: one loss per step, change flags
/// between consecutive parameters, and optional exact prefix optima.
struct RegretLedger {
  std::vector<double> step_losses;      // ell(theta_t, x_t), t = 1..n
  std::vector<bool> changed;            // theta_t != theta_{t+1}, t = 1..n-1
  std::vector<double> prefix_opt;       // OPT_t when computed, else NaN
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  long clip_events = 0;                 // losses clamped into [0,1]
  long clamp_events = 0;                // negative coreset weights clamped to 0
  long solve_events = 0;                // actual solver invocations (lazy mode)
  std::vector<double> wall_ms;          // per-step wall time, empty unless timed

  std::size_t steps() const { return step_losses.size(); }

  void check() const {
    if (!step_losses.empty() && changed.size() + 1 != step_losses.size())
      throw std::logic_error("RegretLedger: changed must have n-1 entries");
    if (!prefix_opt.empty() && prefix_opt.size() != step_losses.size())
      throw std::logic_error("RegretLedger: prefix_opt length mismatch");
  }

  double cumulative_loss() const {
    double acc = 0.0;
    for (double l : step_losses) acc += l;
    return acc;
  }
};

/// Sum of step losses minus (1+epsilon) * OPT_n. May be negative.
inline double epsilon_regret(const RegretLedger& ledger, double opt_n, double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("epsilon_regret: negative epsilon");
  if (!(opt_n >= 0.0)) throw std::invalid_argument("epsilon_regret: opt_n must be >= 0");
  return ledger.cumulative_loss() - (1.0 + epsilon) * opt_n;
}

/// Number of steps at which the output parameter changed.
inline long inconsistency(const RegretLedger& ledger) {
  long count = 0;
  for (bool c : ledger.changed) count += c ? 1 : 0;
  return count;
}

}  // namespace senskit

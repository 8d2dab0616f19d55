#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "senskit/average_sensitivity.hpp"
#include "senskit/bench/experiment.hpp"
#include "senskit/dataset.hpp"
#include "senskit/sensitivity.hpp"

namespace senskit::bench {

struct SensitivityConfig {
  std::vector<std::size_t> ns{4, 8};
  std::size_t m = 1;
  double epsilon = 0.2;
  std::string profile = "uniform";  // uniform | linear | constant
  bool exhaustive = true;
  std::size_t trials = 2000;  // Monte-Carlo mode
  std::uint64_t seed = 1;
  std::string out;  // directory; empty writes nothing

  void validate() const {
    if (ns.empty()) throw ConfigError("n: at least one dataset size required");
    for (std::size_t n : ns) {
      if (n < 2) throw ConfigError("n: sizes must be >= 2");
      if (exhaustive && n > 8) throw ConfigError("n: exhaustive mode supports n <= 8");
    }
    if (m < 1) throw ConfigError("m: must be >= 1");
    if (exhaustive && m > 5) throw ConfigError("m: exhaustive mode supports m <= 5");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon: must lie in (0,1)");
    if (profile != "uniform" && profile != "linear" && profile != "constant")
      throw ConfigError("profile: expected uniform, linear or constant, got '" + profile + "'");
    if (!exhaustive && trials < 100) throw ConfigError("trials: Monte-Carlo needs >= 100");
  }
};

/// Datasets for the report are 1-d labels 1..n; a point's value doubles as
/// its identity so deletions keep ids stable.
inline Dataset label_dataset(std::size_t n) {
  Dataset X;
  for (std::size_t i = 1; i <= n; ++i) {
    Eigen::VectorXd p(1);
    p(0) = static_cast<double>(i);
    X.push_back(p);
  }
  return X;
}

inline std::vector<std::size_t> label_ids(const Dataset& X) {
  std::vector<std::size_t> ids;
  ids.reserve(X.size());
  for (std::size_t i = 0; i < X.size(); ++i)
    ids.push_back(static_cast<std::size_t>(std::llround(X[i](0))));
  return ids;
}

inline SensitivityProfile profile_for(const Dataset& X, const std::string& kind) {
  std::vector<double> sigma(X.size());
  for (std::size_t i = 0; i < X.size(); ++i)
    sigma[i] = (kind == "linear") ? X[i](0) : 1.0;
  return SensitivityProfile(sigma);
}

/// The index-selection sampler as a summarized algorithm: output is the
/// sorted multiset of selected ids. The constant profile stands in for a
/// sampler whose output ignores the data entirely.
inline SummarizedAlgorithm selection_algorithm(const std::string& kind, std::size_t m) {
  SummarizedAlgorithm algo;
  if (kind == "constant") {
    algo.exact = [](const Dataset&) {
      return DiscreteDistribution({{"constant", 1.0}});
    };
    algo.sample = [](const Dataset&, Rng&) { return std::string("constant"); };
    return algo;
  }
  algo.exact = [kind, m](const Dataset& X) {
    return selection_distribution(profile_for(X, kind), label_ids(X), m);
  };
  algo.sample = [kind, m](const Dataset& X, Rng& rng) {
    const SensitivityProfile profile = profile_for(X, kind);
    const auto ids = label_ids(X);
    DiscreteSampler sampler(profile.probs());
    std::vector<std::size_t> picked;
    picked.reserve(m);
    for (std::size_t j = 0; j < m; ++j) picked.push_back(ids[sampler.draw(rng)]);
    return multiset_key(picked);
  };
  return algo;
}

/// Exact joint (id, perturbed weight) deletion sensitivity for m = 1.
inline double joint_beta(const Dataset& X, const std::string& kind, double epsilon) {
  const SensitivityProfile p_full = profile_for(X, kind);
  const auto ids_full = label_ids(X);
  double total = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const Dataset Xi = X.without(i);
    total += joint_draw_tv(p_full, ids_full, profile_for(Xi, kind), label_ids(Xi), epsilon);
  }
  return total / static_cast<double>(X.size());
}

/// Least-squares slope of log beta against log n; absent unless two or more
/// sizes have positive beta.
inline std::optional<double> fitted_exponent(const std::vector<std::size_t>& ns,
                                             const std::vector<double>& betas) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (betas[i] > 0.0) {
      xs.push_back(std::log(static_cast<double>(ns[i])));
      ys.push_back(std::log(betas[i]));
    }
  }
  if (xs.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

/// Average sensitivity of the configured sampler across dataset sizes, plus
/// the fitted scaling exponent. Written to <out>/sensitivity.json when an
/// output directory is set.
inline nlohmann::json sensitivity_report(const SensitivityConfig& config) {
  config.validate();
  const SummarizedAlgorithm algo = selection_algorithm(config.profile, config.m);
  const SensitivityMode mode =
      config.exhaustive ? SensitivityMode::exhaustive : SensitivityMode::monte_carlo;
  nlohmann::json report;
  report["mode"] = config.exhaustive ? "exhaustive" : "monte-carlo";
  report["m"] = config.m;
  report["epsilon"] = config.epsilon;
  report["profile"] = config.profile;
  nlohmann::json entries = nlohmann::json::array();
  std::vector<double> betas;
  for (std::size_t n : config.ns) {
    const Dataset X = label_dataset(n);
    const std::uint64_t n_seed = Rng(config.seed).sub("report-n", n).next_u64();
    const AverageSensitivity beta =
        estimate_average_sensitivity(algo, X, mode, config.trials, n_seed);
    nlohmann::json entry;
    entry["n"] = n;
    entry["beta"] = beta.value;
    entry["error_bar"] = beta.error_bar;
    if (config.exhaustive && config.m == 1 && config.profile != "constant")
      entry["joint_beta"] = joint_beta(X, config.profile, config.epsilon);
    entries.push_back(entry);
    betas.push_back(beta.value);
  }
  report["entries"] = entries;
  const auto exponent = fitted_exponent(config.ns, betas);
  if (exponent) {
    report["fitted_exponent"] = *exponent;
  } else {
    report["fitted_exponent"] = nullptr;
  }
  if (!config.out.empty()) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(config.out), ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + config.out + "'");
    const fs::path path = fs::path(config.out) / "sensitivity.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << report.dump(2) << '\n';
  }
  return report;
}

}  // namespace senskit::bench

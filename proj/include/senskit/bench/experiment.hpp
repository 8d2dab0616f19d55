#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "senskit/bench/generators.hpp"
#include "senskit/clustering.hpp"
#include "senskit/dataset.hpp"
#include "senskit/ledger.hpp"
#include "senskit/lowrank.hpp"
#include "senskit/regression.hpp"

namespace senskit::bench {

/// Bad configuration (exit code 2), as opposed to a runtime failure (exit 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Problem { cluster, lowrank, regress };
enum class Ordering { random, as_given, sorted_norm };
enum class Mode { fresh, lazy };

inline std::string to_string(Problem p) {
  switch (p) {
    case Problem::cluster: return "cluster";
    case Problem::lowrank: return "lowrank";
    default: return "regress";
  }
}

inline Ordering parse_ordering(const std::string& s) {
  if (s == "random") return Ordering::random;
  if (s == "as-given") return Ordering::as_given;
  if (s == "sorted-norm") return Ordering::sorted_norm;
  throw ConfigError("ordering: expected random, as-given or sorted-norm, got '" + s + "'");
}

inline std::string to_string(Ordering o) {
  switch (o) {
    case Ordering::random: return "random";
    case Ordering::as_given: return "as-given";
    default: return "sorted-norm";
  }
}

inline Mode parse_mode(const std::string& s) {
  if (s == "fresh") return Mode::fresh;
  if (s == "lazy") return Mode::lazy;
  throw ConfigError("mode: expected fresh or lazy, got '" + s + "'");
}

inline std::string to_string(Mode m) { return m == Mode::fresh ? "fresh" : "lazy"; }

struct ExperimentConfig {
  Problem problem = Problem::regress;
  std::size_t n = 200;
  int d = 5;
  std::size_t k = 3;
  double z = 2.0;
  double epsilon = 0.3;
  std::vector<std::uint64_t> seeds{1};
  Ordering ordering = Ordering::random;
  Mode mode = Mode::fresh;
  double separation = 1.0;
  double noise = 0.1;
  int rank = 3;
  double const_n1 = 1.0;
  double const_n2 = 1.0;
  double const_m = 1.0;
  double const_c = 100.0;
  double lazy_threshold = 0.1;
  int restarts = 3;       // per online solve (clustering)
  int opt_restarts = 50;  // hindsight oracle (clustering)
  bool verbatim_weights = false;
  bool timing = false;
  std::string out = "results";
  std::string data;  // optional CSV dataset, one point per row

  void validate() const {
    if (n < 2) throw ConfigError("n: must be >= 2");
    if (d < 1) throw ConfigError("d: must be >= 1");
    if (k < 1) throw ConfigError("k: must be >= 1");
    if (!(z >= 1.0)) throw ConfigError("z: must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon: must lie in (0,1)");
    if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
    if (noise < 0.0) throw ConfigError("noise: must be >= 0");
    if (separation < 0.0) throw ConfigError("separation: must be >= 0");
    if (rank < 1) throw ConfigError("rank: must be >= 1");
    if (!(const_n1 > 0.0)) throw ConfigError("const-n1: must be > 0");
    if (!(const_n2 > 0.0)) throw ConfigError("const-n2: must be > 0");
    if (!(const_m > 0.0)) throw ConfigError("const-m: must be > 0");
    if (!(const_c >= 1.0)) throw ConfigError("const-c: must be >= 1");
    if (!(lazy_threshold >= 0.0)) throw ConfigError("lazy-threshold: must be >= 0");
    if (restarts < 1) throw ConfigError("restarts: must be >= 1");
    if (opt_restarts < 1) throw ConfigError("opt-restarts: must be >= 1");
    if (problem == Problem::lowrank && static_cast<int>(k) > d)
      throw ConfigError("k: must be <= d for lowrank");
    if (problem == Problem::regress && d < 1) throw ConfigError("d: must be >= 1 for regress");
    if (out.empty()) throw ConfigError("out: output path required");
  }
};

/// Shortest decimal that round-trips to the exact double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("data: cannot open '" + path + "'");
  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      const std::string cell = line.substr(pos, comma - pos);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw ConfigError("data: malformed number at line " + std::to_string(lineno));
      values.push_back(v);
      pos = comma + 1;
    }
    Eigen::VectorXd p(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) p(static_cast<Eigen::Index>(i)) = values[i];
    try {
      out.push_back(p);
    } catch (const std::exception& e) {
      throw ConfigError("data: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw ConfigError("data: no rows in '" + path + "'");
  return out;
}

inline Dataset make_dataset(const ExperimentConfig& c, std::uint64_t seed) {
  if (!c.data.empty()) return load_csv_dataset(c.data);
  switch (c.problem) {
    case Problem::cluster:
      return generate_cluster(c.n, c.d, ClusterGen{c.k, c.separation, c.noise}, seed);
    case Problem::lowrank:
      return generate_lowrank(c.d, c.n, LowrankGen{c.rank, c.noise}, seed);
    default:
      return generate_regress(c.n, c.d, RegressGen{c.noise}, seed);
  }
}

inline Stream make_stream(const Dataset& dataset, Ordering ordering, std::uint64_t seed) {
  switch (ordering) {
    case Ordering::random: return random_order(dataset, seed);
    case Ordering::as_given: return as_given_order(dataset);
    default: return sorted_norm_order(dataset);
  }
}

struct SeedResult {
  std::uint64_t seed = 0;
  RegretLedger ledger;
  double opt = 0.0;
  std::string csv_name;
};

inline SeedResult run_single(const ExperimentConfig& c, std::uint64_t seed) {
  const Dataset dataset = make_dataset(c, seed);
  Stream stream = make_stream(dataset, c.ordering, seed);
  SeedResult r;
  r.seed = seed;
  const std::uint64_t opt_seed = Rng(seed).sub("opt-oracle").next_u64();
  switch (c.problem) {
    case Problem::cluster: {
      clustering::OnlineOptions o;
      o.const_n1 = c.const_n1;
      o.const_n2 = c.const_n2;
      o.rescale_c = c.const_c;
      o.lazy_threshold = c.lazy_threshold;
      o.verbatim_stage2 = c.verbatim_weights;
      o.restarts = c.restarts;
      o.timed = c.timing;
      const auto mode = c.mode == Mode::fresh ? clustering::UpdateMode::fresh
                                              : clustering::UpdateMode::lazy;
      r.ledger = clustering::online_clustering(stream, c.k, c.z, c.epsilon, mode, seed, o);
      r.opt = clustering::best_kz_cost(dataset, c.k, c.z, c.opt_restarts, opt_seed, true);
      break;
    }
    case Problem::lowrank: {
      lowrank::OnlineOptions o;
      o.const_m = c.const_m;
      o.lazy_threshold = c.lazy_threshold;
      o.verbatim_weights = c.verbatim_weights;
      o.timed = c.timing;
      const auto mode =
          c.mode == Mode::fresh ? lowrank::UpdateMode::fresh : lowrank::UpdateMode::lazy;
      r.ledger = lowrank::online_lowrank(stream, static_cast<int>(c.k), c.epsilon, mode, seed, o);
      r.opt = lowrank::exact_rank_k_loss(lowrank::columns_from_prefix(dataset),
                                         static_cast<int>(c.k), true);
      break;
    }
    default: {
      regression::OnlineOptions o;
      o.const_m = c.const_m;
      o.lazy_threshold = c.lazy_threshold;
      o.timed = c.timing;
      const auto mode =
          c.mode == Mode::fresh ? regression::UpdateMode::fresh : regression::UpdateMode::lazy;
      r.ledger = regression::online_regression(stream, c.epsilon, mode, seed, o);
      const regression::RowMatrix full = regression::RowMatrix::from_prefix(dataset);
      const Eigen::VectorXd xstar = regression::exact_least_squares(full);
      double total = 0.0;
      for (Eigen::Index i = 0; i < full.n(); ++i) {
        const double loss =
            regression::regression_loss(xstar, full.rows.row(i).transpose(), full.targets(i));
        total += std::min(1.0, std::max(0.0, loss));
      }
      r.opt = total;
      break;
    }
  }
  return r;
}

inline void write_ledger_csv(const std::filesystem::path& path, const RegretLedger& ledger,
                             double opt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "t,step_loss,cum_loss,prefix_opt,changed,wall_ms\n";
  double cum = 0.0;
  const std::size_t n = ledger.steps();
  for (std::size_t t = 1; t <= n; ++t) {
    cum += ledger.step_losses[t - 1];
    out << t << ',' << format_double(ledger.step_losses[t - 1]) << ',' << format_double(cum)
        << ',';
    if (t == n) out << format_double(opt);
    out << ',' << (t >= 2 && ledger.changed[t - 2] ? 1 : 0) << ',';
    if (t - 1 < ledger.wall_ms.size()) {
      out << format_double(ledger.wall_ms[t - 1]);
    } else {
      out << 0;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

struct LedgerRow {
  std::size_t t = 0;
  double step_loss = 0.0;
  double cum_loss = 0.0;
  std::optional<double> prefix_opt;
  int changed = 0;
  double wall_ms = 0.0;
};

inline std::vector<LedgerRow> read_ledger_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "t,step_loss,cum_loss,prefix_opt,changed,wall_ms")
    throw std::runtime_error("bad ledger header in '" + path.string() + "'");
  std::vector<LedgerRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      cells.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    if (cells.size() != 6) throw std::runtime_error("bad ledger row in '" + path.string() + "'");
    auto num = [&](const std::string& s) {
      double v = 0.0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("bad ledger number '" + s + "'");
      return v;
    };
    LedgerRow row;
    row.t = static_cast<std::size_t>(num(cells[0]));
    row.step_loss = num(cells[1]);
    row.cum_loss = num(cells[2]);
    if (!cells[3].empty()) row.prefix_opt = num(cells[3]);
    row.changed = static_cast<int>(num(cells[4]));
    row.wall_ms = num(cells[5]);
    rows.push_back(row);
  }
  return rows;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Runs every seed (in parallel), writes one ledger CSV per seed plus
/// summary.json, and returns the summary. Any failure removes the files this
/// run created before rethrowing.
inline nlohmann::json run_experiment(const ExperimentConfig& config) {
  config.validate();
  namespace fs = std::filesystem;
  const fs::path out_dir(config.out);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + config.out + "'");

  const std::size_t count = config.seeds.size();
  std::vector<SeedResult> results(count);
  std::vector<fs::path> written(count);
  std::atomic<std::size_t> cursor{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= count) return;
      try {
        SeedResult r = run_single(config, config.seeds[i]);
        r.csv_name = to_string(config.problem) + "-seed-" +
                     std::to_string(config.seeds[i]) + ".csv";
        const fs::path csv = out_dir / r.csv_name;
        write_ledger_csv(csv, r.ledger, r.opt);
        written[i] = csv;
        results[i] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  if (first_error) {
    for (const auto& p : written)
      if (!p.empty()) fs::remove(p, ec);
    std::rethrow_exception(first_error);
  }

  nlohmann::json summary;
  summary["problem"] = to_string(config.problem);
  summary["n"] = config.n;
  summary["d"] = config.d;
  summary["k"] = config.k;
  summary["z"] = config.z;
  summary["epsilon"] = config.epsilon;
  summary["mode"] = to_string(config.mode);
  summary["ordering"] = to_string(config.ordering);
  if (config.ordering == Ordering::sorted_norm) summary["ordering_note"] = "no guarantee";
  nlohmann::json per_seed = nlohmann::json::array();
  std::vector<double> regrets, regret_rates, inconsistencies, cum_losses;
  for (const auto& r : results) {
    const double cum = r.ledger.cumulative_loss();
    const double regret = epsilon_regret(r.ledger, r.opt, config.epsilon);
    const double inc = static_cast<double>(inconsistency(r.ledger));
    double wall = 0.0;
    for (double w : r.ledger.wall_ms) wall += w;
    nlohmann::json row;
    row["seed"] = r.seed;
    row["ledger_csv"] = r.csv_name;
    row["cum_loss"] = cum;
    row["opt"] = r.opt;
    row["regret"] = regret;
    row["regret_per_step"] = regret / static_cast<double>(r.ledger.steps());
    row["inconsistency"] = inc;
    row["solve_events"] = r.ledger.solve_events;
    row["clip_events"] = r.ledger.clip_events;
    row["clamp_events"] = r.ledger.clamp_events;
    row["wall_ms_total"] = wall;
    per_seed.push_back(row);
    regrets.push_back(regret);
    regret_rates.push_back(regret / static_cast<double>(r.ledger.steps()));
    inconsistencies.push_back(inc);
    cum_losses.push_back(cum);
  }
  summary["per_seed"] = per_seed;
  nlohmann::json agg;
  agg["seeds"] = count;
  agg["median_regret"] = median(regrets);
  agg["median_regret_per_step"] = median(regret_rates);
  agg["median_inconsistency"] = median(inconsistencies);
  agg["median_cum_loss"] = median(cum_losses);
  summary["aggregate"] = agg;

  const fs::path summary_path = out_dir / "summary.json";
  std::ofstream out(summary_path);
  if (!out) {
    for (const auto& p : written)
      if (!p.empty()) fs::remove(p, ec);
    throw std::runtime_error("cannot write '" + summary_path.string() + "'");
  }
  out << summary.dump(2) << '\n';
  return summary;
}

}  // namespace senskit::bench

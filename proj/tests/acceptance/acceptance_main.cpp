// Release gate. Each check measures one promised behavior end to end and
// prints a single verdict line; the process exits nonzero if any fails or
// overruns its time budget.
//
// Usage: acceptance_tests <senskit_bench binary> <golden directory>

#include <sys/wait.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "senskit/senskit.hpp"

namespace fs = std::filesystem;
using namespace senskit;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Gate {
  int index = 0;
  int failures = 0;

  void run(const char* label, std::optional<double> budget_s,
           const std::function<Verdict()>& check) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = !budget_s || secs <= *budget_s;
    const bool pass = v.pass && in_budget;
    if (!pass) ++failures;
    if (budget_s) {
      std::printf("[%s] %d %s: %s  %.1fs (budget %.0fs)\n", pass ? "PASS" : "FAIL", index, label,
                  v.detail.c_str(), secs, *budget_s);
    } else {
      std::printf("[%s] %d %s: %s  %.1fs\n", pass ? "PASS" : "FAIL", index, label,
                  v.detail.c_str(), secs);
    }
    std::fflush(stdout);
  }
};

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

// 1. Weighted coreset cost stays within 25% of the full-data cost for random
// center sets, across construction seeds.
Verdict coreset_sandwich() {
  const Dataset X = bench::generate_cluster(200, 2, {3, 1.0, 0.1}, 31);
  Rng theta_rng = Rng(90).sub("gate-centers");
  std::vector<clustering::CenterSet> thetas;
  thetas.reserve(100);
  for (int j = 0; j < 100; ++j) {
    std::vector<Eigen::VectorXd> centers;
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd p(2);
      p << theta_rng.uniform(-1.2, 1.2), theta_rng.uniform(-1.2, 1.2);
      centers.push_back(p);
    }
    thetas.emplace_back(centers, 2.0);
  }
  std::vector<double> full(thetas.size(), 0.0);
  for (std::size_t j = 0; j < thetas.size(); ++j)
    for (std::size_t i = 0; i < X.size(); ++i) full[j] += clustering::kz_loss(thetas[j], X[i]);
  long within = 0;
  for (int s = 0; s < 100; ++s) {
    const auto coreset = clustering::two_stage_coreset(X, 3, 2.0, 0.2, 0.01, 500 + s);
    for (std::size_t j = 0; j < thetas.size(); ++j) {
      const double ratio = clustering::coreset_kz_cost(coreset, thetas[j]) / full[j];
      if (ratio > 0.75 && ratio < 1.25) ++within;
    }
  }
  return {within >= 9500, fmt("%ld/10000 center-seed pairs within 25%% (need 9500)", within)};
}

// 2. A rescaled column sample preserves the residual cost of every rank-k
// projector within the advertised band, for most sampling seeds.
Verdict projection_cost_preservation() {
  const Dataset D = bench::generate_lowrank(20, 200, {3, 0.05}, 404);
  const Eigen::MatrixXd A = lowrank::columns_from_prefix(D);
  const std::size_t m = lowrank::pcp_sketch_size(3, 0.3, 0.01);
  if (m >= static_cast<std::size_t>(A.cols()))
    return {false, fmt("sketch size %zu does not shrink %ld columns", m, (long)A.cols())};
  Rng proj_rng = Rng(61).sub("gate-projectors");
  std::vector<Eigen::MatrixXd> bases;
  bases.reserve(200);
  for (int j = 0; j < 200; ++j) {
    Eigen::MatrixXd G(20, 3);
    for (int c = 0; c < 3; ++c) G.col(c) = bench::normal_vector(proj_rng, 20);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    bases.push_back(qr.householderQ() * Eigen::MatrixXd::Identity(20, 3));
  }
  const double a2 = A.squaredNorm();
  std::vector<double> base(bases.size());
  for (std::size_t j = 0; j < bases.size(); ++j)
    base[j] = a2 - (bases[j].transpose() * A).squaredNorm();
  // The sampled weights carry a Uniform[1, 1+eps] factor on top of the
  // inverse-probability rescaling, which inflates squared norms by up to
  // (1+eps)^2; the band is 1 +- 2 eps around the full residual.
  int ok_seeds = 0;
  for (int s = 0; s < 100; ++s) {
    const Eigen::MatrixXd C = lowrank::pcp_sample(A, 3, m, 0.3, 7000 + s).matrix;
    const double c2 = C.squaredNorm();
    bool all = true;
    for (std::size_t j = 0; j < bases.size() && all; ++j) {
      const double ratio = (c2 - (bases[j].transpose() * C).squaredNorm()) / base[j];
      if (!(ratio > 0.4 && ratio < 1.6)) all = false;
    }
    ok_seeds += all;
  }
  return {ok_seeds >= 90,
          fmt("%d/100 seeds kept all 200 projector residuals in (0.4, 1.6) (need 90), m=%zu",
              ok_seeds, m)};
}

// 3. A row sample at the formula size preserves |Ax| within 1 +- eps for a
// cloud of directions, and whenever it does, the sketched least-squares
// residual is within (1+eps)/(1-eps) of optimal.
Verdict subspace_embedding() {
  const Dataset D = bench::generate_regress(50, 5, {0.1}, 77);
  const regression::RowMatrix M = regression::RowMatrix::from_prefix(D);
  const std::size_t m = regression::embedding_sketch_size(5, 0.3, 0.01);
  Rng xrng = Rng(62).sub("gate-directions");
  Eigen::MatrixXd dirs(5, 1000);
  for (int j = 0; j < 1000; ++j) dirs.col(j) = bench::normal_vector(xrng, 5);
  const Eigen::MatrixXd AX = M.rows * dirs;
  const Eigen::VectorXd xstar = regression::exact_least_squares(M);
  const double opt_resid = (M.rows * xstar - M.targets).norm();
  const double cap = (1.0 + 0.3) / (1.0 - 0.3);
  int ok_seeds = 0, resid_failures = 0;
  for (int s = 0; s < 100; ++s) {
    const regression::RowSketch S = regression::sketch_rows(M, m, 0.3, 9000 + s);
    const Eigen::MatrixXd SAX = S.apply(M.rows) * dirs;
    bool all = true;
    for (int j = 0; j < 1000 && all; ++j) {
      const double ratio = SAX.col(j).norm() / AX.col(j).norm();
      if (!(ratio >= 0.7 && ratio <= 1.3)) all = false;
    }
    if (!all) continue;
    ++ok_seeds;
    const Eigen::VectorXd xhat = regression::sketched_solve(S, M).x;
    if ((M.rows * xhat - M.targets).norm() > cap * opt_resid + 1e-12) ++resid_failures;
  }
  return {ok_seeds >= 90 && resid_failures == 0,
          fmt("%d/100 seeds kept 1000 directions in 1+-0.3 (need 90); %d residuals broke the "
              "%.2fx cap (need 0), m=%zu",
              ok_seeds, resid_failures, cap, m)};
}

// 4. Exhaustive deletion sensitivity of single-draw selection halves when the
// dataset doubles, and the weight-inclusive version grows as the weight
// perturbation tightens.
Verdict selection_sensitivity_scaling() {
  const SummarizedAlgorithm alg = bench::selection_algorithm("uniform", 1);
  const double beta4 =
      estimate_average_sensitivity(alg, bench::label_dataset(4), SensitivityMode::exhaustive, 0, 1)
          .value;
  const double beta8 =
      estimate_average_sensitivity(alg, bench::label_dataset(8), SensitivityMode::exhaustive, 0, 1)
          .value;
  const double ratio = beta4 / beta8;
  const Dataset X6 = bench::label_dataset(6);
  const double tight = bench::joint_beta(X6, "uniform", 0.1);
  const double loose = bench::joint_beta(X6, "uniform", 0.2);
  const bool pass = ratio >= 1.6 && ratio <= 2.4 && tight >= loose && loose > 0.0;
  return {pass, fmt("beta(4)/beta(8) = %.3f in [1.6, 2.4]; joint beta %.4f at eps=0.1 >= %.4f "
                    "at eps=0.2",
                    ratio, tight, loose)};
}

// 5. Deletion identities of the worst-case cost share, computed exactly over a
// parameter grid on tiny instances, plus the interval-noise TV bound.
Verdict deletion_identities() {
  std::vector<Eigen::Vector2d> grid;
  for (int gx = 0; gx <= 20; ++gx)
    for (int gy = 0; gy <= 20; ++gy)
      grid.emplace_back(-1.2 + 0.12 * gx, -1.2 + 0.12 * gy);
  Rng inst_rng = Rng(57).sub("gate-instances");
  long mono_viol = 0, bound_viol = 0, total_viol = 0, ratio_viol = 0;
  int instances = 0;
  for (std::size_t n : {4, 5, 6})
    for (int rep = 0; rep < 4; ++rep) {
      ++instances;
      std::vector<Eigen::Vector2d> pts(n);
      for (auto& p : pts) p << inst_rng.uniform(-1.0, 1.0), inst_rng.uniform(-1.0, 1.0);
      // loss[t][i] = squared distance of point i to grid center t
      std::vector<std::vector<double>> loss(grid.size(), std::vector<double>(n));
      std::vector<double> s_full(grid.size(), 0.0);
      for (std::size_t t = 0; t < grid.size(); ++t)
        for (std::size_t i = 0; i < n; ++i) {
          loss[t][i] = (pts[i] - grid[t]).squaredNorm();
          s_full[t] += loss[t][i];
        }
      std::vector<double> sigma_full(n, 0.0);
      double total_full = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < grid.size(); ++t)
          sigma_full[i] = std::max(sigma_full[i], loss[t][i] / s_full[t]);
        total_full += sigma_full[i];
      }
      double total_gap = 0.0, ratio_sum = 0.0;
      for (std::size_t del = 0; del < n; ++del) {
        double total_del = 0.0;
        std::vector<double> sigma_del(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (i == del) continue;
          std::size_t arg = 0;
          for (std::size_t t = 0; t < grid.size(); ++t) {
            const double r = loss[t][i] / (s_full[t] - loss[t][del]);
            if (r > sigma_del[i]) {
              sigma_del[i] = r;
              arg = t;
            }
          }
          total_del += sigma_del[i];
          const double diff = sigma_del[i] - sigma_full[i];
          const double cap = loss[arg][i] * loss[arg][del] /
                             ((s_full[arg] - loss[arg][del]) * s_full[arg]);
          if (diff < -1e-10) ++mono_viol;
          if (diff > cap + 1e-10) ++bound_viol;
        }
        total_gap += std::abs(total_full - total_del);
        for (std::size_t i = 0; i < n; ++i) {
          if (i == del) continue;
          ratio_sum += std::abs(sigma_full[i] / total_full - sigma_del[i] / total_del);
        }
      }
      if (total_gap > total_full + 1e-10) ++total_viol;
      if (ratio_sum > 2.0 + 1e-10) ++ratio_viol;
    }
  Rng tv_rng = Rng(58).sub("gate-intervals");
  long tv_viol = 0;
  for (int t = 0; t < 1000; ++t) {
    const double b = std::exp(tv_rng.uniform(-2.0, 2.0));
    const double b_prime = b * tv_rng.uniform(0.4, 2.5);
    const double eps = tv_rng.uniform(0.05, 0.95);
    const double tv = uniform_interval_tv(b, b_prime, eps);
    if (tv > (1.0 + eps) / eps * std::abs(1.0 - b_prime / b) + 1e-12) ++tv_viol;
  }
  const long viol = mono_viol + bound_viol + total_viol + ratio_viol + tv_viol;
  return {viol == 0,
          fmt("%ld violations across %d grid instances and 1000 interval triples (need 0)", viol,
              instances)};
}

bench::ExperimentConfig config_for(bench::Problem p, std::size_t n, bench::Mode mode) {
  bench::ExperimentConfig c;
  c.problem = p;
  c.n = n;
  c.mode = mode;
  switch (p) {
    case bench::Problem::cluster:
      c.d = 2;
      c.k = 3;
      c.epsilon = 0.2;
      break;
    case bench::Problem::lowrank:
      c.d = 20;
      c.k = 3;
      c.epsilon = 0.3;
      break;
    case bench::Problem::regress:
      c.d = 5;
      c.k = 3;
      c.epsilon = 0.3;
      break;
  }
  return c;
}

std::vector<bench::SeedResult> run_seeds(const bench::ExperimentConfig& c) {
  std::vector<bench::SeedResult> out;
  out.reserve(20);
  for (std::uint64_t s = 1; s <= 20; ++s) out.push_back(bench::run_single(c, s));
  return out;
}

double median_regret_per_step(const std::vector<bench::SeedResult>& runs, double epsilon,
                              std::size_t n) {
  std::vector<double> per_step;
  per_step.reserve(runs.size());
  for (const auto& r : runs)
    per_step.push_back(epsilon_regret(r.ledger, r.opt, epsilon) / static_cast<double>(n));
  return bench::median(per_step);
}

// 6. Regret per step shrinks as streams grow, on all three problems.
Verdict regret_per_step_decreases(std::vector<bench::SeedResult>& fresh_regress_long) {
  const auto r_small = run_seeds(config_for(bench::Problem::regress, 200, bench::Mode::fresh));
  fresh_regress_long = run_seeds(config_for(bench::Problem::regress, 2000, bench::Mode::fresh));
  const double reg_a = median_regret_per_step(r_small, 0.3, 200);
  const double reg_b = median_regret_per_step(fresh_regress_long, 0.3, 2000);
  const auto l_small = run_seeds(config_for(bench::Problem::lowrank, 125, bench::Mode::fresh));
  const auto l_large = run_seeds(config_for(bench::Problem::lowrank, 500, bench::Mode::fresh));
  const double low_a = median_regret_per_step(l_small, 0.3, 125);
  const double low_b = median_regret_per_step(l_large, 0.3, 500);
  const auto c_small = run_seeds(config_for(bench::Problem::cluster, 250, bench::Mode::fresh));
  const auto c_large = run_seeds(config_for(bench::Problem::cluster, 1000, bench::Mode::fresh));
  const double clu_a = median_regret_per_step(c_small, 0.2, 250);
  const double clu_b = median_regret_per_step(c_large, 0.2, 1000);
  const bool pass = reg_b < reg_a && low_b < low_a && clu_b < clu_a;
  return {pass, fmt("medians over 20 seeds: regress %.4f -> %.4f, lowrank %.4f -> %.4f, "
                    "cluster %.4f -> %.4f",
                    reg_a, reg_b, low_a, low_b, clu_a, clu_b)};
}

// 7. Lazy updates change the solution rarely and cost almost nothing in loss.
Verdict lazy_mode_consistency(const std::vector<bench::SeedResult>& fresh_regress_long) {
  const auto lazy = run_seeds(config_for(bench::Problem::regress, 2000, bench::Mode::lazy));
  std::vector<double> changes;
  double lazy_mean = 0.0, fresh_mean = 0.0;
  for (const auto& r : lazy) {
    long c = 0;
    for (const bool b : r.ledger.changed) c += b;
    changes.push_back(static_cast<double>(c));
    lazy_mean += r.ledger.cumulative_loss() / 2000.0;
  }
  for (const auto& r : fresh_regress_long) fresh_mean += r.ledger.cumulative_loss() / 2000.0;
  lazy_mean /= static_cast<double>(lazy.size());
  fresh_mean /= static_cast<double>(fresh_regress_long.size());
  const double med_changes = bench::median(changes);
  const double gap = std::abs(lazy_mean - fresh_mean);
  const bool pass = med_changes <= 200.0 && gap <= 0.02;
  return {pass, fmt("median solution changes %.0f (cap 200); mean step-loss gap %.5f (cap 0.02)",
                    med_changes, gap)};
}

// 8. Degenerate configurations reproduce their closed-form answers, and the
// exact rank-k residual floor (squared Frobenius) holds under every sketch.
Verdict oracle_equivalences() {
  Rng root = Rng(64).sub("gate-oracles");
  double worst_ls = 0.0;
  for (int t = 0; t < 30; ++t) {
    Rng trial = root.sub("identity", t);
    const int d = 2 + static_cast<int>(trial.index(5));
    const std::size_t n = 20 + trial.index(41);
    const Dataset D = bench::generate_regress(n, d, {0.2}, trial.next_u64());
    const regression::RowMatrix M = regression::RowMatrix::from_prefix(D);
    const Eigen::VectorXd via_sketch =
        regression::sketched_solve(regression::RowSketch::identity(M.n()), M).x;
    worst_ls = std::max(worst_ls, (via_sketch - regression::exact_least_squares(M)).norm());
  }
  double worst_centroid = 0.0;
  for (int t = 0; t < 30; ++t) {
    Rng trial = root.sub("centroid", t);
    const int d = 2 + static_cast<int>(trial.index(4));
    const std::size_t n = 5 + trial.index(36);
    clustering::ClusteringCoreset pool;
    pool.z = 2.0;
    Eigen::VectorXd mean_num = Eigen::VectorXd::Zero(d);
    double mean_den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd p = bench::normal_vector(trial, d);
      const double w = trial.uniform(0.1, 2.0);
      pool.points.push_back({p, w});
      mean_num += w * p;
      mean_den += w;
    }
    const auto sol = clustering::weighted_kz_solve(pool, 1, 2.0, 1, trial.next_u64());
    worst_centroid =
        std::max(worst_centroid, (sol.centers.centers[0] - mean_num / mean_den).norm());
  }
  long floor_viol = 0;
  for (int t = 0; t < 30; ++t) {
    Rng trial = root.sub("floor", t);
    const int d = 8 + static_cast<int>(trial.index(8));
    const std::size_t n = 30 + trial.index(21);
    const int k = 1 + static_cast<int>(trial.index(3));
    const Dataset D = bench::generate_lowrank(d, n, {k, 0.2}, trial.next_u64());
    const Eigen::MatrixXd A = lowrank::columns_from_prefix(D);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
    double tail = 0.0;
    for (Eigen::Index i = k; i < svd.singularValues().size(); ++i)
      tail += svd.singularValues()(i) * svd.singularValues()(i);
    for (int s = 0; s < 5; ++s) {
      const lowrank::Projector Z = lowrank::top_k_left_singular(
          lowrank::pcp_sample(A, k, 25, 0.3, trial.next_u64()).matrix, k);
      const double sketched = A.squaredNorm() - (Z.basis.transpose() * A).squaredNorm();
      if (tail > sketched + 1e-9) ++floor_viol;
    }
  }
  const bool pass = worst_ls <= 1e-10 && worst_centroid <= 1e-10 && floor_viol == 0;
  return {pass, fmt("identity sketch gap %.1e, single-center gap %.1e (caps 1e-10); rank floor "
                    "broken %ld/150 (need 0)",
                    worst_ls, worst_centroid, floor_viol)};
}

std::optional<std::string> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// 9. Pinned configurations rerun byte-for-byte and match the checked-in
// goldens; the CLI exits cleanly.
Verdict byte_determinism(const fs::path& cli, const fs::path& golden_dir) {
  struct Pinned {
    const char* name;
    std::vector<std::string> args;
    std::vector<std::string> files;
  };
  const std::vector<Pinned> pinned = {
      {"cluster",
       {"cluster", "--n", "40", "--d", "2", "--k", "3", "--z", "2", "--epsilon", "0.2", "--seeds",
        "1", "--ordering", "random", "--mode", "fresh"},
       {"cluster-seed-1.csv", "summary.json"}},
      {"lowrank",
       {"lowrank", "--n", "40", "--d", "8", "--k", "2", "--epsilon", "0.3", "--seeds", "1",
        "--ordering", "random", "--mode", "fresh"},
       {"lowrank-seed-1.csv", "summary.json"}},
      {"regress",
       {"regress", "--n", "40", "--d", "3", "--epsilon", "0.3", "--seeds", "1", "--ordering",
        "random", "--mode", "fresh"},
       {"regress-seed-1.csv", "summary.json"}},
      {"sensitivity",
       {"sensitivity", "--n", "4,6", "--m", "1", "--epsilon", "0.2", "--profile", "uniform",
        "--mode", "exhaustive", "--seeds", "1"},
       {"sensitivity.json"}},
  };
  const fs::path scratch = fs::temp_directory_path() / "senskit-gate";
  std::error_code ec;
  fs::remove_all(scratch, ec);
  fs::create_directories(scratch);
  const auto run_cli = [&](const std::vector<std::string>& args, const fs::path& out) -> int {
    std::ostringstream cmd;
    cmd << '"' << cli.string() << '"';
    for (const auto& a : args) cmd << ' ' << a;
    cmd << " --out \"" << out.string() << "\" >/dev/null 2>&1";
    const int rc = std::system(cmd.str().c_str());
    if (rc == -1 || !WIFEXITED(rc)) return -1;
    return WEXITSTATUS(rc);
  };
  std::string problem;
  for (const auto& p : pinned) {
    const fs::path first = scratch / p.name / "first";
    const fs::path second = scratch / p.name / "second";
    for (const fs::path& out : {first, second}) {
      const int rc = run_cli(p.args, out);
      if (rc != 0) {
        problem = fmt("%s run exited with %d", p.name, rc);
        break;
      }
    }
    if (!problem.empty()) break;
    for (const auto& f : p.files) {
      const auto a = slurp(first / f);
      const auto b = slurp(second / f);
      const auto g = slurp(golden_dir / p.name / f);
      if (!a || !b) {
        problem = fmt("%s/%s missing from a run", p.name, f.c_str());
        break;
      }
      if (*a != *b) {
        problem = fmt("%s/%s differs between identical runs", p.name, f.c_str());
        break;
      }
      if (!g) {
        problem = fmt("golden %s/%s missing", p.name, f.c_str());
        break;
      }
      if (*a != *g) {
        problem = fmt("%s/%s differs from its golden", p.name, f.c_str());
        break;
      }
    }
    if (!problem.empty()) break;
  }
  fs::remove_all(scratch, ec);
  if (!problem.empty()) return {false, problem};
  return {true, "4 pinned configs reran byte-identically and matched their goldens"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance_tests <bench-cli> <golden-dir>\n");
    return 2;
  }
  const fs::path cli = argv[1];
  const fs::path golden_dir = argv[2];
  Gate gate;
  gate.run("coreset cost sandwich", 60.0, coreset_sandwich);
  gate.run("projection-cost preservation", 30.0, projection_cost_preservation);
  gate.run("subspace embedding and sketched residual", 20.0, subspace_embedding);
  gate.run("selection sensitivity scaling", 10.0, selection_sensitivity_scaling);
  gate.run("deletion identities at small n", 30.0, deletion_identities);
  std::vector<bench::SeedResult> fresh_regress_long;
  gate.run("regret per step decreases", 300.0,
           [&] { return regret_per_step_decreases(fresh_regress_long); });
  gate.run("lazy mode stays consistent", 120.0,
           [&] { return lazy_mode_consistency(fresh_regress_long); });
  gate.run("oracle equivalences", std::nullopt, oracle_equivalences);
  gate.run("byte determinism and goldens", std::nullopt,
           [&] { return byte_determinism(cli, golden_dir); });
  if (gate.failures > 0) {
    std::printf("%d of 9 criteria failing\n", gate.failures);
    return 1;
  }
  std::printf("all 9 criteria pass\n");
  return 0;
}

#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "senskit/dataset.hpp"
#include "senskit/ledger.hpp"
#include "senskit/online.hpp"
#include "senskit/rng.hpp"

using namespace senskit;

namespace {
Dataset line_points(int n) {
  Dataset X;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd p(1);
    p << static_cast<double>(i + 1);
    X.push_back(p);
  }
  return X;
}
}  // namespace

TEST_CASE("regret accounting is plain arithmetic") {
  RegretLedger ledger;
  ledger.step_losses = {0.5, 0.25};
  ledger.changed = {true};
  REQUIRE(ledger.cumulative_loss() == Catch::Approx(0.75));
  REQUIRE(epsilon_regret(ledger, 0.5, 0.2) == Catch::Approx(0.75 - 1.2 * 0.5));
  REQUIRE(epsilon_regret(ledger, 0.0, 0.0) == Catch::Approx(0.75));
  REQUIRE_THROWS_AS(epsilon_regret(ledger, -1.0, 0.2), std::invalid_argument);
  REQUIRE_THROWS_AS(epsilon_regret(ledger, 0.5, -0.2), std::invalid_argument);
  REQUIRE(inconsistency(ledger) == 1);
  ledger.changed = {false};
  REQUIRE(inconsistency(ledger) == 0);
}

TEST_CASE("the online protocol hides the next point and grows the prefix") {
  Dataset X = line_points(6);
  Stream stream = random_order(X, 21);
  const auto order = stream.order();
  std::vector<std::size_t> seen_sizes;
  auto solver = [&](const Dataset& prefix, std::size_t step, Rng&) {
    seen_sizes.push_back(prefix.size());
    REQUIRE(prefix.size() == step - 1);
    // the prefix is exactly the already-revealed points, in arrival order
    for (std::size_t i = 0; i < prefix.size(); ++i) REQUIRE(exactly_equal(prefix[i], X[order[i]]));
    Eigen::VectorXd theta(1);
    theta << static_cast<double>(step);
    return theta;
  };
  auto loss = [](const Eigen::VectorXd& theta, const Eigen::VectorXd& x) {
    return std::abs(theta(0) - x(0));
  };
  RegretLedger ledger = run_online(solver, stream, loss, 21);
  REQUIRE(ledger.steps() == 6);
  REQUIRE(ledger.changed.size() == 5);
  for (bool c : ledger.changed) REQUIRE(c);  // theta changes every step here
  REQUIRE(seen_sizes.front() == 0);
  REQUIRE(seen_sizes.back() == 5);
}

TEST_CASE("per-step losses can be clamped into the unit interval") {
  Dataset X = line_points(4);
  Stream stream = as_given_order(X);
  auto solver = [](const Dataset&, std::size_t, Rng&) {
    Eigen::VectorXd theta(1);
    theta << 0.0;
    return theta;
  };
  auto loss = [](const Eigen::VectorXd& theta, const Eigen::VectorXd& x) {
    return std::abs(theta(0) - x(0));  // 1, 2, 3, 4 before clamping
  };
  LossClipper clipper{true, 0};
  RegretLedger ledger = run_online(
      solver, stream, loss, 1,
      [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return exactly_equal(a, b); },
      &clipper);
  REQUIRE(ledger.cumulative_loss() == Catch::Approx(4.0));  // 1+1+1+1
  REQUIRE(ledger.clip_events == 3);
  REQUIRE(inconsistency(ledger) == 0);
}

TEST_CASE("solver failures carry the step number") {
  Dataset X = line_points(5);
  Stream stream = as_given_order(X);
  auto solver = [](const Dataset&, std::size_t step, Rng&) {
    if (step == 3) throw std::invalid_argument("boom");
    Eigen::VectorXd theta(1);
    theta << 0.0;
    return theta;
  };
  auto loss = [](const Eigen::VectorXd&, const Eigen::VectorXd&) { return 0.0; };
  REQUIRE_THROWS_WITH(run_online(solver, stream, loss, 1),
                      Catch::Matchers::ContainsSubstring("step 3"));
}

TEST_CASE("identical seeds give bitwise identical runs") {
  Dataset X = line_points(8);
  auto solver = [](const Dataset& prefix, std::size_t, Rng& rng) {
    Eigen::VectorXd theta(1);
    theta << rng.next_double() + static_cast<double>(prefix.size());
    return theta;
  };
  auto loss = [](const Eigen::VectorXd& theta, const Eigen::VectorXd& x) {
    return std::abs(theta(0) - x(0));
  };
  Stream s1 = random_order(X, 5);
  Stream s2 = random_order(X, 5);
  RegretLedger a = run_online(solver, s1, loss, 5);
  RegretLedger b = run_online(solver, s2, loss, 5);
  REQUIRE(a.step_losses.size() == b.step_losses.size());
  for (std::size_t i = 0; i < a.step_losses.size(); ++i)
    REQUIRE(a.step_losses[i] == b.step_losses[i]);  // bitwise
  REQUIRE(a.changed == b.changed);
}

TEST_CASE("hindsight search prefers the lowest index on ties") {
  Dataset X = line_points(3);  // 1, 2, 3
  std::vector<double> candidates{2.0, 2.0, 5.0};
  auto loss = [](const double& c, const Eigen::VectorXd& x) { return std::abs(c - x(0)); };
  const auto [best, value] = brute_force_opt(loss, X, candidates);
  REQUIRE(best == 2.0);
  REQUIRE(value == Catch::Approx(2.0));  // |2-1|+|2-2|+|2-3|
  REQUIRE_THROWS_AS(brute_force_opt(loss, X, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("hindsight optimum grows with the prefix") {
  Dataset X;
  Rng rng(17);
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd p(1);
    p << rng.uniform(-1.0, 1.0);
    X.push_back(p);
  }
  std::vector<double> grid;
  for (int g = -20; g <= 20; ++g) grid.push_back(g / 20.0);
  auto loss = [](const double& c, const Eigen::VectorXd& x) { return (c - x(0)) * (c - x(0)); };
  double prev = 0.0;
  Dataset prefix;
  for (std::size_t i = 0; i < X.size(); ++i) {
    prefix.push_back(X[i]);
    const auto [best, value] = brute_force_opt(loss, prefix, grid);
    REQUIRE(value >= prev - 1e-12);  // adding a point can only raise the floor
    prev = value;
  }
}

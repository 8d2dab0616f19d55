#include <array>
#include <vector>

#include "catch_amalgamated.hpp"
#include "senskit/coupling.hpp"
#include "senskit/rng.hpp"

using namespace senskit;

TEST_CASE("transition preserves the target marginal") {
  const std::vector<double> p_old{0.7, 0.2, 0.1};
  const std::vector<double> p_new{0.1, 0.3, 0.2, 0.4};  // support grows
  CouplingStep step(p_old, p_new);
  Rng root(2024);
  DiscreteSampler source(p_old);
  std::array<long, 4> counts{};
  long stayed = 0;
  const long trials = 200000;
  for (long t = 0; t < trials; ++t) {
    Rng trial = root.sub("trial", static_cast<std::uint64_t>(t));
    const std::size_t before = source.draw(trial);
    const std::size_t after = step.advance(before, trial);
    counts[after]++;
    if (after == before) ++stayed;
  }
  for (std::size_t i = 0; i < p_new.size(); ++i) {
    const double freq = static_cast<double>(counts[i]) / trials;
    REQUIRE(freq == Catch::Approx(p_new[i]).margin(0.01));
  }
  // the kept fraction of an optimal coupling is the total overlap
  double overlap = 0.0;
  for (std::size_t i = 0; i < p_old.size(); ++i) overlap += std::min(p_old[i], p_new[i]);
  REQUIRE(static_cast<double>(stayed) / trials == Catch::Approx(overlap).margin(0.01));
}

TEST_CASE("identical laws never move an index") {
  const std::vector<double> p{0.25, 0.5, 0.25};
  CouplingStep step(p, p);
  Rng root(5);
  DiscreteSampler source(p);
  for (long t = 0; t < 5000; ++t) {
    Rng trial = root.sub("t", static_cast<std::uint64_t>(t));
    const std::size_t before = source.draw(trial);
    REQUIRE(step.advance(before, trial) == before);
  }
}

TEST_CASE("transitions reject shrinking supports and bad indices") {
  const std::vector<double> big{0.25, 0.25, 0.5};
  const std::vector<double> small{0.5, 0.5};
  REQUIRE_THROWS_AS(CouplingStep(big, small), std::invalid_argument);
  CouplingStep ok(small, big);
  Rng rng(1);
  REQUIRE_THROWS_AS(ok.advance(3, rng), std::out_of_range);
}

TEST_CASE("slot banks grow, shrink, and report drift against the snapshot") {
  CoupledSlots slots;
  Rng root(42);
  REQUIRE(slots.drift() == 1.0);  // nothing solved yet
  Rng a = root.sub("a");
  REQUIRE_THROWS_AS(slots.advance(std::vector<double>{1.0}, 0, a), std::invalid_argument);

  const std::vector<double> point{1.0, 0.0};
  slots.advance(point, 2, a);
  REQUIRE(slots.size() == 2);
  for (std::size_t i : slots.indices()) REQUIRE(i == 0);
  slots.snapshot();
  REQUIRE(slots.drift() == 0.0);

  // growth under an unchanged law: only the two new slots differ
  Rng b = root.sub("b");
  slots.advance(point, 4, b);
  REQUIRE(slots.size() == 4);
  REQUIRE(slots.drift() == Catch::Approx(0.5));

  // shrink back: half the snapshot multiset is gone
  slots.snapshot();
  Rng c = root.sub("c");
  slots.advance(point, 2, c);
  REQUIRE(slots.drift() == Catch::Approx(0.5));

  // a law that forces every index to move drifts completely
  slots.snapshot();
  const std::vector<double> flipped{0.0, 1.0};
  Rng d = root.sub("d");
  slots.advance(flipped, 2, d);
  for (std::size_t i : slots.indices()) REQUIRE(i == 1);
  REQUIRE(slots.drift() == 1.0);
}

TEST_CASE("slot marginals track the latest law through repeated drift") {
  const std::vector<double> p1{1.0, 0.0, 0.0};
  const std::vector<double> p2{0.3, 0.4, 0.3};
  const std::vector<double> p3{0.1, 0.2, 0.7};
  Rng root(31);
  std::array<long, 3> counts{};
  const long trials = 30000;
  for (long t = 0; t < trials; ++t) {
    Rng trial = root.sub("run", static_cast<std::uint64_t>(t));
    CoupledSlots slots;
    Rng s1 = trial.sub("s1"), s2 = trial.sub("s2"), s3 = trial.sub("s3");
    slots.advance(p1, 1, s1);
    slots.advance(p2, 1, s2);
    slots.advance(p3, 1, s3);
    counts[slots.indices()[0]]++;
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const double freq = static_cast<double>(counts[i]) / trials;
    REQUIRE(freq == Catch::Approx(p3[i]).margin(0.015));
  }
}

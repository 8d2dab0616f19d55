#pragma once

// Core: seeded randomness, data handling, regret accounting.
#include "senskit/dataset.hpp"
#include "senskit/distribution.hpp"
#include "senskit/ledger.hpp"
#include "senskit/online.hpp"
#include "senskit/rng.hpp"

// Sampling machinery: sensitivity sampling, deletion sensitivity, couplings.
#include "senskit/average_sensitivity.hpp"
#include "senskit/coupling.hpp"
#include "senskit/sensitivity.hpp"

// Problem pipelines.
#include "senskit/clustering.hpp"
#include "senskit/lowrank.hpp"
#include "senskit/regression.hpp"

// Benchmark harness.
#include "senskit/bench/experiment.hpp"
#include "senskit/bench/generators.hpp"
#include "senskit/bench/sensitivity_report.hpp"

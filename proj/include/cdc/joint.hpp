#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cdc/placement.hpp"
#include "cdc/shuffle.hpp"
#include "cdc/system.hpp"

namespace cdc {

// Limits for the joint placement search; fields <= 0 mean unlimited.
// Node budgets are deterministic; a wall-clock budget necessarily cuts the
// search at a machine-dependent point.
struct SolveBudget {
    long max_nodes = 0;
    double max_seconds = 0;
};

struct JointSolveReport {
    Placement best_placement;
    Rational best_load;         // exact expected load of best_placement
    double best_load_float = 0;
    Rational root_bound;        // valid lower bound on every feasible placement
    // true: root_bound is the optimum of the full fractional-placement LP;
    // false: it came from the cheap combinatorial root bound (large instances)
    bool root_bound_relaxation = false;
    long nodes = 0;             // branch-and-bound nodes expanded
    double seconds = 0;
    bool proved_optimal = false;
};

std::string serialize_report(const JointSolveReport& report, Variant variant);

// Branch-and-bound over exclusive placements: each file is assigned one
// worker subset (files in decreasing popularity, subsets in decreasing size),
// nodes are pruned by covering-LP and capacity-aware combinatorial bounds,
// leaves are evaluated through the shared demand-load cache, and the final
// candidates (including the two-file-group and round-robin seeds) are
// re-ranked in exact rationals. With an exhausted budget the incumbent is
// returned and proved_optimal stays false.
//
// root_bound_hint, when given, must be a valid lower bound (typically a
// previously computed relaxation_lower_bound); it is reported verbatim and
// saves re-solving the root relaxation.
JointSolveReport solve_joint(const SystemConfig& config, Variant variant,
                             const SolveBudget& budget = {},
                             std::shared_ptr<DemandLoadCache> shared_cache = nullptr,
                             const Rational* root_bound_hint = nullptr);

// Exact optimum of the fractional-placement relaxation: every t_{n,S} in
// [0,1] with sum_S t_{n,S} = 1 and the per-worker capacities, coupled to one
// flow block per demand (the binary variant uses its per-file inequality
// family, which stays valid for fractional t). Solved by cutting planes: a
// small master over t proposes placements, one exact flow subproblem per
// demand prices them, and dual rays become cuts until the bound is tight.
// Every linear program involved is solved in exact rationals, so the value
// returned is the true optimum. Guardrail: N <= 8 and K <= 5.
Rational relaxation_lower_bound(const SystemConfig& config, Variant variant);

// Dense single-program construction of the same relaxation, kept as a
// cross-check; practical only for small instances (throws beyond a row-count
// guardrail).
Rational relaxation_lower_bound_reference(const SystemConfig& config, Variant variant);

struct TwoFileGroupResult {
    int n1 = 0;  // winning split (smallest on exact ties)
    Placement placement;
    Rational load;          // exact expected load of placement
    double load_float = 0;
    std::vector<std::pair<int, double>> split_loads;  // feasible (N1, load), N1 ascending
};

// Evaluates every feasible two-group split concurrently and returns the best.
TwoFileGroupResult two_file_group_search(const SystemConfig& config, Variant variant,
                                         std::shared_ptr<DemandLoadCache> shared_cache = nullptr);

// Reference optimizer: enumerates every capacity-feasible placement.
// Intended for tests and small instances; throws beyond its guardrail.
JointSolveReport exhaustive_optimum(const SystemConfig& config, Variant variant,
                                    std::shared_ptr<DemandLoadCache> shared_cache = nullptr);

}  // namespace cdc

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "cdc/lp.hpp"
#include "cdc/placement.hpp"
#include "cdc/system.hpp"

namespace cdc {

enum class Variant { cdc, ccdc };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

// Variable indexing shared by every per-demand flow LP at a fixed worker
// count: first the multicast segment sizes L[j,S] for every subset |S| >= 2
// and sender j in S, then the residuals r[k,S,S-i] for |S| >= 3, recipient
// k in S, dropped member i in S\{k}. Subsets ascend by mask, members by id.
struct FlowLayout {
    int num_workers = 0;
    int num_L = 0;
    int num_r = 0;
    std::vector<uint32_t> subsets;  // masks with |S| >= 2, ascending
    std::vector<int> l_off, r_off;  // per mask

    explicit FlowLayout(int num_workers);

    int l_index(uint32_t S, int j) const;
    int r_index(uint32_t S, int k, int i) const;
    int num_vars() const { return num_L + num_r; }
};

// a_S^D per subset mask (size 2^K); CDC uses the raw counts, C-CDC the 0/1
// indicator of each count
std::vector<int> demand_file_counts(const Placement& placement, JobDemand demand,
                                    int num_workers, Variant variant);

// Per-demand flow program: one equality per (k in S, |S| >= 2)
//   sum_{j in S\k} L[j,S] + sum_{i in S\k} r[k,S,S-i] - sum_{i not in S} r[k,S+i,S]
//     = W_k * a[S\k],
// objective sum of all L. The constraint matrix depends only on the worker
// count; the demand and placement enter through the right-hand side.
//
// With covering=true the rows become >= (delivery may exceed the demanded
// mass). The covering optimum is monotone non-decreasing in a componentwise
// and never exceeds the equality optimum, which makes it a valid bound on
// any completion of a partially decided placement.
//
// Constraint order: subsets in FlowLayout order (ascending mask), recipients
// k ascending within each subset. The rational overload admits fractional
// demanded mass, as produced by a relaxed placement.
LinearProgram build_flow_lp(const std::vector<int>& a, const SystemConfig& config,
                            bool covering = false);
LinearProgram build_flow_lp(const std::vector<Rational>& a, const SystemConfig& config,
                            bool covering = false);
LinearProgram build_cdc_flow_lp(const Placement& placement, const SystemConfig& config,
                                JobDemand demand);
LinearProgram build_ccdc_flow_lp(const Placement& placement, const SystemConfig& config,
                                 JobDemand demand);

// Exact optimal shuffle variables for one demand, in layout order.
struct ShuffleLoadPlan {
    JobDemand demand{0};
    FlowLayout layout{2};
    std::vector<Rational> x;
    Rational load;  // = sum of all L entries, exactly

    const Rational& L(uint32_t S, int j) const { return x[layout.l_index(S, j)]; }
    const Rational& r(uint32_t S, int k, int i) const { return x[layout.r_index(S, k, i)]; }
};

ShuffleLoadPlan solve_flow_exact(const Placement& placement, const SystemConfig& config,
                                 JobDemand demand, Variant variant);

// nonzero variables only, one per line; consumed by golden tests and the CLI
std::string serialize_plan(const ShuffleLoadPlan& plan);

// L-bar = sum_D p_D * load(D); throws if any demand mask 1..2^N-1 is missing
Rational expected_load(const std::map<uint32_t, Rational>& per_demand_loads,
                       const std::vector<double>& popularity);

// closed-form (variables, constraints) totals of the monolithic per-demand
// family, counting nonnegativity bounds as constraints
std::pair<long long, long long> count_lp_dimensions(const SystemConfig& config);

// Memoized per-demand optimal loads keyed by the a-vector. The full-set
// entry never enters any constraint and is dropped from the key; keys are
// divided by their gcd since the optimum scales linearly with a. Exact
// values are resolved lazily from the stored float basis. Thread-safe.
class DemandLoadCache {
  public:
    explicit DemandLoadCache(const SystemConfig& config);

    double value(const std::vector<int>& a);
    Rational exact_value(const std::vector<int>& a);
    size_t distinct_keys() const { return map_.size(); }

  private:
    struct Entry {
        double val = 0;
        std::vector<int> basis;
        bool has_exact = false;
        Rational exact;
    };

    Entry& locate(const std::vector<int>& normalized);

    SystemConfig cfg_;
    std::vector<double> wd_;
    std::map<std::vector<int>, Entry> map_;
    std::mutex mu_;
};

// Expected-load evaluation of whole placements under one config/variant.
// The parallel and serial entry points produce bitwise-identical results:
// per-demand values land in a slot array and are folded serially in
// canonical demand order.
class PlacementEvaluator {
  public:
    PlacementEvaluator(const SystemConfig& config, Variant variant);
    // Shares an externally owned demand-load cache.  Cache values depend only
    // on the worker count and reducing loads, so one cache may serve many
    // evaluators that differ in popularity (e.g. a popularity-exponent sweep)
    // or in variant (the binary variant binarizes counts before lookup).
    PlacementEvaluator(const SystemConfig& config, Variant variant,
                       std::shared_ptr<DemandLoadCache> shared_cache);

    double expected(const Placement& placement);         // OpenMP over demands
    double expected_serial(const Placement& placement);  // reference kernel
    Rational expected_exact(const Placement& placement);
    std::vector<Rational> per_demand_exact(const Placement& placement);

    // Monte Carlo estimate over the conditioned demand distribution, for
    // file counts beyond exact enumeration; returns mean, fills std error
    double sampled_expected(const Placement& placement, int num_samples, uint64_t seed,
                            double& standard_error);

    DemandLoadCache& cache() { return *cache_; }
    std::shared_ptr<DemandLoadCache> shared_cache() { return cache_; }
    const SystemConfig& config() const { return cfg_; }
    Variant variant() const { return variant_; }
    // Conditioned demand probabilities indexed by demand mask (entry 0 unused).
    const std::vector<double>& demand_probabilities();
    const std::vector<Rational>& demand_probabilities_exact();

  private:
    double expected_impl(const Placement& placement, bool parallel);
    void ensure_tables();
    std::vector<int> a_of(const Placement& placement, uint32_t demand_mask) const;

    SystemConfig cfg_;
    Variant variant_;
    std::shared_ptr<DemandLoadCache> cache_;
    bool tables_ready_ = false;
    std::vector<double> pd_;
    std::vector<Rational> pd_exact_;
};

}  // namespace cdc

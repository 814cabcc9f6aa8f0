#include "cdc/shuffle.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cdc {

const char* variant_name(Variant v) { return v == Variant::cdc ? "cdc" : "ccdc"; }

Variant parse_variant(const std::string& name) {
    if (name == "cdc") return Variant::cdc;
    if (name == "ccdc") return Variant::ccdc;
    throw std::invalid_argument("unknown variant: " + name);
}

namespace {

inline int rank_in(uint32_t S, int worker) {
    return std::popcount(S & ((1u << (worker - 1)) - 1));
}

inline bool has(uint32_t S, int worker) { return (S >> (worker - 1)) & 1; }

}  // namespace

FlowLayout::FlowLayout(int K) : num_workers(K) {
    l_off.assign(1u << K, -1);
    r_off.assign(1u << K, -1);
    int pos = 0;
    for (uint32_t S = 3; S < (1u << K); ++S) {
        int sz = std::popcount(S);
        if (sz < 2) continue;
        subsets.push_back(S);
        l_off[S] = pos;
        pos += sz;
    }
    num_L = pos;
    pos = 0;
    for (uint32_t S : subsets) {
        int sz = std::popcount(S);
        if (sz < 3) continue;
        r_off[S] = pos;
        pos += sz * (sz - 1);
    }
    num_r = pos;
}

int FlowLayout::l_index(uint32_t S, int j) const { return l_off[S] + rank_in(S, j); }

int FlowLayout::r_index(uint32_t S, int k, int i) const {
    int sz = std::popcount(S);
    int rk = rank_in(S, k);
    int ri = rank_in(S, i);
    return num_L + r_off[S] + rk * (sz - 1) + ri - (i > k ? 1 : 0);
}

std::vector<int> demand_file_counts(const Placement& placement, JobDemand demand,
                                    int num_workers, Variant variant) {
    std::vector<int> a = subset_file_counts(placement, demand, num_workers).counts;
    if (variant == Variant::ccdc)
        for (int& c : a) c = c > 0 ? 1 : 0;
    return a;
}

namespace {

template <typename Mass>
LinearProgram build_flow_lp_impl(const std::vector<Mass>& a, const SystemConfig& config,
                                 bool covering) {
    const int K = config.num_workers;
    FlowLayout ly(K);
    LinearProgram lp;
    for (int v = 0; v < ly.num_vars(); ++v) lp.add_variable();
    for (uint32_t S : ly.subsets)
        for (int j = 1; j <= K; ++j)
            if (has(S, j)) lp.set_objective(ly.l_index(S, j), 1);

    for (uint32_t S : ly.subsets) {
        int sz = std::popcount(S);
        for (int k = 1; k <= K; ++k) {
            if (!has(S, k)) continue;
            uint32_t rest = S ^ (1u << (k - 1));
            int con = lp.add_constraint(covering ? Relation::ge : Relation::eq,
                                        config.reducing_loads[k - 1] * a[rest]);
            for (int j = 1; j <= K; ++j) {
                if (!has(S, j) || j == k) continue;
                lp.add_term(con, ly.l_index(S, j), 1);
            }
            if (sz >= 3)
                for (int i = 1; i <= K; ++i) {
                    if (!has(S, i) || i == k) continue;
                    lp.add_term(con, ly.r_index(S, k, i), 1);
                }
            for (int i = 1; i <= K; ++i) {
                if (has(S, i)) continue;
                lp.add_term(con, ly.r_index(S | (1u << (i - 1)), k, i), -1);
            }
        }
    }
    return lp;
}

}  // namespace

LinearProgram build_flow_lp(const std::vector<int>& a, const SystemConfig& config,
                            bool covering) {
    return build_flow_lp_impl(a, config, covering);
}

LinearProgram build_flow_lp(const std::vector<Rational>& a, const SystemConfig& config,
                            bool covering) {
    return build_flow_lp_impl(a, config, covering);
}

LinearProgram build_cdc_flow_lp(const Placement& placement, const SystemConfig& config,
                                JobDemand demand) {
    return build_flow_lp(demand_file_counts(placement, demand, config.num_workers, Variant::cdc),
                         config);
}

LinearProgram build_ccdc_flow_lp(const Placement& placement, const SystemConfig& config,
                                 JobDemand demand) {
    return build_flow_lp(demand_file_counts(placement, demand, config.num_workers, Variant::ccdc),
                         config);
}

namespace {

bool all_zero_off_full(const std::vector<int>& a) {
    uint32_t full = (uint32_t)a.size() - 1;
    for (uint32_t S = 1; S < full; ++S)
        if (a[S] != 0) return false;
    return true;
}

}  // namespace

ShuffleLoadPlan solve_flow_exact(const Placement& placement, const SystemConfig& config,
                                 JobDemand demand, Variant variant) {
    const int K = config.num_workers;
    std::vector<int> a = demand_file_counts(placement, demand, K, variant);

    ShuffleLoadPlan plan{demand, FlowLayout(K), {}, Rational(0)};
    plan.x.assign(plan.layout.num_vars(), Rational(0));
    if (all_zero_off_full(a)) return plan;

    if (K == 2) {
        // pure unicast: the two constraints pin both variables
        plan.x[plan.layout.l_index(3, 1)] = config.reducing_loads[1] * a[1];
        plan.x[plan.layout.l_index(3, 2)] = config.reducing_loads[0] * a[2];
        plan.load = plan.x[0] + plan.x[1];
        return plan;
    }

    LinearProgram lp = build_flow_lp(a, config);
    SimplexOptions opt;
    opt.parallel = false;
    LpSolution sol = solve_lp(lp, opt);
    ExactLpResult ex = exact_lp_solution(lp, sol.status == LpStatus::optimal
                                                 ? sol.basis
                                                 : std::vector<int>{});
    if (ex.status != LpStatus::optimal)
        throw std::runtime_error("flow lp unexpectedly not optimal");
    plan.x = std::move(ex.x);
    plan.load = 0;
    for (int v = 0; v < plan.layout.num_L; ++v) plan.load += plan.x[v];
    return plan;
}

std::string serialize_plan(const ShuffleLoadPlan& plan) {
    std::ostringstream out;
    const FlowLayout& ly = plan.layout;
    const int K = ly.num_workers;
    out << "demand " << plan.demand.mask << "\n";
    for (uint32_t S : ly.subsets)
        for (int j = 1; j <= K; ++j) {
            if (!has(S, j)) continue;
            const Rational& v = plan.x[ly.l_index(S, j)];
            if (v != 0) out << "L " << j << " " << S << " " << rational_str(v) << "\n";
        }
    for (uint32_t S : ly.subsets) {
        if (std::popcount(S) < 3) continue;
        for (int k = 1; k <= K; ++k) {
            if (!has(S, k)) continue;
            for (int i = 1; i <= K; ++i) {
                if (!has(S, i) || i == k) continue;
                const Rational& v = plan.x[ly.r_index(S, k, i)];
                if (v != 0)
                    out << "r " << k << " " << S << " " << (S ^ (1u << (i - 1))) << " "
                        << rational_str(v) << "\n";
            }
        }
    }
    out << "load " << rational_str(plan.load) << "\n";
    return out.str();
}

Rational expected_load(const std::map<uint32_t, Rational>& per_demand_loads,
                       const std::vector<double>& popularity) {
    const int N = (int)popularity.size();
    std::vector<Rational> pexact;
    pexact.reserve(N);
    for (double p : popularity) pexact.push_back(rational_from_double(p));
    std::vector<Rational> pd = all_job_probabilities(pexact);
    Rational acc = 0;
    for (uint32_t mask = 1; mask < (1u << N); ++mask) {
        auto it = per_demand_loads.find(mask);
        if (it == per_demand_loads.end())
            throw std::invalid_argument("expected_load: missing demand " + std::to_string(mask));
        if (it->second != 0) acc += pd[mask] * it->second;
    }
    return acc;
}

std::pair<long long, long long> count_lp_dimensions(const SystemConfig& config) {
    const long long K = config.num_workers;
    const long long demands = (1LL << config.num_files) - 1;
    // C(K,k) * k^2 summed over k = 3..K
    long long tail_sq = 0, tail_sqk = 0;
    long long binom = (K * (K - 1) * (K - 2)) / 6;  // C(K,3)
    for (long long k = 3; k <= K; ++k) {
        tail_sq += binom * k * k;
        tail_sqk += binom * (k * k + k);
        binom = binom * (K - k) / (k + 1);
    }
    long long vars = demands * (K * K + tail_sq - K);
    long long cons = demands * (2 * K * K + tail_sqk - 2 * K);
    return {vars, cons};
}

/**** DemandLoadCache ****/

DemandLoadCache::DemandLoadCache(const SystemConfig& config) : cfg_(config) {
    wd_.reserve(cfg_.reducing_loads.size());
    for (const Rational& w : cfg_.reducing_loads) wd_.push_back(to_double(w));
}

DemandLoadCache::Entry& DemandLoadCache::locate(const std::vector<int>& normalized) {
    auto it = map_.find(normalized);
    if (it != map_.end()) return it->second;
    LinearProgram lp = build_flow_lp(normalized, cfg_);
    SimplexOptions opt;
    opt.parallel = false;
    LpSolution sol = solve_lp(lp, opt);
    if (sol.status != LpStatus::optimal)
        throw std::runtime_error("flow lp unexpectedly not optimal");
    Entry e;
    e.val = sol.objective;
    e.basis = std::move(sol.basis);
    return map_.emplace(normalized, std::move(e)).first->second;
}

double DemandLoadCache::value(const std::vector<int>& a) {
    if (all_zero_off_full(a)) return 0.0;
    if (cfg_.num_workers == 2) return wd_[0] * a[2] + wd_[1] * a[1];
    std::vector<int> key = a;
    key[key.size() - 1] = 0;  // full-set placements never enter a constraint
    int g = 0;
    for (int c : key) g = std::gcd(g, c);
    for (int& c : key) c /= g;
    std::lock_guard<std::mutex> lock(mu_);
    return g * locate(key).val;
}

Rational DemandLoadCache::exact_value(const std::vector<int>& a) {
    if (all_zero_off_full(a)) return Rational(0);
    if (cfg_.num_workers == 2)
        return cfg_.reducing_loads[0] * a[2] + cfg_.reducing_loads[1] * a[1];
    std::vector<int> key = a;
    key[key.size() - 1] = 0;
    int g = 0;
    for (int c : key) g = std::gcd(g, c);
    for (int& c : key) c /= g;
    std::lock_guard<std::mutex> lock(mu_);
    Entry& e = locate(key);
    if (!e.has_exact) {
        LinearProgram lp = build_flow_lp(key, cfg_);
        ExactLpResult ex = exact_lp_solution(lp, e.basis);
        if (ex.status != LpStatus::optimal)
            throw std::runtime_error("flow lp exact resolution failed");
        e.exact = std::move(ex.objective);
        e.has_exact = true;
    }
    return g * e.exact;
}

/**** PlacementEvaluator ****/

PlacementEvaluator::PlacementEvaluator(const SystemConfig& config, Variant variant)
    : cfg_(config), variant_(variant), cache_(std::make_shared<DemandLoadCache>(config)) {}

PlacementEvaluator::PlacementEvaluator(const SystemConfig& config, Variant variant,
                                       std::shared_ptr<DemandLoadCache> shared_cache)
    : cfg_(config), variant_(variant), cache_(std::move(shared_cache)) {
    if (!cache_) cache_ = std::make_shared<DemandLoadCache>(config);
}

const std::vector<double>& PlacementEvaluator::demand_probabilities() {
    ensure_tables();
    return pd_;
}

const std::vector<Rational>& PlacementEvaluator::demand_probabilities_exact() {
    ensure_tables();
    return pd_exact_;
}

void PlacementEvaluator::ensure_tables() {
    if (tables_ready_) return;
    if (cfg_.num_files > 24)
        throw std::invalid_argument("full demand enumeration beyond 24 files; use sampling");
    pd_ = all_job_probabilities(cfg_.popularity);
    pd_exact_ = all_job_probabilities(cfg_.popularity_exact());
    tables_ready_ = true;
}

std::vector<int> PlacementEvaluator::a_of(const Placement& placement,
                                          uint32_t demand_mask) const {
    std::vector<int> a(1u << cfg_.num_workers, 0);
    for (int n = 1; n <= cfg_.num_files; ++n)
        if ((demand_mask >> (n - 1)) & 1) ++a[placement.of_file(n).mask];
    if (variant_ == Variant::ccdc)
        for (int& c : a) c = c > 0 ? 1 : 0;
    return a;
}

double PlacementEvaluator::expected_impl(const Placement& placement, bool parallel) {
    ensure_tables();
    const uint32_t top = 1u << cfg_.num_files;
    std::vector<double> vals(top, 0.0);
    bool par = parallel && top >= 256;
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (uint32_t mask = 1; mask < top; ++mask) vals[mask] = cache_->value(a_of(placement, mask));
    double acc = 0;
    for (uint32_t mask = 1; mask < top; ++mask) acc += pd_[mask] * vals[mask];
    return acc;
}

double PlacementEvaluator::expected(const Placement& placement) {
    return expected_impl(placement, true);
}

double PlacementEvaluator::expected_serial(const Placement& placement) {
    return expected_impl(placement, false);
}

Rational PlacementEvaluator::expected_exact(const Placement& placement) {
    ensure_tables();
    const uint32_t top = 1u << cfg_.num_files;
    Rational acc = 0;
    for (uint32_t mask = 1; mask < top; ++mask) {
        Rational v = cache_->exact_value(a_of(placement, mask));
        if (v != 0) acc += pd_exact_[mask] * v;
    }
    return acc;
}

std::vector<Rational> PlacementEvaluator::per_demand_exact(const Placement& placement) {
    ensure_tables();
    const uint32_t top = 1u << cfg_.num_files;
    std::vector<Rational> out(top, Rational(0));
    for (uint32_t mask = 1; mask < top; ++mask)
        out[mask] = cache_->exact_value(a_of(placement, mask));
    return out;
}

double PlacementEvaluator::sampled_expected(const Placement& placement, int num_samples,
                                            uint64_t seed, double& standard_error) {
    if (num_samples <= 1) throw std::invalid_argument("need at least 2 samples");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double sum = 0, sumsq = 0;
    for (int s = 0; s < num_samples; ++s) {
        uint32_t mask = 0;
        while (mask == 0)
            for (int n = 0; n < cfg_.num_files; ++n)
                if (unif(rng) < cfg_.popularity[n]) mask |= 1u << n;
        double v = cache_->value(a_of(placement, mask));
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / num_samples;
    double var = (sumsq - num_samples * mean * mean) / (num_samples - 1);
    standard_error = std::sqrt(std::max(0.0, var) / num_samples);
    return mean;
}

}  // namespace cdc

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <random>
#include <set>

#include "cdc/shuffle.hpp"

using namespace cdc;

namespace {

SystemConfig make_config(int K, int N, std::vector<int> M, std::vector<Rational> W,
                         std::vector<double> p) {
    SystemConfig cfg;
    cfg.num_workers = K;
    cfg.num_files = N;
    cfg.mapping_loads = std::move(M);
    cfg.reducing_loads = std::move(W);
    cfg.popularity = std::move(p);
    cfg.validate();
    return cfg;
}

SystemConfig uniform_config(int K, int N, std::vector<int> M) {
    return make_config(K, N, std::move(M), std::vector<Rational>(K, Rational(1, K)),
                       zipf_popularity(N, 0.0));
}

Placement place(std::vector<uint32_t> masks) {
    Placement p;
    for (uint32_t m : masks) p.assignment.push_back(WorkerSubset{m});
    return p;
}

// random capacity-feasible placement: each file to a random non-empty subset,
// retried until within all M_k
Placement random_placement(std::mt19937& rng, const SystemConfig& cfg) {
    const uint32_t top = (1u << cfg.num_workers) - 1;
    while (true) {
        Placement p;
        std::vector<int> used(cfg.num_workers, 0);
        for (int n = 0; n < cfg.num_files; ++n) {
            uint32_t mask = 1 + rng() % top;
            p.assignment.push_back(WorkerSubset{mask});
            for (int k = 0; k < cfg.num_workers; ++k)
                if ((mask >> k) & 1) ++used[k];
        }
        bool ok = true;
        for (int k = 0; k < cfg.num_workers; ++k)
            if (used[k] > cfg.mapping_loads[k]) ok = false;
        if (ok) return p;
    }
}

// direct re-substitution of the flow equality at every (k, S)
void check_flow_equalities(const ShuffleLoadPlan& plan, const SystemConfig& cfg,
                           const std::vector<int>& a) {
    const FlowLayout& ly = plan.layout;
    const int K = cfg.num_workers;
    for (uint32_t S : ly.subsets) {
        int sz = std::popcount(S);
        for (int k = 1; k <= K; ++k) {
            if (!((S >> (k - 1)) & 1)) continue;
            Rational lhs = cfg.reducing_loads[k - 1] * a[S ^ (1u << (k - 1))];
            for (int i = 1; i <= K; ++i)
                if (!((S >> (i - 1)) & 1)) lhs += plan.r(S | (1u << (i - 1)), k, i);
            Rational rhs = 0;
            for (int j = 1; j <= K; ++j)
                if (((S >> (j - 1)) & 1) && j != k) rhs += plan.L(S, j);
            if (sz >= 3)
                for (int i = 1; i <= K; ++i)
                    if (((S >> (i - 1)) & 1) && i != k) rhs += plan.r(S, k, i);
            CHECK(lhs == rhs);
        }
    }
    Rational total = 0;
    for (int v = 0; v < ly.num_L; ++v) total += plan.x[v];
    CHECK(total == plan.load);
    for (const Rational& v : plan.x) CHECK(v >= 0);
}

}  // namespace

TEST_CASE("flow layout is a bijection") {
    for (int K = 2; K <= 5; ++K) {
        FlowLayout ly(K);
        std::set<int> seen;
        for (uint32_t S : ly.subsets) {
            for (int j = 1; j <= K; ++j) {
                if (!((S >> (j - 1)) & 1)) continue;
                int idx = ly.l_index(S, j);
                CHECK(idx >= 0);
                CHECK(idx < ly.num_L);
                CHECK(seen.insert(idx).second);
            }
            if (std::popcount(S) >= 3)
                for (int k = 1; k <= K; ++k) {
                    if (!((S >> (k - 1)) & 1)) continue;
                    for (int i = 1; i <= K; ++i) {
                        if (!((S >> (i - 1)) & 1) || i == k) continue;
                        int idx = ly.r_index(S, k, i);
                        CHECK(idx >= ly.num_L);
                        CHECK(idx < ly.num_vars());
                        CHECK(seen.insert(idx).second);
                    }
                }
        }
        CHECK((int)seen.size() == ly.num_vars());
    }
}

TEST_CASE("golden homogeneous load one half") {
    auto cfg = uniform_config(3, 3, {2, 2, 2});
    auto p = place({0b011, 0b101, 0b110});
    auto plan = solve_flow_exact(p, cfg, JobDemand{7}, Variant::cdc);
    CHECK(plan.load == Rational(1, 2));
    check_flow_equalities(plan, cfg, demand_file_counts(p, JobDemand{7}, 3, Variant::cdc));

    auto lp = build_cdc_flow_lp(p, cfg, JobDemand{7});
    auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("two workers collapse to unicast") {
    auto cfg = make_config(2, 3, {3, 3}, {Rational(1, 4), Rational(3, 4)},
                           zipf_popularity(3, 0.56));
    std::mt19937 rng(7);
    for (int t = 0; t < 30; ++t) {
        auto p = random_placement(rng, cfg);
        uint32_t dmask = 1 + rng() % 7;
        auto a = demand_file_counts(p, JobDemand{dmask}, 2, Variant::cdc);
        auto plan = solve_flow_exact(p, cfg, JobDemand{dmask}, Variant::cdc);
        CHECK(plan.load == cfg.reducing_loads[0] * a[2] + cfg.reducing_loads[1] * a[1]);
        check_flow_equalities(plan, cfg, a);

        // LP agrees with the closed form
        auto sol = solve_lp(build_cdc_flow_lp(p, cfg, JobDemand{dmask}));
        REQUIRE(sol.status == LpStatus::optimal);
        CHECK(sol.objective == doctest::Approx(to_double(plan.load)).epsilon(1e-10));
    }
}

TEST_CASE("ccdc aggregation example") {
    // both demanded files sit at worker 1 alone; W_2 = 1/2
    auto cfg = make_config(2, 2, {2, 2}, {Rational(1, 2), Rational(1, 2)},
                           zipf_popularity(2, 0.0));
    auto p = place({0b01, 0b01});
    auto cdc = solve_flow_exact(p, cfg, JobDemand{3}, Variant::cdc);
    auto ccdc = solve_flow_exact(p, cfg, JobDemand{3}, Variant::ccdc);
    CHECK(cdc.load == Rational(1));
    CHECK(ccdc.load == Rational(1, 2));
}

TEST_CASE("local demands cost nothing") {
    auto cfg = uniform_config(3, 2, {2, 2, 2});
    auto p = place({0b111, 0b111});
    for (uint32_t d = 1; d <= 3; ++d) {
        auto plan = solve_flow_exact(p, cfg, JobDemand{d}, Variant::cdc);
        CHECK(plan.load == Rational(0));
    }
}

TEST_CASE("dimension count closed form matches construction") {
    for (int K = 2; K <= 5; ++K)
        for (int N = 1; N <= 8; ++N) {
            SystemConfig cfg;
            cfg.num_workers = K;
            cfg.num_files = N;
            cfg.reducing_loads.assign(K, Rational(1, K));
            auto [vars, cons] = count_lp_dimensions(cfg);
            std::vector<int> a(1u << K, 0);
            a[1] = 1;
            auto lp = build_flow_lp(a, cfg);
            long long demands = (1LL << N) - 1;
            CHECK(vars == demands * lp.num_vars());
            CHECK(cons == demands * (long long)(lp.cons.size() + lp.vars.size()));
        }
    SystemConfig c21;
    c21.num_workers = 2;
    c21.num_files = 1;
    c21.reducing_loads.assign(2, Rational(1, 2));
    CHECK(count_lp_dimensions(c21) == std::pair<long long, long long>(2, 4));
    SystemConfig c31 = c21;
    c31.num_workers = 3;
    c31.reducing_loads.assign(3, Rational(1, 3));
    CHECK(count_lp_dimensions(c31) == std::pair<long long, long long>(15, 24));
}

TEST_CASE("per demand decomposition equals monolithic") {
    auto cfg = make_config(3, 3, {2, 2, 2}, {Rational(1, 4), Rational(1, 4), Rational(1, 2)},
                           zipf_popularity(3, 0.56));
    auto p = place({0b011, 0b101, 0b001});
    auto pd = all_job_probabilities(cfg.popularity_exact());

    // weighted sum of per-demand exact optima
    Rational decomposed = 0;
    for (uint32_t d = 1; d < 8; ++d)
        decomposed += pd[d] * solve_flow_exact(p, cfg, JobDemand{d}, Variant::cdc).load;

    // one monolithic program: per-demand blocks with p_D-weighted objective
    LinearProgram mono;
    for (uint32_t d = 1; d < 8; ++d) {
        auto lp = build_cdc_flow_lp(p, cfg, JobDemand{d});
        int base = mono.num_vars();
        for (int v = 0; v < lp.num_vars(); ++v) {
            mono.add_variable();
            mono.objective[base + v] = pd[d] * lp.objective[v];
        }
        for (const auto& con : lp.cons) {
            int id = mono.add_constraint(con.rel, con.rhs);
            for (auto& [v, c] : con.terms) mono.add_term(id, base + v, c);
        }
    }
    auto ex = solve_lp_exact(mono);
    REQUIRE(ex.status == LpStatus::optimal);
    CHECK(ex.objective == decomposed);

    // and the evaluator agrees
    PlacementEvaluator ev(cfg, Variant::cdc);
    CHECK(ev.expected_exact(p) == decomposed);
}

TEST_CASE("random instances: exactness, dominance, unicast bound, conservation") {
    std::mt19937 rng(20250105);
    for (int t = 0; t < 60; ++t) {
        int K = 2 + (int)(rng() % 3);
        int N = 1 + (int)(rng() % 5);
        std::vector<int> M(K);
        for (int& m : M) m = 1 + (int)(rng() % N);
        // ensure capacity
        int total = 0;
        for (int m : M) total += m;
        for (int k = 0; total < N; ++total, k = (k + 1) % K) ++M[k];
        // random rational reducing loads summing to one
        std::vector<Rational> W(K);
        int denom = 0;
        std::vector<int> nums(K);
        for (int k = 0; k < K; ++k) {
            nums[k] = 1 + (int)(rng() % 5);
            denom += nums[k];
        }
        for (int k = 0; k < K; ++k) W[k] = Rational(nums[k], denom);
        double theta = (rng() % 3) * 0.6;
        auto cfg = make_config(K, N, M, W, zipf_popularity(N, theta));

        auto p = random_placement(rng, cfg);
        uint32_t dmask = 1 + rng() % ((1u << N) - 1);
        JobDemand D{dmask};

        auto a_cdc = demand_file_counts(p, D, K, Variant::cdc);
        auto cdc = solve_flow_exact(p, cfg, D, Variant::cdc);
        check_flow_equalities(cdc, cfg, a_cdc);

        auto a_cc = demand_file_counts(p, D, K, Variant::ccdc);
        auto cc = solve_flow_exact(p, cfg, D, Variant::ccdc);
        check_flow_equalities(cc, cfg, a_cc);

        CHECK(cc.load <= cdc.load);

        // uncoded unicast upper bound
        Rational unicast = 0;
        for (int k = 1; k <= K; ++k) {
            int missing = 0;
            for (int n = 1; n <= N; ++n)
                if (D.contains(n) && !p.of_file(n).contains(k)) ++missing;
            unicast += cfg.reducing_loads[k - 1] * missing;
        }
        CHECK(cdc.load <= unicast);

        // conservation identity per worker
        for (int k = 1; k <= K; ++k) {
            Rational lhs = 0, rhs = 0;
            for (uint32_t S : cdc.layout.subsets) {
                if (!((S >> (k - 1)) & 1)) continue;
                lhs += cfg.reducing_loads[k - 1] * a_cdc[S ^ (1u << (k - 1))];
                for (int j = 1; j <= K; ++j)
                    if (((S >> (j - 1)) & 1) && j != k) rhs += cdc.L(S, j);
            }
            CHECK(lhs == rhs);
        }
    }
}

TEST_CASE("cache scales with gcd and ignores the full set") {
    auto cfg = uniform_config(3, 6, {6, 6, 6});
    DemandLoadCache cache(cfg);
    std::vector<int> a(8, 0);
    a[0b011] = 1;
    a[0b100] = 2;
    double v1 = cache.value(a);
    std::vector<int> a2 = a;
    for (int& c : a2) c *= 3;
    CHECK(cache.value(a2) == doctest::Approx(3 * v1).epsilon(1e-12));
    size_t keys = cache.distinct_keys();
    std::vector<int> a3 = a;
    a3[0b111] = 5;  // full-set files never shuffle
    CHECK(cache.value(a3) == v1);
    CHECK(cache.distinct_keys() == keys);

    Rational ex = cache.exact_value(a);
    CHECK(std::fabs(to_double(ex) - v1) <= 1e-9 * (1 + std::fabs(v1)));
    CHECK(cache.exact_value(a2) == 3 * ex);
}

TEST_CASE("expected_load op examples") {
    SUBCASE("constant loads") {
        std::map<uint32_t, Rational> loads;
        for (uint32_t d = 1; d < 4; ++d) loads[d] = Rational(7, 3);
        CHECK(expected_load(loads, {0.5, 0.25}) == Rational(7, 3));
    }
    SUBCASE("single file") {
        std::map<uint32_t, Rational> loads{{1u, Rational(5, 2)}};
        CHECK(expected_load(loads, {0.8}) == Rational(5, 2));
    }
    SUBCASE("uniform pair") {
        std::map<uint32_t, Rational> loads{{1u, Rational(1)}, {2u, Rational(2)}, {3u, Rational(3)}};
        CHECK(expected_load(loads, {0.5, 0.5}) == Rational(2));
    }
    SUBCASE("missing demand throws") {
        std::map<uint32_t, Rational> loads{{1u, Rational(1)}, {3u, Rational(3)}};
        CHECK_THROWS(expected_load(loads, {0.5, 0.5}));
    }
}

TEST_CASE("evaluator parallel equals serial bitwise and matches direct path") {
    auto cfg = make_config(4, 6, {3, 4, 4, 5},
                           {Rational(1, 8), Rational(1, 4), Rational(1, 4), Rational(3, 8)},
                           zipf_popularity(6, 0.56));
    std::mt19937 rng(11);
    auto p = random_placement(rng, cfg);

    PlacementEvaluator ev(cfg, Variant::cdc);
    double par = ev.expected(p);
    double ser = ev.expected_serial(p);
    CHECK(par == ser);

    // exact expectation equals the weighted sum of independently solved plans
    auto pd = all_job_probabilities(cfg.popularity_exact());
    Rational direct = 0;
    for (uint32_t d = 1; d < 64; ++d)
        direct += pd[d] * solve_flow_exact(p, cfg, JobDemand{d}, Variant::cdc).load;
    CHECK(ev.expected_exact(p) == direct);
    CHECK(std::fabs(par - to_double(direct)) <= 1e-7 * (1 + std::fabs(par)));

    // spec op agrees with the evaluator
    std::map<uint32_t, Rational> loads;
    auto per = ev.per_demand_exact(p);
    for (uint32_t d = 1; d < 64; ++d) loads[d] = per[d];
    CHECK(expected_load(loads, cfg.popularity) == direct);
}

TEST_CASE("sampled estimator lands near the exact value") {
    auto cfg = make_config(3, 5, {3, 3, 3}, {Rational(1, 3), Rational(1, 3), Rational(1, 3)},
                           zipf_popularity(5, 1.2));
    std::mt19937 rng(5);
    auto p = random_placement(rng, cfg);
    PlacementEvaluator ev(cfg, Variant::cdc);
    double exact = to_double(ev.expected_exact(p));
    double se = 0;
    double est = ev.sampled_expected(p, 4000, 12345, se);
    CHECK(se > 0);
    CHECK(std::fabs(est - exact) <= 5 * se + 1e-9);
}

TEST_CASE("plan serialization lists nonzero variables") {
    auto cfg = uniform_config(3, 3, {2, 2, 2});
    auto p = place({0b011, 0b101, 0b110});
    auto plan = solve_flow_exact(p, cfg, JobDemand{7}, Variant::cdc);
    std::string text = serialize_plan(plan);
    CHECK(text.find("demand 7") != std::string::npos);
    CHECK(text.find("load 1/2") != std::string::npos);
    // every nonzero variable appears
    int nonzero = 0;
    for (const Rational& v : plan.x)
        if (v != 0) ++nonzero;
    int lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    CHECK(lines == nonzero + 2);  // demand line + load line
}

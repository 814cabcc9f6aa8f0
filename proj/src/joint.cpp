#include "cdc/joint.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>   // TRACE
#include <cstdlib>  // TRACE
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <utility>

#include "cdc/lp.hpp"

namespace cdc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline bool has(uint32_t S, int worker) { return (S >> (worker - 1)) & 1; }

// Marginal demand probability q_n = P(n in D) = p_n / (1 - prod_m (1 - p_m)).
std::vector<double> marginal_demand_probability(const SystemConfig& cfg) {
    double none = 1.0;
    for (double p : cfg.popularity) none *= 1.0 - p;
    double denom = 1.0 - none;
    std::vector<double> q(cfg.num_files);
    for (int n = 0; n < cfg.num_files; ++n) q[n] = cfg.popularity[n] / denom;
    return q;
}

std::vector<Rational> marginal_demand_probability_exact(const SystemConfig& cfg) {
    auto pex = cfg.popularity_exact();
    Rational none = 1;
    for (const Rational& p : pex) none *= Rational(1) - p;
    Rational denom = Rational(1) - none;
    std::vector<Rational> q(cfg.num_files);
    for (int n = 0; n < cfg.num_files; ++n) q[n] = pex[n] / denom;
    return q;
}

// Float optimal values of the covering flow program (rows relaxed to >=).
// The covering optimum never exceeds the equality optimum, and it is
// monotone non-decreasing in the demand vector, so the value at the counts
// of the decided files bounds every completion from below. Keys are
// normalized exactly like DemandLoadCache keys.
class CoveringCache {
  public:
    explicit CoveringCache(const SystemConfig& cfg) : cfg_(cfg) {
        for (const Rational& w : cfg_.reducing_loads) wd_.push_back(to_double(w));
    }

    double value(const std::vector<int>& a) {
        std::vector<int> key = a;
        key[key.size() - 1] = 0;
        int g = 0;
        for (int c : key) g = std::gcd(g, c);
        if (g == 0) return 0.0;
        for (int& c : key) c /= g;
        if (cfg_.num_workers == 2) return g * (wd_[1] * key[1] + wd_[0] * key[2]);
        double v;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = map_.find(key);
            if (it == map_.end()) {
                LinearProgram lp = build_flow_lp(key, cfg_, /*covering=*/true);
                LpSolution sol = solve_lp(lp, SimplexOptions{});
                if (sol.status != LpStatus::optimal)
                    throw std::runtime_error("covering flow LP failed to solve");
                it = map_.emplace(std::move(key), sol.objective).first;
            }
            v = it->second;
        }
        return g * v;
    }

  private:
    SystemConfig cfg_;
    std::vector<double> wd_;
    std::map<std::vector<int>, double> map_;
    std::mutex mu_;
};

/**** fractional-placement relaxation ****/

// number of (subset, recipient) pairs of one flow block: sum_{s>=2} C(K,s)*s
long long flow_pair_count(int K) {
    long long pairs = 0, binom = 1;
    for (int k = 1; k <= K; ++k) {
        binom = binom * (K - k + 1) / k;
        if (k >= 2) pairs += binom * k;
    }
    return pairs;
}

long long relaxation_row_estimate(const SystemConfig& cfg) {
    const int K = cfg.num_workers, N = cfg.num_files;
    return ((1LL << N) - 1) * flow_pair_count(K) + N + K;
}

// The monolithic programs are heavily degenerate (every flow row has zero
// right-hand side), which grinds a dense float tableau to a crawl well
// before memory runs out; the reference construction is refused beyond this
// and the cutting-plane path serves larger instances.
constexpr long long kRelaxRowCap = 1000;

// Variable layout of the relaxation: one flow block per demand mask in
// ascending order, then the fractional placement variables t_{n,S}. Counts
// stay well inside int under the row-cap guardrail.
struct RelaxLayout {
    int flow_vars = 0;         // per demand block
    int t_base = 0;            // first t variable
    int subsets_per_file = 0;  // 2^K - 1

    int block(uint32_t demand) const { return (int)(demand - 1) * flow_vars; }
    int t_index(int file, uint32_t S) const {
        return t_base + (file - 1) * subsets_per_file + (int)(S - 1);
    }
};

// Shared variable layout and the t-side rows (per-file choice, capacities).
RelaxLayout start_relaxation(LinearProgram& lp, const SystemConfig& cfg, const FlowLayout& ly,
                             const std::vector<Rational>& pd) {
    const int K = cfg.num_workers, N = cfg.num_files;
    const uint32_t dtop = 1u << N;
    RelaxLayout rl;
    rl.flow_vars = ly.num_vars();
    rl.subsets_per_file = (1 << K) - 1;
    rl.t_base = (int)(dtop - 1) * rl.flow_vars;
    for (int v = 0; v < rl.t_base + N * rl.subsets_per_file; ++v) lp.add_variable();
    for (uint32_t D = 1; D < dtop; ++D)
        for (uint32_t S : ly.subsets)
            for (int j = 1; j <= K; ++j)
                if (has(S, j)) lp.set_objective(rl.block(D) + ly.l_index(S, j), pd[D]);
    for (int n = 1; n <= N; ++n) {
        int con = lp.add_constraint(Relation::eq, 1);
        for (int s = 1; s <= rl.subsets_per_file; ++s) lp.add_term(con, rl.t_index(n, s), 1);
    }
    for (int k = 1; k <= K; ++k) {
        int con = lp.add_constraint(Relation::le, cfg.mapping_loads[k - 1]);
        for (int n = 1; n <= N; ++n)
            for (uint32_t s = 1; s <= (uint32_t)rl.subsets_per_file; ++s)
                if (has(s, k)) lp.add_term(con, rl.t_index(n, s), 1);
    }
    return rl;
}

LinearProgram build_relaxation(const SystemConfig& cfg, const std::vector<Rational>& pd) {
    const int K = cfg.num_workers, N = cfg.num_files;
    const uint32_t dtop = 1u << N;
    FlowLayout ly(K);
    LinearProgram lp;
    RelaxLayout rl = start_relaxation(lp, cfg, ly, pd);
    for (uint32_t D = 1; D < dtop; ++D) {
        const int off = rl.block(D);
        for (uint32_t S : ly.subsets) {
            int sz = std::popcount(S);
            for (int k = 1; k <= K; ++k) {
                if (!has(S, k)) continue;
                uint32_t rest = S ^ (1u << (k - 1));
                int con = lp.add_constraint(Relation::eq, 0);
                for (int j = 1; j <= K; ++j)
                    if (has(S, j) && j != k) lp.add_term(con, off + ly.l_index(S, j), 1);
                if (sz >= 3)
                    for (int i = 1; i <= K; ++i)
                        if (has(S, i) && i != k) lp.add_term(con, off + ly.r_index(S, k, i), 1);
                for (int i = 1; i <= K; ++i)
                    if (!has(S, i))
                        lp.add_term(con, off + ly.r_index(S | (1u << (i - 1)), k, i), -1);
                for (int n = 1; n <= N; ++n)
                    if ((D >> (n - 1)) & 1)
                        lp.add_term(con, rl.t_index(n, rest), -cfg.reducing_loads[k - 1]);
            }
        }
    }
    return lp;
}

// One member of the per-file inequality family of the binary variant:
// W_k * t_{n,S\k} + inflow(k,S) - deliveries(S\k) - outflow(k,S) <= 0.
struct BinaryRow {
    uint32_t demand = 0;
    uint32_t subset = 0;
    int k = 0;
    int file = 0;

    auto tie() const { return std::tie(demand, subset, k, file); }
    bool operator<(const BinaryRow& o) const { return tie() < o.tie(); }
};

LinearProgram build_relaxation_binary(const SystemConfig& cfg, const std::vector<Rational>& pd,
                                      const std::vector<BinaryRow>& rows) {
    const int K = cfg.num_workers;
    FlowLayout ly(K);
    LinearProgram lp;
    RelaxLayout rl = start_relaxation(lp, cfg, ly, pd);
    for (const BinaryRow& row : rows) {
        const int off = rl.block(row.demand);
        uint32_t S = row.subset;
        int sz = std::popcount(S);
        uint32_t rest = S ^ (1u << (row.k - 1));
        int con = lp.add_constraint(Relation::le, 0);
        lp.add_term(con, rl.t_index(row.file, rest), cfg.reducing_loads[row.k - 1]);
        for (int i = 1; i <= K; ++i)
            if (!has(S, i)) lp.add_term(con, off + ly.r_index(S | (1u << (i - 1)), row.k, i), 1);
        for (int j = 1; j <= K; ++j)
            if (has(S, j) && j != row.k) lp.add_term(con, off + ly.l_index(S, j), -1);
        if (sz >= 3)
            for (int i = 1; i <= K; ++i)
                if (has(S, i) && i != row.k) lp.add_term(con, off + ly.r_index(S, row.k, i), -1);
    }
    return lp;
}

Rational exact_relaxation_value(const LinearProgram& lp) {
    LpSolution sol = solve_lp(lp, SimplexOptions{});
    if (sol.status != LpStatus::optimal)
        throw std::runtime_error("placement relaxation: float stage did not reach optimal");
    ExactLpResult ex = exact_lp_solution(lp, sol.basis);
    if (ex.status != LpStatus::optimal)
        throw std::runtime_error("placement relaxation: exact resolution failed");
    return ex.objective;
}

std::vector<BinaryRow> full_binary_rows(const SystemConfig& cfg) {
    const int K = cfg.num_workers, N = cfg.num_files;
    FlowLayout ly(K);
    std::vector<BinaryRow> rows;
    for (uint32_t D = 1; D < (1u << N); ++D)
        for (uint32_t S : ly.subsets)
            for (int k = 1; k <= K; ++k) {
                if (!has(S, k)) continue;
                for (int n = 1; n <= N; ++n)
                    if ((D >> (n - 1)) & 1) rows.push_back({D, S, k, n});
            }
    return rows;
}

/**** cutting-plane computation of the relaxation ****/

// The relaxation splits into a small master over the fractional placement
// (with one load surrogate per demand) and an independent flow subproblem
// per demand once the placement is fixed. Each subproblem's exact dual
// vector y prices its right-hand side, which is linear in t, so
//
//   eta_D >= sum_rows y_row * W_k * (demanded t mass at S-k)
//
// is valid for every fractional placement (the duals' feasibility does not
// depend on the right-hand side they were priced at); for the binary variant
// the dual weight attaches to the per-file row that attains the max at the
// current master point, again a valid member of the full inequality family.
//
// Division of labor: intermediate rounds solve the master in floats, clamp
// the point into the nonnegative orthant, and generate cuts from exact
// subproblem duals, dropping long-idle slack cuts so the master stays small
// and well-behaved. The returned value rests only on exact computations: a
// round that looks converged is re-verified by an exact master solve plus
// exact separation at its optimum, and only a fully violation-free exact
// round returns. Finite termination: drops stop after a fixed round, after
// which every added cut is strictly violated by the current master optimum,
// hence new, and the cut universe (one per demand and subproblem basis) is
// finite.
Rational cutting_plane_relaxation(const SystemConfig& cfg, Variant variant,
                                  const std::vector<Rational>& pd) {
    const int K = cfg.num_workers, N = cfg.num_files;
    const int F = (1 << K) - 1;
    const uint32_t dtop = 1u << N;
    FlowLayout ly(K);

    std::vector<std::pair<uint32_t, int>> row_sk;  // constraint order of build_flow_lp
    for (uint32_t S : ly.subsets)
        for (int k = 1; k <= K; ++k)
            if (has(S, k)) row_sk.emplace_back(S, k);

    auto t_var = [&](int n, uint32_t S) { return (n - 1) * F + (int)S - 1; };
    const int eta0 = N * F;
    const int num_vars = eta0 + (int)dtop - 1;

    struct CutRow {
        std::vector<std::pair<int, Rational>> terms;  // lhs of (terms . x) <= 0
        int born = 0;
        int idle = 0;  // consecutive separation points with positive slack
    };
    std::vector<CutRow> cuts;

    auto build_master = [&]() {
        LinearProgram m;
        for (int v = 0; v < num_vars; ++v) m.add_variable();  // t <= 1 is implied
        for (uint32_t D = 1; D < dtop; ++D) m.set_objective(eta0 + (int)D - 1, pd[D]);
        for (int n = 1; n <= N; ++n) {
            int con = m.add_constraint(Relation::eq, 1);
            for (int s = 1; s <= F; ++s) m.add_term(con, t_var(n, s), 1);
        }
        for (int k = 1; k <= K; ++k) {
            int con = m.add_constraint(Relation::le, cfg.mapping_loads[k - 1]);
            for (int n = 1; n <= N; ++n)
                for (uint32_t s = 1; s <= (uint32_t)F; ++s)
                    if (has(s, k)) m.add_term(con, t_var(n, s), 1);
        }
        for (const CutRow& c : cuts) {
            int con = m.add_constraint(Relation::le, 0);
            for (const auto& [v, coef] : c.terms) m.add_term(con, v, coef);
        }
        return m;
    };
    LinearProgram master = build_master();

    struct Violation {
        Rational gap;
        uint32_t demand = 0;
        std::vector<Rational> duals;
        std::vector<int> arg;
    };
    std::vector<Rational> a(size_t(1) << K);
    std::vector<int> arg(size_t(1) << K);
    // exact flow subproblems at the point x; violations against its
    // surrogates deeper than min_gap (float points need a margin, or cuts the
    // float master satisfies only to its residual would be re-generated
    // forever; the exact verification pass runs with margin zero)
    auto separate = [&](const std::vector<Rational>& x, const Rational& min_gap) {
        std::vector<Violation> viol;
        for (uint32_t D = 1; D < dtop; ++D) {
            // demanded mass per subset: sum of t for the plain variant, max
            // (with the attaining file) for the binary variant
            std::fill(a.begin(), a.end(), Rational(0));
            std::fill(arg.begin(), arg.end(), 0);
            for (uint32_t X = 1; X <= (uint32_t)F; ++X)
                for (int n = 1; n <= N; ++n) {
                    if (!((D >> (n - 1)) & 1)) continue;
                    const Rational& tv = x[t_var(n, X)];
                    if (variant == Variant::cdc) {
                        a[X] += tv;
                    } else if (arg[X] == 0 || tv > a[X]) {
                        a[X] = tv;
                        arg[X] = n;
                    }
                }
            LinearProgram sub = build_flow_lp(a, cfg, variant == Variant::ccdc);
            ExactLpResult sp = solve_lp_exact(sub);
            if (sp.status != LpStatus::optimal)
                throw std::runtime_error("placement relaxation: subproblem stage failed");
            const Rational& surrogate = x[eta0 + (int)D - 1];
            if (sp.objective - surrogate > min_gap)
                viol.push_back({sp.objective - surrogate, D, std::move(sp.duals), arg});
        }
        return viol;
    };

    auto add_cuts = [&](std::vector<Violation>& viol, int round) {
        // deepest violations first, weighted by demand probability so cuts
        // that move the objective beat cuts on rare demands; the per-round
        // cap keeps the master lean
        std::sort(viol.begin(), viol.end(), [&](const Violation& l, const Violation& r) {
            Rational lw = pd[l.demand] * l.gap;
            Rational rw = pd[r.demand] * r.gap;
            if (lw != rw) return lw > rw;
            return l.demand < r.demand;
        });
        const size_t cuts_per_round = 128;
        if (viol.size() > cuts_per_round) viol.resize(cuts_per_round);
        for (const Violation& v : viol) {
            std::map<int, Rational> coef;  // t column -> dual-weighted coefficient
            for (size_t r = 0; r < row_sk.size(); ++r) {
                const Rational& y = v.duals[r];
                if (y == 0) continue;
                auto [S, k] = row_sk[r];
                uint32_t rest = S ^ (1u << (k - 1));
                Rational c = y * cfg.reducing_loads[k - 1];
                if (variant == Variant::cdc) {
                    for (int n = 1; n <= N; ++n)
                        if ((v.demand >> (n - 1)) & 1) coef[t_var(n, rest)] += c;
                } else {
                    coef[t_var(v.arg[rest], rest)] += c;
                }
            }
            CutRow row;
            row.born = round;
            // stated as <= 0 with the surrogate negated, so the row's slack
            // is its basic column and the master gains no artificials
            row.terms.emplace_back(eta0 + (int)v.demand - 1, Rational(-1));
            for (auto& [tcol, c] : coef)
                if (c != 0) row.terms.emplace_back(tcol, std::move(c));
            int con = master.add_constraint(Relation::le, 0);
            for (const auto& [v2, coef2] : row.terms) master.add_term(con, v2, coef2);
            cuts.push_back(std::move(row));
        }
    };

    // Float phase: float master optima steer cut generation down to gaps the
    // float resolution can see. Exact phase: entered once float separation
    // looks clean but exact separation still finds (tiny) violations, or the
    // float stage breaks down; from then on the master is re-optimized by
    // warm exact dual simplex and cuts accumulate until an exact round
    // separates nothing. Only exact rounds can return.
    const int round_cap = 600;
    const size_t drop_threshold = 160;  // keep the float master in its robust size range
    const Rational slack_margin(1, 1000000000);
    const Rational float_gap(1, 100000000);
    const Rational endgame_gap(1, 1000000);
    std::vector<Rational> x(num_vars);
    std::vector<int> warm_keys;
    size_t banked_cuts = 0;  // cuts present when warm_keys was taken
    // dual-feasible keys to resume from when the float stage has produced
    // none: the exact optimum of the cut-free base master (small and tame);
    // its basis stays dual feasible with every cut row's slack appended
    auto base_keys = [&]() {
        std::vector<CutRow> parked;
        std::swap(parked, cuts);
        LinearProgram base = build_master();
        std::swap(parked, cuts);
        ExactLpResult bs = solve_lp_exact(base);
        if (bs.status != LpStatus::optimal)
            throw std::runtime_error("placement relaxation: base master failed");
        return bs.basis_keys;
    };
    bool exact_phase = false;
    // Endgame: once every remaining violation is tiny the float master has
    // essentially converged, so cut dropping stops (row indices freeze) and
    // each float basis is kept as a warm start; if float arithmetic then
    // breaks down, the exact resume starts next to the optimum instead of
    // replaying the whole cut set from the base basis.
    bool endgame = false;
    const bool trace = std::getenv("CDC_CUT_TRACE") != nullptr;  // TRACE
    auto trace_t0 = std::chrono::steady_clock::now();            // TRACE
    auto el = [&] {                                              // TRACE
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - trace_t0)
            .count();  // TRACE
    };                 // TRACE
    for (int round = 0; round < round_cap; ++round) {
        if (exact_phase) {
            ExactLpResult ms = exact_lp_resume(master, warm_keys);
            if (ms.status != LpStatus::optimal)
                throw std::runtime_error("placement relaxation: master stage failed");
            warm_keys = std::move(ms.basis_keys);
            banked_cuts = cuts.size();
            if (trace)  // TRACE
                std::fprintf(stderr, "r%3d EXACT cuts=%4zu piv=%5d obj=%.7f t=%.1fs\n", round,
                             cuts.size(), ms.cleanup_pivots, to_double(ms.objective),
                             el());  // TRACE
            std::vector<Violation> viol = separate(ms.x, Rational(0));
            if (viol.empty()) return ms.objective;
            add_cuts(viol, round);
            continue;
        }

        bool exact_point = false;
        Rational exact_obj;
        LpSolution fs = solve_lp(master, SimplexOptions{});
        if (fs.status == LpStatus::optimal) {
            for (int v = 0; v < num_vars; ++v)
                x[v] = fs.x[v] > 0 ? Rational(fs.x[v]) : Rational(0);
            // a float iteration spike means the master is turning degenerate
            // on it: treat as endgame before a later round breaks down
            if (fs.iterations > 20000) endgame = true;
            // bank this basis; if a later float stage fails, the exact
            // resume starts from here instead of replaying every cut
            std::vector<int> keys = encode_basis_keys(master, fs.basis);
            if (!keys.empty()) {
                warm_keys = std::move(keys);
                banked_cuts = cuts.size();
            }
        } else {
            // degenerate float breakdown: resume exactly from the best
            // dual-feasible basis at hand
            if (trace)  // TRACE
                std::fprintf(stderr, "r%3d float FAIL cuts=%4zu t=%.1fs\n", round, cuts.size(),
                             el());  // TRACE
            if (warm_keys.empty()) {
                warm_keys = base_keys();
                banked_cuts = 0;
            }
            ExactLpResult ms = exact_lp_resume(master, warm_keys);
            if (ms.status != LpStatus::optimal)
                throw std::runtime_error("placement relaxation: master stage failed");
            if (trace)  // TRACE
                std::fprintf(stderr, "     resumed piv=%5d obj=%.7f t=%.1fs\n", ms.cleanup_pivots,
                             to_double(ms.objective), el());  // TRACE
            x = std::move(ms.x);
            exact_obj = std::move(ms.objective);
            warm_keys = std::move(ms.basis_keys);
            banked_cuts = cuts.size();
            exact_point = true;
        }
        if (trace && fs.status == LpStatus::optimal)  // TRACE
            std::fprintf(stderr, "r%3d float cuts=%4zu it=%ld obj=%.7f t=%.1fs\n", round,
                         cuts.size(), (long)fs.iterations, fs.objective, el());  // TRACE

        std::vector<Violation> viol = separate(x, exact_point ? Rational(0) : float_gap);
        if (viol.empty()) {
            if (exact_point) return exact_obj;
            // exact re-verification of the float round; a broken float basis
            // falls back to the from-scratch exact solver
            ExactLpResult ms;
            try {
                ms = exact_lp_solution(master, fs.basis);
            } catch (const std::runtime_error&) {
                ms = exact_lp_resume(master, {});
            }
            if (ms.status != LpStatus::optimal)
                throw std::runtime_error("placement relaxation: master stage failed");
            warm_keys = std::move(ms.basis_keys);
            banked_cuts = cuts.size();
            viol = separate(ms.x, Rational(0));
            if (viol.empty()) return ms.objective;
            exact_point = true;
        }
        if (!endgame) {
            // the probability-weighted violation sum bounds how far the
            // master objective can still move on the current cut set
            Rational wgap(0);
            for (const auto& v : viol) wgap += pd[v.demand] * v.gap;
            endgame = wgap < endgame_gap;
        }
        add_cuts(viol, round);
        if (exact_point) {
            // float resolution is exhausted: finish with warm exact rounds
            exact_phase = true;
            continue;
        }

        if (!endgame && cuts.size() > drop_threshold) {
            for (CutRow& c : cuts) {
                Rational act = 0;
                for (const auto& [v, coef] : c.terms) act += coef * x[v];
                c.idle = act < -slack_margin ? c.idle + 1 : 0;
            }
            // A banked cut may leave only if the banked basis holds its slack
            // basic; then the row and its slack column leave together, which
            // keeps the basis square and exactly as feasible as before (a
            // basic slack has dual zero, so no other reduced cost moves), and
            // the surviving keys just need their row indices remapped.
            const int base_rows = N + K;
            std::vector<char> slack_banked(base_rows + cuts.size(), 0);
            for (int key : warm_keys) {
                if (key < num_vars) continue;
                int rem = key - num_vars;
                if ((rem & 1) == 0 && rem / 2 < (int)slack_banked.size()) slack_banked[rem / 2] = 1;
            }
            std::vector<char> drop(cuts.size(), 0);
            bool any = false;
            for (size_t j = 0; j < cuts.size(); ++j) {
                if (cuts[j].idle < 2 || cuts[j].born > round - 3) continue;
                if (j < banked_cuts && !slack_banked[base_rows + j]) continue;
                drop[j] = 1;
                any = true;
            }
            if (any) {
                std::vector<int> newpos(banked_cuts, -1);
                int pos = 0;
                size_t dropped_banked = 0;
                for (size_t j = 0; j < cuts.size(); ++j) {
                    if (drop[j]) {
                        if (j < banked_cuts) ++dropped_banked;
                        continue;
                    }
                    if (j < banked_cuts) newpos[j] = pos;
                    ++pos;
                }
                std::vector<int> remapped;
                remapped.reserve(warm_keys.size());
                bool ok = true;
                for (int key : warm_keys) {
                    if (key < num_vars) {
                        remapped.push_back(key);
                        continue;
                    }
                    int rem = key - num_vars;
                    int row = rem / 2;
                    if (row < base_rows) {
                        remapped.push_back(key);
                        continue;
                    }
                    size_t j = (size_t)(row - base_rows);
                    if (j >= banked_cuts) {
                        ok = false;
                        break;
                    }
                    if (drop[j]) continue;  // row leaves with its basic slack
                    remapped.push_back(num_vars + 2 * (base_rows + newpos[j]) + (rem & 1));
                }
                size_t w = 0;
                for (size_t j = 0; j < cuts.size(); ++j)
                    if (!drop[j]) {
                        if (w != j) cuts[w] = std::move(cuts[j]);
                        ++w;
                    }
                cuts.resize(w);
                master = build_master();
                if (ok) {
                    warm_keys = std::move(remapped);
                    banked_cuts -= dropped_banked;
                } else {
                    warm_keys.clear();
                    banked_cuts = 0;
                }
            }
        }
    }
    throw std::runtime_error("placement relaxation: cut generation did not converge");
}

/**** combinatorial bounds ****/

// Exact root version of the two capacity-aware counting bounds below; used
// for the reported root bound when the monolithic relaxation is refused.
// The binary variant collapses duplicate subsets, so per-file counting is
// only valid for the plain variant.
Rational exact_root_combinatorial(const SystemConfig& cfg, Variant variant) {
    if (variant == Variant::ccdc) return Rational(0);
    const int K = cfg.num_workers, N = cfg.num_files;
    std::vector<Rational> q = marginal_demand_probability_exact(cfg);  // non-increasing
    std::vector<Rational> w = cfg.reducing_loads;
    std::sort(w.begin(), w.end(), [](const Rational& a, const Rational& b) { return a > b; });

    long long slots = 0;
    for (int m : cfg.mapping_loads) slots += m;

    // every demanded unit must be received by each worker outside its subset;
    // delivering at level |S| serves at most K-1 workers per unit sent
    Rational total = 0, gain = 0;
    for (const Rational& x : q) {
        total += x;
        gain += x * w[0];
    }
    long long extra = slots - N;
    std::vector<Rational> gains;
    for (const Rational& x : q)
        for (int j = 1; j < K; ++j) gains.push_back(x * w[j]);
    std::sort(gains.begin(), gains.end(), [](const Rational& a, const Rational& b) { return a > b; });
    for (long long e = 0; e < extra && e < (long long)gains.size(); ++e) gain += gains[e];
    Rational knap = (total - gain) / (K - 1);
    if (knap < 0) knap = 0;

    // a single worker's receptions alone already lower-bound the load
    Rational best = knap;
    for (int k = 0; k < K; ++k) {
        long long forced = N - cfg.mapping_loads[k];
        if (forced <= 0) continue;
        Rational m_hat = 0;
        for (long long i = N - forced; i < N; ++i) m_hat += q[i];
        Rational v = cfg.reducing_loads[k] * m_hat;
        if (v > best) best = v;
    }
    return best;
}

/**** shared small pieces of the searches ****/

constexpr size_t kCandidateCap = 48;

struct Candidates {
    std::vector<std::pair<double, Placement>> items;  // ascending float value

    void add(double val, Placement pl) {
        for (auto& it : items)
            if (it.second == pl) {
                if (val < it.first) {
                    it.first = val;
                    resort();
                }
                return;
            }
        items.emplace_back(val, std::move(pl));
        resort();
        if (items.size() > kCandidateCap) items.resize(kCandidateCap);
    }

    double best() const {
        return items.empty() ? std::numeric_limits<double>::infinity() : items[0].first;
    }

  private:
    void resort() {
        std::stable_sort(items.begin(), items.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
    }
};

// exact re-rank of the float-screened pool; extras are always included so
// the result can never exceed them
JointSolveReport finish_report(PlacementEvaluator& ev, const Candidates& cands,
                               const std::vector<Placement>& extras) {
    JointSolveReport rep;
    double best_float = cands.best();
    double window = 1e-6 * (1.0 + std::fabs(best_float));
    bool first = true;
    auto consider = [&](const Placement& pl, double fval) {
        Rational exact = ev.expected_exact(pl);
        if (first || exact < rep.best_load) {
            rep.best_load = exact;
            rep.best_placement = pl;
            rep.best_load_float = fval;
            first = false;
        }
    };
    for (const auto& [val, pl] : cands.items)
        if (val <= best_float + window) consider(pl, val);
    for (const Placement& pl : extras) consider(pl, ev.expected(pl));
    if (first) throw std::runtime_error("joint search produced no candidate placement");
    return rep;
}

}  // namespace

Rational relaxation_lower_bound(const SystemConfig& config, Variant variant) {
    config.validate();
    if (config.num_files > 8 || config.num_workers > 5)
        throw std::invalid_argument("relaxation_lower_bound: guardrail is N <= 8, K <= 5");
    auto pd = all_job_probabilities(config.popularity_exact());
    return cutting_plane_relaxation(config, variant, pd);
}

Rational relaxation_lower_bound_reference(const SystemConfig& config, Variant variant) {
    config.validate();
    const int K = config.num_workers, N = config.num_files;
    long long rows = variant == Variant::cdc
                         ? relaxation_row_estimate(config)
                         : flow_pair_count(K) * N * (1LL << (N - 1)) + N + K;
    if (rows > kRelaxRowCap)
        throw std::invalid_argument(
            "relaxation_lower_bound_reference: monolithic program too large (" +
            std::to_string(rows) + " rows > " + std::to_string(kRelaxRowCap) + ")");
    auto pd = all_job_probabilities(config.popularity_exact());
    if (variant == Variant::cdc) return exact_relaxation_value(build_relaxation(config, pd));
    return exact_relaxation_value(build_relaxation_binary(config, pd, full_binary_rows(config)));
}

TwoFileGroupResult two_file_group_search(const SystemConfig& config, Variant variant,
                                         std::shared_ptr<DemandLoadCache> shared_cache) {
    config.validate();
    if (!shared_cache) shared_cache = std::make_shared<DemandLoadCache>(config);
    PlacementEvaluator ev(config, variant, shared_cache);
    ev.demand_probabilities();  // materialize tables before the parallel loop
    const int N = config.num_files;

    std::vector<char> ok(N + 1, 0);
    std::vector<Placement> placements(N + 1);
    for (int n1 = 1; n1 <= N; ++n1) {
        try {
            placements[n1] = two_file_group_placement(config, n1);
            ok[n1] = 1;
        } catch (const InfeasibleSplit&) {
        }
    }
    std::vector<double> vals(N + 1, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int n1 = 1; n1 <= N; ++n1)
        if (ok[n1]) vals[n1] = ev.expected(placements[n1]);

    double vmin = std::numeric_limits<double>::infinity();
    for (int n1 = 1; n1 <= N; ++n1)
        if (ok[n1]) vmin = std::min(vmin, vals[n1]);
    if (!std::isfinite(vmin)) throw std::runtime_error("no feasible two-group split");

    // floats only screen; near-ties are settled exactly, smallest N1 first
    double tie_eps = 1e-9 * (1.0 + std::fabs(vmin));
    TwoFileGroupResult res;
    bool first = true;
    for (int n1 = 1; n1 <= N; ++n1) {
        if (!ok[n1] || vals[n1] > vmin + tie_eps) continue;
        Rational exact = ev.expected_exact(placements[n1]);
        if (first || exact < res.load) {
            res.load = exact;
            res.n1 = n1;
            res.placement = placements[n1];
            res.load_float = vals[n1];
            first = false;
        }
    }
    for (int n1 = 1; n1 <= N; ++n1)
        if (ok[n1]) res.split_loads.emplace_back(n1, vals[n1]);
    return res;
}

JointSolveReport solve_joint(const SystemConfig& config, Variant variant,
                             const SolveBudget& budget,
                             std::shared_ptr<DemandLoadCache> shared_cache,
                             const Rational* root_bound_hint) {
    config.validate();
    if (config.num_files > 10 || config.num_workers > 5)
        throw std::invalid_argument("solve_joint: search guardrail is N <= 10, K <= 5");
    const auto t0 = Clock::now();
    const int K = config.num_workers, N = config.num_files;
    const uint32_t full = (1u << K) - 1, dtop = 1u << N;

    if (!shared_cache) shared_cache = std::make_shared<DemandLoadCache>(config);
    PlacementEvaluator ev(config, variant, shared_cache);
    const std::vector<double>& pd = ev.demand_probabilities();

    // seeds: the heuristic search and the popularity-blind baseline
    Candidates cands;
    TwoFileGroupResult tfg = two_file_group_search(config, variant, shared_cache);
    cands.add(tfg.load_float, tfg.placement);
    Placement rr = round_robin_placement(config);
    cands.add(ev.expected(rr), rr);

    // root bound for the report (the search itself prunes with node bounds)
    Rational root_bound;
    bool root_relaxation = false;
    if (root_bound_hint) {
        root_bound = *root_bound_hint;
        root_relaxation = true;
    } else if (config.num_files <= 8 && config.num_workers <= 5) {
        root_bound = relaxation_lower_bound(config, variant);
        root_relaxation = true;
    } else {
        root_bound = exact_root_combinatorial(config, variant);
    }

    // branching order: files by decreasing popularity, subsets by decreasing
    // size; within a run of exactly equal popularity the masks must be
    // non-increasing (any optimum can be permuted into that canonical form)
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return config.popularity[a] > config.popularity[b]; });
    std::vector<char> tied(N, 0);
    for (int i = 1; i < N; ++i)
        tied[i] = config.popularity[order[i]] == config.popularity[order[i - 1]];

    std::vector<uint32_t> subset_order;
    for (uint32_t m = 1; m <= full; ++m) subset_order.push_back(m);
    std::stable_sort(subset_order.begin(), subset_order.end(), [](uint32_t a, uint32_t b) {
        int sa = std::popcount(a), sb = std::popcount(b);
        if (sa != sb) return sa > sb;
        return a < b;
    });

    std::vector<double> q = marginal_demand_probability(config);
    std::vector<double> q_by_pos(N), q_suffix(N + 1, 0.0);
    for (int i = 0; i < N; ++i) q_by_pos[i] = q[order[i]];
    for (int i = N; i-- > 0;) q_suffix[i] = q_suffix[i + 1] + q_by_pos[i];
    std::vector<double> wd(K);
    for (int k = 0; k < K; ++k) wd[k] = to_double(config.reducing_loads[k]);
    std::vector<double> wmask(1u << K, 0.0);
    for (uint32_t m = 1; m <= full; ++m)
        for (int k = 0; k < K; ++k)
            if ((m >> k) & 1) wmask[m] += wd[k];

    CoveringCache covering(config);
    std::vector<int> a_dec(size_t(1) << K);

    auto node_bound = [&](const std::vector<uint8_t>& masks,
                          const std::vector<int>& resid) -> double {
        const int d = (int)masks.size();
        double lp_part = 0.0;
        for (uint32_t D = 1; D < dtop; ++D) {
            std::fill(a_dec.begin(), a_dec.end(), 0);
            int present = 0;
            for (int i = 0; i < d; ++i)
                if ((D >> order[i]) & 1) {
                    ++a_dec[masks[i]];
                    ++present;
                }
            if (!present) continue;
            if (variant == Variant::ccdc)
                for (int& c : a_dec) c = c > 0 ? 1 : 0;
            lp_part += pd[D] * covering.value(a_dec);
        }
        if (variant == Variant::ccdc) return lp_part;  // per-file counting collapses

        double comb = 0.0;
        const int undecided = N - d;
        // counting bound 1: every unit sent at level |S| serves <= K-1 workers
        double gain = 0.0;
        for (int i = 0; i < d; ++i) gain += q_by_pos[i] * wmask[masks[i]];
        if (undecided > 0) {
            std::vector<double> avail;
            int slots = 0;
            for (int k = 0; k < K; ++k)
                if (resid[k] >= 1) {
                    avail.push_back(wd[k]);
                    slots += resid[k];
                }
            if (avail.empty()) return std::numeric_limits<double>::infinity();
            std::sort(avail.begin(), avail.end(), std::greater<>());
            gain += q_suffix[d] * avail[0];
            int extra = slots - undecided;
            if (extra > 0 && avail.size() > 1) {
                std::vector<double> gains;
                for (int i = d; i < N; ++i)
                    for (size_t j = 1; j < avail.size(); ++j)
                        gains.push_back(q_by_pos[i] * avail[j]);
                std::sort(gains.begin(), gains.end(), std::greater<>());
                for (int e = 0; e < extra && e < (int)gains.size(); ++e) gain += gains[e];
            }
        }
        comb = std::max(comb, (q_suffix[0] - gain) / (K - 1));
        // counting bound 2: any single worker's receptions
        for (int k = 0; k < K; ++k) {
            double m_hat = 0.0;
            for (int i = 0; i < d; ++i)
                if (!((masks[i] >> k) & 1)) m_hat += q_by_pos[i];
            int forced = undecided - std::max(resid[k], 0);
            if (forced > 0) m_hat += q_suffix[N - forced];
            comb = std::max(comb, wd[k] * m_hat);
        }
        return std::max(lp_part, comb);
    };

    auto leaf_placement = [&](const std::vector<uint8_t>& masks) {
        Placement pl;
        pl.assignment.resize(N);
        for (int i = 0; i < N; ++i) pl.assignment[order[i]] = WorkerSubset{masks[i]};
        return pl;
    };

    struct BnbNode {
        double bound = 0;
        int depth = 0;
        long seq = 0;
        std::vector<uint8_t> masks;
    };
    struct WorseNode {
        bool operator()(const BnbNode& a, const BnbNode& b) const {
            if (a.bound != b.bound) return a.bound > b.bound;  // smallest bound first
            if (a.depth != b.depth) return a.depth < b.depth;  // deeper first
            return a.seq > b.seq;                              // older first
        }
    };
    std::priority_queue<BnbNode, std::vector<BnbNode>, WorseNode> frontier;

    long seq = 0, nodes = 0;
    bool truncated = false;
    {
        BnbNode root;
        root.bound = node_bound(root.masks, config.mapping_loads);
        root.seq = seq++;
        frontier.push(std::move(root));
    }

    std::vector<int> resid(K);
    while (!frontier.empty()) {
        if ((budget.max_nodes > 0 && nodes >= budget.max_nodes) ||
            (budget.max_seconds > 0 && seconds_since(t0) >= budget.max_seconds)) {
            truncated = true;
            break;
        }
        BnbNode node = frontier.top();
        frontier.pop();
        double inc = cands.best();
        if (node.bound >= inc - 1e-9 * (1.0 + std::fabs(inc))) break;  // best-bound order
        ++nodes;

        const int pos = node.depth;
        resid = config.mapping_loads;
        for (int i = 0; i < pos; ++i)
            for (int k = 0; k < K; ++k)
                if ((node.masks[i] >> k) & 1) --resid[k];
        const int remaining_after = N - pos - 1;

        for (uint32_t S : subset_order) {
            if (pos > 0 && tied[pos] && S > node.masks[pos - 1]) continue;
            bool fits = true;
            int slots = 0;
            std::vector<int> child_resid = resid;
            for (int k = 0; k < K; ++k) {
                child_resid[k] -= (int)((S >> k) & 1);
                if (child_resid[k] < 0) {
                    fits = false;
                    break;
                }
                slots += child_resid[k];
            }
            if (!fits || slots < remaining_after) continue;

            BnbNode child;
            child.masks = node.masks;
            child.masks.push_back((uint8_t)S);
            child.depth = pos + 1;
            child.seq = seq++;
            if (child.depth == N) {
                Placement pl = leaf_placement(child.masks);
                double val = ev.expected(pl);
                cands.add(val, std::move(pl));
            } else {
                child.bound = node_bound(child.masks, child_resid);
                double cur = cands.best();
                if (child.bound < cur - 1e-9 * (1.0 + std::fabs(cur)))
                    frontier.push(std::move(child));
            }
        }
    }

    JointSolveReport rep = finish_report(ev, cands, {tfg.placement, rr});
    rep.root_bound = root_bound;
    rep.root_bound_relaxation = root_relaxation;
    rep.nodes = nodes;
    rep.proved_optimal = !truncated;
    rep.seconds = seconds_since(t0);
    return rep;
}

JointSolveReport exhaustive_optimum(const SystemConfig& config, Variant variant,
                                    std::shared_ptr<DemandLoadCache> shared_cache) {
    config.validate();
    const int K = config.num_workers, N = config.num_files;
    const uint32_t top = (1u << K) - 1;
    if (std::pow((double)top, (double)N) > 5e6)
        throw std::invalid_argument("exhaustive_optimum: placement family too large");
    const auto t0 = Clock::now();
    if (!shared_cache) shared_cache = std::make_shared<DemandLoadCache>(config);
    PlacementEvaluator ev(config, variant, shared_cache);
    ev.demand_probabilities();

    Candidates cands;
    long feasible = 0;
    std::vector<uint32_t> masks(N, 1);
    while (true) {
        std::vector<int> used(K, 0);
        bool ok = true;
        for (uint32_t m : masks)
            for (int k = 0; k < K; ++k)
                if ((m >> k) & 1) ++used[k];
        for (int k = 0; k < K; ++k)
            if (used[k] > config.mapping_loads[k]) ok = false;
        if (ok) {
            ++feasible;
            Placement pl;
            for (uint32_t m : masks) pl.assignment.push_back(WorkerSubset{m});
            double val = ev.expected(pl);
            cands.add(val, std::move(pl));
        }
        int i = 0;
        for (; i < N; ++i) {
            if (masks[i] < top) {
                ++masks[i];
                break;
            }
            masks[i] = 1;
        }
        if (i == N) break;
    }
    JointSolveReport rep = finish_report(ev, cands, {});
    rep.root_bound = rep.best_load;
    rep.root_bound_relaxation = false;
    rep.nodes = feasible;
    rep.proved_optimal = true;
    rep.seconds = seconds_since(t0);
    return rep;
}

std::string serialize_report(const JointSolveReport& rep, Variant variant) {
    std::ostringstream out;
    out << "variant " << variant_name(variant) << "\n";
    out << "status " << (rep.proved_optimal ? "optimal" : "budget") << "\n";
    out << "nodes " << rep.nodes << "\n";
    out << "seconds " << std::setprecision(6) << rep.seconds << "\n";
    out << "load " << rational_str(rep.best_load) << "\n";
    out << "load_float " << std::setprecision(17) << rep.best_load_float << "\n";
    out << "root_bound " << rational_str(rep.root_bound) << "\n";
    out << "root_bound_kind " << (rep.root_bound_relaxation ? "relaxation" : "combinatorial")
        << "\n";
    out << "placement\n" << serialize_placement(rep.best_placement);
    return out.str();
}

}  // namespace cdc

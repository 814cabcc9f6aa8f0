#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "cdc/lp.hpp"
#include "lp_internal.hpp"

// Exact-rational resolution layer. The float simplex proposes a basis; here
// the basis is refactorized in exact arithmetic, primal values and reduced
// costs are checked exactly, and Bland-rule cleanup pivots repair the rare
// basis that is only float-optimal. Small programs fall back to a dense
// rational two-phase simplex, which is exact from scratch.

namespace cdc {

namespace {

using detail::StdForm;

/**** sparse rational LU of a basis matrix ****/

// Row/column permuted triangular factors recorded as elimination steps, so
// both B x = b and B^T y = c are solved by replay/substitution.
struct SparseLU {
    bool ok = false;
    int m = 0;
    std::vector<int> piv_row, piv_col;  // step -> row index / basis position
    std::vector<Rational> piv_val;
    // mults[k]: rows (as steps) that had f * (pivot row k) subtracted
    std::vector<std::vector<std::pair<int, Rational>>> mults;
    std::vector<std::vector<std::pair<int, Rational>>> urows;  // step -> (later step, coef)
    std::vector<std::vector<std::pair<int, Rational>>> ucols;  // step -> (earlier step, coef)
};

SparseLU factorize_basis(const StdForm& sf, const std::vector<int>& basis) {
    const int m = sf.m;
    SparseLU lu;
    lu.m = m;

    std::vector<std::map<int, Rational>> rows(m);  // row -> (basis position -> coef)
    std::vector<std::set<int>> col_rows(m);
    for (int pos = 0; pos < m; ++pos)
        for (const auto& [r, v] : sf.cols[basis[pos]]) {
            rows[r][pos] = v;
            col_rows[pos].insert(r);
        }

    std::vector<char> row_active(m, 1);
    std::vector<int> row_to_step(m, -1), col_to_step(m, -1);
    std::vector<std::vector<std::pair<int, Rational>>> mult_rows(m);  // (orig row, f)
    std::vector<std::vector<std::pair<int, Rational>>> usnap(m);      // (orig position, coef)
    lu.piv_row.resize(m);
    lu.piv_col.resize(m);
    lu.piv_val.resize(m);

    for (int k = 0; k < m; ++k) {
        // Markowitz-lite: sparsest active row, then its column with the
        // fewest active rows; deterministic tie-breaks on index
        int pr = -1;
        size_t best_nnz = SIZE_MAX;
        for (int r = 0; r < m; ++r)
            if (row_active[r] && rows[r].size() < best_nnz) {
                best_nnz = rows[r].size();
                pr = r;
            }
        if (pr < 0 || rows[pr].empty()) return lu;  // singular
        int pc = -1;
        size_t best_c = SIZE_MAX;
        for (const auto& [l, v] : rows[pr])
            if (col_rows[l].size() < best_c) {
                best_c = col_rows[l].size();
                pc = l;
            }
        const Rational p = rows[pr][pc];
        lu.piv_row[k] = pr;
        lu.piv_col[k] = pc;
        lu.piv_val[k] = p;
        row_to_step[pr] = k;
        col_to_step[pc] = k;
        row_active[pr] = 0;

        for (const auto& [l, v] : rows[pr])
            if (l != pc) usnap[k].emplace_back(l, v);

        std::vector<int> targets(col_rows[pc].begin(), col_rows[pc].end());
        for (int r : targets) {
            if (!row_active[r]) continue;
            Rational f = rows[r][pc] / p;
            for (const auto& [l, v] : rows[pr]) {
                if (l == pc) continue;
                auto it = rows[r].find(l);
                if (it == rows[r].end()) {
                    rows[r].emplace(l, -f * v);
                    col_rows[l].insert(r);
                } else {
                    it->second -= f * v;
                    if (it->second == 0) {
                        rows[r].erase(it);
                        col_rows[l].erase(r);
                    }
                }
            }
            rows[r].erase(pc);
            mult_rows[k].emplace_back(r, std::move(f));
        }
        col_rows[pc].clear();
        rows[pr].clear();
    }

    lu.mults.resize(m);
    lu.urows.resize(m);
    lu.ucols.resize(m);
    for (int k = 0; k < m; ++k) {
        for (auto& [r, f] : mult_rows[k]) lu.mults[k].emplace_back(row_to_step[r], std::move(f));
        for (auto& [l, v] : usnap[k]) {
            int ls = col_to_step[l];
            lu.urows[k].emplace_back(ls, v);
            lu.ucols[ls].emplace_back(k, std::move(v));
        }
    }
    lu.ok = true;
    return lu;
}

// B x = b; b indexed by row, result indexed by basis position
std::vector<Rational> solve_primal(const SparseLU& lu, const std::vector<Rational>& b) {
    const int m = lu.m;
    std::vector<Rational> w(m);
    for (int k = 0; k < m; ++k) w[k] = b[lu.piv_row[k]];
    for (int k = 0; k < m; ++k) {
        if (w[k] == 0) continue;
        for (const auto& [t, f] : lu.mults[k]) w[t] -= f * w[k];
    }
    for (int k = m - 1; k >= 0; --k) {
        Rational acc = std::move(w[k]);
        for (const auto& [l, v] : lu.urows[k])
            if (w[l] != 0) acc -= v * w[l];
        w[k] = acc / lu.piv_val[k];
    }
    std::vector<Rational> x(m);
    for (int k = 0; k < m; ++k) x[lu.piv_col[k]] = std::move(w[k]);
    return x;
}

// B^T y = c; c indexed by basis position, result indexed by row
std::vector<Rational> solve_dual(const SparseLU& lu, const std::vector<Rational>& c) {
    const int m = lu.m;
    std::vector<Rational> z(m);
    for (int k = 0; k < m; ++k) {
        Rational acc = c[lu.piv_col[k]];
        for (const auto& [l, v] : lu.ucols[k])
            if (z[l] != 0) acc -= v * z[l];
        z[k] = acc / lu.piv_val[k];
    }
    for (int k = m - 1; k >= 0; --k) {
        if (lu.mults[k].empty()) continue;
        Rational acc = std::move(z[k]);
        for (const auto& [t, f] : lu.mults[k])
            if (z[t] != 0) acc -= f * z[t];
        z[k] = std::move(acc);
    }
    std::vector<Rational> y(m);
    for (int k = 0; k < m; ++k) y[lu.piv_row[k]] = std::move(z[k]);
    return y;
}

Rational dot_column(const StdForm& sf, int col, const std::vector<Rational>& y) {
    Rational acc = 0;
    for (const auto& [r, v] : sf.cols[col])
        if (y[r] != 0) acc += v * y[r];
    return acc;
}

// y_rows: exact duals of the internal (sign-normalized) rows; mapped back to
// the original constraints through the row bookkeeping. Bound rows map to no
// original constraint and are dropped.
ExactLpResult assemble_result(const LinearProgram& program, const StdForm& sf,
                              const std::vector<int>& basis, const std::vector<Rational>& xb,
                              const std::vector<Rational>& y_rows, int pivots) {
    ExactLpResult out;
    out.status = LpStatus::optimal;
    out.cleanup_pivots = pivots;
    std::vector<Rational> xstd(sf.n_total, Rational(0));
    for (int i = 0; i < sf.m; ++i) xstd[basis[i]] = xb[i];
    out.x.resize(program.num_vars());
    for (int v = 0; v < program.num_vars(); ++v) out.x[v] = xstd[v] + sf.var_lower[v];
    out.objective = 0;
    for (int v = 0; v < program.num_vars(); ++v)
        if (program.objective[v] != 0) out.objective += program.objective[v] * out.x[v];
    out.duals.assign(program.cons.size(), Rational(0));
    for (int i = 0; i < sf.m; ++i)
        if (sf.orig_row[i] >= 0) out.duals[sf.orig_row[i]] = y_rows[i] * sf.orig_sign[i];
    out.basis_keys.reserve(sf.m);
    for (int c : basis) {
        if (c < sf.n_struct) {
            out.basis_keys.push_back(c);
        } else {
            int row = sf.cols[c][0].first;
            out.basis_keys.push_back(sf.n_struct + 2 * row + (sf.artificial[c] ? 1 : 0));
        }
    }
    return out;
}

/**** dense rational two-phase simplex (small programs, exact from scratch) ****/

class DenseExact {
  public:
    explicit DenseExact(const StdForm& sf) : sf_(sf) {
        m_ = sf.m;
        ncols_ = sf.n_total + 1;
        rhs_ = sf.n_total;
        data_.assign((size_t)(m_ + 2) * ncols_, Rational(0));
        basis_.resize(m_);
        for (int j = 0; j < sf.n_total; ++j)
            for (const auto& [i, v] : sf.cols[j]) at(i, j) = v;
        for (int i = 0; i < m_; ++i) at(i, rhs_) = sf.rhs[i];
        for (int j = 0; j < sf.n_total; ++j) at(m_, j) = sf.cost[j];
        bool any_art = false;
        for (int i = 0; i < m_; ++i) {
            basis_[i] = sf.row_basis_col[i];
            if (sf.artificial[basis_[i]]) any_art = true;
        }
        if (any_art)
            for (int i = 0; i < m_; ++i) {
                if (!sf.artificial[basis_[i]]) continue;
                for (int j = 0; j < ncols_; ++j) at(m_ + 1, j) -= at(i, j);
            }
        need_p1_ = any_art;
    }

    LpStatus run() {
        if (need_p1_) {
            LpStatus st = bland_loop(m_ + 1);
            if (st != LpStatus::optimal) return LpStatus::infeasible;
            if (at(m_ + 1, rhs_) != 0) return LpStatus::infeasible;
            for (int i = 0; i < m_; ++i) {
                if (!sf_.artificial[basis_[i]]) continue;
                for (int j = 0; j < sf_.n_total; ++j)
                    if (!sf_.artificial[j] && at(i, j) != 0) {
                        pivot(i, j);
                        break;
                    }
            }
        }
        return bland_loop(m_);
    }

    const std::vector<int>& basis() const { return basis_; }
    Rational rhs_value(int row) const { return data_[(size_t)row * ncols_ + rhs_]; }
    int pivots() const { return pivots_; }

    // internal-row dual: the certificate column is an identity (+1) column of
    // its row with zero cost, so its final reduced cost is exactly -y_row
    Rational row_dual(int row) const { return -at(m_, sf_.row_cert_col[row]); }

  private:
    Rational& at(int i, int j) { return data_[(size_t)i * ncols_ + j]; }
    const Rational& at(int i, int j) const { return data_[(size_t)i * ncols_ + j]; }

    LpStatus bland_loop(int cost_row) {
        while (true) {
            if (pivots_ > 200000) throw std::runtime_error("exact lp: pivot bound exceeded");
            int enter = -1;
            for (int j = 0; j < sf_.n_total; ++j)
                if (!sf_.artificial[j] && at(cost_row, j) < 0) {
                    enter = j;
                    break;
                }
            if (enter < 0) return LpStatus::optimal;
            int leave = -1;
            Rational best;
            for (int i = 0; i < m_; ++i) {
                const Rational& a = at(i, enter);
                if (a <= 0) continue;
                Rational ratio = at(i, rhs_) / a;
                if (leave < 0 || ratio < best ||
                    (ratio == best && basis_[i] < basis_[leave])) {
                    leave = i;
                    best = std::move(ratio);
                }
            }
            if (leave < 0) return LpStatus::unbounded;
            pivot(leave, enter);
        }
    }

    void pivot(int prow, int pcol) {
        ++pivots_;
        Rational inv = Rational(1) / at(prow, pcol);
        for (int j = 0; j < ncols_; ++j)
            if (at(prow, j) != 0) at(prow, j) *= inv;
        at(prow, pcol) = 1;
        int total = m_ + (need_p1_ ? 2 : 1);
        for (int i = 0; i < total; ++i) {
            if (i == prow) continue;
            const Rational f = at(i, pcol);
            if (f == 0) continue;
            for (int j = 0; j < ncols_; ++j)
                if (at(prow, j) != 0) at(i, j) -= f * at(prow, j);
            at(i, pcol) = 0;
        }
        basis_[prow] = pcol;
    }

    const StdForm& sf_;
    std::vector<Rational> data_;
    std::vector<int> basis_;
    int m_, ncols_, rhs_;
    bool need_p1_ = false;
    int pivots_ = 0;
};

ExactLpResult dense_exact(const LinearProgram& program, const StdForm& sf) {
    DenseExact tab(sf);
    LpStatus st = tab.run();
    if (st != LpStatus::optimal) {
        ExactLpResult out;
        out.status = st;
        out.cleanup_pivots = tab.pivots();
        return out;
    }
    std::vector<Rational> xb(sf.m), y(sf.m);
    for (int i = 0; i < sf.m; ++i) {
        xb[i] = tab.rhs_value(i);
        y[i] = tab.row_dual(i);
    }
    return assemble_result(program, sf, tab.basis(), xb, y, tab.pivots());
}

bool dense_affordable(const StdForm& sf) {
    return (size_t)(sf.m + 2) * (sf.n_total + 1) <= 2000000;
}

}  // namespace

namespace {

ExactLpResult exact_from_basis(const LinearProgram& program, const StdForm& sf,
                               std::vector<int> basis, int pivot_cap) {
    const int m = sf.m;
    int pivots = 0;
    // Working objective: an arbitrary warm basis can be neither primal nor
    // dual feasible; clamping its negative reduced costs to zero makes it
    // dual feasible for the clamped objective, dual steps then restore
    // primal feasibility, and the true costs return for the final primal
    // cleanup. At most one clamp/restore episode can occur.
    std::vector<Rational> cost = sf.cost;
    bool clamped = false;
    while (true) {
        SparseLU lu = factorize_basis(sf, basis);
        if (!lu.ok) {
            if (dense_affordable(sf)) return dense_exact(program, sf);
            throw std::runtime_error("exact lp: singular basis");
        }
        std::vector<Rational> xb = solve_primal(lu, sf.rhs);

        std::vector<char> is_basic(sf.n_total, 0);
        for (int c : basis) is_basic[c] = 1;

        // a basic artificial must sit at exactly zero; otherwise swap it for
        // any real column with a nonzero entry in its tableau row, or report
        // the row as genuinely inconsistent
        bool restarted = false;
        for (int i = 0; i < m && !restarted; ++i) {
            if (!sf.artificial[basis[i]] || xb[i] == 0) continue;
            std::vector<Rational> e(m, Rational(0));
            e[i] = 1;
            std::vector<Rational> z = solve_dual(lu, e);
            int enter = -1;
            for (int j = 0; j < sf.n_total && enter < 0; ++j)
                if (!sf.artificial[j] && !is_basic[j] && dot_column(sf, j, z) != 0) enter = j;
            if (enter < 0) {
                ExactLpResult out;
                out.status = LpStatus::infeasible;
                out.cleanup_pivots = pivots;
                return out;
            }
            basis[i] = enter;
            ++pivots;
            restarted = true;
        }
        if (restarted) continue;

        bool primal_ok = true;
        for (int i = 0; i < m; ++i)
            if (xb[i] < 0) {
                primal_ok = false;
                break;
            }

        std::vector<Rational> cb(m);
        for (int i = 0; i < m; ++i) cb[i] = cost[basis[i]];
        std::vector<Rational> y = solve_dual(lu, cb);

        int enter = -1;  // Bland: smallest real nonbasic column with rc < 0
        for (int j = 0; j < sf.n_total && enter < 0; ++j) {
            if (is_basic[j] || sf.artificial[j]) continue;
            if (cost[j] - dot_column(sf, j, y) < 0) enter = j;
        }
        bool dual_ok = enter < 0;

        if (primal_ok && clamped) {
            // primal feasibility reached under the clamped objective:
            // restore the true costs and let primal steps finish
            cost = sf.cost;
            clamped = false;
            continue;
        }
        if (primal_ok && dual_ok) return assemble_result(program, sf, basis, xb, y, pivots);
        if (++pivots > pivot_cap) {
            if (dense_affordable(sf)) return dense_exact(program, sf);
            throw std::runtime_error("exact lp: cleanup did not converge");
        }

        if (primal_ok) {
            // primal Bland step
            std::vector<Rational> bj(m, Rational(0));
            for (const auto& [r, v] : sf.cols[enter]) bj[r] = v;
            std::vector<Rational> d = solve_primal(lu, bj);
            int leave = -1;
            Rational best;
            for (int i = 0; i < m; ++i) {
                if (d[i] <= 0) continue;
                Rational ratio = xb[i] / d[i];
                if (leave < 0 || ratio < best || (ratio == best && basis[i] < basis[leave])) {
                    leave = i;
                    best = std::move(ratio);
                }
            }
            if (leave < 0) {
                ExactLpResult out;
                out.status = LpStatus::unbounded;
                out.cleanup_pivots = pivots;
                return out;
            }
            basis[leave] = enter;
        } else if (dual_ok) {
            // dual step: most-negative row first for speed, pure Bland (most
            // senior basis column) once the pivot budget is half spent, which
            // restores the anti-cycling guarantee; ratio test over negative
            // row entries
            bool bland = pivots > pivot_cap / 2;
            int leave = -1;
            for (int i = 0; i < m; ++i) {
                if (xb[i] >= 0) continue;
                if (leave < 0 || (bland ? basis[i] < basis[leave] : xb[i] < xb[leave]) ||
                    (!bland && xb[i] == xb[leave] && basis[i] < basis[leave]))
                    leave = i;
            }
            std::vector<Rational> e(m, Rational(0));
            e[leave] = 1;
            std::vector<Rational> z = solve_dual(lu, e);
            int pick = -1;
            Rational best;
            for (int j = 0; j < sf.n_total; ++j) {
                if (is_basic[j] || sf.artificial[j]) continue;
                Rational alpha = dot_column(sf, j, z);
                if (alpha >= 0) continue;
                Rational rc = cost[j] - dot_column(sf, j, y);
                Rational ratio = rc / -alpha;
                if (pick < 0 || ratio < best || (ratio == best && j < pick)) {
                    pick = j;
                    best = std::move(ratio);
                }
            }
            if (pick < 0) {
                ExactLpResult out;
                out.status = LpStatus::infeasible;
                out.cleanup_pivots = pivots;
                return out;
            }
            basis[leave] = pick;
        } else {
            if (clamped) {
                // dual steps cannot lose dual feasibility; reaching this
                // twice means something is deeply wrong, so start over
                if (dense_affordable(sf)) return dense_exact(program, sf);
                throw std::runtime_error("exact lp: basis neither primal nor dual feasible");
            }
            for (int j = 0; j < sf.n_total; ++j) {
                if (is_basic[j] || sf.artificial[j]) continue;
                Rational d = dot_column(sf, j, y);
                if (cost[j] - d < 0) cost[j] = std::move(d);
            }
            clamped = true;
        }
    }
}

}  // namespace

ExactLpResult exact_lp_solution(const LinearProgram& program, const std::vector<int>& basis_hint) {
    StdForm sf = detail::build_standard_form(program);
    const int m = sf.m;

    std::vector<int> basis = basis_hint;
    if ((int)basis.size() != m) {
        if (basis.empty()) {
            LpSolution sol = solve_lp(program);
            if (sol.status == LpStatus::infeasible || sol.status == LpStatus::unbounded) {
                ExactLpResult out;
                out.status = sol.status;
                return out;
            }
            basis = sol.basis;
        }
        if ((int)basis.size() != m) {
            if (!dense_affordable(sf)) throw std::runtime_error("exact lp: no usable basis hint");
            return dense_exact(program, sf);
        }
    }
    for (int c : basis)
        if (c < 0 || c >= sf.n_total) {
            if (!dense_affordable(sf)) throw std::runtime_error("exact lp: bad basis hint");
            return dense_exact(program, sf);
        }
    return exact_from_basis(program, sf, std::move(basis), 400);
}

ExactLpResult exact_lp_resume(const LinearProgram& program, const std::vector<int>& basis_keys) {
    for (const auto& var : program.vars)
        if (var.upper) return solve_lp_exact(program);  // bound rows break row stability

    StdForm sf = detail::build_standard_form(program);
    if (basis_keys.empty()) {
        // no starting basis: exact from scratch, bypassing the float stage
        if (!dense_affordable(sf))
            throw std::runtime_error("exact lp: program too large for dense fallback");
        return dense_exact(program, sf);
    }
    const int m_old = (int)basis_keys.size();
    if (m_old > sf.m) return solve_lp_exact(program);

    std::vector<int> basis;
    basis.reserve(sf.m);
    std::vector<char> used(sf.n_total, 0);
    for (int key : basis_keys) {
        int col;
        if (key >= 0 && key < sf.n_struct) {
            col = key;
        } else {
            int rem = key - sf.n_struct;
            int row = rem / 2;
            if (rem < 0 || row >= sf.m) return solve_lp_exact(program);
            col = (rem & 1) ? sf.row_art_col[row] : sf.row_ss_col[row];
        }
        if (col < 0 || used[col]) return solve_lp_exact(program);
        used[col] = 1;
        basis.push_back(col);
    }
    // every appended row contributes its default basic column
    for (int i = m_old; i < sf.m; ++i) {
        int col = sf.row_basis_col[i];
        if (col < 0 || used[col]) return solve_lp_exact(program);
        used[col] = 1;
        basis.push_back(col);
    }
    return exact_from_basis(program, sf, std::move(basis), 20000);
}

std::vector<int> encode_basis_keys(const LinearProgram& program, const std::vector<int>& basis) {
    StdForm sf = detail::build_standard_form(program);
    if ((int)basis.size() != sf.m) return {};
    std::vector<int> keys;
    keys.reserve(sf.m);
    for (int c : basis) {
        if (c < 0 || c >= sf.n_total) return {};
        if (c < sf.n_struct) {
            keys.push_back(c);
        } else {
            int row = sf.cols[c][0].first;
            keys.push_back(sf.n_struct + 2 * row + (sf.artificial[c] ? 1 : 0));
        }
    }
    return keys;
}

}  // namespace cdc

#include "cdc/lp.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lp_internal.hpp"

namespace cdc {

void LinearProgram::check_well_formed() const {
    if (objective.size() != vars.size()) throw std::invalid_argument("lp: objective size mismatch");
    for (const auto& con : cons)
        for (const auto& [v, coef] : con.terms) {
            (void)coef;
            if (v < 0 || v >= (int)vars.size())
                throw std::invalid_argument("lp: constraint references unknown variable");
        }
    for (const auto& var : vars)
        if (var.upper && *var.upper < var.lower)
            throw std::invalid_argument("lp: empty variable box");
}

namespace detail {

StdForm build_standard_form(const LinearProgram& program) {
    program.check_well_formed();
    StdForm sf;
    int nv = program.num_vars();
    sf.n_struct = nv;
    sf.var_lower.resize(nv);
    sf.cost.assign(nv, Rational(0));
    for (int v = 0; v < nv; ++v) {
        sf.var_lower[v] = program.vars[v].lower;
        sf.cost[v] = program.objective[v];
        sf.objective_shift += program.objective[v] * program.vars[v].lower;
    }

    // rows: original constraints then upper-bound rows
    struct Row {
        std::vector<std::pair<int, Rational>> terms;
        Relation rel;
        Rational rhs;
        int orig;
    };
    std::vector<Row> rows;
    for (int c = 0; c < (int)program.cons.size(); ++c) {
        const auto& con = program.cons[c];
        Row row{{}, con.rel, con.rhs, c};
        // merge duplicate terms and apply the lower-bound shift
        std::map<int, Rational> merged;
        for (const auto& [v, coef] : con.terms) merged[v] += coef;
        for (const auto& [v, coef] : merged) {
            if (coef == 0) continue;
            row.terms.emplace_back(v, coef);
            row.rhs -= coef * sf.var_lower[v];
        }
        rows.push_back(std::move(row));
    }
    for (int v = 0; v < nv; ++v)
        if (program.vars[v].upper) {
            Row row{{{v, Rational(1)}}, Relation::le, *program.vars[v].upper - sf.var_lower[v], -1};
            rows.push_back(std::move(row));
        }

    sf.m = (int)rows.size();
    sf.cols.resize(nv);
    sf.rhs.resize(sf.m);
    sf.orig_row.resize(sf.m);
    sf.orig_sign.resize(sf.m);
    sf.row_basis_col.resize(sf.m);
    sf.row_cert_col.resize(sf.m);

    // structural entries, with rhs-sign normalization
    std::vector<Relation> rel(sf.m);
    for (int i = 0; i < sf.m; ++i) {
        Row& row = rows[i];
        int sign = row.rhs < 0 ? -1 : 1;
        sf.orig_row[i] = row.orig;
        sf.orig_sign[i] = sign;
        sf.rhs[i] = sign < 0 ? Rational(-row.rhs) : row.rhs;
        rel[i] = row.rel;
        if (sign < 0) {
            if (row.rel == Relation::le)
                rel[i] = Relation::ge;
            else if (row.rel == Relation::ge)
                rel[i] = Relation::le;
        }
        for (auto& [v, coef] : row.terms)
            sf.cols[v].emplace_back(i, sign < 0 ? Rational(-coef) : coef);
    }

    // slack / surplus columns, then artificials
    std::vector<int> art_rows;
    sf.row_ss_col.assign(sf.m, -1);
    sf.row_art_col.assign(sf.m, -1);
    for (int i = 0; i < sf.m; ++i) {
        if (rel[i] == Relation::le) {
            int col = (int)sf.cols.size();
            sf.cols.push_back({{i, Rational(1)}});
            sf.row_basis_col[i] = col;
            sf.row_cert_col[i] = col;
            sf.row_ss_col[i] = col;
        } else if (rel[i] == Relation::ge) {
            int col = (int)sf.cols.size();
            sf.cols.push_back({{i, Rational(-1)}});  // surplus
            sf.row_basis_col[i] = -1;  // artificial assigned below
            sf.row_cert_col[i] = -1;
            sf.row_ss_col[i] = col;
            art_rows.push_back(i);
        } else {
            sf.row_basis_col[i] = -1;
            sf.row_cert_col[i] = -1;
            art_rows.push_back(i);
        }
    }
    sf.artificial.assign(sf.cols.size(), false);
    for (int i : art_rows) {
        int col = (int)sf.cols.size();
        sf.cols.push_back({{i, Rational(1)}});
        sf.artificial.push_back(true);
        sf.row_basis_col[i] = col;
        sf.row_cert_col[i] = col;
        sf.row_art_col[i] = col;
    }
    sf.n_total = (int)sf.cols.size();
    sf.cost.resize(sf.n_total, Rational(0));
    return sf;
}

}  // namespace detail

namespace {

using detail::StdForm;

// Dense row-major tableau: m rows + phase-2 objective row + phase-1 row.
// Column layout: standard-form columns then rhs.
class Tableau {
  public:
    Tableau(const StdForm& sf, const SimplexOptions& opt) : sf_(sf), opt_(opt) {
        m_ = sf.m;
        ncols_ = sf.n_total + 1;
        rhs_col_ = sf.n_total;
        obj_row_ = m_;
        p1_row_ = m_ + 1;
        data_.assign((size_t)(m_ + 2) * ncols_, 0.0);
        basis_.resize(m_);

        for (int j = 0; j < sf.n_total; ++j)
            for (auto& [i, coef] : sf.cols[j]) at(i, j) = to_double(coef);
        for (int i = 0; i < m_; ++i) at(i, rhs_col_) = to_double(sf.rhs[i]);
        for (int j = 0; j < sf.n_total; ++j) at(obj_row_, j) = to_double(sf.cost[j]);

        // initial basis: slack or artificial per row (cost 0 -> objective row
        // is already in reduced form)
        bool any_artificial = false;
        for (int i = 0; i < m_; ++i) {
            basis_[i] = sf.row_basis_col[i];
            if (sf.artificial[basis_[i]]) any_artificial = true;
        }
        // phase-1 objective: minimize sum of artificial rows
        if (any_artificial) {
            for (int i = 0; i < m_; ++i) {
                if (!sf.artificial[basis_[i]]) continue;
                double* row = row_ptr(i);
                double* p1 = row_ptr(p1_row_);
                for (int j = 0; j < ncols_; ++j) p1[j] -= row[j];
            }
        }
        need_phase1_ = any_artificial;
    }

    LpStatus run(long max_iter, long& iters_out) {
        long iters = 0;
        if (need_phase1_) {
            LpStatus st = simplex_loop(p1_row_, max_iter, iters);
            if (st != LpStatus::optimal) {
                iters_out = iters;
                return st == LpStatus::unbounded ? LpStatus::iteration_limit : st;
            }
            if (-at(p1_row_, rhs_col_) > 1e-7) {
                iters_out = iters;
                return LpStatus::infeasible;
            }
            pivot_out_artificials();
        }
        LpStatus st = simplex_loop(obj_row_, max_iter, iters);
        iters_out = iters;
        return st;
    }

    double value(int row, int col) const { return data_[(size_t)row * ncols_ + col]; }
    const std::vector<int>& basis() const { return basis_; }
    int rhs_col() const { return rhs_col_; }
    int obj_row() const { return obj_row_; }

  private:
    double& at(int row, int col) { return data_[(size_t)row * ncols_ + col]; }
    double* row_ptr(int row) { return data_.data() + (size_t)row * ncols_; }

    LpStatus simplex_loop(int cost_row, long max_iter, long& iters) {
        int stall = 0;
        bool bland = opt_.bland_only;
        double prev_obj = at(cost_row, rhs_col_);
        while (true) {
            if (iters >= max_iter) return LpStatus::iteration_limit;
            int enter = pick_entering(cost_row, bland);
            if (enter < 0) return LpStatus::optimal;
            int leave = pick_leaving(enter);
            if (leave < 0) return LpStatus::unbounded;
            pivot(leave, enter);
            ++iters;
            // rhs entry of the cost row rises as the objective improves; a
            // long run without movement means degeneracy, switch to Bland
            double obj = at(cost_row, rhs_col_);
            if (obj <= prev_obj + 1e-12 * (1.0 + std::fabs(prev_obj))) {
                if (++stall > 200) bland = true;
            } else {
                stall = 0;
                bland = opt_.bland_only;
            }
            prev_obj = obj;
        }
    }

    int pick_entering(int cost_row, bool bland) {
        const double* row = row_ptr(cost_row);
        int best = -1;
        double best_val = -opt_.opt_tol;
        for (int j = 0; j < sf_.n_total; ++j) {
            if (sf_.artificial[j]) continue;  // artificials never re-enter
            double rc = row[j];
            if (rc < best_val) {
                if (bland) return j;
                best_val = rc;
                best = j;
            }
        }
        return best;
    }

    int pick_leaving(int enter) {
        int best = -1;
        double best_ratio = 0;
        for (int i = 0; i < m_; ++i) {
            double a = at(i, enter);
            if (a <= 1e-10) continue;
            double ratio = at(i, rhs_col_) / a;
            if (best < 0 || ratio < best_ratio - 1e-12 ||
                (ratio < best_ratio + 1e-12 && basis_[i] < basis_[best])) {
                best = i;
                best_ratio = ratio;
            }
        }
        return best;
    }

    void pivot(int prow, int pcol) {
        double* pr = row_ptr(prow);
        double inv = 1.0 / pr[pcol];
        for (int j = 0; j < ncols_; ++j) pr[j] *= inv;
        pr[pcol] = 1.0;

        int total_rows = m_ + (need_phase1_ ? 2 : 1);
        bool par = opt_.parallel && (size_t)total_rows * ncols_ > (size_t)1 << 20;
#pragma omp parallel for schedule(static) if (par)
        for (int i = 0; i < total_rows; ++i) {
            if (i == prow) continue;
            double* row = row_ptr(i);
            double f = row[pcol];
            if (f == 0.0) continue;
            for (int j = 0; j < ncols_; ++j) row[j] -= f * pr[j];
            row[pcol] = 0.0;
        }
        basis_[prow] = pcol;
    }

    // after phase 1: swap basic zero-valued artificials for real columns
    void pivot_out_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (!sf_.artificial[basis_[i]]) continue;
            for (int j = 0; j < sf_.n_total; ++j) {
                if (sf_.artificial[j]) continue;
                if (std::fabs(at(i, j)) > 1e-7) {
                    pivot(i, j);
                    break;
                }
            }
            // no eligible column: row is redundant, artificial stays at zero
        }
    }

    const StdForm& sf_;
    const SimplexOptions& opt_;
    std::vector<double> data_;
    std::vector<int> basis_;
    int m_, ncols_, rhs_col_, obj_row_, p1_row_;
    bool need_phase1_ = false;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& program, const SimplexOptions& options) {
    StdForm sf = detail::build_standard_form(program);
    Tableau tab(sf, options);

    long max_iter = options.max_iterations > 0
                        ? options.max_iterations
                        : 2000 + 60L * (sf.m + sf.n_total);
    LpSolution sol;
    sol.status = tab.run(max_iter, sol.iterations);
    sol.basis = tab.basis();
    if (sol.status != LpStatus::optimal) return sol;

    // read structural values back into original variable space
    std::vector<double> xs(sf.n_total, 0.0);
    for (int i = 0; i < sf.m; ++i) xs[sol.basis[i]] = tab.value(i, tab.rhs_col());
    sol.x.resize(sf.n_struct);
    for (int v = 0; v < sf.n_struct; ++v) sol.x[v] = xs[v] + to_double(sf.var_lower[v]);

    sol.objective = 0;
    for (int v = 0; v < sf.n_struct; ++v)
        sol.objective += to_double(program.objective[v]) * sol.x[v];

    // duals via the certificate columns; dual bound = y . b (internal form)
    sol.duals.assign(program.cons.size(), 0.0);
    sol.dual_objective = to_double(sf.objective_shift);
    for (int i = 0; i < sf.m; ++i) {
        double y = -tab.value(tab.obj_row(), sf.row_cert_col[i]);
        sol.dual_objective += y * to_double(sf.rhs[i]);
        if (sf.orig_row[i] >= 0) sol.duals[sf.orig_row[i]] = y * sf.orig_sign[i];
    }

    // feasibility audit against the original program
    sol.max_violation = 0.0;
    for (const auto& con : program.cons) {
        double lhs = 0;
        for (auto& [v, coef] : con.terms) lhs += to_double(coef) * sol.x[v];
        double rhs = to_double(con.rhs);
        double viol = con.rel == Relation::eq   ? std::fabs(lhs - rhs)
                      : con.rel == Relation::le ? std::max(0.0, lhs - rhs)
                                                : std::max(0.0, rhs - lhs);
        sol.max_violation = std::max(sol.max_violation, viol);
    }
    for (int v = 0; v < sf.n_struct; ++v) {
        sol.max_violation =
            std::max(sol.max_violation, to_double(program.vars[v].lower) - sol.x[v]);
        if (program.vars[v].upper)
            sol.max_violation =
                std::max(sol.max_violation, sol.x[v] - to_double(*program.vars[v].upper));
    }
    return sol;
}

ExactLpResult solve_lp_exact(const LinearProgram& program, const SimplexOptions& options) {
    LpSolution sol = solve_lp(program, options);
    if (sol.status == LpStatus::infeasible || sol.status == LpStatus::unbounded) {
        ExactLpResult out;
        out.status = sol.status;
        return out;
    }
    return exact_lp_solution(program, sol.basis);
}

/**** LP interchange format ****/

namespace {

std::string var_label(const LinearProgram& p, int v) {
    if (v < (int)p.var_names.size() && !p.var_names[v].empty()) return p.var_names[v];
    return "x" + std::to_string(v);
}

std::string con_label(const LinearProgram& p, int c) {
    if (c < (int)p.con_names.size() && !p.con_names[c].empty()) return p.con_names[c];
    return "c" + std::to_string(c);
}

void write_number(std::ostream& out, const Rational& r) {
    std::ostringstream tmp;
    tmp.precision(17);
    tmp << to_double(r);
    out << tmp.str();
}

void write_terms(std::ostream& out, const LinearProgram& p,
                 const std::vector<std::pair<int, Rational>>& terms) {
    bool first = true;
    for (auto& [v, coef] : terms) {
        if (coef == 0) continue;
        if (coef < 0) {
            out << (first ? "- " : " - ");
        } else if (!first) {
            out << " + ";
        }
        Rational mag = coef < 0 ? Rational(-coef) : coef;
        if (mag != 1) {
            write_number(out, mag);
            out << " ";
        }
        out << var_label(p, v);
        first = false;
    }
    if (first) out << "0 " << var_label(p, 0);
}

}  // namespace

void write_lp_format(const LinearProgram& program, std::ostream& out) {
    out << "\\ exported linear program\n";
    out << "Minimize\n obj:";
    std::vector<std::pair<int, Rational>> obj_terms;
    for (int v = 0; v < program.num_vars(); ++v)
        if (program.objective[v] != 0) obj_terms.emplace_back(v, program.objective[v]);
    out << " ";
    write_terms(out, program, obj_terms);
    out << "\nSubject To\n";
    for (int c = 0; c < (int)program.cons.size(); ++c) {
        const auto& con = program.cons[c];
        out << " " << con_label(program, c) << ": ";
        write_terms(out, program, con.terms);
        out << (con.rel == Relation::eq ? " = " : con.rel == Relation::le ? " <= " : " >= ");
        write_number(out, con.rhs);
        out << "\n";
    }
    out << "Bounds\n";
    for (int v = 0; v < program.num_vars(); ++v) {
        const auto& var = program.vars[v];
        if (var.lower == 0 && !var.upper) continue;
        out << " ";
        if (var.upper) {
            write_number(out, var.lower);
            out << " <= " << var_label(program, v) << " <= ";
            write_number(out, *var.upper);
        } else {
            out << var_label(program, v) << " >= ";
            write_number(out, var.lower);
        }
        out << "\n";
    }
    out << "End\n";
}

namespace {

struct Token {
    std::string text;
};

std::vector<std::string> tokenize_lp(std::istream& in) {
    std::vector<std::string> toks;
    std::string line;
    while (std::getline(in, line)) {
        auto bs = line.find('\\');
        if (bs != std::string::npos) line = line.substr(0, bs);
        std::istringstream ls(line);
        std::string word;
        while (ls >> word) {
            // split attached relation/sign characters; keep exponent signs
            // ("1e-05") inside their numeric token
            size_t pos = 0;
            while (pos < word.size()) {
                if (word[pos] == '+' || word[pos] == '-') {
                    toks.push_back(std::string(1, word[pos]));
                    ++pos;
                } else if (word[pos] == '<' || word[pos] == '>' || word[pos] == '=') {
                    size_t len = (pos + 1 < word.size() && word[pos + 1] == '=') ? 2 : 1;
                    toks.push_back(word.substr(pos, len));
                    pos += len;
                } else {
                    size_t end = pos;
                    bool numeric = word[pos] >= '0' && word[pos] <= '9';
                    numeric = numeric || word[pos] == '.';
                    while (end < word.size()) {
                        end = word.find_first_of("+-<>=", end);
                        if (end == std::string::npos) {
                            end = word.size();
                            break;
                        }
                        if (numeric && (word[end] == '+' || word[end] == '-') &&
                            (word[end - 1] == 'e' || word[end - 1] == 'E')) {
                            ++end;
                            continue;
                        }
                        break;
                    }
                    toks.push_back(word.substr(pos, end - pos));
                    pos = end;
                }
            }
        }
    }
    return toks;
}

bool is_number(const std::string& s) {
    if (s.empty()) return false;
    char c = s[0];
    return (c >= '0' && c <= '9') || c == '.';
}

double parse_num(const std::string& s) { return std::stod(s); }

}  // namespace

// Parses the subset of the LP format emitted by write_lp_format (plus minor
// variations); intended for round-trip checks, not a general reader.
LinearProgram parse_lp_format(std::istream& in) {
    auto toks = tokenize_lp(in);
    LinearProgram lp;
    std::map<std::string, int> var_ids;
    auto var_id = [&](const std::string& name) {
        auto it = var_ids.find(name);
        if (it != var_ids.end()) return it->second;
        int id = lp.add_variable();
        var_ids[name] = id;
        lp.var_names.resize(id + 1);
        lp.var_names[id] = name;
        return id;
    };

    enum Section { none, objective, constraints, bounds } section = none;
    size_t i = 0;
    auto lower_eq = [](const std::string& a, const char* b) {
        std::string la = a;
        std::for_each(la.begin(), la.end(), [](char& c) { c = (char)std::tolower(c); });
        return la == b;
    };

    // linear expression until a relation token or section keyword
    auto parse_expr = [&](std::vector<std::pair<int, Rational>>& terms) {
        double sign = 1;
        double coef = 1;
        bool have_coef = false;
        while (i < toks.size()) {
            const std::string& t = toks[i];
            if (t == "<=" || t == ">=" || t == "=" || lower_eq(t, "subject") ||
                lower_eq(t, "st") || lower_eq(t, "bounds") || lower_eq(t, "end"))
                break;
            if (t == "+") {
                sign = 1;
                ++i;
            } else if (t == "-") {
                sign = -sign;
                ++i;
            } else if (is_number(t)) {
                coef = parse_num(t) * sign;
                have_coef = true;
                sign = 1;
                ++i;
            } else {
                // variable, possibly "name:" label to skip
                if (!t.empty() && t.back() == ':') {
                    ++i;
                    continue;
                }
                terms.emplace_back(var_id(t), rational_from_double(have_coef ? coef : sign));
                have_coef = false;
                sign = 1;
                ++i;
            }
        }
    };

    while (i < toks.size()) {
        const std::string& t = toks[i];
        if (lower_eq(t, "minimize") || lower_eq(t, "min")) {
            section = objective;
            ++i;
            std::vector<std::pair<int, Rational>> terms;
            parse_expr(terms);
            for (auto& [v, c] : terms) lp.objective[v] += c;
        } else if (lower_eq(t, "subject") || lower_eq(t, "st")) {
            while (i < toks.size() && !lower_eq(toks[i], "to")) ++i;
            ++i;
            section = constraints;
        } else if (lower_eq(t, "bounds")) {
            section = bounds;
            ++i;
        } else if (lower_eq(t, "end")) {
            break;
        } else if (section == constraints) {
            std::vector<std::pair<int, Rational>> terms;
            parse_expr(terms);
            if (i >= toks.size()) throw std::invalid_argument("lp parse: truncated constraint");
            Relation rel = toks[i] == "<=" ? Relation::le
                           : toks[i] == ">=" ? Relation::ge
                                             : Relation::eq;
            ++i;
            double sign = 1;
            if (toks[i] == "-") {
                sign = -1;
                ++i;
            }
            Rational rhs = rational_from_double(parse_num(toks[i]) * sign);
            ++i;
            int c = lp.add_constraint(rel, rhs);
            for (auto& [v, coef] : terms) lp.add_term(c, v, coef);
        } else if (section == bounds) {
            // forms: "lo <= x <= hi" or "x >= lo" or "x <= hi"
            double first_num = 0;
            bool leading_number = false;
            double sign = 1;
            if (toks[i] == "-") {
                sign = -1;
                ++i;
            }
            if (is_number(toks[i])) {
                first_num = parse_num(toks[i]) * sign;
                leading_number = true;
                ++i;
            }
            if (leading_number) {
                if (toks[i] != "<=") throw std::invalid_argument("lp parse: bad bounds line");
                ++i;
                int v = var_id(toks[i]);
                ++i;
                lp.vars[v].lower = rational_from_double(first_num);
                if (i < toks.size() && toks[i] == "<=") {
                    ++i;
                    double s2 = 1;
                    if (toks[i] == "-") {
                        s2 = -1;
                        ++i;
                    }
                    lp.vars[v].upper = rational_from_double(parse_num(toks[i]) * s2);
                    ++i;
                }
            } else {
                int v = var_id(toks[i]);
                ++i;
                std::string rel = toks[i];
                ++i;
                double s2 = 1;
                if (toks[i] == "-") {
                    s2 = -1;
                    ++i;
                }
                double num = parse_num(toks[i]) * s2;
                ++i;
                if (rel == ">=")
                    lp.vars[v].lower = rational_from_double(num);
                else if (rel == "<=")
                    lp.vars[v].upper = rational_from_double(num);
                else
                    throw std::invalid_argument("lp parse: bad bounds relation");
            }
        } else {
            throw std::invalid_argument("lp parse: unexpected token '" + t + "'");
        }
    }
    return lp;
}

}  // namespace cdc

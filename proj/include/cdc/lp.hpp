#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cdc/rational.hpp"

namespace cdc {

enum class Relation { eq, le, ge };

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

// Minimization program. Coefficients and bounds are exact rationals; the
// float solver rounds them once at tableau build time.
struct LinearProgram {
    struct Variable {
        Rational lower = 0;
        std::optional<Rational> upper;
    };
    struct Constraint {
        std::vector<std::pair<int, Rational>> terms;
        Relation rel = Relation::eq;
        Rational rhs = 0;
    };

    std::vector<Variable> vars;
    std::vector<Constraint> cons;
    std::vector<Rational> objective;  // aligned with vars, zero-padded
    std::vector<std::string> var_names;  // optional, for export only
    std::vector<std::string> con_names;

    int add_variable(Rational lower = 0, std::optional<Rational> upper = std::nullopt) {
        vars.push_back({std::move(lower), std::move(upper)});
        objective.push_back(0);
        return (int)vars.size() - 1;
    }
    int add_constraint(Relation rel, Rational rhs) {
        cons.push_back({{}, rel, std::move(rhs)});
        return (int)cons.size() - 1;
    }
    void add_term(int con, int var, Rational coef) {
        cons[con].terms.emplace_back(var, std::move(coef));
    }
    void set_objective(int var, Rational coef) { objective[var] = std::move(coef); }

    int num_vars() const { return (int)vars.size(); }
    void check_well_formed() const;
};

struct SimplexOptions {
    double feas_tol = 1e-9;
    double opt_tol = 1e-9;
    bool bland_only = false;     // default: Dantzig pricing with Bland fallback
    bool parallel = true;        // OpenMP row updates on large tableaus
    long max_iterations = -1;    // -1: automatic cap
};

struct LpSolution {
    LpStatus status = LpStatus::iteration_limit;
    double objective = 0;
    std::vector<double> x;          // original variable space
    double max_violation = 0;       // against the original constraints
    double dual_objective = 0;      // certificate bound (equals objective at optimum)
    std::vector<double> duals;      // one per constraint, internal-form orientation
    std::vector<int> basis;         // standard-form column per row, for the exact layer
    long iterations = 0;
};

LpSolution solve_lp(const LinearProgram& program, const SimplexOptions& options = {});

// Exact-rational resolution of the optimum. Starts from a float basis when
// given, verifies primal feasibility and reduced costs in exact arithmetic,
// and runs exact simplex cleanup pivots if the float basis is not exactly
// optimal. Resulting objective/solution are exactly optimal.
struct ExactLpResult {
    LpStatus status = LpStatus::optimal;
    Rational objective;
    std::vector<Rational> x;  // original variable space
    // Exact multipliers, one per constraint, oriented on the constraints as
    // stated: >= rows carry nonnegative duals, <= rows nonpositive, = rows
    // free. Multipliers of variable bounds are not reported, so the strong
    // duality identity sum(duals[c] * rhs[c]) == objective holds when every
    // variable has lower bound 0 and no upper bound.
    std::vector<Rational> duals;
    // Final basis in a row-stable encoding: key v < num_vars() is structural
    // column v, num_vars() + 2*i is row i's slack/surplus column, and
    // num_vars() + 2*i + 1 its artificial. Appending constraints leaves old
    // keys meaningful, which exact_lp_resume exploits.
    std::vector<int> basis_keys;
    int cleanup_pivots = 0;
};

ExactLpResult exact_lp_solution(const LinearProgram& program,
                                const std::vector<int>& basis_hint);

// Convenience: float solve, then exact resolution.
ExactLpResult solve_lp_exact(const LinearProgram& program,
                             const SimplexOptions& options = {});

// Re-optimizes after constraints were appended to an already-solved program
// (same variables, earlier rows untouched, no variable upper bounds). The
// previous optimal basis extended with the new rows' default columns stays
// dual feasible, so exact dual simplex pivots restore optimality without a
// float stage. Empty keys request a from-scratch exact solve (dense, small
// programs only); unusable keys fall back to solve_lp_exact.
ExactLpResult exact_lp_resume(const LinearProgram& program, const std::vector<int>& basis_keys);

// Encodes a basis returned by solve_lp (internal column indices) into the
// stable key form consumed by exact_lp_resume; empty when the basis does not
// fit the program.
std::vector<int> encode_basis_keys(const LinearProgram& program, const std::vector<int>& basis);

// LP interchange text format (Minimize / Subject To / Bounds / End).
void write_lp_format(const LinearProgram& program, std::ostream& out);
LinearProgram parse_lp_format(std::istream& in);

}  // namespace cdc

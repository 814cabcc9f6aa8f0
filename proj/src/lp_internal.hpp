#pragma once

// Internal standard form shared by the float simplex and the exact layer.
// All rows are equalities over columns >= 0 after this transformation:
//   - variables shifted so lower bounds become 0
//   - upper bounds materialized as extra <= rows
//   - rows negated so every rhs is >= 0
//   - <= rows get a slack column, >= rows a surplus (-1) plus an artificial,
//     = rows an artificial

#include <vector>

#include "cdc/lp.hpp"

namespace cdc::detail {

struct StdForm {
    int m = 0;         // rows
    int n_struct = 0;  // structural columns (shifted originals)
    int n_total = 0;   // structural + slack/surplus + artificial

    // column-major sparse matrix, entries (row, coef)
    std::vector<std::vector<std::pair<int, Rational>>> cols;
    std::vector<Rational> rhs;        // per row, >= 0
    std::vector<Rational> cost;       // per column (0 beyond structural)
    std::vector<bool> artificial;     // per column
    std::vector<int> row_basis_col;   // initial basis column per row (slack or artificial)
    std::vector<int> row_cert_col;    // slack-or-artificial column that exposes the row's dual
    std::vector<int> row_ss_col;      // per row: slack/surplus column, -1 for = rows
    std::vector<int> row_art_col;     // per row: artificial column, -1 for <= rows

    // mapping back to the original program
    std::vector<Rational> var_lower;  // x_orig = x_std + var_lower
    Rational objective_shift = 0;     // c . lower
    std::vector<int> orig_row;        // per row: original constraint index, -1 for bound rows
    std::vector<int> orig_sign;       // +1/-1 row negation relative to the original
};

StdForm build_standard_form(const LinearProgram& program);

}  // namespace cdc::detail

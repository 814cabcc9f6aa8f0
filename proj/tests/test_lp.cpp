#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "cdc/lp.hpp"
#include "lp_internal.hpp"

using namespace cdc;

namespace {

void check_gap(const LpSolution& sol) {
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.max_violation <= 1e-9);
    double gap = std::fabs(sol.objective - sol.dual_objective);
    CHECK(gap <= 1e-6 * (1.0 + std::fabs(sol.objective)));
}

// Independent oracle: enumerate every choice of d active hyperplanes among
// the constraints-as-equalities and the coordinate planes, solve the d x d
// rational system by Gauss elimination, keep feasible points, take the best
// objective. Exponential, fine for d <= 4.
struct VertexOracle {
    // rows: (coefs, rel, rhs) over d variables, bounds already materialized
    int d;
    std::vector<std::vector<Rational>> rows;
    std::vector<Relation> rels;
    std::vector<Rational> rhs;
    std::vector<Rational> cost;

    bool feasible(const std::vector<Rational>& x) const {
        for (size_t i = 0; i < rows.size(); ++i) {
            Rational lhs = 0;
            for (int v = 0; v < d; ++v) lhs += rows[i][v] * x[v];
            if (rels[i] == Relation::eq && lhs != rhs[i]) return false;
            if (rels[i] == Relation::le && lhs > rhs[i]) return false;
            if (rels[i] == Relation::ge && lhs < rhs[i]) return false;
        }
        return true;
    }

    // returns true if some vertex is feasible; best holds the optimum
    bool best_vertex(Rational& best) const {
        int total = (int)rows.size();
        std::vector<int> pick(d);
        bool found = false;
        // iterate over all d-element subsets of row indices
        std::vector<int> idx(d);
        for (int i = 0; i < d; ++i) idx[i] = i;
        if (total < d) return false;
        while (true) {
            // solve the active system exactly
            std::vector<std::vector<Rational>> a(d, std::vector<Rational>(d + 1));
            for (int i = 0; i < d; ++i) {
                for (int v = 0; v < d; ++v) a[i][v] = rows[idx[i]][v];
                a[i][d] = rhs[idx[i]];
            }
            bool singular = false;
            for (int c = 0; c < d && !singular; ++c) {
                int piv = -1;
                for (int r = c; r < d; ++r)
                    if (a[r][c] != 0) {
                        piv = r;
                        break;
                    }
                if (piv < 0) {
                    singular = true;
                    break;
                }
                std::swap(a[c], a[piv]);
                for (int r = 0; r < d; ++r) {
                    if (r == c || a[r][c] == 0) continue;
                    Rational f = a[r][c] / a[c][c];
                    for (int v = c; v <= d; ++v) a[r][v] -= f * a[c][v];
                }
            }
            if (!singular) {
                std::vector<Rational> x(d);
                for (int v = 0; v < d; ++v) x[v] = a[v][d] / a[v][v];
                if (feasible(x)) {
                    Rational val = 0;
                    for (int v = 0; v < d; ++v) val += cost[v] * x[v];
                    if (!found || val < best) best = val;
                    found = true;
                }
            }
            // next combination
            int i = d - 1;
            while (i >= 0 && idx[i] == total - d + i) --i;
            if (i < 0) break;
            ++idx[i];
            for (int j = i + 1; j < d; ++j) idx[j] = idx[j - 1] + 1;
        }
        return found;
    }
};

VertexOracle oracle_of(const LinearProgram& lp) {
    VertexOracle vo;
    vo.d = lp.num_vars();
    vo.cost = lp.objective;
    auto add = [&](const std::vector<Rational>& coefs, Relation rel, Rational r) {
        vo.rows.push_back(coefs);
        vo.rels.push_back(rel);
        vo.rhs.push_back(std::move(r));
    };
    for (const auto& con : lp.cons) {
        std::vector<Rational> coefs(vo.d, Rational(0));
        for (auto& [v, c] : con.terms) coefs[v] += c;
        add(coefs, con.rel, con.rhs);
    }
    for (int v = 0; v < vo.d; ++v) {
        std::vector<Rational> coefs(vo.d, Rational(0));
        coefs[v] = 1;
        add(coefs, Relation::ge, lp.vars[v].lower);
        if (lp.vars[v].upper) {
            coefs[v] = 1;
            add(coefs, Relation::le, *lp.vars[v].upper);
        }
    }
    return vo;
}

}  // namespace

TEST_CASE("single variable lower bound") {
    LinearProgram lp;
    int x = lp.add_variable(3);
    lp.set_objective(x, 1);
    auto sol = solve_lp(lp);
    check_gap(sol);
    CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-12));

    auto ex = solve_lp_exact(lp);
    REQUIRE(ex.status == LpStatus::optimal);
    CHECK(ex.objective == Rational(3));
    CHECK(ex.x[0] == Rational(3));
}

TEST_CASE("degenerate optimum face") {
    LinearProgram lp;
    int x = lp.add_variable();
    int y = lp.add_variable();
    lp.set_objective(x, 1);
    lp.set_objective(y, 1);
    int c = lp.add_constraint(Relation::eq, 1);
    lp.add_term(c, x, 1);
    lp.add_term(c, y, 1);
    auto sol = solve_lp(lp);
    check_gap(sol);
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-12));

    auto ex = solve_lp_exact(lp);
    REQUIRE(ex.status == LpStatus::optimal);
    CHECK(ex.objective == Rational(1));
    CHECK(ex.x[0] + ex.x[1] == Rational(1));
}

TEST_CASE("three variable instance matches vertex enumeration") {
    LinearProgram lp;
    int x = lp.add_variable();
    int y = lp.add_variable();
    int z = lp.add_variable();
    lp.set_objective(x, -2);
    lp.set_objective(y, -3);
    lp.set_objective(z, -4);
    int c0 = lp.add_constraint(Relation::le, 10);
    lp.add_term(c0, x, 3);
    lp.add_term(c0, y, 2);
    lp.add_term(c0, z, 1);
    int c1 = lp.add_constraint(Relation::le, 15);
    lp.add_term(c1, x, 2);
    lp.add_term(c1, y, 5);
    lp.add_term(c1, z, 3);
    int c2 = lp.add_constraint(Relation::le, 6);
    lp.add_term(c2, x, 1);
    lp.add_term(c2, y, 1);
    lp.add_term(c2, z, 1);

    Rational best;
    REQUIRE(oracle_of(lp).best_vertex(best));

    auto sol = solve_lp(lp);
    check_gap(sol);
    CHECK(sol.objective == doctest::Approx(to_double(best)).epsilon(1e-9));

    auto ex = solve_lp_exact(lp);
    REQUIRE(ex.status == LpStatus::optimal);
    CHECK(ex.objective == best);
}

TEST_CASE("equality mix matches vertex enumeration") {
    LinearProgram lp;
    int x = lp.add_variable();
    int y = lp.add_variable();
    int z = lp.add_variable(0, Rational(4));
    lp.set_objective(x, 1);
    lp.set_objective(y, -1);
    lp.set_objective(z, 2);
    int c0 = lp.add_constraint(Relation::eq, 5);
    lp.add_term(c0, x, 1);
    lp.add_term(c0, y, 2);
    lp.add_term(c0, z, 1);
    int c1 = lp.add_constraint(Relation::ge, 1);
    lp.add_term(c1, x, 1);
    lp.add_term(c1, y, -1);
    int c2 = lp.add_constraint(Relation::le, 7);
    lp.add_term(c2, x, 2);
    lp.add_term(c2, y, 1);

    Rational best;
    REQUIRE(oracle_of(lp).best_vertex(best));

    auto sol = solve_lp(lp);
    check_gap(sol);
    CHECK(sol.objective == doctest::Approx(to_double(best)).epsilon(1e-9));

    auto ex = solve_lp_exact(lp);
    REQUIRE(ex.status == LpStatus::optimal);
    CHECK(ex.objective == best);

    // equality constraint satisfied exactly by the rational solution
    CHECK(ex.x[0] + 2 * ex.x[1] + ex.x[2] == Rational(5));
}

TEST_CASE("status classification") {
    SUBCASE("infeasible by equality") {
        LinearProgram lp;
        int x = lp.add_variable();
        int y = lp.add_variable();
        lp.set_objective(x, 1);
        int c = lp.add_constraint(Relation::eq, -1);
        lp.add_term(c, x, 1);
        lp.add_term(c, y, 1);
        CHECK(solve_lp(lp).status == LpStatus::infeasible);
        CHECK(solve_lp_exact(lp).status == LpStatus::infeasible);
    }
    SUBCASE("infeasible by bounds") {
        LinearProgram lp;
        int x = lp.add_variable(3, Rational(5));
        lp.set_objective(x, 1);
        int c = lp.add_constraint(Relation::le, 2);
        lp.add_term(c, x, 1);
        CHECK(solve_lp(lp).status == LpStatus::infeasible);
        CHECK(solve_lp_exact(lp).status == LpStatus::infeasible);
    }
    SUBCASE("unbounded") {
        LinearProgram lp;
        int x = lp.add_variable();
        int y = lp.add_variable();
        lp.set_objective(x, -1);
        int c = lp.add_constraint(Relation::le, 1);
        lp.add_term(c, x, 1);
        lp.add_term(c, y, -1);
        CHECK(solve_lp(lp).status == LpStatus::unbounded);
        CHECK(solve_lp_exact(lp).status == LpStatus::unbounded);
    }
    SUBCASE("unbounded without constraints") {
        LinearProgram lp;
        int x = lp.add_variable();
        lp.set_objective(x, -1);
        CHECK(solve_lp(lp).status == LpStatus::unbounded);
    }
}

namespace {

// random LP that is feasible (b derived from a known point) and bounded
// (all variables boxed); rational data with small denominators
LinearProgram random_boxed_lp(std::mt19937& rng, int nv, int nc) {
    LinearProgram lp;
    std::uniform_int_distribution<int> coef(-4, 4);
    std::uniform_int_distribution<int> den(1, 4);
    std::uniform_int_distribution<int> point(0, 3);
    std::uniform_int_distribution<int> slackd(0, 2);
    std::uniform_int_distribution<int> relpick(0, 2);
    for (int v = 0; v < nv; ++v) lp.add_variable(0, Rational(6));
    for (int v = 0; v < nv; ++v) lp.set_objective(v, Rational(coef(rng), den(rng)));
    std::vector<Rational> x0(nv);
    for (int v = 0; v < nv; ++v) x0[v] = point(rng);
    for (int c = 0; c < nc; ++c) {
        std::vector<Rational> row(nv);
        Rational lhs = 0;
        bool any = false;
        for (int v = 0; v < nv; ++v) {
            row[v] = Rational(coef(rng), den(rng));
            if (row[v] != 0) any = true;
            lhs += row[v] * x0[v];
        }
        if (!any) row[0] = 1, lhs = x0[0];
        int r = relpick(rng);
        Relation rel = r == 0 ? Relation::eq : r == 1 ? Relation::le : Relation::ge;
        Rational margin = rel == Relation::eq ? Rational(0) : Rational(slackd(rng));
        Rational rhs = rel == Relation::ge ? Rational(lhs - margin) : Rational(lhs + margin);
        int id = lp.add_constraint(rel, rhs);
        for (int v = 0; v < nv; ++v)
            if (row[v] != 0) lp.add_term(id, v, row[v]);
    }
    return lp;
}

}  // namespace

TEST_CASE("random boxed programs: gap, exactness, cleanup paths agree") {
    std::mt19937 rng(20240817);
    int solved = 0;
    for (int trial = 0; trial < 120; ++trial) {
        int nv = 2 + (int)(rng() % 5);
        int nc = 1 + (int)(rng() % 5);
        LinearProgram lp = random_boxed_lp(rng, nv, nc);

        auto sol = solve_lp(lp);
        REQUIRE(sol.status == LpStatus::optimal);  // feasible + boxed by design
        check_gap(sol);
        ++solved;

        auto ex = exact_lp_solution(lp, sol.basis);
        REQUIRE(ex.status == LpStatus::optimal);
        CHECK(std::fabs(to_double(ex.objective) - sol.objective) <=
              1e-7 * (1.0 + std::fabs(sol.objective)));

        // exact solution satisfies every constraint exactly
        for (const auto& con : lp.cons) {
            Rational lhs = 0;
            for (auto& [v, c] : con.terms) lhs += c * ex.x[v];
            if (con.rel == Relation::eq) CHECK(lhs == con.rhs);
            if (con.rel == Relation::le) CHECK(lhs <= con.rhs);
            if (con.rel == Relation::ge) CHECK(lhs >= con.rhs);
        }
        for (int v = 0; v < lp.num_vars(); ++v) {
            CHECK(ex.x[v] >= lp.vars[v].lower);
            if (lp.vars[v].upper) CHECK(ex.x[v] <= *lp.vars[v].upper);
        }

        // the all-slack starting basis forces rational cleanup pivots; the
        // dense from-scratch path is forced by a size-mismatched hint; all
        // three routes must land on the same exact optimum
        auto sf = detail::build_standard_form(lp);
        std::vector<int> start(sf.m);
        for (int i = 0; i < sf.m; ++i) start[i] = sf.row_basis_col[i];
        auto cleaned = exact_lp_solution(lp, start);
        REQUIRE(cleaned.status == LpStatus::optimal);
        CHECK(cleaned.objective == ex.objective);

        if (sf.m >= 2) {
            auto dense = exact_lp_solution(lp, std::vector<int>{0});
            REQUIRE(dense.status == LpStatus::optimal);
            CHECK(dense.objective == ex.objective);
        }

        // vertex oracle cross-check on the small instances
        if (nv <= 3) {
            Rational best;
            REQUIRE(oracle_of(lp).best_vertex(best));
            CHECK(ex.objective == best);
        }
    }
    CHECK(solved == 120);
}

namespace {

// Feasible-by-construction program in the certificate class: every variable
// has lower bound 0 and no upper bound, costs are nonnegative (so the
// objective is bounded below), rows of all three relations pass through a
// random nonnegative anchor point.
LinearProgram random_conic_lp(std::mt19937& rng, int nv, int nc) {
    LinearProgram lp;
    std::uniform_int_distribution<int> coef(-4, 4);
    std::uniform_int_distribution<int> den(1, 3);
    std::uniform_int_distribution<int> costn(0, 5);
    std::uniform_int_distribution<int> anchor(0, 4);
    std::uniform_int_distribution<int> relpick(0, 2);
    std::uniform_int_distribution<int> slackd(0, 3);

    std::vector<Rational> x0(nv);
    for (int v = 0; v < nv; ++v) {
        lp.add_variable();
        lp.set_objective(v, Rational(costn(rng), den(rng)));
        x0[v] = anchor(rng);
    }
    for (int c = 0; c < nc; ++c) {
        std::vector<Rational> row(nv);
        Rational lhs = 0;
        bool any = false;
        for (int v = 0; v < nv; ++v) {
            row[v] = Rational(coef(rng), den(rng));
            if (row[v] != 0) any = true;
            lhs += row[v] * x0[v];
        }
        if (!any) row[0] = 1, lhs = x0[0];
        int r = relpick(rng);
        Relation rel = r == 0 ? Relation::eq : r == 1 ? Relation::le : Relation::ge;
        Rational margin = rel == Relation::eq ? Rational(0) : Rational(slackd(rng));
        Rational rhs = rel == Relation::ge ? Rational(lhs - margin) : Rational(lhs + margin);
        int id = lp.add_constraint(rel, rhs);
        for (int v = 0; v < nv; ++v)
            if (row[v] != 0) lp.add_term(id, v, row[v]);
    }
    return lp;
}

// For programs whose variables have lower bound 0 and no upper bound, an
// exact dual certificate must satisfy: sign restrictions by relation,
// nonnegative reduced costs on every variable, and strong duality.
void check_dual_certificate(const LinearProgram& lp, const ExactLpResult& ex) {
    REQUIRE(ex.status == LpStatus::optimal);
    REQUIRE(ex.duals.size() == lp.cons.size());
    std::vector<Rational> reduced(lp.objective.begin(), lp.objective.end());
    Rational dual_obj = 0;
    for (size_t c = 0; c < lp.cons.size(); ++c) {
        const Rational& y = ex.duals[c];
        if (lp.cons[c].rel == Relation::ge) CHECK(y >= 0);
        if (lp.cons[c].rel == Relation::le) CHECK(y <= 0);
        dual_obj += y * lp.cons[c].rhs;
        if (y == 0) continue;
        for (const auto& [v, coef] : lp.cons[c].terms) reduced[v] -= y * coef;
    }
    for (int v = 0; v < lp.num_vars(); ++v) CHECK(reduced[v] >= 0);
    CHECK(dual_obj == ex.objective);
}

}  // namespace

TEST_CASE("exact duals: hand-solved two-row program") {
    // min 3x + 2y  s.t.  x + y >= 2,  x - y = 0  ->  x = y = 1, value 5.
    // Strong duality pins y1 = 5/2; dual feasibility on both columns then
    // forces y2 = 1/2 (unique certificate).
    LinearProgram lp;
    int x = lp.add_variable();
    int y = lp.add_variable();
    lp.set_objective(x, 3);
    lp.set_objective(y, 2);
    int c0 = lp.add_constraint(Relation::ge, 2);
    lp.add_term(c0, x, 1);
    lp.add_term(c0, y, 1);
    int c1 = lp.add_constraint(Relation::eq, 0);
    lp.add_term(c1, x, 1);
    lp.add_term(c1, y, -1);

    auto ex = solve_lp_exact(lp);
    REQUIRE(ex.status == LpStatus::optimal);
    CHECK(ex.objective == Rational(5));
    REQUIRE(ex.duals.size() == 2);
    CHECK(ex.duals[0] == Rational(5, 2));
    CHECK(ex.duals[1] == Rational(1, 2));
    check_dual_certificate(lp, ex);

    // the from-scratch dense path must certify too
    auto dense = exact_lp_solution(lp, std::vector<int>{0});
    CHECK(dense.objective == Rational(5));
    check_dual_certificate(lp, dense);
}

TEST_CASE("exact duals: random conic programs certify their optima") {
    std::mt19937 rng(771177);
    int certified = 0;
    for (int trial = 0; trial < 80; ++trial) {
        int nv = 2 + (int)(rng() % 5);
        int nc = 1 + (int)(rng() % 5);
        // feasible by construction and bounded below (costs and variables
        // are nonnegative), so every trial must reach a certified optimum
        LinearProgram lp = random_conic_lp(rng, nv, nc);
        auto sol = solve_lp(lp);
        REQUIRE(sol.status == LpStatus::optimal);
        auto ex = exact_lp_solution(lp, sol.basis);
        check_dual_certificate(lp, ex);
        auto dense = exact_lp_solution(lp, std::vector<int>{0});
        REQUIRE(dense.status == LpStatus::optimal);
        CHECK(dense.objective == ex.objective);
        check_dual_certificate(lp, dense);
        ++certified;
    }
    CHECK(certified == 80);
}

TEST_CASE("serial and parallel pivots produce identical results") {
    std::mt19937 rng(99);
    LinearProgram lp = random_boxed_lp(rng, 30, 25);
    SimplexOptions serial;
    serial.parallel = false;
    SimplexOptions par;
    par.parallel = true;
    auto a = solve_lp(lp, serial);
    auto b = solve_lp(lp, par);
    REQUIRE(a.status == LpStatus::optimal);
    REQUIRE(b.status == LpStatus::optimal);
    REQUIRE(a.x.size() == b.x.size());
    CHECK(std::memcmp(a.x.data(), b.x.data(), a.x.size() * sizeof(double)) == 0);
    CHECK(a.objective == b.objective);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("lp format round trip") {
    LinearProgram lp;
    int x = lp.add_variable(Rational(-2), Rational(5));
    int y = lp.add_variable();
    int z = lp.add_variable(0, Rational(3));
    lp.var_names = {"alpha", "beta", "gamma"};
    lp.set_objective(x, Rational(3, 2));
    lp.set_objective(y, -2);
    lp.set_objective(z, Rational(1, 10000000));  // exercises scientific notation
    int c0 = lp.add_constraint(Relation::le, 4);
    lp.add_term(c0, x, 1);
    lp.add_term(c0, y, 2);
    int c1 = lp.add_constraint(Relation::ge, -1);
    lp.add_term(c1, x, -1);
    lp.add_term(c1, z, 1);
    int c2 = lp.add_constraint(Relation::eq, 2);
    lp.add_term(c2, y, 1);
    lp.add_term(c2, z, 1);

    std::stringstream ss;
    write_lp_format(lp, ss);
    LinearProgram back = parse_lp_format(ss);

    auto a = solve_lp(lp);
    auto b = solve_lp(back);
    REQUIRE(a.status == LpStatus::optimal);
    REQUIRE(b.status == LpStatus::optimal);
    CHECK(std::fabs(a.objective - b.objective) <= 1e-6 * (1.0 + std::fabs(a.objective)));
}

TEST_CASE("well-formedness rejection") {
    LinearProgram lp;
    int x = lp.add_variable();
    lp.set_objective(x, 1);
    int c = lp.add_constraint(Relation::le, 1);
    lp.add_term(c, 5, 1);  // unknown variable
    CHECK_THROWS(solve_lp(lp));
}

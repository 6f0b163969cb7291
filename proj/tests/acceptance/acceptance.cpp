#include "ieti/error.hpp"
#include "ieti/verify.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

using namespace ieti;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct SmoothRun {
    std::string label;
    double jump = 0.0, u_max = 0.0, vertex = 0.0;
};

std::vector<SmoothRun> smooth_runs;
std::set<std::tuple<int, int, int>> spaces_used;

const Manufactured& exact()
{
    static const Manufactured u = manufactured("cos_sin");
    return u;
}

std::string sci(double x)
{
    std::ostringstream ss;
    ss << std::setprecision(3) << std::scientific << x;
    return ss.str();
}

std::string label(const std::string& mesh, int m, int k)
{
    return mesh + " m=" + std::to_string(m) + " k=" + std::to_string(k);
}

void record_smoothness(const std::string& name, const MultiPatchDomain& d, const TensorSpace& space,
                       const IetiSolution& sol, int s)
{
    if (d.patch_count() < 2)
        return;
    smooth_runs.push_back({name, smoothness_probe(d, space, sol.u, s), max_abs_value(d, space, sol.u),
                           vertex_jet_mismatch(d, space, sol.u)});
}

// s = m - 1, p = 2s + 1, r = s; Poisson uses p = 2, r = 1
SolverConfig config(int m, int k)
{
    const int s = m - 1, p = m == 1 ? 2 : 2 * m - 1, r = m == 1 ? 1 : m - 1;
    spaces_used.insert({p, r, k});
    return manufactured_config(exact(), m, s, p, r, k);
}

Outcome rank_spot_checks()
{
    struct Cell {
        int m, p, r, expected;
    };
    const Cell table[] = {{2, 2, 1, 5}, {2, 3, 1, 8}, {2, 4, 2, 9}, {2, 5, 2, 12}, {3, 3, 2, 9}, {3, 5, 2, 13}};
    const auto id = bilinear_patch({0, 0}, {1, 0}, {1, 1}, {0, 1});
    Outcome out{true, ""};
    for (const auto& c : table) {
        const int got = rank_deficiency(id, c.m, c.p, c.r, 0);
        spaces_used.insert({c.p, c.r, 0});
        if (got != c.expected) {
            out.pass = false;
            out.detail += "m=" + std::to_string(c.m) + " (" + std::to_string(c.p) + "," + std::to_string(c.r) +
                          ") gave " + std::to_string(got) + " expected " + std::to_string(c.expected) + "; ";
        }
    }
    int cells = 0, worst = -100;
    for (int m : {2, 3})
        for (const auto& row : rank_deficiency_study(m, 5, {0}, 5, 2024)) {
            spaces_used.insert({row.p, row.r, row.k});
            ++cells;
            worst = std::max(worst, row.deficiency - row.bound);
            if (row.deficiency > row.bound) {
                out.pass = false;
                out.detail += row.patch + " m=" + std::to_string(m) + " (" + std::to_string(row.p) + "," +
                              std::to_string(row.r) + ") deficiency " + std::to_string(row.deficiency) +
                              " > " + std::to_string(row.bound) + "; ";
            }
        }
    out.detail += "table cells matched: " + std::string(out.pass ? "all" : "no") + ", " + std::to_string(cells) +
                  " grid cells, max(deficiency - (2p+m)) = " + std::to_string(worst);
    return out;
}

Outcome convergence(const std::string& mesh, int m, int k0, int levels, double lo, double hi)
{
    const int s = m - 1;
    auto d = build_bilinear_domain(builtin_mesh(mesh), s);
    const auto rep = convergence_study(d, config(m, k0), exact(), levels);
    bool monotone = true;
    std::string errs;
    for (std::size_t j = 0; j < rep.levels.size(); ++j) {
        const auto& lv = rep.levels[j];
        spaces_used.insert({2 * m - 1, m - 1, lv.k});
        smooth_runs.push_back({label(mesh, m, lv.k), lv.smoothness, lv.u_max, lv.vertex_mismatch});
        if (j > 0 && !(lv.error < rep.levels[j - 1].error))
            monotone = false;
        errs += " k=" + std::to_string(lv.k) + ":" + sci(lv.error);
        if (j > 0) {
            std::ostringstream o;
            o << std::fixed << std::setprecision(2) << lv.observed_order;
            errs += "(" + o.str() + ")";
        }
    }
    const double order = rep.final_order();
    std::ostringstream o;
    o << mesh << " final order " << std::fixed << std::setprecision(3) << order << " in [" << lo << ", " << hi
      << "], monotone " << (monotone ? "yes" : "no") << ";" << errs;
    return {order >= lo && order <= hi && monotone, o.str()};
}

Outcome oracle_equivalence()
{
    struct Case {
        const char* mesh;
        int m, k;
    };
    double worst_u = 0.0, worst_res = 0.0;
    int cases = 0;
    std::string skipped;
    for (const char* mesh : {"square1", "strip2", "corner3L"})
        for (int m : {1, 2})
            for (int k = 0; k <= 2; ++k) {
                auto d = build_bilinear_domain(builtin_mesh(mesh), m - 1);
                std::optional<IetiProblem> pb;
                try {
                    pb.emplace(d, config(m, k));
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::TooCoarse)
                        throw;
                    skipped += " " + label(mesh, m, k);
                    continue;
                }
                const auto sol = pb->solve();
                record_smoothness(label(mesh, m, k), d, pb->space(), sol, m - 1);
                const auto sys = full_saddle_system(*pb);
                const auto ref = direct_saddle_solve(sys.k, sys.c, sys.f, sys.rhs);
                worst_u = std::max(worst_u, (sol.u_global - ref.u).cwiseAbs().maxCoeff() /
                                                std::max(ref.u.cwiseAbs().maxCoeff(), 1e-300));
                Vector lambda(sys.c.rows());
                lambda << sol.lambda_b, sol.lambda_xi, sol.lambda_gamma;
                const Vector r1 = sys.k * sol.u_global + sys.c.transpose() * lambda - sys.f;
                const Vector r2 = sys.c * sol.u_global - sys.rhs;
                const double res = std::max(r1.cwiseAbs().maxCoeff(), r2.size() ? r2.cwiseAbs().maxCoeff() : 0.0);
                const double scale = std::max({1.0, sys.f.cwiseAbs().maxCoeff(), sol.u_global.cwiseAbs().maxCoeff()});
                worst_res = std::max(worst_res, res / scale);
                ++cases;
            }
    std::string detail = std::to_string(cases) + " cases, max rel inf-norm diff " + sci(worst_u) +
                         ", max saddle residual/scale " + sci(worst_res);
    if (!skipped.empty())
        detail += "; rejected as too coarse:" + skipped;
    return {cases > 0 && worst_u <= 1e-8 && worst_res <= 1e-8, detail};
}

Outcome smoothness()
{
    double worst_jump = 0.0, worst_vertex = 0.0;
    std::string worst_label, offenders;
    int bad = 0;
    for (const auto& r : smooth_runs) {
        const double ratio = r.jump / std::max(r.u_max, 1e-300);
        if (ratio > worst_jump) {
            worst_jump = ratio;
            worst_label = r.label;
        }
        worst_vertex = std::max(worst_vertex, r.vertex);
        if (ratio > 1e-8 || r.vertex > 1e-7) {
            ++bad;
            offenders += " " + r.label + ":" + sci(ratio);
        }
    }
    double weakest_control = INFINITY;
    for (const auto& [mesh, m] : {std::pair{"corner3", 2}, std::pair{"star5", 3}}) {
        auto d = build_bilinear_domain(builtin_mesh(mesh), m - 1);
        auto c = config(m, 3);
        c.drop_gamma = true;
        IetiProblem pb(d, c);
        const auto sol = pb.solve();
        weakest_control = std::min(weakest_control, smoothness_probe(d, pb.space(), sol.u, m - 1) /
                                                        max_abs_value(d, pb.space(), sol.u));
    }
    const std::string detail = std::to_string(smooth_runs.size()) + " multi-patch runs, " + std::to_string(bad) +
                               " over threshold; max jump/|u|inf " + sci(worst_jump) + " (" + worst_label +
                               "), max vertex mismatch " + sci(worst_vertex) + "; ablation jump/|u|inf " +
                               sci(weakest_control) + (bad ? ";" + offenders : "");
    return {bad == 0 && !smooth_runs.empty() && weakest_control >= 1e-2, detail};
}

Outcome inverse_probes()
{
    std::mt19937 rng(17);
    std::normal_distribution<double> nd;
    double worst = 0.0, dense_err = 0.0;
    double per_m[4] = {0.0, 0.0, 0.0, 0.0};
    std::string worst_case;
    int probes = 0;
    for (const char* mesh : {"strip2", "corner3L", "corner3", "star5"})
        for (int m : {1, 2, 3}) {
            const int k = 3;
            auto d = build_bilinear_domain(builtin_mesh(mesh), m - 1);
            IetiProblem pb(d, config(m, k));
            const auto& fact = pb.factorization();
            const Matrix s = fact.assemble();
            for (int t = 0; t < 20; ++t) {
                Vector x(fact.size());
                for (Eigen::Index i = 0; i < x.size(); ++i)
                    x(i) = nd(rng);
                const double res = (s * fact.apply(x) - x).norm() / x.norm();
                if (res > worst) {
                    worst = res;
                    worst_case = label(mesh, m, k);
                }
                per_m[m] = std::max(per_m[m], res);
                ++probes;
            }
            if (std::string(mesh) == "corner3L" && m == 2) {
                const Matrix dense = Eigen::PartialPivLU<Matrix>(s).inverse();
                Matrix applied(fact.size(), fact.size());
                for (int i = 0; i < fact.size(); ++i)
                    applied.col(i) = fact.apply(Vector::Unit(fact.size(), i));
                dense_err = (applied - dense).norm() / dense.norm();
            }
        }
    return {worst <= 1e-10 && dense_err <= 1e-9,
            std::to_string(probes) + " probes on strip2, corner3L, corner3, star5 (k=3), max relative residual " +
                sci(worst) + " (" + worst_case + "); by m: " + sci(per_m[1]) + ", " + sci(per_m[2]) + ", " +
                sci(per_m[3]) + "; corner3L dense inverse rel diff " + sci(dense_err)};
}

Outcome dual_matrix_property()
{
    double worst_sym = 0.0, min_eig = INFINITY, worst_res = 0.0;
    for (const char* mesh : {"strip2", "corner3L"})
        for (int m : {1, 2}) {
            const int k = 3;
            auto d = build_bilinear_domain(builtin_mesh(mesh), m - 1);
            IetiProblem pb(d, config(m, k));
            const Matrix f = pb.dual_matrix();
            worst_sym = std::max(worst_sym, (f - f.transpose()).norm() / f.norm());
            const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (f + f.transpose()));
            min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
            const auto sol = pb.solve();
            worst_res = std::max(worst_res, sol.diagnostics.cg_residual);
            record_smoothness(label(mesh, m, k), d, pb.space(), sol, m - 1);
        }
    return {worst_sym <= 1e-12 && min_eig > 0.0 && worst_res <= 1e-10,
            "symmetry " + sci(worst_sym) + ", min eigenvalue " + sci(min_eig) + ", max CG residual " +
                sci(worst_res)};
}

Outcome constraint_dimension()
{
    struct Case {
        int m, s, p, r, k;
    };
    std::string detail;
    bool pass = true;
    int checked = 0;
    auto d0 = build_bilinear_domain(builtin_mesh("corner3L"), 0);
    auto d1 = build_bilinear_domain(builtin_mesh("corner3L"), 1);
    for (const auto& c : {Case{1, 0, 2, 1, 0}, Case{1, 0, 2, 1, 1}, Case{2, 1, 3, 1, 0}, Case{2, 1, 3, 1, 1}}) {
        const auto& d = c.s == 0 ? d0 : d1;
        ConstraintSet cs;
        try {
            cs = assemble_constraints(d, {c.p, c.r, c.k}, c.m);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::TooCoarse)
                throw;
            detail += "(" + std::to_string(c.m) + "," + std::to_string(c.s) + ") k=" + std::to_string(c.k) +
                      " too coarse; ";
            continue;
        }
        spaces_used.insert({c.p, c.r, c.k});
        const int n = cs.split.n;
        const int expected = n * n * d.patch_count() - brute_force_dimension(d, {c.p, c.r, c.k}, c.m);
        pass = pass && cs.rows() == expected;
        ++checked;
        detail += "(" + std::to_string(c.m) + "," + std::to_string(c.s) + ") k=" + std::to_string(c.k) + ": " +
                  std::to_string(cs.rows()) + " vs " + std::to_string(expected) + "; ";
    }
    return {pass && checked > 0, detail};
}

Outcome spline_properties()
{
    int spaces = 0;
    double pou = 0.0, cont = 0.0, grev = 0.0;
    bool dims = true;
    for (const auto& [p, r, k] : spaces_used) {
        const auto u = make_space(p, r, k);
        ++spaces;
        dims = dims && u.dim() == p + 1 + k * (p - r);
        for (int i = 0; i <= 200; ++i) {
            const double xi = i / 200.0;
            pou = std::max(pou, std::abs(u.eval_all(xi, 0).row(0).sum() - 1.0));
        }
        for (int j = 1; j <= k; ++j) {
            const double knot = static_cast<double>(j) / (k + 1);
            const auto left = u.eval_in_span(knot, r, j - 1), right = u.eval_in_span(knot, r, j);
            Matrix a = Matrix::Zero(r + 1, u.dim()), b = Matrix::Zero(r + 1, u.dim());
            a.middleCols(left.first, p + 1) = left.values.topRows(r + 1);
            b.middleCols(right.first, p + 1) = right.values.topRows(r + 1);
            for (int q = 0; q <= r; ++q) {
                const double sc = std::max(1.0, a.row(q).cwiseAbs().maxCoeff());
                cont = std::max(cont, (a.row(q) - b.row(q)).cwiseAbs().maxCoeff() / sc);
            }
        }
        const auto g = u.greville();
        dims = dims && static_cast<int>(g.size()) == u.dim();
        grev = std::max({grev, std::abs(g.front()), std::abs(g.back() - 1.0)});
    }
    return {dims && pou <= 1e-14 && cont <= 1e-10 && grev <= 1e-14,
            std::to_string(spaces) + " spaces; dimension formula " + (dims ? "ok" : "violated") +
                ", partition of unity " + sci(pou) + ", C^r knot jump " + sci(cont) + ", Greville endpoints " +
                sci(grev)};
}

}  // namespace

int main()
{
    struct Criterion {
        int id;
        double limit;  // seconds, 0: none
        std::function<Outcome()> run;
        Outcome result;
        double seconds = 0.0;
    };
    std::vector<Criterion> list = {
        {1, 60, rank_spot_checks},
        {2, 180, [] { return convergence("corner3", 2, 3, 4, 1.7, 2.3); }},
        {3, 300, [] { return convergence("star5", 3, 1, 3, 2.6, 3.4); }},
        {4, 120, oracle_equivalence},
        {6, 0, inverse_probes},
        {7, 0, dual_matrix_property},
        {8, 0, constraint_dimension},
        {9, 0, spline_properties},
        {5, 0, smoothness},
    };
    for (auto& c : list) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.result = c.run();
        } catch (const std::exception& e) {
            c.result = {false, std::string("exception: ") + e.what()};
        }
        c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit > 0 && c.seconds > c.limit) {
            c.result.pass = false;
            c.result.detail += "; runtime limit " + std::to_string(static_cast<int>(c.limit)) + " s exceeded";
        }
    }
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    bool all = true;
    for (const auto& c : list) {
        all = all && c.result.pass;
        std::cout << "criterion " << c.id << ": " << (c.result.pass ? "PASS" : "FAIL") << "  [" << std::fixed
                  << std::setprecision(1) << c.seconds << " s] " << c.result.detail << '\n';
    }
    return all ? 0 : 1;
}

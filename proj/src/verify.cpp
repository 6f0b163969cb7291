#include "ieti/verify.hpp"

#include "ieti/error.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace ieti {

namespace {

double falling(int n, int k)
{
    double out = 1.0;
    for (int i = 0; i < k; ++i)
        out *= n - i;
    return out;
}

struct Monomial {
    double coef;
    int i, j;
};

Manufactured polynomial(const std::string& name, std::vector<Monomial> terms)
{
    return {name, [terms](double x, double y, int a, int b) {
                double out = 0.0;
                for (const auto& t : terms)
                    if (t.i >= a && t.j >= b)
                        out += t.coef * falling(t.i, a) * falling(t.j, b) * std::pow(x, t.i - a) * std::pow(y, t.j - b);
                return out;
            }};
}

template <class Fn>
void for_each_point(const MultiPatchDomain& domain, const TensorSpace& space, int q_order, Fn&& fn)
{
    const QuadratureRule quad = make_quadrature(space, q_order);
    for (int pi = 0; pi < domain.patch_count(); ++pi)
        for (int a = 0; a < quad.points_1d(); ++a)
            for (int b = 0; b < quad.points_1d(); ++b) {
                const double xi1 = quad.nodes[a], xi2 = quad.nodes[b];
                const double w = quad.weights[a] * quad.weights[b] * std::abs(domain.patch(pi).det_jacobian(xi1, xi2));
                fn(pi, xi1, xi2, w);
            }
}

}  // namespace

ScalarField Manufactured::rhs(int m) const
{
    auto d = partial;
    return [d, m](double x, double y) {
        double out = 0.0;
        for (int j = 0; j <= m; ++j)
            out += binomial(m, j) * d(x, y, 2 * j, 2 * (m - j));
        return (m % 2 ? -1.0 : 1.0) * out;
    };
}

Vector Manufactured::partials(double x, double y, int d) const
{
    Vector out(multi_index_count(d));
    for (int o = 0; o <= d; ++o)
        for (int b = 0; b <= o; ++b)
            out(multi_index(o - b, b)) = partial(x, y, o - b, b);
    return out;
}

Manufactured manufactured(const std::string& name)
{
    constexpr double half_pi = 1.5707963267948966;
    if (name == "cos_sin")
        return {name, [](double x, double y, int a, int b) {
                    return std::cos(x + a * half_pi) * std::sin(y + b * half_pi);
                }};
    if (name == "zero")
        return {name, [](double, double, int, int) { return 0.0; }};
    if (name == "poly2")
        return polynomial(name, {{1.0, 0, 0}, {1.0, 2, 0}, {-1.0, 1, 1}, {2.0, 0, 2}});
    if (name == "poly3")
        return polynomial(name, {{0.5, 0, 0}, {1.0, 3, 0}, {-2.0, 1, 2}, {1.0, 0, 3}, {1.0, 1, 0}});
    throw Error(ErrorKind::ConfigError, "unknown manufactured solution '" + name + "'");
}

std::vector<std::string> manufactured_names() { return {"cos_sin", "zero", "poly2", "poly3"}; }

SolverConfig manufactured_config(const Manufactured& u, int m, int s, int p, int r, int k)
{
    SolverConfig c;
    c.m = m;
    c.s = s;
    c.p = p;
    c.r = r;
    c.k = k;
    c.f = u.rhs(m);
    c.boundary = [u](double x, double y) { return u(x, y); };
    return c;
}

SaddleSolution direct_saddle_solve(const Matrix& k, const Matrix& c, const Vector& f, const Vector& rhs)
{
    const Eigen::Index n = k.rows(), nc = c.rows();
    if (k.cols() != n || f.size() != n || rhs.size() != nc || (nc && c.cols() != n))
        throw Error(ErrorKind::DimensionMismatch, "saddle system blocks do not fit");
    Matrix a = Matrix::Zero(n + nc, n + nc);
    a.topLeftCorner(n, n) = k;
    if (nc) {
        a.bottomLeftCorner(nc, n) = c;
        a.topRightCorner(n, nc) = c.transpose();
    }
    Vector b(n + nc);
    b << f, rhs;
    const Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible())
        throw Error(ErrorKind::SingularSystem, "saddle matrix rank " + std::to_string(lu.rank()) + " of " +
                                                   std::to_string(a.rows()));
    const Vector z = lu.solve(b);
    SaddleSolution out;
    out.u = z.head(n);
    out.lambda = z.tail(nc);
    out.scale = std::max({1.0, f.size() ? f.cwiseAbs().maxCoeff() : 0.0, out.u.size() ? out.u.cwiseAbs().maxCoeff() : 0.0});
    out.residual = (a * z - b).cwiseAbs().maxCoeff();
    return out;
}

SaddleSystem full_saddle_system(const IetiProblem& problem)
{
    const auto& split = problem.split();
    const auto& cs = problem.constraints();
    const int nn = split.n * split.n, nt = split.total();
    SaddleSystem sys;
    sys.k = Matrix::Zero(nt, nt);
    sys.f = Vector::Zero(nt);
    for (int i = 0; i < split.patches; ++i) {
        sys.k.block(i * nn, i * nn, nn, nn) = Matrix(problem.patches()[i].stiffness);
        sys.f.segment(i * nn, nn) = problem.patches()[i].load;
    }
    const bool gamma = !problem.config().drop_gamma;
    const Eigen::Index nc = split.num_b + cs.c_xi.rows() + (gamma ? cs.c_gamma.rows() : 0);
    sys.c = Matrix::Zero(nc, nt);
    sys.rhs = Vector::Zero(nc);
    for (int i = 0; i < split.patches; ++i)
        for (int f : split.bnd[i]) {
            const int row = split.position[i][f];
            sys.c(row, split.global(i, f)) = 1.0;
            sys.rhs(row) = problem.boundary_values()(row);
        }
    sys.c.middleRows(split.num_b, cs.c_xi.rows()) = Matrix(cs.c_xi);
    if (gamma)
        sys.c.bottomRows(cs.c_gamma.rows()) = Matrix(cs.c_gamma);
    return sys;
}

ErrorNorms solution_error(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u,
                          const Manufactured& exact, int m, int q_order)
{
    const Matrix op = polyharmonic_operator(m);
    double num = 0.0, den = 0.0, num0 = 0.0, den0 = 0.0;
    for_each_point(domain, space, q_order > 0 ? q_order : space.factor().degree() + 3,
                   [&](int pi, double xi1, double xi2, double w) {
                       const Point x = domain.patch(pi)(xi1, xi2);
                       const Vector ex = exact.partials(x.x(), x.y(), m);
                       const Vector uh = physical_partials(domain.patch(pi), space, u[pi], xi1, xi2, m);
                       num += w * (op * (ex - uh)).squaredNorm();
                       den += w * (op * ex).squaredNorm();
                       num0 += w * (ex(0) - uh(0)) * (ex(0) - uh(0));
                       den0 += w * ex(0) * ex(0);
                   });
    if (!(std::sqrt(den) >= 1e-14))
        throw Error(ErrorKind::ZeroDenominator, "exact solution has vanishing seminorm");
    ErrorNorms out;
    out.seminorm = std::sqrt(num / den);
    out.l2 = den0 > 1e-28 ? std::sqrt(num0 / den0) : std::sqrt(num0);
    return out;
}

double seminorm_error(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u,
                      const Manufactured& exact, int m, int q_order)
{
    return solution_error(domain, space, u, exact, m, q_order).seminorm;
}

double smoothness_probe(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u,
                        int s, int samples)
{
    double jump = 0.0;
    for (const auto& edge : domain.inner_edges())
        for (int i = 0; i < samples; ++i) {
            const double t = samples > 1 ? static_cast<double>(i) / (samples - 1) : 0.5;
            Vector d[2];
            for (int side = 0; side < 2; ++side) {
                const auto& adj = edge.sides[side];
                const auto xi = adj.view().to_patch(0.0, t);
                d[side] = physical_partials(domain.patch(adj.patch), space, u[adj.patch], xi[0], xi[1], s);
            }
            jump = std::max(jump, (d[0] - d[1]).cwiseAbs().maxCoeff());
        }
    return jump;
}

double vertex_jet_mismatch(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u)
{
    const int d = 2 * domain.smoothness();
    double out = 0.0;
    for (int v : domain.inner_vertices()) {
        const auto& patches = domain.vertices()[v].patches;
        std::vector<Vector> jets;
        for (int pi : patches) {
            const auto xi = domain.corner_of(pi, v);
            jets.push_back(physical_partials(domain.patch(pi), space, u[pi], xi[0], xi[1], d));
        }
        for (std::size_t l = 1; l < jets.size(); ++l)
            out = std::max(out, (jets[l] - jets[0]).cwiseAbs().maxCoeff());
    }
    return out;
}

double max_abs_value(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u,
                     int samples)
{
    double out = 0.0;
    for (int pi = 0; pi < domain.patch_count(); ++pi)
        for (int a = 0; a < samples; ++a)
            for (int b = 0; b < samples; ++b) {
                const double xi1 = static_cast<double>(a) / (samples - 1), xi2 = static_cast<double>(b) / (samples - 1);
                out = std::max(out, std::abs(physical_partials(domain.patch(pi), space, u[pi], xi1, xi2, 0)(0)));
            }
    return out;
}

int rank_deficiency(const GeometryMap& patch, int m, int p, int r, int k)
{
    const TensorSpace space(make_space(p, r, k));
    const auto quad = make_quadrature(space, p + 2);
    const Matrix kd(local_stiffness(patch, space, m, quad));
    return static_cast<int>(kd.rows() - numerical_rank(kd, 1e-8));
}

GeometryMap random_bilinear_patch(std::uint32_t seed)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.25, 0.25);
    const Point c[4] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    Point q[4];
    for (int i = 0; i < 4; ++i)
        q[i] = c[i] + Point(jitter(rng), jitter(rng));
    return bilinear_patch(q[0], q[1], q[2], q[3]);
}

std::vector<RankStudyRow> rank_deficiency_study(int m, int p_max, const std::vector<int>& ks, int random_patches,
                                                std::uint32_t seed)
{
    std::vector<std::pair<std::string, GeometryMap>> patches;
    patches.emplace_back("identity", bilinear_patch({0, 0}, {1, 0}, {1, 1}, {0, 1}));
    for (int i = 0; i < random_patches; ++i)
        patches.emplace_back("random" + std::to_string(i), random_bilinear_patch(seed + i));
    std::vector<RankStudyRow> rows;
    for (int k : ks)
        for (int p = std::max(m, 1); p <= p_max; ++p)
            for (int r = std::max(m - 1, 0); r <= p - 1; ++r)
                for (const auto& pt : patches) {
                    RankStudyRow row;
                    row.m = m;
                    row.p = p;
                    row.r = r;
                    row.k = k;
                    row.patch = pt.first;
                    const int n = p + 1 + k * (p - r);
                    row.n2 = n * n;
                    row.bound = 2 * p + m;
                    rows.push_back(row);
                }
    parallel_for(static_cast<int>(rows.size()), [&](int i) {
        auto& row = rows[i];
        const auto& g = patches[i % patches.size()].second;
        row.deficiency = rank_deficiency(g, row.m, row.p, row.r, row.k);
    });
    return rows;
}

ConvergenceReport convergence_study(const MultiPatchDomain& domain, const SolverConfig& config,
                                    const Manufactured& exact, int levels)
{
    if (levels < 1)
        throw Error(ErrorKind::ConfigError, "convergence study needs at least 1 level");
    ConvergenceReport rep;
    rep.m = config.m;
    rep.solution = exact.name;
    for (int j = 0; j < levels; ++j) {
        const auto t0 = std::chrono::steady_clock::now();
        SolverConfig c = config;
        c.k = (1 << j) * (config.k + 1) - 1;
        IetiProblem pb(domain, c);
        const auto sol = pb.solve();
        ConvergenceLevel lv;
        lv.k = c.k;
        lv.h = 1.0 / (c.k + 1);
        lv.dof = pb.split().total();
        const auto err = solution_error(domain, pb.space(), sol.u, exact, c.m);
        lv.error = err.seminorm;
        lv.l2_error = err.l2;
        lv.cg_iterations = sol.diagnostics.cg_iterations;
        lv.smoothness = smoothness_probe(domain, pb.space(), sol.u, c.s);
        lv.vertex_mismatch = vertex_jet_mismatch(domain, pb.space(), sol.u);
        lv.u_max = max_abs_value(domain, pb.space(), sol.u);
        lv.observed_order = rep.levels.empty() ? std::numeric_limits<double>::quiet_NaN()
                                               : std::log2(rep.levels.back().error / lv.error);
        lv.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rep.levels.push_back(lv);
    }
    return rep;
}

Matrix uneliminated_system(const MultiPatchDomain& d, const DiscreteSpace& sp, int m)
{
    const auto u = make_space(sp.p, sp.r, sp.k);
    const int n = u.dim(), s = d.smoothness();
    const auto split = split_dofs(d, n, m, s);
    const auto es = edge_spline_spaces(u, s);
    int nd = 0;
    for (const auto& e : es)
        nd += e.dim();
    const int ne = static_cast<int>(d.inner_edges().size());
    const int cols = split.total() + ne * nd;
    std::vector<Vector> rows;
    const auto g = u.greville();
    for (int e = 0; e < ne; ++e) {
        const auto& edge = d.inner_edges()[e];
        for (int t = 0; t < 2; ++t) {
            const auto sym = edge.sides[t].view();
            for (int l = 0; l <= s; ++l)
                for (int j = 0; j < n; ++j) {
                    const auto gr = gamma_collocation_row(u, es, edge.gluing.alpha[t], edge.gluing.beta[t], l, g[j]);
                    Vector r = Vector::Zero(cols);
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b)
                            r(split.global(edge.sides[t].patch, sym.patch_index(a, b, n))) += gr.patch(a * n + b);
                    r.segment(split.total() + e * nd, nd) = gr.d;
                    rows.push_back(r);
                }
        }
    }
    const TensorSpace ts(u);
    for (int v : d.inner_vertices()) {
        const auto vj = build_vertex_conditions(d, split, ts, v);
        for (std::size_t l = 1; l < vj.patches.size(); ++l)
            for (Eigen::Index q = 0; q < vj.jet[l].rows(); ++q) {
                Vector r = Vector::Zero(cols);
                r.segment(vj.patches[l - 1] * n * n, n * n) += vj.jet[l - 1].row(q).transpose();
                r.segment(vj.patches[l] * n * n, n * n) -= vj.jet[l].row(q).transpose();
                rows.push_back(r);
            }
    }
    Matrix a(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        a.row(i) = rows[i].transpose() / std::max(1e-300, rows[i].cwiseAbs().maxCoeff());
    return a;
}

int brute_force_dimension(const MultiPatchDomain& d, const DiscreteSpace& sp, int m)
{
    const Matrix smooth = uneliminated_system(d, sp, m);
    const auto split = split_dofs(d, make_space(sp.p, sp.r, sp.k).dim(), m, d.smoothness());
    Matrix a = Matrix::Zero(split.num_b + smooth.rows(), smooth.cols());
    int row = 0;
    for (int pi = 0; pi < split.patches; ++pi)
        for (int f : split.bnd[pi])
            a(row++, split.global(pi, f)) = 1.0;
    a.bottomRows(smooth.rows()) = smooth;
    return static_cast<int>(a.cols() - numerical_rank(a));
}

}  // namespace ieti

#include "ieti/assembly.hpp"

#include "ieti/error.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace ieti {

double binomial(int n, int k)
{
    if (k < 0 || k > n)
        return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

namespace {

double factorial(int n)
{
    double r = 1.0;
    for (int i = 2; i <= n; ++i)
        r *= i;
    return r;
}

// truncated bivariate polynomial, coefficients indexed by multi_index
struct TruncPoly {
    int d;
    std::vector<double> c;
    explicit TruncPoly(int order) : d(order), c(multi_index_count(order), 0.0) {}

    TruncPoly operator*(const TruncPoly& o) const
    {
        TruncPoly r(d);
        for (int i = 0; i < static_cast<int>(c.size()); ++i) {
            if (c[i] == 0.0)
                continue;
            const auto [a1, b1] = multi_index_pair(i);
            for (int a2 = 0; a1 + a2 <= d; ++a2)
                for (int b2 = 0; a1 + a2 + b1 + b2 <= d; ++b2)
                    r.c[multi_index(a1 + a2, b1 + b2)] += c[i] * o.c[multi_index(a2, b2)];
        }
        return r;
    }
};

}  // namespace

void gauss_legendre(int q, std::vector<double>& nodes, std::vector<double>& weights)
{
    nodes.assign(q, 0.0);
    weights.assign(q, 0.0);
    const double pi = std::acos(-1.0);
    for (int i = 0; i < q; ++i) {
        double x = std::cos(pi * (i + 0.75) / (q + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= q; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = q * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        // map [-1,1] -> [0,1], ascending
        nodes[q - 1 - i] = 0.5 * (x + 1.0);
        weights[q - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
}

QuadratureRule make_quadrature(const TensorSpace& space, int q_order)
{
    if (q_order < 1)
        throw Error(ErrorKind::ConfigError, "quadrature order must be positive");
    QuadratureRule rule;
    rule.q_order = q_order;
    std::vector<double> x, w;
    gauss_legendre(q_order, x, w);
    const int spans = space.factor().span_count();
    const double h = 1.0 / spans;
    for (int s = 0; s < spans; ++s)
        for (int q = 0; q < q_order; ++q) {
            rule.nodes.push_back((s + x[q]) * h);
            rule.weights.push_back(w[q] * h);
            rule.span.push_back(s);
        }
    return rule;
}

DerivativeTransform physical_derivatives(const GeometryMap& g, double xi1, double xi2, int d)
{
    const auto jet = g.jet(xi1, xi2, std::max(d, 1));
    Eigen::Matrix2d jac;
    jac.col(0) = jet[multi_index(1, 0)];
    jac.col(1) = jet[multi_index(0, 1)];
    DerivativeTransform t;
    t.order = d;
    t.det_jacobian = jac.determinant();
    if (std::abs(t.det_jacobian) < kRegularityFloor)
        throw Error(ErrorKind::SingularJacobian, "det J below floor at (" + std::to_string(xi1) + ", " +
                                                     std::to_string(xi2) + ")");
    const int nc = multi_index_count(d);
    // Taylor polynomials of G - G(xi) in the parametric offset
    TruncPoly x(d), y(d);
    for (int i = 1; i < nc; ++i) {
        const auto [a, b] = multi_index_pair(i);
        const double f = factorial(a) * factorial(b);
        x.c[i] = jet[i](0) / f;
        y.c[i] = jet[i](1) / f;
    }
    std::vector<TruncPoly> xp(d + 1, TruncPoly(d)), yp(d + 1, TruncPoly(d));
    xp[0].c[0] = yp[0].c[0] = 1.0;
    for (int i = 1; i <= d; ++i) {
        xp[i] = xp[i - 1] * x;
        yp[i] = yp[i - 1] * y;
    }
    // column beta: parametric partials of (x-x0)^b1 (y-y0)^b2 / (b1! b2!)
    Matrix a = Matrix::Zero(nc, nc);
    for (int beta = 0; beta < nc; ++beta) {
        const auto [b1, b2] = multi_index_pair(beta);
        TruncPoly pb = xp[b1] * yp[b2];
        const double s = factorial(b1) * factorial(b2);
        for (int alpha = 0; alpha < nc; ++alpha) {
            const auto [a1, a2] = multi_index_pair(alpha);
            a(alpha, beta) = factorial(a1) * factorial(a2) * pb.c[alpha] / s;
        }
    }
    // block lower triangular by total order; diagonal blocks are symmetric powers of J^T
    t.map = a.partialPivLu().inverse();
    return t;
}

Matrix polyharmonic_operator(int m)
{
    const int nc = multi_index_count(m);
    if (m % 2 == 0) {
        Matrix op = Matrix::Zero(1, nc);
        const int k = m / 2;
        for (int i = 0; i <= k; ++i)
            op(0, multi_index(2 * i, m - 2 * i)) += binomial(k, i);
        return op;
    }
    Matrix op = Matrix::Zero(2, nc);
    const int k = (m - 1) / 2;
    for (int i = 0; i <= k; ++i) {
        op(0, multi_index(2 * i + 1, 2 * k - 2 * i)) += binomial(k, i);
        op(1, multi_index(2 * i, 2 * k - 2 * i + 1)) += binomial(k, i);
    }
    return op;
}

namespace {

// iterate over quadrature points span-square by span-square
template <class Fn>
void for_each_element(const TensorSpace& space, const QuadratureRule& quad, int max_deriv, Fn&& fn)
{
    const auto& u = space.factor();
    const int nq = quad.points_1d();
    std::vector<UnivariateSpace::Local> evals(nq);
    for (int q = 0; q < nq; ++q)
        evals[q] = u.eval_in_span(quad.nodes[q], max_deriv, quad.span[q]);
    const int qo = quad.q_order;
    for (int s1 = 0; s1 < u.span_count(); ++s1)
        for (int s2 = 0; s2 < u.span_count(); ++s2)
            fn(s1, s2, [&, s1, s2](auto&& point_fn) {
                for (int q1 = s1 * qo; q1 < (s1 + 1) * qo; ++q1)
                    for (int q2 = s2 * qo; q2 < (s2 + 1) * qo; ++q2)
                        point_fn(quad.nodes[q1], quad.nodes[q2], quad.weights[q1] * quad.weights[q2], evals[q1],
                                 evals[q2]);
            });
}

}  // namespace

SparseMatrix local_stiffness(const GeometryMap& g, const TensorSpace& space, int m, const QuadratureRule& quad)
{
    const int p = space.factor().degree();
    if (m < 1 || p < m)
        throw Error(ErrorKind::ConfigError, "stiffness needs 1 <= m <= p");
    const int nl = (p + 1) * (p + 1);
    const int nc = multi_index_count(m);
    const Matrix op = polyharmonic_operator(m);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(space.factor().span_count()) * space.factor().span_count() * nl * nl);
    Matrix param(nc, nl);
    for_each_element(space, quad, m, [&](int, int, auto&& points) {
        Matrix ke = Matrix::Zero(nl, nl);
        int f1 = 0, f2 = 0;
        points([&](double x1, double x2, double w, const UnivariateSpace::Local& e1,
                   const UnivariateSpace::Local& e2) {
            f1 = e1.first;
            f2 = e2.first;
            const auto t = physical_derivatives(g, x1, x2, m);
            for (int i1 = 0; i1 <= p; ++i1)
                for (int i2 = 0; i2 <= p; ++i2)
                    for (int c = 0; c < nc; ++c) {
                        const auto [a, b] = multi_index_pair(c);
                        param(c, i1 * (p + 1) + i2) = e1.values(a, i1) * e2.values(b, i2);
                    }
            const Matrix lv = op * (t.map * param);  // components x local functions
            ke.noalias() += (w * std::abs(t.det_jacobian)) * lv.transpose() * lv;
        });
        for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j)
                trips.emplace_back(space.flat(f1 + i / (p + 1), f2 + i % (p + 1)),
                                   space.flat(f1 + j / (p + 1), f2 + j % (p + 1)), ke(i, j));
    });
    return finalize_triplets(space.dim(), space.dim(), trips);
}

SparseMatrix local_mass(const GeometryMap& g, const TensorSpace& space, const QuadratureRule& quad)
{
    const int p = space.factor().degree();
    const int nl = (p + 1) * (p + 1);
    std::vector<Triplet> trips;
    Vector v(nl);
    for_each_element(space, quad, 0, [&](int, int, auto&& points) {
        Matrix me = Matrix::Zero(nl, nl);
        int f1 = 0, f2 = 0;
        points([&](double x1, double x2, double w, const UnivariateSpace::Local& e1,
                   const UnivariateSpace::Local& e2) {
            f1 = e1.first;
            f2 = e2.first;
            const double det = std::abs(g.det_jacobian(x1, x2));
            for (int i1 = 0; i1 <= p; ++i1)
                for (int i2 = 0; i2 <= p; ++i2)
                    v(i1 * (p + 1) + i2) = e1.values(0, i1) * e2.values(0, i2);
            me.noalias() += (w * det) * v * v.transpose();
        });
        for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j)
                trips.emplace_back(space.flat(f1 + i / (p + 1), f2 + i % (p + 1)),
                                   space.flat(f1 + j / (p + 1), f2 + j % (p + 1)), me(i, j));
    });
    return finalize_triplets(space.dim(), space.dim(), trips);
}

Vector local_load(const GeometryMap& g, const TensorSpace& space, const ScalarField& f, const QuadratureRule& quad)
{
    const int p = space.factor().degree();
    Vector load = Vector::Zero(space.dim());
    for_each_element(space, quad, 0, [&](int, int, auto&& points) {
        points([&](double x1, double x2, double w, const UnivariateSpace::Local& e1,
                   const UnivariateSpace::Local& e2) {
            const Point x = g(x1, x2);
            const double fw = f(x.x(), x.y()) * w * std::abs(g.det_jacobian(x1, x2));
            if (fw == 0.0)
                return;
            for (int i1 = 0; i1 <= p; ++i1)
                for (int i2 = 0; i2 <= p; ++i2)
                    load(space.flat(e1.first + i1, e2.first + i2)) += fw * e1.values(0, i1) * e2.values(0, i2);
        });
    });
    return load;
}

std::vector<int> boundary_ring_indices(int n, int m, const std::array<bool, 4>& sides)
{
    std::vector<int> ring;
    for (int j1 = 0; j1 < n; ++j1)
        for (int j2 = 0; j2 < n; ++j2)
            if ((sides[0] && j1 < m) || (sides[1] && j1 >= n - m) || (sides[2] && j2 < m) ||
                (sides[3] && j2 >= n - m))
                ring.push_back(j1 * n + j2);
    return ring;
}

BoundaryFitBlock boundary_mass_and_fit_load(const GeometryMap& g, const TensorSpace& space, int m,
                                            const std::array<bool, 4>& boundary_sides, const ScalarField& target,
                                            const QuadratureRule& quad)
{
    if (!(boundary_sides[0] || boundary_sides[1] || boundary_sides[2] || boundary_sides[3]))
        throw Error(ErrorKind::NotBoundaryPatch, "patch has no side on the domain boundary");
    BoundaryFitBlock out;
    const int n = space.n();
    out.ring = boundary_ring_indices(n, m, boundary_sides);
    std::vector<int> pos(space.dim(), -1);
    for (int i = 0; i < static_cast<int>(out.ring.size()); ++i)
        pos[out.ring[i]] = i;
    std::vector<int> rest;
    for (int j = 0; j < space.dim(); ++j)
        if (pos[j] < 0)
            rest.push_back(j);

    const SparseMatrix mass = local_mass(g, space, quad);
    const Vector load = local_load(g, space, target, quad);
    const int nr = static_cast<int>(out.ring.size()), ni = static_cast<int>(rest.size());
    std::vector<int> ipos(space.dim(), -1);
    for (int i = 0; i < ni; ++i)
        ipos[rest[i]] = i;

    Matrix mrr = Matrix::Zero(nr, nr);
    Matrix mir = Matrix::Zero(ni, nr);
    std::vector<Triplet> tii;
    for (int k = 0; k < mass.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(mass, k); it; ++it) {
            const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
            if (pos[r] >= 0 && pos[c] >= 0)
                mrr(pos[r], pos[c]) = it.value();
            else if (ipos[r] >= 0 && pos[c] >= 0)
                mir(ipos[r], pos[c]) = it.value();
            else if (ipos[r] >= 0 && ipos[c] >= 0)
                tii.emplace_back(ipos[r], ipos[c], it.value());
        }
    Vector br(nr), bi(ni);
    for (int i = 0; i < nr; ++i)
        br(i) = load(out.ring[i]);
    for (int i = 0; i < ni; ++i)
        bi(i) = load(rest[i]);
    if (ni == 0) {
        out.mass = mrr;
        out.load = br;
        return out;
    }
    SparseMatrix mii = finalize_triplets(ni, ni, tii);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(mii);
    if (ldlt.info() != Eigen::Success)
        throw Error(ErrorKind::SingularMatrix, "interior mass matrix factorization failed");
    const Matrix x = ldlt.solve(mir);
    const Vector y = ldlt.solve(bi);
    out.mass = mrr - mir.transpose() * x;
    out.mass = 0.5 * (out.mass + out.mass.transpose()).eval();
    out.load = br - mir.transpose() * y;
    return out;
}

BasisPartials physical_basis_partials(const GeometryMap& g, const TensorSpace& space, double xi1, double xi2, int d)
{
    const int p = space.factor().degree();
    const auto loc = space.eval(xi1, xi2, d);
    const auto t = physical_derivatives(g, xi1, xi2, d);
    const int nc = multi_index_count(d);
    const int nl = (p + 1) * (p + 1);
    Matrix param(nc, nl);
    BasisPartials out;
    out.index.resize(nl);
    for (int i1 = 0; i1 <= p; ++i1)
        for (int i2 = 0; i2 <= p; ++i2) {
            const int l = i1 * (p + 1) + i2;
            out.index[l] = space.flat(loc.first[0] + i1, loc.first[1] + i2);
            for (int c = 0; c < nc; ++c) {
                const auto [a, b] = multi_index_pair(c);
                param(c, l) = loc.partial(a, b, i1, i2);
            }
        }
    out.values = (t.map * param).transpose();
    return out;
}

Vector physical_partials(const GeometryMap& g, const TensorSpace& space, const Vector& u, double xi1, double xi2,
                         int d)
{
    const auto bp = physical_basis_partials(g, space, xi1, xi2, d);
    Vector out = Vector::Zero(multi_index_count(d));
    for (int l = 0; l < static_cast<int>(bp.index.size()); ++l)
        out += u(bp.index[l]) * bp.values.row(l).transpose();
    return out;
}

}  // namespace ieti

#include <doctest.h>

#include "ieti/assembly.hpp"
#include "ieti/error.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace ieti;

namespace {

// bivariate Taylor polynomial truncated at total order d; c(a, b) multiplies t1^a t2^b
struct Taylor {
    int d = 0;
    Matrix c;
    explicit Taylor(int order) : d(order), c(Matrix::Zero(order + 1, order + 1)) {}
    static Taylor constant(int order, double v)
    {
        Taylor t(order);
        t.c(0, 0) = v;
        return t;
    }
    Taylor operator+(const Taylor& o) const
    {
        Taylor r(d);
        r.c = c + o.c;
        return r;
    }
    Taylor operator-(const Taylor& o) const
    {
        Taylor r(d);
        r.c = c - o.c;
        return r;
    }
    Taylor operator*(double s) const
    {
        Taylor r(d);
        r.c = c * s;
        return r;
    }
    Taylor operator*(const Taylor& o) const
    {
        Taylor r(d);
        for (int a = 0; a <= d; ++a)
            for (int b = 0; a + b <= d; ++b)
                for (int e = 0; e <= a; ++e)
                    for (int f = 0; f <= b; ++f)
                        r.c(a, b) += c(e, f) * o.c(a - e, b - f);
        return r;
    }
    Taylor reciprocal() const
    {
        // 1/(c0 (1 + q)) = (1/c0) sum (-q)^k
        const double c0 = c(0, 0);
        Taylor q = *this * (1.0 / c0);
        q.c(0, 0) = 0.0;
        Taylor sum = constant(d, 1.0), term = constant(d, 1.0);
        for (int k = 1; k <= d; ++k) {
            term = term * q * -1.0;
            sum = sum + term;
        }
        return sum * (1.0 / c0);
    }
    Taylor diff(int dir) const
    {
        Taylor r(d);
        for (int a = 0; a <= d; ++a)
            for (int b = 0; a + b <= d; ++b) {
                if (dir == 0 && a + 1 + b <= d) r.c(a, b) = (a + 1) * c(a + 1, b);
                if (dir == 1 && a + b + 1 <= d) r.c(a, b) = (b + 1) * c(a, b + 1);
            }
        return r;
    }
};

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// literal psi-recursion stiffness (k = 0 spaces only), Gauss rule with p+3 points
Matrix psi_stiffness(const GeometryMap& g, const TensorSpace& space, int m)
{
    const int p = space.factor().degree();
    const int n = space.n();
    std::vector<double> nodes, weights;
    gauss_legendre(p + 3, nodes, weights);
    Matrix k = Matrix::Zero(n * n, n * n);
    for (std::size_t q1 = 0; q1 < nodes.size(); ++q1)
        for (std::size_t q2 = 0; q2 < nodes.size(); ++q2) {
            const double x1 = nodes[q1], x2 = nodes[q2], w = weights[q1] * weights[q2];
            const auto jet = g.jet(x1, x2, m + 1);
            // Jacobian entries J(i, j) = d x_i / d xi_j as Taylor series
            Taylor jac[2][2] = {{Taylor(m), Taylor(m)}, {Taylor(m), Taylor(m)}};
            for (int idx = 0; idx < multi_index_count(m); ++idx) {
                auto [a, b] = multi_index_pair(idx);
                const double f = factorial(a) * factorial(b);
                for (int i = 0; i < 2; ++i) {
                    jac[i][0].c(a, b) = jet[multi_index(a + 1, b)](i) / f;
                    jac[i][1].c(a, b) = jet[multi_index(a, b + 1)](i) / f;
                }
            }
            Taylor det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            const double sgn = det.c(0, 0) > 0 ? 1.0 : -1.0;
            Taylor adet = det * sgn;
            // J^T J
            Taylor g11 = jac[0][0] * jac[0][0] + jac[1][0] * jac[1][0];
            Taylor g12 = jac[0][0] * jac[0][1] + jac[1][0] * jac[1][1];
            Taylor g22 = jac[0][1] * jac[0][1] + jac[1][1] * jac[1][1];
            // N = |det| (J^T J)^{-1} = adj(J^T J) / |det|
            Taylor inv = adet.reciprocal();
            Taylor n11 = g22 * inv, n12 = g12 * inv * -1.0, n22 = g11 * inv;

            auto e1 = space.factor().eval_all(x1, std::min(m, p));
            auto e2 = space.factor().eval_all(x2, std::min(m, p));
            std::vector<std::vector<double>> psi(n * n);
            for (int j1 = 0; j1 < n; ++j1)
                for (int j2 = 0; j2 < n; ++j2) {
                    Taylor phi(m);
                    for (int a = 0; a <= std::min(m, p); ++a)
                        for (int b = 0; a + b <= m && b <= p; ++b)
                            phi.c(a, b) = e1(a, j1) * e2(b, j2) / (factorial(a) * factorial(b));
                    std::vector<Taylor> v{phi};  // scalar or vector (2 entries)
                    for (int l = 1; l <= m; ++l) {
                        if (l % 2 == 1) {
                            v = {v[0].diff(0), v[0].diff(1)};
                        } else {
                            Taylor f1 = n11 * v[0] + n12 * v[1];
                            Taylor f2 = n12 * v[0] + n22 * v[1];
                            v = {(f1.diff(0) + f2.diff(1)) * inv};
                        }
                    }
                    for (auto& t : v) psi[j1 * n + j2].push_back(t.c(0, 0));
                }
            for (int a = 0; a < n * n; ++a)
                for (int b = 0; b < n * n; ++b) {
                    double val;
                    if (m % 2 == 0) {
                        val = adet.c(0, 0) * psi[a][0] * psi[b][0];
                    } else {
                        val = psi[a][0] * (n11.c(0, 0) * psi[b][0] + n12.c(0, 0) * psi[b][1]) +
                              psi[a][1] * (n12.c(0, 0) * psi[b][0] + n22.c(0, 0) * psi[b][1]);
                    }
                    k(a, b) += w * val;
                }
        }
    return k;
}

GeometryMap identity_patch() { return bilinear_patch({0, 0}, {1, 0}, {1, 1}, {0, 1}); }

GeometryMap random_bilinear(std::mt19937& rng)
{
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    return bilinear_patch({u(rng), u(rng)}, {1 + u(rng), u(rng)}, {1 + u(rng), 1 + u(rng)}, {u(rng), 1 + u(rng)});
}

int deficiency(const Matrix& k) { return static_cast<int>(k.rows() - numerical_rank(k, 1e-8)); }

}  // namespace

TEST_CASE("make_quadrature")
{
    TensorSpace one(make_space(1, 0, 0));
    auto q1 = make_quadrature(one, 1);
    REQUIRE(q1.points_1d() == 1);
    CHECK(q1.nodes[0] == doctest::Approx(0.5));
    CHECK(q1.weights[0] == doctest::Approx(1.0));

    TensorSpace sp(make_space(3, 1, 3));
    auto q = make_quadrature(sp, 2);
    double area = 0, mom = 0;
    for (int i = 0; i < q.points_1d(); ++i)
        for (int j = 0; j < q.points_1d(); ++j) {
            const double w = q.weights[i] * q.weights[j];
            area += w;
            mom += w * q.nodes[i] * q.nodes[i] * q.nodes[j] * q.nodes[j];
        }
    CHECK(std::abs(area - 1.0) < 1e-14);
    CHECK(std::abs(mom - 1.0 / 9) < 1e-14);
}

TEST_CASE("physical_derivatives")
{
    auto id = physical_derivatives(identity_patch(), 0.3, 0.7, 3);
    CHECK((id.map - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-13);

    // (x, y) = (2 xi1, 3 xi2): phi = xi1 xi2 = x y / 6
    auto sc = bilinear_patch({0, 0}, {2, 0}, {2, 3}, {0, 3});
    auto t = physical_derivatives(sc, 0.4, 0.5, 2);
    Vector param = Vector::Zero(6);
    param(multi_index(0, 0)) = 0.2;
    param(multi_index(1, 0)) = 0.5;
    param(multi_index(0, 1)) = 0.4;
    param(multi_index(1, 1)) = 1.0;
    Vector phys = t.map * param;
    CHECK(phys(multi_index(1, 1)) == doctest::Approx(1.0 / 6));
    CHECK(phys(0) == doctest::Approx(0.2));
    // order-1 block equals J^{-T}
    Matrix jit = sc.jacobian(0.4, 0.5).inverse().transpose();
    CHECK((t.map.block(1, 1, 2, 2) - jit).cwiseAbs().maxCoeff() < 1e-14);

    // generic bilinear vs finite differences of phi o G^{-1}
    auto g = bilinear_patch({0, 0}, {1.2, 0.1}, {1.0, 1.3}, {-0.1, 0.9});
    auto phi = [](double a, double b) { return std::sin(a + 2 * b) + a * a * b; };
    auto inverse = [&](double x, double y) {
        Eigen::Vector2d xi(0.5, 0.5);
        for (int it = 0; it < 50; ++it) {
            Eigen::Vector2d r = g(xi(0), xi(1)) - Eigen::Vector2d(x, y);
            xi -= g.jacobian(xi(0), xi(1)).inverse() * r;
        }
        return xi;
    };
    auto f = [&](double x, double y) {
        auto xi = inverse(x, y);
        return phi(xi(0), xi(1));
    };
    const double a = 0.35, b = 0.6;
    auto tr = physical_derivatives(g, a, b, 3);
    // parametric partials of phi up to order 3
    Vector pp(10);
    pp(multi_index(0, 0)) = phi(a, b);
    pp(multi_index(1, 0)) = std::cos(a + 2 * b) + 2 * a * b;
    pp(multi_index(0, 1)) = 2 * std::cos(a + 2 * b) + a * a;
    pp(multi_index(2, 0)) = -std::sin(a + 2 * b) + 2 * b;
    pp(multi_index(1, 1)) = -2 * std::sin(a + 2 * b) + 2 * a;
    pp(multi_index(0, 2)) = -4 * std::sin(a + 2 * b);
    pp(multi_index(3, 0)) = -std::cos(a + 2 * b);
    pp(multi_index(2, 1)) = -2 * std::cos(a + 2 * b) + 2;
    pp(multi_index(1, 2)) = -4 * std::cos(a + 2 * b);
    pp(multi_index(0, 3)) = -8 * std::cos(a + 2 * b);
    Vector ph = tr.map * pp;
    const Point x0 = g(a, b);
    const double h = 1e-3;
    const double fxx = (f(x0.x() + h, x0.y()) - 2 * f(x0.x(), x0.y()) + f(x0.x() - h, x0.y())) / (h * h);
    const double fxy = (f(x0.x() + h, x0.y() + h) - f(x0.x() + h, x0.y() - h) - f(x0.x() - h, x0.y() + h) +
                        f(x0.x() - h, x0.y() - h)) / (4 * h * h);
    const double fx = (f(x0.x() + h, x0.y()) - f(x0.x() - h, x0.y())) / (2 * h);
    const double fxxx = (f(x0.x() + 2 * h, x0.y()) - 2 * f(x0.x() + h, x0.y()) + 2 * f(x0.x() - h, x0.y()) -
                         f(x0.x() - 2 * h, x0.y())) / (2 * h * h * h);
    CHECK(std::abs(ph(multi_index(1, 0)) - fx) <= 1e-5 * std::abs(fx));
    CHECK(std::abs(ph(multi_index(2, 0)) - fxx) <= 1e-5 * std::max(1.0, std::abs(fxx)));
    CHECK(std::abs(ph(multi_index(1, 1)) - fxy) <= 1e-5 * std::max(1.0, std::abs(fxy)));
    CHECK(std::abs(ph(multi_index(3, 0)) - fxxx) <= 1e-3 * std::max(1.0, std::abs(fxxx)));
}

TEST_CASE("stiffness: Laplace element and kernel dimensions")
{
    TensorSpace s1(make_space(1, 0, 0));
    Matrix k1 = Matrix(local_stiffness(identity_patch(), s1, 1, make_quadrature(s1, 2)));
    CHECK(k1.rowwise().sum().cwiseAbs().maxCoeff() < 1e-14);
    CHECK(k1(0, 0) == doctest::Approx(2.0 / 3));
    CHECK(k1(0, 3) == doctest::Approx(-1.0 / 3));

    TensorSpace s2(make_space(2, 1, 0));
    CHECK(deficiency(Matrix(local_stiffness(identity_patch(), s2, 2, make_quadrature(s2, 3)))) == 5);
    TensorSpace s3(make_space(3, 2, 0));
    CHECK(deficiency(Matrix(local_stiffness(identity_patch(), s3, 3, make_quadrature(s3, 4)))) == 9);
}

TEST_CASE("stiffness symmetry, PSD and rank bound")
{
    std::mt19937 rng(3);
    for (int m = 1; m <= 3; ++m)
        for (int p = m; p <= 4; ++p)
            for (int k : {0, 1}) {
                TensorSpace sp(make_space(p, p - 1, k));
                auto g = random_bilinear(rng);
                Matrix km = Matrix(local_stiffness(g, sp, m, make_quadrature(sp, p + 1)));
                const double mx = km.cwiseAbs().maxCoeff();
                CHECK((km - km.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * mx);
                Eigen::SelfAdjointEigenSolver<Matrix> es(km);
                CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
                CHECK(deficiency(km) <= 2 * p + m);
                // quadrature convergence on an affine geometry
                auto aff = bilinear_patch({0, 0}, {1.3, 0.2}, {1.6, 1.2}, {0.3, 1.0});
                Matrix ka = Matrix(local_stiffness(aff, sp, m, make_quadrature(sp, p + 1)));
                Matrix kb = Matrix(local_stiffness(aff, sp, m, make_quadrature(sp, p + 2)));
                CHECK((ka - kb).cwiseAbs().maxCoeff() <= 1e-12 * ka.cwiseAbs().maxCoeff());
            }
}

TEST_CASE("stiffness equals the literal psi-recursion")
{
    std::mt19937 rng(11);
    for (int m : {2, 3})
        for (int p = m; p <= 3; ++p) {
            TensorSpace sp(make_space(p, p - 1, 0));
            auto g = random_bilinear(rng);
            Matrix prod = Matrix(local_stiffness(g, sp, m, make_quadrature(sp, p + 3)));
            Matrix oracle = psi_stiffness(g, sp, m);
            CHECK((prod - oracle).cwiseAbs().maxCoeff() <= 1e-10 * oracle.cwiseAbs().maxCoeff());
        }
}

TEST_CASE("local_load")
{
    TensorSpace sp(make_space(3, 1, 2));
    auto q = make_quadrature(sp, 4);
    CHECK(local_load(identity_patch(), sp, [](double, double) { return 0.0; }, q).norm() == 0.0);
    CHECK(local_load(identity_patch(), sp, [](double, double) { return 1.0; }, q).sum() == doctest::Approx(1.0));
    Point a(0, 0), b(2, 0.2), c(1.8, 1.5), d(-0.2, 1.1);
    auto g = bilinear_patch(a, b, c, d);
    const double area = 0.5 * std::abs((c - a).x() * (d - b).y() - (c - a).y() * (d - b).x());
    CHECK(std::abs(local_load(g, sp, [](double, double) { return 1.0; }, q).sum() - area) <= 1e-12);
}

TEST_CASE("boundary ring and fit")
{
    auto ring = boundary_ring_indices(3, 1, {true, true, true, true});
    CHECK(ring.size() == 8);
    CHECK(std::find(ring.begin(), ring.end(), 4) == ring.end());
    CHECK(boundary_ring_indices(12, 2, {true, false, false, false}).size() == 24);

    TensorSpace sp(make_space(3, 1, 2));
    auto q = make_quadrature(sp, 4);
    auto g = bilinear_patch({0, 0}, {1.1, 0.1}, {1.0, 1.2}, {-0.1, 0.9});
    CHECK_THROWS_AS(boundary_mass_and_fit_load(g, sp, 2, {false, false, false, false},
                                               [](double, double) { return 1.0; }, q),
                    Error);
    auto zero = boundary_mass_and_fit_load(g, sp, 2, {true, true, true, true}, [](double, double) { return 0.0; }, q);
    CHECK(zero.load.norm() == 0.0);
    auto fit = boundary_mass_and_fit_load(g, sp, 2, {true, true, false, true}, [](double, double) { return 2.5; }, q);
    Vector u = fit.mass.ldlt().solve(fit.load);
    for (int i = 0; i < u.size(); ++i)
        CHECK(std::abs(u(i) - 2.5) < 1e-10);
}

#include <doctest.h>

#include "ieti/error.hpp"
#include "ieti/linalg.hpp"

#include <cmath>
#include <random>

using namespace ieti;

TEST_CASE("lu_factor solves identity, diagonal and random systems")
{
    LuFactorization id(Matrix::Identity(3, 3));
    Vector b(3);
    b << 1, 2, 3;
    CHECK((id.solve(b) - b).norm() == 0.0);

    Matrix d = Matrix::Zero(2, 2);
    d.diagonal() << 2, 4;
    Vector bd(2);
    bd << 2, 4;
    CHECK((LuFactorization(d).solve(bd) - Vector::Ones(2)).norm() < 1e-15);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    Matrix a(20, 20);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j)
            a(i, j) = u(rng) + (i == j ? 20.0 : 0.0);
    Vector xs(20);
    for (int i = 0; i < 20; ++i)
        xs(i) = u(rng);
    Vector x = LuFactorization(a).solve(Vector(a * xs));
    CHECK((x - xs).norm() < 1e-10);
    CHECK((a * x - a * xs).cwiseAbs().maxCoeff() <=
          1e-10 * (a.cwiseAbs().rowwise().sum().maxCoeff() * x.cwiseAbs().maxCoeff() + (a * xs).cwiseAbs().maxCoeff()));
}

TEST_CASE("lu_factor rejects singular matrices")
{
    Matrix a(2, 2);
    a << 1, 2, 2, 4;
    CHECK_THROWS_AS(LuFactorization{a}, Error);
}

TEST_CASE("sparse lu matches dense solve")
{
    std::vector<Triplet> t;
    for (int i = 0; i < 10; ++i) {
        t.emplace_back(i, i, 4.0);
        if (i > 0) t.emplace_back(i, i - 1, -1.0);
        if (i < 9) t.emplace_back(i, i + 1, -1.0);
    }
    t.emplace_back(0, 0, 1.0);  // duplicate summed
    SparseMatrix a = finalize_triplets(10, 10, t);
    CHECK(a.coeff(0, 0) == doctest::Approx(5.0));
    Vector b = Vector::LinSpaced(10, 1, 10);
    Vector xs = SparseLuFactorization(a).solve(b);
    Vector xd = LuFactorization(Matrix(a)).solve(b);
    CHECK((xs - xd).norm() < 1e-13);
}

TEST_CASE("numerical_rank")
{
    CHECK(numerical_rank(Matrix::Zero(4, 4)) == 0);
    CHECK(numerical_rank(Matrix::Identity(5, 5)) == 5);
    Vector u = Vector::LinSpaced(4, 1, 4), v = Vector::LinSpaced(3, -1, 2);
    CHECK(numerical_rank(u * v.transpose()) == 1);
    // permutation invariance
    Matrix a = Matrix::Random(6, 4) * Matrix::Random(4, 7);
    Matrix b = a.colwise().reverse().rowwise().reverse();
    CHECK(numerical_rank(a) == numerical_rank(b));
}

TEST_CASE("null_space_basis")
{
    CHECK(null_space_basis(Matrix::Identity(3, 3)).cols() == 0);
    Matrix z = null_space_basis(Matrix::Zero(3, 3));
    CHECK(z.cols() == 3);
    CHECK((z.transpose() * z - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    Matrix a(2, 2);
    a << 1, 1, 0, 0;
    Matrix n = null_space_basis(a);
    REQUIRE(n.cols() == 1);
    CHECK(std::abs(std::abs(n(0, 0)) - std::sqrt(0.5)) < 1e-14);
    CHECK(std::abs(n(0, 0) + n(1, 0)) < 1e-14);

    Matrix r = Matrix::Random(5, 3) * Matrix::Random(3, 9);
    Matrix k = null_space_basis(r);
    CHECK(k.cols() == 9 - numerical_rank(r));
    CHECK((r * k).cwiseAbs().maxCoeff() < 1e-10 * r.norm());
    CHECK((k.transpose() * k - Matrix::Identity(k.cols(), k.cols())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conjugate_gradient")
{
    Vector b(3);
    b << 1, 2, 3;
    auto id = conjugate_gradient([](const Vector& x) { return x; }, b, 1e-12, 10);
    CHECK(id.iterations == 1);
    CHECK((id.x - b).norm() < 1e-14);

    Vector dg(3);
    dg << 1, 2, 3;
    auto dres = conjugate_gradient([&](const Vector& x) { return Vector(dg.cwiseProduct(x)); }, b, 1e-12, 10);
    CHECK((dres.x - Vector::Ones(3)).norm() < 1e-12);

    Matrix q = Matrix::Random(50, 50);
    Matrix spd = q * q.transpose() + 50 * Matrix::Identity(50, 50);
    Vector rhs = Vector::Random(50);
    auto r = conjugate_gradient([&](const Vector& x) { return Vector(spd * x); }, rhs, 1e-12, 50);
    CHECK(r.iterations <= 50);
    CHECK((spd * r.x - rhs).norm() <= 1e-12 * rhs.norm());

    CHECK_THROWS_AS(conjugate_gradient([&](const Vector& x) { return Vector(spd * x); }, rhs, 1e-14, 1), Error);
}

TEST_CASE("conjugate_gradient terminates in n steps on an ill-conditioned matrix")
{
    const int n = 60;
    std::mt19937 rng(3);
    std::normal_distribution<double> nd;
    Matrix g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            g(i, j) = nd(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    Vector ev(n);
    for (int i = 0; i < n; ++i)
        ev(i) = std::pow(10.0, -6.0 * i / (n - 1));
    const Matrix a = q * ev.asDiagonal() * q.transpose();
    Vector b(n);
    for (int i = 0; i < n; ++i)
        b(i) = nd(rng);
    const auto r = conjugate_gradient([&](const Vector& x) { return Vector(a * x); }, b, 1e-10, n + 5);
    CHECK(r.iterations <= n + 5);
    CHECK((a * r.x - b).norm() <= 1e-10 * b.norm());
}

TEST_CASE("incremental row basis detects dependence")
{
    IncrementalRowBasis basis(4);
    Vector a(4), b(4), c(4);
    a << 1, 0, 1, 0;
    b << 0, 1, 0, 1;
    c << 2, -3, 2, -3;
    CHECK(basis.try_add(a));
    CHECK(basis.try_add(b));
    CHECK_FALSE(basis.try_add(c));
    CHECK(basis.size() == 2);
}

TEST_CASE("incremental row basis agrees with the SVD rank on chained dependencies")
{
    // rows e_i - 4 e_{i+1} and e_n reproduce e_0 with coefficients up to 4^n
    const int n = 14;
    IncrementalRowBasis basis(n + 2);
    Matrix a = Matrix::Zero(n + 2, n + 2);
    for (int i = 0; i < n; ++i) {
        a(i, i) = 1.0;
        a(i, i + 1) = -4.0;
    }
    a(n, n) = 1.0;
    for (int i = 0; i <= n; ++i)
        CHECK(basis.try_add(a.row(i).transpose()));
    Vector y = Vector::Zero(n + 2);
    y(0) = 1.0;
    y(n + 1) = 1e-9;
    a.row(n + 1) = y.transpose();
    CHECK(basis.residual_ratio(y) > 1e-10);
    CHECK(basis.singular_bound(y) <= 1e-10);
    CHECK_FALSE(basis.try_add(y));
    CHECK(numerical_rank(a) == n + 1);

    Vector z = Vector::Zero(n + 2);
    z(n + 1) = 1.0;
    CHECK(basis.try_add(z));
}

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <functional>
#include <vector>

namespace ieti {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

inline constexpr double kRankTol = 1e-10;
inline constexpr double kPivotTol = 1e-13;

// Duplicates are summed.
SparseMatrix finalize_triplets(Eigen::Index rows, Eigen::Index cols, const std::vector<Triplet>& triplets);

class LuFactorization {
public:
    LuFactorization() = default;
    explicit LuFactorization(const Matrix& a);

    Vector solve(const Vector& b) const;
    Matrix solve(const Matrix& b) const;
    Eigen::Index size() const { return lu_.rows(); }
    double rcond() const { return lu_.rcond(); }

private:
    Eigen::PartialPivLU<Matrix> lu_;
};

class SparseLuFactorization {
public:
    explicit SparseLuFactorization(const SparseMatrix& a);

    Vector solve(const Vector& b) const;
    Matrix solve(const Matrix& b) const;
    Eigen::Index size() const { return n_; }

private:
    Eigen::Index n_ = 0;
    // SparseLU::solve is not const-qualified in all Eigen versions
    mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

Eigen::Index numerical_rank(const Matrix& a, double rel_tol = kRankTol);

Matrix null_space_basis(const Matrix& a, double rel_tol = kRankTol);

struct CgResult {
    Vector x;
    int iterations = 0;
    double relative_residual = 0.0;
    std::vector<double> history;
};

using LinearOperator = std::function<Vector(const Vector&)>;

CgResult conjugate_gradient(const LinearOperator& apply, const Vector& b, double tol, int max_iter);

// Orthonormal basis grown one row at a time. try_add keeps a unit-normalized row y iff the
// stack [accepted; y] keeps its smallest singular value above tol, tested through the bound
// sigma_min <= |y - x^T A| / sqrt(1 + |x|^2) with x the coefficients of the projection.
class IncrementalRowBasis {
public:
    IncrementalRowBasis(Eigen::Index dim, double rel_tol = kRankTol);

    bool try_add(const Vector& row);
    double residual_ratio(const Vector& row) const;
    // the singular value bound above for a candidate row
    double singular_bound(const Vector& row) const;
    // component of row / |row| orthogonal to the accepted rows
    Vector residual(const Vector& row) const;
    Eigen::Index size() const { return count_; }

private:
    struct Projection {
        Vector coef, residual;
    };
    Projection project(const Vector& unit_row) const;
    double bound(const Projection& pr) const;

    Eigen::Index dim_;
    double tol_;
    Eigen::Index count_ = 0;
    Matrix q_;
    Matrix l_;  // accepted row i = sum_j l_(i, j) q_j
};

double max_abs(const Matrix& a);

// Worker count from IETI_THREADS (default: hardware concurrency).
int thread_count();
// Runs body(i) for i in [0, count) on up to thread_count() threads; the first exception is rethrown.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace ieti

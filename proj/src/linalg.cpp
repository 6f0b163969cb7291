#include "ieti/linalg.hpp"

#include "ieti/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

namespace ieti {

SparseMatrix finalize_triplets(Eigen::Index rows, Eigen::Index cols, const std::vector<Triplet>& triplets)
{
    SparseMatrix a(rows, cols);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

double max_abs(const Matrix& a)
{
    return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

LuFactorization::LuFactorization(const Matrix& a)
{
    if (a.rows() != a.cols())
        throw Error(ErrorKind::DimensionMismatch, "lu_factor needs a square matrix");
    if (!a.allFinite())
        throw Error(ErrorKind::SingularMatrix, "matrix has non-finite entries");
    lu_.compute(a);
    const double scale = max_abs(a);
    if (a.rows() == 0)
        return;
    const double pivot = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(pivot > kPivotTol * scale)) {
        std::ostringstream msg;
        msg << "pivot " << pivot << " below threshold (max entry " << scale << ", size " << a.rows() << ")";
        throw Error(ErrorKind::SingularMatrix, msg.str());
    }
}

Vector LuFactorization::solve(const Vector& b) const
{
    if (size() == 0)
        return Vector();
    return lu_.solve(b);
}

Matrix LuFactorization::solve(const Matrix& b) const
{
    if (size() == 0)
        return Matrix(0, b.cols());
    return lu_.solve(b);
}

SparseLuFactorization::SparseLuFactorization(const SparseMatrix& a) : n_(a.rows())
{
    if (a.rows() != a.cols())
        throw Error(ErrorKind::DimensionMismatch, "sparse lu needs a square matrix");
    if (n_ == 0)
        return;
    lu_.analyzePattern(a);
    lu_.factorize(a);
    if (lu_.info() != Eigen::Success)
        throw Error(ErrorKind::SingularMatrix, "sparse LU failed: " + lu_.lastErrorMessage());
    // diagonal of U against the largest matrix entry
    double scale = 0.0;
    for (Eigen::Index k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it)
            scale = std::max(scale, std::abs(it.value()));
    double pivot = std::numeric_limits<double>::infinity();
    // U's diagonal sits in the leading square of each supernode of L
    const auto& l = lu_.matrixL().m_mapL;
    for (Eigen::Index k = 0; k <= l.nsuper(); ++k) {
        const Eigen::Index first = l.supToCol()[k];
        for (Eigen::Index c = first; c < l.supToCol()[k + 1]; ++c)
            pivot = std::min(pivot, std::abs(l.valuePtr()[l.colIndexPtr()[c] + (c - first)]));
    }
    if (!(pivot > kPivotTol * scale)) {
        std::ostringstream msg;
        msg << "sparse pivot " << pivot << " below threshold (max entry " << scale << ")";
        throw Error(ErrorKind::SingularMatrix, msg.str());
    }
}

Vector SparseLuFactorization::solve(const Vector& b) const
{
    if (n_ == 0)
        return Vector();
    return lu_.solve(b);
}

Matrix SparseLuFactorization::solve(const Matrix& b) const
{
    if (n_ == 0)
        return Matrix(0, b.cols());
    return lu_.solve(b);
}

namespace {

Vector singular_values(const Matrix& a)
{
    if (a.size() == 0)
        return Vector();
    Eigen::BDCSVD<Matrix> svd(a);
    return svd.singularValues();
}

}  // namespace

Eigen::Index numerical_rank(const Matrix& a, double rel_tol)
{
    Vector sv = singular_values(a);
    if (sv.size() == 0 || sv(0) == 0.0)
        return 0;
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_tol * sv(0))
            ++r;
    return r;
}

Matrix null_space_basis(const Matrix& a, double rel_tol)
{
    const Eigen::Index cols = a.cols();
    if (a.rows() == 0 || cols == 0)
        return Matrix::Identity(cols, cols);
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    Eigen::Index r = 0;
    if (sv.size() > 0 && sv(0) > 0.0)
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > rel_tol * sv(0))
                ++r;
    return svd.matrixV().rightCols(cols - r);
}

CgResult conjugate_gradient(const LinearOperator& apply, const Vector& b, double tol, int max_iter)
{
    CgResult res;
    res.x = Vector::Zero(b.size());
    const double bnorm = b.norm();
    if (b.size() == 0 || bnorm == 0.0)
        return res;
    // residuals are kept mutually orthogonal (full reorthogonalization, two Gram-Schmidt passes)
    Matrix basis(b.size(), std::min<Eigen::Index>(b.size(), 64));
    Eigen::Index count = 0;
    auto reorthogonalize = [&](Vector& r) {
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index j = 0; j < count; ++j)
                r -= basis.col(j).dot(r) * basis.col(j);
    };
    auto store = [&](const Vector& r, double norm) {
        if (count == b.size() || norm == 0.0)
            return;
        if (count == basis.cols())
            basis.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(b.size(), 2 * basis.cols()));
        basis.col(count++) = r / norm;
    };
    Vector r = b;
    Vector p = r;
    double rr = r.dot(r);
    store(r, std::sqrt(rr));
    res.history.push_back(1.0);
    for (int it = 0; it < max_iter; ++it) {
        Vector ap = apply(p);
        const double pap = p.dot(ap);
        if (!(pap > 0.0))
            break;
        const double alpha = rr / pap;
        res.x += alpha * p;
        r -= alpha * ap;
        reorthogonalize(r);
        const double rr_new = r.dot(r);
        res.iterations = it + 1;
        res.relative_residual = std::sqrt(rr_new) / bnorm;
        res.history.push_back(res.relative_residual);
        if (res.relative_residual <= tol || count == b.size()) {
            // confirm against the true residual
            Vector true_r = b - apply(res.x);
            res.relative_residual = true_r.norm() / bnorm;
            if (res.relative_residual <= tol)
                return res;
            r = true_r;
            p = r;
            rr = r.dot(r);
            count = 0;
            store(r, std::sqrt(rr));
            continue;
        }
        store(r, std::sqrt(rr_new));
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    std::ostringstream msg;
    msg << "CG stopped after " << res.iterations << " iterations, relative residual " << res.relative_residual;
    throw Error(ErrorKind::NoConvergence, msg.str());
}

IncrementalRowBasis::IncrementalRowBasis(Eigen::Index dim, double rel_tol)
    : dim_(dim), tol_(rel_tol), q_(dim, std::min<Eigen::Index>(dim, 64)),
      l_(Matrix::Zero(q_.cols(), q_.cols()))
{
}

IncrementalRowBasis::Projection IncrementalRowBasis::project(const Vector& unit_row) const
{
    Projection pr{Vector::Zero(count_), unit_row};
    // two passes of classical Gram-Schmidt
    for (int pass = 0; pass < 2 && count_ > 0; ++pass) {
        const Vector c = q_.leftCols(count_).transpose() * pr.residual;
        pr.residual -= q_.leftCols(count_) * c;
        pr.coef += c;
    }
    return pr;
}

double IncrementalRowBasis::bound(const Projection& pr) const
{
    if (count_ == 0)
        return pr.residual.norm();
    const Vector x = l_.topLeftCorner(count_, count_).transpose().triangularView<Eigen::Upper>().solve(pr.coef);
    return pr.residual.norm() / std::sqrt(1.0 + x.squaredNorm());
}

double IncrementalRowBasis::residual_ratio(const Vector& row) const
{
    const double nrm = row.norm();
    if (nrm == 0.0)
        return 0.0;
    return project(row / nrm).residual.norm();
}

Vector IncrementalRowBasis::residual(const Vector& row) const
{
    const double nrm = row.norm();
    if (nrm == 0.0)
        return Vector::Zero(row.size());
    return project(row / nrm).residual;
}

double IncrementalRowBasis::singular_bound(const Vector& row) const
{
    const double nrm = row.norm();
    if (nrm == 0.0)
        return 0.0;
    return bound(project(row / nrm));
}

bool IncrementalRowBasis::try_add(const Vector& row)
{
    if (row.size() != dim_)
        throw Error(ErrorKind::DimensionMismatch, "row length differs from basis dimension");
    const double nrm = row.norm();
    if (nrm == 0.0 || count_ >= dim_)
        return false;
    const Projection pr = project(row / nrm);
    if (bound(pr) <= tol_)
        return false;
    if (count_ == q_.cols()) {
        const Eigen::Index cap = std::min(dim_, 2 * q_.cols() + 1);
        q_.conservativeResize(Eigen::NoChange, cap);
        l_.conservativeResizeLike(Matrix::Zero(cap, cap));
    }
    const double rn = pr.residual.norm();
    q_.col(count_) = pr.residual / rn;
    l_.row(count_).head(count_) = pr.coef.transpose();
    l_(count_, count_) = rn;
    ++count_;
    return true;
}

int thread_count()
{
    if (const char* env = std::getenv("IETI_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0)
            return t;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, const std::function<void(int)>& body)
{
    const int workers = std::min(count, thread_count());
    if (workers <= 1) {
        for (int i = 0; i < count; ++i)
            body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex guard;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(guard);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

}  // namespace ieti

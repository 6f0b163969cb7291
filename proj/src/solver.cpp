#include "ieti/solver.hpp"

#include "ieti/error.hpp"

#include <chrono>
#include <type_traits>

namespace ieti {

namespace {

constexpr double kFactorTol = 1e-14;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Matrix dense_block(const SparseMatrix& a, const std::vector<int>& rows, const std::vector<int>& cols)
{
    std::vector<int> where(a.rows(), -1);
    for (int i = 0; i < static_cast<int>(rows.size()); ++i)
        where[rows[i]] = i;
    Matrix out = Matrix::Zero(rows.size(), cols.size());
    for (int c = 0; c < static_cast<int>(cols.size()); ++c)
        for (SparseMatrix::InnerIterator it(a, cols[c]); it; ++it)
            if (where[it.row()] >= 0)
                out(where[it.row()], c) = it.value();
    return out;
}

SparseMatrix sparse_block(const SparseMatrix& a, const std::vector<int>& rows, const std::vector<int>& cols)
{
    std::vector<int> where(a.rows(), -1);
    for (int i = 0; i < static_cast<int>(rows.size()); ++i)
        where[rows[i]] = i;
    std::vector<Triplet> t;
    for (int c = 0; c < static_cast<int>(cols.size()); ++c)
        for (SparseMatrix::InnerIterator it(a, cols[c]); it; ++it)
            if (where[it.row()] >= 0)
                t.emplace_back(where[it.row()], c, it.value());
    return finalize_triplets(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()), t);
}

Vector gather(const Vector& v, const std::vector<int>& idx)
{
    Vector out(idx.size());
    for (int i = 0; i < static_cast<int>(idx.size()); ++i)
        out(i) = v(idx[i]);
    return out;
}

template <class F>
auto run_stage(const char* name, Diagnostics& diag, F&& body)
{
    const auto t0 = Clock::now();
    try {
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            diag.seconds[name] += seconds_since(t0);
        } else {
            auto out = body();
            diag.seconds[name] += seconds_since(t0);
            return out;
        }
    } catch (const Error&) {
        rethrow_in_stage(name);
    }
}

}  // namespace

void validate_config(const SolverConfig& c)
{
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); };
    if (c.m < 1)
        fail("m >= 1 violated (m = " + std::to_string(c.m) + ")");
    if (c.s < c.m - 1)
        fail("s >= m-1 violated (s = " + std::to_string(c.s) + ", m = " + std::to_string(c.m) + ")");
    if (c.p < 2 * c.s + 1)
        fail("p >= 2s+1 violated (p = " + std::to_string(c.p) + ", s = " + std::to_string(c.s) + ")");
    if (c.r < c.s)
        fail("r >= s violated (r = " + std::to_string(c.r) + ", s = " + std::to_string(c.s) + ")");
    if (c.r > c.p - (c.s + 1))
        fail("r <= p-(s+1) violated (r = " + std::to_string(c.r) + ", p = " + std::to_string(c.p) +
             ", s = " + std::to_string(c.s) + ")");
    if (c.k < 0)
        fail("k >= 0 violated");
    if (!(c.cg_tol > 0.0))
        fail("cg_tol > 0 violated");
}

DualPrimalFactorization::DualPrimalFactorization(const std::vector<Matrix>& s_f, const ConstraintSet& cs)
    : num_f_(cs.split.num_f), num_xi_(static_cast<int>(cs.c_xi.rows())), jet_(cs.jet_size()), s_f_(s_f)
{
    const auto& split = cs.split;
    const int nv = static_cast<int>(cs.vertices.size());
    int off = 0;
    for (const auto& vj : cs.vertices) {
        valency_.push_back(static_cast<int>(vj.patches.size()));
        xi_offset_.push_back(off);
        off += (valency_.back() - 1) * jet_;
    }
    if (off != num_xi_)
        throw Error(ErrorKind::DimensionMismatch, "inner vertex rows do not match the jet blocks");
    c_xi_f_ = Matrix(free_columns(cs.c_xi, split));

    double s_max = 0.0, c_max = 0.0;
    for (const auto& m : s_f)
        if (m.size())
            s_max = std::max(s_max, m.cwiseAbs().maxCoeff());
    for (const auto& vj : cs.vertices)
        for (const auto& jet : vj.jet)
            if (jet.size())
                c_max = std::max(c_max, jet.cwiseAbs().maxCoeff());
    if (s_max > 0.0 && c_max > 0.0)
        t_scale_ = s_max / c_max;

    blocks_.resize(split.patches);
    const int n_mu = nv * jet_;
    std::vector<double> rc(split.patches, 1.0);
    parallel_for(split.patches, [&](int j) {
        Block& b = blocks_[j];
        b.f_offset = split.f_offset[j];
        b.f_count = static_cast<int>(split.free[j].size());
        for (int v = 0; v < nv; ++v) {
            const auto& vj = cs.vertices[v];
            for (int l = 0; l < static_cast<int>(vj.patches.size()); ++l) {
                if (vj.patches[l] != j)
                    continue;
                Slot slot{v, l, Matrix::Zero(jet_, b.f_count)};
                for (int c = 0; c < b.f_count; ++c)
                    slot.jet.col(c) = vj.jet[l].col(split.free[j][c]);
                b.slots.push_back(std::move(slot));
            }
        }
        const int ns = static_cast<int>(b.slots.size()) * jet_;
        Matrix t = Matrix::Zero(b.f_count + ns, b.f_count + ns);
        t.topLeftCorner(b.f_count, b.f_count) = s_f[j];
        Matrix g = Matrix::Zero(b.f_count + ns, n_mu);
        for (int q = 0; q < static_cast<int>(b.slots.size()); ++q) {
            const auto& slot = b.slots[q];
            t.block(b.f_count + q * jet_, 0, jet_, b.f_count) = t_scale_ * slot.jet;
            t.block(0, b.f_count + q * jet_, b.f_count, jet_) = t_scale_ * slot.jet.transpose();
            g.block(b.f_count + q * jet_, slot.vertex * jet_, jet_, jet_).setIdentity();
        }
        if (t.rows() == 0)
            return;
        b.t = LuFactorization(t);
        rc[j] = b.t.rcond();
        if (!(rc[j] > kFactorTol))
            throw Error(ErrorKind::SingularT, "patch " + std::to_string(j) + ": reciprocal condition " +
                                                  std::to_string(rc[j]));
        b.w = solve_t(b, g);
    });
    for (double r : rc)
        min_t_rcond_ = std::min(min_t_rcond_, r);

    if (n_mu == 0)
        return;
    Matrix z = Matrix::Zero(n_mu, n_mu);
    for (const auto& b : blocks_)
        for (int q = 0; q < static_cast<int>(b.slots.size()); ++q)
            z.middleRows(b.slots[q].vertex * jet_, jet_) += b.w.middleRows(b.f_count + q * jet_, jet_);
    z_lu_ = LuFactorization(z);
    if (!(z_lu_.rcond() > kFactorTol))
        throw Error(ErrorKind::SingularCoupling, "vertex coupling reciprocal condition " +
                                                     std::to_string(z_lu_.rcond()));
}

Matrix DualPrimalFactorization::solve_t(const Block& b, Matrix rhs) const
{
    rhs.bottomRows(rhs.rows() - b.f_count) *= t_scale_;
    Matrix out = b.t.solve(rhs);
    out.bottomRows(out.rows() - b.f_count) *= t_scale_;
    return out;
}

Vector DualPrimalFactorization::apply(const Vector& r) const
{
    if (r.size() != size())
        throw Error(ErrorKind::DimensionMismatch, "S~ inverse applied to a vector of wrong length");
    const int n_mu = static_cast<int>(valency_.size()) * jet_;
    std::vector<Vector> y(blocks_.size());
    parallel_for(static_cast<int>(blocks_.size()), [&](int j) {
        const Block& b = blocks_[j];
        const int ns = static_cast<int>(b.slots.size()) * jet_;
        Vector rz(b.f_count + ns);
        rz.head(b.f_count) = r.segment(b.f_offset, b.f_count);
        for (int q = 0; q < static_cast<int>(b.slots.size()); ++q) {
            const auto& slot = b.slots[q];
            Vector rho = Vector::Zero(jet_);
            for (int l = 1; l <= slot.position; ++l)
                rho -= r.segment(num_f_ + xi_offset_[slot.vertex] + (l - 1) * jet_, jet_);
            rz.segment(b.f_count + q * jet_, jet_) = rho;
        }
        y[j] = rz.size() ? Vector(solve_t(b, rz)) : rz;
    });
    if (n_mu > 0) {
        Vector acc = Vector::Zero(n_mu);
        for (std::size_t j = 0; j < blocks_.size(); ++j)
            for (int q = 0; q < static_cast<int>(blocks_[j].slots.size()); ++q)
                acc.segment(blocks_[j].slots[q].vertex * jet_, jet_) +=
                    y[j].segment(blocks_[j].f_count + q * jet_, jet_);
        const Vector mu = -z_lu_.solve(acc);
        for (std::size_t j = 0; j < blocks_.size(); ++j)
            if (blocks_[j].w.size())
                y[j] += blocks_[j].w * mu;
    }
    Vector out = Vector::Zero(size());
    // lambda_l = sum_{k < l} lambda_hat_k along each vertex cycle
    std::vector<std::vector<Vector>> hat(valency_.size());
    for (std::size_t v = 0; v < valency_.size(); ++v)
        hat[v].assign(valency_[v], Vector::Zero(jet_));
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
        const Block& b = blocks_[j];
        out.segment(b.f_offset, b.f_count) = y[j].head(b.f_count);
        for (int q = 0; q < static_cast<int>(b.slots.size()); ++q)
            hat[b.slots[q].vertex][b.slots[q].position] = y[j].segment(b.f_count + q * jet_, jet_);
    }
    for (std::size_t v = 0; v < valency_.size(); ++v) {
        Vector run = Vector::Zero(jet_);
        for (int l = 1; l < valency_[v]; ++l) {
            run += hat[v][l - 1];
            out.segment(num_f_ + xi_offset_[v] + (l - 1) * jet_, jet_) = run;
        }
    }
    return out;
}

Matrix DualPrimalFactorization::assemble() const
{
    Matrix s = Matrix::Zero(size(), size());
    for (std::size_t j = 0; j < blocks_.size(); ++j)
        s.block(blocks_[j].f_offset, blocks_[j].f_offset, blocks_[j].f_count, blocks_[j].f_count) = s_f_[j];
    s.block(num_f_, 0, num_xi_, num_f_) = c_xi_f_;
    s.block(0, num_f_, num_f_, num_xi_) = c_xi_f_.transpose();
    return s;
}

BoundaryFit solve_boundary_fit(const Matrix& mass, const Matrix& b, const Vector& load)
{
    BoundaryFit out;
    if (mass.rows() == 0) {
        out.u = Vector::Zero(0);
        out.mu = Vector::Zero(b.rows());
        return out;
    }
    Eigen::LLT<Matrix> llt(mass);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::SingularMatrix, "boundary mass matrix is not positive definite");
    const Vector m_inv_load = llt.solve(load);
    if (b.rows() == 0) {
        out.u = m_inv_load;
        out.mu = Vector::Zero(0);
    } else {
        const Matrix m_inv_bt = llt.solve(b.transpose());
        const LuFactorization coupling(Matrix(b * m_inv_bt));
        if (!(coupling.rcond() > kFactorTol))
            throw Error(ErrorKind::SingularCoupling, "B M^{-1} B^T reciprocal condition " +
                                                         std::to_string(coupling.rcond()));
        out.mu = coupling.solve(Vector(b * m_inv_load));
        out.u = m_inv_load - m_inv_bt * out.mu;
    }
    const Vector r1 = mass * out.u + (b.rows() ? Vector(b.transpose() * out.mu) : Vector::Zero(out.u.size())) - load;
    const double scale = std::max({1.0, load.cwiseAbs().maxCoeff(), (mass * out.u).cwiseAbs().maxCoeff()});
    out.residual = r1.cwiseAbs().maxCoeff() / scale;
    if (b.rows())
        out.residual = std::max(out.residual, (b * out.u).cwiseAbs().maxCoeff() / std::max(1.0, out.u.cwiseAbs().maxCoeff()));
    return out;
}

IetiProblem::IetiProblem(const MultiPatchDomain& domain, const SolverConfig& config)
    : domain_(domain), config_(config)
{
    validate_config(config_);
    if (domain_.smoothness() != config_.s)
        throw Error(ErrorKind::ConfigError, "domain smoothness " + std::to_string(domain_.smoothness()) +
                                                " differs from s = " + std::to_string(config_.s));
    if (!config_.f)
        config_.f = [](double, double) { return 0.0; };
    if (!config_.boundary)
        config_.boundary = [](double, double) { return 0.0; };
    const int q = config_.quad_order > 0 ? config_.quad_order : config_.p + 2;
    const int np = domain_.patch_count();

    space_ = run_stage("setup", diag_, [&] { return TensorSpace(make_space(config_.p, config_.r, config_.k)); });
    const QuadratureRule quad = make_quadrature(space_, q);

    blocks_.resize(np);
    run_stage("assemble", diag_, [&] {
        parallel_for(np, [&](int i) {
            blocks_[i].stiffness = local_stiffness(domain_.patch(i), space_, config_.m, quad);
            blocks_[i].load = local_load(domain_.patch(i), space_, config_.f, quad);
        });
    });

    cs_ = run_stage("constraints", diag_, [&] {
        return assemble_constraints(domain_, {config_.p, config_.r, config_.k}, config_.m);
    });
    const auto& split = cs_.split;

    run_stage("boundary_fit", diag_, [&] {
        std::vector<BoundaryFitBlock> fit(np);
        parallel_for(np, [&](int i) {
            const auto sides = domain_.boundary_sides(i);
            if (sides[0] || sides[1] || sides[2] || sides[3])
                fit[i] = boundary_mass_and_fit_load(domain_.patch(i), space_, config_.m, sides, config_.boundary, quad);
        });
        Matrix mass = Matrix::Zero(split.num_b, split.num_b);
        Vector load = Vector::Zero(split.num_b);
        for (int i = 0; i < np; ++i) {
            std::vector<int> pos;
            for (int flat : fit[i].ring) {
                if (split.role[i][flat] != DofSplit::Bnd)
                    throw Error(ErrorKind::DimensionMismatch, "boundary ring index outside u_B");
                pos.push_back(split.position[i][flat]);
            }
            if (pos.size() != split.bnd[i].size())
                throw Error(ErrorKind::DimensionMismatch, "boundary ring size differs from u_B block");
            for (std::size_t a = 0; a < pos.size(); ++a) {
                load(pos[a]) = fit[i].load(a);
                for (std::size_t c = 0; c < pos.size(); ++c)
                    mass(pos[a], pos[c]) = fit[i].mass(a, c);
            }
        }
        const auto bf = solve_boundary_fit(mass, cs_.b, load);
        g_ = bf.u;
        diag_.boundary_fit_residual = bf.residual;
    });

    run_stage("schur", diag_, [&] {
        parallel_for(np, [&](int i) {
            auto& b = blocks_[i];
            b.f = split.free[i];
            b.r = split.remaining[i];
            b.b = split.bnd[i];
            Vector g_i(b.b.size());
            for (std::size_t a = 0; a < b.b.size(); ++a)
                g_i(a) = g_(split.position[i][b.b[a]]);
            const SparseMatrix krr = sparse_block(b.stiffness, b.r, b.r);
            const Matrix krf = dense_block(b.stiffness, b.r, b.f);
            const Matrix kff = dense_block(b.stiffness, b.f, b.f);
            const Matrix kfb = dense_block(b.stiffness, b.f, b.b);
            const Matrix krb = dense_block(b.stiffness, b.r, b.b);
            std::unique_ptr<SparseLuFactorization> lu;
            try {
                lu = std::make_unique<SparseLuFactorization>(krr);
            } catch (const Error& e) {
                throw Error(ErrorKind::SingularKRR, "patch " + std::to_string(i) + ": " + e.detail());
            }
            b.krr_krf = lu->solve(krf);
            Matrix s = kff - krf.transpose() * b.krr_krf;
            b.s_f = 0.5 * (s + s.transpose());
            const Vector f_r = gather(b.load, b.r) - krb * g_i;
            b.krr_load = lu->solve(f_r);
            b.f_tilde = gather(b.load, b.f) - kfb * g_i - krf.transpose() * b.krr_load;
        });
    });

    run_stage("dual_setup", diag_, [&] {
        if (config_.drop_gamma) {
            c_gamma_f_ = SparseMatrix(0, split.num_f);
            g_bar_ = Vector::Zero(0);
        } else {
            c_gamma_f_ = free_columns(cs_.c_gamma, split);
            g_bar_ = -(boundary_columns(cs_.c_gamma, split) * g_);
        }
        std::vector<Matrix> s_f;
        double s_max = 0.0, c_max = 0.0;
        for (const auto& b : blocks_) {
            s_f.push_back(b.s_f);
            if (b.s_f.size())
                s_max = std::max(s_max, b.s_f.cwiseAbs().maxCoeff());
        }
        for (const auto& vj : cs_.vertices)
            for (const auto& jet : vj.jet)
                if (jet.size())
                    c_max = std::max(c_max, jet.cwiseAbs().maxCoeff());
        // C_Xi rows on the scale of S_F
        if (s_max > 0.0 && c_max > 0.0) {
            cs_.xi_scale = s_max / c_max;
            cs_.c_xi *= cs_.xi_scale;
            for (auto& vj : cs_.vertices)
                for (auto& jet : vj.jet)
                    jet *= cs_.xi_scale;
        }
        fact_ = std::make_unique<DualPrimalFactorization>(s_f, cs_);
    });

    diag_.n = split.n;
    diag_.patches = np;
    diag_.num_b = split.num_b;
    diag_.num_f = split.num_f;
    for (const auto& r : split.remaining)
        diag_.num_r += static_cast<int>(r.size());
    diag_.rows_b = split.num_b;
    diag_.rows_xi = static_cast<int>(cs_.c_xi.rows());
    diag_.rows_gamma = static_cast<int>(c_gamma_f_.rows());
    diag_.rows_boundary_vertex = static_cast<int>(cs_.b.rows());
    diag_.candidate_rows = cs_.candidate_rows;
    diag_.dropped_rows = cs_.dropped_rows;
    diag_.dual_size = static_cast<int>(c_gamma_f_.rows());
    diag_.coupling_size = fact_->coupling_size();
    diag_.min_d2_rcond = cs_.min_d2_rcond;
    diag_.min_t_rcond = fact_->min_t_rcond();
}

Vector IetiProblem::apply_dual(const Vector& lambda) const
{
    Vector r = Vector::Zero(fact_->size());
    r.head(cs_.split.num_f) = c_gamma_f_.transpose() * lambda;
    return c_gamma_f_ * fact_->apply(r).head(cs_.split.num_f);
}

Vector IetiProblem::dual_rhs() const
{
    Vector r = Vector::Zero(fact_->size());
    for (std::size_t i = 0; i < blocks_.size(); ++i)
        r.segment(cs_.split.f_offset[i], blocks_[i].f.size()) = blocks_[i].f_tilde;
    return c_gamma_f_ * fact_->apply(r).head(cs_.split.num_f) - g_bar_;
}

Matrix IetiProblem::dual_matrix() const
{
    const Eigen::Index n = c_gamma_f_.rows();
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        out.col(i) = apply_dual(Vector::Unit(n, i));
    return out;
}

IetiSolution IetiProblem::solve() const
{
    IetiSolution sol;
    sol.diagnostics = diag_;
    auto& diag = sol.diagnostics;
    const auto& split = cs_.split;
    const int nn = split.n * split.n;
    const int dual = static_cast<int>(c_gamma_f_.rows());

    run_stage("dual_solve", diag, [&] {
        const int max_iter = config_.cg_max_iter > 0 ? config_.cg_max_iter : std::max(1, 10 * dual);
        const auto cg = conjugate_gradient([&](const Vector& x) { return apply_dual(x); }, dual_rhs(),
                                           config_.cg_tol, max_iter);
        sol.lambda_gamma = cg.x;
        diag.cg_iterations = cg.iterations;
        diag.cg_residual = cg.relative_residual;
        diag.cg_history = cg.history;
    });

    run_stage("recover", diag, [&] {
        Vector r = Vector::Zero(fact_->size());
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            r.segment(split.f_offset[i], blocks_[i].f.size()) = blocks_[i].f_tilde;
        r.head(split.num_f) -= c_gamma_f_.transpose() * sol.lambda_gamma;
        const Vector x = fact_->apply(r);
        sol.lambda_xi = x.tail(fact_->size() - split.num_f);
        sol.n = split.n;
        sol.u.resize(blocks_.size());
        sol.u_global = Vector::Zero(split.total());
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const auto& b = blocks_[i];
            Vector u = Vector::Zero(nn);
            const Vector u_f = x.segment(split.f_offset[i], b.f.size());
            for (std::size_t a = 0; a < b.f.size(); ++a)
                u(b.f[a]) = u_f(a);
            for (int flat : b.b)
                u(flat) = g_(split.position[i][flat]);
            const Vector u_r = b.krr_load - b.krr_krf * u_f;
            for (std::size_t a = 0; a < b.r.size(); ++a)
                u(b.r[a]) = u_r(a);
            sol.u[i] = u;
            sol.u_global.segment(i * nn, nn) = u;
        }

        // saddle residual of the full system; lambda_B closes the u_B rows
        Vector res = Vector::Zero(split.total());
        Vector f_all = Vector::Zero(split.total());
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            res.segment(i * nn, nn) = blocks_[i].stiffness * sol.u[i] - blocks_[i].load;
            f_all.segment(i * nn, nn) = blocks_[i].load;
        }
        if (cs_.c_xi.rows())
            res += cs_.c_xi.transpose() * sol.lambda_xi;
        if (!config_.drop_gamma && dual)
            res += cs_.c_gamma.transpose() * sol.lambda_gamma;
        sol.lambda_b = Vector::Zero(split.num_b);
        for (int i = 0; i < split.patches; ++i)
            for (int flat : split.bnd[i]) {
                const int gi = split.global(i, flat);
                sol.lambda_b(split.position[i][flat]) = -res(gi);
                res(gi) = 0.0;
            }
        diag.scale = std::max({1.0, f_all.cwiseAbs().maxCoeff(), sol.u_global.cwiseAbs().maxCoeff()});
        diag.saddle_residual = res.size() ? res.cwiseAbs().maxCoeff() : 0.0;
        double cres = 0.0;
        if (cs_.c_xi.rows())
            cres = std::max(cres, Vector(cs_.c_xi * sol.u_global).cwiseAbs().maxCoeff());
        if (!config_.drop_gamma && cs_.c_gamma.rows())
            cres = std::max(cres, Vector(cs_.c_gamma * sol.u_global).cwiseAbs().maxCoeff());
        diag.constraint_residual = cres;
    });
    return sol;
}

IetiSolution solve(const MultiPatchDomain& domain, const SolverConfig& config)
{
    const auto t0 = Clock::now();
    IetiProblem problem(domain, config);
    auto sol = problem.solve();
    sol.diagnostics.seconds["total"] = seconds_since(t0);
    return sol;
}

}  // namespace ieti

#include "ieti/constraints.hpp"

#include "ieti/error.hpp"

#include <algorithm>
#include <map>

namespace ieti {

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

ConstraintRow sparse_row(const Vector& local, const std::vector<int>& columns, std::string tag)
{
    ConstraintRow row;
    const double mx = local.size() ? local.cwiseAbs().maxCoeff() : 0.0;
    std::map<int, double> acc;
    for (Eigen::Index i = 0; i < local.size(); ++i)
        if (local(i) != 0.0 && std::abs(local(i)) > 1e-15 * mx)
            acc[columns[i]] += local(i);
    for (auto [c, v] : acc) {
        row.index.push_back(c);
        row.value.push_back(v);
    }
    row.tag = std::move(tag);
    return row;
}

// univariate Taylor series at 0, truncated at order w_max; rows of a matrix for vector-valued ones
Vector scalar_series(const LinearFunction& f, int w_max)
{
    Vector c = Vector::Zero(w_max + 1);
    c(0) = f.at0;
    if (w_max >= 1) c(1) = f.slope();
    return c;
}

Vector series_mul(const Vector& a, const Vector& b)
{
    const int w = static_cast<int>(a.size()) - 1;
    Vector c = Vector::Zero(w + 1);
    for (int i = 0; i <= w; ++i)
        for (int j = 0; i + j <= w; ++j)
            c(i + j) += a(i) * b(j);
    return c;
}

Vector series_reciprocal(const Vector& a)
{
    const int w = static_cast<int>(a.size()) - 1;
    Vector c = Vector::Zero(w + 1);
    c(0) = 1.0 / a(0);
    for (int i = 1; i <= w; ++i) {
        double s = 0.0;
        for (int j = 1; j <= i; ++j)
            s += a(j) * c(i - j);
        c(i) = -s / a(0);
    }
    return c;
}

Matrix series_scale(const Vector& a, const Matrix& v)
{
    const int w = static_cast<int>(a.size()) - 1;
    Matrix out = Matrix::Zero(v.rows(), v.cols());
    for (int i = 0; i <= w; ++i)
        for (int j = 0; i + j <= w; ++j)
            out.row(i + j) += a(i) * v.row(j);
    return out;
}

Matrix series_diff(const Matrix& v, int times)
{
    Matrix out = v;
    for (int t = 0; t < times; ++t) {
        Matrix next = Matrix::Zero(out.rows(), out.cols());
        for (Eigen::Index w = 0; w + 1 < out.rows(); ++w)
            next.row(w) = (w + 1) * out.row(w + 1);
        out = next;
    }
    return out;
}

}  // namespace

DofSplit split_dofs(const MultiPatchDomain& domain, int n, int m, int s)
{
    if (n <= 2 * (s + 1))
        throw Error(ErrorKind::TooCoarse, "n = " + std::to_string(n) + " must exceed 2(s+1) = " +
                                              std::to_string(2 * (s + 1)));
    DofSplit d;
    d.n = n;
    d.m = m;
    d.s = s;
    d.patches = domain.patch_count();
    d.primal.resize(d.patches);
    d.remaining.resize(d.patches);
    d.bnd.resize(d.patches);
    d.free.resize(d.patches);
    d.role.assign(d.patches, std::vector<DofSplit::Role>(n * n, DofSplit::Rem));
    d.position.assign(d.patches, std::vector<int>(n * n, -1));
    for (int i = 0; i < d.patches; ++i) {
        const auto sides = domain.boundary_sides(i);
        d.b_offset.push_back(d.num_b);
        d.f_offset.push_back(d.num_f);
        for (int j1 = 0; j1 < n; ++j1)
            for (int j2 = 0; j2 < n; ++j2) {
                const int flat = j1 * n + j2;
                const int ring = std::min({j1, j2, n - 1 - j1, n - 1 - j2});
                if (ring > s) {
                    d.role[i][flat] = DofSplit::Rem;
                    d.position[i][flat] = static_cast<int>(d.remaining[i].size());
                    d.remaining[i].push_back(flat);
                    continue;
                }
                d.primal[i].push_back(flat);
                const bool on_b = (sides[0] && j1 < m) || (sides[1] && j1 >= n - m) || (sides[2] && j2 < m) ||
                                  (sides[3] && j2 >= n - m);
                if (on_b) {
                    d.role[i][flat] = DofSplit::Bnd;
                    d.position[i][flat] = d.num_b++;
                    d.bnd[i].push_back(flat);
                } else {
                    d.role[i][flat] = DofSplit::Free;
                    d.position[i][flat] = d.num_f++;
                    d.free[i].push_back(flat);
                }
            }
    }
    return d;
}

std::vector<UnivariateSpace> edge_spline_spaces(const UnivariateSpace& u, int s)
{
    std::vector<UnivariateSpace> out;
    for (int l = 0; l <= s; ++l)
        out.push_back(make_space(u.degree() - l, u.regularity() + s - l, u.interior_knots()));
    return out;
}

GammaRow gamma_collocation_row(const UnivariateSpace& u, const std::vector<UnivariateSpace>& edge_spaces,
                               const LinearFunction& alpha, const LinearFunction& beta, int l, double xi)
{
    const int n = u.dim(), p = u.degree();
    const double a = alpha(xi);
    if (std::abs(a) < 1e-12)
        throw Error(ErrorKind::GluingSingular, "alpha vanishes at xi = " + std::to_string(xi));
    GammaRow row;
    row.patch = Vector::Zero(n * n);
    const auto across = u.eval(0.0, l);
    const auto along = u.eval(xi, 0);
    const double scale = std::pow(a, -l);
    for (int ia = 0; ia <= p; ++ia)
        for (int ib = 0; ib <= p; ++ib)
            row.patch((across.first + ia) * n + along.first + ib) +=
                scale * across.values(l, ia) * along.values(0, ib);

    int nd = 0;
    std::vector<int> offset;
    for (const auto& e : edge_spaces) {
        offset.push_back(nd);
        nd += e.dim();
    }
    row.d = Vector::Zero(nd);
    const double ratio = beta(xi) / a;
    for (int j = 0; j <= l; ++j) {
        const auto& es = edge_spaces[j];
        const auto ev = es.eval(xi, l - j);
        const double c = j == l ? 1.0 : binomial(l, j) * std::pow(ratio, l - j);
        for (int i = 0; i <= es.degree(); ++i)
            row.d(offset[j] + ev.first + i) -= c * ev.values(l - j, i);
    }
    return row;
}

EdgeConditions build_edge_conditions(const MultiPatchDomain& domain, const DofSplit& split, int p, int r, int k,
                                     int edge)
{
    const auto u = make_space(p, r, k);
    const int n = u.dim(), s = split.s;
    const auto es = edge_spline_spaces(u, s);
    const auto& e = domain.inner_edges().at(edge);
    const auto grev = u.greville();
    std::vector<int> nl, doff;
    int nd = 0;
    for (const auto& sp : es) {
        doff.push_back(nd);
        nl.push_back(sp.dim());
        nd += sp.dim();
    }

    // local columns: side t, view (a, b) with a <= s
    const int per_side = (s + 1) * n;
    std::vector<int> columns(2 * per_side);
    std::array<SquareSymmetry, 2> sym;
    for (int t = 0; t < 2; ++t) {
        sym[t] = e.sides[t].view();
        for (int a = 0; a <= s; ++a)
            for (int b = 0; b < n; ++b)
                columns[t * per_side + a * n + b] = split.global(e.sides[t].patch, sym[t].patch_index(a, b, n));
    }

    // side-i1 rows covered by the vertex conditions at each end
    std::array<int, 2> end_trim;
    for (int q = 0; q < 2; ++q)
        end_trim[q] = 2 * s;

    struct Raw {
        int side, l, j;
        bool trimmed;
        Vector cu, cd;
    };
    std::vector<Raw> raw;
    for (int l = 0; l <= s; ++l)
        for (int t = 0; t < 2; ++t)
            for (int j = 0; j < n; ++j) {
                const auto g = gamma_collocation_row(u, es, e.gluing.alpha[t], e.gluing.beta[t], l, grev[j]);
                Raw rw{t, l, j, false, Vector::Zero(2 * per_side), g.d};
                for (int a = 0; a <= s; ++a)
                    rw.cu.segment(t * per_side + a * n, n) = g.patch.segment(a * n, n);
                const int lo = end_trim[0] - l, hi = n - 1 - (end_trim[1] - l);
                rw.trimmed = t == 1 && (j < lo || j > hi);
                raw.push_back(std::move(rw));
            }

    // D2: per l, n_l side-0 rows chosen by pivoted QR on their d_l block
    std::vector<int> chosen;
    for (int l = 0; l <= s; ++l) {
        std::vector<int> cand;
        for (int i = 0; i < static_cast<int>(raw.size()); ++i)
            if (raw[i].side == 0 && raw[i].l == l)
                cand.push_back(i);
        Matrix blk(nl[l], cand.size());
        for (int c = 0; c < static_cast<int>(cand.size()); ++c)
            blk.col(c) = raw[cand[c]].cd.segment(doff[l], nl[l]);
        Eigen::ColPivHouseholderQR<Matrix> qr(blk);
        std::vector<int> pick;
        for (int c = 0; c < nl[l]; ++c)
            pick.push_back(cand[qr.colsPermutation().indices()(c)]);
        std::sort(pick.begin(), pick.end());
        chosen.insert(chosen.end(), pick.begin(), pick.end());
    }
    Matrix d2(nd, nd), c2(nd, 2 * per_side);
    for (int i = 0; i < nd; ++i) {
        d2.row(i) = raw[chosen[i]].cd.transpose();
        c2.row(i) = raw[chosen[i]].cu.transpose();
    }
    Eigen::PartialPivLU<Matrix> lu(d2);
    EdgeConditions out;
    out.edge = edge;
    out.eliminated = nd;
    out.d2_rcond = lu.rcond();
    if (!(out.d2_rcond >= 1e-12))
        throw Error(ErrorKind::SingularD2, "edge " + std::to_string(edge) + ": D2 reciprocal condition " +
                                               std::to_string(out.d2_rcond));
    const Matrix x = lu.solve(c2);
    std::vector<bool> is_chosen(raw.size(), false);
    for (int c : chosen)
        is_chosen[c] = true;
    for (int i = 0; i < static_cast<int>(raw.size()); ++i) {
        if (is_chosen[i])
            continue;
        const Vector row = raw[i].cu - x.transpose() * raw[i].cd;
        auto cr = sparse_row(row, columns,
                             "edge " + std::to_string(edge) + " side " + std::to_string(raw[i].side) + " l " +
                                 std::to_string(raw[i].l) + " j " + std::to_string(raw[i].j));
        (raw[i].trimmed ? out.trimmed : out.literal).push_back(std::move(cr));
    }
    return out;
}

VertexJets build_vertex_conditions(const MultiPatchDomain& domain, const DofSplit& split, const TensorSpace& space,
                                   int vertex)
{
    const int s = split.s, n = split.n;
    const int d = 2 * s, nc = multi_index_count(d);
    VertexJets out;
    out.vertex = vertex;
    out.patches = domain.vertices().at(vertex).patches;
    for (int patch : out.patches) {
        const auto c = domain.corner_of(patch, vertex);
        const auto bp = physical_basis_partials(domain.patch(patch), space, c[0], c[1], d);
        Matrix jet = Matrix::Zero(nc, n * n);
        for (int l = 0; l < static_cast<int>(bp.index.size()); ++l)
            for (int q = 0; q < nc; ++q)
                jet(q, bp.index[l]) += bp.values(l, q);
        for (int f = 0; f < n * n; ++f)
            if (split.role[patch][f] != DofSplit::Free && jet.col(f).cwiseAbs().maxCoeff() > 0.0)
                throw Error(ErrorKind::TooCoarse, "vertex " + std::to_string(vertex) +
                                                      " jet reaches coefficients outside u_F; refine the mesh");
        out.jet.push_back(std::move(jet));
    }
    // one factor per multi-index shared by all patches
    for (int q = 0; q < nc; ++q) {
        double mx = 0.0;
        for (const auto& jet : out.jet)
            mx = std::max(mx, jet.row(q).cwiseAbs().maxCoeff());
        for (auto& jet : out.jet)
            jet.row(q) /= mx;
    }
    return out;
}

BoundaryVertexConditions build_boundary_vertex_conditions(const MultiPatchDomain& domain, const DofSplit& split,
                                                          const UnivariateSpace& u, int vertex)
{
    const int s = split.s, m = split.m, n = split.n;
    const int wmax = m + s - 1;
    const int win = wmax + 1;
    BoundaryVertexConditions out;
    out.vertex = vertex;
    const auto across = u.eval(0.0, s);
    const auto along = u.eval(0.0, wmax);

    for (int ei : domain.incident_inner_edges(vertex)) {
        const auto& e = domain.inner_edges()[ei];
        const bool flip = e.vertices[1] == vertex;
        const GluingData glu = flip ? e.gluing.reversed() : e.gluing;
        // gamma series per side: (wmax+1) x ((s+1) * win) over view (a, b<=wmax)
        std::array<std::vector<Matrix>, 2> gamma;
        std::array<std::vector<int>, 2> cols;
        for (int t = 0; t < 2; ++t) {
            SquareSymmetry sym = e.sides[t].view();
            if (flip)
                sym = sym.along_flipped();
            cols[t].resize((s + 1) * win);
            for (int a = 0; a <= s; ++a)
                for (int b = 0; b < win; ++b)
                    cols[t][a * win + b] = split.global(e.sides[t].patch, sym.patch_index(a, b, n));
            const Vector inv_a = series_reciprocal(scalar_series(glu.alpha[t], wmax));
            const Vector ratio = series_mul(scalar_series(glu.beta[t], wmax), inv_a);
            for (int l = 0; l <= s; ++l) {
                Matrix tl = Matrix::Zero(win, (s + 1) * win);
                for (int w = 0; w <= wmax; ++w)
                    for (int a = 0; a <= std::min(l, u.degree()); ++a)
                        for (int b = 0; b <= std::min(w, u.degree()); ++b)
                            tl(w, a * win + b) = across.values(l, a) * along.values(w, b) / factorial(w);
                Vector ia = Vector::Zero(wmax + 1);
                ia(0) = 1.0;
                for (int q = 0; q < l; ++q)
                    ia = series_mul(ia, inv_a);
                Matrix g = series_scale(ia, tl);
                for (int j = 0; j < l; ++j) {
                    Vector rp = Vector::Zero(wmax + 1);
                    rp(0) = 1.0;
                    for (int q = 0; q < l - j; ++q)
                        rp = series_mul(rp, ratio);
                    g -= binomial(l, j) * series_scale(rp, series_diff(gamma[t][j], l - j));
                }
                gamma[t].push_back(std::move(g));
            }
        }
        std::vector<int> all_cols = cols[0];
        all_cols.insert(all_cols.end(), cols[1].begin(), cols[1].end());
        for (int l = 0; l <= s; ++l)
            for (int w = 0; w <= wmax - l; ++w) {
                Vector row(2 * (s + 1) * win);
                row << gamma[0][l].row(w).transpose() * factorial(w), -gamma[1][l].row(w).transpose() * factorial(w);
                const double mx = row.cwiseAbs().maxCoeff();
                if (mx > 0.0)
                    row /= mx;
                out.tilde.push_back(sparse_row(row, all_cols,
                                               "vertex " + std::to_string(vertex) + " edge " + std::to_string(ei) +
                                                   " l " + std::to_string(l) + " w " + std::to_string(w)));
                out.tags.push_back({ei, l, w});
            }
    }

    // dense form over touched columns, u_F first
    std::vector<int> fcols, bcols;
    for (const auto& row : out.tilde)
        for (int c : row.index) {
            const int patch = c / (n * n), flat = c % (n * n);
            const auto role = split.role[patch][flat];
            if (role == DofSplit::Rem)
                throw Error(ErrorKind::DimensionMismatch, "boundary vertex condition reaches a remaining dof");
            (role == DofSplit::Free ? fcols : bcols).push_back(c);
        }
    for (auto* v : {&fcols, &bcols}) {
        std::sort(v->begin(), v->end());
        v->erase(std::unique(v->begin(), v->end()), v->end());
    }
    out.free_count = static_cast<int>(fcols.size());
    out.columns = fcols;
    out.columns.insert(out.columns.end(), bcols.begin(), bcols.end());
    std::map<int, int> where;
    for (int i = 0; i < static_cast<int>(out.columns.size()); ++i)
        where[out.columns[i]] = i;
    const int rows = static_cast<int>(out.tilde.size());
    out.tilde_dense = Matrix::Zero(rows, out.columns.size());
    for (int i = 0; i < rows; ++i)
        for (std::size_t q = 0; q < out.tilde[i].index.size(); ++q)
            out.tilde_dense(i, where[out.tilde[i].index[q]]) = out.tilde[i].value[q];

    const int nf = out.free_count, nb = static_cast<int>(bcols.size());
    const Matrix bf = out.tilde_dense.leftCols(nf);
    const Matrix bb = out.tilde_dense.rightCols(nb);
    const Matrix null = null_space_basis(bf.transpose());
    const double leak = null.cols() && nf ? (null.transpose() * bf).cwiseAbs().maxCoeff() : 0.0;
    if (leak > 1e-10 * std::max(1.0, bf.size() ? bf.cwiseAbs().maxCoeff() : 0.0))
        throw Error(ErrorKind::ComplementMismatch, "vertex " + std::to_string(vertex) + ": u_F part " +
                                                       std::to_string(leak) + " survives the null space");
    const Matrix cand = null.transpose() * bb;
    IncrementalRowBasis basis(nb);
    std::vector<Vector> kept;
    for (Eigen::Index i = 0; i < cand.rows(); ++i) {
        Vector row = cand.row(i).transpose();
        if (row.size() && row.cwiseAbs().maxCoeff() > 1e-12 && basis.try_add(row))
            kept.push_back(row / row.cwiseAbs().maxCoeff());
    }
    out.b_dense = Matrix::Zero(kept.size(), out.columns.size());
    out.b = Matrix::Zero(kept.size(), split.num_b);
    for (int i = 0; i < static_cast<int>(kept.size()); ++i) {
        out.b_dense.row(i).tail(nb) = kept[i].transpose();
        for (int c = 0; c < nb; ++c) {
            const int g = bcols[c];
            out.b(i, split.position[g / (n * n)][g % (n * n)]) = kept[i](c);
        }
    }
    out.target = static_cast<int>(numerical_rank(out.tilde_dense)) - static_cast<int>(kept.size());
    return out;
}

std::vector<ConstraintRow> build_boundary_complement(const BoundaryVertexConditions& bv, const DofSplit&)
{
    std::vector<ConstraintRow> out;
    if (bv.target <= 0)
        return out;
    IncrementalRowBasis basis(static_cast<Eigen::Index>(bv.columns.size()));
    for (Eigen::Index i = 0; i < bv.b_dense.rows(); ++i)
        if (!basis.try_add(bv.b_dense.row(i).transpose()))
            throw Error(ErrorKind::ComplementMismatch, "boundary vertex rows are dependent");
    int wmax = 0;
    std::vector<int> edges;
    for (const auto& t : bv.tags) {
        wmax = std::max(wmax, t.w);
        edges.push_back(t.edge);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (int w = wmax; w >= 0 && static_cast<int>(out.size()) < bv.target; --w)
        for (int e : edges)
            for (int i = 0; i < static_cast<int>(bv.tags.size()); ++i) {
                const auto& t = bv.tags[i];
                if (t.w != w || t.edge != e || static_cast<int>(out.size()) >= bv.target)
                    continue;
                if (basis.try_add(bv.tilde_dense.row(i).transpose())) {
                    ConstraintRow row = bv.tilde[i];
                    row.tag = "complement " + row.tag;
                    out.push_back(std::move(row));
                }
            }
    if (static_cast<int>(out.size()) < bv.target)
        throw Error(ErrorKind::ComplementIncomplete, "vertex " + std::to_string(bv.vertex) + ": kept " +
                                                         std::to_string(out.size()) + " of " +
                                                         std::to_string(bv.target));
    return out;
}

namespace {

Vector free_part(const ConstraintRow& row, const DofSplit& split)
{
    Vector v = Vector::Zero(split.num_f);
    const int nn = split.n * split.n;
    for (std::size_t q = 0; q < row.index.size(); ++q) {
        const int patch = row.index[q] / nn, flat = row.index[q] % nn;
        if (split.role[patch][flat] == DofSplit::Free)
            v(split.position[patch][flat]) += row.value[q];
    }
    return v;
}

SparseMatrix rows_to_sparse(const std::vector<ConstraintRow>& rows, int cols)
{
    std::vector<Triplet> t;
    for (int i = 0; i < static_cast<int>(rows.size()); ++i)
        for (std::size_t q = 0; q < rows[i].index.size(); ++q)
            t.emplace_back(i, rows[i].index[q], rows[i].value[q]);
    return finalize_triplets(static_cast<Eigen::Index>(rows.size()), cols, t);
}

SparseMatrix select_columns(const SparseMatrix& c, const DofSplit& split, DofSplit::Role role, int count)
{
    const int nn = split.n * split.n;
    std::vector<Triplet> t;
    for (Eigen::Index k = 0; k < c.outerSize(); ++k) {
        const int patch = static_cast<int>(k) / nn, flat = static_cast<int>(k) % nn;
        if (split.role[patch][flat] != role)
            continue;
        for (SparseMatrix::InnerIterator it(c, k); it; ++it)
            t.emplace_back(it.row(), split.position[patch][flat], it.value());
    }
    return finalize_triplets(c.rows(), count, t);
}

}  // namespace

SparseMatrix free_columns(const SparseMatrix& c, const DofSplit& split)
{
    return select_columns(c, split, DofSplit::Free, split.num_f);
}

SparseMatrix boundary_columns(const SparseMatrix& c, const DofSplit& split)
{
    return select_columns(c, split, DofSplit::Bnd, split.num_b);
}

ConstraintSet assemble_constraints(const MultiPatchDomain& domain, const DiscreteSpace& sp, int m)
{
    const int s = domain.smoothness();
    const auto u = make_space(sp.p, sp.r, sp.k);
    const TensorSpace space(u);
    ConstraintSet cs;
    cs.split = split_dofs(domain, u.dim(), m, s);
    const auto& split = cs.split;
    const int nn = split.n * split.n;

    IncrementalRowBasis basis(split.num_f);

    // inner vertices
    std::vector<ConstraintRow> xi_rows;
    for (int v : domain.inner_vertices()) {
        cs.vertices.push_back(build_vertex_conditions(domain, split, space, v));
        const auto& vj = cs.vertices.back();
        for (int l = 1; l < static_cast<int>(vj.patches.size()); ++l)
            for (int q = 0; q < cs.jet_size(); ++q) {
                ConstraintRow row;
                for (int t : {l - 1, l}) {
                    const double sign = t == l ? -1.0 : 1.0;
                    for (int f = 0; f < nn; ++f)
                        if (vj.jet[t](q, f) != 0.0) {
                            row.index.push_back(split.global(vj.patches[t], f));
                            row.value.push_back(sign * vj.jet[t](q, f));
                        }
                }
                row.tag = "vertex " + std::to_string(v) + " block " + std::to_string(l) + " q " + std::to_string(q);
                if (!basis.try_add(free_part(row, split)))
                    throw Error(ErrorKind::DependentConstraints, "inner vertex condition dependent: " + row.tag);
                xi_rows.push_back(std::move(row));
            }
    }
    cs.c_xi = rows_to_sparse(xi_rows, split.total());

    // boundary vertices with valency >= 2
    std::map<int, std::vector<ConstraintRow>> complement;
    std::vector<Vector> b_rows;
    for (int v : domain.boundary_coupling_vertices()) {
        auto bv = build_boundary_vertex_conditions(domain, split, u, v);
        for (Eigen::Index i = 0; i < bv.b.rows(); ++i)
            b_rows.push_back(bv.b.row(i).transpose());
        auto rows = build_boundary_complement(bv, split);
        const auto inc = domain.incident_inner_edges(v);
        const int owner = *std::min_element(inc.begin(), inc.end());
        auto& dst = complement[owner];
        dst.insert(dst.end(), rows.begin(), rows.end());
    }
    cs.b = Matrix::Zero(b_rows.size(), split.num_b);
    for (int i = 0; i < static_cast<int>(b_rows.size()); ++i)
        cs.b.row(i) = b_rows[i].transpose();

    // inner edges
    std::vector<ConstraintRow> gamma_rows;
    std::vector<ConstraintRow> candidates = xi_rows;
    auto offer = [&](ConstraintRow& row) {
        ++cs.candidate_rows;
        candidates.push_back(row);
        const Vector fp = free_part(row, split);
        double full = 0.0;
        for (double v : row.value)
            full += v * v;
        if (fp.norm() <= kRankTol * std::sqrt(full) || !basis.try_add(fp)) {
            ++cs.dropped_rows;
            return;
        }
        double mx = 0.0;
        for (double v : row.value)
            mx = std::max(mx, std::abs(v));
        for (double& v : row.value)
            v /= mx;
        gamma_rows.push_back(std::move(row));
    };
    // an edge's literal rows are chained along the edge; pivoted QR on their parts orthogonal
    // to the accepted rows picks a well-conditioned independent subset
    auto offer_block = [&](std::vector<ConstraintRow>& rows) {
        std::vector<int> live;
        std::vector<Vector> res;
        for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
            const Vector fp = free_part(rows[i], split);
            double full = 0.0;
            for (double v : rows[i].value)
                full += v * v;
            if (fp.norm() > kRankTol * std::sqrt(full)) {
                live.push_back(i);
                res.push_back(basis.residual(fp));
            }
        }
        std::vector<int> order;
        if (!live.empty()) {
            Matrix m(split.num_f, live.size());
            for (std::size_t c = 0; c < live.size(); ++c)
                m.col(c) = res[c];
            Eigen::ColPivHouseholderQR<Matrix> qr(m);
            const auto& r = qr.matrixQR();
            for (Eigen::Index c = 0; c < std::min(r.rows(), r.cols()); ++c) {
                if (std::abs(r(c, c)) <= kRankTol)
                    break;
                order.push_back(live[qr.colsPermutation().indices()(c)]);
            }
            std::sort(order.begin(), order.end());
        }
        std::vector<bool> keep(rows.size(), false);
        for (int i : order)
            keep[i] = true;
        for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
            if (keep[i]) {
                offer(rows[i]);
            } else {
                ++cs.candidate_rows;
                ++cs.dropped_rows;
                candidates.push_back(rows[i]);
            }
        }
    };
    for (int e = 0; e < static_cast<int>(domain.inner_edges().size()); ++e) {
        auto ec = build_edge_conditions(domain, split, sp.p, sp.r, sp.k, e);
        cs.min_d2_rcond = std::min(cs.min_d2_rcond, ec.d2_rcond);
        for (auto& row : complement[e])
            offer(row);
        offer_block(ec.literal);
    }
    cs.c_gamma = rows_to_sparse(gamma_rows, split.total());
    for (const auto& row : gamma_rows)
        cs.gamma_tags.push_back(row.tag);

    // combinations of candidate rows without u_F part constrain the boundary data
    for (auto& row : candidates) {
        double mx = 0.0;
        for (double v : row.value)
            mx = std::max(mx, std::abs(v));
        if (mx > 0.0)
            for (double& v : row.value)
                v /= mx;
    }
    const SparseMatrix all = rows_to_sparse(candidates, split.total());
    const Matrix all_f = Matrix(free_columns(all, split));
    const Matrix null = null_space_basis(all_f.transpose());
    if (null.cols() > 0 && split.num_b > 0) {
        Matrix compat = null.transpose() * Matrix(boundary_columns(all, split));
        for (Eigen::Index i = 0; i < compat.rows(); ++i)
            if (const double mx = compat.row(i).cwiseAbs().maxCoeff(); mx > 1e-8)
                compat.row(i) /= mx;
            else
                compat.row(i).setZero();
        if (cs.b.rows() > 0) {
            const Eigen::ColPivHouseholderQR<Matrix> qr(cs.b.transpose());
            const Matrix q = Matrix(qr.householderQ()).leftCols(qr.rank());
            compat -= (compat * q) * q.transpose();
        }
        const Eigen::BDCSVD<Matrix> svd(compat, Eigen::ComputeThinV);
        Eigen::Index extra = 0;
        while (extra < svd.singularValues().size() && svd.singularValues()(extra) > 1e-8)
            ++extra;
        if (extra > 0) {
            const Eigen::Index old = cs.b.rows();
            cs.b.conservativeResize(old + extra, Eigen::NoChange);
            for (Eigen::Index i = 0; i < extra; ++i) {
                const Vector row = svd.matrixV().col(i);
                cs.b.row(old + i) = row.transpose() / row.cwiseAbs().maxCoeff();
            }
        }
    }
    return cs;
}

}  // namespace ieti

#pragma once

#include "ieti/assembly.hpp"

#include <string>

namespace ieti {

// Coefficient roles per patch. P = s+1 outer rings, R = interior, B = the m rings on
// sides lying on the domain boundary (B is inside P since s >= m-1), F = P \ B.
// Global u is patch-major: patch * n^2 + flat. u_B and u_F are concatenations over patches.
struct DofSplit {
    enum Role { Bnd, Free, Rem };

    int n = 0, m = 0, s = 0, patches = 0;
    std::vector<std::vector<int>> primal, remaining, bnd, free;
    std::vector<std::vector<Role>> role;      // per patch, per flat index
    std::vector<std::vector<int>> position;   // index within u_B, u_F (global) or R (local)
    std::vector<int> b_offset, f_offset;
    int num_b = 0, num_f = 0;

    int total() const { return patches * n * n; }
    int global(int patch, int flat) const { return patch * n * n + flat; }
};

DofSplit split_dofs(const MultiPatchDomain& domain, int n, int m, int s);

// gamma_l^{(tau)}[u](xi) - gamma_l(xi) as a functional: patch part over view-flat indices
// (a * n + b), d part over the stacked edge-spline coefficients d_0..d_s.
struct GammaRow {
    Vector patch;
    Vector d;
};

// Edge spline spaces S^{p-l, r+s-l}, l = 0..s, on the same k interior knots.
std::vector<UnivariateSpace> edge_spline_spaces(const UnivariateSpace& u, int s);

GammaRow gamma_collocation_row(const UnivariateSpace& u, const std::vector<UnivariateSpace>& edge_spaces,
                               const LinearFunction& alpha, const LinearFunction& beta, int l, double xi);

// Sparse constraint row over global u.
struct ConstraintRow {
    std::vector<int> index;
    std::vector<double> value;
    std::string tag;
};

struct EdgeConditions {
    int edge = -1;
    std::vector<ConstraintRow> literal;  // rows of C1 - D1 D2^{-1} C2 inside the paper's index ranges
    std::vector<ConstraintRow> trimmed;  // i1-side rows outside the ranges
    double d2_rcond = 0.0;
    int eliminated = 0;
};

EdgeConditions build_edge_conditions(const MultiPatchDomain& domain, const DofSplit& split, int p, int r, int k,
                                     int edge);

// Physical jets up to order 2s of each patch at an inner vertex (ccw order); each multi-index row is
// scaled by one factor common to all patches so that its largest entry is 1.
struct VertexJets {
    int vertex = -1;
    std::vector<int> patches;
    std::vector<Matrix> jet;  // binom(2s+2,2) x n^2 per patch
};

VertexJets build_vertex_conditions(const MultiPatchDomain& domain, const DofSplit& split, const TensorSpace& space,
                                   int vertex);

struct BoundaryVertexConditions {
    int vertex = -1;
    std::vector<ConstraintRow> tilde;  // B~ rows over global u
    struct Tag {
        int edge, l, w;
    };
    std::vector<Tag> tags;
    Matrix b;        // rows over u_B (full row rank)
    int target = 0;  // complement size
    // dense form over the touched columns: the first free_count are u_F, the rest u_B
    std::vector<int> columns;
    int free_count = 0;
    Matrix tilde_dense, b_dense;
};

BoundaryVertexConditions build_boundary_vertex_conditions(const MultiPatchDomain& domain, const DofSplit& split,
                                                          const UnivariateSpace& u, int vertex);

std::vector<ConstraintRow> build_boundary_complement(const BoundaryVertexConditions& bv, const DofSplit& split);

struct ConstraintSet {
    DofSplit split;
    std::vector<VertexJets> vertices;
    SparseMatrix c_xi;     // rows x total
    SparseMatrix c_gamma;  // rows x total, unit infinity-norm rows
    Matrix b;              // rows x num_b
    std::vector<std::string> gamma_tags;
    int candidate_rows = 0, dropped_rows = 0;
    double min_d2_rcond = 1.0;
    double xi_scale = 1.0;  // factor applied to c_xi and the jets by the solver

    int jet_size() const { return multi_index_count(2 * split.s); }
    int rows() const { return split.num_b + static_cast<int>(c_xi.rows() + c_gamma.rows()); }
};

struct DiscreteSpace {
    int p = 0, r = 0, k = 0;
};

ConstraintSet assemble_constraints(const MultiPatchDomain& domain, const DiscreteSpace& sp, int m);

// Restrict columns of a global-u matrix to u_F / u_B order.
SparseMatrix free_columns(const SparseMatrix& c, const DofSplit& split);
SparseMatrix boundary_columns(const SparseMatrix& c, const DofSplit& split);

}  // namespace ieti

#pragma once

#include "ieti/geometry.hpp"

#include <functional>

namespace ieti {

using ScalarField = std::function<double(double, double)>;

// Tensor Gauss-Legendre rule, q_order points per direction per knot span.
struct QuadratureRule {
    int q_order = 0;
    std::vector<double> nodes, weights;  // 1D rule over [0,1]
    std::vector<int> span;               // knot span of each node
    int points_1d() const { return static_cast<int>(nodes.size()); }
    int size() const { return points_1d() * points_1d(); }
};

QuadratureRule make_quadrature(const TensorSpace& space, int q_order);

// Gauss-Legendre nodes/weights on [0,1]
void gauss_legendre(int q, std::vector<double>& nodes, std::vector<double>& weights);

// Maps stacked parametric partials (orders 0..d, multi_index order) of f o G to the
// physical partials of f at G(xi). The order-0 entry passes through.
struct DerivativeTransform {
    int order = 0;
    Matrix map;
    double det_jacobian = 0.0;
};

DerivativeTransform physical_derivatives(const GeometryMap& g, double xi1, double xi2, int d);

struct PatchSystem {
    int patch = -1;
    int m = 0;
    SparseMatrix stiffness;
    Vector load;
};

SparseMatrix local_stiffness(const GeometryMap& g, const TensorSpace& space, int m, const QuadratureRule& quad);
SparseMatrix local_mass(const GeometryMap& g, const TensorSpace& space, const QuadratureRule& quad);
Vector local_load(const GeometryMap& g, const TensorSpace& space, const ScalarField& f, const QuadratureRule& quad);

// Indices within the m outermost rings along the given sides (Left, Right, Bottom, Top).
std::vector<int> boundary_ring_indices(int n, int m, const std::array<bool, 4>& sides);

// L2 fit of the target over the whole patch, condensed onto the ring coefficients:
// mass = M_rr - M_ri M_ii^{-1} M_ir, load = b_r - M_ri M_ii^{-1} b_i.
struct BoundaryFitBlock {
    std::vector<int> ring;
    Matrix mass;
    Vector load;
};

BoundaryFitBlock boundary_mass_and_fit_load(const GeometryMap& g, const TensorSpace& space, int m,
                                            const std::array<bool, 4>& boundary_sides, const ScalarField& target,
                                            const QuadratureRule& quad);

// Physical partials (orders 0..d) of the spline with coefficients u at parametric point xi.
Vector physical_partials(const GeometryMap& g, const TensorSpace& space, const Vector& u, double xi1, double xi2,
                         int d);
// Physical partials of every basis function: rows = basis flat index (local support only), as pairs.
struct BasisPartials {
    std::vector<int> index;  // flat indices of the supported functions
    Matrix values;           // values(row, multi_index) physical partial
};
BasisPartials physical_basis_partials(const GeometryMap& g, const TensorSpace& space, double xi1, double xi2, int d);

// Polyharmonic operator rows: Delta^{m/2} (one component) or grad Delta^{(m-1)/2} (two components),
// as coefficient vectors over physical multi-indices of order m.
Matrix polyharmonic_operator(int m);

double binomial(int n, int k);

}  // namespace ieti

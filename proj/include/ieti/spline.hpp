#pragma once

#include "ieti/linalg.hpp"

#include <array>
#include <vector>

namespace ieti {

// S_h^{p,r}([0,1]) on a uniform open knot vector with k interior knots of multiplicity p-r.
class UnivariateSpace {
public:
    UnivariateSpace() = default;
    UnivariateSpace(int degree, int regularity, int interior_knots);

    int degree() const { return p_; }
    int regularity() const { return r_; }
    int interior_knots() const { return k_; }
    int dim() const { return n_; }
    int span_count() const { return k_ + 1; }
    double mesh_size() const { return 1.0 / (k_ + 1); }
    const std::vector<double>& knots() const { return knots_; }

    // Index mu of the knot span containing xi (right limit at interior knots, left limit at 1).
    int find_span(double xi) const;
    // Local evaluation: values(d, i) = N_{first+i}^{(d)}(xi), i = 0..p. Orders above p are zero.
    struct Local {
        int first = 0;
        Matrix values;
    };
    Local eval(double xi, int max_deriv) const;
    // Same, but within the knot span [span/(k+1), (span+1)/(k+1)] (one-sided at its ends).
    Local eval_in_span(double xi, int max_deriv, int span) const;
    // Dense (max_deriv+1) x n table of all basis derivatives.
    Matrix eval_all(double xi, int max_deriv) const;

    std::vector<double> greville() const;

    bool operator==(const UnivariateSpace& o) const { return p_ == o.p_ && r_ == o.r_ && k_ == o.k_; }

private:
    Local eval_at_knot_span(double xi, int max_deriv, int mu) const;

    int p_ = 0, r_ = 0, k_ = 0, n_ = 0;
    std::vector<double> knots_;
};

UnivariateSpace make_space(int p, int r, int k);

// Tensor product space with equal factors; flat index j1*n + j2.
class TensorSpace {
public:
    TensorSpace() = default;
    explicit TensorSpace(UnivariateSpace u) : u_(std::move(u)) {}

    const UnivariateSpace& factor() const { return u_; }
    int n() const { return u_.dim(); }
    int dim() const { return u_.dim() * u_.dim(); }
    int flat(int j1, int j2) const { return j1 * u_.dim() + j2; }
    std::array<int, 2> unflat(int j) const { return {j / u_.dim(), j % u_.dim()}; }

    struct Local {
        std::array<int, 2> first{};
        Matrix d1, d2;  // univariate tables, rows = derivative order
        // partial a,b of local function (i1, i2)
        double partial(int a, int b, int i1, int i2) const { return d1(a, i1) * d2(b, i2); }
    };
    Local eval(double xi1, double xi2, int max_deriv) const;

private:
    UnivariateSpace u_;
};

// Multi-indices (a,b) = d1^a d2^b ordered by total order, then decreasing a.
inline int multi_index_count(int max_order) { return (max_order + 1) * (max_order + 2) / 2; }
inline int multi_index(int a, int b) { const int o = a + b; return o * (o + 1) / 2 + b; }
std::array<int, 2> multi_index_pair(int idx);

}  // namespace ieti

#pragma once

#include "ieti/solver.hpp"

#include <cstdint>

namespace ieti {

// Exact solution with analytic physical partials d1^a d2^b u.
struct Manufactured {
    std::string name;
    std::function<double(double, double, int, int)> partial;

    double operator()(double x, double y) const { return partial(x, y, 0, 0); }
    // (-Delta)^m u
    ScalarField rhs(int m) const;
    // physical partials of orders 0..d in multi_index order
    Vector partials(double x, double y, int d) const;
};

// cos_sin, zero, poly2, poly3
Manufactured manufactured(const std::string& name);
std::vector<std::string> manufactured_names();

SolverConfig manufactured_config(const Manufactured& u, int m, int s, int p, int r, int k);

struct SaddleSolution {
    Vector u, lambda;
    double residual = 0.0, scale = 1.0;
};

// Dense pivoted LU of [K C^T; C 0] [u; lambda] = [f; c].
SaddleSolution direct_saddle_solve(const Matrix& k, const Matrix& c, const Vector& f, const Vector& rhs);

// The full system of the problem: block-diagonal K, C = (I_B; C_Xi; C_Gamma), c = (g; 0; 0).
struct SaddleSystem {
    Matrix k, c;
    Vector f, rhs;
};
SaddleSystem full_saddle_system(const IetiProblem& problem);

struct ErrorNorms {
    double seminorm = 0.0;  // relative H^m-seminorm equivalent
    double l2 = 0.0;        // relative L2
};

// m = 1: |grad e| / |grad u|, m = 2: |Delta e| / |Delta u|, m = 3: |grad Delta e| / |grad Delta u|
ErrorNorms solution_error(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u,
                          const Manufactured& exact, int m, int q_order = 0);
double seminorm_error(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u,
                      const Manufactured& exact, int m, int q_order = 0);

// max over inner edges, samples and physical multi-indices of order <= s of the jump across the edge
double smoothness_probe(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u,
                        int s, int samples = 50);
// max over inner vertices and physical partials of order <= 2s of the spread between patches
double vertex_jet_mismatch(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u);

double max_abs_value(const MultiPatchDomain& domain, const TensorSpace& space, const std::vector<Vector>& u,
                     int samples = 21);

// n^2 - numerical_rank(K, 1e-8) for one patch
int rank_deficiency(const GeometryMap& patch, int m, int p, int r, int k);

struct RankStudyRow {
    int m = 0, p = 0, r = 0, k = 0;
    std::string patch;  // "identity" or "random<i>"
    int n2 = 0, deficiency = 0, bound = 0;
};

// grid p = m..p_max, r = m-1..p-1 over the identity patch and random bilinear patches
std::vector<RankStudyRow> rank_deficiency_study(int m, int p_max, const std::vector<int>& ks, int random_patches,
                                                std::uint32_t seed = 1);
GeometryMap random_bilinear_patch(std::uint32_t seed);

struct ConvergenceLevel {
    int k = 0;
    double h = 0.0;
    int dof = 0;
    double error = 0.0, l2_error = 0.0;
    double observed_order = 0.0;  // NaN on the first level
    int cg_iterations = 0;
    double smoothness = 0.0, vertex_mismatch = 0.0, u_max = 0.0;
    double seconds = 0.0;
};

struct ConvergenceReport {
    int m = 0;
    std::string domain, solution;
    std::vector<ConvergenceLevel> levels;

    double final_order() const { return levels.size() < 2 ? 0.0 : levels.back().observed_order; }
};

// levels >= 1 from config.k: k_j = 2^j (k_0 + 1) - 1, i.e. h halves
ConvergenceReport convergence_study(const MultiPatchDomain& domain, const SolverConfig& config,
                                    const Manufactured& exact, int levels);

// gamma collocation at all Greville points on both sides (edge splines as extra trailing unknowns)
// and inner-vertex C^{2s} jets; rows scaled to unit infinity norm
Matrix uneliminated_system(const MultiPatchDomain& domain, const DiscreteSpace& sp, int m);

// null space dimension (SVD) of the uneliminated system: u_B = 0, gamma collocation at all Greville
// points on both sides with the edge splines as extra unknowns, inner-vertex C^{2s} jets
int brute_force_dimension(const MultiPatchDomain& domain, const DiscreteSpace& sp, int m);

}  // namespace ieti

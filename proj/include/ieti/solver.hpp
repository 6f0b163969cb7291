#pragma once

#include "ieti/constraints.hpp"

#include <map>
#include <memory>

namespace ieti {

struct SolverConfig {
    int m = 2, s = 1, p = 3, r = 1, k = 3;
    ScalarField f;         // right-hand side of (-Delta)^m u = f
    ScalarField boundary;  // target of the boundary fit
    double cg_tol = 1e-10;
    int cg_max_iter = 0;   // 0: 10 * dual size
    int quad_order = 0;    // 0: p + 2
    bool drop_gamma = false;  // ablation: solve without edge coupling
};

// ConfigError naming the violated inequality.
void validate_config(const SolverConfig& config);

// Per-patch blocks of K over the F / R / B index sets of the split.
struct PatchBlocks {
    SparseMatrix stiffness;
    Vector load;
    std::vector<int> f, r, b;  // flat indices
    Matrix s_f;                // K_FF - K_RF^T K_RR^{-1} K_RF
    Matrix krr_krf;            // K_RR^{-1} K_RF
    Vector krr_load;           // K_RR^{-1} (f_R - K_RB g)
    Vector f_tilde;            // f_F - K_FB g - K_RF^T K_RR^{-1} (f_R - K_RB g)
};

// Inverse of S~ = [[S_F, C_XiF^T], [C_XiF, 0]] by the extended vertex coupling: every patch jet at
// an inner vertex is tied to a common vertex value mu, giving patch-local saddle blocks T^(j) and a
// small dense system in mu.
class DualPrimalFactorization {
public:
    DualPrimalFactorization(const std::vector<Matrix>& s_f, const ConstraintSet& cs);

    // r = (r_F; r_Xi) -> S~^{-1} r
    Vector apply(const Vector& r) const;
    Matrix assemble() const;

    int size() const { return num_f_ + num_xi_; }
    int coupling_size() const { return static_cast<int>(z_lu_.size()); }
    double min_t_rcond() const { return min_t_rcond_; }

private:
    struct Slot {
        int vertex, position;  // vertex index into cs.vertices, position in its patch cycle
        Matrix jet;            // jet rows over the patch's F columns
    };
    struct Block {
        int f_offset = 0, f_count = 0;
        std::vector<Slot> slots;
        LuFactorization t;
        Matrix w;  // T^{-1} G
    };

    Matrix solve_t(const Block& b, Matrix rhs) const;

    int num_f_ = 0, num_xi_ = 0, jet_ = 0;
    std::vector<int> valency_, xi_offset_;
    std::vector<Block> blocks_;
    LuFactorization z_lu_;
    double min_t_rcond_ = 1.0;
    double t_scale_ = 1.0;  // multiplier block of T^(j) is scaled by this to balance it against S_F
    std::vector<Matrix> s_f_;
    Matrix c_xi_f_;
};

struct Diagnostics {
    int n = 0, patches = 0;
    int num_b = 0, num_f = 0, num_r = 0;
    int rows_b = 0, rows_xi = 0, rows_gamma = 0, rows_boundary_vertex = 0;
    int candidate_rows = 0, dropped_rows = 0;
    int dual_size = 0, coupling_size = 0;
    int cg_iterations = 0;
    double cg_residual = 0.0;
    std::vector<double> cg_history;
    double min_d2_rcond = 1.0, min_t_rcond = 1.0;
    double boundary_fit_residual = 0.0;
    double constraint_residual = 0.0, saddle_residual = 0.0, scale = 1.0;
    std::map<std::string, double> seconds;
};

struct IetiSolution {
    int n = 0;
    std::vector<Vector> u;  // per patch, n^2 coefficients
    Vector u_global;        // patch-major
    Vector lambda_gamma, lambda_xi, lambda_b;
    Diagnostics diagnostics;
};

// Assembled pipeline state; each stage is exposed for the oracles.
class IetiProblem {
public:
    IetiProblem(const MultiPatchDomain& domain, const SolverConfig& config);

    const MultiPatchDomain& domain() const { return domain_; }
    const SolverConfig& config() const { return config_; }
    const TensorSpace& space() const { return space_; }
    const ConstraintSet& constraints() const { return cs_; }
    const DofSplit& split() const { return cs_.split; }
    const std::vector<PatchBlocks>& patches() const { return blocks_; }
    const Vector& boundary_values() const { return g_; }
    const DualPrimalFactorization& factorization() const { return *fact_; }
    const SparseMatrix& c_gamma_f() const { return c_gamma_f_; }
    const Vector& g_bar() const { return g_bar_; }

    Vector apply_dual(const Vector& lambda) const;
    Vector dual_rhs() const;
    Matrix dual_matrix() const;

    IetiSolution solve() const;

private:
    MultiPatchDomain domain_;
    SolverConfig config_;
    TensorSpace space_;
    ConstraintSet cs_;
    std::vector<PatchBlocks> blocks_;
    Vector g_;
    SparseMatrix c_gamma_f_;
    Vector g_bar_;
    std::unique_ptr<DualPrimalFactorization> fact_;
    Diagnostics diag_;
};

// Boundary fit: minimize (u - t)^T M (u - t) over B u = 0 with b = M t given as a load.
struct BoundaryFit {
    Vector u, mu;
    double residual = 0.0;
};
BoundaryFit solve_boundary_fit(const Matrix& mass, const Matrix& b, const Vector& load);

IetiSolution solve(const MultiPatchDomain& domain, const SolverConfig& config);

}  // namespace ieti

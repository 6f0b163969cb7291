#pragma once

#include "ieti/verify.hpp"

#include <iosfwd>
#include <optional>

namespace ieti {

struct RunConfig {
    std::string domain = "corner3L";  // built-in name or domain file
    int m = 2, s = 1, p = 3, r = 1;
    double h0 = 0.25;  // k = 1/h0 - 1
    int levels = 1;
    std::string solution = "cos_sin";
    double cg_tol = 1e-10;
    int cg_max_iter = 0;
    std::string output = ".";
};

// Fields present in the JSON object override the defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// ConfigError naming the violated inequality.
void validate_run_config(const RunConfig& config);

int knots_for(double h0);
MultiPatchDomain make_domain(const RunConfig& config);
SolverConfig solver_config(const RunConfig& config, int k);

void cmd_generate(const std::string& name, const std::string& path, int s = 1);
IetiSolution cmd_solve(const RunConfig& config);
ConvergenceReport cmd_convergence(const RunConfig& config);
std::vector<RankStudyRow> cmd_rank_study(int m, int p_max, const std::vector<int>& ks, int random_patches,
                                         std::uint32_t seed, const std::string& output);

void write_convergence_csv(const ConvergenceReport& report, std::ostream& out);
void write_rank_study_csv(const std::vector<RankStudyRow>& rows, std::ostream& out);

// 0 success, 1 numerical failure, 2 config error
int run_cli(int argc, const char* const* argv);

}  // namespace ieti

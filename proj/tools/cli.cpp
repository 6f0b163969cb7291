#include "ieti/cli.hpp"

#include "ieti/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace ieti {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
    out << std::setprecision(17);
    return out;
}

bool is_builtin(const std::string& name)
{
    for (const auto& b : builtin_domain_names())
        if (b == name)
            return true;
    return false;
}

template <class T>
void take(const json& j, const char* key, T& value)
{
    if (!j.contains(key))
        return;
    try {
        value = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("bad config field '") + key + "': " + e.what());
    }
}

std::string format_number(double x)
{
    if (std::isnan(x))
        return "";
    std::ostringstream ss;
    ss << std::setprecision(17) << x;
    return ss.str();
}

json coefficients_json(const std::vector<Vector>& u)
{
    json patches = json::array();
    for (const auto& v : u)
        patches.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    return patches;
}

json diagnostics_json(const Diagnostics& d)
{
    return {{"n", d.n},
            {"patches", d.patches},
            {"num_b", d.num_b},
            {"num_f", d.num_f},
            {"num_r", d.num_r},
            {"rows_b", d.rows_b},
            {"rows_xi", d.rows_xi},
            {"rows_gamma", d.rows_gamma},
            {"rows_boundary_vertex", d.rows_boundary_vertex},
            {"candidate_rows", d.candidate_rows},
            {"dropped_rows", d.dropped_rows},
            {"dual_size", d.dual_size},
            {"coupling_size", d.coupling_size},
            {"cg_iterations", d.cg_iterations},
            {"cg_residual", d.cg_residual},
            {"cg_history", d.cg_history},
            {"min_d2_rcond", d.min_d2_rcond},
            {"min_t_rcond", d.min_t_rcond},
            {"boundary_fit_residual", d.boundary_fit_residual},
            {"constraint_residual", d.constraint_residual},
            {"saddle_residual", d.saddle_residual},
            {"scale", d.scale},
            {"seconds", d.seconds}};
}

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError:
    case ErrorKind::IoError: return 2;
    default: return 1;
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw Error(ErrorKind::ConfigError, "config must be a JSON object");
    RunConfig c;
    take(j, "domain", c.domain);
    take(j, "m", c.m);
    take(j, "s", c.s);
    take(j, "p", c.p);
    take(j, "r", c.r);
    take(j, "h0", c.h0);
    take(j, "levels", c.levels);
    take(j, "solution", c.solution);
    take(j, "cg_tol", c.cg_tol);
    take(j, "cg_max_iter", c.cg_max_iter);
    take(j, "output", c.output);
    return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

int knots_for(double h0)
{
    if (!(h0 > 0.0) || h0 > 1.0)
        throw Error(ErrorKind::ConfigError, "h0 must lie in (0, 1]");
    const double inv = 1.0 / h0;
    const int k = static_cast<int>(std::lround(inv)) - 1;
    if (std::abs(inv - (k + 1)) > 1e-9 * inv)
        throw Error(ErrorKind::ConfigError, "1/h0 must be an integer");
    return k;
}

void validate_run_config(const RunConfig& config)
{
    if (config.levels < 1)
        throw Error(ErrorKind::ConfigError, "levels must be >= 1");
    manufactured(config.solution);
    SolverConfig c = solver_config(config, knots_for(config.h0));
    validate_config(c);
}

MultiPatchDomain make_domain(const RunConfig& config)
{
    if (is_builtin(config.domain))
        return build_bilinear_domain(builtin_mesh(config.domain), config.s);
    auto d = load_domain(config.domain);
    if (d.smoothness() != config.s)
        throw Error(ErrorKind::ConfigError, "domain file has s = " + std::to_string(d.smoothness()) +
                                                ", config has s = " + std::to_string(config.s));
    return d;
}

SolverConfig solver_config(const RunConfig& config, int k)
{
    SolverConfig c;
    try {
        c = manufactured_config(manufactured(config.solution), config.m, config.s, config.p, config.r, k);
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigError, e.detail());
    }
    c.cg_tol = config.cg_tol;
    c.cg_max_iter = config.cg_max_iter;
    return c;
}

void cmd_generate(const std::string& name, const std::string& path, int s)
{
    if (!is_builtin(name))
        throw Error(ErrorKind::ConfigError, "unknown built-in domain '" + name + "'");
    auto out = open_out(path);
    out << domain_to_json(build_bilinear_domain(builtin_mesh(name), s)) << '\n';
    if (!out)
        throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
}

IetiSolution cmd_solve(const RunConfig& config)
{
    validate_run_config(config);
    const auto domain = make_domain(config);
    const auto exact = manufactured(config.solution);
    const int k = knots_for(config.h0);
    IetiProblem pb(domain, solver_config(config, k));
    auto sol = pb.solve();

    const std::filesystem::path dir(config.output);
    json s = {{"domain", config.domain}, {"m", config.m},       {"s", config.s},
              {"p", config.p},           {"r", config.r},       {"k", k},
              {"n", sol.n},              {"coefficients", coefficients_json(sol.u)}};
    open_out(dir / "solution.json") << s.dump(1) << '\n';

    json d = diagnostics_json(sol.diagnostics);
    d["smoothness_jump"] = smoothness_probe(domain, pb.space(), sol.u, config.s);
    d["vertex_mismatch"] = vertex_jet_mismatch(domain, pb.space(), sol.u);
    d["u_max"] = max_abs_value(domain, pb.space(), sol.u);
    if (exact.name != "zero") {
        const auto err = solution_error(domain, pb.space(), sol.u, exact, config.m);
        d["seminorm_error"] = err.seminorm;
        d["l2_error"] = err.l2;
    }
    open_out(dir / "diagnostics.json") << d.dump(1) << '\n';
    return sol;
}

ConvergenceReport cmd_convergence(const RunConfig& config)
{
    validate_run_config(config);
    const auto domain = make_domain(config);
    const auto exact = manufactured(config.solution);
    auto rep = convergence_study(domain, solver_config(config, knots_for(config.h0)), exact, config.levels);
    rep.domain = config.domain;

    const std::filesystem::path dir(config.output);
    auto csv = open_out(dir / "convergence.csv");
    write_convergence_csv(rep, csv);
    auto plot = open_out(dir / "convergence_plot.dat");
    plot << "# log(h) log(error)\n";
    for (const auto& lv : rep.levels)
        plot << std::log(lv.h) << ' ' << std::log(lv.error) << '\n';
    return rep;
}

std::vector<RankStudyRow> cmd_rank_study(int m, int p_max, const std::vector<int>& ks, int random_patches,
                                         std::uint32_t seed, const std::string& output)
{
    if (m < 1 || random_patches < 0)
        throw Error(ErrorKind::ConfigError, "rank study needs m >= 1 and random >= 0");
    auto rows = rank_deficiency_study(m, p_max, ks, random_patches, seed);
    auto out = open_out(std::filesystem::path(output) / "rank_study.csv");
    write_rank_study_csv(rows, out);
    return rows;
}

void write_convergence_csv(const ConvergenceReport& report, std::ostream& out)
{
    out << "level,h,dof,error,observed_order\n";
    for (std::size_t j = 0; j < report.levels.size(); ++j) {
        const auto& lv = report.levels[j];
        out << j << ',' << format_number(lv.h) << ',' << lv.dof << ',' << format_number(lv.error) << ','
            << format_number(lv.observed_order) << '\n';
    }
}

void write_rank_study_csv(const std::vector<RankStudyRow>& rows, std::ostream& out)
{
    out << "m,p,r,k,patch,n2,deficiency,bound\n";
    for (const auto& r : rows)
        out << r.m << ',' << r.p << ',' << r.r << ',' << r.k << ',' << r.patch << ',' << r.n2 << ','
            << r.deficiency << ',' << r.bound << '\n';
}

int run_cli(int argc, const char* const* argv)
{
    CLI::App app{"IETI solver for the polyharmonic equation on planar multi-patch domains"};
    app.require_subcommand(1);

    std::string config_path;
    RunConfig flags;
    std::string gen_name, gen_path;
    int gen_s = 1;
    int rank_m = 2, rank_pmax = 5, rank_random = 5;
    std::uint32_t rank_seed = 1;
    std::vector<int> rank_ks{0};
    std::string rank_out = ".";

    auto* gen = app.add_subcommand("generate", "write a built-in domain to a file");
    gen->add_option("name", gen_name, "square1, strip2, corner3L, corner3, star5")->required();
    gen->add_option("path", gen_path, "output file")->required();
    gen->add_option("--s", gen_s, "smoothness recorded in the file");

    auto add_run_options = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "JSON config file");
        cmd->add_option("--domain", flags.domain, "built-in name or domain file");
        cmd->add_option("--m", flags.m);
        cmd->add_option("--s", flags.s);
        cmd->add_option("--p", flags.p);
        cmd->add_option("--r", flags.r);
        cmd->add_option("--h0", flags.h0, "initial mesh size, 1/h0 integer");
        cmd->add_option("--levels", flags.levels);
        cmd->add_option("--solution", flags.solution, "cos_sin, zero, poly2, poly3");
        cmd->add_option("--cg-tol", flags.cg_tol);
        cmd->add_option("--cg-max-iter", flags.cg_max_iter);
        cmd->add_option("-o,--output", flags.output, "output directory");
    };
    auto* solve_cmd = app.add_subcommand("solve", "solve once and write solution.json, diagnostics.json");
    add_run_options(solve_cmd);
    auto* conv = app.add_subcommand("convergence", "refinement study, writes convergence.csv");
    add_run_options(conv);

    auto* rank = app.add_subcommand("rank-study", "single-patch stiffness rank deficiencies, rank_study.csv");
    rank->add_option("--m", rank_m);
    rank->add_option("--p-max", rank_pmax);
    rank->add_option("--k", rank_ks)->delimiter(',');
    rank->add_option("--random", rank_random, "random bilinear patches");
    rank->add_option("--seed", rank_seed);
    rank->add_option("-o,--output", rank_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    // flags given on the command line override the config file
    auto resolve = [&](CLI::App* cmd) {
        RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        auto given = [&](const char* name) { return cmd->count(name) > 0; };
        if (given("--domain")) c.domain = flags.domain;
        if (given("--m")) c.m = flags.m;
        if (given("--s")) c.s = flags.s;
        if (given("--p")) c.p = flags.p;
        if (given("--r")) c.r = flags.r;
        if (given("--h0")) c.h0 = flags.h0;
        if (given("--levels")) c.levels = flags.levels;
        if (given("--solution")) c.solution = flags.solution;
        if (given("--cg-tol")) c.cg_tol = flags.cg_tol;
        if (given("--cg-max-iter")) c.cg_max_iter = flags.cg_max_iter;
        if (given("--output")) c.output = flags.output;
        return c;
    };

    try {
        if (*gen) {
            cmd_generate(gen_name, gen_path, gen_s);
        } else if (*solve_cmd) {
            const auto sol = cmd_solve(resolve(solve_cmd));
            std::cout << "cg_iterations " << sol.diagnostics.cg_iterations << " residual "
                      << sol.diagnostics.cg_residual << '\n';
        } else if (*conv) {
            const auto rep = cmd_convergence(resolve(conv));
            write_convergence_csv(rep, std::cout);
        } else if (*rank) {
            const auto rows = cmd_rank_study(rank_m, rank_pmax, rank_ks, rank_random, rank_seed, rank_out);
            std::cout << rows.size() << " rows\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace ieti

#include <doctest.h>

#include "ieti/cli.hpp"
#include "ieti/error.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ieti;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args)
{
    args.insert(args.begin(), "ieti");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("ieti_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("generate round-trips built-in domains")
{
    const auto dir = scratch("generate");
    struct Case {
        const char* name;
        int patches, inner_edges;
    };
    for (const auto& c : {Case{"corner3L", 3, 2}, Case{"square1", 1, 0}, Case{"strip2", 2, 1}, Case{"star5", 5, 5}}) {
        CAPTURE(c.name);
        const auto path = (dir / (std::string(c.name) + ".json")).string();
        REQUIRE(run({"generate", c.name, path}) == 0);
        const auto d = load_domain(path);
        CHECK(d.patch_count() == c.patches);
        CHECK(static_cast<int>(d.inner_edges().size()) == c.inner_edges);
    }
    CHECK(run({"generate", "nope", (dir / "x.json").string()}) == 2);
}

TEST_CASE("solve writes solution and diagnostics")
{
    const auto dir = scratch("solve");
    REQUIRE(run({"solve", "--domain", "corner3L", "--h0", "0.5", "-o", dir.string()}) == 0);
    const auto diag = nlohmann::json::parse(slurp(dir / "diagnostics.json"));
    CHECK(diag["cg_residual"].get<double>() <= 1e-10);
    CHECK(diag["saddle_residual"].get<double>() <= 1e-8 * diag["scale"].get<double>());
    CHECK(diag["smoothness_jump"].get<double>() <= 1e-8 * diag["u_max"].get<double>());
    const auto sol = nlohmann::json::parse(slurp(dir / "solution.json"));
    CHECK(sol["coefficients"].size() == 3);
}

TEST_CASE("solve exit codes and the zero solution")
{
    const auto dir = scratch("zero");
    CHECK(run({"solve", "--p", "2", "-o", dir.string()}) == 2);
    CHECK(run({"solve", "--bogus"}) == 2);
    try {
        cmd_solve(RunConfig{.p = 2, .output = dir.string()});
        FAIL("expected ConfigError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigError);
        CHECK(std::string(e.what()).find("p >= 2s+1") != std::string::npos);
    }

    REQUIRE(run({"solve", "--solution", "zero", "--h0", "0.5", "-o", dir.string()}) == 0);
    const auto sol = nlohmann::json::parse(slurp(dir / "solution.json"));
    for (const auto& patch : sol["coefficients"])
        for (const auto& x : patch)
            CHECK(x.get<double>() == 0.0);
}

TEST_CASE("config file with flag overrides")
{
    const auto dir = scratch("config");
    const auto cfg = dir / "run.json";
    std::ofstream(cfg) << R"({"domain": "strip2", "m": 1, "s": 0, "p": 2, "r": 1, "h0": 0.5, "levels": 2})";
    const auto c = load_run_config(cfg.string());
    CHECK(c.domain == "strip2");
    CHECK(c.levels == 2);
    CHECK(c.m == 1);
    REQUIRE(run({"convergence", "-c", cfg.string(), "--levels", "3", "-o", dir.string()}) == 0);
    const auto csv = slurp(dir / "convergence.csv");
    CHECK(csv.rfind("level,h,dof,error,observed_order\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(fs::exists(dir / "convergence_plot.dat"));
    CHECK_THROWS_AS(parse_run_config("[1]"), Error);
    CHECK(run({"solve", "-c", (dir / "missing.json").string()}) == 2);
}

TEST_CASE("convergence is deterministic and accepts one level")
{
    const auto a = scratch("conv_a"), b = scratch("conv_b");
    const std::vector<std::string> common{"convergence", "--domain", "strip2", "--h0", "0.5", "--levels", "2"};
    auto with = [&](const fs::path& dir) {
        auto args = common;
        args.insert(args.end(), {"-o", dir.string()});
        return run(args);
    };
    REQUIRE(with(a) == 0);
    REQUIRE(with(b) == 0);
    CHECK(slurp(a / "convergence.csv") == slurp(b / "convergence.csv"));

    REQUIRE(run({"convergence", "--domain", "strip2", "--h0", "0.5", "--levels", "1", "-o", a.string()}) == 0);
    const auto csv = slurp(a / "convergence.csv");
    CHECK(csv.substr(csv.size() - 2) == ",\n");
}

TEST_CASE("rank study CSV")
{
    const auto dir = scratch("rank");
    REQUIRE(run({"rank-study", "--m", "2", "--p-max", "5", "--random", "0", "-o", dir.string()}) == 0);
    const auto csv = slurp(dir / "rank_study.csv");
    CHECK(csv.find("2,2,1,0,identity,9,5,") != std::string::npos);
    CHECK(csv.find("2,3,1,0,identity,16,8,") != std::string::npos);

    REQUIRE(run({"rank-study", "--m", "3", "--p-max", "3", "--random", "0", "-o", dir.string()}) == 0);
    CHECK(slurp(dir / "rank_study.csv").find("3,3,2,0,identity,16,9,") != std::string::npos);

    REQUIRE(run({"rank-study", "--m", "3", "--p-max", "2", "-o", dir.string()}) == 0);
    CHECK(slurp(dir / "rank_study.csv") == "m,p,r,k,patch,n2,deficiency,bound\n");
}

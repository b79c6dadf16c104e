#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output; // stdout and stderr combined
};

const char* cli_path() {
    const char* bin = std::getenv("CRNOSC_CLI");
    REQUIRE_MESSAGE(bin != nullptr, "CRNOSC_CLI must point at the built binary");
    return bin;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("crnosc_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

CmdResult run_cli(const std::string& args, const fs::path& dir) {
    fs::path log = dir / "cmd_output.txt";
    std::string cmd = std::string(cli_path()) + " " + args + " > " +
                      log.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    CmdResult res;
    res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    res.output = slurp(log);
    return res;
}

int count_occurrences(const std::string& text, const std::string& needle) {
    int n = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size()))
        ++n;
    return n;
}

} // namespace

TEST_CASE("list-presets shows the preset table with aliases") {
    fs::path dir = fresh_dir("list");
    CmdResult res = run_cli("list-presets", dir);
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("example_3_2") != std::string::npos);
    CHECK(res.output.find("example_3_3") != std::string::npos);
    CHECK(res.output.find("terminate_by_x1") != std::string::npos);
    CHECK(res.output.find("example_5_2") != std::string::npos); // alias
}

TEST_CASE("run writes trajectory and summary, deterministically") {
    fs::path a = fresh_dir("run_a");
    CmdResult res =
        run_cli("run --preset example_3_2 --set t_end=10 --out " + a.string(), a);
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("[PASS]") != std::string::npos);
    CHECK(res.output.find("[FAIL]") == std::string::npos);

    std::string csv = slurp(a / "example_3_2.trajectory.csv");
    CHECK(csv.rfind("t,X,Y\n", 0) == 0);

    nlohmann::json summary =
        nlohmann::json::parse(slurp(a / "example_3_2.summary.json"));
    CHECK(summary["ok"] == true);
    CHECK(summary.contains("period_estimate"));
    CHECK(summary["assertions"].size() >= 1);

    fs::path b = fresh_dir("run_b");
    run_cli("run --preset example_3_2 --set t_end=10 --out " + b.string(), b);
    CHECK(slurp(b / "example_3_2.trajectory.csv") == csv);
}

TEST_CASE("run reports assertion failures through the exit code") {
    fs::path dir = fresh_dir("run_fail");
    CmdResult res = run_cli(
        "run --preset example_3_3 --set p=3.5 --out " + dir.string(), dir);
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("[FAIL]") != std::string::npos);

    CmdResult lax = run_cli(
        "run --preset example_3_3 --set p=3.5 --no-assert --out " + dir.string(), dir);
    CHECK(lax.exit_code == 0);
}

TEST_CASE("config mistakes exit with status 2") {
    fs::path dir = fresh_dir("cfg");
    CmdResult unknown = run_cli("run --preset no_such_thing --out " + dir.string(), dir);
    CHECK(unknown.exit_code == 2);
    CHECK(unknown.output.find("config error") != std::string::npos);

    CmdResult bad_param =
        run_cli("run --preset example_3_2 --set zeta=1 --out " + dir.string(), dir);
    CHECK(bad_param.exit_code == 2);

    CmdResult bad_flag = run_cli("run --frobnicate --out " + dir.string(), dir);
    CHECK(bad_flag.exit_code == 2);
}

TEST_CASE("emit-crn prints and writes the reaction listing") {
    fs::path dir = fresh_dir("emit");
    CmdResult res = run_cli("emit-crn --preset example_3_2 --out " + dir.string(), dir);
    CHECK(res.exit_code == 0);
    CHECK(count_occurrences(res.output, "->[") == 7);

    std::string txt = slurp(dir / "example_3_2.network.txt");
    CHECK(count_occurrences(txt, "->[") == 7);
    nlohmann::json net = nlohmann::json::parse(slurp(dir / "example_3_2.network.json"));
    CHECK(net["reactions"].size() == 7);
}

TEST_CASE("inline systems pass through the realizability gate") {
    fs::path dir = fresh_dir("inline");

    std::ofstream(dir / "bad.json") << R"({"system": {
        "variables": ["x", "y"],
        "rhs": {"x": [{"coeff": 1.0, "exps": {"x": 1}}],
                "y": [{"coeff": 1.0, "exps": {"x": 1}},
                      {"coeff": -2.0, "exps": {}}]}}})";
    CmdResult bad =
        run_cli("emit-crn --config " + (dir / "bad.json").string(), dir);
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("realizable") != std::string::npos);

    std::ofstream(dir / "ok.json") << R"({"system": {
        "variables": ["a", "b"],
        "rhs": {"a": [{"coeff": -1.0, "exps": {"a": 1}}],
                "b": [{"coeff": 1.0, "exps": {"a": 1}},
                      {"coeff": -0.5, "exps": {"b": 1}}]},
        "initial": {"a": 2.0, "b": 0.0}},
        "t_span": [0, 5]})";
    CmdResult ok = run_cli("run --config " + (dir / "ok.json").string() +
                               " --out " + dir.string(), dir);
    CHECK(ok.exit_code == 0);
    std::string csv = slurp(dir / "inline.trajectory.csv");
    CHECK(csv.rfind("t,a,b\n", 0) == 0);
}

TEST_CASE("sweep aggregates one row per grid point") {
    fs::path dir = fresh_dir("sweep");
    CmdResult res = run_cli("sweep --preset example_3_3 --param c --values 400"
                            " --set t_end=80 --out " + dir.string(), dir);
    CHECK(res.exit_code == 0);
    std::string csv = slurp(dir / "sweep.csv");
    CHECK(csv.rfind("c,symmetry,min_uv,t_low,t_high,error\n", 0) == 0);
    CHECK(csv.find("\n400,true,") != std::string::npos);

    fs::path dir2 = fresh_dir("sweep_empty");
    CmdResult empty =
        run_cli("sweep --preset example_3_3 --out " + dir2.string(), dir2);
    CHECK(empty.exit_code == 0);
    CHECK(slurp(dir2 / "sweep.csv") == "symmetry,min_uv,t_low,t_high,error\n");
}

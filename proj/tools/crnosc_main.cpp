// Command-line front end: scenario presets, config loading, simulation,
// CSV/JSON emission, and verdict reporting.
//
// Exit codes: 0 all enabled assertions pass, 1 assertion failure,
//             2 config error, 3 integration failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <crnosc/presets.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIntegration = 3;

struct CommonArgs {
    std::string preset;
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    bool no_assert = false;
};

bool parse_number(const std::string& text, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(text, &used);
        return used == text.size();
    } catch (...) {
        return false;
    }
}

// Builds the scenario config document from --config, --preset, and --set
// overrides. Dotted paths route into config sections; bare keys are
// declared-parameter overrides.
nlohmann::json build_config(const CommonArgs& args) {
    nlohmann::json cfg = nlohmann::json::object();
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) throw std::invalid_argument("cannot open config file " + args.config_path);
        cfg = nlohmann::json::parse(in);
        if (!cfg.is_object()) throw std::invalid_argument("config root must be an object");
    }
    if (!args.preset.empty()) cfg["preset"] = args.preset;

    for (const std::string& kv : args.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::invalid_argument("--set expects key=value, got \"" + kv + "\"");
        std::string key = kv.substr(0, eq);
        std::string val = kv.substr(eq + 1);
        double num = 0.0;
        bool is_num = parse_number(val, num);

        auto dot = key.find('.');
        if (dot == std::string::npos) {
            if (key == "t_begin" || key == "t_end") {
                if (!is_num) throw std::invalid_argument(key + " needs a numeric value");
                cfg["t_span_patch"][key] = num;
                continue;
            }
            if (!is_num)
                throw std::invalid_argument("parameter override " + key +
                                            " needs a numeric value");
            cfg["parameters"][key] = num;
            continue;
        }
        std::string section = key.substr(0, dot);
        std::string field = key.substr(dot + 1);
        if (section != "initial" && section != "integrator" && section != "symmetry")
            throw std::invalid_argument("unknown --set section \"" + section + "\"");
        if (section == "integrator" && field == "method")
            cfg[section][field] = val;
        else if (is_num)
            cfg[section][field] = num;
        else
            throw std::invalid_argument("--set " + key + " needs a numeric value");
    }
    if (args.no_assert) cfg["assertions"] = false;
    return cfg;
}

crnosc::ResolvedScenario resolve_with_patch(nlohmann::json cfg) {
    nlohmann::json patch;
    if (cfg.contains("t_span_patch")) {
        patch = cfg.at("t_span_patch");
        cfg.erase("t_span_patch");
    }
    crnosc::ResolvedScenario rs = crnosc::resolve_scenario(cfg);
    if (patch.contains("t_begin")) rs.t_span.first = patch["t_begin"].get<double>();
    if (patch.contains("t_end")) rs.t_span.second = patch["t_end"].get<double>();
    if (!(rs.t_span.second > rs.t_span.first))
        throw std::invalid_argument("t_span must have t1 > t0");
    return rs;
}

std::filesystem::path ensure_out_dir(const CommonArgs& args) {
    std::filesystem::path dir =
        args.out_dir.empty() ? crnosc::default_out_dir() : args.out_dir;
    std::filesystem::create_directories(dir);
    return dir;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_network_files(const crnosc::ComposedSystem& sys, const std::string& name,
                         const std::filesystem::path& dir) {
    write_text_file(dir / (name + ".network.json"),
                    crnosc::network_to_json(sys.network).dump(2) + "\n");
    write_text_file(dir / (name + ".network.txt"), crnosc::network_text(sys.network));
}

int cmd_run(const CommonArgs& args, bool emit_network) {
    crnosc::ResolvedScenario rs;
    try {
        rs = resolve_with_patch(build_config(args));
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    crnosc::ScenarioResult res;
    try {
        res = crnosc::run_scenario(rs.system, rs.t_span, rs.integ, rs.opts);
    } catch (const crnosc::integration_error& e) {
        std::cerr << "integration error: " << e.what() << "\n";
        return kExitIntegration;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        auto dir = ensure_out_dir(args);
        std::ofstream csv(dir / (rs.name + ".trajectory.csv"));
        res.trajectory.to_csv(csv);
        write_text_file(dir / (rs.name + ".summary.json"), res.summary.dump(2) + "\n");
        if (emit_network) write_network_files(rs.system, rs.name, dir);
        std::cout << "wrote " << (dir / (rs.name + ".trajectory.csv")).string() << "\n";
        std::cout << "wrote " << (dir / (rs.name + ".summary.json")).string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "output error: " << e.what() << "\n";
        return kExitConfig;
    }

    for (const auto& jc : res.summary["assertions"])
        std::cout << (jc["passed"].get<bool>() ? "[PASS] " : "[FAIL] ")
                  << jc["name"].get<std::string>() << ": "
                  << jc["detail"].get<std::string>() << "\n";
    if (!res.ok) {
        std::cout << rs.name << ": " << res.failures.size() << " assertion(s) failed\n";
        return kExitAssertion;
    }
    std::cout << rs.name << ": ok\n";
    return kExitOk;
}

int cmd_emit_crn(const CommonArgs& args) {
    try {
        crnosc::ResolvedScenario rs = resolve_with_patch(build_config(args));
        auto dir = ensure_out_dir(args);
        write_network_files(rs.system, rs.name, dir);
        std::cout << crnosc::network_text(rs.system.network);
        std::cout << "wrote " << (dir / (rs.name + ".network.json")).string() << " and .txt\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
}

int cmd_sweep(const CommonArgs& args, const std::vector<std::string>& params,
              const std::vector<std::string>& value_lists, const std::string& out_name) {
    if (params.size() != value_lists.size()) {
        std::cerr << "config error: each --param needs a matching --values list\n";
        return kExitConfig;
    }
    std::vector<std::vector<double>> grids;
    for (const std::string& lst : value_lists) {
        std::vector<double> vals;
        std::string item;
        std::istringstream ss(lst);
        while (std::getline(ss, item, ',')) {
            double d = 0.0;
            if (!parse_number(item, d)) {
                std::cerr << "config error: bad numeric value \"" << item << "\"\n";
                return kExitConfig;
            }
            vals.push_back(d);
        }
        if (vals.empty()) {
            std::cerr << "config error: empty --values list\n";
            return kExitConfig;
        }
        grids.push_back(vals);
    }

    nlohmann::json base;
    try {
        base = build_config(args);
        base["assertions"] = false;
        if (!base.contains("preset") && !base.contains("system"))
            throw std::invalid_argument("sweep needs --preset or --config");
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    std::string csv;
    for (const std::string& p : params) csv += p + ",";
    csv += "symmetry,min_uv,t_low,t_high,error\n";

    // grid points in row-major order over the value lists
    std::vector<std::size_t> idx(grids.size(), 0);
    bool done = grids.empty();
    char buf[64];
    while (!done) {
        nlohmann::json cfg = base;
        std::string row;
        for (std::size_t i = 0; i < grids.size(); ++i) {
            double v = grids[i][idx[i]];
            cfg["parameters"][params[i]] = v;
            std::snprintf(buf, sizeof buf, "%.12g", v);
            row += std::string(buf) + ",";
        }
        std::string sym = "", minuv = "", tlow = "", thigh = "", err = "";
        try {
            crnosc::ResolvedScenario rs = resolve_with_patch(cfg);
            crnosc::ScenarioResult res =
                crnosc::run_scenario(rs.system, rs.t_span, rs.integ, rs.opts);
            const nlohmann::json& s = res.summary;
            if (s.contains("symmetry")) {
                sym = s["symmetry"]["ok"].get<bool>() ? "true" : "false";
                if (s["symmetry"].contains("min_uv")) {
                    std::snprintf(buf, sizeof buf, "%.12g",
                                  s["symmetry"]["min_uv"].get<double>());
                    minuv = buf;
                }
            }
            if (s.contains("period_measured") && s["period_measured"].contains("t_low")) {
                std::snprintf(buf, sizeof buf, "%.12g",
                              s["period_measured"]["t_low"].get<double>());
                tlow = buf;
                std::snprintf(buf, sizeof buf, "%.12g",
                              s["period_measured"]["t_high"].get<double>());
                thigh = buf;
            }
        } catch (const std::exception& e) {
            err = e.what();
            for (char& ch : err)
                if (ch == ',' || ch == '\n') ch = ';';
        }
        csv += row + sym + "," + minuv + "," + tlow + "," + thigh + "," + err + "\n";

        for (std::size_t i = grids.size(); i-- > 0;) {
            if (++idx[i] < grids[i].size()) break;
            idx[i] = 0;
            if (i == 0) done = true;
        }
    }

    try {
        auto dir = ensure_out_dir(args);
        write_text_file(dir / out_name, csv);
        std::cout << "wrote " << (dir / out_name).string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "output error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_list_presets() {
    for (const crnosc::Preset& p : crnosc::presets()) {
        std::cout << p.name;
        for (const auto& a : p.aliases) std::cout << " (alias " << a << ")";
        std::cout << "\n  " << p.summary << "\n  t_span [" << p.t_span.first << ", "
                  << p.t_span.second << "], method "
                  << (p.integ.method == crnosc::Method::stiff_implicit ? "stiff_implicit"
                                                                       : "explicit_adaptive")
                  << "\n  parameters:";
        for (const auto& [k, v] : p.params) std::cout << " " << k << "=" << v;
        std::cout << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"universal chemical relaxation oscillator workbench"};
    app.require_subcommand(1);

    CommonArgs run_args, emit_args, sweep_args;
    bool run_emit = false;
    std::vector<std::string> sweep_params, sweep_values;
    std::string sweep_out = "sweep.csv";

    auto add_common = [](CLI::App* cmd, CommonArgs& a, bool with_assert) {
        cmd->add_option("--preset", a.preset, "preset name (see list-presets)");
        cmd->add_option("--config", a.config_path, "scenario config JSON file");
        cmd->add_option("--set", a.sets, "override key=value (repeatable, dotted paths)");
        cmd->add_option("--out", a.out_dir, "output directory (default $CRNOSC_OUT_DIR or .)");
        if (with_assert)
            cmd->add_flag("--no-assert", a.no_assert, "record verdicts without failing");
    };

    CLI::App* run = app.add_subcommand("run", "simulate a scenario and check its assertions");
    add_common(run, run_args, true);
    run->add_flag("--emit", run_emit, "also write the composed network JSON/text");

    CLI::App* emit = app.add_subcommand("emit-crn", "write the composed reaction network");
    add_common(emit, emit_args, false);

    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid, one summary row each");
    add_common(sweep, sweep_args, false);
    sweep->add_option("--param", sweep_params, "parameter name (repeatable)");
    sweep->add_option("--values", sweep_values, "comma-separated values (one per --param)");
    sweep->add_option("--out-file", sweep_out, "aggregate CSV name (default sweep.csv)");

    CLI::App* list = app.add_subcommand("list-presets", "show the preset table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (run->parsed()) return cmd_run(run_args, run_emit);
    if (emit->parsed()) return cmd_emit_crn(emit_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_params, sweep_values, sweep_out);
    if (list->parsed()) return cmd_list_presets();
    return kExitConfig;
}

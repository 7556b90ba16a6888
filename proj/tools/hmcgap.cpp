#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "hmcgap/boundary.hpp"
#include "hmcgap/experiments.hpp"
#include "hmcgap/metric.hpp"

using namespace hmcgap;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheck = 4;

struct Overrides {
    std::string config_path;
    std::string out_dir;
    bool check = false;
    // Raw flag text, keyed by config key.
    std::map<std::string, std::string> numbers;
    std::map<std::string, std::string> lists;
    std::map<std::string, std::string> words;
    std::map<std::string, std::string> specs;
    std::string energy_tol, max_step;
};

Json parse_numbers(const std::string& text, const std::string& flag) {
    Json list = Json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double x = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            list.push_back(x);
        } catch (const std::exception&) {
            throw ConfigError("--" + flag + ": not a number: \"" + item + "\"");
        }
    }
    if (list.empty()) throw ConfigError("--" + flag + ": empty value");
    return list;
}

Json load_config(const Overrides& o) {
    Json cfg = Json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw ConfigError("cannot read config file " + o.config_path);
        try {
            cfg = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw ConfigError(std::string("config file: ") + e.what());
        }
        if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
    }
    for (const auto& [key, text] : o.numbers) {
        if (text.empty()) continue;
        cfg[key] = parse_numbers(text, key).at(0);
    }
    for (const auto& [key, text] : o.lists) {
        if (text.empty()) continue;
        const auto list = parse_numbers(text, key);
        cfg[key] = list.size() == 1 ? list[0] : list;
    }
    for (const auto& [key, text] : o.words)
        if (!text.empty()) cfg[key] = text;
    for (const auto& [key, text] : o.specs)
        if (!text.empty()) cfg[key] = parse_inline_spec(text);
    if (!o.energy_tol.empty()) cfg["flow"]["energy_tol"] = parse_numbers(o.energy_tol, "energy-tol").at(0);
    if (!o.max_step.empty()) cfg["flow"]["max_step"] = parse_numbers(o.max_step, "max-step").at(0);
    return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

int run(const std::string& name, const Overrides& o) {
    const Json cfg = load_config(o);
    const auto result = run_experiment(name, cfg);
    const std::string csv = result.table.csv();
    if (o.out_dir.empty()) {
        std::cout << csv;
    } else {
        std::filesystem::create_directories(o.out_dir);
        write_file(std::filesystem::path(o.out_dir) / (name + ".csv"), csv);
        write_file(std::filesystem::path(o.out_dir) / (name + ".json"), result.sidecar.dump(2) + "\n");
    }
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    if (o.check) {
        for (const auto& c : result.checks)
            std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")")
                      << "\n";
        if (!result.all_checks_passed()) return kExitCheck;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hmcgap: conductance, spectral gaps and hitting times of HMC and random-walk Metropolis"};
    app.require_subcommand(1);
    app.set_version_flag("--version", build_id());

    std::map<std::string, Overrides> overrides;
    for (const auto& name : experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->footer(experiment_help(name));
        auto& o = overrides[name];
        sub->add_option("--config", o.config_path, "JSON config file");
        sub->add_option("--out", o.out_dir, "output directory for <experiment>.csv and <experiment>.json");
        sub->add_flag("--check", o.check, "evaluate the experiment's assertions; exit 4 if any fails");
        for (const char* key : {"seed", "workers", "n", "bins", "replicas", "horizon", "chains", "steps", "start",
                                "min_odd", "hitting_replicas", "slope_T", "scale", "tail_radius"}) {
            std::string flag = std::string("--") + key;
            for (auto& ch : flag)
                if (ch == '_') ch = '-';
            sub->add_option(flag, o.numbers[key], std::string("override \"") + key + "\"");
        }
        for (const char* key : {"T", "epsilon", "sigma", "a", "x", "slope_a"}) {
            std::string flag = std::string("--") + key;
            for (auto& ch : flag)
                if (ch == '_') ch = '-';
            sub->add_option(flag, o.lists[key], std::string("override \"") + key + "\" (comma-separated list)");
        }
        sub->add_option("--method", o.words["method"], "parity|direct|flux");
        sub->add_option("--kernel", o.words["kernel"], "hmc|rwm|rhmc");
        sub->add_option("--target", o.specs["target"], "target, e.g. mixture1d:sigma=0.5 or a JSON object");
        sub->add_option("--boundary", o.specs["boundary"], "boundary, e.g. point1d:value=0 or a JSON object");
        sub->add_option("--energy-tol", o.energy_tol, "integrator energy drift tolerance");
        sub->add_option("--max-step", o.max_step, "integrator maximum step");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        return run(name, overrides[name]);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IntegratorFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const MetricError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DegenerateBoundary& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DomainError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

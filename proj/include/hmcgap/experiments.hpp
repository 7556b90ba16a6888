#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hmcgap/config.hpp"

namespace hmcgap {

/// CSV cell: reals print with 17 significant digits, missing values as empty fields.
using Cell = std::variant<std::monostate, double, long long, std::string, bool>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    /// Metric column -> its standard-error column, or "deterministic".
    std::map<std::string, std::string> uncertainty;

    void add_row(std::vector<Cell> row);
    std::string csv() const;
    const Cell& at(std::size_t row, const std::string& column) const;
    double number(std::size_t row, const std::string& column) const;
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentResult {
    std::string experiment;
    Table table;
    Json sidecar;  // config echo, provenance, metric uncertainty tags, checks, warnings
    std::vector<Check> checks;
    std::vector<std::string> warnings;

    bool all_checks_passed() const;
};

/// Names accepted by run_experiment, in help order.
const std::vector<std::string>& experiment_names();
/// One paragraph per experiment: config keys and CSV columns.
std::string experiment_help(const std::string& name);

/// Validates `config` against the experiment's schema (unknown keys are errors) and runs it.
/// Throws ConfigError for invalid input; numerical failures propagate as IntegratorFailure,
/// MetricError or DomainError.
ExperimentResult run_experiment(const std::string& name, const Json& config);

ExperimentResult run_conductance(const Json& config);
ExperimentResult run_flux(const Json& config);
ExperimentResult run_spectral_gap(const Json& config);
ExperimentResult run_scaling_sweep(const Json& config);
ExperimentResult run_degenerate_study(const Json& config);
ExperimentResult run_figure(const Json& config);
ExperimentResult run_hitting(const Json& config);
ExperimentResult run_drift(const Json& config);
ExperimentResult run_chain_dump(const Json& config);

/// Identifier of the source tree this binary was built from.
std::string build_id();

}  // namespace hmcgap

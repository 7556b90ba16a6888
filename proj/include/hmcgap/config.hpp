#pragma once

#include <json.hpp>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmcgap/boundary.hpp"
#include "hmcgap/dynamics.hpp"
#include "hmcgap/targets.hpp"

namespace hmcgap {

using Json = nlohmann::json;

/// Malformed or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws ConfigError naming the first key of `object` not in `allowed`.
void require_keys(const Json& object, const std::vector<std::string>& allowed, const std::string& where);

/// {"kind": "gauss1d"|"mixture1d"|"maxgauss1d"|"mixtureNd"|"degenerate2d", "sigma", "a", "dim"}
std::shared_ptr<const TargetDensity> make_target(const Json& spec);

/// {"kind": "point1d", "value": c} or {"kind": "point1d", "values": [...]},
/// {"kind": "hyperplane", "normal": [...], "offset": b},
/// {"kind": "levelset-circle", "center": [...], "radius": r}.
Boundary make_boundary(const Json& spec, std::size_t dim);

/// x[0] < 0: a point at the origin in one dimension, the hyperplane q[0] = 0 otherwise.
Boundary default_boundary(std::size_t dim);

/// {"energy_tol": ..., "max_step": ...}
FlowConfig make_flow_config(const Json& spec);

/// "kind:key=value,key=value" shorthand (or a JSON object literal) to a JSON object.
/// Values parse as numbers where possible; "a|b|c" becomes a list.
Json parse_inline_spec(const std::string& text);

/// Number or list of numbers to a list.
std::vector<double> number_list(const Json& value, const std::string& key);

}  // namespace hmcgap

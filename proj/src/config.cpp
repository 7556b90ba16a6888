#include "hmcgap/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hmcgap {

namespace {

double get_number(const Json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where + ": \"" + key + "\" must be finite");
    return x;
}

std::vector<double> get_vector(const Json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
    return number_list(obj.at(key), where + "." + key);
}

std::string get_kind(const Json& spec, const std::string& where) {
    if (!spec.is_object()) throw ConfigError(where + " must be an object");
    if (!spec.contains("kind") || !spec.at("kind").is_string()) throw ConfigError(where + ": missing string \"kind\"");
    return spec.at("kind").get<std::string>();
}

}  // namespace

void require_keys(const Json& object, const std::vector<std::string>& allowed, const std::string& where) {
    if (!object.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& item : object.items())
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
}

std::vector<double> number_list(const Json& value, const std::string& key) {
    std::vector<double> out;
    auto push = [&](const Json& v) {
        if (!v.is_number()) throw ConfigError(key + ": expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(key + ": values must be finite");
        out.push_back(x);
    };
    if (value.is_array()) {
        for (const auto& v : value) push(v);
    } else {
        push(value);
    }
    return out;
}

std::shared_ptr<const TargetDensity> make_target(const Json& spec) {
    const auto kind = get_kind(spec, "target");
    try {
        if (kind == "gauss1d") {
            require_keys(spec, {"kind"}, "target");
            return std::make_shared<Gaussian1D>();
        }
        if (kind == "mixture1d") {
            require_keys(spec, {"kind", "sigma"}, "target");
            return std::make_shared<GaussianMixture1D>(get_number(spec, "sigma", "target"));
        }
        if (kind == "maxgauss1d") {
            require_keys(spec, {"kind", "a"}, "target");
            return std::make_shared<MaxGaussian1D>(get_number(spec, "a", "target"));
        }
        if (kind == "mixtureNd") {
            require_keys(spec, {"kind", "sigma", "dim"}, "target");
            const double d = get_number(spec, "dim", "target");
            if (d != std::floor(d) || d < 2) throw ConfigError("target: \"dim\" must be an integer >= 2");
            return std::make_shared<IsotropicMixtureD>(static_cast<std::size_t>(d), get_number(spec, "sigma", "target"));
        }
        if (kind == "degenerate2d") {
            require_keys(spec, {"kind", "sigma"}, "target");
            return std::make_shared<DegenerateGaussian2D>(get_number(spec, "sigma", "target"));
        }
    } catch (const DomainError& e) {
        throw ConfigError(std::string("target: ") + e.what());
    }
    throw ConfigError("target: unknown kind \"" + kind + "\"");
}

Boundary make_boundary(const Json& spec, std::size_t dim) {
    const auto kind = get_kind(spec, "boundary");
    try {
        if (kind == "point1d") {
            require_keys(spec, {"kind", "value", "values"}, "boundary");
            if (dim != 1) throw ConfigError("boundary: point1d needs a one-dimensional target");
            std::vector<double> pts;
            if (spec.contains("value")) pts.push_back(get_number(spec, "value", "boundary"));
            if (spec.contains("values")) {
                const auto more = get_vector(spec, "values", "boundary");
                pts.insert(pts.end(), more.begin(), more.end());
            }
            if (pts.empty()) throw ConfigError("boundary: S without a boundary is the whole space or empty");
            std::sort(pts.begin(), pts.end());
            return Boundary::points(pts);
        }
        if (kind == "hyperplane") {
            require_keys(spec, {"kind", "normal", "offset"}, "boundary");
            const auto normal = get_vector(spec, "normal", "boundary");
            if (normal.size() != dim) throw ConfigError("boundary: normal has the wrong dimension");
            const double offset = spec.contains("offset") ? get_number(spec, "offset", "boundary") : 0.0;
            return Boundary::hyperplane(normal, offset);
        }
        if (kind == "levelset-circle") {
            require_keys(spec, {"kind", "center", "radius"}, "boundary");
            const auto center = get_vector(spec, "center", "boundary");
            if (center.size() != dim) throw ConfigError("boundary: center has the wrong dimension");
            return Boundary::circle(center, get_number(spec, "radius", "boundary"));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("boundary: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("boundary: ") + e.what());
    }
    throw ConfigError("boundary: unknown kind \"" + kind + "\"");
}

Boundary default_boundary(std::size_t dim) {
    if (dim == 1) return Boundary::point(0.0);
    std::vector<double> n(dim, 0.0);
    n[0] = 1.0;
    return Boundary::hyperplane(n, 0.0);
}

FlowConfig make_flow_config(const Json& spec) {
    FlowConfig f;
    if (spec.is_null()) return f;
    require_keys(spec, {"energy_tol", "max_step"}, "flow");
    if (spec.contains("energy_tol")) f.energy_tolerance = get_number(spec, "energy_tol", "flow");
    if (spec.contains("max_step")) f.max_step = get_number(spec, "max_step", "flow");
    if (!(f.energy_tolerance > 0.0) || !(f.max_step > 0.0))
        throw ConfigError("flow: energy_tol and max_step must be positive");
    return f;
}

Json parse_inline_spec(const std::string& text) {
    const auto first = text.find_first_not_of(" \t");
    if (first != std::string::npos && text[first] == '{') {
        try {
            return Json::parse(text);
        } catch (const Json::parse_error& e) {
            throw ConfigError(std::string("invalid JSON: ") + e.what());
        }
    }
    Json out = Json::object();
    const auto colon = text.find(':');
    out["kind"] = text.substr(0, colon);
    if (colon == std::string::npos) return out;
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    auto parse_scalar = [](const std::string& s) -> Json {
        try {
            std::size_t used = 0;
            const double x = std::stod(s, &used);
            if (used == s.size()) return x;
        } catch (const std::exception&) {
        }
        return s;
    };
    while (std::getline(rest, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("inline spec: expected key=value, got \"" + item + "\"");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (value.find('|') != std::string::npos) {
            Json list = Json::array();
            std::stringstream parts(value);
            std::string part;
            while (std::getline(parts, part, '|')) list.push_back(parse_scalar(part));
            out[key] = list;
        } else {
            out[key] = parse_scalar(value);
        }
    }
    return out;
}

}  // namespace hmcgap

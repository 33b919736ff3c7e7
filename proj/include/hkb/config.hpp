#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fd_solver.hpp"
#include "operator_core.hpp"

namespace hkb {

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Parsed operator config.
///
///   N = 1
///   A.row.1 = 1.2, 0.3        # rows 1..N+1 of A
///   A.row.2 = 0.3, 0.8
///   v.d = 0.5                 # N entries (default 0)
///   v.c = 1.0                 # default 0
///   grid.Rx = 8               # optional grid (N = 1 solves and sampling)
///   grid.Ry = 8
///   grid.nx = 128
///   grid.ny = 128
///   t.list = 0.5, 1, 2
///   sources = 0, 0.5; 0.25, 1  # points separated by ';', coordinates by ','
///   seed = 42
///   tolerance.mass = 1e-3     # any tolerance.<name>
struct OperatorConfig {
    GeneralOperatorSpec spec;
    std::optional<double> Rx, Ry;
    std::optional<int> nx, ny;
    std::vector<double> times;
    std::vector<Point> sources;
    std::uint64_t seed = 20240611;
    std::map<std::string, double> tolerances;

    double tolerance(const std::string& name, double fallback) const {
        auto it = tolerances.find(name);
        return it == tolerances.end() ? fallback : it->second;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& raw, const std::string& key) {
    const std::string s = trim(raw);
    if (s.empty()) throw ConfigError("empty value in '" + key + "'");
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "': not a number: '" + s + "'");
    }
    if (pos != s.size()) throw ConfigError("'" + key + "': trailing characters in '" + s + "'");
    return v;
}

inline std::vector<double> parse_list(const std::string& raw, const std::string& key, char sep = ',') {
    std::vector<double> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(parse_number(item, key));
    if (out.empty()) throw ConfigError("'" + key + "': empty list");
    return out;
}

inline int parse_int(const std::string& raw, const std::string& key) {
    const double v = parse_number(raw, key);
    if (v != std::floor(v) || v < 0 || v > 1e9) throw ConfigError("'" + key + "': expected a nonnegative integer");
    return static_cast<int>(v);
}

} // namespace detail

inline OperatorConfig parse_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = detail::trim(line.substr(eq + 1));
    }

    OperatorConfig cfg;
    auto take = [&](const std::string& k) -> std::optional<std::string> {
        auto it = kv.find(k);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    const auto Nraw = take("N");
    if (!Nraw) throw ConfigError("missing key 'N'");
    const int N = detail::parse_int(*Nraw, "N");
    if (N < 1) throw ConfigError("'N' must be a positive integer");
    cfg.spec.N = N;
    cfg.spec.A.resize(N + 1, N + 1);
    for (int r = 1; r <= N + 1; ++r) {
        const std::string key = "A.row." + std::to_string(r);
        const auto row = take(key);
        if (!row) throw ConfigError("missing key '" + key + "'");
        const auto vals = detail::parse_list(*row, key);
        if (static_cast<int>(vals.size()) != N + 1)
            throw ConfigError("'" + key + "': expected " + std::to_string(N + 1) + " entries, got " + std::to_string(vals.size()));
        for (int c = 0; c <= N; ++c) cfg.spec.A(r - 1, c) = vals[c];
    }
    cfg.spec.d = Eigen::VectorXd::Zero(N);
    if (const auto d = take("v.d")) {
        const auto vals = detail::parse_list(*d, "v.d");
        if (static_cast<int>(vals.size()) != N) throw ConfigError("'v.d': expected " + std::to_string(N) + " entries");
        for (int i = 0; i < N; ++i) cfg.spec.d(i) = vals[i];
    }
    if (const auto c = take("v.c")) cfg.spec.c = detail::parse_number(*c, "v.c");
    if (const auto v = take("grid.Rx")) cfg.Rx = detail::parse_number(*v, "grid.Rx");
    if (const auto v = take("grid.Ry")) cfg.Ry = detail::parse_number(*v, "grid.Ry");
    if (const auto v = take("grid.nx")) cfg.nx = detail::parse_int(*v, "grid.nx");
    if (const auto v = take("grid.ny")) cfg.ny = detail::parse_int(*v, "grid.ny");
    if (const auto v = take("t.list")) {
        cfg.times = detail::parse_list(*v, "t.list");
        for (double t : cfg.times)
            if (!(t > 0.0)) throw ConfigError("'t.list': times must be positive");
    }
    if (const auto v = take("sources")) {
        std::stringstream ss(*v);
        std::string pt;
        while (std::getline(ss, pt, ';')) {
            if (detail::trim(pt).empty()) continue;
            const auto co = detail::parse_list(pt, "sources");
            if (static_cast<int>(co.size()) != N + 1) throw ConfigError("'sources': each point needs N+1 coordinates");
            Eigen::VectorXd x(N);
            for (int i = 0; i < N; ++i) x(i) = co[i];
            if (!(co[N] > 0.0)) throw ConfigError("'sources': y must be positive");
            cfg.sources.emplace_back(x, co[N]);
        }
    }
    if (const auto v = take("seed")) cfg.seed = static_cast<std::uint64_t>(detail::parse_number(*v, "seed"));
    for (auto it = kv.begin(); it != kv.end();) {
        if (it->first.rfind("tolerance.", 0) == 0) {
            const double tol = detail::parse_number(it->second, it->first);
            if (!(tol > 0.0)) throw ConfigError("'" + it->first + "': tolerances must be positive");
            cfg.tolerances[it->first.substr(10)] = tol;
            it = kv.erase(it);
        } else {
            ++it;
        }
    }
    if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "'");
    return cfg;
}

inline OperatorConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    return parse_config(in);
}

/// Grid from the config, filling gaps from the times and sources: R >= 6 sqrt(t_max) + extent of the sources.
inline GridSpec config_grid(const OperatorConfig& cfg, double c) {
    double tmax = 1.0, xext = 0.0, yext = 0.0;
    for (double t : cfg.times) tmax = std::max(tmax, t);
    for (const auto& s : cfg.sources) {
        if (s.x.size() > 0) xext = std::max(xext, s.x.cwiseAbs().maxCoeff());
        yext = std::max(yext, s.y);
    }
    GridSpec g;
    g.c = c;
    g.Rx = cfg.Rx.value_or(6.0 * std::sqrt(tmax) + xext + 1.0);
    g.Ry = cfg.Ry.value_or(6.0 * std::sqrt(tmax) + yext + 1.0);
    g.nx = cfg.nx.value_or(128);
    g.ny = cfg.ny.value_or(128);
    try {
        g.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    return g;
}

} // namespace hkb

// hkb: validate operator configs, write kernel slices, run verification sweeps.
// Exit codes: 0 pass, 1 check failure, 2 config error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hkb/hkb.hpp"

namespace fs = std::filesystem;
using hkb::json;

namespace {

enum Exit { ok = 0, check_failed = 1, config_error = 2, numerical_failure = 3 };

std::map<std::string, double> parse_overrides(const std::vector<std::string>& items) {
    std::map<std::string, double> out;
    for (const auto& it : items) {
        const auto eq = it.find('=');
        if (eq == std::string::npos) throw hkb::ConfigError("--tolerance expects name=value, got '" + it + "'");
        std::istringstream ss(it.substr(eq + 1));
        double v;
        if (!(ss >> v) || !(v > 0.0)) throw hkb::ConfigError("--tolerance " + it + ": value must be positive");
        out[it.substr(0, eq)] = v;
    }
    return out;
}

std::string number_tag(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

int cmd_validate(const std::string& path) {
    const hkb::OperatorConfig cfg = hkb::load_config(path);
    const hkb::ValidationReport r = hkb::validate_general(cfg.spec);
    json out = hkb::validation_json(r);
    out["schema_version"] = hkb::schema_version;
    out["config"] = path;
    if (r.pass) out["reduction"] = hkb::reduction_json(hkb::reduce_to_model(cfg.spec));
    std::cout << out.dump(2) << "\n";
    return r.pass ? ok : check_failed;
}

int cmd_kernel(const std::string& path, const std::string& dir, bool force_numeric, bool strict,
               const std::map<std::string, double>& overrides) {
    hkb::OperatorConfig cfg = hkb::load_config(path);
    for (const auto& [k, v] : overrides) cfg.tolerances[k] = v;
    const hkb::ValidationReport vr = hkb::validate_general(cfg.spec);
    if (!vr.pass) {
        std::cout << json{{"error", "invalid operator"}, {"validation", hkb::validation_json(vr)}}.dump(2) << "\n";
        return check_failed;
    }
    if (cfg.spec.N != 1) throw hkb::ConfigError("kernel: CSV slices are written for N = 1 only");
    if (cfg.times.empty()) throw hkb::ConfigError("kernel: 't.list' is required");
    if (cfg.sources.empty()) throw hkb::ConfigError("kernel: 'sources' is required");
    const double tol = cfg.tolerance("mass", 1e-3);

    const hkb::ReductionResult red = hkb::reduce_to_model(cfg.spec);
    const hkb::GridSpec grid = hkb::config_grid(cfg, red.model.c);
    const bool exact = red.model.commuting() && !force_numeric;
    fs::create_directories(dir);

    json summary{{"schema_version", hkb::schema_version}, {"config", path}, {"method", exact ? "exact" : "solver"},
                 {"grid", hkb::grid_json(grid)}, {"reduction", hkb::reduction_json(red)}, {"tolerance_mass", tol},
                 {"slices", json::array()}};
    bool all_ok = true;
    for (std::size_t s = 0; s < cfg.sources.size(); ++s) {
        const hkb::Point& z2 = cfg.sources[s];
        std::vector<hkb::Field> fields;
        std::vector<double> defects;
        std::string defect_name;
        json extra = json::object();
        hkb::Point used = z2;
        if (exact) {
            defect_name = "mass_defect";
            for (double t : cfg.times) {
                hkb::Field f = hkb::Field::sample(grid, [&](double x, double y) {
                    return hkb::exact_general_kernel(red, t, hkb::Point::planar(x, y), z2);
                });
                defects.push_back(std::abs(f.mass() - 1.0));
                fields.push_back(std::move(f));
            }
        } else {
            if (strict) (void)hkb::source_cell(grid, z2, true);
            defect_name = "truncation_tail";
            const hkb::MappedKernel mk = hkb::reduced_kernel_column(cfg.spec, grid, cfg.times, z2);
            fields = mk.fields;
            defects = mk.model_tail;
            extra["stats"] = hkb::stats_json(mk.stats);
            extra["model_grid"] = hkb::grid_json(mk.model_grid);
            extra["warnings"] = mk.warnings;
        }
        for (std::size_t k = 0; k < cfg.times.size(); ++k) {
            hkb::KernelSlice sl = hkb::field_to_slice(fields[k], cfg.times[k], used, exact ? "exact" : "solver");
            const std::string stem = "kernel_t" + number_tag(cfg.times[k]) + "_s" + std::to_string(s);
            hkb::write_file((fs::path(dir) / (stem + ".csv")).string(), hkb::write_slice_csv, sl);
            json meta = hkb::slice_meta(sl);
            meta.update(extra);
            meta["grid"] = hkb::grid_json(grid);
            meta[defect_name] = defects[k];
            meta["tolerance_mass"] = tol;
            meta["pass"] = defects[k] <= tol;
            std::ofstream(fs::path(dir) / (stem + ".meta.json")) << meta.dump(2) << "\n";
            summary["slices"].push_back({{"file", stem + ".csv"}, {"t", cfg.times[k]}, {"source", hkb::point_json(used)},
                                         {defect_name, defects[k]}, {"pass", defects[k] <= tol}});
            all_ok = all_ok && defects[k] <= tol;
        }
    }
    summary["pass"] = all_ok;
    std::cout << summary.dump(2) << "\n";
    if (!all_ok) std::cerr << "hkb kernel: mass defect above tolerance " << tol << "; enlarge the grid\n";
    return all_ok ? ok : check_failed;
}

int cmd_verify(const std::string& probe, const std::string& config, const std::string& out, bool broken,
               std::optional<std::uint64_t> seed, const std::map<std::string, double>& overrides) {
    hkb::harness::HarnessOptions opt;
    opt.probe = hkb::harness::parse_probe(probe);
    if (!config.empty()) {
        const hkb::OperatorConfig cfg = hkb::load_config(config);
        opt.seed = cfg.seed;
        opt.tolerances = cfg.tolerances;
    }
    if (seed) opt.seed = *seed;
    for (const auto& [k, v] : overrides) opt.tolerances[k] = v;
    opt.break_envelope = broken;
    opt.log = &std::cerr;

    hkb::harness::Harness h(opt);
    json bundle{{"schema_version", hkb::schema_version}, {"probe", probe}, {"seed", opt.seed}, {"break_envelope", broken}};
    const auto checks = h.run_all();
    bool pass = true;
    json arr = json::array();
    for (const auto& c : checks) {
        arr.push_back(c.to_json());
        pass = pass && c.pass;
    }
    bundle["checks"] = arr;
    bundle["pass"] = pass;
    const std::string text = bundle.dump(2);
    if (out.empty()) std::cout << text << "\n";
    else std::ofstream(out) << text << "\n";
    std::cerr << "hkb verify: " << checks.size() << " checks, " << (pass ? "all pass" : "failures present") << "\n";
    return pass ? ok : check_failed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heat kernels of degenerate operators with oblique boundary terms"};
    app.require_subcommand(1);

    std::string config, out_dir, probe = "smoke", out_file;
    bool force_numeric = false, strict = false, broken = false;
    std::vector<std::string> tolerances;
    std::uint64_t seed_value = 0;

    auto* validate = app.add_subcommand("validate", "check an operator config; JSON report on stdout");
    validate->add_option("config", config, "operator config file")->required();

    auto* kernel = app.add_subcommand("kernel", "write kernel slices p(t, ., z2) as CSV");
    kernel->add_option("config", config, "operator config file")->required();
    kernel->add_option("--out", out_dir, "output directory")->required();
    kernel->add_flag("--force-numeric", force_numeric, "use the solver even when the exact kernel applies");
    kernel->add_flag("--strict", strict, "reject sources that are not cell centers");
    kernel->add_option("--tolerance", tolerances, "override a tolerance, name=value");

    auto* verify = app.add_subcommand("verify", "run the verification harness; JSON bundle");
    verify->add_option("--probe", probe, "probe set: smoke, desk or full")->check(CLI::IsMember({"smoke", "desk", "full"}));
    verify->add_option("--config", config, "config supplying seed and tolerance overrides");
    verify->add_option("--out", out_file, "write the bundle here instead of stdout");
    verify->add_flag("--break-envelope", broken, "halve the fitted envelope rates (forced failure)");
    auto* seed_opt = verify->add_option("--seed", seed_value, "seed for random probes");
    verify->add_option("--tolerance", tolerances, "override a tolerance, name=value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        const auto overrides = parse_overrides(tolerances);
        if (*validate) return cmd_validate(config);
        if (*kernel) return cmd_kernel(config, out_dir, force_numeric, strict, overrides);
        if (*verify)
            return cmd_verify(probe, config, out_file, broken,
                              seed_opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt, overrides);
    } catch (const hkb::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const hkb::StructuralError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const hkb::StepFailure& e) {
        std::cout << json{{"schema_version", hkb::schema_version}, {"error", e.what()}, {"residual", e.residual()}}.dump(2) << "\n";
        std::cerr << "numerical failure: " << e.what() << " (residual " << e.residual() << ")\n";
        return numerical_failure;
    } catch (const hkb::Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return numerical_failure;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return numerical_failure;
    }
    return ok;
}

#pragma once

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "envelope_geometry.hpp"
#include "errors.hpp"
#include "exact_kernel.hpp"
#include "fd_solver.hpp"
#include "verification.hpp"

namespace hkb {

using json = nlohmann::json;

constexpr int csv_digits = 17;
constexpr int schema_version = 1;

namespace detail {
inline double first_x(const Point& z) {
    if (z.dim() != 1) throw StructuralError("CSV slices are defined for N = 1");
    return z.x(0);
}
inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    return out;
}
} // namespace detail

/// t,x1,y1,x2,y2,p,convention
inline void write_slice_csv(std::ostream& out, const KernelSlice& s) {
    out << "t,x1,y1,x2,y2,p,convention\n" << std::setprecision(csv_digits);
    const double x2 = detail::first_x(s.source);
    for (const auto& smp : s.samples)
        out << s.t << ',' << detail::first_x(smp.z1) << ',' << smp.z1.y << ',' << x2 << ',' << s.source.y << ',' << smp.p
            << ',' << convention_tag(s.convention) << '\n';
}

/// x,y,value
inline void write_field_csv(std::ostream& out, const Field& f) {
    out << "x,y,value\n" << std::setprecision(csv_digits);
    for (int j = 0; j < f.grid.ny; ++j)
        for (int i = 0; i < f.grid.nx; ++i) out << f.grid.x(i) << ',' << f.grid.y(j) << ',' << f.at(i, j) << '\n';
}

/// t,x1,y1,x2,y2,envelope,form,side
inline void write_envelope_csv(std::ostream& out, const std::vector<EnvelopeRow>& rows) {
    out << "t,x1,y1,x2,y2,envelope,form,side\n" << std::setprecision(csv_digits);
    for (const auto& r : rows)
        out << r.t << ',' << detail::first_x(r.z1) << ',' << r.z1.y << ',' << detail::first_x(r.z2) << ',' << r.z2.y << ','
            << r.value << ',' << form_name(r.form) << ',' << side_name(r.side) << '\n';
}

/// Per-sample residual map of a fit: t,x1,y1,x2,y2,p,upper_ratio,lower_ratio
inline void write_fit_residuals_csv(std::ostream& out, const std::vector<KernelSlice>& slices, const FitReport& r) {
    out << "t,x1,y1,x2,y2,p,upper_ratio,lower_ratio\n" << std::setprecision(csv_digits);
    for (const auto& fr : r.residuals) {
        const auto& sl = slices[fr.slice];
        const auto& smp = sl.samples[fr.sample];
        out << sl.t << ',' << detail::first_x(smp.z1) << ',' << smp.z1.y << ',' << detail::first_x(sl.source) << ','
            << sl.source.y << ',' << smp.p << ',' << fr.upper << ',' << fr.lower << '\n';
    }
}

template <class W, class T>
void write_file(const std::string& path, W&& writer, const T& value) {
    auto out = detail::open_out(path);
    writer(out, value);
}

inline json point_json(const Point& z) {
    json j;
    j["x"] = std::vector<double>(z.x.data(), z.x.data() + z.x.size());
    j["y"] = z.y;
    return j;
}

inline json slice_meta(const KernelSlice& s) {
    json j;
    j["schema_version"] = schema_version;
    j["method"] = s.method;
    j["t"] = s.t;
    j["source"] = point_json(s.source);
    j["c"] = s.c;
    j["convention"] = convention_tag(s.convention);
    j["samples"] = s.samples.size();
    j["warnings"] = s.warnings;
    return j;
}

inline json stats_json(const EvolveStats& s) {
    return json{{"steps", s.steps},
                {"dt", s.dt},
                {"max_mass_drift", s.max_mass_drift},
                {"linear_solver", s.solver},
                {"max_krylov_iterations", s.max_krylov_iterations},
                {"max_krylov_residual", s.max_krylov_residual}};
}

inline json grid_json(const GridSpec& g) {
    return json{{"Rx", g.Rx}, {"Ry", g.Ry}, {"nx", g.nx}, {"ny", g.ny}, {"c", g.c}};
}

inline json validation_json(const ValidationReport& r) {
    return json{{"pass", r.pass},
                {"violations", r.violations},
                {"min_eigenvalue", r.min_eigenvalue},
                {"max_eigenvalue", r.max_eigenvalue},
                {"degeneracy_margin", r.degeneracy_margin},
                {"symmetric", r.symmetric},
                {"positive_definite", r.positive_definite},
                {"oblique", r.oblique},
                {"admissible", r.admissible}};
}

inline json reduction_json(const ReductionResult& r) {
    json j;
    j["model"] = {{"a", std::vector<double>(r.model.a.data(), r.model.a.data() + r.model.a.size())}, {"c", r.model.c}};
    j["time_scale"] = r.time_scale;
    std::vector<std::vector<double>> M;
    for (int i = 0; i < r.x_change.rows(); ++i) {
        M.emplace_back();
        for (int k = 0; k < r.x_change.cols(); ++k) M.back().push_back(r.x_change(i, k));
    }
    j["x_change"] = M;
    if (r.shear) j["shear"] = std::vector<double>(r.shear->data(), r.shear->data() + r.shear->size());
    else j["shear"] = nullptr;
    return j;
}

} // namespace hkb

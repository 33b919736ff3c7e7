#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "exact_kernel.hpp"
#include "fd_solver.hpp"
#include "operator_core.hpp"

namespace hkb {

/// Mass within `band` of the outer walls (x = +-Rx, y = Ry): what a too-small grid reflects back.
inline double truncation_tail(const Field& f, double band) {
    const GridSpec& g = f.grid;
    const Eigen::VectorXd w = g.masses();
    double tail = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const bool outer = g.x(i) < -g.Rx + band || g.x(i) > g.Rx - band || g.y(j) > g.Ry - band;
            if (outer) tail += w(g.index(i, j)) * std::abs(f.at(i, j));
        }
    return tail;
}

/// Kernel column of the general N = 1 operator solved directly (form with measure y^{c/gamma}).
inline KernelColumn direct_kernel_column(const GeneralOperatorSpec& spec, const GridSpec& grid,
                                         const std::vector<double>& times, const Point& z2, bool strict = false,
                                         const EvolveOptions& opt = {}) {
    const DiscreteOperator op = assemble(FormCoefficients::general(spec), grid);
    return kernel_column(op, times, z2, strict, opt);
}

struct MappedKernel {
    std::vector<Field> fields;  // p_general(t_k, ., z2) on the caller's grid
    std::vector<double> times;
    Point source;
    GridSpec model_grid;
    ReductionResult reduction;
    EvolveStats stats;
    std::vector<double> model_tail;  // truncation_tail of each model column
    std::vector<std::string> warnings;
};

/// Reduces the general operator to the model one, solves the model kernel at gamma t from Phi(z2) and maps it back:
/// p(t, z1, z2) = |det M| p_model(gamma t, Phi(z1), Phi(z2)), sampled on the nodes of `grid` (N = 1).
/// The model grid keeps the caller's resolution (hx scaled by M), puts Phi(z2) on a cell center (x by
/// translation invariance, y by the choice of hy) and covers Phi of the caller's domain.
inline MappedKernel reduced_kernel_column(const GeneralOperatorSpec& spec, GridSpec grid, const std::vector<double>& times,
                                          const Point& z2, const EvolveOptions& opt = {}) {
    if (spec.N != 1) throw StructuralError("reduced_kernel_column: N = 1 only");
    MappedKernel mk;
    mk.reduction = reduce_to_model(spec);
    const ReductionResult& red = mk.reduction;
    grid.c = red.model.c;
    grid.validate();
    mk.source = z2;
    const Point w2 = map_point(red, z2);
    const double Mabs = std::abs(red.x_change(0, 0));

    double reach = 0.0;
    for (double cx : {-grid.Rx, grid.Rx})
        for (double cy : {1e-12, grid.Ry}) reach = std::max(reach, std::abs(map_point(red, Point::planar(cx, cy)).x(0) - w2.x(0)));
    GridSpec mg;
    mg.c = red.model.c;
    const double hxm = Mabs * grid.hx();
    const int half = static_cast<int>(std::ceil(reach / hxm - 0.5));
    mg.nx = 2 * half + 1;
    mg.Rx = 0.5 * mg.nx * hxm;
    const int jsrc = std::max(0, static_cast<int>(std::lround(w2.y / grid.hy() - 0.5)));
    const double hym = w2.y / (jsrc + 0.5);
    mg.ny = std::max(8, static_cast<int>(std::ceil(grid.Ry / hym)));
    mg.Ry = mg.ny * hym;
    mk.model_grid = mg;

    std::vector<double> mtimes;
    for (double t : times) mtimes.push_back(red.time_scale * t);
    const DiscreteOperator op = assemble(red.model, mg);
    const KernelColumn col = kernel_column(op, mtimes, Point::planar(0.0, w2.y), true, opt);
    mk.stats = col.stats;
    mk.warnings = col.warnings;
    for (std::size_t k = 0; k < col.fields.size(); ++k) {
        const Field& mf = col.fields[k];
        mk.model_tail.push_back(truncation_tail(mf, std::sqrt(mtimes[k])));
        Field out(grid);
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) {
                const Point z1 = Point::planar(grid.x(i), grid.y(j));
                const Point w1 = map_point(red, z1);
                const double rx = w1.x(0) - w2.x(0);
                const bool inside = std::abs(rx) <= mg.x(mg.nx - 1) && w1.y <= mg.y(mg.ny - 1);
                const double pm = inside ? std::max(mf.interpolate(rx, w1.y), 0.0) : 0.0;
                out.at(i, j) = map_kernel_value(red, times[k], z1, z2, pm);
            }
        mk.fields.push_back(std::move(out));
        mk.times.push_back(col.times[k] / red.time_scale);
    }
    return mk;
}

/// Exact kernel of a general operator whose reduced model has a = 0.
inline double exact_general_kernel(const ReductionResult& red, double t, const Point& z1, const Point& z2) {
    if (!red.model.commuting()) throw ParameterError("exact_general_kernel: reduced model has a != 0");
    const double pm = product_kernel(red.model, red.time_scale * t, map_point(red, z1), map_point(red, z2));
    return map_kernel_value(red, t, z1, z2, pm);
}

} // namespace hkb

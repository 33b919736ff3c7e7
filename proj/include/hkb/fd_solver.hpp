#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "errors.hpp"
#include "exact_kernel.hpp"
#include "operator_core.hpp"

namespace hkb {

/// Uniform cells on [-Rx, Rx] x (0, Ry]; y-centers at (j + 1/2) hy, so no node sits on y = 0.
struct GridSpec {
    double Rx = 8.0, Ry = 8.0;
    int nx = 64, ny = 64;
    double c = 0.0;  // weight exponent of y^c dz

    double hx() const { return 2.0 * Rx / nx; }
    double hy() const { return Ry / ny; }
    double x(int i) const { return -Rx + (i + 0.5) * hx(); }
    double y(int j) const { return (j + 0.5) * hy(); }
    int size() const { return nx * ny; }
    int index(int i, int j) const { return j * nx + i; }

    void validate() const {
        if (!(Rx > 0.0) || !(Ry > 0.0)) throw ParameterError("grid: Rx, Ry must be positive");
        if (nx < 8 || ny < 8) throw ParameterError("grid: nx, ny >= 8 required");
        if (!(c + 1.0 > 0.0)) throw ParameterError("grid: c + 1 must be positive");
    }

    /// Integral of y^c over [a, b], 0 <= a <= b, without cancellation for a >> b - a.
    double weight_integral(double a, double b) const {
        const double p = c + 1.0;
        if (a == 0.0) return std::pow(b, p) / p;
        return std::pow(a, p) * std::expm1(p * std::log1p((b - a) / a)) / p;
    }
    double row_mass(int j) const { return weight_integral(j * hy(), (j + 1) * hy()); }
    double lower_half_mass(int j) const { return weight_integral(j * hy(), (j + 0.5) * hy()); }
    double upper_half_mass(int j) const { return weight_integral((j + 0.5) * hy(), (j + 1) * hy()); }

    /// Cell masses w_ij = hx * int_cell y^c dy (exact, so the y = 0 row needs no correction).
    Eigen::VectorXd masses() const {
        Eigen::VectorXd w(size());
        for (int j = 0; j < ny; ++j) {
            const double m = hx() * row_mass(j);
            for (int i = 0; i < nx; ++i) w(index(i, j)) = m;
        }
        return w;
    }

    /// Cell containing (x, y), clamped to the grid.
    std::pair<int, int> locate(double px, double py) const {
        int i = static_cast<int>(std::floor((px + Rx) / hx()));
        int j = static_cast<int>(std::floor(py / hy()));
        return {std::clamp(i, 0, nx - 1), std::clamp(j, 0, ny - 1)};
    }

    GridSpec scaled(double s) const {
        GridSpec g = *this;
        g.Rx *= s;
        g.Ry *= s;
        return g;
    }
};

/// Discrete function on a GridSpec; values at cell centers, index j * nx + i.
struct Field {
    GridSpec grid;
    Eigen::VectorXd values;

    Field() = default;
    explicit Field(const GridSpec& g, double fill = 0.0) : grid(g), values(Eigen::VectorXd::Constant(g.size(), fill)) {}
    Field(const GridSpec& g, Eigen::VectorXd v) : grid(g), values(std::move(v)) {
        if (values.size() != g.size()) throw StructuralError("Field: value count != grid size");
    }

    template <class F>
    static Field sample(const GridSpec& g, F&& f) {
        Field out(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) out.values(g.index(i, j)) = f(g.x(i), g.y(j));
        return out;
    }

    double& at(int i, int j) { return values(grid.index(i, j)); }
    double at(int i, int j) const { return values(grid.index(i, j)); }

    double mass() const { return grid.masses().dot(values); }
    double l1_norm() const { return grid.masses().dot(values.cwiseAbs()); }
    double l2_norm() const { return std::sqrt(grid.masses().dot(values.cwiseAbs2())); }
    bool finite() const { return values.allFinite(); }

    /// Bilinear interpolation between cell centers; constant extension beyond the outer centers.
    double interpolate(double px, double py) const {
        const double fx = std::clamp((px + grid.Rx) / grid.hx() - 0.5, 0.0, grid.nx - 1.0);
        const double fy = std::clamp(py / grid.hy() - 0.5, 0.0, grid.ny - 1.0);
        const int i0 = std::min(static_cast<int>(fx), grid.nx - 2);
        const int j0 = std::min(static_cast<int>(fy), grid.ny - 2);
        const double sx = fx - i0, sy = fy - j0;
        return (1 - sx) * (1 - sy) * at(i0, j0) + sx * (1 - sy) * at(i0 + 1, j0) + (1 - sx) * sy * at(i0, j0 + 1) +
               sx * sy * at(i0 + 1, j0 + 1);
    }
};

/// Coefficients of the bilinear form int (bxx u_x v_x + bxy u_y v_x + byx u_x v_y + byy u_y v_y) y^c dz.
/// The associated operator is bxx u_xx + (bxy + byx) u_xy + byy (u_yy + c u_y / y) + byx c u_x / y.
struct FormCoefficients {
    double bxx = 1.0, bxy = 0.0, byx = 0.0, byy = 1.0;
    double weight = 0.0;  // exponent c of the measure

    static FormCoefficients model(const ModelOperatorSpec& m) {
        validate_model(m);
        if (m.N != 1) throw StructuralError("fd_solver: only N = 1 is discretized");
        return {1.0, 2.0 * m.a(0), 0.0, 1.0, m.c};
    }

    /// Q u_xx + 2 q u_xy + gamma u_yy + (d u_x + c u_y)/y written in form: measure y^{c/gamma},
    /// byy = gamma, byx = d gamma / c (the drift's x-part), bxy = 2q - byx.
    static FormCoefficients general(const GeneralOperatorSpec& s) {
        if (s.N != 1) throw StructuralError("fd_solver: only N = 1 is discretized");
        const ValidationReport v = validate_general(s);
        if (!v.pass) throw InvalidSpecError("fd_solver: general spec fails validation (" + v.violations.front() + ")");
        const double g = s.gamma();
        const double byx = s.c == 0.0 ? 0.0 : s.d(0) * g / s.c;
        return {s.Q()(0, 0), 2.0 * s.q()(0) - byx, byx, g, s.c / g};
    }

    bool symmetric() const { return bxy == byx; }
    /// Smallest eigenvalue of the symmetric part [[bxx, (bxy+byx)/2], [., byy]].
    double coercivity() const {
        const double m = 0.5 * (bxy + byx);
        const double tr = 0.5 * (bxx + byy), det = bxx * byy - m * m;
        return tr - std::sqrt(std::max(0.0, tr * tr - det));
    }
};

enum class LinearSolver { automatic, direct, krylov };

/// Form matrix and mass vector; the operator is -W^{-1} A (or -W^{-1} A^T for the adjoint).
struct DiscreteOperator {
    GridSpec grid;
    FormCoefficients form;
    Eigen::SparseMatrix<double> form_matrix;  // a(u, v) = v^T A u
    Eigen::VectorXd w;
    bool adjoint = false;

    /// A for the primal operator, A^T for the adjoint.
    Eigen::SparseMatrix<double> advancing_matrix() const {
        if (!adjoint) return form_matrix;
        return Eigen::SparseMatrix<double>(form_matrix.transpose());
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
        Eigen::VectorXd r = adjoint ? Eigen::VectorXd(form_matrix.transpose() * u) : Eigen::VectorXd(form_matrix * u);
        return -(r.array() / w.array()).matrix();
    }
    Field apply(const Field& f) const { return Field(grid, apply(f.values)); }

    double form_value(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const { return v.dot(form_matrix * u); }

    DiscreteOperator adjoint_operator() const {
        DiscreteOperator o = *this;
        o.adjoint = !adjoint;
        return o;
    }
};

namespace detail {

struct FormAssembler {
    const GridSpec& g;
    std::vector<Eigen::Triplet<double>> trip;

    // alpha (u[a1] - u[a0]) (v[b1] - v[b0])
    void add(double alpha, int a0, int a1, int b0, int b1) {
        if (alpha == 0.0) return;
        trip.emplace_back(b1, a1, alpha);
        trip.emplace_back(b1, a0, -alpha);
        trip.emplace_back(b0, a1, -alpha);
        trip.emplace_back(b0, a0, alpha);
    }
};

} // namespace detail

/// Assembles the form on the grid. Symmetric part on cell faces; the mixed terms per cell quadrant,
/// each quadrant pairing its own x-face and y-face differences so the quadrant masses add up to
/// exactly the face weights (this gives a(u,u) >= lambda_min(sym B) * E(u) on every grid).
inline DiscreteOperator assemble(const FormCoefficients& form, GridSpec grid) {
    grid.c = form.weight;
    grid.validate();
    if (!(form.coercivity() > 0.0)) throw ParameterError("assemble: form is not coercive (|a| >= 1)");
    const int nx = grid.nx, ny = grid.ny;
    const double hx = grid.hx(), hy = grid.hy();
    detail::FormAssembler as{grid, {}};
    as.trip.reserve(static_cast<std::size_t>(grid.size()) * 40);

    for (int j = 0; j < ny; ++j) {
        const double ax = form.bxx * grid.row_mass(j) / hx;
        for (int i = 0; i + 1 < nx; ++i) {
            const int k0 = grid.index(i, j), k1 = grid.index(i + 1, j);
            as.add(ax, k0, k1, k0, k1);
        }
    }
    for (int j = 0; j + 1 < ny; ++j) {
        const double omega = grid.upper_half_mass(j) + grid.lower_half_mass(j + 1);
        const double ay = form.byy * hx * omega / (hy * hy);
        for (int i = 0; i < nx; ++i) {
            const int k0 = grid.index(i, j), k1 = grid.index(i, j + 1);
            as.add(ay, k0, k1, k0, k1);
        }
    }
    if (form.bxy != 0.0 || form.byx != 0.0) {
        for (int j = 0; j < ny; ++j) {
            const double up = 0.5 * hx * grid.upper_half_mass(j) / (hx * hy);
            const double lo = 0.5 * hx * grid.lower_half_mass(j) / (hx * hy);
            for (int i = 0; i < nx; ++i) {
                const int k = grid.index(i, j);
                for (int sx : {-1, 1}) {
                    const int ii = i + sx;
                    if (ii < 0 || ii >= nx) continue;
                    const int xa0 = sx > 0 ? k : grid.index(ii, j);
                    const int xa1 = sx > 0 ? grid.index(ii, j) : k;
                    for (int sy : {-1, 1}) {
                        const int jj = j + sy;
                        if (jj < 0 || jj >= ny) continue;
                        const double mu = sy > 0 ? up : lo;
                        const int ya0 = sy > 0 ? k : grid.index(i, jj);
                        const int ya1 = sy > 0 ? grid.index(i, jj) : k;
                        as.add(mu * form.bxy, ya0, ya1, xa0, xa1);
                        as.add(mu * form.byx, xa0, xa1, ya0, ya1);
                    }
                }
            }
        }
    }
    DiscreteOperator op;
    op.grid = grid;
    op.form = form;
    op.form_matrix.resize(grid.size(), grid.size());
    op.form_matrix.setFromTriplets(as.trip.begin(), as.trip.end());
    op.form_matrix.makeCompressed();
    op.w = grid.masses();
    return op;
}

inline DiscreteOperator assemble(const ModelOperatorSpec& model, const GridSpec& grid) {
    return assemble(FormCoefficients::model(model), grid);
}

/// Discrete gradient energy sum over faces of (face measure) * (difference quotient)^2.
inline double gradient_energy(const GridSpec& g, const Eigen::VectorXd& u) {
    double e = 0.0;
    const double hx = g.hx(), hy = g.hy();
    for (int j = 0; j < g.ny; ++j) {
        const double m = hx * g.row_mass(j);
        for (int i = 0; i + 1 < g.nx; ++i) {
            const double d = (u(g.index(i + 1, j)) - u(g.index(i, j))) / hx;
            e += m * d * d;
        }
    }
    for (int j = 0; j + 1 < g.ny; ++j) {
        const double m = hx * (g.upper_half_mass(j) + g.lower_half_mass(j + 1));
        for (int i = 0; i < g.nx; ++i) {
            const double d = (u(g.index(i, j + 1)) - u(g.index(i, j))) / hy;
            e += m * d * d;
        }
    }
    return e;
}

struct EvolveOptions {
    int steps = 0;  // 0: ceil(t / min(h^2, t/64)) with h = max(hx, hy)
    int rannacher_half_steps = 4;
    LinearSolver solver = LinearSolver::automatic;
    int direct_limit = 90000;  // automatic: direct factorization up to this many unknowns
    double krylov_tolerance = 1e-13;
    int krylov_max_iterations = 500;
};

struct EvolveStats {
    int steps = 0;
    double dt = 0.0;
    double max_mass_drift = 0.0;  // relative, per step (primal operator only)
    int max_krylov_iterations = 0;
    double max_krylov_residual = 0.0;
    std::string solver;
};

inline int default_steps(const GridSpec& g, double t) {
    const double h = std::max(g.hx(), g.hy());
    const double ht = std::min(h * h, t / 64.0);
    return std::max(1, static_cast<int>(std::ceil(t / ht - 1e-9)));
}

namespace detail {

/// Solves (W + tau A) x = b repeatedly for one fixed tau.
class ImplicitSolver {
public:
    ImplicitSolver(const DiscreteOperator& op, double tau, const EvolveOptions& opt) : opt_(opt) {
        M_ = op.advancing_matrix() * tau;
        for (int k = 0; k < M_.rows(); ++k) M_.coeffRef(k, k) += op.w(k);
        M_.makeCompressed();
        const Eigen::SparseMatrix<double>& M = M_;
        const bool direct = opt.solver == LinearSolver::direct ||
                            (opt.solver == LinearSolver::automatic && op.grid.size() <= opt.direct_limit);
        if (direct && op.form.symmetric()) {
            kind_ = Kind::ldlt;
            name_ = "simplicial-ldlt";
            ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
            ldlt_->compute(M);
            if (ldlt_->info() != Eigen::Success) throw StepFailure("LDLT factorization failed", NAN);
        } else if (direct) {
            kind_ = Kind::lu;
            name_ = "sparse-lu";
            lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            lu_->analyzePattern(M);
            lu_->factorize(M);
            if (lu_->info() != Eigen::Success) throw StepFailure("LU factorization failed: " + lu_->lastErrorMessage(), NAN);
        } else {
            kind_ = Kind::krylov;
            name_ = "bicgstab-ilut";
            it_ = std::make_unique<Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>>();
            it_->preconditioner().setDroptol(1e-4);
            it_->preconditioner().setFillfactor(10);
            it_->setTolerance(opt.krylov_tolerance);
            it_->setMaxIterations(opt.krylov_max_iterations);
            it_->compute(M);
            if (it_->info() != Eigen::Success) throw StepFailure("ILUT preconditioner failed", NAN);
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b, const Eigen::VectorXd& guess, EvolveStats& stats) {
        switch (kind_) {
        case Kind::ldlt: return ldlt_->solve(b);
        case Kind::lu: return lu_->solve(b);
        case Kind::krylov: {
            Eigen::VectorXd x = it_->solveWithGuess(b, guess);
            stats.max_krylov_iterations = std::max<int>(stats.max_krylov_iterations, it_->iterations());
            stats.max_krylov_residual = std::max(stats.max_krylov_residual, it_->error());
            if (it_->info() != Eigen::Success || !(it_->error() <= 100.0 * opt_.krylov_tolerance))
                throw StepFailure("BiCGSTAB did not converge", it_->error());
            return x;
        }
        }
        return {};
    }
    const std::string& name() const { return name_; }

private:
    enum class Kind { ldlt, lu, krylov } kind_ = Kind::lu;
    EvolveOptions opt_;
    std::string name_;
    Eigen::SparseMatrix<double> M_;  // the iterative solver keeps a reference to it
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
    std::unique_ptr<Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>> it_;
};

} // namespace detail

/// Crank-Nicolson from 0 to each time in `times` (ascending) with a common step dt = times.back() / steps.
/// The first steps are replaced by backward-Euler half-steps (Rannacher start), which damp the
/// high-frequency content of rough data such as a discrete delta; they reuse the CN matrix.
/// Snapshot times are rounded to the nearest step; `actual_times` receives the times reached.
inline std::vector<Field> evolve_snapshots(const DiscreteOperator& op, const Field& f, const std::vector<double>& times,
                                           const EvolveOptions& opt = {}, EvolveStats* stats_out = nullptr,
                                           std::vector<double>* actual_times = nullptr) {
    if (times.empty()) return {};
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0)) throw DomainError("evolve: t must be positive");
        if (i > 0 && times[i] < times[i - 1]) throw ParameterError("evolve: times must be ascending");
    }
    if (f.values.size() != op.grid.size()) throw StructuralError("evolve: field does not match operator grid");
    const double tmax = times.back();
    const int steps = opt.steps > 0 ? opt.steps : default_steps(op.grid, tmax);
    const double dt = tmax / steps;

    EvolveStats stats;
    stats.steps = steps;
    stats.dt = dt;
    detail::ImplicitSolver solver(op, 0.5 * dt, opt);
    stats.solver = solver.name();
    const Eigen::SparseMatrix<double> A = op.advancing_matrix();
    const Eigen::VectorXd& w = op.w;

    std::vector<int> targets;
    for (double t : times) targets.push_back(std::max(1, static_cast<int>(std::lround(t / dt))));

    std::vector<Field> out;
    if (actual_times) actual_times->clear();
    Eigen::VectorXd u = f.values;
    const int be_pairs = std::min(opt.rannacher_half_steps / 2, steps);
    std::size_t next = 0;
    for (int n = 1; n <= steps; ++n) {
        const double m0 = w.dot(u);
        if (n <= be_pairs) {
            for (int h = 0; h < 2; ++h) u = solver.solve((w.array() * u.array()).matrix(), u, stats);
        } else {
            const Eigen::VectorXd rhs = (w.array() * u.array()).matrix() - 0.5 * dt * (A * u);
            u = solver.solve(rhs, u, stats);
        }
        if (!u.allFinite()) throw StepFailure("evolve: non-finite values at step " + std::to_string(n), NAN);
        if (!op.adjoint) {
            const double drift = std::abs(w.dot(u) - m0) / std::max(std::abs(m0), 1e-300);
            stats.max_mass_drift = std::max(stats.max_mass_drift, drift);
        }
        while (next < targets.size() && targets[next] == n) {
            out.emplace_back(op.grid, u);
            if (actual_times) actual_times->push_back(n * dt);
            ++next;
        }
    }
    while (next < targets.size()) {  // targets rounded past the last step
        out.emplace_back(op.grid, u);
        if (actual_times) actual_times->push_back(steps * dt);
        ++next;
    }
    if (stats_out) *stats_out = stats;
    return out;
}

inline Field evolve(const DiscreteOperator& op, const Field& f, double t, const EvolveOptions& opt = {},
                    EvolveStats* stats = nullptr) {
    return evolve_snapshots(op, f, {t}, opt, stats).front();
}

struct SourceCell {
    int i = 0, j = 0;
    bool snapped = false;
    double offset = 0.0;
};

/// Cell whose center is z2; snaps to the containing cell unless strict.
inline SourceCell source_cell(const GridSpec& g, const Point& z2, bool strict) {
    if (z2.dim() != 1) throw StructuralError("kernel_column: N = 1 only");
    if (!(z2.y > 0.0)) throw DomainError("kernel_column: source y must be positive");
    auto [i, j] = g.locate(z2.x(0), z2.y);
    SourceCell s{i, j, false, 0.0};
    s.offset = std::hypot(g.x(i) - z2.x(0), g.y(j) - z2.y);
    if (s.offset > 1e-9 * std::max(g.hx(), g.hy())) {
        if (strict) throw DomainError("kernel_column: source is not a cell center");
        s.snapped = true;
    }
    return s;
}

inline Field delta_field(const GridSpec& g, int i, int j) {
    Field f(g);
    f.at(i, j) = 1.0 / (g.hx() * g.row_mass(j));
    return f;
}

/// Field values as a slice (negative round-off clamped to 0, recorded as a warning).
inline KernelSlice field_to_slice(const Field& f, double t, const Point& source, const std::string& method) {
    KernelSlice s;
    s.t = t;
    s.source = source;
    s.c = f.grid.c;
    s.method = method;
    s.samples.reserve(f.values.size());
    double most_negative = 0.0;
    for (int j = 0; j < f.grid.ny; ++j)
        for (int i = 0; i < f.grid.nx; ++i) {
            const double v = f.at(i, j);
            most_negative = std::min(most_negative, v);
            s.samples.push_back({Point::planar(f.grid.x(i), f.grid.y(j)), std::max(v, 0.0)});
        }
    if (most_negative < -1e-10) s.warnings.push_back("negative values down to " + std::to_string(most_negative) + " clamped to 0");
    return s;
}

struct KernelColumn {
    std::vector<Field> fields;  // p(t_k, ., z2) on the grid, raw values
    std::vector<double> times;
    Point source;               // the cell center actually used
    EvolveStats stats;
    std::vector<std::string> warnings;
};

/// Evolves the discrete delta 1/w at z2's cell; p(t, ., z2) in the y^c dz convention.
/// For the adjoint operator this yields p*(t, ., z2) = p(t, z2, .).
inline KernelColumn kernel_column(const DiscreteOperator& op, const std::vector<double>& times, const Point& z2,
                                  bool strict = false, const EvolveOptions& opt = {}) {
    const SourceCell sc = source_cell(op.grid, z2, strict);
    KernelColumn col;
    col.source = Point::planar(op.grid.x(sc.i), op.grid.y(sc.j));
    if (sc.snapped)
        col.warnings.push_back("source snapped to cell center (" + std::to_string(col.source.x(0)) + ", " +
                               std::to_string(col.source.y) + ")");
    col.fields = evolve_snapshots(op, delta_field(op.grid, sc.i, sc.j), times, opt, &col.stats, &col.times);
    return col;
}

inline KernelSlice kernel_column_slice(const DiscreteOperator& op, double t, const Point& z2, bool strict = false,
                                       const EvolveOptions& opt = {}) {
    KernelColumn col = kernel_column(op, {t}, z2, strict, opt);
    KernelSlice s = field_to_slice(col.fields.front(), col.times.front(), col.source, "solver");
    s.warnings.insert(s.warnings.begin(), col.warnings.begin(), col.warnings.end());
    return s;
}

/// Central differences inside, one-sided on the outermost cells.
inline std::pair<Field, Field> discrete_gradient(const Field& f) {
    const GridSpec& g = f.grid;
    Field gx(g), gy(g);
    const double hx = g.hx(), hy = g.hy();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (i == 0) gx.at(i, j) = (f.at(1, j) - f.at(0, j)) / hx;
            else if (i == g.nx - 1) gx.at(i, j) = (f.at(i, j) - f.at(i - 1, j)) / hx;
            else gx.at(i, j) = (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * hx);
            if (j == 0) gy.at(i, j) = (f.at(i, 1) - f.at(i, 0)) / hy;
            else if (j == g.ny - 1) gy.at(i, j) = (f.at(i, j) - f.at(i, j - 1)) / hy;
            else gy.at(i, j) = (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * hy);
        }
    return {gx, gy};
}

} // namespace hkb

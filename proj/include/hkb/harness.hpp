#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "envelope_geometry.hpp"
#include "exact_kernel.hpp"
#include "fd_solver.hpp"
#include "general_kernel.hpp"
#include "io.hpp"
#include "operator_core.hpp"
#include "sab.hpp"
#include "verification.hpp"

namespace hkb::harness {

enum class ProbeSet { smoke, desk, full };

inline ProbeSet parse_probe(const std::string& s) {
    if (s == "smoke") return ProbeSet::smoke;
    if (s == "desk") return ProbeSet::desk;
    if (s == "full") return ProbeSet::full;
    throw ParameterError("probe set must be one of smoke, desk, full");
}

inline const char* probe_name(ProbeSet p) {
    return p == ProbeSet::smoke ? "smoke" : p == ProbeSet::desk ? "desk" : "full";
}

/// One verified quantity: pass iff `residual relation tolerance` ("<=" or ">=").
struct CheckResult {
    int criterion = 0;
    std::string name;
    json parameters = json::object();
    double residual = 0.0;
    double tolerance = 0.0;
    std::string relation = "<=";
    bool pass = false;
    std::string detail;

    json to_json() const {
        json j{{"criterion", criterion}, {"name", name},       {"parameters", parameters}, {"relation", relation},
               {"tolerance", tolerance}, {"verdict", pass},    {"detail", detail}};
        j["residual"] = std::isfinite(residual) ? json(residual) : json(std::to_string(residual));
        return j;
    }
};

struct HarnessOptions {
    ProbeSet probe = ProbeSet::desk;
    std::uint64_t seed = 20240611;
    bool break_envelope = false;
    std::map<std::string, double> tolerances;  // overrides by check tolerance name
    std::ostream* log = nullptr;
};

/// Tolerances of the acceptance checks. Every check names the one it uses; overrides replace them by name.
struct Tolerances {
    static constexpr double oracle_rel_linf = 0.05;
    static constexpr double oracle_refinement_gain = 2.0;
    static constexpr double oracle_seconds = 120.0;
    static constexpr double mass_exact = 1e-8;
    static constexpr double mass_solver = 1e-3;
    static constexpr double scaling_exact = 1e-12;
    static constexpr double translation_exact = 1e-12;
    static constexpr double adjoint_exact = 1e-12;
    static constexpr double ck_exact = 1e-6;
    static constexpr double scaling_solver = 1e-10;     // the scheme is scale-invariant up to round-off
    static constexpr double translation_solver = 1e-3;  // truncated domain
    static constexpr double adjoint_solver = 1e-12;     // A^T is exact; only round-off of the solves remains
    static constexpr double duality_operator = 1e-12;   // |<L u, v>_w - <u, L* v>_w| / sum |terms|, random fields
    static constexpr double ck_solver = 1e-3;
    static constexpr double envelope_seconds = 900.0;
    static constexpr double gradient_slack = 3.0;
    static constexpr double near_diagonal_factor = 2.0;
    static constexpr double poincare_x = 1e-6;
    static constexpr double sab_scale = 1e-12;
    static constexpr double reduction_rel = 0.05;
};

class Harness {
public:
    explicit Harness(HarnessOptions opt) : opt_(std::move(opt)), rng_(opt_.seed) {}

    const HarnessOptions& options() const { return opt_; }

    // ------------------------------------------------------------ 1
    std::vector<CheckResult> oracle_equivalence() {
        std::vector<CheckResult> out;
        if (opt_.probe == ProbeSet::smoke) return out;
        for (double c : {-0.5, 0.0, 1.0, 2.0}) {
            double errs[2] = {0, 0};
            double secs = 0.0;
            const int sizes[2] = {128, 256};
            for (int level = 0; level < 2; ++level) {
                const auto t0 = std::chrono::steady_clock::now();
                GridSpec g{8.0, 8.0, sizes[level], sizes[level], c};
                const DiscreteOperator op = assemble(ModelOperatorSpec::planar(0.0, c), g);
                auto [i2, j2] = g.locate(0.0, 1.0);
                const Point z2 = Point::planar(g.x(i2), g.y(j2));
                KernelColumn col = kernel_column(op, {1.0}, z2, true);
                const Field& f = col.fields.front();
                const ModelOperatorSpec m0 = ModelOperatorSpec::planar(0.0, c);
                double err = 0.0, peak = 0.0;
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i) {
                        const double e = product_kernel(m0, 1.0, Point::planar(g.x(i), g.y(j)), z2);
                        peak = std::max(peak, e);
                        err = std::max(err, std::abs(e - f.at(i, j)));
                    }
                errs[level] = err / peak;
                secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                if (level == 1) a0_columns_.push_back({c, 1.0, z2, f});
            }
            const json par{{"a", 0.0}, {"c", c}, {"t", 1.0}, {"grid", 256}};
            out.push_back(make(1, "oracle rel Linf c=" + fmt(c), par, errs[1], tol("oracle_rel_linf", Tolerances::oracle_rel_linf)));
            out.push_back(make(1, "refinement gain 128->256 c=" + fmt(c), par, errs[0] / errs[1],
                               tol("oracle_refinement_gain", Tolerances::oracle_refinement_gain), ">="));
            out.push_back(make(1, "runtime seconds c=" + fmt(c), par, secs, tol("oracle_seconds", Tolerances::oracle_seconds)));
            note("criterion 1: c=" + fmt(c) + " err128=" + fmt(errs[0]) + " err256=" + fmt(errs[1]));
        }
        return out;
    }

    // ------------------------------------------------------------ 2
    std::vector<CheckResult> conservation() {
        std::vector<CheckResult> out;
        const std::vector<double> cs = exact_cs();
        for (double c : cs)
            for (double t : {0.5, 1.0, 2.0})
                for (const Point& z1 : {Point::planar(0.0, 0.05), Point::planar(0.0, 0.5), Point::planar(1.0, 5.0)}) {
                    const double d = check_conservation_exact(ModelOperatorSpec::planar(0.0, c), t, z1);
                    out.push_back(make(2, "exact mass c=" + fmt(c) + " t=" + fmt(t) + " y1=" + fmt(z1.y),
                                       {{"a", 0.0}, {"c", c}, {"t", t}, {"z1", point_json(z1)}}, d,
                                       tol("mass_exact", Tolerances::mass_exact)));
                }
        if (opt_.probe == ProbeSet::smoke) return out;
        std::vector<double> sc = {-0.5, 1.0};
        if (opt_.probe == ProbeSet::full) sc = {-0.5, 0.0, 1.0, 2.0};
        for (double c : sc) {
            const ModelOperatorSpec m = ModelOperatorSpec::planar(0.5, c);
            GridSpec g{10.0, 10.0, 160, 160, c};
            const DiscreteOperator op = assemble(m, g);
            auto [i1, j1] = g.locate(0.0, 0.5);
            const Point z = Point::planar(g.x(i1), g.y(j1));
            const std::vector<double> ts{0.5, 1.0, 2.0};
            const KernelColumn adj = kernel_column(op.adjoint_operator(), ts, z, true);
            const KernelColumn pri = kernel_column(op, ts, z, true);
            for (std::size_t k = 0; k < ts.size(); ++k) {
                const double d = std::max(check_conservation(adj.fields[k]), check_conservation(pri.fields[k]));
                const double tail = truncation_tail(pri.fields[k], std::sqrt(ts[k]));
                out.push_back(make(2, "solver mass a=0.5 c=" + fmt(c) + " t=" + fmt(ts[k]),
                                   {{"a", 0.5}, {"c", c}, {"t", ts[k]}, {"grid", grid_json(op.grid)}}, d,
                                   tol("mass_solver", Tolerances::mass_solver), "<=",
                                   "int p(t,z1,.) y^c (adjoint column) and int p(t,.,z2) y^c; outer-band mass " + fmt(tail)));
            }
        }
        return out;
    }

    // ------------------------------------------------------------ 3
    std::vector<CheckResult> identities() {
        std::vector<CheckResult> out;
        std::uniform_real_distribution<double> ux(-1.0, 1.0), uy(0.05, 3.0);
        std::vector<ProbePair> probes;
        for (int i = 0; i < 10; ++i)
            probes.push_back({Point::planar(ux(rng_), uy(rng_)), Point::planar(ux(rng_), uy(rng_))});
        for (double c : exact_cs())
            for (auto [t, s] : {std::pair{0.5, 0.5}, std::pair{0.25, 1.0}}) {
                const IdentityReport r = check_identities_exact(ModelOperatorSpec::planar(0.0, c), t, s, 0.7, 2.0, probes);
                const json par{{"a", 0.0}, {"c", c}, {"t", t}, {"s", s}, {"scale", 2.0}, {"x0", 0.7}, {"probes", probes.size()}};
                const std::string tag = " c=" + fmt(c) + " (t,s)=(" + fmt(t) + "," + fmt(s) + ")";
                out.push_back(make(3, "exact scaling" + tag, par, r.scaling, tol("scaling_exact", Tolerances::scaling_exact)));
                out.push_back(make(3, "exact translation" + tag, par, r.translation, tol("translation_exact", Tolerances::translation_exact)));
                out.push_back(make(3, "exact adjoint" + tag, par, r.adjoint, tol("adjoint_exact", Tolerances::adjoint_exact)));
                out.push_back(make(3, "exact chapman-kolmogorov" + tag, par, r.chapman_kolmogorov, tol("ck_exact", Tolerances::ck_exact)));
            }
        if (opt_.probe == ProbeSet::smoke) return out;
        const std::vector<ProbePair> sp{{Point::planar(0.3, 0.6), Point::planar(-0.2, 0.4)},
                                        {Point::planar(-0.5, 1.5), Point::planar(0.0, 1.0)},
                                        {Point::planar(0.8, 0.1), Point::planar(0.4, 0.3)}};
        for (double c : {-0.5, 1.0}) {
            GridSpec g{8.0, 8.0, 96, 96, c};
            const IdentityReport r = check_identities_solver(ModelOperatorSpec::planar(0.5, c), g, 0.5, 0.5, 3, 2.0, sp);
            const json par{{"a", 0.5}, {"c", c}, {"t", 0.5}, {"s", 0.5}, {"scale", 2.0}, {"x0_cells", 3}, {"grid", grid_json(g)}};
            const std::string tag = " a=0.5 c=" + fmt(c);
            out.push_back(make(3, "solver scaling" + tag, par, r.scaling, tol("scaling_solver", Tolerances::scaling_solver)));
            out.push_back(make(3, "solver translation" + tag, par, r.translation, tol("translation_solver", Tolerances::translation_solver)));
            out.push_back(make(3, "solver adjoint" + tag, par, r.adjoint, tol("adjoint_solver", Tolerances::adjoint_solver)));
            out.push_back(make(3, "solver chapman-kolmogorov" + tag, par, r.chapman_kolmogorov, tol("ck_solver", Tolerances::ck_solver)));
            const DiscreteOperator op = assemble(ModelOperatorSpec::planar(0.5, c), g);
            const DiscreteOperator adj = op.adjoint_operator();
            std::normal_distribution<double> nd;
            double worst = 0.0;
            for (int k = 0; k < 5; ++k) {
                Eigen::VectorXd u(op.w.size()), v(op.w.size());
                for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = nd(rng_), v[i] = nd(rng_);
                const Eigen::VectorXd terms = op.apply(u).cwiseProduct(op.w).cwiseProduct(v);
                const double lhs = terms.sum();
                const double rhs = adj.apply(v).cwiseProduct(op.w).dot(u);
                worst = std::max(worst, std::abs(lhs - rhs) / std::max(terms.cwiseAbs().sum(), 1e-300));
            }
            out.push_back(make(3, "operator duality" + tag, par, worst, tol("duality_operator", Tolerances::duality_operator),
                               "<=", "5 random field pairs"));
        }
        return out;
    }

    // ------------------------------------------------------------ 4
    std::vector<CheckResult> envelope() {
        std::vector<CheckResult> out;
        const auto t0 = std::chrono::steady_clock::now();
        build_envelope_cases();
        for (auto& ec : env_cases_) {
            const json par{{"a", ec.a}, {"c", ec.c}, {"method", ec.exact ? "exact" : "solver"}, {"t", times()},
                           {"y_range", {0.02, 8.0}}, {"x_range_over_sqrt_t", 6.0}};
            const std::string tag = " a=" + fmt(ec.a) + " c=" + fmt(ec.c);
            try {
                ec.fit = fit_envelope_constants(ec.slices, EnvelopeForm::product, ec.c, 1);
            } catch (const FitUnderdeterminedError& e) {
                out.push_back(make(4, "envelope fit" + tag, par, 0.0, 1.0, ">=", e.what()));
                continue;
            }
            const FitReport& f = *ec.fit;
            out.push_back(make(4, "envelope verdict" + tag, par, f.verdict ? 1.0 : 0.0, 1.0, ">=",
                               "C_up=" + fmt(f.C_up) + " k_up=" + fmt(f.k_up) + " C_low=" + fmt(f.C_low) + " k_low=" +
                                   fmt(f.k_low) + " samples=" + std::to_string(f.samples_used) + " " + f.reason));
            out.push_back(make(4, "k_low < k_up" + tag, par, f.k_up - f.k_low, 0.0, ">"));
            EnvelopeParams up = f.upper(), low = f.lower();
            if (opt_.break_envelope) {
                up.k *= 0.5;
                low.k *= 0.5;
            }
            const EnvelopeCheck ck = check_envelope(ec.slices, up, low, ec.c, 1);
            out.push_back(make(4, std::string(opt_.break_envelope ? "broken " : "") + "envelope holds" + tag, par,
                               static_cast<double>(ck.violations), 0.0, "<=",
                               "max p/upper=" + fmt(ck.max_upper_excess) + " min p/lower=" + fmt(ck.min_lower_excess)));
            const FitReport one = fit_envelope_constants(ec.slices, EnvelopeForm::one_sided_2, ec.c, 1);
            out.push_back(make(4, "one-sided form agrees" + tag, par, one.verdict == f.verdict ? 1.0 : 0.0, 1.0, ">=",
                               "one-sided C_up=" + fmt(one.C_up) + " C_low=" + fmt(one.C_low)));
            note("criterion 4:" + tag + " k_up=" + fmt(f.k_up) + " k_low=" + fmt(f.k_low) + " window=" + fmt(f.window));
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(make(4, "envelope runtime seconds", json::object(), secs, tol("envelope_seconds", Tolerances::envelope_seconds)));
        return out;
    }

    // ------------------------------------------------------------ 5
    std::vector<CheckResult> gradient() {
        std::vector<CheckResult> out;
        build_envelope_cases();
        const double slack = tol("gradient_slack", Tolerances::gradient_slack);
        for (double c : envelope_cs()) {
            const ModelOperatorSpec m0 = ModelOperatorSpec::planar(0.0, c);
            std::vector<GradientSample> ref;
            for (const auto& ec : env_cases_)
                if (ec.exact && ec.c == c)
                    for (const auto& sl : ec.slices)
                        for (const auto& smp : sl.samples)
                            ref.push_back({sl.t, smp.z1, sl.source,
                                           exact_gradient_norm(m0, sl.t, smp.z1, sl.source, 1e-4 * std::sqrt(sl.t))});
            const GradientFit gf = fit_gradient_constants(ref, c, 1);
            const json par{{"c", c}, {"C", gf.C}, {"k", gf.k}, {"slack", slack}};
            out.push_back(make(5, "gradient exact a=0 c=" + fmt(c), par, gradient_excess(ref, c, 1, gf.C, gf.k), 1.0 + 1e-12));
            for (const auto& ec : env_cases_)
                if (!ec.exact && ec.c == c)
                    out.push_back(make(5, "gradient solver a=" + fmt(ec.a) + " c=" + fmt(c), par,
                                       gradient_excess(ec.gradients, c, 1, slack * gf.C, slack * gf.k), 1.0));
            for (const auto& col : a0_columns_)
                if (col.c == c) {
                    const auto gs = region_gradients(col.field, col.t, col.source);
                    out.push_back(make(5, "gradient solver a=0 c=" + fmt(c) + " (oracle grid)", par,
                                       gradient_excess(gs, c, 1, slack * gf.C, slack * gf.k), 1.0));
                }
            note("criterion 5: c=" + fmt(c) + " C=" + fmt(gf.C) + " k=" + fmt(gf.k));
        }
        return out;
    }

    // ------------------------------------------------------------ 6
    std::vector<CheckResult> floors() {
        std::vector<CheckResult> out;
        build_envelope_cases();
        for (const auto& ec : env_cases_) {
            const FloorReport diag = near_diagonal_floor(ec.slices, 0.0);
            const FloorReport near = near_diagonal_floor(ec.slices, 0.1);
            const json par{{"a", ec.a}, {"c", ec.c}, {"method", ec.exact ? "exact" : "solver"}};
            const std::string tag = " a=" + fmt(ec.a) + " c=" + fmt(ec.c);
            out.push_back(make(6, "on-diagonal floor c0" + tag, par, diag.floor, 0.0, ">", "over " + std::to_string(diag.count) + " sources"));
            const double factor = tol("near_diagonal_factor", Tolerances::near_diagonal_factor);
            out.push_back(make(6, "near-diagonal floor / c0" + tag, par, near.floor / diag.floor, 1.0 / factor, ">=",
                               "near floor " + fmt(near.floor) + " over " + std::to_string(near.count) + " samples"));
            if (ec.fit) {
                const FloorReport far = far_field_floor(ec.slices, 1.0, ec.fit->k_low);
                out.push_back(make(6, "far-field floor r=1" + tag, par, far.floor, 0.0, ">", "k=" + fmt(ec.fit->k_low)));
                const FloorReport inner = far_field_floor(ec.slices, 1.0, ec.fit->k_low, 1e-12, 3.0);
                out.push_back(make(6, "far-field floor uniform r=1" + tag, par, far.floor / inner.floor, 1.0 / factor, ">=",
                                   "inner floor " + fmt(inner.floor) + " over " + std::to_string(inner.count) + " samples"));
            }
        }
        return out;
    }

    // ------------------------------------------------------------ 7
    std::vector<CheckResult> g_function() {
        std::vector<CheckResult> out;
        std::vector<double> tg;
        for (int k = 0; k <= 8; ++k) tg.push_back(0.5 + k / 16.0);
        {
            const double alpha = normalizing_alpha(0.0, 1);
            const std::vector<double> te = opt_.probe == ProbeSet::smoke ? std::vector<double>{0.5, 0.75, 1.0} : tg;
            const GTrace tr = compute_G_exact(ModelOperatorSpec::planar(0.0, 0.0), Point::planar(0.0, 0.5), 0.5, alpha, te);
            const GMonotoneReport rep = check_G_monotone(tr, find_monotone_A(tr));
            const json par{{"a", 0.0}, {"c", 0.0}, {"theta", 0.5}, {"alpha", alpha}, {"method", "exact"}};
            out.push_back(make(7, "G <= 0 exact a=0 c=0", par, rep.max_G, 0.0, "<="));
            out.push_back(make(7, "G + At nondecreasing exact a=0 c=0", par, find_monotone_A(tr), 1e8, "<=",
                               "G(1)=" + fmt(rep.G_last)));
        }
        if (opt_.probe == ProbeSet::smoke) return out;
        const double c = 1.0, a = 0.5;
        const double alpha = normalizing_alpha(c, 1);
        GridSpec g{8.0, 8.0, 256, 128, c};
        const DiscreteOperator op = assemble(ModelOperatorSpec::planar(a, c), g);
        double inf_G1 = std::numeric_limits<double>::infinity(), worst_max = -inf_G1, worst_A = 0.0;
        const std::vector<Point> probes{Point::planar(0.0, 0.5), Point::planar(0.5, 0.25), Point::planar(-0.5, 0.75),
                                        Point::planar(0.0, 0.1), Point::planar(0.9, 0.9)};
        for (const Point& z2 : probes) {
            const KernelColumn col = kernel_column(op, tg, z2, false);
            const GTrace tr = compute_G(col, 0.5, alpha);
            const double A = find_monotone_A(tr);
            const GMonotoneReport rep = check_G_monotone(tr, A);
            inf_G1 = std::min(inf_G1, rep.G_last);
            worst_max = std::max(worst_max, rep.max_G);
            worst_A = std::max(worst_A, A);
        }
        const json par{{"a", a}, {"c", c}, {"theta", 0.5}, {"alpha", alpha}, {"t_grid", tg}, {"probes", probes.size()}};
        out.push_back(make(7, "G <= 0 solver a=0.5 c=1", par, worst_max, 0.0, "<="));
        out.push_back(make(7, "finite A with G + At nondecreasing", par, worst_A, 1e8, "<="));
        out.push_back(make(7, "inf over z2 of G(1) finite", par, std::isfinite(inf_G1) ? 1.0 : 0.0, 1.0, ">=",
                           "inf G(1) = " + fmt(inf_G1)));
        note("criterion 7: inf G(1)=" + fmt(inf_G1) + " A=" + fmt(worst_A));
        return out;
    }

    // ------------------------------------------------------------ 8
    std::vector<CheckResult> poincare() {
        std::vector<CheckResult> out;
        const std::vector<double> cs = opt_.probe == ProbeSet::smoke ? std::vector<double>{0.0} : std::vector<double>{-0.5, 1.0, 2.0};
        for (double c : cs) {
            const double alpha = normalizing_alpha(c, 1);
            GridSpec g{8.0, 8.0, 128, 128, c};
            const auto fam = poincare_probe_family(g);
            std::vector<Field> fields;
            for (const auto& nf : fam) fields.push_back(nf.field);
            const PoincareResult pr = poincare_ratio(fields, alpha);
            const json par{{"c", c}, {"alpha", alpha}, {"family", fam.size()}};
            out.push_back(make(8, "Poincare sup finite c=" + fmt(c), par, std::isfinite(pr.sup_ratio) ? 1.0 : 0.0, 1.0, ">=",
                               "sup ratio " + fmt(pr.sup_ratio)));
            const double rx = poincare_ratio(fam.front().field, alpha);
            out.push_back(make(8, "Poincare u=x moment value c=" + fmt(c), par, std::abs(rx - 0.5 / alpha),
                               tol("poincare_x", Tolerances::poincare_x)));
        }
        return out;
    }

    // ------------------------------------------------------------ 9
    std::vector<CheckResult> sab() {
        std::vector<CheckResult> out;
        struct Case {
            double a, b, th, m, p;
        };
        // both sides of each inequality, p = 2 and p = 1 forms, margins >= 1/4 in the exponents
        const std::vector<Case> matrix{{0, 0, 0, 0, 2},     {1, 0, 0, 0, 2},    {0.25, 0, 0, 0, 2}, {0.75, 0, 0, 0, 2},
                                       {0, 0.25, 0, 0, 2},  {0, 0.75, 0, 0, 2}, {0, 0, 0.25, 0, 2}, {0, 0, 1, 0, 2},
                                       {0, 0, 0, -0.5, 2},  {0, 0, 0, 2, 2},    {0, 0, 0, 0, 1},    {0, 0, 0, 0.5, 1}};
        int agree = 0;
        std::string bad;
        for (const auto& cs : matrix) {
            const SabSpec s{cs.a, cs.b, cs.th, cs.m, cs.p};
            const bool crit = sab_criterion(s);
            const SabLadder lad = sab_norm_estimate(s, 1.0);
            const bool ok = crit ? (lad.stabilizes && !lad.diverges) : (lad.diverges && !lad.stabilizes);
            agree += ok;
            if (!ok) bad += " (" + fmt(cs.a) + "," + fmt(cs.b) + "," + fmt(cs.th) + "," + fmt(cs.m) + "," + fmt(cs.p) + ")";
        }
        out.push_back(make(9, "criterion matches ladder on 12 cases", {{"cases", matrix.size()}},
                           static_cast<double>(agree), static_cast<double>(matrix.size()), ">=", bad));
        for (double c : {-0.5, 1.0})
            for (double p : {1.0, 2.0, 4.0}) {
                const SabSpec s{0.0, -c, 0.0, c, p};
                const SabLadder lad = sab_norm_estimate(s, 1.0);
                const bool ok = sab_criterion(s) && lad.stabilizes && !lad.diverges;
                out.push_back(make(9, "S^{0,-c} bounded on L^p_c c=" + fmt(c) + " p=" + fmt(p), {{"c", c}, {"p", p}},
                                   ok ? 1.0 : 0.0, 1.0, ">=", "norms " + fmt(lad.norms.front()) + " -> " + fmt(lad.norms.back())));
            }
        {
            const SabSpec s{0.5, -0.5, 0.0, 0.0, 2.0};
            GridSpec g{4.0, 4.0, 48, 48, 0.0};
            const double t = 2.5;
            const Field f = Field::sample(g, [](double x, double y) { return std::exp(-x * x - (y - 1.0) * (y - 1.0)); });
            const Field a = sab_apply(s, t, f);
            const Field b = sab_apply(s, 1.0, Field(g.scaled(1.0 / std::sqrt(t)), f.values));
            const double r = (a.values - b.values).cwiseAbs().maxCoeff() / a.values.cwiseAbs().maxCoeff();
            out.push_back(make(9, "scale identity S(t) = I_{1/sqrt t} S(1) I_{sqrt t}", {{"t", t}}, r, tol("sab_scale", Tolerances::sab_scale)));
        }
        return out;
    }

    // ------------------------------------------------------------ 10
    std::vector<CheckResult> reduction() {
        std::vector<CheckResult> out;
        if (opt_.probe == ProbeSet::smoke) return out;
        GeneralOperatorSpec spec;
        spec.N = 1;
        spec.A.resize(2, 2);
        spec.A << 1.2, 0.3, 0.3, 0.8;
        spec.d = Eigen::VectorXd::Constant(1, 0.5);
        spec.c = 1.0;
        GridSpec g{8.0, 8.0, 193, 160, 0.0};
        g.c = spec.c / spec.gamma();
        auto [i2, j2] = g.locate(0.0, 0.5);
        const Point z2 = Point::planar(g.x(i2), g.y(j2));
        const double t = 1.0;
        const KernelColumn direct = direct_kernel_column(spec, g, {t}, z2, true);
        const MappedKernel mapped = reduced_kernel_column(spec, g, {t}, z2);
        const Field& d = direct.fields.front();
        const Field& m = mapped.fields.front();
        const double peak = d.values.cwiseAbs().maxCoeff();
        const double err = (d.values - m.values).cwiseAbs().maxCoeff() / peak;
        const ReductionResult& red = mapped.reduction;
        const json par{{"A", {{1.2, 0.3}, {0.3, 0.8}}}, {"d", 0.5}, {"c", 1.0}, {"t", t}, {"z2", point_json(z2)},
                       {"reduction", reduction_json(red)}, {"grid", grid_json(d.grid)}, {"model_grid", grid_json(mapped.model_grid)}};
        out.push_back(make(10, "reduced kernel mapped back vs direct solve", par, err, tol("reduction_rel", Tolerances::reduction_rel)));
        note("criterion 10: rel err " + fmt(err) + " model a=" + fmt(red.model.a(0)) + " c=" + fmt(red.model.c));
        return out;
    }

    // ------------------------------------------------------------ geometry and normalizer
    std::vector<CheckResult> geometry() {
        std::vector<CheckResult> out;
        for (double c : {-0.5, 0.0, 1.0, 2.0}) {
            const double alpha = normalizing_alpha(c, 1);
            const double y = integrate_weighted_halfline([&](double yy) { return std::exp(-alpha * yy * yy); }, c, {}, 1.0);
            const double x = integrate_line([&](double xx) { return std::exp(-alpha * xx * xx); }, {0.0}, 1.0);
            out.push_back(make(0, "normalizing alpha by quadrature c=" + fmt(c), {{"c", c}, {"alpha", alpha}}, std::abs(x * y - 1.0), 1e-10));
            const DoublingReport dr = doubling_check(c, 1);
            out.push_back(make(0, "doubling constant c=" + fmt(c), {{"c", c}}, dr.worst, dr.shape_bound * (1 + 1e-12)));
        }
        const EquivalenceWindow w = envelope_equivalence_window(2.0, 0.1);
        out.push_back(make(0, "equivalence window c=2 eps=0.1", {{"c", 2.0}, {"eps", 0.1}}, w.upper, 1e6, "<=",
                           "window [" + fmt(w.lower) + ", " + fmt(w.upper) + "]"));
        return out;
    }

    std::vector<CheckResult> run_all() {
        std::vector<CheckResult> all;
        for (auto part : {&Harness::geometry, &Harness::oracle_equivalence, &Harness::conservation, &Harness::identities,
                          &Harness::envelope, &Harness::gradient, &Harness::floors, &Harness::g_function, &Harness::poincare,
                          &Harness::sab, &Harness::reduction}) {
            auto r = (this->*part)();
            all.insert(all.end(), r.begin(), r.end());
        }
        return all;
    }

private:
    struct A0Column {
        double c, t;
        Point source;
        Field field;
    };
    struct EnvelopeCase {
        double a = 0.0, c = 0.0;
        bool exact = true;
        std::vector<KernelSlice> slices;
        std::vector<GradientSample> gradients;
        std::optional<FitReport> fit;
    };

    HarnessOptions opt_;
    std::mt19937_64 rng_;
    std::vector<A0Column> a0_columns_;
    std::vector<EnvelopeCase> env_cases_;
    bool env_built_ = false;

    static std::string fmt(double v) {
        std::ostringstream s;
        s << std::setprecision(6) << v;
        return s.str();
    }
    void note(const std::string& s) const {
        if (opt_.log) *opt_.log << "    " << s << std::endl;
    }
    double tol(const std::string& name, double fallback) const {
        auto it = opt_.tolerances.find(name);
        return it == opt_.tolerances.end() ? fallback : it->second;
    }
    static CheckResult make(int crit, std::string name, json par, double residual, double tolerance,
                            const std::string& rel = "<=", std::string detail = "") {
        CheckResult r;
        r.criterion = crit;
        r.name = std::move(name);
        r.parameters = std::move(par);
        r.residual = residual;
        r.tolerance = tolerance;
        r.relation = rel;
        r.detail = std::move(detail);
        if (rel == "<=") r.pass = residual <= tolerance;
        else if (rel == ">=") r.pass = residual >= tolerance;
        else if (rel == ">") r.pass = residual > tolerance;
        else r.pass = residual < tolerance;
        if (std::isnan(residual)) r.pass = false;
        return r;
    }

    std::vector<double> exact_cs() const {
        return opt_.probe == ProbeSet::smoke ? std::vector<double>{0.0} : std::vector<double>{-0.5, 0.0, 1.0, 2.0};
    }
    std::vector<double> envelope_cs() const {
        if (opt_.probe == ProbeSet::smoke) return {0.0};
        if (opt_.probe == ProbeSet::full) return {-0.5, 0.0, 1.0, 2.0};
        return {-0.5, 1.0};
    }
    static std::vector<double> times() { return {0.25, 1.0, 4.0}; }

    // sources straddling sqrt t, from the bottom of the probe range to its top
    static std::vector<double> source_heights(double t) {
        const double st = std::sqrt(t);
        return {0.02, 0.1, 0.5 * st, st, 2.0 * st, 8.0};
    }

    static std::vector<Point> exact_probe_points(double t, const Point& z2) {
        const double st = std::sqrt(t);
        std::vector<double> xs, ys;
        for (int i = 0; i <= 40; ++i) xs.push_back(z2.x(0) - 6.0 * st + 12.0 * st * i / 40.0);
        for (double d : {-0.1, -0.05, 0.0, 0.05, 0.1}) xs.push_back(z2.x(0) + d * st);
        for (int i = 0; i <= 40; ++i) ys.push_back(0.02 * std::pow(400.0, i / 40.0));
        for (double d : {-0.1, -0.05, 0.0, 0.05, 0.1}) {
            const double y = z2.y + d * st;
            if (y >= 0.02 && y <= 8.0) ys.push_back(y);
        }
        std::vector<Point> pts;
        for (double x : xs)
            for (double y : ys) pts.push_back(Point::planar(x, y));
        return pts;
    }

    // nodes inside the probe region |x1 - x2| <= 6 sqrt t, y1 in [0.02, 8]
    static KernelSlice region_slice(const Field& f, double t, const Point& z2) {
        KernelSlice s = field_to_slice(f, t, z2, "solver");
        const double st = std::sqrt(t);
        std::vector<KernelSample> keep;
        for (auto& smp : s.samples)
            if (std::abs(smp.z1.x(0) - z2.x(0)) <= 6.0 * st + 1e-12 && smp.z1.y >= 0.02 - 1e-12 && smp.z1.y <= 8.0 + 1e-12)
                keep.push_back(std::move(smp));
        s.samples = std::move(keep);
        return s;
    }

    static std::vector<GradientSample> region_gradients(const Field& f, double t, const Point& z2) {
        std::vector<GradientSample> out;
        const double st = std::sqrt(t);
        for (auto& g : field_gradient_samples(f, t, z2))
            if (std::abs(g.z1.x(0) - z2.x(0)) <= 6.0 * st + 1e-12 && g.z1.y >= 0.02 - 1e-12 && g.z1.y <= 8.0 + 1e-12)
                out.push_back(std::move(g));
        return out;
    }

    // solver grid for the envelope probes at time t: y-centers start at 0.02, x = 0 is a center
    static GridSpec envelope_grid(double t, double c) {
        const double st = std::sqrt(t);
        GridSpec g;
        g.c = c;
        const double hx = t < 0.5 ? 0.05 : 0.1, hy = 0.04;
        g.nx = 2 * static_cast<int>(std::ceil(8.0 * st / hx)) + 1;
        g.Rx = 0.5 * g.nx * hx;
        g.ny = static_cast<int>(std::ceil((8.0 + 4.0 * st) / hy));
        g.Ry = g.ny * hy;
        return g;
    }

    void build_envelope_cases() {
        if (env_built_) return;
        env_built_ = true;
        std::vector<double> solver_as = {0.5};
        if (opt_.probe == ProbeSet::full) solver_as = {0.5, 0.75};
        for (double c : envelope_cs()) {
            EnvelopeCase ex;
            ex.a = 0.0, ex.c = c, ex.exact = true;
            const ModelOperatorSpec m0 = ModelOperatorSpec::planar(0.0, c);
            for (double t : times())
                for (double y2 : source_heights(t)) {
                    const Point z2 = Point::planar(0.0, y2);
                    ex.slices.push_back(exact_slice(m0, t, z2, exact_probe_points(t, z2)));
                }
            env_cases_.push_back(std::move(ex));
            if (opt_.probe == ProbeSet::smoke) continue;
            for (double a : solver_as) {
                EnvelopeCase sc;
                sc.a = a, sc.c = c, sc.exact = false;
                const ModelOperatorSpec m = ModelOperatorSpec::planar(a, c);
                for (double t : times()) {
                    const GridSpec g = envelope_grid(t, c);
                    const DiscreteOperator op = assemble(m, g);
                    for (double y2 : source_heights(t)) {
                        auto [i2, j2] = g.locate(0.0, y2);
                        const Point z2 = Point::planar(g.x(i2), g.y(j2));
                        const KernelColumn col = kernel_column(op, {t}, z2, true);
                        sc.slices.push_back(region_slice(col.fields.front(), t, z2));
                        auto gs = region_gradients(col.fields.front(), t, z2);
                        sc.gradients.insert(sc.gradients.end(), gs.begin(), gs.end());
                    }
                    note("envelope solves a=" + fmt(a) + " c=" + fmt(c) + " t=" + fmt(t) + " grid " + std::to_string(g.nx) +
                         "x" + std::to_string(g.ny));
                }
                env_cases_.push_back(std::move(sc));
            }
        }
    }
};

} // namespace hkb::harness

// Acceptance run: one PASS/FAIL line per criterion, sub-checks indented below it.
// Tolerances live in hkb::harness::Tolerances; nothing here overrides them.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <iostream>

#include "hkb/harness.hpp"

using hkb::harness::CheckResult;
using hkb::harness::Harness;

namespace {

struct Criterion {
    int id;
    const char* title;
    std::vector<CheckResult> (Harness::*run)();
};

} // namespace

int main(int argc, char** argv) {
    hkb::harness::HarnessOptions opt;
    opt.probe = hkb::harness::ProbeSet::desk;
    opt.log = &std::cout;
    if (argc > 1) opt.probe = hkb::harness::parse_probe(argv[1]);
    // Optional criterion ids after the probe name restrict the run (all ten by default).
    std::vector<int> only;
    for (int i = 2; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    Harness h(opt);

    const Criterion crits[] = {
        {1, "closed-form oracle vs solver at a = 0", &Harness::oracle_equivalence},
        {2, "mass conservation", &Harness::conservation},
        {3, "scaling, translation, adjoint, Chapman-Kolmogorov", &Harness::identities},
        {4, "two-sided Gaussian envelope", &Harness::envelope},
        {5, "gradient envelope", &Harness::gradient},
        {6, "near-diagonal lower floor", &Harness::floors},
        {7, "G-function sign and monotonicity", &Harness::g_function},
        {8, "Gaussian Poincare inequality", &Harness::poincare},
        {9, "S^{alpha,beta} boundedness criterion", &Harness::sab},
        {10, "general-to-model reduction round trip", &Harness::reduction},
    };

    int failed = 0;
    for (const auto& c : crits) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<CheckResult> res;
        std::string error;
        try {
            res = (h.*c.run)();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool pass = error.empty() && !res.empty();
        for (const auto& r : res) pass = pass && r.pass;
        failed += !pass;
        std::printf("%s criterion %d: %s (%zu checks, %.1f s)%s%s\n", pass ? "PASS" : "FAIL", c.id, c.title, res.size(), secs,
                    error.empty() ? "" : " error: ", error.c_str());
        for (const auto& r : res)
            std::printf("    [%s] %s: %.6g %s %.6g%s%s\n", r.pass ? "ok" : "FAIL", r.name.c_str(), r.residual,
                        r.relation.c_str(), r.tolerance, r.detail.empty() ? "" : "  ", r.detail.c_str());
        std::fflush(stdout);
    }
    const int ran = only.empty() ? 10 : static_cast<int>(only.size());
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}

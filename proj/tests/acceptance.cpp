// Acceptance gate: one PASS/FAIL line per criterion. A criterion passes when
// its check passes and it finishes inside its time budget.

#include <cstdio>
#include <string>
#include <vector>

#include "plda/kernels.hpp"
#include "plda/validate.hpp"

namespace ck = plda::checks;

namespace {

struct Line {
    int id;
    std::string title;
    std::vector<ck::CheckResult> parts;
    double budget_seconds;  // <= 0 means no budget
    double seconds;         // time attributed to this criterion
};

bool report(const Line& line) {
    bool ok = true;
    for (const auto& p : line.parts) ok = ok && p.passed;
    const bool in_time = line.budget_seconds <= 0.0 || line.seconds < line.budget_seconds;
    const bool pass = ok && in_time;
    std::printf("[%s] %d. %s (%.2f s", pass ? "PASS" : "FAIL", line.id, line.title.c_str(), line.seconds);
    if (line.budget_seconds > 0.0) std::printf(" / budget %.0f s", line.budget_seconds);
    std::printf(")");
    for (const auto& p : line.parts) {
        for (const auto& [k, v] : p.metrics) std::printf(" %s=%.6g", k.c_str(), v);
        if (!p.detail.empty()) std::printf(" [%s: %s]", p.name.c_str(), p.detail.c_str());
    }
    if (!in_time) std::printf(" [over time budget]");
    std::printf("\n");
    std::fflush(stdout);
    return pass;
}

double total(const std::vector<ck::CheckResult>& parts) {
    double s = 0.0;
    for (const auto& p : parts) s += p.seconds;
    return s;
}

Line make(int id, std::string title, std::vector<ck::CheckResult> parts, double budget) {
    const double s = total(parts);
    return {id, std::move(title), std::move(parts), budget, s};
}

}  // namespace

int main() {
    std::printf("kernels: %s\n", std::string(plda::kernels::active_name()).c_str());
    bool all = true;

    all &= report(make(1, "influence exactness on ridge regression (rel err < 1e-4)", {ck::influence()}, 5));
    all &= report(make(2, "cg behavior vs dense solve (rel err < 1e-3)", {ck::cg_consistency()}, 5));
    all &= report(make(3, "expansion reaches +1 for w in 4..=64 within 4w", {ck::reachability()}, 1));
    all &= report(make(4, "per-frequency gradient decay (spearman < -0.8)", {ck::decay()}, 60));
    all &= report(make(5, "reward separation over 5 seeds (AUC > 0.7)", {ck::rewards()}, 120));

    const auto [dyn, imp] = ck::paired_benchmark();
    // Both lines come from one paired pass (ORIG + PLDA per seed), so each
    // carries the full time of that pass.
    all &= report({6, "augmentation dynamics (final AC <= 0.6 x initial, HS up)", {dyn}, 300, dyn.seconds});
    all &= report({7, "PLDA F1 >= ORIG F1, mean paired gain > 0", {imp}, 600, imp.seconds});

    all &= report(make(8, "point adjustment and best F1 match hand oracles exactly", {ck::metrics_exact()}, 0));
    all &= report(make(9, "gradients vs finite differences and toy-MDP policy", {ck::gradients(), ck::toy_mdp()}, 30));

    std::printf("%s\n", all ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED");
    return all ? 0 : 1;
}

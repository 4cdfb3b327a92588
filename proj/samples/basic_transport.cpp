// W2 between two blobs on a planar grid, the dual certificate, and the
// entropy along the geodesic.

#include <cstdio>

#include "mms/curvature.hpp"

using namespace mms;

int main() {
    auto s = euclidean_grid({21, 21}, 0.05);
    std::vector<PointId> left, right;
    for (PointId x = 0; x < s->size(); ++x) {
        double d0 = s->d(x, 5 * 21 + 5), d1 = s->d(x, 15 * 21 + 15);
        if (d0 <= 0.1) left.push_back(x);
        if (d1 <= 0.1) right.push_back(x);
    }
    auto mu = ProbMeasure::uniform(s, left), nu = ProbMeasure::uniform(s, right);

    auto r = w2_solve(mu, nu);
    std::printf("W2 = %.6f  (centers are %.6f apart)\n", r.value, s->d(5 * 21 + 5, 15 * 21 + 15));
    std::printf("duality gap %.2e, support slack %.2e, %zu plan cells\n", r.duality_gap, r.max_support_slack,
                r.plan.entries.size());

    auto cd = cd_convexity_check(mu, nu, 2.0);
    for (std::size_t k = 0; k < cd.N_values.size(); ++k)
        std::printf("N' = %-4g defect %.4f  tol %.4f  %s\n", cd.N_values[k], cd.defects[k], cd.cd_tol,
                    to_string(cd.verdicts[k]));
    return 0;
}

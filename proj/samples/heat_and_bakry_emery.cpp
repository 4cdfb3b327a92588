// Heat kernel on a flat grid, its Gaussian profile, and the gradient
// contraction of the semigroup.

#include <cstdio>

#include "mms/calculus.hpp"

using namespace mms;

int main() {
    auto s = euclidean_grid({31, 31}, 0.05);
    auto G = build_graph(s);
    PointId c = 15 * 31 + 15;

    for (double t : {0.005, 0.01, 0.02}) {
        auto K = heat_kernel(G, c, t);
        // continuum: log rho = -d^2/(4t) + const, so the slope is 1/4
        std::printf("t = %.3f  mass %.12f  fitted decay %.3f (continuum 0.25)\n", t, K.mass, K.fit.slope);
    }

    ScalarField f(s->size());
    for (PointId x = 0; x < s->size(); ++x) f[x] = std::sin(3.0 * s->points()[x][0]) + s->points()[x][1];
    for (auto& row : bakry_emery_check(G, f, {0.01, 0.05}))
        std::printf("Bakry-Emery t = %.2f  violation %.2e  tol %.2e  %s\n", row.t, row.violation, row.tol,
                    row.pass ? "pass" : "fail");

    auto lap = laplacian_measure(G, f);
    std::printf("E(f) = %.6f, sum of lap f = %.2e\n", dirichlet_energy(G, f),
                std::accumulate(lap.masses.begin(), lap.masses.end(), 0.0));
    return 0;
}

// The splitting pipeline step by step on a product strip and on the
// l-infinity strip of the same shape.

#include <cstdio>

#include "mms/splitting.hpp"

using namespace mms;

namespace {

void run(const char* name, const SpacePtr& s) {
    auto L = default_line(*s);
    auto B = busemann_field(*s, L);
    std::printf("%s: %zu points, line of %zu points\n", name, s->size(), L.ids.size());
    std::printf("  busemann: max |b+ + b-| %.2e, ends %s/%s\n", B.max_abs_gap, to_string(B.plus_mode),
                to_string(B.minus_mode));

    auto F = gradient_flow_map(*s, B.b(), L.step, default_flow_tol(L.step));
    std::printf("  flow by one step: %zu unreachable, interior slack %.2e\n", F.unreachable_count,
                F.max_interior_slack);

    auto Q = quotient_split(s, B);
    std::printf("  quotient: %zu representatives, metric %s\n", Q.reps.size(),
                Q.dprime_validation.ok() ? "valid" : "invalid");

    auto P = pythagoras_check(Q, L.t_max - L.t_min);
    std::printf("  pythagoras: max defect %.3f over %zu pairs, bi-Lipschitz ratio in [%.3f, %.3f]\n", P.max_defect,
                P.pairs, P.bilip_min, P.bilip_max);
}

}  // namespace

int main() {
    run("segment x R", product(GeneratorSpec{EuclideanGridSpec{{11}, 0.1}}, -5.0, 5.0, 0.1));
    run("l-infinity strip", normed_plane(inf, 10.0, 0.1, 1.0));
    return 0;
}

#include <gtest/gtest.h>

#include "mms/splitting.hpp"

using namespace mms;

namespace {

SpacePtr strip() { return product(GeneratorSpec{EuclideanGridSpec{{11}, 0.1}}, -5.0, 5.0, 0.1); }

double coord(const MetricMeasureSpace& s, PointId x, std::size_t a) { return s.points()[x][a]; }

}  // namespace

TEST(Line, DefaultLineOfTheProduct) {
    auto s = strip();
    auto L = default_line(*s);
    EXPECT_EQ(L.ids.size(), 101u);
    EXPECT_NEAR(L.step, 0.1, 1e-12);
    EXPECT_LE(L.max_defect, 1e-9);
}

TEST(Line, NonIsometricCurveRejected) {
    auto s = euclidean_grid({5, 5}, 0.1);
    // an L-shaped path is not a line
    EXPECT_THROW(make_line(*s, {0, 1, 2, 7, 12}, {0.0, 0.1, 0.2, 0.3, 0.4}), Error);
}

TEST(Busemann, ProductGivesTheLineCoordinate) {
    auto s = strip();
    auto B = busemann_field(*s, default_line(*s));
    EXPECT_LE(B.max_abs_gap, 1e-9);
    EXPECT_LE(B.lipschitz_excess, 1e-9);
    for (PointId x = 0; x < s->size(); ++x) EXPECT_NEAR(B.b()[x], coord(*s, x, 1), 1e-9);
}

TEST(Busemann, TruncatedEndsOnASharpCone) {
    // opening above pi: the far end cannot be extrapolated and b+ + b- < 0
    auto s = cone(4.0, 1.0, 0.1);
    auto B = busemann_field(*s, default_line(*s));
    EXPECT_GT(B.max_abs_gap, 0.1);
}

TEST(Flow, StraightTranslationOnTheProduct) {
    auto s = strip();
    auto B = busemann_field(*s, default_line(*s));
    auto F = gradient_flow_map(*s, B.b(), 0.3, default_flow_tol(0.1));
    for (PointId x = 0; x < s->size(); ++x) {
        if (F.unreachable[x]) {
            EXPECT_LT(coord(*s, x, 1), -5.0 + 0.3 + 1e-9);
            continue;
        }
        PointId y = F.target[x];
        EXPECT_NEAR(coord(*s, y, 0), coord(*s, x, 0), 1e-12);
        EXPECT_NEAR(coord(*s, y, 1), coord(*s, x, 1) - 0.3, 1e-9);
    }
    EXPECT_LE(F.max_interior_slack, 1e-9);
}

TEST(Flow, DiagnosticsOnTheProduct) {
    auto s = strip();
    auto B = busemann_field(*s, default_line(*s));
    auto G = build_graph(s);
    auto D = flow_diagnostics(G, B, 0.5, {0.1, 0.2}, default_flow_tol(0.1));
    EXPECT_LE(D.group_law, 0.1);
    EXPECT_LE(D.pushforward, 0.1);
    EXPECT_LE(D.energy, 0.1);
    // pushforward and energy pass, so isometry must pass as well
    EXPECT_LE(D.isometry, 0.1);
}

TEST(Quotient, RecoversTheSegment) {
    auto s = strip();
    auto B = busemann_field(*s, default_line(*s));
    auto Q = quotient_split(s, B);
    ASSERT_EQ(Q.reps.size(), 11u);
    EXPECT_TRUE(Q.dprime_validation.ok());
    std::vector<double> xs;
    for (PointId r : Q.reps) xs.push_back(coord(*s, r, 0));
    for (std::size_t a = 0; a < 11; ++a) {
        EXPECT_NEAR(Q.mprime[a], 0.1, 0.1 * 0.1 + 1e-12);
        for (std::size_t b = 0; b < 11; ++b) EXPECT_NEAR(Q.dprime(a, b), std::fabs(xs[a] - xs[b]), 0.1);
    }
    EXPECT_LE(Q.smap_tmap_defect, 1.0);
}

TEST(Quotient, SingleFiber) {
    // the real line itself: X' is a point
    auto s = euclidean_grid({41}, 0.1);
    auto B = busemann_field(*s, default_line(*s));
    auto Q = quotient_split(s, B);
    ASSERT_EQ(Q.reps.size(), 1u);
    EXPECT_EQ(Q.dprime(0, 0), 0.0);
}

TEST(Pythagoras, ExactOnTheProduct) {
    auto s = strip();
    auto B = busemann_field(*s, default_line(*s));
    auto Q = quotient_split(s, B);
    auto P = pythagoras_check(Q, 10.0);
    EXPECT_LE(P.max_defect, 0.05);
    EXPECT_TRUE(P.bilip_ok);
    EXPECT_LE(P.embedding_defect, 0.1);
    EXPECT_GT(P.pairs, 1000u);
}

TEST(Pythagoras, FailsOnTheLInfinityStrip) {
    auto s = normed_plane(inf, 10.0, 0.1, 1.0);
    auto B = busemann_field(*s, default_line(*s));
    auto Q = quotient_split(s, B);
    auto P = pythagoras_check(Q, 10.0);
    EXPECT_GE(P.max_defect, 0.2);
    EXPECT_TRUE(P.bilip_ok);
    EXPECT_GE(P.bilip_min, 1.0 / std::sqrt(2.0) - 1e-9);
    EXPECT_LE(P.bilip_max, std::sqrt(2.0) + 1e-9);
}

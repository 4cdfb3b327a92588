#include <gtest/gtest.h>

#include "mms/curvature.hpp"

using namespace mms;

namespace {

std::vector<PointId> range_ids(PointId a, PointId b) {
    std::vector<PointId> v;
    for (PointId i = a; i <= b; ++i) v.push_back(i);
    return v;
}

SpacePtr deficient_midpoint() {
    SquareMatrix D(3);
    D(0, 1) = D(1, 0) = 0.5;
    D(1, 2) = D(2, 1) = 0.5;
    D(0, 2) = D(2, 0) = 1.0;
    return std::make_shared<MetricMeasureSpace>(D, std::vector<double>{1.0, 1e-3, 1.0});
}

}  // namespace

TEST(Entropy, ValuesOnADirac) {
    auto s = deficient_midpoint();
    auto d = ProbMeasure::dirac(s, 1);
    // rho = 1/w on one point
    EXPECT_NEAR(entropy(d, 2.0), -std::sqrt(1e-3), 1e-15);
    EXPECT_NEAR(entropy(d, 1.0), -1e-3, 1e-15);
    EXPECT_NEAR(entropy(d, inf), std::log(1e3), 1e-12);
}

TEST(Entropy, UniformMinimisesTheBoltzmannEntropy) {
    auto s = euclidean_grid({10}, 0.1);
    auto all = ProbMeasure::uniform(s, range_ids(0, 9)), part = ProbMeasure::uniform(s, range_ids(0, 4));
    EXPECT_LT(entropy(all, inf), entropy(part, inf));
    EXPECT_LT(entropy(all, 3.0), entropy(part, 3.0));
}

TEST(CdConvexity, OneDimensionalGridPasses) {
    auto s = euclidean_grid({41}, 0.025);
    auto mu0 = ProbMeasure::uniform(s, range_ids(0, 10)), mu1 = ProbMeasure::uniform(s, range_ids(30, 40));
    CdOptions opt;
    opt.N_values = {1.0, 2.0, inf};
    auto r = cd_convexity_check(mu0, mu1, 1.0, opt);
    ASSERT_EQ(r.defects.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_LE(r.defects[k], 0.05);
        EXPECT_EQ(r.verdicts[k], Verdict::pass);
    }
}

TEST(CdConvexity, DeficientMidpointFails) {
    auto s = deficient_midpoint();
    CdOptions opt;
    opt.N_values = {2.0};
    auto r = cd_convexity_check(ProbMeasure::dirac(s, 0), ProbMeasure::dirac(s, 2), 2.0, opt);
    EXPECT_GT(r.defects[0], 0.5);
    EXPECT_EQ(r.verdicts[0], Verdict::fail);
}

TEST(CdConvexity, EqualMeasuresGiveAFlatCurve) {
    auto s = euclidean_grid({5, 5}, 0.25);
    auto mu = ProbMeasure::uniform(s, {0, 1, 6});
    auto r = cd_convexity_check(mu, mu, 2.0);
    for (double d : r.defects) EXPECT_EQ(d, 0.0);
}

TEST(CdConvexity, DefaultNPrimeSet) {
    auto s = euclidean_grid({9}, 0.125);
    auto r = cd_convexity_check(ProbMeasure::dirac(s, 0), ProbMeasure::dirac(s, 8), 3.0);
    ASSERT_EQ(r.N_values.size(), 3u);
    EXPECT_EQ(r.N_values[0], 3.0);
    EXPECT_EQ(r.N_values[1], 6.0);
    EXPECT_TRUE(std::isinf(r.N_values[2]));
}

#include <gtest/gtest.h>

#include "mms/transport.hpp"
#include "oracles.hpp"

using namespace mms;

namespace {

ProbMeasure random_measure(const SpacePtr& s, std::mt19937_64& rng, std::size_t atoms) {
    std::vector<PointId> ids(s->size());
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::uniform_real_distribution<double> U(0.1, 1.0);
    std::vector<double> m(s->size(), 0.0);
    for (std::size_t k = 0; k < std::min(atoms, ids.size()); ++k) m[ids[k]] = U(rng);
    return ProbMeasure::from_masses(s, m);
}

double oracle_cost(const ProbMeasure& mu, const ProbMeasure& nu) {
    auto a = mu.support(), b = nu.support();
    std::vector<std::vector<double>> c(a.size(), std::vector<double>(b.size()));
    std::vector<double> ma, mb;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i][j] = std::pow(mu.space()->d(a[i], b[j]), 2);
    for (auto i : a) ma.push_back(mu.mass(i));
    for (auto j : b) mb.push_back(nu.mass(j));
    return oracle::brute_force_cost(c, ma, mb);
}

}  // namespace

TEST(Transport, MatchesVertexEnumeration) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        auto s = oracle::random_metric_space(2 + trial % 5, rng);
        auto mu = random_measure(s, rng, 4), nu = random_measure(s, rng, 4);
        auto r = w2_solve(mu, nu);
        EXPECT_NEAR(r.cost, oracle_cost(mu, nu), 1e-9) << "trial " << trial;
        EXPECT_LE(std::fabs(r.duality_gap), 1e-9);
        EXPECT_LE(r.max_support_slack, 1e-9);
    }
}

TEST(Transport, DiracsGiveTheDistance) {
    auto s = euclidean_grid({5, 5}, 0.25);
    auto r = w2_solve(ProbMeasure::dirac(s, 0), ProbMeasure::dirac(s, 24));
    EXPECT_NEAR(r.value, s->d(0, 24), 1e-15);
    ASSERT_EQ(r.plan.entries.size(), 1u);
}

TEST(Transport, IdenticalMeasuresCostNothing) {
    std::mt19937_64 rng(3);
    auto s = oracle::random_metric_space(6, rng);
    auto mu = random_measure(s, rng, 6);
    auto r = w2_solve(mu, mu);
    EXPECT_EQ(r.cost, 0.0);
    EXPECT_EQ(r.duality_gap, 0.0);
}

TEST(Transport, MarginalsOfThePlan) {
    std::mt19937_64 rng(11);
    auto s = oracle::random_metric_space(6, rng);
    auto mu = random_measure(s, rng, 6), nu = random_measure(s, rng, 5);
    auto r = w2_solve(mu, nu);
    auto rows = r.plan.row_sums(), cols = r.plan.col_sums();
    for (PointId x = 0; x < 6; ++x) {
        EXPECT_NEAR(rows[x], mu.mass(x), 1e-12);
        EXPECT_NEAR(cols[x], nu.mass(x), 1e-12);
    }
}

TEST(Transport, DifferentSpacesRejected) {
    auto a = euclidean_grid({3}, 1.0), b = euclidean_grid({3}, 0.5);
    EXPECT_THROW(w2_solve(ProbMeasure::dirac(a, 0), ProbMeasure::dirac(b, 1)), Error);
}

TEST(Transport, DensityMustIntegrateToOne) {
    auto s = euclidean_grid({3}, 1.0);
    EXPECT_THROW(ProbMeasure::from_density(s, {1.0, 1.0, 1.0}), Error);
    EXPECT_THROW(ProbMeasure::from_masses(s, {0.0, 0.0, 0.0}), Error);
}

TEST(Transport, CTransformIsIdempotentAfterTwoSteps) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto s = oracle::random_metric_space(8, rng);
        std::vector<double> phi(8);
        for (auto& v : phi) v = U(rng);
        auto c1 = c_transform(*s, phi);
        auto c3 = c_transform(*s, c_transform(*s, c1));
        for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(c3[i], c1[i], 1e-12);
    }
}

TEST(Transport, CConcavityOfATransform) {
    std::mt19937_64 rng(9);
    auto s = oracle::random_metric_space(7, rng);
    std::vector<double> psi{0.3, -0.2, 0.5, 0.0, 0.1, -0.4, 0.2};
    auto phi = c_transform(*s, psi);
    EXPECT_TRUE(c_concavity_check(*s, phi, 1e-12).c_concave);
}

TEST(Transport, InterpolationEndpointsAreExact) {
    auto s = euclidean_grid({21}, 0.05);
    auto mu = ProbMeasure::uniform(s, {0, 1, 2}), nu = ProbMeasure::uniform(s, {15, 16, 17});
    auto r = w2_solve(mu, nu);
    auto i0 = displacement_interpolation(r.plan, mu, nu, 0.0), i1 = displacement_interpolation(r.plan, mu, nu, 1.0);
    auto half = displacement_interpolation(r.plan, mu, nu, 0.5);
    for (PointId x = 0; x < s->size(); ++x) {
        EXPECT_EQ(i0.measure.mass(x), mu.mass(x));
        EXPECT_EQ(i1.measure.mass(x), nu.mass(x));
    }
    // translation by 15 cells: midpoint shifted by 7.5, snapped within a cell
    double mean = 0.0;
    for (PointId x = 0; x < s->size(); ++x) mean += half.measure.mass(x) * static_cast<double>(x);
    EXPECT_NEAR(mean, 1.0 + 7.5, 0.5);
}

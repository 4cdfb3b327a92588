#pragma once

// Test-side reference computations. They share nothing with the library
// beyond the space container.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "mms/space.hpp"

namespace oracle {

// Minimum transport cost sum c_ij pi_ij by enumerating every vertex of the
// transportation polytope: each (m+n-1)-subset of cells with a unique
// nonnegative solution of the marginal equations.
inline double brute_force_cost(const std::vector<std::vector<double>>& c, const std::vector<double>& a,
                               const std::vector<double>& b) {
    const int m = static_cast<int>(a.size()), n = static_cast<int>(b.size());
    const int cells = m * n, k = m + n - 1;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(k);
    for (int i = 0; i < k; ++i) pick[i] = i;
    Eigen::VectorXd rhs(m + n);
    for (int i = 0; i < m; ++i) rhs[i] = a[i];
    for (int j = 0; j < n; ++j) rhs[m + j] = b[j];
    while (true) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + n, k);
        for (int q = 0; q < k; ++q) {
            A(pick[q] / n, q) = 1.0;
            A(m + pick[q] % n, q) = 1.0;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (lu.rank() == k) {
            Eigen::VectorXd x = lu.solve(rhs);
            if ((A * x - rhs).cwiseAbs().maxCoeff() < 1e-12 && x.minCoeff() > -1e-13) {
                double cost = 0.0;
                for (int q = 0; q < k; ++q) cost += c[pick[q] / n][pick[q] % n] * x[q];
                best = std::min(best, cost);
            }
        }
        int i = k - 1;
        while (i >= 0 && pick[i] == cells - k + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
    return best;
}

// exp(A) by scaling and squaring of a truncated Taylor series.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
    double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
    int s = 0;
    while (norm > 0.5) {
        norm /= 2.0;
        ++s;
    }
    Eigen::MatrixXd B = A / std::pow(2.0, s);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(A.rows(), A.cols()), sum = term;
    for (int k = 1; k <= 30; ++k) {
        term = term * B / static_cast<double>(k);
        sum += term;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

// Random finite metric: shortest paths of a random complete weighted graph.
inline mms::SpacePtr random_metric_space(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.2, 2.0);
    mms::SquareMatrix D(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) D(i, j) = D(j, i) = U(rng);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) D(i, j) = std::min(D(i, j), D(i, k) + D(k, j));
    std::vector<double> w(n);
    for (auto& v : w) v = U(rng);
    return std::make_shared<mms::MetricMeasureSpace>(std::move(D), std::move(w));
}

}  // namespace oracle

#pragma once

#include "mms/transport.hpp"

namespace mms {

// U_N(mu) = -sum rho^(1-1/N) w,  U_1 = -m(rho > 0),  U_inf = sum rho log rho w.
// Singular parts cannot occur on a finite space with positive weights.
inline double entropy(const ProbMeasure& mu, double N) {
    if (!(N >= 1.0)) throw Error("dimension N must be at least 1");
    const auto& S = *mu.space();
    double u = 0.0;
    if (std::isinf(N)) {
        for (PointId x = 0; x < S.size(); ++x) {
            double r = mu.density(x);
            if (r > 0.0) u += r * std::log(r) * S.weight(x);
        }
    } else if (N == 1.0) {
        for (PointId x = 0; x < S.size(); ++x)
            if (mu.density(x) > 0.0) u -= S.weight(x);
    } else {
        double e = 1.0 - 1.0 / N;
        for (PointId x = 0; x < S.size(); ++x) {
            double r = mu.density(x);
            if (r > 0.0) u -= std::pow(r, e) * S.weight(x);
        }
    }
    return u;
}

struct EntropyReport {
    std::vector<double> N_values;
    std::vector<double> t_grid;                  // snapped times
    std::vector<std::vector<double>> values;     // values[n][t]
    std::vector<double> defects;                 // max_t U(mu_t) - (1-t)U(mu0) - tU(mu1)
    std::vector<Verdict> verdicts;
    double cd_tol = 0.0;
    double w2 = 0.0;
    bool degenerate = false;
    bool over_tolerance = false;
    double worst_geodesic_error = 0.0;
};

struct CdOptions {
    std::vector<double> N_values;  // empty: every N' in {N, 2N, inf}
    std::vector<double> t_grid;    // empty: 0, 1/16, ..., 1
    std::size_t steps = 64;
    std::optional<double> cd_tol;  // default max(3 h diam(supp), 1e-9)
};

inline double default_cd_tol(const ProbMeasure& mu0, const ProbMeasure& mu1, double factor = 3.0) {
    const auto& S = *mu0.space();
    auto ids = mu0.support();
    auto s1 = mu1.support();
    ids.insert(ids.end(), s1.begin(), s1.end());
    return std::max(factor * S.spacing() * S.diameter_of(ids), 1e-9);
}

inline EntropyReport cd_convexity_check(const ProbMeasure& mu0, const ProbMeasure& mu1, double N,
                                        CdOptions opt = {}) {
    if (!same_space(mu0.space(), mu1.space())) throw Error("measures live on different spaces");
    if (!(N >= 1.0)) throw Error("dimension N must be at least 1");
    EntropyReport rep;
    rep.N_values = opt.N_values.empty() ? std::vector<double>{N, 2.0 * N, inf} : opt.N_values;
    for (double n : rep.N_values)
        if (n < N) throw Error("entropy exponents must satisfy N' >= N");
    if (opt.t_grid.empty())
        for (int k = 0; k <= 16; ++k) opt.t_grid.push_back(k / 16.0);
    rep.cd_tol = opt.cd_tol ? *opt.cd_tol : default_cd_tol(mu0, mu1);

    std::vector<ProbMeasure> path;
    if (mu0.density() == mu1.density()) {
        // constant curve
        for (double t : opt.t_grid) {
            rep.t_grid.push_back(t);
            path.push_back(mu0);
        }
    } else {
        auto w = w2_solve(mu0, mu1);
        rep.w2 = w.value;
        rep.degenerate = w.degenerate;
        for (double t : opt.t_grid) {
            auto in = displacement_interpolation(w.plan, mu0, mu1, t, opt.steps);
            rep.t_grid.push_back(in.t);
            rep.over_tolerance = rep.over_tolerance || in.over_tolerance;
            rep.worst_geodesic_error = std::max(rep.worst_geodesic_error, in.worst_error);
            path.push_back(std::move(in.measure));
        }
    }
    for (double n : rep.N_values) {
        double u0 = entropy(mu0, n), u1 = entropy(mu1, n);
        std::vector<double> vals;
        double defect = 0.0;
        for (std::size_t k = 0; k < path.size(); ++k) {
            double t = rep.t_grid[k];
            double u = entropy(path[k], n);
            vals.push_back(u);
            defect = std::max(defect, u - (u0 + t * (u1 - u0)));
        }
        rep.values.push_back(std::move(vals));
        rep.defects.push_back(defect);
        Verdict v = defect <= rep.cd_tol ? Verdict::pass : Verdict::fail;
        if (v == Verdict::pass && rep.over_tolerance) v = Verdict::inconclusive;
        rep.verdicts.push_back(v);
    }
    return rep;
}

}  // namespace mms

#pragma once

#include <deque>
#include <map>
#include <numeric>
#include <tuple>

#include "mms/space.hpp"

namespace mms {

class ProbMeasure {
public:
    ProbMeasure() = default;

    // Density w.r.t. the reference measure. Total mass must be 1 within 1e-12.
    static ProbMeasure from_density(SpacePtr space, std::vector<double> density) {
        check_shape(space, density.size());
        double mass = 0.0;
        for (std::size_t i = 0; i < density.size(); ++i) {
            if (!(density[i] >= 0.0) || !std::isfinite(density[i])) throw Error("density must be finite and nonnegative");
            mass += density[i] * space->weight(i);
        }
        if (std::fabs(mass - 1.0) > 1e-12) throw Error("density does not integrate to 1");
        return ProbMeasure(std::move(space), std::move(density));
    }

    // Point masses, normalised to total mass 1.
    static ProbMeasure from_masses(SpacePtr space, const std::vector<double>& masses) {
        check_shape(space, masses.size());
        double total = 0.0;
        for (double m : masses) {
            if (!(m >= 0.0) || !std::isfinite(m)) throw Error("masses must be finite and nonnegative");
            total += m;
        }
        if (!(total > 0.0)) throw Error("measure has zero mass");
        std::vector<double> rho(masses.size());
        for (std::size_t i = 0; i < masses.size(); ++i) rho[i] = masses[i] / total / space->weight(i);
        return ProbMeasure(std::move(space), std::move(rho));
    }

    static ProbMeasure dirac(SpacePtr space, PointId x) {
        if (!space || x >= space->size()) throw Error("dirac point out of range");
        std::vector<double> rho(space->size(), 0.0);
        rho[x] = 1.0 / space->weight(x);
        return ProbMeasure(std::move(space), std::move(rho));
    }

    // Normalised restriction of the reference measure to `ids`.
    static ProbMeasure uniform(SpacePtr space, const std::vector<PointId>& ids) {
        if (!space || ids.empty()) throw Error("uniform measure needs a nonempty set");
        double m = 0.0;
        std::vector<char> in(space->size(), 0);
        for (PointId x : ids) {
            if (x >= space->size()) throw Error("uniform measure point out of range");
            if (!in[x]) m += space->weight(x);
            in[x] = 1;
        }
        std::vector<double> rho(space->size(), 0.0);
        for (PointId x = 0; x < space->size(); ++x)
            if (in[x]) rho[x] = 1.0 / m;
        return ProbMeasure(std::move(space), std::move(rho));
    }

    const SpacePtr& space() const { return space_; }
    const std::vector<double>& density() const { return density_; }
    double density(PointId i) const { return density_[i]; }
    double mass(PointId i) const { return density_[i] * space_->weight(i); }
    std::size_t size() const { return density_.size(); }

    std::vector<PointId> support() const {
        std::vector<PointId> s;
        for (PointId i = 0; i < density_.size(); ++i)
            if (density_[i] > 0.0) s.push_back(i);
        return s;
    }

private:
    ProbMeasure(SpacePtr s, std::vector<double> rho) : space_(std::move(s)), density_(std::move(rho)) {}

    static void check_shape(const SpacePtr& space, std::size_t n) {
        if (!space) throw Error("measure without a space");
        if (n != space->size()) throw Error("density length differs from space size");
    }

    SpacePtr space_;
    std::vector<double> density_;
};

struct CouplingEntry {
    PointId i, j;
    double mass;
};

// Sparse representation of an n x n transport plan.
struct Coupling {
    SpacePtr space;
    std::vector<CouplingEntry> entries;  // sorted by (i, j), positive masses only
    double cost = 0.0;                   // sum of d^2 * mass

    double mass(PointId i, PointId j) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{i, j},
                                   [](const CouplingEntry& e, const std::pair<PointId, PointId>& k) {
                                       return std::pair{e.i, e.j} < k;
                                   });
        return (it != entries.end() && it->i == i && it->j == j) ? it->mass : 0.0;
    }

    std::vector<double> row_sums() const {
        std::vector<double> r(space->size(), 0.0);
        for (auto& e : entries) r[e.i] += e.mass;
        return r;
    }

    std::vector<double> col_sums() const {
        std::vector<double> c(space->size(), 0.0);
        for (auto& e : entries) c[e.j] += e.mass;
        return c;
    }

    SquareMatrix to_dense() const {
        SquareMatrix m(space->size());
        for (auto& e : entries) m(e.i, e.j) = e.mass;
        return m;
    }
};

// Kantorovich pair for the cost d^2/2, gauged so that min phi = 0.
struct Potential {
    SpacePtr space;
    std::vector<double> phi;
    std::vector<double> phic;

    double slack(PointId x, PointId y) const {
        double d = space->d(x, y);
        return 0.5 * d * d - phi[x] - phic[y];
    }

    SquareMatrix slack_matrix() const {
        SquareMatrix s(space->size());
        for (PointId x = 0; x < space->size(); ++x)
            for (PointId y = 0; y < space->size(); ++y) s(x, y) = slack(x, y);
        return s;
    }
};

// phi^c(y) = min_x d(x,y)^2/2 - phi(x)
inline std::vector<double> c_transform(const MetricMeasureSpace& s, const std::vector<double>& phi) {
    if (phi.size() != s.size()) throw Error("potential length differs from space size");
    for (double v : phi)
        if (!std::isfinite(v)) throw Error("potential must be finite");
    std::vector<double> out(s.size());
    parallel_for(s.size(), [&](std::size_t y) {
        double best = inf;
        for (PointId x = 0; x < s.size(); ++x) {
            double d = s.d(x, y);
            best = std::min(best, 0.5 * d * d - phi[x]);
        }
        out[y] = best;
    });
    return out;
}

struct CConcavityReport {
    bool c_concave = false;
    double max_defect = 0.0;  // max |phi^cc - phi|
    std::vector<double> phic;
    std::vector<std::pair<PointId, PointId>> superdifferential;  // zero-slack pairs
};

inline CConcavityReport c_concavity_check(const MetricMeasureSpace& s, const std::vector<double>& phi,
                                          double tol = 1e-9) {
    CConcavityReport r;
    r.phic = c_transform(s, phi);
    auto phicc = c_transform(s, r.phic);
    for (std::size_t i = 0; i < phi.size(); ++i) r.max_defect = std::max(r.max_defect, std::fabs(phicc[i] - phi[i]));
    r.c_concave = r.max_defect <= tol;
    for (PointId x = 0; x < s.size(); ++x)
        for (PointId y = 0; y < s.size(); ++y) {
            double d = s.d(x, y);
            if (0.5 * d * d - phi[x] - r.phic[y] <= tol) r.superdifferential.emplace_back(x, y);
        }
    return r;
}

// ---------------------------------------------------------------- simplex

namespace detail {

// Transportation simplex over an m x n cost block. The basis is a spanning
// tree of the bipartite source/sink graph with m+n-1 cells.
class TransportSimplex {
public:
    TransportSimplex(std::vector<double> supply, std::vector<double> demand, std::vector<double> cost)
        : m_(supply.size()), n_(demand.size()), a_(std::move(supply)), b_(std::move(demand)), c_(std::move(cost)),
          flow_(m_ * n_, 0.0), basic_(m_ * n_, 0), row_adj_(m_), col_adj_(n_) {
        if (m_ == 0 || n_ == 0) throw Error("empty marginal");
        double cmax = 0.0;
        for (double v : c_) cmax = std::max(cmax, std::fabs(v));
        eps_ = 1e-12 * (1.0 + cmax);
    }

    std::size_t iterations = 0;
    std::vector<double> u, v;

    void solve() {
        northwest_corner();
        std::size_t degenerate_run = 0;
        bool bland = false;
        const std::size_t cap = 200 * (m_ + n_) * (m_ + n_) + 10000;
        for (;;) {
            potentials();
            std::size_t enter = npos;
            double best = -eps_;
            for (std::size_t i = 0; i < m_ && !(bland && enter != npos); ++i)
                for (std::size_t j = 0; j < n_; ++j) {
                    std::size_t cell = i * n_ + j;
                    if (basic_[cell]) continue;
                    double r = c_[cell] - u[i] - v[j];
                    if (r < best) {
                        best = r;
                        enter = cell;
                        if (bland) break;
                    }
                }
            if (enter == npos) return;
            if (++iterations > cap) throw Error("transport simplex did not converge");
            auto cyc = cycle(enter);
            double theta = inf;
            std::size_t leave = npos;
            for (std::size_t k = 1; k < cyc.size(); k += 2) {
                double f = flow_[cyc[k]];
                if (f < theta || (f == theta && bland && cyc[k] < leave)) {
                    theta = f;
                    leave = cyc[k];
                }
            }
            if (theta <= 0.0) {
                theta = 0.0;
                if (++degenerate_run > 2 * (m_ + n_)) bland = true;
            } else {
                degenerate_run = 0;
                bland = false;
            }
            for (std::size_t k = 0; k < cyc.size(); ++k) flow_[cyc[k]] += (k % 2 == 0) ? theta : -theta;
            flow_[leave] = 0.0;
            remove_basic(leave);
            add_basic(enter);
        }
    }

    double flow(std::size_t i, std::size_t j) const { return std::max(0.0, flow_[i * n_ + j]); }
    bool is_basic(std::size_t i, std::size_t j) const { return basic_[i * n_ + j] != 0; }
    double reduced_cost(std::size_t i, std::size_t j) const { return c_[i * n_ + j] - u[i] - v[j]; }

    // A zero reduced-cost non-basic cell whose cycle admits positive flow
    // yields a second optimal vertex.
    bool has_alternative_optimum(double tol) {
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < n_; ++j) {
                std::size_t cell = i * n_ + j;
                if (basic_[cell] || std::fabs(c_[cell] - u[i] - v[j]) > tol) continue;
                auto cyc = cycle(cell);
                double theta = inf;
                for (std::size_t k = 1; k < cyc.size(); k += 2) theta = std::min(theta, flow_[cyc[k]]);
                if (theta > 1e-12) return true;
            }
        return false;
    }

private:
    void add_basic(std::size_t cell) {
        basic_[cell] = 1;
        row_adj_[cell / n_].push_back(cell % n_);
        col_adj_[cell % n_].push_back(cell / n_);
    }

    void remove_basic(std::size_t cell) {
        basic_[cell] = 0;
        auto& r = row_adj_[cell / n_];
        r.erase(std::find(r.begin(), r.end(), cell % n_));
        auto& c = col_adj_[cell % n_];
        c.erase(std::find(c.begin(), c.end(), cell / n_));
    }

    void northwest_corner() {
        std::vector<double> ra = a_, rb = b_;
        std::size_t i = 0, j = 0;
        while (true) {
            double q = std::min(ra[i], rb[j]);
            flow_[i * n_ + j] = q;
            add_basic(i * n_ + j);
            ra[i] -= q;
            rb[j] -= q;
            if (i == m_ - 1 && j == n_ - 1) break;
            if (i == m_ - 1) ++j;
            else if (j == n_ - 1) ++i;
            else if (ra[i] <= rb[j]) ++i;
            else ++j;
        }
    }

    // Node ids: sources 0..m-1, sinks m..m+n-1.
    void potentials() {
        u.assign(m_, 0.0);
        v.assign(n_, 0.0);
        std::vector<char> seen(m_ + n_, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            std::size_t node = stack.back();
            stack.pop_back();
            if (node < m_) {
                for (std::size_t j : row_adj_[node])
                    if (!seen[m_ + j]) {
                        v[j] = c_[node * n_ + j] - u[node];
                        seen[m_ + j] = 1;
                        stack.push_back(m_ + j);
                    }
            } else {
                std::size_t j = node - m_;
                for (std::size_t i : col_adj_[j])
                    if (!seen[i]) {
                        u[i] = c_[i * n_ + j] - v[j];
                        seen[i] = 1;
                        stack.push_back(i);
                    }
            }
        }
    }

    // Cells of the pivot cycle, entering cell first, signs alternating +,-.
    std::vector<std::size_t> cycle(std::size_t enter) {
        std::size_t si = enter / n_, tj = enter % n_;
        std::vector<std::size_t> parent(m_ + n_, npos);
        std::deque<std::size_t> q{si};
        parent[si] = si;
        while (!q.empty()) {
            std::size_t node = q.front();
            q.pop_front();
            if (node == m_ + tj) break;
            if (node < m_) {
                for (std::size_t j : row_adj_[node])
                    if (parent[m_ + j] == npos) {
                        parent[m_ + j] = node;
                        q.push_back(m_ + j);
                    }
            } else {
                for (std::size_t i : col_adj_[node - m_])
                    if (parent[i] == npos) {
                        parent[i] = node;
                        q.push_back(i);
                    }
            }
        }
        if (parent[m_ + tj] == npos) throw Error("transport basis is not a spanning tree");
        // walk back from the sink: edges alternate -, +, -, ...
        std::vector<std::size_t> cells{enter};
        std::size_t node = m_ + tj;
        while (node != si) {
            std::size_t p = parent[node];
            std::size_t i = node < m_ ? node : p;
            std::size_t j = node < m_ ? p - m_ : node - m_;
            cells.push_back(i * n_ + j);
            node = p;
        }
        return cells;
    }

    std::size_t m_, n_;
    std::vector<double> a_, b_, c_;
    std::vector<double> flow_;
    std::vector<char> basic_;
    std::vector<std::vector<std::size_t>> row_adj_, col_adj_;
    double eps_;
};

}  // namespace detail

struct W2Result {
    double value = 0.0;   // W2
    double cost = 0.0;    // W2^2
    Coupling plan;
    Potential potential;
    double duality_gap = 0.0;      // sum phi dmu + sum phi^c dnu - cost/2
    double max_support_slack = 0.0;
    bool degenerate = false;       // a second optimal vertex exists
    std::size_t iterations = 0;
};

inline W2Result w2_solve(const ProbMeasure& mu, const ProbMeasure& nu) {
    if (!same_space(mu.space(), nu.space())) throw Error("measures live on different spaces");
    const auto& S = *mu.space();
    W2Result res;
    res.plan.space = mu.space();

    if (mu.density() == nu.density()) {
        for (PointId x = 0; x < S.size(); ++x)
            if (mu.density(x) > 0.0) res.plan.entries.push_back({x, x, mu.mass(x)});
        res.potential = {mu.space(), std::vector<double>(S.size(), 0.0), std::vector<double>(S.size(), 0.0)};
        return res;
    }

    auto src = mu.support(), dst = nu.support();
    std::size_t m = src.size(), n = dst.size();
    std::vector<double> a(m), b(n), c(m * n);
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < m; ++i) sa += (a[i] = mu.mass(src[i]));
    for (std::size_t j = 0; j < n; ++j) sb += (b[j] = nu.mass(dst[j]));
    for (auto& x : b) x *= sa / sb;  // balance the two totals exactly
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double d = S.d(src[i], dst[j]);
            c[i * n + j] = 0.5 * d * d;
        }
    detail::TransportSimplex lp(a, b, c);
    lp.solve();
    res.iterations = lp.iterations;

    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double f = lp.flow(i, j);
            if (f > 0.0) {
                res.plan.entries.push_back({src[i], dst[j], f});
                double d = S.d(src[i], dst[j]);
                res.plan.cost += d * d * f;
            }
        }
    std::sort(res.plan.entries.begin(), res.plan.entries.end(),
              [](auto& x, auto& y) { return std::tie(x.i, x.j) < std::tie(y.i, y.j); });
    res.cost = res.plan.cost;
    res.value = std::sqrt(std::max(0.0, res.cost));

    // phi on all of X from the sink duals, phi^c its full c-transform
    std::vector<double> phi(S.size());
    for (PointId x = 0; x < S.size(); ++x) {
        double best = inf;
        for (std::size_t j = 0; j < n; ++j) {
            double d = S.d(x, dst[j]);
            best = std::min(best, 0.5 * d * d - lp.v[j]);
        }
        phi[x] = best;
    }
    double shift = *std::min_element(phi.begin(), phi.end());
    for (auto& p : phi) p -= shift;
    auto phic = c_transform(S, phi);
    res.potential = {mu.space(), std::move(phi), std::move(phic)};

    double dual = 0.0;
    for (PointId x = 0; x < S.size(); ++x)
        dual += res.potential.phi[x] * mu.mass(x) + res.potential.phic[x] * nu.mass(x);
    res.duality_gap = dual - 0.5 * res.cost;
    for (auto& e : res.plan.entries)
        res.max_support_slack = std::max(res.max_support_slack, std::fabs(res.potential.slack(e.i, e.j)));
    res.degenerate = lp.has_alternative_optimum(1e-9);
    return res;
}

// ---------------------------------------------------------------- interpolation

struct Route {
    PointId x, y, z;
    double mass;
};

struct Interpolant {
    ProbMeasure measure;
    std::vector<Route> routes;
    double t = 0.0;            // snapped time k/steps
    double worst_error = 0.0;  // largest per-route midpoint score
    bool over_tolerance = false;
};

// Each plan pair moves its mass to the discrete geodesic point at time t,
// snapped to the nearest multiple of 1/steps.
inline Interpolant displacement_interpolation(const Coupling& plan, const ProbMeasure& mu0, const ProbMeasure& mu1,
                                              double t, std::size_t steps = 64) {
    if (!(t >= 0.0 && t <= 1.0)) throw Error("interpolation time outside [0,1]");
    if (steps < 1) throw Error("interpolation needs at least one step");
    if (!same_space(plan.space, mu0.space()) || !same_space(plan.space, mu1.space()))
        throw Error("plan and marginals live on different spaces");
    const auto& S = *plan.space;
    auto k = static_cast<std::size_t>(std::llround(t * static_cast<double>(steps)));
    Interpolant out;
    out.t = static_cast<double>(k) / static_cast<double>(steps);
    if (k == 0 || k == steps) {
        out.measure = k == 0 ? mu0 : mu1;
        for (auto& e : plan.entries) out.routes.push_back({e.i, e.j, k == 0 ? e.i : e.j, e.mass});
        return out;
    }
    std::vector<double> mass(S.size(), 0.0);
    const double ceiling = geodesic_ceiling(S);
    for (auto& e : plan.entries) {
        double score = 0.0;
        PointId z = geodesic_point(S, e.i, e.j, k, steps, &score);
        mass[z] += e.mass;
        out.routes.push_back({e.i, e.j, z, e.mass});
        out.worst_error = std::max(out.worst_error, score);
    }
    out.over_tolerance = out.worst_error > ceiling;
    out.measure = ProbMeasure::from_masses(plan.space, mass);
    return out;
}

}  // namespace mms

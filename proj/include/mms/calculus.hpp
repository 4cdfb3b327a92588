#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mms/transport.hpp"

namespace mms {

using ScalarField = std::vector<double>;

struct SignedMeasure {
    std::vector<double> masses;

    // Same vector divided by the reference weights (the L2 generator).
    ScalarField density(const MetricMeasureSpace& s) const {
        ScalarField d(masses.size());
        for (std::size_t i = 0; i < masses.size(); ++i) d[i] = masses[i] / s.weight(i);
        return d;
    }
};

enum class ConductanceScheme { automatic, five_point, nine_point };

struct GraphOptions {
    double radius = 0.0;          // absolute; 0 means 1.5 x spacing (the 8-neighbour stencil on planar lattices)
    std::size_t k_nearest = 0;    // when > 0, symmetrised k-nearest rule instead of a radius
    bool midpoint_pairs = false;  // collect reflected neighbour pairs for the symmetric slope
    ConductanceScheme conductance = ConductanceScheme::automatic;
};

struct Edge {
    PointId to;
    double length;
    double conductance;
};

class NeighborGraph {
public:
    SpacePtr space;
    std::vector<std::vector<Edge>> adj;
    // pairs[x] holds (y, y') with d(x,y) = d(x,y') and d(y,y') = 2 d(x,y)
    std::vector<std::vector<std::pair<PointId, PointId>>> pairs;
    std::vector<char> interior;      // full slope stencil
    std::vector<char> lap_interior;  // full conductance stencil
    double h = 0.0;                  // spacing used for stencil classification
    std::string rule;
    std::uint64_t id = 0;

    std::size_t size() const { return adj.size(); }
    const MetricMeasureSpace& S() const { return *space; }
    bool has_pairs() const { return !pairs.empty(); }
};

namespace detail {

inline std::uint64_t next_graph_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

inline double effective_spacing(const MetricMeasureSpace& s) {
    if (s.spacing() > 0.0) return s.spacing();
    std::vector<double> nn;
    for (PointId x = 0; x < s.size(); ++x) {
        double m = inf;
        for (PointId y = 0; y < s.size(); ++y)
            if (y != x) m = std::min(m, s.d(x, y));
        if (std::isfinite(m)) nn.push_back(m);
    }
    if (nn.empty()) return 1.0;
    std::nth_element(nn.begin(), nn.begin() + static_cast<long>(nn.size() / 2), nn.end());
    return nn[nn.size() / 2];
}

inline bool connected(const std::vector<std::vector<Edge>>& adj, bool by_conductance) {
    if (adj.empty()) return true;
    std::vector<char> seen(adj.size(), 0);
    std::vector<PointId> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        PointId x = stack.back();
        stack.pop_back();
        for (auto& e : adj[x]) {
            if (by_conductance && !(e.conductance > 0.0)) continue;
            if (!seen[e.to]) {
                seen[e.to] = 1;
                ++count;
                stack.push_back(e.to);
            }
        }
    }
    return count == adj.size();
}

}  // namespace detail

inline NeighborGraph build_graph(SpacePtr space, const GraphOptions& opt = {}) {
    if (!space) throw Error("graph needs a space");
    const auto& S = *space;
    const std::size_t n = S.size();
    NeighborGraph g;
    g.space = space;
    g.id = detail::next_graph_id();
    g.h = detail::effective_spacing(S);
    g.adj.resize(n);

    if (opt.k_nearest > 0) {
        std::vector<std::vector<char>> link(n, std::vector<char>(n, 0));
        for (PointId x = 0; x < n; ++x) {
            std::vector<PointId> order;
            for (PointId y = 0; y < n; ++y)
                if (y != x) order.push_back(y);
            std::stable_sort(order.begin(), order.end(), [&](PointId a, PointId b) { return S.d(x, a) < S.d(x, b); });
            for (std::size_t k = 0; k < std::min(opt.k_nearest, order.size()); ++k)
                link[x][order[k]] = link[order[k]][x] = 1;
        }
        for (PointId x = 0; x < n; ++x)
            for (PointId y = 0; y < n; ++y)
                if (link[x][y]) g.adj[x].push_back({y, S.d(x, y), 0.0});
        g.rule = "k-nearest " + std::to_string(opt.k_nearest);
    } else {
        double r = opt.radius > 0.0 ? opt.radius : 1.5 * g.h;
        for (PointId x = 0; x < n; ++x)
            for (PointId y = 0; y < n; ++y)
                if (y != x && within_radius(S.d(x, y), r)) g.adj[x].push_back({y, S.d(x, y), 0.0});
        g.rule = "radius " + std::to_string(r);
    }
    if (!detail::connected(g.adj, false)) throw Error("neighbour graph is disconnected; enlarge the radius");

    // Conductances: edges near one spacing are axis edges, edges near
    // sqrt(2) spacings are diagonals, longer edges carry no conductance.
    bool has_diag = false;
    for (PointId x = 0; x < n && !has_diag; ++x)
        for (auto& e : g.adj[x])
            if (e.length / g.h >= 1.2 && e.length / g.h < 1.6) has_diag = true;
    auto scheme = opt.conductance;
    if (scheme == ConductanceScheme::automatic)
        scheme = (has_diag && S.intrinsic_dim() == 2.0) ? ConductanceScheme::nine_point : ConductanceScheme::five_point;
    for (PointId x = 0; x < n; ++x)
        for (auto& e : g.adj[x]) {
            double ratio = e.length / g.h;
            double base = std::sqrt(S.weight(x) * S.weight(e.to)) / (e.length * e.length);
            if (ratio < 1.2) e.conductance = scheme == ConductanceScheme::nine_point ? base * 2.0 / 3.0 : base;
            else if (ratio < 1.6 && scheme == ConductanceScheme::nine_point) e.conductance = base / 3.0;
            else e.conductance = 0.0;
        }

    std::size_t max_deg = 0, max_cdeg = 0;
    std::vector<std::size_t> cdeg(n, 0);
    for (PointId x = 0; x < n; ++x) {
        max_deg = std::max(max_deg, g.adj[x].size());
        for (auto& e : g.adj[x])
            if (e.conductance > 0.0) ++cdeg[x];
        max_cdeg = std::max(max_cdeg, cdeg[x]);
    }
    g.interior.resize(n);
    g.lap_interior.resize(n);
    for (PointId x = 0; x < n; ++x) {
        g.interior[x] = g.adj[x].size() == max_deg;
        g.lap_interior[x] = cdeg[x] == max_cdeg;
    }

    if (opt.midpoint_pairs) {
        g.pairs.resize(n);
        parallel_for(n, [&](std::size_t x) {
            const auto& nb = g.adj[x];
            for (std::size_t a = 0; a < nb.size(); ++a)
                for (std::size_t b = a + 1; b < nb.size(); ++b) {
                    double l = nb[a].length;
                    double tol = 1e-9 * l;
                    if (std::fabs(nb[b].length - l) > tol) continue;
                    if (std::fabs(S.d(nb[a].to, nb[b].to) - 2.0 * l) > tol) continue;
                    g.pairs[x].emplace_back(nb[a].to, nb[b].to);
                }
        });
    }
    return g;
}

// ---------------------------------------------------------------- slopes

enum class SlopeMode { lip, lip_plus, lip_minus, symmetric };

inline ScalarField slope_field(const NeighborGraph& g, const ScalarField& f, SlopeMode mode = SlopeMode::lip) {
    if (f.size() != g.size()) throw Error("field length differs from space size");
    const auto& S = g.S();
    ScalarField out(f.size(), 0.0);
    for (PointId x = 0; x < f.size(); ++x) {
        if (mode == SlopeMode::symmetric && !g.pairs.empty() && !g.pairs[x].empty()) {
            double m = 0.0;
            for (auto [y, z] : g.pairs[x]) m = std::max(m, std::fabs(f[y] - f[z]) / S.d(y, z));
            out[x] = m;
            continue;
        }
        double up = 0.0, down = 0.0;
        for (auto& e : g.adj[x]) {
            double diff = f[e.to] - f[x];
            up = std::max(up, diff / e.length);
            down = std::max(down, -diff / e.length);
        }
        out[x] = mode == SlopeMode::lip_plus ? up : mode == SlopeMode::lip_minus ? down : std::max(up, down);
    }
    return out;
}

// Slope mode used by the gradient-pairing operations.
inline SlopeMode pairing_mode(const NeighborGraph& g) {
    return g.has_pairs() ? SlopeMode::symmetric : SlopeMode::lip;
}

inline double interior_norm2(const NeighborGraph& g, const ScalarField& w) {
    double s = 0.0;
    for (PointId x = 0; x < w.size(); ++x)
        if (g.interior[x]) s += w[x] * w[x] * g.S().weight(x);
    return s;
}

// Parallelogram defect |W(f+g)|^2 + |W(f-g)|^2 - 2|Wf|^2 - 2|Wg|^2 in L2(m)
// over interior points, divided by 2(|Wf|^2 + |Wg|^2).
inline double hilbert_defect(const NeighborGraph& G, const ScalarField& f, const ScalarField& g,
                             std::optional<SlopeMode> mode = std::nullopt) {
    SlopeMode m = mode.value_or(pairing_mode(G));
    ScalarField sum(f.size()), diff(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        sum[i] = f[i] + g[i];
        diff[i] = f[i] - g[i];
    }
    double nf = interior_norm2(G, slope_field(G, f, m));
    double ng = interior_norm2(G, slope_field(G, g, m));
    double ns = interior_norm2(G, slope_field(G, sum, m));
    double nd = interior_norm2(G, slope_field(G, diff, m));
    double den = 2.0 * (nf + ng);
    if (!(den > 0.0)) return 0.0;
    return std::fabs(ns + nd - 2.0 * (nf + ng)) / den;
}

struct CarreDuChamp {
    ScalarField field;
    double hilbert_defect = 0.0;
    std::vector<double> eps;
    std::vector<ScalarField> one_sided;  // (W(g+ef)^2 - W(g)^2)/(2e) per eps
};

inline CarreDuChamp carre_du_champ(const NeighborGraph& G, const ScalarField& f, const ScalarField& g,
                                   std::vector<double> eps = {1e-2, 1e-3, 1e-4},
                                   std::optional<SlopeMode> mode = std::nullopt) {
    if (f.size() != G.size() || g.size() != G.size()) throw Error("field length differs from space size");
    if (eps.empty()) throw Error("empty eps list");
    for (std::size_t k = 0; k < eps.size(); ++k) {
        if (!(eps[k] >= 1e-12)) throw Error("eps below 1e-12 underflows the difference quotient");
        if (k > 0 && !(eps[k] < eps[k - 1])) throw Error("eps list must be decreasing");
    }
    SlopeMode m = mode.value_or(pairing_mode(G));
    CarreDuChamp out;
    out.eps = eps;
    auto Wg = slope_field(G, g, m);
    auto Wf = slope_field(G, f, m);
    auto shifted = [&](double e) {
        ScalarField h(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) h[i] = g[i] + e * f[i];
        return slope_field(G, h, m);
    };
    for (double e : eps) {
        auto Wp = shifted(e);
        ScalarField q(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) q[i] = (Wp[i] * Wp[i] - Wg[i] * Wg[i]) / (2.0 * e);
        out.one_sided.push_back(std::move(q));
    }
    double e = eps.back();
    auto Wp = shifted(e), Wm = shifted(-e);
    out.field.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double v = (Wp[i] * Wp[i] - Wm[i] * Wm[i]) / (4.0 * e);
        double cap = Wf[i] * Wg[i];
        out.field[i] = std::clamp(v, -cap, cap);
    }
    out.hilbert_defect = hilbert_defect(G, f, g, m);
    return out;
}

// ---------------------------------------------------------------- Dirichlet form

// E(f,g) = 1/2 sum over undirected edges c (f(y)-f(x))(g(y)-g(x))
inline double dirichlet_energy(const NeighborGraph& G, const ScalarField& f, const ScalarField& g) {
    double s = 0.0;
    for (PointId x = 0; x < G.size(); ++x)
        for (auto& e : G.adj[x])
            if (e.to > x && e.conductance > 0.0) s += e.conductance * (f[e.to] - f[x]) * (g[e.to] - g[x]);
    return 0.5 * s;
}

inline double dirichlet_energy(const NeighborGraph& G, const ScalarField& f) { return dirichlet_energy(G, f, f); }

inline SignedMeasure laplacian_measure(const NeighborGraph& G, const ScalarField& g) {
    if (g.size() != G.size()) throw Error("field length differs from space size");
    if (!detail::connected(G.adj, true)) throw Error("conductance graph is disconnected");
    SignedMeasure mu;
    mu.masses.assign(g.size(), 0.0);
    for (PointId x = 0; x < G.size(); ++x) {
        double s = 0.0;
        for (auto& e : G.adj[x])
            if (e.conductance > 0.0) s += e.conductance * (g[e.to] - g[x]);
        mu.masses[x] = s;
    }
    return mu;
}

struct ComparisonReport {
    double max_excess = -inf;  // max over annulus of lap(d)/m - N/d
    double max_ratio = -inf;   // max of (lap(d)/m) / (N/d)
    PointId worst = npos;
    std::size_t points = 0;
};

// Evaluates lap d(., x0)/m against N/d on interior points with r_in < d < r_out.
inline ComparisonReport comparison_check(const NeighborGraph& G, PointId x0, double N, double r_in, double r_out = inf) {
    const auto& S = G.S();
    if (x0 >= S.size()) throw Error("center out of range");
    ScalarField dist(S.size());
    for (PointId y = 0; y < S.size(); ++y) dist[y] = S.d(x0, y);
    auto lap = laplacian_measure(G, dist).density(S);
    ComparisonReport r;
    for (PointId y = 0; y < S.size(); ++y) {
        double d = dist[y];
        if (!G.lap_interior[y] || !(d > r_in) || !(d < r_out)) continue;
        ++r.points;
        double ex = lap[y] - N / d;
        if (ex > r.max_excess) {
            r.max_excess = ex;
            r.worst = y;
        }
        r.max_ratio = std::max(r.max_ratio, lap[y] / (N / d));
    }
    return r;
}

// ---------------------------------------------------------------- heat flow

namespace detail {

struct Spectrum {
    Eigen::VectorXd lambda;
    Eigen::MatrixXd V;       // eigenvectors of M^-1/2 L M^-1/2
    Eigen::VectorXd sqrt_w;
};

inline Eigen::SparseMatrix<double> conductance_laplacian(const NeighborGraph& G) {
    std::vector<Eigen::Triplet<double>> trip;
    for (PointId x = 0; x < G.size(); ++x) {
        double diag = 0.0;
        for (auto& e : G.adj[x])
            if (e.conductance > 0.0) {
                trip.emplace_back(static_cast<int>(x), static_cast<int>(e.to), e.conductance);
                diag -= e.conductance;
            }
        trip.emplace_back(static_cast<int>(x), static_cast<int>(x), diag);
    }
    auto n = static_cast<int>(G.size());
    Eigen::SparseMatrix<double> L(n, n);
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
}

inline std::shared_ptr<const Spectrum> compute_spectrum(const NeighborGraph& G) {
    auto n = static_cast<Eigen::Index>(G.size());
    Eigen::MatrixXd A = Eigen::MatrixXd(conductance_laplacian(G));
    auto sp = std::make_shared<Spectrum>();
    sp->sqrt_w.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) sp->sqrt_w[i] = std::sqrt(G.S().weight(static_cast<PointId>(i)));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) A(i, j) /= sp->sqrt_w[i] * sp->sqrt_w[j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw Error("eigendecomposition failed");
    sp->lambda = es.eigenvalues().cwiseMin(0.0);
    sp->V = es.eigenvectors();
    return sp;
}

// Eigendecompositions keyed by graph id; many readers, rare writers.
class SpectrumCache {
public:
    static SpectrumCache& instance() {
        static SpectrumCache c;
        return c;
    }

    std::shared_ptr<const Spectrum> get(const NeighborGraph& G) {
        {
            std::shared_lock lock(mu_);
            auto it = map_.find(G.id);
            if (it != map_.end()) return it->second;
        }
        auto sp = compute_spectrum(G);
        std::unique_lock lock(mu_);
        auto [it, inserted] = map_.emplace(G.id, sp);
        return it->second;
    }

    std::size_t size() const {
        std::shared_lock lock(mu_);
        return map_.size();
    }

private:
    mutable std::shared_mutex mu_;
    std::map<std::uint64_t, std::shared_ptr<const Spectrum>> map_;
};

}  // namespace detail

// h_t = exp(t Delta), Delta = M^-1 L. Dense spectral route up to dense_limit
// points, Crank-Nicolson (implicit midpoint) stepping beyond.
class HeatSemigroup {
public:
    explicit HeatSemigroup(const NeighborGraph& G, std::size_t dense_limit = 2000) : G_(&G) {
        if (!detail::connected(G.adj, true)) throw Error("conductance graph is disconnected");
        if (G.size() <= dense_limit) spec_ = detail::SpectrumCache::instance().get(G);
        else L_ = detail::conductance_laplacian(G);
    }

    bool spectral() const { return spec_ != nullptr; }

    ScalarField apply(const ScalarField& f, double t) const {
        if (!(t >= 0.0)) throw Error("heat flow time must be nonnegative");
        if (f.size() != G_->size()) throw Error("field length differs from space size");
        if (t == 0.0) return f;
        auto n = static_cast<Eigen::Index>(f.size());
        Eigen::VectorXd out(n);
        if (spec_) {
            Eigen::VectorXd x(n);
            for (Eigen::Index i = 0; i < n; ++i) x[i] = f[static_cast<std::size_t>(i)] * spec_->sqrt_w[i];
            Eigen::VectorXd c = spec_->V.transpose() * x;
            for (Eigen::Index k = 0; k < n; ++k) c[k] *= std::exp(t * spec_->lambda[k]);
            out = spec_->V * c;
            for (Eigen::Index i = 0; i < n; ++i) out[i] /= spec_->sqrt_w[i];
        } else {
            out = stepped(f, t);
        }
        return ScalarField(out.data(), out.data() + n);
    }

    // rho_t[x](y) = exp(t Delta)_{xy} / w_y
    std::vector<double> kernel_row(PointId x, double t) const {
        const auto& S = G_->S();
        if (x >= S.size()) throw Error("kernel point out of range");
        ScalarField e(S.size(), 0.0);
        e[x] = 1.0;
        auto col = apply(e, t);
        for (auto& v : col) {
            v /= S.weight(x);
            if (v < 0.0 && v > -1e-10) v = 0.0;
        }
        return col;
    }

private:
    Eigen::VectorXd stepped(const ScalarField& f, double t) const {
        auto n = static_cast<Eigen::Index>(f.size());
        double h = G_->h;
        auto steps = static_cast<std::size_t>(std::clamp(std::ceil(t / (h * h)), 32.0, 4096.0));
        double dt = t / static_cast<double>(steps);
        Eigen::SparseMatrix<double> M(n, n);
        M.reserve(Eigen::VectorXi::Constant(n, 1));
        for (Eigen::Index i = 0; i < n; ++i) M.insert(i, i) = G_->S().weight(static_cast<PointId>(i));
        Eigen::SparseMatrix<double> lhs = M - 0.5 * dt * L_;
        Eigen::SparseMatrix<double> rhs = M + 0.5 * dt * L_;
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(lhs);
        if (solver.info() != Eigen::Success) throw Error("implicit heat step factorisation failed");
        Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(f.data(), n);
        for (std::size_t k = 0; k < steps; ++k) u = solver.solve(rhs * u);
        return u;
    }

    const NeighborGraph* G_;
    std::shared_ptr<const detail::Spectrum> spec_;
    Eigen::SparseMatrix<double> L_;
};

inline ScalarField heat_flow(const NeighborGraph& G, const ScalarField& f, double t) {
    return HeatSemigroup(G).apply(f, t);
}

struct GaussianFit {
    double slope = 0.0;        // fitted decay constant of -log rho against d^2/t
    double intercept = 0.0;
    double reference = 0.2;    // 1/5
    std::size_t samples = 0;
};

struct HeatKernel {
    ProbMeasure measure;
    std::vector<double> row;
    double mass = 0.0;
    double min_value = 0.0;
    GaussianFit fit;
};

inline HeatKernel heat_kernel(const NeighborGraph& G, PointId x, double t) {
    if (!(t > 0.0)) throw Error("kernel time must be positive");
    HeatSemigroup H(G);
    HeatKernel k;
    k.row = H.kernel_row(x, t);
    const auto& S = G.S();
    k.min_value = *std::min_element(k.row.begin(), k.row.end());
    for (PointId y = 0; y < S.size(); ++y) k.mass += k.row[y] * S.weight(y);
    std::vector<double> pos(k.row.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = std::max(0.0, k.row[i]);
    k.measure = ProbMeasure::from_masses(G.space, [&] {
        std::vector<double> m(pos.size());
        for (std::size_t i = 0; i < pos.size(); ++i) m[i] = pos[i] * S.weight(i);
        return m;
    }());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t cnt = 0;
    for (PointId y = 0; y < S.size(); ++y) {
        if (y == x || !(k.row[y] > 1e-8)) continue;
        double X = S.d(x, y) * S.d(x, y) / t, Y = -std::log(k.row[y]);
        sx += X;
        sy += Y;
        sxx += X * X;
        sxy += X * Y;
        ++cnt;
    }
    k.fit.samples = cnt;
    if (cnt >= 2) {
        double c = static_cast<double>(cnt);
        double var = sxx - sx * sx / c;
        if (var > 0.0) {
            k.fit.slope = (sxy - sx * sy / c) / var;
            k.fit.intercept = (sy - k.fit.slope * sx) / c;
        }
    }
    return k;
}

struct BakryEmeryRow {
    double t = 0.0;
    double violation = 0.0;  // max over interior of slope(h_t f)^2 - h_t(slope(f)^2)
    PointId worst = npos;
    double tol = 0.0;
    bool pass = false;
};

inline double default_be_tol(const NeighborGraph& G, const ScalarField& f, SlopeMode mode = SlopeMode::lip) {
    auto s = slope_field(G, f, mode);
    double m = 0.0;
    for (PointId x = 0; x < s.size(); ++x)
        if (G.interior[x]) m = std::max(m, s[x]);
    return 5.0 * G.h * (1.0 + m);
}

inline std::vector<BakryEmeryRow> bakry_emery_check(const NeighborGraph& G, const ScalarField& f,
                                                    const std::vector<double>& t_list,
                                                    std::optional<double> tol = std::nullopt,
                                                    SlopeMode mode = SlopeMode::lip) {
    HeatSemigroup H(G);
    double be_tol = tol.value_or(default_be_tol(G, f, mode));
    auto s = slope_field(G, f, mode);
    for (auto& v : s) v *= v;
    std::vector<BakryEmeryRow> rows;
    for (double t : t_list) {
        if (!(t > 0.0)) throw Error("Bakry-Emery times must be positive");
        auto lhs = slope_field(G, H.apply(f, t), mode);
        auto rhs = H.apply(s, t);
        BakryEmeryRow row;
        row.t = t;
        row.tol = be_tol;
        row.violation = -inf;
        for (PointId x = 0; x < f.size(); ++x) {
            if (!G.interior[x]) continue;
            double v = lhs[x] * lhs[x] - rhs[x];
            if (v > row.violation) {
                row.violation = v;
                row.worst = x;
            }
        }
        row.pass = row.violation <= be_tol;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace mms

#pragma once

#include <random>

#include "mms/calculus.hpp"

namespace mms {

struct LineSpec {
    std::vector<PointId> ids;   // ordered by time
    std::vector<double> times;
    double t_min = 0.0, t_max = 0.0;
    double step = 0.0;          // median spacing of consecutive times
    double max_defect = 0.0;    // worst |d(g_k, g_l) - |t_k - t_l||
};

inline LineSpec make_line(const MetricMeasureSpace& s, std::vector<PointId> ids, std::vector<double> times,
                          double line_tol = 1e-9) {
    if (ids.size() != times.size()) throw Error("line ids and times differ in length");
    if (ids.size() < 3) throw Error("a line needs at least three points");
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });
    LineSpec L;
    for (auto k : order) {
        if (ids[k] >= s.size()) throw Error("line point out of range");
        L.ids.push_back(ids[k]);
        L.times.push_back(times[k]);
    }
    for (std::size_t a = 0; a < L.ids.size(); ++a)
        for (std::size_t b = a + 1; b < L.ids.size(); ++b)
            L.max_defect = std::max(L.max_defect,
                                    std::fabs(s.d(L.ids[a], L.ids[b]) - std::fabs(L.times[a] - L.times[b])));
    if (L.max_defect > line_tol)
        throw Error("points do not form a line: distance defect " + std::to_string(L.max_defect));
    L.t_min = L.times.front();
    L.t_max = L.times.back();
    std::vector<double> gaps;
    for (std::size_t k = 1; k < L.times.size(); ++k) gaps.push_back(L.times[k] - L.times[k - 1]);
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<long>(gaps.size() / 2), gaps.end());
    L.step = gaps[gaps.size() / 2];
    if (!(L.step > 0.0)) throw Error("line times must be distinct");
    return L;
}

inline LineSpec default_line(const MetricMeasureSpace& s, double line_tol = 1e-9) {
    if (!s.line_hint()) throw Error("space carries no line; supply one explicitly");
    return make_line(s, s.line_hint()->ids, s.line_hint()->times, line_tol);
}

enum class EndEstimate { extrapolated, truncated };

inline const char* to_string(EndEstimate e) { return e == EndEstimate::extrapolated ? "extrapolated" : "truncated"; }

struct BusemannField {
    LineSpec line;
    ScalarField b_plus, b_minus, gap;
    double T = 0.0;                 // truncation min(t_max, -t_min)
    double transverse = 0.0;        // max distance from a point to the line
    EndEstimate plus_mode = EndEstimate::truncated, minus_mode = EndEstimate::truncated;
    double max_abs_gap = 0.0;
    double max_gap = -inf;          // should be <= 0
    double lipschitz_excess = 0.0;  // max over pairs of |b(x)-b(y)| - d(x,y), both fields
    bool low_confidence = false;
    ScalarField error_bound;        // D^2 / (2 (T - |b|))

    const ScalarField& b() const { return b_plus; }
};

namespace detail {

// Busemann estimate for one end of a line given as (ids, times) with the
// end at index `end` and a neighbour at index `next`. On a lattice frontier
// the end is extrapolated from two anchors, which is exact on products:
// d^2 = q + (t - s)^2 gives s from the difference of two squared distances.
inline ScalarField busemann_end(const MetricMeasureSpace& S, PointId end, double t_end, PointId next, double t_next,
                                bool extrapolate) {
    ScalarField b(S.size());
    for (PointId x = 0; x < S.size(); ++x) {
        double da = S.d(x, end);
        if (!extrapolate) {
            b[x] = t_end - da;
            continue;
        }
        double db = S.d(x, next);
        b[x] = 0.5 * (t_end + t_next) - (da * da - db * db) / (2.0 * (t_end - t_next));
    }
    return b;
}

}  // namespace detail

inline BusemannField busemann_field(const MetricMeasureSpace& S, const LineSpec& line, double line_tol = 1e-9) {
    BusemannField B;
    B.line = line;
    const auto& L = line;
    const std::size_t K = L.ids.size();
    B.T = std::min(L.t_max, -L.t_min);
    for (PointId x = 0; x < S.size(); ++x) {
        double m = inf;
        for (PointId g : L.ids) m = std::min(m, S.d(x, g));
        B.transverse = std::max(B.transverse, m);
    }
    const double tol = line_tol + 0.5 * L.step;

    auto plus = detail::busemann_end(S, L.ids[K - 1], L.t_max, L.ids[K - 2], L.times[K - 2], true);
    bool plus_frontier = *std::max_element(plus.begin(), plus.end()) <= L.t_max + tol;
    B.plus_mode = plus_frontier ? EndEstimate::extrapolated : EndEstimate::truncated;
    B.b_plus = plus_frontier ? plus : detail::busemann_end(S, L.ids[K - 1], L.t_max, 0, 0.0, false);

    // reversed line: time -t
    auto minus = detail::busemann_end(S, L.ids[0], -L.t_min, L.ids[1], -L.times[1], true);
    bool minus_frontier = *std::max_element(minus.begin(), minus.end()) <= -L.t_min + tol;
    B.minus_mode = minus_frontier ? EndEstimate::extrapolated : EndEstimate::truncated;
    B.b_minus = minus_frontier ? minus : detail::busemann_end(S, L.ids[0], -L.t_min, 0, 0.0, false);

    B.gap.resize(S.size());
    B.error_bound.resize(S.size());
    for (PointId x = 0; x < S.size(); ++x) {
        B.gap[x] = B.b_plus[x] + B.b_minus[x];
        B.max_abs_gap = std::max(B.max_abs_gap, std::fabs(B.gap[x]));
        B.max_gap = std::max(B.max_gap, B.gap[x]);
        double room = B.T - std::fabs(B.b_plus[x]);
        B.error_bound[x] = room > 0.0 ? B.transverse * B.transverse / (2.0 * room) : inf;
    }
    for (PointId x = 0; x < S.size(); ++x)
        for (PointId y = x + 1; y < S.size(); ++y) {
            double d = S.d(x, y);
            B.lipschitz_excess = std::max({B.lipschitz_excess, std::fabs(B.b_plus[x] - B.b_plus[y]) - d,
                                           std::fabs(B.b_minus[x] - B.b_minus[y]) - d});
        }
    B.low_confidence = (L.t_max - L.t_min) < 4.0 * B.transverse;
    return B;
}

// ---------------------------------------------------------------- flow

struct FlowTarget {
    PointId y = npos;
    double slack = inf;
};

// argmin_y d^2/2 - t(b(x)-b(y)) + t^2/2. Ties go to the candidate with the
// smallest coordinate displacement when coordinates exist, then to the
// smallest index; on Finsler lattices the bare index rule drifts diagonally.
inline FlowTarget flow_target(const MetricMeasureSpace& S, const ScalarField& b, PointId x, double t) {
    const double tie = 1e-9 * (1.0 + t * t);
    auto row = S.dist().row(x);
    auto value = [&](PointId y) { return 0.5 * row[y] * row[y] - t * (b[x] - b[y]) + 0.5 * t * t; };
    double vmin = inf;
    for (PointId y = 0; y < S.size(); ++y) vmin = std::min(vmin, value(y));
    FlowTarget best;
    double best_disp = inf;
    for (PointId y = 0; y < S.size(); ++y) {
        double v = value(y);
        if (v > vmin + tie) continue;
        double disp = 0.0;
        if (S.has_points()) {
            const auto& px = S.points()[x];
            const auto& py = S.points()[y];
            for (std::size_t a = 0; a < std::min(px.size(), py.size()); ++a) disp += (py[a] - px[a]) * (py[a] - px[a]);
        }
        if (disp < best_disp) {
            best_disp = disp;
            best.y = y;
            best.slack = v;
        }
    }
    return best;
}

struct FlowMap {
    double t = 0.0;
    std::vector<PointId> target;
    ScalarField slack;
    std::vector<char> unreachable;
    std::size_t unreachable_count = 0;
    double flow_tol = 0.0;
    double min_slack = inf;
    double max_interior_slack = 0.0;  // over reachable points
    double max_dist_defect = 0.0;     // |d(x, F_t x) - |t||
    double max_b_defect = 0.0;        // |b(x) - b(F_t x) - t|

    double unreachable_fraction() const {
        return target.empty() ? 0.0 : static_cast<double>(unreachable_count) / static_cast<double>(target.size());
    }
};

inline double default_flow_tol(double h) { return 0.1 * h * h; }

inline FlowMap gradient_flow_map(const MetricMeasureSpace& S, const ScalarField& b, double t, double flow_tol) {
    if (b.size() != S.size()) throw Error("Busemann field length differs from space size");
    FlowMap F;
    F.t = t;
    F.flow_tol = flow_tol;
    F.target.resize(S.size());
    F.slack.resize(S.size());
    F.unreachable.assign(S.size(), 0);
    parallel_for(S.size(), [&](std::size_t x) {
        auto ft = flow_target(S, b, x, t);
        F.target[x] = ft.y;
        F.slack[x] = ft.slack;
    });
    for (PointId x = 0; x < S.size(); ++x) {
        F.min_slack = std::min(F.min_slack, F.slack[x]);
        if (F.slack[x] > flow_tol) {
            F.unreachable[x] = 1;
            ++F.unreachable_count;
            continue;
        }
        PointId y = F.target[x];
        F.max_interior_slack = std::max(F.max_interior_slack, std::fabs(F.slack[x]));
        F.max_dist_defect = std::max(F.max_dist_defect, std::fabs(S.d(x, y) - std::fabs(t)));
        F.max_b_defect = std::max(F.max_b_defect, std::fabs(b[x] - b[y] - t));
    }
    return F;
}

struct FlowDiagnostics {
    double t = 0.0;
    std::vector<double> s_values;
    double group_law = 0.0;        // max d(F_t F_s x, F_{t+s} x)
    double pushforward = 0.0;      // sum |F_t# m - m| / m over the core
    double energy = 0.0;           // |E(f o F_t) - E(f)| / E(f)
    double isometry = 0.0;         // max |d(F_t x, F_t y) - d(x,y)|
    double unreachable_fraction = 0.0;
    std::size_t core_points = 0;
};

// Checks on the core {x : b(x) within the range shrunk by the largest flow
// time used}, where every composed map stays on the lattice.
inline FlowDiagnostics flow_diagnostics(const NeighborGraph& G, const BusemannField& B, double t,
                                        const std::vector<double>& s_values, double flow_tol) {
    const auto& S = G.S();
    const auto& b = B.b();
    FlowDiagnostics D;
    D.t = t;
    D.s_values = s_values;
    double smax = 0.0;
    for (double s : s_values) smax = std::max(smax, std::fabs(s));
    double margin = std::fabs(t) + smax;
    double bmin = *std::min_element(b.begin(), b.end()), bmax = *std::max_element(b.begin(), b.end());
    auto in_band = [&](PointId x, double m) { return b[x] >= bmin + m - 1e-9 && b[x] <= bmax - m + 1e-9; };

    auto Ft = gradient_flow_map(S, b, t, flow_tol);
    D.unreachable_fraction = Ft.unreachable_fraction();
    std::vector<PointId> core;
    for (PointId x = 0; x < S.size(); ++x)
        if (in_band(x, margin) && !Ft.unreachable[x]) core.push_back(x);
    D.core_points = core.size();

    for (double s : s_values) {
        auto Fs = gradient_flow_map(S, b, s, flow_tol);
        auto Fts = gradient_flow_map(S, b, t + s, flow_tol);
        for (PointId x : core) {
            if (Fs.unreachable[x] || Fts.unreachable[x] || Ft.unreachable[Fs.target[x]]) continue;
            D.group_law = std::max(D.group_law, S.d(Ft.target[Fs.target[x]], Fts.target[x]));
        }
    }

    std::vector<double> pushed(S.size(), 0.0);
    for (PointId x = 0; x < S.size(); ++x)
        if (!Ft.unreachable[x]) pushed[Ft.target[x]] += S.weight(x);
    double num = 0.0, den = 0.0;
    for (PointId y = 0; y < S.size(); ++y)
        if (in_band(y, 2.0 * std::fabs(t))) {
            num += std::fabs(pushed[y] - S.weight(y));
            den += S.weight(y);
        }
    D.pushforward = den > 0.0 ? num / den : 0.0;

    // bump in b times a transverse modulation, vanishing off the core
    double lo = bmin + 2.0 * margin, hi = bmax - 2.0 * margin;
    ScalarField dline(S.size(), inf);
    double dmax = 0.0;
    for (PointId x = 0; x < S.size(); ++x) {
        for (PointId g : B.line.ids) dline[x] = std::min(dline[x], S.d(x, g));
        dmax = std::max(dmax, dline[x]);
    }
    ScalarField f(S.size(), 0.0);
    if (hi > lo) {
        const double pi = 3.14159265358979323846;
        for (PointId x = 0; x < S.size(); ++x) {
            if (b[x] <= lo || b[x] >= hi) continue;
            double u = (b[x] - lo) / (hi - lo);
            double bump = std::pow(std::sin(pi * u), 4);
            double mod = dmax > 0.0 ? 1.0 + 0.5 * std::cos(pi * dline[x] / dmax) : 1.0;
            f[x] = bump * mod;
        }
    }
    ScalarField fF(S.size());
    for (PointId x = 0; x < S.size(); ++x) fF[x] = f[Ft.target[x]];
    double e0 = dirichlet_energy(G, f), e1 = dirichlet_energy(G, fF);
    D.energy = e0 > 0.0 ? std::fabs(e1 - e0) / e0 : 0.0;

    for (std::size_t a = 0; a < core.size(); ++a)
        for (std::size_t c = a + 1; c < core.size(); ++c) {
            PointId x = core[a], y = core[c];
            D.isometry = std::max(D.isometry, std::fabs(S.d(Ft.target[x], Ft.target[y]) - S.d(x, y)));
        }
    return D;
}

// ---------------------------------------------------------------- quotient

struct QuotientSpace {
    SpacePtr ambient;
    double h = 0.0;
    std::vector<PointId> reps;               // iota: rep index -> ambient id
    SquareMatrix dprime;
    std::vector<double> mprime;
    std::vector<PointId> proj;               // ambient id -> rep index, npos if the flow failed
    std::vector<std::pair<PointId, double>> smap;
    std::vector<double> t_grid;
    std::vector<std::vector<PointId>> tmap;  // [rep][k], npos when unreachable
    std::size_t proj_failures = 0;
    double product_measure_defect = 0.0;     // relative, per rep x cell
    double smap_tmap_defect = 0.0;           // in cells
    std::size_t smap_tmap_mismatches = 0;
    bool mprime_positive = true;
    ValidationReport dprime_validation;

    SpacePtr as_space(const std::string& label = "quotient") const {
        if (!mprime_positive) throw Error("quotient has a representative with zero mass");
        MetricMeasureSpace::Extras ex;
        ex.label = label;
        ex.spacing = h;
        ex.intrinsic_dim = ambient->intrinsic_dim() > 1.0 ? ambient->intrinsic_dim() - 1.0 : 0.0;
        if (ambient->has_points())
            for (PointId r : reps) ex.points.push_back(ambient->points()[r]);
        return std::make_shared<MetricMeasureSpace>(dprime, mprime, std::move(ex));
    }
};

inline std::vector<double> default_t_grid(const LineSpec& L) {
    double half = 0.5 * (L.t_max - L.t_min);
    auto K = static_cast<long>(std::floor(half / L.step + 1e-9));
    std::vector<double> g;
    for (long k = -K; k <= K; ++k) g.push_back(static_cast<double>(k) * L.step);
    return g;
}

inline QuotientSpace quotient_split(const SpacePtr& space, const BusemannField& B, std::vector<double> t_grid = {},
                                    double flow_tol = -1.0) {
    const auto& S = *space;
    const auto& b = B.b();
    QuotientSpace Q;
    Q.ambient = space;
    Q.h = B.line.step;
    const double h = Q.h;
    if (flow_tol < 0.0) flow_tol = default_flow_tol(h);
    if (t_grid.empty()) t_grid = default_t_grid(B.line);
    std::sort(t_grid.begin(), t_grid.end());
    Q.t_grid = t_grid;

    std::vector<PointId> rep_index(S.size(), npos);
    for (PointId x = 0; x < S.size(); ++x)
        if (std::fabs(b[x]) <= 0.5 * h + 1e-12) {
            rep_index[x] = Q.reps.size();
            Q.reps.push_back(x);
        }
    if (Q.reps.empty()) throw Error("empty slab |b| <= h/2; recenter b so that its zero level is on the lattice");
    const std::size_t R = Q.reps.size();

    Q.proj.assign(S.size(), npos);
    Q.smap.resize(S.size());
    std::vector<long> cell(S.size());
    parallel_for(S.size(), [&](std::size_t x) {
        long k = std::lround(b[x] / h);
        cell[x] = k;
        auto ft = flow_target(S, b, x, static_cast<double>(k) * h);
        if (ft.slack <= flow_tol && rep_index[ft.y] != npos) Q.proj[x] = rep_index[ft.y];
    });
    for (PointId x = 0; x < S.size(); ++x) {
        if (Q.proj[x] == npos) ++Q.proj_failures;
        Q.smap[x] = {Q.proj[x], b[x]};
    }

    const auto band = static_cast<long>(std::llround(1.0 / h));
    Q.mprime.assign(R, 0.0);
    for (PointId x = 0; x < S.size(); ++x)
        if (Q.proj[x] != npos && cell[x] >= 0 && cell[x] < band) Q.mprime[Q.proj[x]] += S.weight(x);
    for (double m : Q.mprime)
        if (!(m > 0.0)) Q.mprime_positive = false;

    // T(x', t) = F_{-t}(iota x')
    Q.tmap.assign(R, std::vector<PointId>(t_grid.size(), npos));
    parallel_for(R * t_grid.size(), [&](std::size_t idx) {
        std::size_t r = idx / t_grid.size(), k = idx % t_grid.size();
        auto ft = flow_target(S, b, Q.reps[r], -t_grid[k]);
        if (ft.slack <= flow_tol) Q.tmap[r][k] = ft.y;
    });

    // d'(x', y') = min_t d(F_t iota x', iota y'), symmetrised by the smaller direction
    SquareMatrix one(R, inf);
    for (std::size_t r1 = 0; r1 < R; ++r1)
        for (std::size_t r2 = 0; r2 < R; ++r2) {
            double m = r1 == r2 ? 0.0 : inf;
            for (std::size_t k = 0; k < t_grid.size(); ++k)
                if (Q.tmap[r1][k] != npos) m = std::min(m, S.d(Q.tmap[r1][k], Q.reps[r2]));
            one(r1, r2) = m;
        }
    Q.dprime = SquareMatrix(R);
    for (std::size_t r1 = 0; r1 < R; ++r1)
        for (std::size_t r2 = 0; r2 < R; ++r2) Q.dprime(r1, r2) = std::min(one(r1, r2), one(r2, r1));
    bool finite = std::all_of(Q.dprime.data().begin(), Q.dprime.data().end(), [](double v) { return std::isfinite(v); });
    if (finite) {
        Q.dprime_validation = validate_space(MetricMeasureSpace(Q.dprime, std::vector<double>(R, 1.0)));
    } else {
        Q.dprime_validation.positive_off_diagonal = false;
        Q.dprime_validation.messages.push_back("some representative pairs are never joined by the flow");
    }

    // S#m against m' x (cell length) on the cells covered by the t grid
    long kmin = std::lround(t_grid.front() / h), kmax = std::lround(t_grid.back() / h);
    std::map<std::pair<std::size_t, long>, double> cellmass;
    for (PointId x = 0; x < S.size(); ++x)
        if (Q.proj[x] != npos && cell[x] >= kmin && cell[x] <= kmax) cellmass[{Q.proj[x], cell[x]}] += S.weight(x);
    for (std::size_t r = 0; r < R; ++r) {
        if (!(Q.mprime[r] > 0.0)) continue;
        for (long k = kmin; k <= kmax; ++k) {
            auto it = cellmass.find({r, k});
            double m = it == cellmass.end() ? 0.0 : it->second;
            Q.product_measure_defect = std::max(Q.product_measure_defect, std::fabs(m - Q.mprime[r] * h) / (Q.mprime[r] * h));
        }
    }

    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < t_grid.size(); ++k) {
            PointId x = Q.tmap[r][k];
            if (x == npos) continue;
            if (Q.proj[x] != r) ++Q.smap_tmap_mismatches;
            Q.smap_tmap_defect = std::max(Q.smap_tmap_defect, std::fabs(b[x] - t_grid[k]) / h);
        }
    return Q;
}

// ---------------------------------------------------------------- Pythagoras

struct PythagorasOptions {
    double t_limit = -1.0;            // |t| bound on sampled nodes; <0 means a quarter of the line span
    std::size_t max_pairs = 200000;   // sample when the full pair set is larger
    std::uint64_t seed = 1;
    std::size_t scatter_limit = 5000;
};

struct PythagorasReport {
    double max_defect = 0.0;
    double mean_defect = 0.0;
    double bilip_min = inf, bilip_max = 0.0;
    bool bilip_ok = true;
    double embedding_defect = 0.0;
    std::size_t pairs = 0;
    std::size_t skipped_nodes = 0;
    std::vector<std::pair<double, double>> scatter;  // (d(T,T)^2, d'^2 + dt^2)
};

inline PythagorasReport pythagoras_check(const QuotientSpace& Q, double line_span, PythagorasOptions opt = {}) {
    const auto& S = *Q.ambient;
    PythagorasReport rep;
    double lim = opt.t_limit >= 0.0 ? opt.t_limit : 0.25 * line_span;
    struct Node {
        std::size_t r;
        double t;
        PointId x;
    };
    std::vector<Node> nodes;
    for (std::size_t r = 0; r < Q.reps.size(); ++r)
        for (std::size_t k = 0; k < Q.t_grid.size(); ++k) {
            if (std::fabs(Q.t_grid[k]) > lim + 1e-12) continue;
            if (Q.tmap[r][k] == npos) {
                ++rep.skipped_nodes;
                continue;
            }
            nodes.push_back({r, Q.t_grid[k], Q.tmap[r][k]});
        }
    const double h2 = Q.h * Q.h;
    const double env = std::sqrt(2.0) * (1.0 + 1e-9);
    double sum = 0.0;
    std::size_t total = nodes.size() * (nodes.size() - (nodes.empty() ? 0 : 1)) / 2;
    std::size_t stride = 1;
    if (total > opt.max_pairs) stride = total / opt.max_pairs + 1;
    std::mt19937_64 rng(opt.seed);
    std::size_t counter = 0, offset = stride > 1 ? rng() % stride : 0;
    for (std::size_t a = 0; a < nodes.size(); ++a)
        for (std::size_t c = a + 1; c < nodes.size(); ++c) {
            if ((counter++ % stride) != offset) continue;
            const auto& A = nodes[a];
            const auto& C = nodes[c];
            double D = S.d(A.x, C.x);
            double dp = Q.dprime(A.r, C.r), dt = A.t - C.t;
            double P2 = dp * dp + dt * dt;
            double defect = std::fabs(D * D - P2) / std::max(D * D, h2);
            rep.max_defect = std::max(rep.max_defect, defect);
            sum += defect;
            ++rep.pairs;
            if (P2 > 0.0) {
                double ratio = D / std::sqrt(P2);
                rep.bilip_min = std::min(rep.bilip_min, ratio);
                rep.bilip_max = std::max(rep.bilip_max, ratio);
                if (ratio > env || ratio * env < 1.0) rep.bilip_ok = false;
            } else if (D > 1e-9) {
                rep.bilip_ok = false;
            }
            if (rep.scatter.size() < opt.scatter_limit) rep.scatter.emplace_back(D * D, P2);
        }
    rep.mean_defect = rep.pairs ? sum / static_cast<double>(rep.pairs) : 0.0;
    for (std::size_t r1 = 0; r1 < Q.reps.size(); ++r1)
        for (std::size_t r2 = 0; r2 < Q.reps.size(); ++r2)
            rep.embedding_defect =
                std::max(rep.embedding_defect, std::fabs(Q.dprime(r1, r2) - S.d(Q.reps[r1], Q.reps[r2])));
    return rep;
}

}  // namespace mms

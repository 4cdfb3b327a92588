// One PASS/FAIL line per acceptance criterion. Exit status 0 iff all pass.

#include <chrono>
#include <cstdio>

#include "mms/scenario.hpp"
#include "oracles.hpp"

using namespace mms;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Line {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) ok = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (cond ? "" : " [X]");
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

ScalarField coord(const MetricMeasureSpace& s, std::size_t a) {
    ScalarField f(s.size());
    for (PointId x = 0; x < s.size(); ++x) f[x] = s.points()[x][a];
    return f;
}

std::vector<PointId> range_ids(PointId a, PointId b) {
    std::vector<PointId> v;
    for (PointId i = a; i <= b; ++i) v.push_back(i);
    return v;
}

SpacePtr strip_product() { return product(GeneratorSpec{EuclideanGridSpec{{11}, 0.1}}, -5.0, 5.0, 0.1); }

// 1. transport against vertex enumeration
Line transport_oracle() {
    Line out;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.05, 1.0);
    double worst = 0.0, gap = 0.0, solve_time = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + static_cast<std::size_t>(trial % 5);
        auto s = oracle::random_metric_space(n, rng);
        auto random_measure = [&] {
            std::vector<PointId> ids(n);
            std::iota(ids.begin(), ids.end(), 0);
            std::shuffle(ids.begin(), ids.end(), rng);
            std::vector<double> m(n, 0.0);
            for (std::size_t k = 0; k < std::min<std::size_t>(4, n); ++k) m[ids[k]] = U(rng);
            return ProbMeasure::from_masses(s, m);
        };
        auto mu = random_measure(), nu = random_measure();
        auto t0 = Clock::now();
        auto r = w2_solve(mu, nu);
        solve_time += seconds_since(t0);
        auto a = mu.support(), b = nu.support();
        std::vector<std::vector<double>> c(a.size(), std::vector<double>(b.size()));
        std::vector<double> ma, mb;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) c[i][j] = std::pow(s->d(a[i], b[j]), 2);
        for (auto i : a) ma.push_back(mu.mass(i));
        for (auto j : b) mb.push_back(nu.mass(j));
        worst = std::max(worst, std::fabs(r.cost - oracle::brute_force_cost(c, ma, mb)));
        gap = std::max(gap, std::fabs(r.duality_gap));
    }
    out.require(worst <= 1e-9, "max |cost - oracle| = " + num(worst));
    out.require(gap <= 1e-9, "max duality gap = " + num(gap));
    out.require(solve_time < 10.0, "solver time " + num(solve_time) + " s");
    return out;
}

// 2. c-transform algebra
Line c_transform_algebra() {
    Line out;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double ccc = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        auto s = oracle::random_metric_space(3 + static_cast<std::size_t>(trial % 8), rng);
        std::vector<double> phi(s->size());
        for (auto& v : phi) v = U(rng);
        auto c1 = c_transform(*s, phi);
        auto c3 = c_transform(*s, c_transform(*s, c1));
        for (std::size_t i = 0; i < phi.size(); ++i) ccc = std::max(ccc, std::fabs(c3[i] - c1[i]));
    }
    out.require(ccc <= 1e-12, "max |phi^ccc - phi^c| = " + num(ccc));

    auto s = strip_product();
    auto B = busemann_field(*s, default_line(*s));
    const double h = 0.1;
    double worst = 0.0;
    for (double a : {-1.0, -0.5, 0.5, 1.0}) {
        ScalarField phi(s->size());
        for (PointId x = 0; x < s->size(); ++x) phi[x] = a * B.b()[x];
        auto phic = c_transform(*s, phi);
        for (PointId y = 0; y < s->size(); ++y) {
            // the continuum minimiser sits at b(y) + a, which must stay on the strip
            if (std::fabs(B.b()[y]) > 5.0 - std::fabs(a) - h) continue;
            worst = std::max(worst, std::fabs(phic[y] + a * B.b()[y] + 0.5 * a * a));
        }
    }
    out.require(worst <= 2.0 * h, "max |(ab)^c + ab + a^2/2| = " + num(worst));
    return out;
}

// 3. entropy convexity and volume growth
Line cd_convexity() {
    Line out;
    auto s = euclidean_grid({41}, 0.025);
    CdOptions opt;
    opt.N_values = {1.0, 2.0, inf};
    auto r = cd_convexity_check(ProbMeasure::uniform(s, range_ids(0, 10)), ProbMeasure::uniform(s, range_ids(30, 40)),
                                1.0, opt);
    double worst = *std::max_element(r.defects.begin(), r.defects.end());
    bool all_pass = std::all_of(r.verdicts.begin(), r.verdicts.end(), [](Verdict v) { return v == Verdict::pass; });
    out.require(worst <= 0.05 && all_pass, "1D grid defect " + num(worst));

    SquareMatrix D(3);
    D(0, 1) = D(1, 0) = 0.5;
    D(1, 2) = D(2, 1) = 0.5;
    D(0, 2) = D(2, 0) = 1.0;
    auto bad = std::make_shared<MetricMeasureSpace>(D, std::vector<double>{1.0, 1e-3, 1.0});
    CdOptions two;
    two.N_values = {2.0};
    auto rb = cd_convexity_check(ProbMeasure::dirac(bad, 0), ProbMeasure::dirac(bad, 2), 2.0, two);
    out.require(rb.defects[0] > 0.5 && rb.verdicts[0] == Verdict::fail,
                "deficient midpoint defect " + num(rb.defects[0]) + " -> " + to_string(rb.verdicts[0]));

    auto g = euclidean_grid({21, 21}, 0.05);
    auto rows = bishop_gromov_profile(*g, 220, {0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, 2.0, 0.1, true);
    bool bg = std::all_of(rows.begin(), rows.end(), [](const BishopGromovRow& row) { return row.pass; });
    out.require(bg, "Bishop-Gromov on " + std::to_string(rows.size()) + " radius pairs");
    return out;
}

// 4. Hilbertian versus Finsler
Line hilbertianity() {
    Line out;
    auto e = euclidean_grid({41, 41}, 0.05);
    GraphOptions wide;
    wide.radius = 5.0 * 0.05;
    wide.midpoint_pairs = true;
    auto G = build_graph(e, wide);
    auto x = coord(*e, 0), y = coord(*e, 1);
    ScalarField x2y(e->size());
    for (PointId p = 0; p < e->size(); ++p) x2y[p] = x[p] + 2.0 * y[p];
    double worst = std::max(hilbert_defect(G, x, y), hilbert_defect(G, x, x2y));
    std::mt19937_64 rng(5);
    for (int k = 0; k < 10; ++k) {
        auto f = detail::smooth_probe(*e, rng), g = detail::smooth_probe(*e, rng);
        worst = std::max(worst, hilbert_defect(G, f, g));
    }
    out.require(worst <= 1e-2, "Euclidean defect " + num(worst));

    auto l = normed_plane(inf, 2.0, 0.05);
    auto H = build_graph(l);
    double d = hilbert_defect(H, coord(*l, 0), coord(*l, 1));
    out.require(std::fabs(d - 1.0) <= 1e-6, "l-infinity defect " + num(d));
    return out;
}

// 5. Laplacian comparison
Line laplacian() {
    Line out;
    auto s = euclidean_grid({41, 41}, 0.05);
    auto G = build_graph(s);
    PointId c = 20 * 41 + 20;
    double h = 0.05, worst = -inf;
    std::size_t points = 0;
    ScalarField dist(s->size());
    for (PointId y = 0; y < s->size(); ++y) dist[y] = s->d(c, y);
    auto lap = laplacian_measure(G, dist).density(*s);
    for (PointId y = 0; y < s->size(); ++y) {
        double d = dist[y];
        if (!G.lap_interior[y] || !(d > 3.0 * h && d < 0.8)) continue;
        worst = std::max(worst, lap[y] - 2.2 / d);
        ++points;
    }
    out.require(worst <= 0.0 && points > 0, "max(lap d - 1.1*2/d) = " + num(worst) + " on " + std::to_string(points) + " points");
    double lin = 0.0;
    for (std::size_t a : {0u, 1u}) {
        auto l = laplacian_measure(G, coord(*s, a)).density(*s);
        for (PointId y = 0; y < s->size(); ++y)
            if (G.lap_interior[y]) lin = std::max(lin, std::fabs(l[y]));
    }
    out.require(lin <= 1e-10, "linear interior Laplacian " + num(lin));
    return out;
}

// 6. heat flow
Line heat() {
    Line out;
    auto s = euclidean_grid({41, 41}, 0.05);
    auto G = build_graph(s);
    HeatSemigroup H(G);
    std::mt19937_64 rng(6);
    auto f = detail::random_field(s->size(), rng);
    double mass = 0.0, sg = 0.0;
    for (double t : {0.01, 0.05}) {
        auto ht = H.apply(f, t);
        double m0 = 0.0, m1 = 0.0;
        for (PointId x = 0; x < s->size(); ++x) {
            m0 += f[x] * s->weight(x);
            m1 += ht[x] * s->weight(x);
        }
        mass = std::max(mass, std::fabs(m1 - m0));
        auto comp = H.apply(H.apply(f, 0.4 * t), 0.6 * t);
        for (PointId x = 0; x < s->size(); ++x) sg = std::max(sg, std::fabs(comp[x] - ht[x]));
    }
    out.require(mass <= 1e-9, "mass drift " + num(mass));
    out.require(sg <= 1e-8, "semigroup defect " + num(sg));

    auto x = coord(*s, 0);
    auto rows = bakry_emery_check(G, x, {0.01, 0.05});
    double be = -inf, tol = rows[0].tol;
    for (auto& r : rows) be = std::max(be, r.violation);
    out.require(be <= tol, "Bakry-Emery violation " + num(be) + " vs " + num(tol));

    double row_err = 0.0, row_min = 0.0;
    std::vector<PointId> probe{0, 40, 1640, 1680, 20, 820, 840};
    for (int k = 0; k < 10; ++k) probe.push_back(static_cast<PointId>(rng() % s->size()));
    for (PointId p : probe) {
        auto row = H.kernel_row(p, 0.01);
        double m = 0.0;
        for (PointId y = 0; y < s->size(); ++y) {
            m += row[y] * s->weight(y);
            row_min = std::min(row_min, row[y]);
        }
        row_err = std::max(row_err, std::fabs(m - 1.0));
    }
    out.require(row_err <= 1e-9 && row_min >= -1e-9, "kernel rows: mass error " + num(row_err) + ", min " + num(row_min));
    return out;
}

// 7. splitting pipeline on the product strip
Line splitting() {
    Line out;
    auto t0 = Clock::now();
    ScenarioConfig c;
    c.space = R"({"generator": {"type": "product", "factor": {"type": "euclidean_grid", "dims": [11], "h": 0.1}, "interval": [-5, 5], "h": 0.1}})";
    c.task = "full-pipeline";
    c.out = "unused";
    auto o = execute_scenario(c);
    double runtime = seconds_since(t0);
    const auto& rep = o.report;
    auto verdict = [&](const char* name) {
        auto* chk = rep.find(name);
        return chk && chk->verdict == Verdict::pass;
    };
    out.require(o.exit_code == 0, "pipeline exit " + std::to_string(o.exit_code));
    for (auto name : {"busemann_gap", "flow_slack", "flow_group_law", "flow_pushforward", "flow_energy", "pythagoras",
                      "bilipschitz_envelope", "quotient_cd"})
        out.require(verdict(name), std::string(name) + " " + num(rep.find(name) ? rep.find(name)->value : inf));

    // independent: b against the line coordinate, d' against the factor
    auto s = strip_product();
    auto B = busemann_field(*s, default_line(*s));
    const double h = 0.1, D = 1.0;
    double excess = -inf;
    for (PointId x = 0; x < s->size(); ++x) {
        double t = s->points()[x][1];
        if (std::fabs(t) >= 5.0 - 1e-9) continue;
        excess = std::max(excess, std::fabs(B.b()[x] - t) - (h + D * D / (2.0 * (5.0 - std::fabs(t)))));
    }
    out.require(excess <= 0.0, "b profile excess " + num(excess));
    auto Q = quotient_split(s, B);
    double dq = 0.0, pyth = 0.0;
    for (std::size_t a = 0; a < Q.reps.size(); ++a)
        for (std::size_t b = 0; b < Q.reps.size(); ++b) {
            double fa = s->points()[Q.reps[a]][0], fb = s->points()[Q.reps[b]][0];
            dq = std::max(dq, std::fabs(Q.dprime(a, b) - std::fabs(fa - fb)));
        }
    // Pythagoras from raw coordinates of the reconstructed points
    for (std::size_t a = 0; a < Q.reps.size(); ++a)
        for (std::size_t b = 0; b < Q.reps.size(); ++b)
            for (std::size_t k = 0; k < Q.t_grid.size(); k += 3)
                for (std::size_t l = 0; l < Q.t_grid.size(); l += 3) {
                    PointId p = Q.tmap[a][k], q = Q.tmap[b][l];
                    if (p == npos || q == npos) continue;
                    double dd = s->d(p, q), dp = Q.dprime(a, b), dt = Q.t_grid[k] - Q.t_grid[l];
                    double m = std::max(dd * dd, h * h);
                    pyth = std::max(pyth, std::fabs(dd * dd - dp * dp - dt * dt) / m);
                }
    out.require(dq <= h, "d' vs factor distance " + num(dq));
    out.require(pyth <= 0.05, "oracle Pythagoras defect " + num(pyth));
    out.require(runtime < 60.0, "runtime " + num(runtime) + " s");
    return out;
}

// 8. negative control
Line negative_control() {
    Line out;
    ScenarioConfig c;
    c.space = R"({"generator": {"type": "normed_plane", "p": "inf", "side": 10, "width": 1, "h": 0.1}})";
    c.task = "full-pipeline";
    c.out = "unused";
    auto o = execute_scenario(c);
    const auto& rep = o.report;
    auto* p = rep.find("pythagoras");
    auto* b = rep.find("bilipschitz_envelope");
    auto* hd = rep.find("hilbert_defect");
    out.require(p && p->value >= 0.2, "Pythagoras defect " + num(p ? p->value : -1.0));
    out.require(hd && std::fabs(hd->value - 1.0) <= 1e-6, "hilbert defect " + num(hd ? hd->value : -1.0));
    out.require(b && b->verdict == Verdict::pass, "bilipschitz envelope " + num(b ? b->value : inf));
    out.require(o.exit_code == 2, "pipeline exit " + std::to_string(o.exit_code));
    return out;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Line (*run)();
    };
    const Criterion all[] = {
        {"1 transport oracle equivalence", transport_oracle},
        {"2 c-transform algebra", c_transform_algebra},
        {"3 CD(0,N) convexity and Bishop-Gromov", cd_convexity},
        {"4 Hilbertianity discrimination", hilbertianity},
        {"5 Laplacian comparison", laplacian},
        {"6 heat flow", heat},
        {"7 splitting pipeline", splitting},
        {"8 negative control", negative_control},
    };
    int failed = 0;
    for (auto& c : all) {
        Line l;
        try {
            l = c.run();
        } catch (const std::exception& e) {
            l.ok = false;
            l.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %s: %s\n", l.ok ? "PASS" : "FAIL", c.name, l.detail.c_str());
        std::fflush(stdout);
        if (!l.ok) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(all)) - failed, std::size(all));
    return failed == 0 ? 0 : 1;
}

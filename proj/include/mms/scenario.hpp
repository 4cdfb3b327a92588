#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <random>

#include "mms/io.hpp"
#include "mms/tolerances.hpp"

namespace mms {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct Check {
    std::string name;
    std::string anchor;
    double value = 0.0;
    double tolerance = 0.0;
    std::string relation;  // "<=", ">=" or ">"
    Verdict verdict = Verdict::fail;
};

// JSON has no inf or nan.
inline json finite_or_text(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

class Report {
public:
    std::string task;
    std::string space_label;
    std::uint64_t seed = 0;
    std::vector<std::string> stages;
    std::vector<Check> checks;
    json data = json::object();

    // Verdict from the relation; `degrade` turns a pass into inconclusive.
    Check& add(std::string name, std::string anchor, double value, double tol, std::string rel = "<=",
               bool degrade = false) {
        bool ok = rel == "<=" ? value <= tol : rel == ">=" ? value >= tol : value > tol;
        Verdict v = ok ? Verdict::pass : Verdict::fail;
        if (v == Verdict::pass && degrade) v = Verdict::inconclusive;
        checks.push_back({std::move(name), std::move(anchor), value, tol, std::move(rel), v});
        return checks.back();
    }

    Check& add_verdict(std::string name, std::string anchor, double value, double tol, std::string rel, Verdict v) {
        checks.push_back({std::move(name), std::move(anchor), value, tol, std::move(rel), v});
        return checks.back();
    }

    const Check* find(const std::string& name) const {
        for (auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }

    int exit_code() const {
        bool inconclusive = false;
        for (auto& c : checks) {
            if (c.verdict == Verdict::fail) return 2;
            if (c.verdict == Verdict::inconclusive) inconclusive = true;
        }
        return inconclusive ? 3 : 0;
    }

    json to_json(const std::string& timestamp) const {
        json j;
        j["schema"] = "mms-report/1";
        j["tolerance_table"] = Tolerances::version;
        j["task"] = task;
        j["space"] = space_label;
        j["seed"] = seed;
        j["timestamp"] = timestamp;
        j["stages"] = stages;
        json cs = json::array();
        for (auto& c : checks)
            cs.push_back({{"name", c.name},
                          {"anchor", c.anchor},
                          {"value", finite_or_text(c.value)},
                          {"tolerance", finite_or_text(c.tolerance)},
                          {"relation", c.relation},
                          {"verdict", to_string(c.verdict)}});
        j["checks"] = cs;
        j["exit_code"] = exit_code();
        j["data"] = data;
        return j;
    }
};

struct ScenarioConfig {
    std::string space;    // JSON path, inline JSON, or distance CSV (with weights)
    std::string weights;  // weights CSV when space is a CSV matrix
    std::string task;
    std::string out;
    std::uint64_t seed = 1;
    std::vector<std::string> tol_overrides;  // key=value
    std::vector<double> t_grid;
    std::optional<double> dimension;
    std::string mu, nu;                      // dirac:i | uniform:i,j,.. | ball:i:r | JSON path
    std::optional<std::size_t> x0;
    std::optional<double> time;
    std::vector<double> radii;
    std::optional<double> stencil_cells;
    std::string line;                        // JSON path {"ids": [...], "times": [...]}
};

struct ScenarioOutput {
    Report report;
    std::map<std::string, std::string> files;  // name -> content, report.json included
    int exit_code = 0;
};

inline const std::vector<std::string>& known_tasks() {
    static const std::vector<std::string> t{"validate", "w2", "cd", "hilbert", "laplace", "heat", "be", "split",
                                            "full-pipeline"};
    return t;
}

inline Tolerances parse_overrides(const std::vector<std::string>& items) {
    Tolerances tol;
    for (auto& item : items) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--tol-overrides entry '" + item + "' is not key=value");
        std::string key = item.substr(0, eq);
        double v;
        try {
            v = std::stod(item.substr(eq + 1));
        } catch (...) {
            throw ConfigError("--tol-overrides value for '" + key + "' is not a number");
        }
        try {
            tol.set(key, v);
        } catch (const Error& e) {
            throw ConfigError(std::string("--tol-overrides: ") + e.what());
        }
    }
    return tol;
}

// Parameter completeness, checked before any computation.
inline void validate_config(const ScenarioConfig& c) {
    if (c.space.empty()) throw ConfigError("missing field 'space' (--space)");
    if (c.task.empty()) throw ConfigError("missing field 'task' (--task)");
    if (std::find(known_tasks().begin(), known_tasks().end(), c.task) == known_tasks().end())
        throw ConfigError("invalid field 'task': unknown task '" + c.task + "'");
    if (c.out.empty()) throw ConfigError("missing field 'out' (--out)");
    if ((c.task == "w2" || c.task == "cd") && (c.mu.empty() || c.nu.empty()))
        throw ConfigError("task '" + c.task + "' needs both measures (--mu, --nu)");
    if (c.dimension && !(*c.dimension >= 1.0)) throw ConfigError("invalid field 'dimension': N must be >= 1");
    if (c.time && !(*c.time > 0.0)) throw ConfigError("invalid field 'time': must be positive");
    if (c.stencil_cells && !(*c.stencil_cells >= 1.0)) throw ConfigError("invalid field 'stencil': must be >= 1 cell");
    for (double t : c.t_grid)
        if (!std::isfinite(t)) throw ConfigError("invalid field 't-grid': non-finite entry");
    if (c.space.size() > 4 && c.space.substr(c.space.size() - 4) == ".csv" && c.weights.empty())
        throw ConfigError("a CSV distance matrix needs --weights");
    parse_overrides(c.tol_overrides);
}

namespace detail {

inline std::vector<PointId> parse_ids(const std::string& s) {
    std::vector<PointId> ids;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) ids.push_back(static_cast<PointId>(std::stoul(tok)));
    return ids;
}

inline ProbMeasure parse_measure(const std::string& spec, const SpacePtr& S, const char* which) {
    try {
        if (spec.rfind("dirac:", 0) == 0) return ProbMeasure::dirac(S, std::stoul(spec.substr(6)));
        if (spec.rfind("uniform:", 0) == 0) return ProbMeasure::uniform(S, parse_ids(spec.substr(8)));
        if (spec.rfind("ball:", 0) == 0) {
            auto rest = spec.substr(5);
            auto colon = rest.find(':');
            if (colon == std::string::npos) throw ConfigError("ball measure needs ball:<center>:<radius>");
            PointId c = std::stoul(rest.substr(0, colon));
            double r = std::stod(rest.substr(colon + 1));
            if (c >= S->size()) throw ConfigError("ball center out of range");
            std::vector<PointId> ids;
            for (PointId y = 0; y < S->size(); ++y)
                if (within_radius(S->d(c, y), r)) ids.push_back(y);
            return ProbMeasure::uniform(S, ids);
        }
        std::string text = (!spec.empty() && spec.front() == '{') ? spec : read_file(spec);
        return measure_from_json(S, parse_json(text, "measure"));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid field '") + which + "': " + e.what());
    }
}

inline PointId metric_center(const MetricMeasureSpace& S) {
    PointId best = 0;
    double br = inf;
    for (PointId x = 0; x < S.size(); ++x) {
        double r = 0.0;
        for (PointId y = 0; y < S.size(); ++y) r = std::max(r, S.d(x, y));
        if (r < br) {
            br = r;
            best = x;
        }
    }
    return best;
}

inline ScalarField coordinate(const MetricMeasureSpace& S, std::size_t axis) {
    ScalarField f(S.size());
    for (PointId x = 0; x < S.size(); ++x) f[x] = S.points()[x].at(axis);
    return f;
}

// Smooth seeded probe built from the first two coordinates.
inline ScalarField smooth_probe(const MetricMeasureSpace& S, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.5, 2.0), P(0.0, 6.283185307179586);
    double ext = std::max(S.diameter(), 1e-12);
    double a = U(rng) / ext, b = U(rng) / ext, c = P(rng);
    ScalarField f(S.size());
    for (PointId x = 0; x < S.size(); ++x) {
        const auto& p = S.points()[x];
        double y = p.size() > 1 ? p[1] : 0.0;
        f[x] = std::sin(a * p[0] + b * y + c);
    }
    return f;
}

inline ScalarField random_field(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    ScalarField f(n);
    for (auto& v : f) v = U(rng);
    return f;
}

inline double scale_h(const MetricMeasureSpace& S) { return detail::effective_spacing(S); }

inline std::string timestamp_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline double dimension_of(const ScenarioConfig& c, const MetricMeasureSpace& S) {
    if (c.dimension) return *c.dimension;
    if (S.intrinsic_dim() >= 1.0) return S.intrinsic_dim();
    throw ConfigError("missing field 'dimension' (--dimension): the space does not declare one");
}

inline void require_points(const MetricMeasureSpace& S, std::size_t dims, const std::string& task) {
    if (!S.has_points() || S.points()[0].size() < dims)
        throw ConfigError("task '" + task + "' needs point coordinates with " + std::to_string(dims) + " components");
}

// ---------------------------------------------------------------- tasks

inline void task_validate(const SpacePtr& S, const Tolerances& tol, Report& rep) {
    auto v = validate_space(*S, tol.get("triangle_ulps"));
    rep.add("symmetry", "metric axioms: symmetry", v.symmetric ? 0.0 : 1.0, 0.0);
    rep.add("zero_diagonal", "metric axioms: d(x,x) = 0", v.zero_diagonal ? 0.0 : 1.0, 0.0);
    rep.add("positivity", "metric axioms: d(x,y) > 0 for x != y", v.positive_off_diagonal ? 0.0 : 1.0, 0.0);
    rep.add("positive_weights", "reference measure has full support", v.positive_weights ? 0.0 : 1.0, 0.0);
    rep.add("triangle_inequality", "metric axioms: triangle inequality",
            static_cast<double>(v.triangle_violation_count), 0.0);
    json tri = json::array();
    for (auto& t : v.triangle_violations) tri.push_back({{"i", t.i}, {"k", t.k}, {"j", t.j}, {"excess", t.excess}});
    rep.data["triangle_violations"] = tri;
    rep.data["messages"] = v.messages;
    rep.data["n"] = S->size();
    rep.data["total_mass"] = S->total_mass();
}

inline void task_w2(const ScenarioConfig& c, const SpacePtr& S, const Tolerances& tol, Report& rep,
                    std::map<std::string, std::string>& files) {
    auto mu = parse_measure(c.mu, S, "mu"), nu = parse_measure(c.nu, S, "nu");
    auto r = w2_solve(mu, nu);
    rep.data["w2"] = r.value;
    rep.data["cost"] = r.cost;
    rep.data["degenerate"] = r.degenerate;
    rep.data["iterations"] = r.iterations;
    rep.add("duality_gap", "Kantorovich duality", std::fabs(r.duality_gap), tol.get("duality"));
    rep.add("support_slack", "plan supported in the c-superdifferential of the potential", r.max_support_slack,
            tol.get("support_slack"));
    auto rows = r.plan.row_sums(), cols = r.plan.col_sums();
    double worst = 0.0;
    for (PointId x = 0; x < S->size(); ++x)
        worst = std::max({worst, std::fabs(rows[x] - mu.mass(x)), std::fabs(cols[x] - nu.mass(x))});
    rep.add("marginals", "coupling marginals", worst, tol.get("marginal"));
    auto cc = c_concavity_check(*S, r.potential.phi, 1e-9);
    rep.add("potential_c_concave", "c-concavity of Kantorovich potentials", cc.max_defect, 1e-9);
    files["coupling.csv"] = coupling_csv(r.plan);
    CsvWriter pot({"id", "phi", "phic"});
    for (PointId x = 0; x < S->size(); ++x) pot.row(x, r.potential.phi[x], r.potential.phic[x]);
    files["potentials.csv"] = pot.str();
}

inline void task_cd(const ScenarioConfig& c, const SpacePtr& S, const Tolerances& tol, Report& rep,
                    std::map<std::string, std::string>& files) {
    double N = dimension_of(c, *S);
    auto mu = parse_measure(c.mu, S, "mu"), nu = parse_measure(c.nu, S, "nu");
    CdOptions opt;
    opt.t_grid = c.t_grid;
    if (tol.get("cd_tol") >= 0.0) opt.cd_tol = tol.get("cd_tol");
    else opt.cd_tol = default_cd_tol(mu, nu, tol.get("cd_factor"));
    auto r = cd_convexity_check(mu, nu, N, opt);
    for (std::size_t k = 0; k < r.N_values.size(); ++k) {
        std::string n = std::isinf(r.N_values[k]) ? "inf" : fmt_num(r.N_values[k]);
        rep.add_verdict("entropy_convexity_N" + n, "entropy convexity along Wasserstein geodesics (CD(0,N))",
                        r.defects[k], r.cd_tol, "<=", r.verdicts[k]);
    }
    if (!c.radii.empty()) {
        PointId x0 = c.x0.value_or(metric_center(*S));
        auto rows = bishop_gromov_profile(*S, x0, c.radii, N, tol.get("bg"), true);
        double worst = -inf;
        json jr = json::array();
        for (auto& row : rows) {
            worst = std::max(worst, row.bound - row.ratio);
            jr.push_back({{"r", row.r}, {"R", row.R}, {"ratio", row.ratio}, {"bound", row.bound}});
        }
        rep.add("bishop_gromov", "Bishop-Gromov volume comparison", worst, tol.get("bg"));
        rep.data["bishop_gromov"] = jr;
    }
    rep.data["entropy"] = entropy_to_json(r);
    files["entropy.csv"] = entropy_csv(r);
    files["entropy.json"] = entropy_to_json(r).dump(2);
}

inline NeighborGraph task_graph(const ScenarioConfig& c, const SpacePtr& S, double default_cells, bool pairs) {
    GraphOptions g;
    g.radius = c.stencil_cells.value_or(default_cells) * scale_h(*S);
    g.midpoint_pairs = pairs;
    return build_graph(S, g);
}

inline void task_hilbert(const ScenarioConfig& c, const SpacePtr& S, const Tolerances& tol, Report& rep) {
    require_points(*S, 2, "hilbert");
    auto G = task_graph(c, S, 5.0, true);
    auto x = coordinate(*S, 0), y = coordinate(*S, 1);
    ScalarField x2y(S->size());
    for (PointId p = 0; p < S->size(); ++p) x2y[p] = x[p] + 2.0 * y[p];
    std::mt19937_64 rng(c.seed);
    auto f = smooth_probe(*S, rng), g = smooth_probe(*S, rng);
    double hxy = hilbert_defect(G, x, y), hx2 = hilbert_defect(G, x, x2y), hfg = hilbert_defect(G, f, g);
    const std::string anchor = "parallelogram law for the Cheeger energy (infinitesimal Hilbertianity)";
    rep.add("hilbert_defect_x_y", anchor, hxy, tol.get("hilbert"));
    rep.add("hilbert_defect_x_x+2y", anchor, hx2, tol.get("hilbert"));
    rep.add("hilbert_defect_random_smooth", anchor, hfg, tol.get("hilbert"));
    double worst = std::max({hxy, hx2, hfg});
    rep.data["hilbert_defect"] = hxy;
    rep.data["max_hilbert_defect"] = worst;
    rep.data["classification"] = worst <= tol.get("hilbert") ? "Hilbertian" : "non-Hilbertian";
    rep.data["graph"] = G.rule;
}

inline void task_laplace(const ScenarioConfig& c, const SpacePtr& S, const Tolerances& tol, Report& rep,
                         std::map<std::string, std::string>& files) {
    double N = dimension_of(c, *S);
    auto G = task_graph(c, S, 1.5, false);
    PointId x0 = c.x0.value_or(metric_center(*S));
    double h = G.h;
    double r_in = c.radii.size() >= 1 ? c.radii[0] : 3.0 * h;
    double r_out = c.radii.size() >= 2 ? c.radii[1] : inf;
    auto cmp = comparison_check(G, x0, N, r_in, r_out);
    rep.add("laplacian_comparison", "Laplacian comparison for the distance function", cmp.max_ratio - 1.0,
            tol.get("lap_rel"));
    rep.data["comparison"] = {{"x0", x0}, {"max_excess", cmp.max_excess}, {"max_ratio", cmp.max_ratio},
                              {"points", cmp.points}};
    std::mt19937_64 rng(c.seed);
    auto f = random_field(S->size(), rng), g = random_field(S->size(), rng);
    auto lap = laplacian_measure(G, g);
    double lhs = 0.0;
    for (PointId x = 0; x < S->size(); ++x) lhs += f[x] * lap.masses[x];
    double e = dirichlet_energy(G, f, g);
    rep.add("laplacian_integration_by_parts", "distributional Laplacian identity", std::fabs(lhs + 2.0 * e),
            1e-10 * std::max(1.0, std::fabs(e)));
    if (S->has_points()) {
        auto lin = laplacian_measure(G, coordinate(*S, 0)).density(*S);
        double worst = 0.0;
        for (PointId x = 0; x < S->size(); ++x)
            if (G.lap_interior[x]) worst = std::max(worst, std::fabs(lin[x]));
        rep.add("laplacian_linear_interior", "harmonic linear functions", worst, tol.get("lap_linear"));
    }
    ScalarField dist(S->size());
    for (PointId y = 0; y < S->size(); ++y) dist[y] = S->d(x0, y);
    auto ld = laplacian_measure(G, dist).density(*S);
    CsvWriter w({"id", "d", "laplacian_d", "interior"});
    for (PointId y = 0; y < S->size(); ++y) w.row(y, dist[y], ld[y], static_cast<int>(G.lap_interior[y]));
    files["laplacian.csv"] = w.str();
}

inline void task_heat(const ScenarioConfig& c, const SpacePtr& S, const Tolerances& tol, Report& rep,
                      std::map<std::string, std::string>& files) {
    auto G = task_graph(c, S, 1.5, false);
    PointId x0 = c.x0.value_or(metric_center(*S));
    double t = c.time.value_or(0.05);
    auto K = heat_kernel(G, x0, t);
    rep.add("kernel_mass", "heat kernel is a probability measure", std::fabs(K.mass - 1.0), tol.get("mass"));
    rep.add("kernel_nonnegative", "heat kernel is a probability measure", -K.min_value, tol.get("mass"));
    rep.add("gaussian_decay_slope", "Gaussian estimate for the heat kernel", K.fit.slope, 0.0, ">");
    rep.data["gaussian_fit"] = {{"slope", K.fit.slope}, {"intercept", K.fit.intercept},
                                {"reference", K.fit.reference}, {"samples", K.fit.samples}};
    HeatSemigroup H(G);
    std::mt19937_64 rng(c.seed);
    auto f = random_field(S->size(), rng);
    auto ht = H.apply(f, t);
    double m0 = 0.0, m1 = 0.0;
    for (PointId x = 0; x < S->size(); ++x) {
        m0 += f[x] * S->weight(x);
        m1 += ht[x] * S->weight(x);
    }
    rep.add("mass_conservation", "heat flow preserves mass", std::fabs(m1 - m0), tol.get("mass"));
    auto twice = H.apply(H.apply(f, 0.5 * t), 0.5 * t);
    double sg = 0.0;
    for (PointId x = 0; x < S->size(); ++x) sg = std::max(sg, std::fabs(twice[x] - ht[x]));
    rep.add("semigroup", "heat semigroup property", sg, tol.get("semigroup"));
    std::vector<double> times = c.t_grid.empty() ? std::vector<double>{0.0, 0.25 * t, 0.5 * t, t, 2.0 * t} : c.t_grid;
    std::sort(times.begin(), times.end());
    double rise = -inf, prev = inf;
    for (double s : times) {
        double e = dirichlet_energy(G, H.apply(f, s));
        if (std::isfinite(prev)) rise = std::max(rise, e - prev);
        prev = e;
    }
    rep.add("energy_monotone", "heat flow as gradient flow of the Dirichlet energy", std::max(rise, 0.0),
            1e-12 * std::max(1.0, dirichlet_energy(G, f)));
    files["kernel.csv"] = kernel_csv(*S, x0, K.row);
}

inline void task_be(const ScenarioConfig& c, const SpacePtr& S, const Tolerances& tol, Report& rep) {
    auto G = task_graph(c, S, 1.5, false);
    ScalarField f;
    if (S->has_points()) {
        f = coordinate(*S, 0);
    } else {
        std::mt19937_64 rng(c.seed);
        f = random_field(S->size(), rng);
    }
    std::vector<double> ts = c.t_grid.empty() ? std::vector<double>{0.01, 0.05} : c.t_grid;
    for (double t : ts)
        if (!(t > 0.0)) throw ConfigError("invalid field 't-grid': Bakry-Emery times must be positive");
    auto s = slope_field(G, f);
    double ms = 0.0;
    for (PointId x = 0; x < S->size(); ++x)
        if (G.interior[x]) ms = std::max(ms, s[x]);
    double be_tol = tol.get("be_factor") * G.h * (1.0 + ms);
    auto rows = bakry_emery_check(G, f, ts, be_tol);
    json jr = json::array();
    for (auto& r : rows) {
        rep.add("bakry_emery_t" + fmt_num(r.t), "Bakry-Emery gradient contraction", r.violation, r.tol);
        jr.push_back({{"t", r.t}, {"violation", r.violation}, {"worst", r.worst}});
    }
    rep.data["bakry_emery"] = jr;
}

// Index of the coordinate that moves along the line, and the transverse one
// with the largest spread.
inline std::pair<std::size_t, std::size_t> line_axes(const MetricMeasureSpace& S, const LineSpec& L) {
    std::size_t dims = S.points()[0].size();
    auto spread = [&](std::size_t a, const std::vector<PointId>& ids) {
        double lo = inf, hi = -inf;
        for (PointId x : ids) {
            lo = std::min(lo, S.points()[x][a]);
            hi = std::max(hi, S.points()[x][a]);
        }
        return hi - lo;
    };
    std::vector<PointId> all(S.size());
    std::iota(all.begin(), all.end(), 0);
    std::size_t along = 0, across = 0;
    double best = -1.0;
    for (std::size_t a = 0; a < dims; ++a)
        if (spread(a, L.ids) > best) {
            best = spread(a, L.ids);
            along = a;
        }
    best = -1.0;
    for (std::size_t a = 0; a < dims; ++a)
        if (a != along && spread(a, all) > best) {
            best = spread(a, all);
            across = a;
        }
    return {along, across};
}

inline void task_pipeline(const ScenarioConfig& c, const SpacePtr& Sp, const Tolerances& tol, Report& rep,
                          std::map<std::string, std::string>& files, bool full) {
    const auto& S = *Sp;
    LineSpec L;
    if (!c.line.empty()) {
        auto j = parse_json(read_file(c.line), "line");
        if (!j.contains("ids") || !j.contains("times")) throw ConfigError("line file needs 'ids' and 'times'");
        L = make_line(S, j.at("ids").get<std::vector<PointId>>(), j.at("times").get<std::vector<double>>(),
                      tol.get("line"));
    } else {
        try {
            L = default_line(S, tol.get("line"));
        } catch (const Error& e) {
            throw ConfigError(std::string("invalid field 'line': ") + e.what());
        }
    }
    const double h = L.step;
    rep.stages.push_back("line");
    rep.add("line_isometry", "standing assumption: the curve is a line", L.max_defect, tol.get("line"));

    rep.stages.push_back("busemann");
    auto B = busemann_field(S, L, tol.get("line"));
    rep.add("busemann_gap", "harmonicity of Busemann functions: b+ + b- = 0", B.max_abs_gap, tol.get("gap"));
    rep.add("busemann_gap_sign", "b+ + b- <= 0 by the triangle inequality", B.max_gap, tol.get("gap"));
    rep.add("busemann_lipschitz", "Busemann functions are 1-Lipschitz", B.lipschitz_excess, tol.get("lipschitz"));
    double span_ratio = (L.t_max - L.t_min) / std::max(4.0 * B.transverse, 1e-300);
    rep.add_verdict("line_span_confidence", "truncation of the Busemann limit", span_ratio, 1.0, ">=",
                    span_ratio >= 1.0 ? Verdict::pass : Verdict::inconclusive);
    rep.data["busemann"] = {{"plus_end", to_string(B.plus_mode)}, {"minus_end", to_string(B.minus_mode)},
                            {"T", B.T}, {"transverse", B.transverse}, {"low_confidence", B.low_confidence}};
    {
        CsvWriter w({"id", "b_plus", "b_minus", "gap", "error_bound"});
        for (PointId x = 0; x < S.size(); ++x) w.row(x, B.b_plus[x], B.b_minus[x], B.gap[x], B.error_bound[x]);
        files["busemann.csv"] = w.str();
    }

    rep.stages.push_back("flow");
    double flow_tol = tol.get("flow_tol_factor") * h * h;
    auto Fp = gradient_flow_map(S, B.b(), h, flow_tol);
    auto Fm = gradient_flow_map(S, B.b(), -h, flow_tol);
    rep.add("flow_slack", "the flow lies in the c-superdifferential of tb",
            std::max(Fp.max_interior_slack, Fm.max_interior_slack), tol.get("flow_slack"));
    rep.add("flow_unreachable_fraction", "boundary truncation of the flow",
            std::max(Fp.unreachable_fraction(), Fm.unreachable_fraction()), tol.get("unreachable_cap"));
    double back = 0.0;
    for (PointId x = 0; x < S.size(); ++x)
        if (!Fp.unreachable[x] && !Fm.unreachable[Fp.target[x]]) back = std::max(back, S.d(Fm.target[Fp.target[x]], x));
    rep.add("flow_inverse", "F_{-t} inverts F_t", back, tol.get("group_cells") * h);
    GraphOptions go;
    go.radius = 1.5 * h;
    auto G = build_graph(Sp, go);
    double t = 5.0 * h;
    auto D = flow_diagnostics(G, B, t, {h, 2.0 * h}, flow_tol);
    rep.add("flow_group_law", "group law of the gradient flow", D.group_law, tol.get("group_cells") * h);
    rep.add("flow_pushforward", "the flow preserves the reference measure", D.pushforward,
            tol.get("pushforward_cells") * h);
    rep.add("flow_energy", "the flow preserves the Dirichlet energy", D.energy, tol.get("energy_cells") * h);
    rep.add("flow_isometry", "the flow acts by isometries", D.isometry, tol.get("isometry_cells") * h);
    rep.data["flow"] = {{"h", h}, {"t", t}, {"flow_tol", flow_tol}, {"core_points", D.core_points},
                        {"unreachable_plus", Fp.unreachable_count}, {"unreachable_minus", Fm.unreachable_count}};

    rep.stages.push_back("quotient");
    auto Q = quotient_split(Sp, B, c.t_grid, flow_tol);
    rep.add("quotient_metric", "the quotient distance is a metric",
            Q.dprime_validation.ok() ? 0.0 : 1.0 + static_cast<double>(Q.dprime_validation.triangle_violation_count), 0.0);
    rep.add("quotient_mass_positive", "quotient measure", Q.mprime_positive ? 0.0 : 1.0, 0.0);
    rep.add("quotient_projection_failures", "projection along flow lines",
            static_cast<double>(Q.proj_failures) / static_cast<double>(S.size()), tol.get("unreachable_cap"));
    rep.add("product_measure", "the splitting map pushes m to m' x L1", Q.product_measure_defect,
            tol.get("product_measure_cells") * h);
    rep.add("smap_tmap_identity", "S and T are mutually inverse",
            Q.smap_tmap_mismatches > 0 ? inf : Q.smap_tmap_defect, tol.get("smap_tmap_cells"));
    rep.data["quotient"] = {{"reps", Q.reps.size()}, {"h", Q.h}, {"t_grid_size", Q.t_grid.size()},
                            {"proj_failures", Q.proj_failures}};
    if (Q.dprime_validation.ok() && Q.mprime_positive) files["quotient.json"] = space_to_json(*Q.as_space()).dump(1);

    rep.stages.push_back("pythagoras");
    PythagorasOptions po;
    po.seed = c.seed;
    auto P = pythagoras_check(Q, L.t_max - L.t_min, po);
    rep.add("pythagoras", "Pythagoras identity for the splitting map", P.max_defect, tol.get("pythagoras"));
    double env = std::max(P.bilip_max / std::sqrt(2.0), P.bilip_min > 0.0 ? 1.0 / (std::sqrt(2.0) * P.bilip_min) : inf);
    rep.add("bilipschitz_envelope", "bi-Lipschitz bound for the splitting map", env,
            1.0 + 1e-9);
    rep.add("quotient_embedding", "the quotient embeds isometrically", P.embedding_defect,
            tol.get("embedding_cells") * h);
    rep.data["pythagoras"] = {{"max_defect", P.max_defect}, {"mean_defect", P.mean_defect},
                              {"bilip_min", P.bilip_min}, {"bilip_max", P.bilip_max}, {"pairs", P.pairs},
                              {"skipped_nodes", P.skipped_nodes}};
    files["pythagoras.csv"] = pythagoras_csv(P);

    if (!full) return;

    rep.stages.push_back("hilbert");
    if (S.has_points() && S.points()[0].size() >= 2) {
        auto [along, across] = line_axes(S, L);
        GraphOptions hg;
        hg.radius = c.stencil_cells.value_or(5.0) * h * (1.0 + 1e-9);
        hg.midpoint_pairs = true;
        auto HG = build_graph(Sp, hg);
        double hd = hilbert_defect(HG, coordinate(S, along), coordinate(S, across));
        rep.add("hilbert_defect", "parallelogram law for the Cheeger energy (infinitesimal Hilbertianity)", hd,
                tol.get("hilbert"));
        rep.data["hilbert_defect"] = hd;
    } else {
        rep.data["hilbert_defect"] = nullptr;
    }

    rep.stages.push_back("cd");
    double N = dimension_of(c, S);
    if (Q.reps.size() >= 2 && N - 1.0 >= 1.0 && Q.dprime_validation.ok() && Q.mprime_positive) {
        auto QS = Q.as_space();
        PointId a = 0, far = 0;
        for (PointId r = 0; r < QS->size(); ++r)
            if (QS->d(a, r) > QS->d(a, far)) far = r;
        double rad = QS->diameter() / 3.0;
        std::vector<PointId> s0, s1;
        for (PointId r = 0; r < QS->size(); ++r) {
            if (within_radius(QS->d(a, r), rad)) s0.push_back(r);
            if (within_radius(QS->d(far, r), rad)) s1.push_back(r);
        }
        auto mu0 = ProbMeasure::uniform(QS, s0), mu1 = ProbMeasure::uniform(QS, s1);
        CdOptions opt;
        opt.N_values = {N - 1.0};
        opt.cd_tol = tol.get("cd_tol") >= 0.0 ? tol.get("cd_tol") : default_cd_tol(mu0, mu1, tol.get("cd_factor"));
        auto r = cd_convexity_check(mu0, mu1, N - 1.0, opt);
        rep.add_verdict("quotient_cd", "the quotient satisfies CD(0,N-1)", r.defects[0], r.cd_tol, "<=", r.verdicts[0]);
        rep.data["quotient_cd"] = entropy_to_json(r);
    } else {
        rep.data["quotient_cd"] = "skipped: quotient is a point, N-1 < 1, or the quotient is invalid";
    }
}

}  // namespace detail

// Runs a scenario without touching the file system.
inline ScenarioOutput execute_scenario(const ScenarioConfig& c) {
    validate_config(c);
    auto tol = parse_overrides(c.tol_overrides);
    SpacePtr S;
    bool check = c.task != "validate";
    try {
        if (!c.weights.empty()) S = load_space_csv(c.space, c.weights, check);
        else S = load_space(c.space, check);
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid field 'space': ") + e.what());
    }
    if (c.x0 && *c.x0 >= S->size()) throw ConfigError("invalid field 'x0': out of range");
    ScenarioOutput out;
    Report& rep = out.report;
    rep.task = c.task;
    rep.space_label = S->label();
    rep.seed = c.seed;
    auto& files = out.files;
    if (c.task == "validate") detail::task_validate(S, tol, rep);
    else if (c.task == "w2") detail::task_w2(c, S, tol, rep, files);
    else if (c.task == "cd") detail::task_cd(c, S, tol, rep, files);
    else if (c.task == "hilbert") detail::task_hilbert(c, S, tol, rep);
    else if (c.task == "laplace") detail::task_laplace(c, S, tol, rep, files);
    else if (c.task == "heat") detail::task_heat(c, S, tol, rep, files);
    else if (c.task == "be") detail::task_be(c, S, tol, rep);
    else if (c.task == "split") detail::task_pipeline(c, S, tol, rep, files, false);
    else detail::task_pipeline(c, S, tol, rep, files, true);
    out.exit_code = rep.exit_code();
    files["report.json"] = rep.to_json(detail::timestamp_now()).dump(2) + "\n";
    return out;
}

// Exit status: 0 pass, 1 malformed config, 2 failed check, 3 inconclusive.
// Files are written only after every computation succeeded.
inline int run_scenario(const ScenarioConfig& c, std::ostream& err = std::cerr) {
    ScenarioOutput out;
    try {
        out = execute_scenario(c);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        err << "input error: " << e.what() << "\n";
        return 1;
    }
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) {
        err << "config error: invalid field 'out': " << ec.message() << "\n";
        return 1;
    }
    for (auto& [name, text] : out.files) write_text((fs::path(c.out) / name).string(), text);
    return out.exit_code;
}

}  // namespace mms

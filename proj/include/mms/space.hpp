#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mms/common.hpp"

namespace mms {

struct GeneratorSpec;

struct EuclideanGridSpec {
    std::vector<std::size_t> dims;
    double h = 1.0;
};

// p = inf gives the sup-norm plane
struct NormedPlaneSpec {
    double p = 2.0;
    double side = 1.0;
    double h = 0.1;
    double width = 0.0;  // extent of the second coordinate, 0 means side
};

struct CylinderSpec {
    double radius = 1.0;
    double length = 1.0;
    double h = 0.1;
};

struct ProductSpec {
    std::shared_ptr<const GeneratorSpec> factor;
    double a = 0.0;
    double b = 1.0;
    double h = 0.1;
};

// Cone over a circle of length `angle`, truncated at `radius`.
struct ConeSpec {
    double angle = 2.0 * 3.14159265358979323846;
    double radius = 1.0;
    double h = 0.1;
};

struct GeneratorSpec {
    std::variant<EuclideanGridSpec, NormedPlaneSpec, CylinderSpec, ProductSpec, ConeSpec> kind;
};

// Natural straight line shipped with generated spaces.
struct LineHint {
    std::vector<PointId> ids;
    std::vector<double> times;
};

class MetricMeasureSpace {
public:
    struct Extras {
        std::string label;
        std::vector<std::vector<double>> points;  // plotting / tie-break coordinates only
        double spacing = 0.0;                      // lattice step, 0 when not a lattice
        double intrinsic_dim = 0.0;                // 0 when unknown
        std::optional<GeneratorSpec> generator;
        std::optional<LineHint> line;
    };

    // Shape checks only. Metric axioms are reported by validate_space.
    MetricMeasureSpace(SquareMatrix dist, std::vector<double> weight)
        : MetricMeasureSpace(std::move(dist), std::move(weight), Extras()) {}
    MetricMeasureSpace(SquareMatrix dist, std::vector<double> weight, Extras extras)
        : dist_(std::move(dist)), weight_(std::move(weight)), extras_(std::move(extras)) {
        if (dist_.size() == 0) throw Error("space must have at least one point");
        if (weight_.size() != dist_.size()) throw Error("weight vector length differs from n");
        if (!extras_.points.empty() && extras_.points.size() != dist_.size())
            throw Error("point coordinate count differs from n");
        for (double w : weight_)
            if (!std::isfinite(w)) throw Error("non-finite weight");
        for (double d : dist_.data())
            if (!std::isfinite(d)) throw Error("non-finite distance");
    }

    std::size_t size() const { return weight_.size(); }
    double d(PointId i, PointId j) const { return dist_(i, j); }
    const SquareMatrix& dist() const { return dist_; }
    const std::vector<double>& weight() const { return weight_; }
    double weight(PointId i) const { return weight_[i]; }
    const std::string& label() const { return extras_.label; }
    const std::vector<std::vector<double>>& points() const { return extras_.points; }
    bool has_points() const { return !extras_.points.empty(); }
    double spacing() const { return extras_.spacing; }
    double intrinsic_dim() const { return extras_.intrinsic_dim; }
    const std::optional<GeneratorSpec>& generator() const { return extras_.generator; }
    const std::optional<LineHint>& line_hint() const { return extras_.line; }
    const Extras& extras() const { return extras_; }

    double total_mass() const {
        double s = 0.0;
        for (double w : weight_) s += w;
        return s;
    }

    double diameter() const {
        double m = 0.0;
        for (double d : dist_.data()) m = std::max(m, d);
        return m;
    }

    double diameter_of(const std::vector<PointId>& ids) const {
        double m = 0.0;
        for (PointId a : ids)
            for (PointId b : ids) m = std::max(m, dist_(a, b));
        return m;
    }

    bool same_data(const MetricMeasureSpace& o) const {
        return dist_ == o.dist_ && weight_ == o.weight_;
    }

private:
    SquareMatrix dist_;
    std::vector<double> weight_;
    Extras extras_;
};

using SpacePtr = std::shared_ptr<const MetricMeasureSpace>;

inline bool same_space(const SpacePtr& a, const SpacePtr& b) {
    return a && b && (a.get() == b.get() || a->same_data(*b));
}

struct TriangleViolation {
    PointId i, k, j;  // d(i,j) > d(i,k) + d(k,j)
    double excess;
};

struct ValidationReport {
    bool symmetric = true;
    bool zero_diagonal = true;
    bool positive_off_diagonal = true;
    bool positive_weights = true;
    std::size_t triangle_violation_count = 0;
    double worst_triangle_excess = 0.0;
    std::vector<TriangleViolation> triangle_violations;  // first few
    std::vector<std::string> messages;

    bool ok() const {
        return symmetric && zero_diagonal && positive_off_diagonal && positive_weights &&
               triangle_violation_count == 0;
    }
};

// Symmetry and the zero diagonal are compared bit for bit. The triangle
// inequality is tested as d(i,j) <= (d(i,k)+d(k,j)) * (1 + ulps*eps) since
// square roots of lattice offsets are not exactly additive.
inline ValidationReport validate_space(const MetricMeasureSpace& s, double ulps = 4.0,
                                       std::size_t keep = 16) {
    ValidationReport r;
    const std::size_t n = s.size();
    const auto& D = s.dist();
    for (std::size_t i = 0; i < n; ++i) {
        if (D(i, i) != 0.0) {
            r.zero_diagonal = false;
            r.messages.push_back("nonzero diagonal at " + std::to_string(i));
        }
        if (!(s.weight(i) > 0.0)) {
            r.positive_weights = false;
            r.messages.push_back("nonpositive weight at " + std::to_string(i));
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (D(i, j) != D(j, i)) {
                r.symmetric = false;
                r.messages.push_back("asymmetric pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
            if (!(D(i, j) > 0.0) || !(D(j, i) > 0.0)) {
                r.positive_off_diagonal = false;
                r.messages.push_back("zero distance between distinct points (" + std::to_string(i) + "," +
                                     std::to_string(j) + ")");
            }
        }
    }
    const double slack = 1.0 + ulps * std::numeric_limits<double>::epsilon();
    for (std::size_t i = 0; i < n; ++i) {
        auto ri = D.row(i);
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            double dik = ri[k];
            auto rk = D.row(k);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i || j == k) continue;
                double bound = (dik + rk[j]) * slack;
                if (ri[j] > bound) {
                    ++r.triangle_violation_count;
                    double ex = ri[j] - (dik + rk[j]);
                    r.worst_triangle_excess = std::max(r.worst_triangle_excess, ex);
                    if (r.triangle_violations.size() < keep) r.triangle_violations.push_back({i, k, j, ex});
                }
            }
        }
    }
    if (r.triangle_violation_count > 0)
        r.messages.push_back(std::to_string(r.triangle_violation_count) + " triangle violations");
    return r;
}

// ---------------------------------------------------------------- generators

namespace detail {

inline std::size_t steps_in(double length, double h, const char* what) {
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(std::string(what) + ": spacing must be positive");
    if (!(length > 0.0) || !std::isfinite(length)) throw Error(std::string(what) + ": empty extent");
    double q = length / h;
    auto k = static_cast<std::size_t>(std::llround(q));
    if (k < 1) throw Error(std::string(what) + ": extent shorter than one step");
    return k;
}

inline SpacePtr make_euclidean_grid(const EuclideanGridSpec& g) {
    if (g.dims.empty()) throw Error("euclidean_grid: no dimensions");
    if (!(g.h > 0.0) || !std::isfinite(g.h)) throw Error("euclidean_grid: spacing must be positive");
    std::size_t n = 1;
    for (auto d : g.dims) {
        if (d < 2) throw Error("euclidean_grid: each axis needs at least 2 points");
        n *= d;
    }
    const std::size_t dim = g.dims.size();
    std::vector<std::vector<long>> idx(n, std::vector<long>(dim));
    for (std::size_t p = 0; p < n; ++p) {
        std::size_t rem = p;
        for (std::size_t a = dim; a-- > 0;) {
            idx[p][a] = static_cast<long>(rem % g.dims[a]);
            rem /= g.dims[a];
        }
    }
    SquareMatrix D(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) {
            double s = 0.0;
            for (std::size_t a = 0; a < dim; ++a) {
                double x = static_cast<double>(std::labs(idx[p][a] - idx[q][a])) * g.h;
                s += x * x;
            }
            D(p, q) = std::sqrt(s);
        }
    MetricMeasureSpace::Extras ex;
    ex.label = "euclidean_grid";
    ex.spacing = g.h;
    ex.intrinsic_dim = static_cast<double>(dim);
    ex.points.resize(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t a = 0; a < dim; ++a) ex.points[p].push_back(static_cast<double>(idx[p][a]) * g.h);
    ex.generator = GeneratorSpec{g};
    LineHint line;
    for (std::size_t p = 0; p < n; ++p) {
        bool on = true;
        for (std::size_t a = 1; a < dim; ++a)
            if (idx[p][a] != static_cast<long>(g.dims[a] / 2)) on = false;
        if (on) {
            line.ids.push_back(p);
            line.times.push_back(static_cast<double>(idx[p][0]) * g.h);
        }
    }
    ex.line = line;
    double w = std::pow(g.h, static_cast<double>(dim));
    return std::make_shared<MetricMeasureSpace>(std::move(D), std::vector<double>(n, w), std::move(ex));
}

inline SpacePtr make_normed_plane(const NormedPlaneSpec& g) {
    if (!(g.p >= 1.0)) throw Error("normed_plane: p must be at least 1");
    std::size_t m = steps_in(g.side, g.h, "normed_plane") + 1;
    std::size_t w = g.width > 0.0 ? steps_in(g.width, g.h, "normed_plane") + 1 : m;
    std::size_t n = m * w;
    auto norm = [&](double a, double b) {
        if (std::isinf(g.p)) return std::max(a, b);
        if (g.p == 1.0) return a + b;
        if (g.p == 2.0) return std::sqrt(a * a + b * b);
        return std::pow(std::pow(a, g.p) + std::pow(b, g.p), 1.0 / g.p);
    };
    SquareMatrix D(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) {
            long di = std::labs(static_cast<long>(p / w) - static_cast<long>(q / w));
            long dj = std::labs(static_cast<long>(p % w) - static_cast<long>(q % w));
            D(p, q) = norm(static_cast<double>(di) * g.h, static_cast<double>(dj) * g.h);
        }
    MetricMeasureSpace::Extras ex;
    ex.label = "normed_plane";
    ex.spacing = g.h;
    ex.intrinsic_dim = 2.0;
    ex.generator = GeneratorSpec{g};
    ex.points.resize(n);
    for (std::size_t p = 0; p < n; ++p)
        ex.points[p] = {static_cast<double>(p / w) * g.h, static_cast<double>(p % w) * g.h};
    LineHint line;
    std::size_t mid = (w - 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        line.ids.push_back(i * w + mid);
        line.times.push_back((static_cast<double>(i) - static_cast<double>(m - 1) / 2.0) * g.h);
    }
    ex.line = line;
    return std::make_shared<MetricMeasureSpace>(std::move(D), std::vector<double>(n, g.h * g.h), std::move(ex));
}

inline SpacePtr make_cylinder(const CylinderSpec& g) {
    if (!(g.radius > 0.0)) throw Error("cylinder: radius must be positive");
    const double two_pi = 2.0 * 3.14159265358979323846;
    std::size_t mt = std::max<std::size_t>(3, steps_in(two_pi * g.radius, g.h, "cylinder"));
    std::size_t nz = steps_in(g.length, g.h, "cylinder") + 1;
    double arc = two_pi * g.radius / static_cast<double>(mt);
    std::size_t n = mt * nz;
    SquareMatrix D(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) {
            long dt = std::labs(static_cast<long>(p / nz) - static_cast<long>(q / nz));
            dt = std::min<long>(dt, static_cast<long>(mt) - dt);
            long dz = std::labs(static_cast<long>(p % nz) - static_cast<long>(q % nz));
            double a = static_cast<double>(dt) * arc, b = static_cast<double>(dz) * g.h;
            D(p, q) = std::sqrt(a * a + b * b);
        }
    MetricMeasureSpace::Extras ex;
    ex.label = "cylinder";
    ex.spacing = g.h;
    ex.intrinsic_dim = 2.0;
    ex.generator = GeneratorSpec{g};
    ex.points.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        double th = two_pi * static_cast<double>(p / nz) / static_cast<double>(mt);
        ex.points[p] = {g.radius * std::cos(th), g.radius * std::sin(th), static_cast<double>(p % nz) * g.h};
    }
    LineHint line;
    for (std::size_t k = 0; k < nz; ++k) {
        line.ids.push_back(k);
        line.times.push_back(static_cast<double>(k) * g.h - g.length / 2.0);
    }
    ex.line = line;
    return std::make_shared<MetricMeasureSpace>(std::move(D), std::vector<double>(n, arc * g.h), std::move(ex));
}

inline SpacePtr make_cone(const ConeSpec& g) {
    if (!(g.angle > 0.0) || !std::isfinite(g.angle)) throw Error("cone: angle must be positive");
    const double pi = 3.14159265358979323846;
    std::size_t K = steps_in(g.radius, g.h, "cone");
    std::vector<double> r{0.0}, th{0.0}, w{g.angle * g.h * g.h / 8.0};
    std::vector<PointId> ray{0};
    std::vector<double> ray_t{0.0};
    for (std::size_t k = 1; k <= K; ++k) {
        double rk = static_cast<double>(k) * g.h;
        auto nk = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(g.angle * static_cast<double>(k))));
        for (std::size_t j = 0; j < nk; ++j) {
            if (j == 0) {
                ray.push_back(r.size());
                ray_t.push_back(rk);
            }
            r.push_back(rk);
            th.push_back(g.angle * static_cast<double>(j) / static_cast<double>(nk));
            w.push_back(g.angle * rk / static_cast<double>(nk) * g.h);
        }
    }
    std::size_t n = r.size();
    SquareMatrix D(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q) continue;
            double phi = std::fabs(th[p] - th[q]);
            phi = std::min(phi, g.angle - phi);
            if (phi >= pi) {
                D(p, q) = r[p] + r[q];
            } else {
                double s = std::sin(phi / 2.0);
                double dr = r[p] - r[q];
                D(p, q) = std::sqrt(dr * dr + 4.0 * (r[p] * r[q]) * s * s);
            }
        }
    MetricMeasureSpace::Extras ex;
    ex.label = "cone";
    ex.spacing = g.h;
    ex.intrinsic_dim = 2.0;
    ex.generator = GeneratorSpec{g};
    ex.points.resize(n);
    for (std::size_t p = 0; p < n; ++p) ex.points[p] = {r[p] * std::cos(th[p]), r[p] * std::sin(th[p])};
    ex.line = LineHint{ray, ray_t};
    return std::make_shared<MetricMeasureSpace>(std::move(D), std::move(w), std::move(ex));
}

inline SpacePtr generate(const GeneratorSpec& spec);

inline SpacePtr make_product(const ProductSpec& g) {
    if (!g.factor) throw Error("product: missing factor");
    if (!(g.b > g.a)) throw Error("product: empty interval");
    SpacePtr A = generate(*g.factor);
    std::size_t ns = steps_in(g.b - g.a, g.h, "product") + 1;
    std::size_t na = A->size(), n = na * ns;
    SquareMatrix D(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) {
            double da = A->d(p / ns, q / ns);
            double ds = static_cast<double>(std::labs(static_cast<long>(p % ns) - static_cast<long>(q % ns))) * g.h;
            D(p, q) = std::sqrt(da * da + ds * ds);
        }
    std::vector<double> w(n);
    for (std::size_t p = 0; p < n; ++p) w[p] = A->weight(p / ns) * g.h;
    MetricMeasureSpace::Extras ex;
    ex.label = "product(" + A->label() + ")";
    ex.spacing = g.h;
    ex.intrinsic_dim = A->intrinsic_dim() + 1.0;
    ex.generator = GeneratorSpec{g};
    ex.points.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        if (A->has_points()) ex.points[p] = A->points()[p / ns];
        ex.points[p].push_back(g.a + static_cast<double>(p % ns) * g.h);
    }
    LineHint line;
    for (std::size_t k = 0; k < ns; ++k) {
        line.ids.push_back(k);
        line.times.push_back(g.a + static_cast<double>(k) * g.h);
    }
    ex.line = line;
    return std::make_shared<MetricMeasureSpace>(std::move(D), std::move(w), std::move(ex));
}

inline SpacePtr generate(const GeneratorSpec& spec) {
    return std::visit(
        [](const auto& g) -> SpacePtr {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, EuclideanGridSpec>) return make_euclidean_grid(g);
            else if constexpr (std::is_same_v<T, NormedPlaneSpec>) return make_normed_plane(g);
            else if constexpr (std::is_same_v<T, CylinderSpec>) return make_cylinder(g);
            else if constexpr (std::is_same_v<T, ProductSpec>) return make_product(g);
            else return make_cone(g);
        },
        spec.kind);
}

}  // namespace detail

inline SpacePtr generate_space(const GeneratorSpec& spec) { return detail::generate(spec); }

inline SpacePtr euclidean_grid(std::vector<std::size_t> dims, double h) {
    return generate_space(GeneratorSpec{EuclideanGridSpec{std::move(dims), h}});
}
inline SpacePtr normed_plane(double p, double side, double h, double width = 0.0) {
    return generate_space(GeneratorSpec{NormedPlaneSpec{p, side, h, width}});
}
inline SpacePtr cylinder(double radius, double length, double h) {
    return generate_space(GeneratorSpec{CylinderSpec{radius, length, h}});
}
inline SpacePtr product(const GeneratorSpec& factor, double a, double b, double h) {
    return generate_space(GeneratorSpec{ProductSpec{std::make_shared<GeneratorSpec>(factor), a, b, h}});
}
inline SpacePtr cone(double angle, double radius, double h) {
    return generate_space(GeneratorSpec{ConeSpec{angle, radius, h}});
}

// ---------------------------------------------------------------- geodesics

struct DiscreteGeodesic {
    std::vector<PointId> indices;
    std::vector<double> times;
    PointId from = 0, to = 0;
    double speed = 0.0;     // d(from, to)
    double geo_tol = 0.0;   // worst |d(z_a,z_b) - |t_a-t_b| d| / d
    bool over_tolerance = false;
};

// Absolute ceiling on the chain error before a geodesic is flagged.
inline double geodesic_ceiling(const MetricMeasureSpace& s) {
    if (s.spacing() > 0.0) return s.spacing() * std::sqrt(std::max(1.0, s.intrinsic_dim()));
    return 1e-9;
}

// Point best matching time k/steps on a geodesic from i to j. Scores are
// symmetric under (i,j,k) -> (j,i,steps-k) so reversed chains agree.
inline PointId geodesic_point(const MetricMeasureSpace& s, PointId i, PointId j, std::size_t k,
                              std::size_t steps, double* score = nullptr) {
    if (k == 0 || i == j) {
        if (score) *score = 0.0;
        return i;
    }
    if (k == steps) {
        if (score) *score = 0.0;
        return j;
    }
    const double d = s.d(i, j);
    const double a = d * (static_cast<double>(k) / static_cast<double>(steps));
    const double b = d * (static_cast<double>(steps - k) / static_cast<double>(steps));
    const double tie = 1e-12 * d;
    PointId best = npos;
    double best_e = inf;
    auto ri = s.dist().row(i), rj = s.dist().row(j);
    for (PointId z = 0; z < s.size(); ++z) {
        double e = std::max(std::fabs(ri[z] - a), std::fabs(rj[z] - b));
        if (e < best_e - tie) {
            best_e = e;
            best = z;
        }
    }
    if (score) *score = best_e;
    return best;
}

inline DiscreteGeodesic discrete_geodesic(const MetricMeasureSpace& s, PointId i, PointId j, std::size_t steps) {
    if (i >= s.size() || j >= s.size()) throw Error("geodesic endpoint out of range");
    if (steps < 1) throw Error("geodesic needs at least one step");
    DiscreteGeodesic g;
    g.from = i;
    g.to = j;
    g.speed = s.d(i, j);
    for (std::size_t k = 0; k <= steps; ++k) {
        g.indices.push_back(geodesic_point(s, i, j, k, steps));
        g.times.push_back(static_cast<double>(k) / static_cast<double>(steps));
    }
    if (g.speed > 0.0) {
        double worst = 0.0;
        for (std::size_t a = 0; a <= steps; ++a)
            for (std::size_t b = a + 1; b <= steps; ++b) {
                double want = static_cast<double>(b - a) / static_cast<double>(steps) * g.speed;
                worst = std::max(worst, std::fabs(s.d(g.indices[a], g.indices[b]) - want));
            }
        g.geo_tol = worst / g.speed;
        g.over_tolerance = worst > geodesic_ceiling(s);
    }
    return g;
}

// ---------------------------------------------------------------- balls

inline bool within_radius(double d, double r) { return d <= r + 1e-12 * std::max(1.0, r); }

inline double ball_mass(const MetricMeasureSpace& s, PointId x0, double r) {
    double m = 0.0;
    for (PointId y = 0; y < s.size(); ++y)
        if (within_radius(s.d(x0, y), r)) m += s.weight(y);
    return m;
}

struct BishopGromovRow {
    double r = 0.0, R = 0.0;
    double ratio = 0.0;  // m(B_r)/m(B_R)
    double bound = 0.0;  // (r/R)^N
    bool pass = false;
};

// Consecutive radius pairs, or every ordered pair r < R when all_pairs is set.
inline std::vector<BishopGromovRow> bishop_gromov_profile(const MetricMeasureSpace& s, PointId x0,
                                                          std::vector<double> radii, double N,
                                                          double tol = 0.1, bool all_pairs = false) {
    if (x0 >= s.size()) throw Error("center out of range");
    if (!(N >= 1.0)) throw Error("dimension N must be at least 1");
    std::sort(radii.begin(), radii.end());
    for (double r : radii)
        if (!(r > 0.0)) throw Error("radii must be positive");
    std::vector<double> mass;
    for (double r : radii) mass.push_back(ball_mass(s, x0, r));
    std::vector<BishopGromovRow> rows;
    for (std::size_t a = 0; a < radii.size(); ++a)
        for (std::size_t b = a + 1; b < radii.size(); ++b) {
            if (!all_pairs && b != a + 1) continue;
            if (radii[a] == radii[b]) continue;
            BishopGromovRow row;
            row.r = radii[a];
            row.R = radii[b];
            row.ratio = mass[a] / mass[b];
            row.bound = std::isinf(N) ? 0.0 : std::pow(radii[a] / radii[b], N);
            row.pass = row.ratio >= row.bound - tol;
            rows.push_back(row);
        }
    return rows;
}

}  // namespace mms

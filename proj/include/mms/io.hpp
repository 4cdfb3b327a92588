#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "mms/curvature.hpp"
#include "mms/splitting.hpp"

namespace mms {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- generator specs

inline json generator_to_json(const GeneratorSpec& g) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, EuclideanGridSpec>) {
                return {{"type", "euclidean_grid"}, {"dims", s.dims}, {"h", s.h}};
            } else if constexpr (std::is_same_v<T, NormedPlaneSpec>) {
                json p = std::isinf(s.p) ? json("inf") : json(s.p);
                json out = {{"type", "normed_plane"}, {"p", p}, {"side", s.side}, {"h", s.h}};
                if (s.width > 0.0) out["width"] = s.width;
                return out;
            } else if constexpr (std::is_same_v<T, CylinderSpec>) {
                return {{"type", "cylinder"}, {"radius", s.radius}, {"length", s.length}, {"h", s.h}};
            } else if constexpr (std::is_same_v<T, ProductSpec>) {
                return {{"type", "product"}, {"factor", generator_to_json(*s.factor)}, {"interval", {s.a, s.b}}, {"h", s.h}};
            } else {
                return {{"type", "cone"}, {"angle", s.angle}, {"radius", s.radius}, {"h", s.h}};
            }
        },
        g.kind);
}

namespace detail {

inline double num_field(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(std::string("generator field '") + key + "' is missing");
    const auto& v = j.at(key);
    if (v.is_string()) {
        auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return inf;
        throw Error(std::string("generator field '") + key + "' is not a number");
    }
    if (!v.is_number()) throw Error(std::string("generator field '") + key + "' is not a number");
    return v.get<double>();
}

}  // namespace detail

inline GeneratorSpec generator_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
        throw Error("generator spec needs a string field 'type'");
    auto type = j.at("type").get<std::string>();
    if (type == "euclidean_grid") {
        if (!j.contains("dims") || !j.at("dims").is_array()) throw Error("generator field 'dims' is missing");
        EuclideanGridSpec s;
        for (auto& d : j.at("dims")) {
            if (!d.is_number_integer() || d.get<long>() < 2) throw Error("generator field 'dims' needs integers >= 2");
            s.dims.push_back(d.get<std::size_t>());
        }
        s.h = detail::num_field(j, "h");
        return {s};
    }
    if (type == "normed_plane") {
        NormedPlaneSpec s{detail::num_field(j, "p"), detail::num_field(j, "side"), detail::num_field(j, "h")};
        if (j.contains("width")) s.width = detail::num_field(j, "width");
        return {s};
    }
    if (type == "cylinder") return {CylinderSpec{detail::num_field(j, "radius"), detail::num_field(j, "length"), detail::num_field(j, "h")}};
    if (type == "cone") return {ConeSpec{detail::num_field(j, "angle"), detail::num_field(j, "radius"), detail::num_field(j, "h")}};
    if (type == "product") {
        if (!j.contains("factor")) throw Error("generator field 'factor' is missing");
        if (!j.contains("interval") || !j.at("interval").is_array() || j.at("interval").size() != 2)
            throw Error("generator field 'interval' must be [a, b]");
        ProductSpec s;
        s.factor = std::make_shared<GeneratorSpec>(generator_from_json(j.at("factor")));
        s.a = j.at("interval")[0].get<double>();
        s.b = j.at("interval")[1].get<double>();
        s.h = detail::num_field(j, "h");
        return {s};
    }
    throw Error("unknown generator type '" + type + "'");
}

// ---------------------------------------------------------------- spaces

// {"label", "n", "points"?, "dist": rows | {"generator": spec}, "weight"}
inline json space_to_json(const MetricMeasureSpace& s, bool compact = false) {
    json j;
    j["label"] = s.label();
    j["n"] = s.size();
    if (compact && s.generator()) {
        j["dist"] = {{"generator", generator_to_json(*s.generator())}};
        return j;
    }
    if (s.has_points()) j["points"] = s.points();
    json rows = json::array();
    for (PointId i = 0; i < s.size(); ++i) {
        auto r = s.dist().row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["dist"] = rows;
    j["weight"] = s.weight();
    if (s.spacing() > 0.0) j["spacing"] = s.spacing();
    if (s.intrinsic_dim() > 0.0) j["dimension"] = s.intrinsic_dim();
    return j;
}

inline void require_valid(const MetricMeasureSpace& s, double ulps = 4.0) {
    auto rep = validate_space(s, ulps);
    if (!rep.ok()) {
        std::string msg = "invalid metric measure space:";
        for (auto& m : rep.messages) msg += " " + m + ";";
        throw Error(msg);
    }
}

inline SpacePtr space_from_json(const json& j, bool check = true) {
    if (!j.is_object()) throw Error("space file must be a JSON object");
    if (j.contains("generator")) return generate_space(generator_from_json(j.at("generator")));
    if (!j.contains("dist")) throw Error("space field 'dist' is missing");
    const auto& d = j.at("dist");
    if (d.is_object()) {
        if (!d.contains("generator")) throw Error("space field 'dist' object needs 'generator'");
        return generate_space(generator_from_json(d.at("generator")));
    }
    if (!j.contains("weight") || !j.at("weight").is_array()) throw Error("space field 'weight' is missing");
    auto weight = j.at("weight").get<std::vector<double>>();
    std::size_t n = weight.size();
    if (j.contains("n") && j.at("n").get<std::size_t>() != n) throw Error("space field 'n' disagrees with 'weight'");
    std::vector<double> flat;
    if (!d.is_array()) throw Error("space field 'dist' must be an array");
    if (!d.empty() && d[0].is_array()) {
        if (d.size() != n) throw Error("space field 'dist' needs n rows");
        for (auto& row : d) {
            if (!row.is_array() || row.size() != n) throw Error("space field 'dist' needs n entries per row");
            for (auto& v : row) flat.push_back(v.get<double>());
        }
    } else {
        flat = d.get<std::vector<double>>();
        if (flat.size() != n * n) throw Error("space field 'dist' needs n*n entries");
    }
    MetricMeasureSpace::Extras ex;
    if (j.contains("label")) ex.label = j.at("label").get<std::string>();
    if (j.contains("points")) ex.points = j.at("points").get<std::vector<std::vector<double>>>();
    if (j.contains("spacing")) ex.spacing = j.at("spacing").get<double>();
    if (j.contains("dimension")) ex.intrinsic_dim = j.at("dimension").get<double>();
    auto s = std::make_shared<MetricMeasureSpace>(SquareMatrix(n, std::move(flat)), std::move(weight), std::move(ex));
    if (check) require_valid(*s);
    return s;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(what + " is not valid JSON: " + e.what());
    }
}

// Path to a JSON file, or inline JSON text starting with '{'.
inline SpacePtr load_space(const std::string& spec, bool check = true) {
    std::string text = (!spec.empty() && spec.front() == '{') ? spec : read_file(spec);
    try {
        return space_from_json(parse_json(text, "space"), check);
    } catch (const json::exception& e) {
        throw Error(std::string("malformed space: ") + e.what());
    }
}

inline std::vector<std::vector<double>> read_csv_numbers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (...) {
                throw Error("non-numeric CSV cell '" + cell + "' in " + path);
            }
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

// n x n distance matrix CSV plus a weights CSV (one column or one row).
inline SpacePtr load_space_csv(const std::string& dist_path, const std::string& weight_path, bool check = true) {
    auto rows = read_csv_numbers(dist_path);
    std::size_t n = rows.size();
    std::vector<double> flat;
    for (auto& r : rows) {
        if (r.size() != n) throw Error("distance CSV is not square");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    std::vector<double> w;
    for (auto& r : read_csv_numbers(weight_path)) w.insert(w.end(), r.begin(), r.end());
    if (w.size() != n) throw Error("weight CSV length differs from the distance matrix");
    MetricMeasureSpace::Extras ex;
    ex.label = dist_path;
    auto s = std::make_shared<MetricMeasureSpace>(SquareMatrix(n, std::move(flat)), std::move(w), std::move(ex));
    if (check) require_valid(*s);
    return s;
}

// ---------------------------------------------------------------- measures and fields

inline json measure_to_json(const ProbMeasure& mu) {
    return {{"space_ref", mu.space()->label()}, {"density", mu.density()}};
}

inline ProbMeasure measure_from_json(const SpacePtr& space, const json& j) {
    if (!j.is_object() || !j.contains("density")) throw Error("measure field 'density' is missing");
    return ProbMeasure::from_density(space, j.at("density").get<std::vector<double>>());
}

inline json field_to_json(const ScalarField& f) { return json(f); }

inline std::string fmt_num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    template <class... T>
    void row(const T&... cells) {
        std::vector<std::string> r{cell(cells)...};
        rows_.push_back(std::move(r));
    }

    std::string str() const {
        std::string out;
        for (std::size_t k = 0; k < header_.size(); ++k) out += (k ? "," : "") + header_[k];
        out += "\n";
        for (auto& r : rows_) {
            for (std::size_t k = 0; k < r.size(); ++k) out += (k ? "," : "") + r[k];
            out += "\n";
        }
        return out;
    }

private:
    static std::string cell(double v) { return fmt_num(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline std::string coupling_csv(const Coupling& c) {
    CsvWriter w({"i", "j", "mass"});
    for (auto& e : c.entries) w.row(e.i, e.j, e.mass);
    return w.str();
}

inline std::string entropy_csv(const EntropyReport& r) {
    std::vector<std::string> header{"t"};
    for (double n : r.N_values) header.push_back("U_" + (std::isinf(n) ? std::string("inf") : fmt_num(n)));
    std::string out;
    for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + header[k];
    out += "\n";
    for (std::size_t t = 0; t < r.t_grid.size(); ++t) {
        out += fmt_num(r.t_grid[t]);
        for (std::size_t n = 0; n < r.N_values.size(); ++n) out += "," + fmt_num(r.values[n][t]);
        out += "\n";
    }
    return out;
}

inline json entropy_to_json(const EntropyReport& r) {
    json j;
    json ns = json::array();
    for (double n : r.N_values) ns.push_back(std::isinf(n) ? json("inf") : json(n));
    j["N_values"] = ns;
    j["t_grid"] = r.t_grid;
    j["values"] = r.values;
    j["defects"] = r.defects;
    json v = json::array();
    for (auto x : r.verdicts) v.push_back(to_string(x));
    j["verdicts"] = v;
    j["cd_tol"] = r.cd_tol;
    j["w2"] = r.w2;
    j["degenerate"] = r.degenerate;
    j["over_tolerance"] = r.over_tolerance;
    return j;
}

inline std::string kernel_csv(const MetricMeasureSpace& s, PointId x, const std::vector<double>& row) {
    CsvWriter w({"id", "d", "rho"});
    for (PointId y = 0; y < s.size(); ++y) w.row(y, s.d(x, y), row[y]);
    return w.str();
}

inline std::string pythagoras_csv(const PythagorasReport& r) {
    CsvWriter w({"d_TT_sq", "dprime_sq_plus_dt_sq"});
    for (auto [a, b] : r.scatter) w.row(a, b);
    return w.str();
}

inline SpacePtr quotient_as_space(const QuotientSpace& q) { return q.as_space(); }

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

}  // namespace mms

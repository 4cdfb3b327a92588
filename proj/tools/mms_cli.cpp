#include <CLI11.hpp>

#include "mms/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Checks on finite metric measure spaces"};
    mms::ScenarioConfig cfg;
    std::string config_path;
    std::size_t x0 = 0;
    double dimension = 0.0, time = 0.0, stencil = 0.0;

    app.add_option("--config", config_path, "JSON scenario file; command-line flags override it");
    app.add_option("--space", cfg.space, "space JSON file, inline JSON, or distance CSV");
    app.add_option("--weights", cfg.weights, "weights CSV for a CSV distance matrix");
    app.add_option("--task", cfg.task, "validate|w2|cd|hilbert|laplace|heat|be|split|full-pipeline");
    app.add_option("--out", cfg.out, "output directory");
    app.add_option("--seed", cfg.seed, "random seed");
    app.add_option("--tol-overrides", cfg.tol_overrides, "key=value tolerance overrides")->delimiter(',');
    app.add_option("--t-grid", cfg.t_grid, "comma separated times")->delimiter(',');
    auto* dim_opt = app.add_option("--dimension", dimension, "dimension parameter N");
    app.add_option("--mu", cfg.mu, "source measure: dirac:i, uniform:i,j, ball:i:r or JSON");
    app.add_option("--nu", cfg.nu, "target measure");
    auto* x0_opt = app.add_option("--x0", x0, "base point");
    auto* time_opt = app.add_option("--time", time, "heat time");
    app.add_option("--radii", cfg.radii, "radii for ball or annulus checks")->delimiter(',');
    auto* st_opt = app.add_option("--stencil", stencil, "stencil radius in lattice cells");
    app.add_option("--line", cfg.line, "line JSON with ids and times");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (!config_path.empty()) {
        try {
            auto j = mms::parse_json(mms::read_file(config_path), "config");
            auto str = [&](const char* k, std::string& dst) {
                if (j.contains(k) && dst.empty()) dst = j.at(k).get<std::string>();
            };
            str("space", cfg.space);
            str("weights", cfg.weights);
            str("task", cfg.task);
            str("out", cfg.out);
            str("mu", cfg.mu);
            str("nu", cfg.nu);
            str("line", cfg.line);
            if (j.contains("seed") && app.count("--seed") == 0) cfg.seed = j.at("seed").get<std::uint64_t>();
            if (j.contains("t_grid") && cfg.t_grid.empty()) cfg.t_grid = j.at("t_grid").get<std::vector<double>>();
            if (j.contains("radii") && cfg.radii.empty()) cfg.radii = j.at("radii").get<std::vector<double>>();
            if (j.contains("dimension") && !*dim_opt) cfg.dimension = j.at("dimension").get<double>();
            if (j.contains("x0") && !*x0_opt) cfg.x0 = j.at("x0").get<std::size_t>();
            if (j.contains("time") && !*time_opt) cfg.time = j.at("time").get<double>();
            if (j.contains("stencil") && !*st_opt) cfg.stencil_cells = j.at("stencil").get<double>();
            if (j.contains("tol_overrides") && cfg.tol_overrides.empty())
                for (auto& [k, v] : j.at("tol_overrides").items())
                    cfg.tol_overrides.push_back(k + "=" + mms::fmt_num(v.get<double>()));
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 1;
        }
    }
    if (*dim_opt) cfg.dimension = dimension;
    if (*x0_opt) cfg.x0 = x0;
    if (*time_opt) cfg.time = time;
    if (*st_opt) cfg.stencil_cells = stencil;

    int rc = mms::run_scenario(cfg, std::cerr);
    if (rc != 1) std::cout << "report: " << cfg.out << "/report.json (exit " << rc << ")\n";
    return rc;
}

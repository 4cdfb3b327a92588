#pragma once

#include <map>
#include <string>

#include "mms/common.hpp"

namespace mms {

// Single versioned table of default tolerances. Entries ending in _cells
// are multiplied by the lattice step of the scenario.
class Tolerances {
public:
    static constexpr const char* version = "mms-tolerances/1";

    Tolerances()
        : values_{
              {"triangle_ulps", 4.0},         // relative slack in ulps for the triangle inequality
              {"duality", 1e-9},              // Kantorovich duality gap
              {"support_slack", 1e-9},        // slack of the potential on the plan support
              {"marginal", 1e-10},            // plan marginals
              {"ccc", 1e-12},                 // phi^ccc = phi^c
              {"cd_factor", 3.0},             // cd_tol = cd_factor * h * diam(supp), floor 1e-9
              {"cd_tol", -1.0},               // absolute override when >= 0
              {"bg", 0.1},                    // Bishop-Gromov slack
              {"hilbert", 1e-2},              // parallelogram defect
              {"lap_rel", 0.1},               // Laplacian comparison, relative to N/d
              {"lap_linear", 1e-10},          // interior Laplacian of linear fields
              {"mass", 1e-9},                 // heat mass conservation and kernel mass
              {"semigroup", 1e-8},            // h_t h_s = h_{t+s}
              {"be_factor", 5.0},             // be_tol = be_factor * h * (1 + max slope)
              {"line", 1e-9},                 // line isometry defect
              {"gap", 1e-9},                  // |b+ + b-|
              {"lipschitz", 1e-9},            // 1-Lipschitz excess of b
              {"flow_slack", 1e-9},           // slack on reachable points
              {"flow_tol_factor", 0.1},       // unreachable threshold = factor * h^2
              {"unreachable_cap", 0.2},       // fraction of flagged points that fails the run
              {"group_cells", 1.0},
              {"pushforward_cells", 1.0},
              {"energy_cells", 1.0},
              {"isometry_cells", 1.0},
              {"product_measure_cells", 1.0},
              {"smap_tmap_cells", 1.0},
              {"embedding_cells", 1.0},
              {"pythagoras", 0.05},           // max relative defect
          } {}

    double get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw Error("unknown tolerance key '" + key + "'");
        return it->second;
    }

    void set(const std::string& key, double value) {
        if (!values_.count(key)) throw Error("unknown tolerance key '" + key + "'");
        values_[key] = value;
    }

    const std::map<std::string, double>& all() const { return values_; }

private:
    std::map<std::string, double> values_;
};

}  // namespace mms

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lnared/lna.hpp"

namespace lnared {

// Run parameters with the documented defaults applied. Initial conditions are
// stored in the transformed (slow, fast) coordinates, already mapped from the
// species-space vectors given in the config file.
struct RunConfig {
    double t0 = 0.0;
    double t1 = 50.0;
    int t_points = 201;
    double rtol = 1e-8;
    double atol = 1e-10;
    std::vector<double> eps_list; // strictly decreasing; empty = model epsilon only
    std::size_t ensemble_n = 100000;
    double ensemble_dt = 1e-3;
    std::uint64_t seed = 0;
    Vec x0, z0;         // deterministic initial state
    Vec psi_x0, psi_z0; // initial fluctuation means

    std::vector<double> t_grid() const; // t_points uniform samples of [t0, t1]
};

struct LoadedModel {
    std::shared_ptr<ReactionNetwork> net;
    TransformMatrices tm;
    RunConfig run;
};

// Accepts a builtin name ("phospho-example") or a path to a JSON model file
// (schema_version 1). Schema violations raise ConfigError naming the field.
LoadedModel load_config(const std::string& path_or_builtin);

// The example system with its reference parameters and zero initial state.
LoadedModel builtin_phospho();

} // namespace lnared

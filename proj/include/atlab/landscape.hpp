#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "atlab/attack.hpp"
#include "atlab/data.hpp"
#include "atlab/model.hpp"

namespace atlab {

// Loss evaluated over theta + m1*u/||u|| + m2*v/||v|| on a uniform lattice
// of (m1, m2) in [-1,1]^2. Normalization uses the global L2 norm of each
// flat direction vector.
struct LandscapeGrid {
    std::vector<double> m1;                 // axis values, length grid_n
    std::vector<double> m2;
    std::vector<std::vector<double>> loss;  // loss[i][j] at (m1[i], m2[j])
    std::uint64_t direction_seed = 0;
    std::uint64_t center_fingerprint = 0;
    std::string mode;  // "clean" | "adversarial" | "custom"
};

// Independent standard-normal directions over the layout, un-normalized.
std::pair<ParamVector, ParamVector> sample_directions(const ParamLayout& layout, std::uint64_t seed);

// Evaluates loss_fn over the displaced-parameter lattice. The model's
// parameters are bitwise unchanged after return (restored even on throw).
LandscapeGrid probe(Mlp& model, const ParamVector& u, const ParamVector& v, int grid_n,
                    const std::function<double(const Mlp&)>& loss_fn);

// Mean clean CE over the dataset.
std::function<double(const Mlp&)> clean_ce_loss_fn(const Dataset& data);

// Mean CE on adversarial examples regenerated against the displaced model at
// every grid point, so each point sees its own worst-case perturbation.
std::function<double(const Mlp&)> adversarial_ce_loss_fn(const Dataset& data, const AttackSpec& spec,
                                                         std::uint64_t seed);

// CSV with header m1,m2,loss, one row per grid point, m1-major order.
void write_landscape_csv(const LandscapeGrid& grid, const std::string& path);

// Sidecar metadata: seeds, mode, center fingerprint, grid_n.
void write_landscape_meta(const LandscapeGrid& grid, const std::string& path);

}  // namespace atlab

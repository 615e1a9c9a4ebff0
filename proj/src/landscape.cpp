#include "atlab/landscape.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "atlab/rng.hpp"

namespace atlab {

std::pair<ParamVector, ParamVector> sample_directions(const ParamLayout& layout, std::uint64_t seed) {
    auto draw = [&](std::uint64_t sub) {
        ParamVector p;
        p.layout = layout;
        p.values.resize(layout.total);
        Rng rng(derive_seed(seed, stream::kDirection, sub));
        for (double& v : p.values) v = rng.gaussian();
        return p;
    };
    return {draw(0), draw(1)};
}

namespace {

ParamVector normalized_direction(const ParamVector& d, const char* which) {
    double sq = 0.0;
    for (double v : d.values) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0)) {
        throw DegenerateDirectionError(std::string("probe: direction ") + which + " has zero norm");
    }
    ParamVector out = d;
    for (double& v : out.values) v /= norm;
    return out;
}

// Restores the center parameters even when a loss evaluation throws.
struct ParamRestore {
    Mlp& model;
    const ParamVector& center;
    ~ParamRestore() { model.set_params(center); }
};

}  // namespace

LandscapeGrid probe(Mlp& model, const ParamVector& u, const ParamVector& v, int grid_n,
                    const std::function<double(const Mlp&)>& loss_fn) {
    if (grid_n < 2) throw ConfigError("probe: grid_n must be >= 2");
    check_layout_match(model.params(), u, "probe");
    check_layout_match(model.params(), v, "probe");
    if (!loss_fn) throw ContractError("probe: loss_fn is required");

    const ParamVector center = model.params();
    const ParamVector un = normalized_direction(u, "u");
    const ParamVector vn = normalized_direction(v, "v");

    LandscapeGrid grid;
    grid.center_fingerprint = fingerprint(center);
    grid.mode = "custom";
    grid.m1.resize(static_cast<std::size_t>(grid_n));
    grid.m2.resize(static_cast<std::size_t>(grid_n));
    for (int i = 0; i < grid_n; ++i) {
        const double m = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(grid_n - 1);
        grid.m1[static_cast<std::size_t>(i)] = m;
        grid.m2[static_cast<std::size_t>(i)] = m;
    }
    grid.loss.assign(static_cast<std::size_t>(grid_n),
                     std::vector<double>(static_cast<std::size_t>(grid_n), 0.0));

    {
        ParamRestore restore{model, center};
        ParamVector displaced;
        displaced.layout = center.layout;
        displaced.values.resize(center.values.size());
        for (int i = 0; i < grid_n; ++i) {
            for (int j = 0; j < grid_n; ++j) {
                const double m1 = grid.m1[static_cast<std::size_t>(i)];
                const double m2 = grid.m2[static_cast<std::size_t>(j)];
                if (m1 == 0.0 && m2 == 0.0) {
                    // exact center, no arithmetic on the parameters
                    displaced.values = center.values;
                } else {
                    for (std::size_t k = 0; k < displaced.values.size(); ++k) {
                        displaced.values[k] =
                            center.values[k] + m1 * un.values[k] + m2 * vn.values[k];
                    }
                }
                model.set_params(displaced);
                const double loss = loss_fn(model);
                if (!std::isfinite(loss)) {
                    throw NumericError("probe: non-finite loss at grid cell (" + std::to_string(i) +
                                           ", " + std::to_string(j) + ")",
                                       i * grid_n + j);
                }
                grid.loss[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = loss;
            }
        }
    }
    return grid;
}

std::function<double(const Mlp&)> clean_ce_loss_fn(const Dataset& data) {
    return [&data](const Mlp& m) { return cross_entropy_value(m.forward(data.inputs), data.labels); };
}

std::function<double(const Mlp&)> adversarial_ce_loss_fn(const Dataset& data, const AttackSpec& spec,
                                                         std::uint64_t seed) {
    validate(spec);
    return [&data, spec, seed](const Mlp& m) {
        std::vector<std::uint64_t> seeds(data.size());
        for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(seed, stream::kAttack, i);
        const Tensor x_adv = perturb(m, data.inputs, data.labels, spec, AttackLoss::kCrossEntropy, seeds);
        return cross_entropy_value(m.forward(x_adv), data.labels);
    };
}

void write_landscape_csv(const LandscapeGrid& grid, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("landscape: cannot open for writing: " + path);
    os << "m1,m2,loss\n";
    char buf[96];
    for (std::size_t i = 0; i < grid.m1.size(); ++i) {
        for (std::size_t j = 0; j < grid.m2.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", grid.m1[i], grid.m2[j],
                          grid.loss[i][j]);
            os << buf;
        }
    }
    if (!os) throw IoError("landscape: write failed: " + path);
}

void write_landscape_meta(const LandscapeGrid& grid, const std::string& path) {
    nlohmann::json meta;
    meta["direction_seed"] = grid.direction_seed;
    meta["mode"] = grid.mode;
    char fp[32];
    std::snprintf(fp, sizeof(fp), "0x%016llx",
                  static_cast<unsigned long long>(grid.center_fingerprint));
    meta["center_fingerprint"] = fp;
    meta["grid_n"] = grid.m1.size();
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("landscape: cannot open for writing: " + path);
    os << meta.dump(2) << "\n";
    if (!os) throw IoError("landscape: write failed: " + path);
}

}  // namespace atlab

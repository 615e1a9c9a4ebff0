#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atlab/graph.hpp"

namespace atlab {

struct ParamSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t count = 0;
};

bool operator==(const ParamSlice& a, const ParamSlice& b);

// Total, named partition of the flat parameter space.
struct ParamLayout {
    std::vector<ParamSlice> slices;
    std::size_t total = 0;
};

bool operator==(const ParamLayout& a, const ParamLayout& b);

// Flat, ordered view of all trainable parameters: the unit of interpolation,
// checkpointing and landscape displacement.
struct ParamVector {
    std::vector<double> values;
    ParamLayout layout;
};

void check_layout_match(const ParamVector& a, const ParamVector& b, const char* who);

// FNV-1a over the raw little-endian bytes of the values.
std::uint64_t fingerprint(const ParamVector& p);
std::uint64_t fingerprint(std::span<const double> values);

struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t classes = 0;
};

bool operator==(const MlpSpec& a, const MlpSpec& b);

ParamLayout mlp_layout(const MlpSpec& spec);

// Fully-connected ReLU classifier with a linear logit layer. Forward is a
// pure function of (params, input); set_params requires exclusive access.
class Mlp {
public:
    // Per-layer init: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from a
    // seeded splitmix64 stream. Same seed, same bits.
    static Mlp build(const MlpSpec& spec, std::uint64_t seed);

    // Logits without a graph. Same kernels as the graph path.
    Tensor forward(const Tensor& x) const;

    // Graph-building forward. Parameters may be shared across several
    // forwards in one graph (adversarial + clean branches of one loss).
    std::vector<Var> make_param_leaves(Graph& g) const;
    Var forward_with(Graph& g, Var x, std::span<const Var> params) const;

    struct Bound {
        Var logits;
        std::vector<Var> params;
    };
    Bound bind_forward(Graph& g, Var x) const;

    // Flattens per-leaf gradients back into layout order.
    ParamVector collect_param_grads(const Graph& g, std::span<const Var> params) const;

    const ParamVector& params() const { return params_; }
    void set_params(const ParamVector& p);

    const MlpSpec& spec() const { return spec_; }
    const ParamLayout& layout() const { return params_.layout; }
    std::size_t param_count() const { return params_.values.size(); }

private:
    Mlp() = default;

    MlpSpec spec_;
    ParamVector params_;
    // (fan_in, fan_out) per layer, hidden plus output
    std::vector<std::pair<std::size_t, std::size_t>> dims_;
};

}  // namespace atlab

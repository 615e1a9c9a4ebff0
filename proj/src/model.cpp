#include "atlab/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "atlab/rng.hpp"

namespace atlab {

bool operator==(const ParamSlice& a, const ParamSlice& b) {
    return a.name == b.name && a.offset == b.offset && a.count == b.count;
}

bool operator==(const ParamLayout& a, const ParamLayout& b) {
    return a.total == b.total && a.slices == b.slices;
}

bool operator==(const MlpSpec& a, const MlpSpec& b) {
    return a.input_dim == b.input_dim && a.hidden == b.hidden && a.classes == b.classes;
}

void check_layout_match(const ParamVector& a, const ParamVector& b, const char* who) {
    if (!(a.layout == b.layout) || a.values.size() != b.values.size()) {
        throw LayoutError(std::string(who) + ": parameter layouts disagree (" +
                          std::to_string(a.values.size()) + " vs " + std::to_string(b.values.size()) +
                          " values)");
    }
}

std::uint64_t fingerprint(std::span<const double> values) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (double v : values) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffull;
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

std::uint64_t fingerprint(const ParamVector& p) { return fingerprint(p.values); }

namespace {

std::vector<std::pair<std::size_t, std::size_t>> layer_dims(const MlpSpec& spec) {
    std::vector<std::pair<std::size_t, std::size_t>> dims;
    std::size_t in = spec.input_dim;
    for (std::size_t h : spec.hidden) {
        dims.emplace_back(in, h);
        in = h;
    }
    dims.emplace_back(in, spec.classes);
    return dims;
}

void validate_spec(const MlpSpec& spec) {
    if (spec.input_dim < 1) throw ConfigError("mlp: input_dim must be >= 1");
    if (spec.classes < 2) throw ConfigError("mlp: classes must be >= 2");
    for (std::size_t h : spec.hidden) {
        if (h < 1) throw ConfigError("mlp: hidden width must be positive");
    }
}

}  // namespace

ParamLayout mlp_layout(const MlpSpec& spec) {
    validate_spec(spec);
    ParamLayout layout;
    std::size_t offset = 0;
    const auto dims = layer_dims(spec);
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const auto [in, out] = dims[l];
        layout.slices.push_back({"layer" + std::to_string(l) + ".weight", offset, in * out});
        offset += in * out;
        layout.slices.push_back({"layer" + std::to_string(l) + ".bias", offset, out});
        offset += out;
    }
    layout.total = offset;
    return layout;
}

Mlp Mlp::build(const MlpSpec& spec, std::uint64_t seed) {
    Mlp m;
    m.spec_ = spec;
    m.params_.layout = mlp_layout(spec);
    m.dims_ = layer_dims(spec);
    m.params_.values.assign(m.params_.layout.total, 0.0);

    std::size_t offset = 0;
    for (std::size_t l = 0; l < m.dims_.size(); ++l) {
        const auto [in, out] = m.dims_[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Rng rng(derive_seed(seed, stream::kModelInit, l));
        for (std::size_t i = 0; i < in * out; ++i) m.params_.values[offset++] = rng.uniform(-bound, bound);
        for (std::size_t i = 0; i < out; ++i) m.params_.values[offset++] = rng.uniform(-bound, bound);
    }
    return m;
}

Tensor Mlp::forward(const Tensor& x) const {
    require_rank2(x, "mlp forward");
    if (x.cols() != spec_.input_dim) {
        throw ShapeError("mlp forward: input shape " + shape_str(x.shape) + " does not match input_dim " +
                         std::to_string(spec_.input_dim));
    }
    Tensor h = x;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < dims_.size(); ++l) {
        const auto [in, out] = dims_[l];
        Tensor w({in, out},
                 std::vector<double>(params_.values.begin() + static_cast<std::ptrdiff_t>(offset),
                                     params_.values.begin() + static_cast<std::ptrdiff_t>(offset + in * out)));
        offset += in * out;
        Tensor z = matmul_value(h, w);
        const std::size_t m = z.rows(), c = z.cols();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < c; ++j) z.data[i * c + j] += params_.values[offset + j];
        }
        offset += out;
        if (l + 1 < dims_.size()) {
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        }
        h = std::move(z);
    }
    return h;
}

std::vector<Var> Mlp::make_param_leaves(Graph& g) const {
    std::vector<Var> leaves;
    std::size_t offset = 0;
    for (const auto& [in, out] : dims_) {
        leaves.push_back(g.leaf(Tensor(
            {in, out},
            std::vector<double>(params_.values.begin() + static_cast<std::ptrdiff_t>(offset),
                                params_.values.begin() + static_cast<std::ptrdiff_t>(offset + in * out)))));
        offset += in * out;
        leaves.push_back(g.leaf(Tensor(
            {out}, std::vector<double>(params_.values.begin() + static_cast<std::ptrdiff_t>(offset),
                                       params_.values.begin() + static_cast<std::ptrdiff_t>(offset + out)))));
        offset += out;
    }
    return leaves;
}

Var Mlp::forward_with(Graph& g, Var x, std::span<const Var> params) const {
    if (params.size() != dims_.size() * 2) {
        throw ContractError("mlp forward_with: expected " + std::to_string(dims_.size() * 2) +
                            " parameter leaves, got " + std::to_string(params.size()));
    }
    Var h = x;
    for (std::size_t l = 0; l < dims_.size(); ++l) {
        Var z = g.add_row(g.matmul(h, params[2 * l]), params[2 * l + 1]);
        h = (l + 1 < dims_.size()) ? g.relu(z) : z;
    }
    return h;
}

Mlp::Bound Mlp::bind_forward(Graph& g, Var x) const {
    Bound b;
    b.params = make_param_leaves(g);
    b.logits = forward_with(g, x, b.params);
    return b;
}

ParamVector Mlp::collect_param_grads(const Graph& g, std::span<const Var> params) const {
    ParamVector out;
    out.layout = params_.layout;
    out.values.reserve(params_.layout.total);
    for (const Var& v : params) {
        const Tensor gv = g.grad(v);
        out.values.insert(out.values.end(), gv.data.begin(), gv.data.end());
    }
    if (out.values.size() != params_.layout.total) {
        throw LayoutError("collect_param_grads: gradient element count " +
                          std::to_string(out.values.size()) + " does not match layout total " +
                          std::to_string(params_.layout.total));
    }
    return out;
}

void Mlp::set_params(const ParamVector& p) {
    check_layout_match(params_, p, "set_params");
    params_.values = p.values;
}

}  // namespace atlab

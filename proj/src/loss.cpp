#include "atlab/loss.hpp"

namespace atlab {

void validate(const LossSpec& spec) {
    if (spec.kind == LossKind::kTrades && !(spec.beta > 0.0)) {
        throw ConfigError("loss: trades requires beta > 0");
    }
    if (spec.kind == LossKind::kCePlusNmse && !(spec.mu >= 0.0)) {
        throw ConfigError("loss: ce_plus_nmse requires mu >= 0");
    }
}

std::string loss_kind_str(LossKind k) {
    switch (k) {
        case LossKind::kAtCe: return "at_ce";
        case LossKind::kTrades: return "trades";
        case LossKind::kCePlusNmse: return "ce_plus_nmse";
    }
    return "?";
}

LossKind loss_kind_from_str(const std::string& s) {
    if (s == "at_ce") return LossKind::kAtCe;
    if (s == "trades") return LossKind::kTrades;
    if (s == "ce_plus_nmse") return LossKind::kCePlusNmse;
    throw ConfigError("loss: unknown kind '" + s + "'");
}

AttackLoss attack_loss_for(const LossSpec& spec) {
    return spec.kind == LossKind::kTrades ? AttackLoss::kKl : AttackLoss::kCrossEntropy;
}

std::vector<double> nmse_weights(const Tensor& clean_logits, const std::vector<int>& labels) {
    const Tensor probs = softmax_value(clean_logits);
    const std::size_t m = probs.rows(), c = probs.cols();
    if (labels.size() != m) {
        throw ShapeError("nmse_weights: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m) + " rows");
    }
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= static_cast<int>(c)) {
            throw IndexError("nmse_weights: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(c) + ")");
        }
        w[i] = 1.0 - probs.data[i * c + static_cast<std::size_t>(y)];
    }
    return w;
}

Var nmse_from_logits(Graph& g, Var clean_logits, Var adv_logits, const std::vector<double>& weights) {
    const std::size_t m = g.value(clean_logits).rows();
    if (weights.size() != m) {
        throw ShapeError("nmse: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(m) + " rows");
    }
    Var diff = g.sub(g.l2_normalize(clean_logits), g.l2_normalize(adv_logits));
    Var per_row = g.row_sum(g.mul(diff, diff));  // [m,1] squared distances
    Var weighted = g.mul_const(per_row, Tensor({m, 1}, std::vector<double>(weights)));
    return g.scale(g.sum_all(weighted), 1.0 / static_cast<double>(m));
}

LossBuild at_ce_loss(Graph& g, const Mlp& model, const Tensor& x_adv, const std::vector<int>& y) {
    LossBuild b;
    Mlp::Bound bound = model.bind_forward(g, g.leaf(x_adv));
    b.params = std::move(bound.params);
    b.loss = g.cross_entropy(bound.logits, y);
    return b;
}

LossBuild trades_loss(Graph& g, const Mlp& model, const Tensor& x, const Tensor& x_adv,
                      const std::vector<int>& y, double beta) {
    if (!(beta > 0.0)) throw ConfigError("trades_loss: beta must be > 0");
    LossBuild b;
    b.params = model.make_param_leaves(g);
    Var clean_logits = model.forward_with(g, g.leaf(x), b.params);
    Var adv_logits = model.forward_with(g, g.leaf(x_adv), b.params);
    Var ce = g.cross_entropy(clean_logits, y);
    Var kl = g.kl_divergence(clean_logits, adv_logits);
    b.loss = g.add(ce, g.scale(kl, beta));
    return b;
}

LossBuild nmse_loss(Graph& g, const Mlp& model, const Tensor& x, const Tensor& x_adv,
                    const std::vector<int>& y) {
    LossBuild b;
    b.params = model.make_param_leaves(g);
    Var clean_logits = model.forward_with(g, g.leaf(x), b.params);
    Var adv_logits = model.forward_with(g, g.leaf(x_adv), b.params);
    const std::vector<double> w = nmse_weights(g.value(clean_logits), y);
    b.loss = nmse_from_logits(g, clean_logits, adv_logits, w);
    return b;
}

LossBuild total_loss(Graph& g, const Mlp& model, const Tensor& x, const Tensor& x_adv,
                     const std::vector<int>& y, double mu) {
    if (!(mu >= 0.0)) throw ConfigError("total_loss: mu must be >= 0");
    // mu == 0 degenerates to the CE term alone, bit for bit.
    if (mu == 0.0) return at_ce_loss(g, model, x_adv, y);
    LossBuild b;
    b.params = model.make_param_leaves(g);
    Var clean_logits = model.forward_with(g, g.leaf(x), b.params);
    Var adv_logits = model.forward_with(g, g.leaf(x_adv), b.params);
    Var ce = g.cross_entropy(adv_logits, y);
    const std::vector<double> w = nmse_weights(g.value(clean_logits), y);
    Var nmse = nmse_from_logits(g, clean_logits, adv_logits, w);
    b.loss = g.add(ce, g.scale(nmse, mu));
    return b;
}

LossBuild build_training_loss(Graph& g, const Mlp& model, const LossSpec& spec, const Tensor& x,
                              const Tensor& x_adv, const std::vector<int>& y) {
    validate(spec);
    switch (spec.kind) {
        case LossKind::kAtCe: return at_ce_loss(g, model, x_adv, y);
        case LossKind::kTrades: return trades_loss(g, model, x, x_adv, y, spec.beta);
        case LossKind::kCePlusNmse: return total_loss(g, model, x, x_adv, y, spec.mu);
    }
    throw ContractError("build_training_loss: unreachable");
}

}  // namespace atlab

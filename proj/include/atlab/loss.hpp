#pragma once

#include <string>
#include <vector>

#include "atlab/attack.hpp"
#include "atlab/model.hpp"

namespace atlab {

enum class LossKind { kAtCe, kTrades, kCePlusNmse };

struct LossSpec {
    LossKind kind = LossKind::kAtCe;
    double beta = 6.0;  // TRADES trade-off
    double mu = 5.0;    // NMSE weight
};

void validate(const LossSpec& spec);
std::string loss_kind_str(LossKind k);
LossKind loss_kind_from_str(const std::string& s);

// The objective the inner maximization ascends: KL for TRADES, CE otherwise.
AttackLoss attack_loss_for(const LossSpec& spec);

// Per-example weights 1 - p_clean, where p_clean is the softmax probability
// of the ground-truth class on the clean logits. Treated as constants:
// the regularizer reweights samples, it does not push clean confidence down.
std::vector<double> nmse_weights(const Tensor& clean_logits, const std::vector<int>& labels);

// mean_i w_i * || l2n(clean_i) - l2n(adv_i) ||^2 over the batch.
Var nmse_from_logits(Graph& g, Var clean_logits, Var adv_logits, const std::vector<double>& weights);

struct LossBuild {
    Var loss;
    std::vector<Var> params;
};

LossBuild at_ce_loss(Graph& g, const Mlp& model, const Tensor& x_adv, const std::vector<int>& y);
LossBuild trades_loss(Graph& g, const Mlp& model, const Tensor& x, const Tensor& x_adv,
                      const std::vector<int>& y, double beta);
LossBuild nmse_loss(Graph& g, const Mlp& model, const Tensor& x, const Tensor& x_adv,
                    const std::vector<int>& y);
LossBuild total_loss(Graph& g, const Mlp& model, const Tensor& x, const Tensor& x_adv,
                     const std::vector<int>& y, double mu);

// Dispatch on spec.kind; the single entry point the trainer uses.
LossBuild build_training_loss(Graph& g, const Mlp& model, const LossSpec& spec, const Tensor& x,
                              const Tensor& x_adv, const std::vector<int>& y);

}  // namespace atlab

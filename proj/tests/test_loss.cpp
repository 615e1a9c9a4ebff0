#include <doctest.h>

#include <cmath>

#include "atlab/loss.hpp"
#include "atlab/rng.hpp"
#include "fd_check.hpp"

using namespace atlab;

namespace {

Tensor random_unit_inputs(std::size_t n, std::size_t d, Rng& rng) {
    Tensor x = Tensor::zeros({n, d});
    for (double& v : x.data) v = rng.uniform01();
    return x;
}

// FD over model parameters for a loss rebuilt per evaluation. CE_PLUS_NMSE
// freezes its sample weights inside build_training_loss at each evaluation's
// own clean logits; the stop-gradient semantics require the FD function to
// freeze them at the base parameters instead, so that path gets its own fn.
double loss_value_at(const Mlp& base_model, const std::vector<double>& theta, const LossSpec& spec,
                     const Tensor& x, const Tensor& x_adv, const std::vector<int>& y,
                     const std::vector<double>* frozen_weights) {
    Mlp m = base_model;
    ParamVector p = m.params();
    p.values = theta;
    m.set_params(p);
    Graph g;
    if (frozen_weights != nullptr) {
        std::vector<Var> params = m.make_param_leaves(g);
        Var clean = m.forward_with(g, g.leaf(x), params);
        Var adv = m.forward_with(g, g.leaf(x_adv), params);
        Var ce = g.cross_entropy(adv, y);
        Var nmse = nmse_from_logits(g, clean, adv, *frozen_weights);
        return g.value(g.add(ce, g.scale(nmse, spec.mu))).item();
    }
    LossBuild b = build_training_loss(g, m, spec, x, x_adv, y);
    return g.value(b.loss).item();
}

void check_loss_gradient(const LossSpec& spec, std::uint64_t seed) {
    const MlpSpec arch{2, {16, 16}, 2};
    Mlp model = Mlp::build(arch, seed);
    Rng rng(seed + 1000);
    const Tensor x = random_unit_inputs(8, 2, rng);
    Tensor x_adv = x;
    for (double& v : x_adv.data) {
        v = std::min(1.0, std::max(0.0, v + rng.uniform(-0.1, 0.1)));
    }
    std::vector<int> y(8);
    for (auto& label : y) label = static_cast<int>(rng.below(2));

    Graph g;
    const LossBuild built = build_training_loss(g, model, spec, x, x_adv, y);
    g.backward(built.loss);
    const ParamVector analytic = model.collect_param_grads(g, built.params);

    std::vector<double> frozen;
    const std::vector<double>* frozen_ptr = nullptr;
    if (spec.kind == LossKind::kCePlusNmse && spec.mu != 0.0) {
        frozen = nmse_weights(model.forward(x), y);
        frozen_ptr = &frozen;
    }
    auto f = [&](const std::vector<double>& theta) {
        return loss_value_at(model, theta, spec, x, x_adv, y, frozen_ptr);
    };
    CHECK(fdtest::max_grad_rel_err(f, model.params().values, analytic.values) < 1e-4);
}

}  // namespace

TEST_CASE("at_ce_loss equals the cross-entropy composition bitwise") {
    const Mlp model = Mlp::build({2, {8}, 2}, 3);
    Rng rng(4);
    const Tensor x_adv = random_unit_inputs(5, 2, rng);
    const std::vector<int> y = {0, 1, 1, 0, 1};

    Graph g;
    const LossBuild b = at_ce_loss(g, model, x_adv, y);
    CHECK(g.value(b.loss).item() == cross_entropy_value(model.forward(x_adv), y));
}

TEST_CASE("at_ce_loss is near zero for a confident correct model") {
    // one linear layer scaled to extreme confidence
    Mlp model = Mlp::build({2, {}, 2}, 5);
    ParamVector p = model.params();
    p.values = {40.0, -40.0, -40.0, 40.0, 0.0, 0.0};  // W then b
    model.set_params(p);
    const Tensor x = Tensor::matrix(2, 2, {1, 0, 0, 1});
    const std::vector<int> y = {0, 1};
    Graph g;
    const LossBuild b = at_ce_loss(g, model, x, y);
    CHECK(g.value(b.loss).item() < 1e-4);
}

TEST_CASE("trades_loss reduces to clean CE when x_adv == x") {
    const Mlp model = Mlp::build({2, {8}, 2}, 7);
    Rng rng(8);
    const Tensor x = random_unit_inputs(6, 2, rng);
    const std::vector<int> y = {0, 1, 0, 1, 0, 1};

    Graph g;
    const LossBuild b = trades_loss(g, model, x, x, y, 6.0);
    const double clean_ce = cross_entropy_value(model.forward(x), y);
    CHECK(std::fabs(g.value(b.loss).item() - clean_ce) < 1e-12);
}

TEST_CASE("trades_loss never drops below the clean CE term") {
    const Mlp model = Mlp::build({2, {12}, 2}, 9);
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_unit_inputs(4, 2, rng);
        Tensor x_adv = x;
        for (double& v : x_adv.data) v = std::min(1.0, std::max(0.0, v + rng.uniform(-0.2, 0.2)));
        const std::vector<int> y = {1, 0, 1, 0};
        Graph g;
        const LossBuild b = trades_loss(g, model, x, x_adv, y, 6.0);
        const double clean_ce = cross_entropy_value(model.forward(x), y);
        CHECK(g.value(b.loss).item() >= clean_ce - 1e-12);
    }
}

TEST_CASE("trades_loss beta -> 0 limit approaches clean CE") {
    const Mlp model = Mlp::build({2, {8}, 2}, 11);
    Rng rng(12);
    const Tensor x = random_unit_inputs(4, 2, rng);
    Tensor x_adv = x;
    for (double& v : x_adv.data) v = std::min(1.0, std::max(0.0, v + 0.05));
    const std::vector<int> y = {0, 0, 1, 1};

    const double clean_ce = cross_entropy_value(model.forward(x), y);
    const double kl = kl_divergence_value(model.forward(x), model.forward(x_adv));
    Graph g;
    const LossBuild b = trades_loss(g, model, x, x_adv, y, 1e-9);
    CHECK(std::fabs(g.value(b.loss).item() - clean_ce) <= 1e-9 * kl + 1e-15);
}

TEST_CASE("nmse worked example: f(x)=[1,0], f(x')=[0,1], y=0 gives 2/(e+1)") {
    Graph g;
    Var clean = g.leaf(Tensor::matrix(1, 2, {1, 0}));
    Var adv = g.leaf(Tensor::matrix(1, 2, {0, 1}));
    const std::vector<double> w = nmse_weights(g.value(clean), {0});
    const double e = std::exp(1.0);
    CHECK(std::fabs(w[0] - (1.0 - e / (e + 1.0))) < 1e-12);
    const Var loss = nmse_from_logits(g, clean, adv, w);
    CHECK(std::fabs(g.value(loss).item() - 2.0 / (e + 1.0)) < 1e-10);
}

TEST_CASE("nmse is zero on identical logits and kills positive rescaling") {
    const Mlp model = Mlp::build({2, {8}, 2}, 13);
    Rng rng(14);
    const Tensor x = random_unit_inputs(5, 2, rng);
    const std::vector<int> y = {0, 1, 0, 1, 0};

    Graph g;
    const LossBuild same = nmse_loss(g, model, x, x, y);
    CHECK(std::fabs(g.value(same.loss).item()) < 1e-12);

    // independent positive rescaling of either logit argument, fixed weights
    Rng lrng(15);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor cl = Tensor::zeros({3, 4});
        Tensor al = Tensor::zeros({3, 4});
        for (double& v : cl.data) v = lrng.uniform(-3.0, 3.0);
        for (double& v : al.data) v = lrng.uniform(-3.0, 3.0);
        const std::vector<double> w = {0.3, 0.8, 0.5};
        const double alpha = lrng.uniform(0.1, 10.0);
        const double beta = lrng.uniform(0.1, 10.0);
        Tensor cl2 = cl, al2 = al;
        for (double& v : cl2.data) v *= alpha;
        for (double& v : al2.data) v *= beta;

        Graph g1, g2;
        const double base = g1.value(nmse_from_logits(g1, g1.leaf(cl), g1.leaf(al), w)).item();
        const double scaled = g2.value(nmse_from_logits(g2, g2.leaf(cl2), g2.leaf(al2), w)).item();
        CHECK(std::fabs(base - scaled) < 1e-10);
    }
}

TEST_CASE("nmse doubling the adversarial logits changes nothing (scale invariance)") {
    Graph g;
    Var clean = g.leaf(Tensor::matrix(1, 2, {2, 1}));
    Var adv = g.leaf(Tensor::matrix(1, 2, {4, 2}));  // 2 * clean
    const std::vector<double> w = {1.0};
    const Var loss = nmse_from_logits(g, clean, adv, w);
    CHECK(std::fabs(g.value(loss).item()) < 1e-12);
}

TEST_CASE("nmse stays within [0, 4] for random logits and weights") {
    Rng rng(16);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor cl = Tensor::zeros({4, 3});
        Tensor al = Tensor::zeros({4, 3});
        for (double& v : cl.data) v = rng.uniform(-5.0, 5.0);
        for (double& v : al.data) v = rng.uniform(-5.0, 5.0);
        std::vector<double> w(4);
        for (double& v : w) v = rng.uniform01();
        Graph g;
        const double loss = g.value(nmse_from_logits(g, g.leaf(cl), g.leaf(al), w)).item();
        CHECK(loss >= 0.0);
        CHECK(loss <= 4.0);
    }
}

TEST_CASE("total_loss with mu = 0 equals at_ce_loss bitwise") {
    const Mlp model = Mlp::build({2, {8}, 2}, 17);
    Rng rng(18);
    const Tensor x = random_unit_inputs(4, 2, rng);
    Tensor x_adv = x;
    for (double& v : x_adv.data) v = std::min(1.0, std::max(0.0, v + 0.03));
    const std::vector<int> y = {0, 1, 1, 0};

    Graph g1, g2;
    const LossBuild total = total_loss(g1, model, x, x_adv, y, 0.0);
    const LossBuild ce = at_ce_loss(g2, model, x_adv, y);
    CHECK(g1.value(total.loss).item() == g2.value(ce.loss).item());
}

TEST_CASE("attack loss selector: KL for trades, CE otherwise") {
    LossSpec s;
    s.kind = LossKind::kTrades;
    CHECK(attack_loss_for(s) == AttackLoss::kKl);
    s.kind = LossKind::kAtCe;
    CHECK(attack_loss_for(s) == AttackLoss::kCrossEntropy);
    s.kind = LossKind::kCePlusNmse;
    CHECK(attack_loss_for(s) == AttackLoss::kCrossEntropy);
}

TEST_CASE("parameter gradients pass finite differences for all three objectives") {
    LossSpec at;
    at.kind = LossKind::kAtCe;
    check_loss_gradient(at, 21);

    LossSpec trades;
    trades.kind = LossKind::kTrades;
    trades.beta = 6.0;
    check_loss_gradient(trades, 22);

    LossSpec nmse;
    nmse.kind = LossKind::kCePlusNmse;
    nmse.mu = 5.0;
    check_loss_gradient(nmse, 23);
}

#include "atlab/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "atlab/rng.hpp"

namespace atlab {

void validate(const LrSchedule& s) {
    if (!(s.initial > 0.0)) throw ConfigError("lr: initial must be > 0");
    int prev = -1;
    for (const auto& [epoch, value] : s.milestones) {
        if (epoch <= prev) throw ConfigError("lr: milestone epochs must be strictly increasing");
        if (!(value > 0.0)) throw ConfigError("lr: milestone values must be > 0");
        prev = epoch;
    }
}

double lr_at(const LrSchedule& s, int epoch) {
    if (epoch < 0) throw ConfigError("lr_at: epoch must be >= 0");
    if (s.milestones.empty() || epoch <= s.milestones.front().first) return s.initial;
    for (std::size_t k = 0; k + 1 < s.milestones.size(); ++k) {
        const auto& [e0, v0] = s.milestones[k];
        const auto& [e1, v1] = s.milestones[k + 1];
        if (epoch <= e1) {
            const double t = static_cast<double>(epoch - e0) / static_cast<double>(e1 - e0);
            return v0 + t * (v1 - v0);
        }
    }
    return s.milestones.back().second;
}

void validate(const TrainPlan& plan) {
    if (plan.warmup_epochs < 0) throw ConfigError("train: warmup_epochs must be >= 0");
    if (plan.adv_epochs < 0) throw ConfigError("train: adv_epochs must be >= 0");
    if (plan.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(plan.momentum >= 0.0 && plan.momentum < 1.0)) {
        throw ConfigError("train: momentum must be in [0, 1)");
    }
    if (!(plan.weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
    validate(plan.lr);
    validate(plan.train_attack);
    validate(plan.loss);
    validate(plan.lambda);
}

void sgd_step(ParamVector& params, const ParamVector& grads, SgdState& state, double lr,
              double momentum, double weight_decay) {
    check_layout_match(params, grads, "sgd_step");
    if (state.velocity.size() != params.values.size()) {
        throw LayoutError("sgd_step: velocity length " + std::to_string(state.velocity.size()) +
                          " does not match parameter count " + std::to_string(params.values.size()));
    }
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        state.velocity[i] =
            momentum * state.velocity[i] + grads.values[i] + weight_decay * params.values[i];
        params.values[i] -= lr * state.velocity[i];
    }
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

struct Batch {
    Tensor x;
    std::vector<int> y;
    std::vector<std::size_t> rows;  // dataset indices, for per-example seeds
};

Batch gather(const Dataset& data, std::span<const std::size_t> rows) {
    Batch b;
    const std::size_t d = data.dim();
    b.x = Tensor::zeros({rows.size(), d});
    b.y.resize(rows.size());
    b.rows.assign(rows.begin(), rows.end());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) b.x.data[i * d + j] = data.inputs.data[rows[i] * d + j];
        b.y[i] = data.labels[rows[i]];
    }
    return b;
}

// Shared minibatch loop; the adversarial path is the clean path plus attack
// generation and the configured composite loss.
double run_epoch(Mlp& model, const Dataset& data, const TrainPlan& plan, int lr_epoch,
                 std::uint64_t epoch_seed, SgdState& state, bool adversarial) {
    const std::size_t n = data.size();
    if (n == 0) throw ConfigError("epoch: empty dataset");
    const double lr = lr_at(plan.lr, lr_epoch);
    const std::vector<std::size_t> order = shuffled_indices(n, derive_seed(epoch_seed, stream::kShuffle));

    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < n; start += plan.batch_size, ++batch_index) {
        const std::size_t count = std::min(plan.batch_size, n - start);
        const Batch batch = gather(data, std::span(order).subspan(start, count));

        Graph g;
        LossBuild built;
        if (adversarial) {
            std::vector<std::uint64_t> seeds(count);
            for (std::size_t i = 0; i < count; ++i) {
                seeds[i] = derive_seed(epoch_seed, stream::kAttack, batch.rows[i]);
            }
            const Tensor x_adv = perturb(model, batch.x, batch.y, plan.train_attack,
                                         attack_loss_for(plan.loss), seeds);
            built = build_training_loss(g, model, plan.loss, batch.x, x_adv, batch.y);
        } else {
            built = at_ce_loss(g, model, batch.x, batch.y);
        }

        const double loss_value = g.value(built.loss).item();
        if (!std::isfinite(loss_value)) {
            throw NumericError("epoch: non-finite loss in batch " + std::to_string(batch_index),
                               batch_index);
        }
        g.backward(built.loss);
        const ParamVector grads = model.collect_param_grads(g, built.params);

        ParamVector params = model.params();
        sgd_step(params, grads, state, lr, plan.momentum, plan.weight_decay);
        model.set_params(params);

        loss_sum += loss_value * static_cast<double>(count);
    }
    return loss_sum / static_cast<double>(n);
}

}  // namespace

double clean_epoch(Mlp& model, const Dataset& data, const TrainPlan& plan, int lr_epoch,
                   std::uint64_t epoch_seed, SgdState& state) {
    return run_epoch(model, data, plan, lr_epoch, epoch_seed, state, false);
}

double adv_epoch(Mlp& model, const Dataset& data, const TrainPlan& plan, int lr_epoch,
                 std::uint64_t epoch_seed, SgdState& state) {
    return run_epoch(model, data, plan, lr_epoch, epoch_seed, state, true);
}

double clean_accuracy(const Mlp& model, const Dataset& data) {
    if (data.size() == 0) throw ConfigError("clean_accuracy: empty dataset");
    const Tensor logits = model.forward(data.inputs);
    const std::size_t n = logits.rows(), c = logits.cols();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j) {
            if (logits.data[i * c + j] > logits.data[i * c + best]) best = j;
        }
        if (static_cast<int>(best) == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

double mean_clean_ce(const Mlp& model, const Dataset& data) {
    if (data.size() == 0) throw ConfigError("mean_clean_ce: empty dataset");
    return cross_entropy_value(model.forward(data.inputs), data.labels);
}

EvalResult evaluate(const Mlp& model, const Dataset& data, std::span<const AttackSpec> specs,
                    std::uint64_t seed) {
    EvalResult r;
    r.clean_acc = clean_accuracy(model, data);
    r.clean_loss = mean_clean_ce(model, data);
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const AttackSpec& spec = specs[k];
        const std::string name = spec.name.empty() ? default_attack_name(spec) : spec.name;
        r.robust.emplace_back(name, evaluate_robust(model, data, spec, derive_seed(seed, stream::kEval, k)));
    }
    return r;
}

}  // namespace atlab

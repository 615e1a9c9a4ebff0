#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atlab/attack.hpp"
#include "atlab/data.hpp"
#include "atlab/loss.hpp"
#include "atlab/model.hpp"
#include "atlab/piat_schedule.hpp"

namespace atlab {

// Piecewise learning rate: constant at `initial` up to the first milestone
// epoch, then linear between consecutive (epoch, value) milestones, constant
// after the last.
struct LrSchedule {
    double initial = 0.01;
    std::vector<std::pair<int, double>> milestones;
};

void validate(const LrSchedule& s);
double lr_at(const LrSchedule& s, int epoch);

enum class MomentumMode { kPersist, kReset };

// Everything that determines a training run, bar the datasets.
struct TrainPlan {
    int warmup_epochs = 3;
    int adv_epochs = 30;
    std::size_t batch_size = 64;
    LrSchedule lr;
    double momentum = 0.9;
    double weight_decay = 0.0;
    MomentumMode momentum_mode = MomentumMode::kPersist;
    AttackSpec train_attack;
    LossSpec loss;
    LambdaSchedule lambda;
    std::uint64_t seed = 1;
};

void validate(const TrainPlan& plan);

struct SgdState {
    std::vector<double> velocity;
    explicit SgdState(std::size_t n) : velocity(n, 0.0) {}
};

// v <- momentum*v + g + weight_decay*theta;  theta <- theta - lr*v
void sgd_step(ParamVector& params, const ParamVector& grads, SgdState& state, double lr,
              double momentum, double weight_decay);

// One pass over seeded-shuffled minibatches of clean CE training.
// Returns the batch-size-weighted mean loss.
double clean_epoch(Mlp& model, const Dataset& data, const TrainPlan& plan, int lr_epoch,
                   std::uint64_t epoch_seed, SgdState& state);

// One adversarial epoch: per batch, craft x_adv under the train attack with
// the loss-appropriate objective, then descend the configured loss.
double adv_epoch(Mlp& model, const Dataset& data, const TrainPlan& plan, int lr_epoch,
                 std::uint64_t epoch_seed, SgdState& state);

struct EvalResult {
    double clean_acc = 0.0;
    double clean_loss = 0.0;
    std::vector<std::pair<std::string, double>> robust;  // (attack name, accuracy)
};

double clean_accuracy(const Mlp& model, const Dataset& data);
double mean_clean_ce(const Mlp& model, const Dataset& data);

EvalResult evaluate(const Mlp& model, const Dataset& data, std::span<const AttackSpec> specs,
                    std::uint64_t seed);

}  // namespace atlab

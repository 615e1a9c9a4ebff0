#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "atlab/data.hpp"
#include "atlab/model.hpp"

namespace atlab {

enum class AttackFamily { kFgsm, kPgd, kMim, kCwPgd };

enum class AttackLoss { kCrossEntropy, kKl, kCwMargin };

// Fully determines adversarial-example generation under an L-inf budget.
struct AttackSpec {
    AttackFamily family = AttackFamily::kPgd;
    double epsilon = 8.0 / 255.0;    // L-inf radius, input units
    double step_size = 2.0 / 255.0;  // per-iteration step, input units
    int steps = 10;
    double mim_decay = 1.0;    // MIM momentum decay
    bool random_start = false; // uniform init inside the epsilon ball
    double cw_kappa = 0.0;     // CW margin confidence
    std::string name;          // report key; empty -> default_attack_name
};

// Enforces 0 < epsilon <= 1, step_size > 0, steps >= 1, and the FGSM
// constraint steps == 1 && step_size == epsilon.
void validate(const AttackSpec& spec);

std::string family_str(AttackFamily f);
AttackFamily family_from_str(const std::string& s);
std::string default_attack_name(const AttackSpec& spec);

// Mathematical sign: sign(0) = 0, so zero-gradient coordinates stay put.
inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Element-wise clamp of x_adv into [x - eps, x + eps] intersected with [0,1].
Tensor project(const Tensor& x_adv, const Tensor& x, double epsilon);

// The loss the attack ascends: CW_PGD always uses the margin loss,
// everything else uses the requested selector.
AttackLoss effective_attack_loss(const AttackSpec& spec, AttackLoss requested);

// Iterated sign-gradient ascent with projection. Random starts draw from a
// per-row seed so per-example generation is order-independent.
Tensor perturb(const Mlp& model, const Tensor& x, const std::vector<int>& y, const AttackSpec& spec,
               AttackLoss loss, std::span<const std::uint64_t> row_seeds);

// Convenience: derives row seeds as derive_seed(seed, kAttack, row).
Tensor perturb(const Mlp& model, const Tensor& x, const std::vector<int>& y, const AttackSpec& spec,
               AttackLoss loss, std::uint64_t seed);

// Fraction of examples still classified correctly after the attack.
// Deterministic given (model params, dataset, spec, seed).
double evaluate_robust(const Mlp& model, const Dataset& data, const AttackSpec& spec,
                       std::uint64_t seed);

}  // namespace atlab

#include "atlab/attack.hpp"

#include <algorithm>
#include <cmath>

#include "atlab/rng.hpp"

namespace atlab {

void validate(const AttackSpec& spec) {
    if (!(spec.epsilon > 0.0 && spec.epsilon <= 1.0)) {
        throw ConfigError("attack: epsilon must be in (0, 1], got " + std::to_string(spec.epsilon));
    }
    if (!(spec.step_size > 0.0)) {
        throw ConfigError("attack: step_size must be > 0, got " + std::to_string(spec.step_size));
    }
    if (spec.steps < 1) throw ConfigError("attack: steps must be >= 1");
    if (spec.family == AttackFamily::kFgsm) {
        if (spec.steps != 1) throw ConfigError("attack: FGSM requires steps == 1");
        if (spec.step_size != spec.epsilon) throw ConfigError("attack: FGSM requires step_size == epsilon");
    }
    if (spec.mim_decay < 0.0) throw ConfigError("attack: mim_decay must be >= 0");
    if (spec.cw_kappa < 0.0) throw ConfigError("attack: cw_kappa must be >= 0");
}

std::string family_str(AttackFamily f) {
    switch (f) {
        case AttackFamily::kFgsm: return "fgsm";
        case AttackFamily::kPgd: return "pgd";
        case AttackFamily::kMim: return "mim";
        case AttackFamily::kCwPgd: return "cw_pgd";
    }
    return "?";
}

AttackFamily family_from_str(const std::string& s) {
    if (s == "fgsm") return AttackFamily::kFgsm;
    if (s == "pgd") return AttackFamily::kPgd;
    if (s == "mim") return AttackFamily::kMim;
    if (s == "cw_pgd") return AttackFamily::kCwPgd;
    throw ConfigError("attack: unknown family '" + s + "'");
}

std::string default_attack_name(const AttackSpec& spec) {
    if (spec.family == AttackFamily::kFgsm) return "fgsm";
    return family_str(spec.family) + std::to_string(spec.steps);
}

Tensor project(const Tensor& x_adv, const Tensor& x, double epsilon) {
    require_same_shape(x_adv, x, "project");
    Tensor out = x_adv;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double lo = std::max(0.0, x.data[i] - epsilon);
        const double hi = std::min(1.0, x.data[i] + epsilon);
        out.data[i] = std::min(hi, std::max(lo, out.data[i]));
    }
    return out;
}

AttackLoss effective_attack_loss(const AttackSpec& spec, AttackLoss requested) {
    return spec.family == AttackFamily::kCwPgd ? AttackLoss::kCwMargin : requested;
}

namespace {

// Gradient of the selected batch loss w.r.t. the inputs. Scaling by 1/batch
// is irrelevant downstream: sign() and per-row L1 normalization both kill it.
Tensor input_gradient(const Mlp& model, const Tensor& x_adv, const std::vector<int>& y,
                      AttackLoss loss, double cw_kappa, const Tensor* clean_logits, int iteration) {
    Graph g;
    Var xv = g.leaf(x_adv);
    Mlp::Bound bound = model.bind_forward(g, xv);
    if (!all_finite(g.value(bound.logits))) {
        throw NumericError("attack: non-finite logits at iteration " + std::to_string(iteration),
                           iteration);
    }
    Var objective;
    switch (loss) {
        case AttackLoss::kCrossEntropy:
            objective = g.cross_entropy(bound.logits, y);
            break;
        case AttackLoss::kKl:
            objective = g.kl_divergence(g.leaf(*clean_logits), bound.logits);
            break;
        case AttackLoss::kCwMargin:
            objective = g.cw_margin(bound.logits, y, cw_kappa);
            break;
    }
    g.backward(objective);
    return g.grad(xv);
}

}  // namespace

Tensor perturb(const Mlp& model, const Tensor& x, const std::vector<int>& y, const AttackSpec& spec,
               AttackLoss loss, std::span<const std::uint64_t> row_seeds) {
    validate(spec);
    require_rank2(x, "perturb");
    const std::size_t m = x.rows(), d = x.cols();
    if (y.size() != m) {
        throw ShapeError("perturb: " + std::to_string(y.size()) + " labels for " + std::to_string(m) +
                         " rows");
    }
    if (spec.random_start && row_seeds.size() != m) {
        throw ContractError("perturb: random_start needs one seed per row");
    }

    const AttackLoss eff = effective_attack_loss(spec, loss);
    Tensor clean_logits;
    if (eff == AttackLoss::kKl) clean_logits = model.forward(x);

    Tensor x_adv = x;
    if (spec.random_start) {
        for (std::size_t i = 0; i < m; ++i) {
            Rng rng(row_seeds[i]);
            for (std::size_t j = 0; j < d; ++j) {
                x_adv.data[i * d + j] += rng.uniform(-spec.epsilon, spec.epsilon);
            }
        }
        x_adv = project(x_adv, x, spec.epsilon);
    }

    Tensor momentum;
    if (spec.family == AttackFamily::kMim) momentum = Tensor::zeros(x.shape);

    for (int k = 0; k < spec.steps; ++k) {
        Tensor grad = input_gradient(model, x_adv, y, eff, spec.cw_kappa, &clean_logits, k);
        const Tensor* direction = &grad;
        if (spec.family == AttackFamily::kMim) {
            for (std::size_t i = 0; i < m; ++i) {
                double l1 = 0.0;
                for (std::size_t j = 0; j < d; ++j) l1 += std::fabs(grad.data[i * d + j]);
                const double inv = l1 > 0.0 ? 1.0 / l1 : 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    momentum.data[i * d + j] =
                        spec.mim_decay * momentum.data[i * d + j] + grad.data[i * d + j] * inv;
                }
            }
            direction = &momentum;
        }
        for (std::size_t i = 0; i < x_adv.data.size(); ++i) {
            x_adv.data[i] += spec.step_size * sign(direction->data[i]);
        }
        x_adv = project(x_adv, x, spec.epsilon);
    }
    return x_adv;
}

Tensor perturb(const Mlp& model, const Tensor& x, const std::vector<int>& y, const AttackSpec& spec,
               AttackLoss loss, std::uint64_t seed) {
    std::vector<std::uint64_t> seeds(x.rows());
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(seed, stream::kAttack, i);
    return perturb(model, x, y, spec, loss, seeds);
}

double evaluate_robust(const Mlp& model, const Dataset& data, const AttackSpec& spec,
                       std::uint64_t seed) {
    if (data.size() == 0) throw ConfigError("evaluate_robust: empty dataset");
    const std::size_t n = data.size(), d = data.dim();
    const std::size_t chunk = 256;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t count = std::min(chunk, n - start);
        Tensor x({count, d},
                 std::vector<double>(data.inputs.data.begin() + static_cast<std::ptrdiff_t>(start * d),
                                     data.inputs.data.begin() + static_cast<std::ptrdiff_t>((start + count) * d)));
        std::vector<int> y(data.labels.begin() + static_cast<std::ptrdiff_t>(start),
                           data.labels.begin() + static_cast<std::ptrdiff_t>(start + count));
        std::vector<std::uint64_t> seeds(count);
        for (std::size_t i = 0; i < count; ++i) {
            seeds[i] = derive_seed(seed, stream::kAttack, start + i);
        }
        const Tensor x_adv = perturb(model, x, y, spec, AttackLoss::kCrossEntropy, seeds);
        const Tensor logits = model.forward(x_adv);
        const std::size_t c = logits.cols();
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < c; ++j) {
                if (logits.data[i * c + j] > logits.data[i * c + best]) best = j;
            }
            if (static_cast<int>(best) == y[i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace atlab

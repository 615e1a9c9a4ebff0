#include <doctest.h>

#include <cmath>

#include "atlab/attack.hpp"
#include "atlab/rng.hpp"

using namespace atlab;

namespace {

Tensor random_inputs(std::size_t n, std::size_t d, Rng& rng) {
    Tensor x = Tensor::zeros({n, d});
    for (double& v : x.data) v = rng.uniform01();
    return x;
}

double linf(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("attack spec validation") {
    AttackSpec s;
    s.epsilon = 0.0;
    CHECK_THROWS_AS(validate(s), ConfigError);
    s.epsilon = 1.5;
    CHECK_THROWS_AS(validate(s), ConfigError);
    s = AttackSpec{};
    s.family = AttackFamily::kFgsm;
    s.steps = 2;
    s.step_size = s.epsilon;
    CHECK_THROWS_AS(validate(s), ConfigError);
    s.steps = 1;
    s.step_size = s.epsilon / 2;
    CHECK_THROWS_AS(validate(s), ConfigError);
    s.step_size = s.epsilon;
    CHECK_NOTHROW(validate(s));
}

TEST_CASE("project: fixed point, clamp arithmetic, domain intersection") {
    const Tensor x = Tensor::matrix(1, 3, {0.5, 0.5, 0.02});
    const Tensor inside = Tensor::matrix(1, 3, {0.55, 0.45, 0.05});
    CHECK(project(inside, x, 0.1).data == inside.data);

    const Tensor far = Tensor::matrix(1, 3, {0.9, 0.5, 0.5});
    CHECK(project(far, x, 0.1).data[0] == 0.6);

    const Tensor below = Tensor::matrix(1, 3, {0.5, 0.5, -0.3});
    CHECK(project(below, x, 0.1).data[2] == 0.0);  // [0,1] clamp dominates
}

TEST_CASE("sign(0) = 0") {
    CHECK(sign(0.0) == 0.0);
    CHECK(sign(3.5) == 1.0);
    CHECK(sign(-2.0) == -1.0);
}

TEST_CASE("PGD with K=1, alpha=eps, no random start reproduces FGSM bitwise") {
    const Mlp model = Mlp::build({3, {8}, 2}, 17);
    Rng rng(55);
    const Tensor x = random_inputs(6, 3, rng);
    const std::vector<int> y = {0, 1, 0, 1, 1, 0};

    AttackSpec fgsm;
    fgsm.family = AttackFamily::kFgsm;
    fgsm.epsilon = 0.1;
    fgsm.step_size = 0.1;
    fgsm.steps = 1;

    AttackSpec pgd1 = fgsm;
    pgd1.family = AttackFamily::kPgd;

    const Tensor a = perturb(model, x, y, fgsm, AttackLoss::kCrossEntropy, std::uint64_t{1});
    const Tensor b = perturb(model, x, y, pgd1, AttackLoss::kCrossEntropy, std::uint64_t{1});
    CHECK(a.data == b.data);
}

TEST_CASE("MIM with decay 0 degenerates to PGD on small instances") {
    const Mlp model = Mlp::build({3, {6}, 2}, 29);
    Rng rng(56);
    const Tensor x = random_inputs(4, 3, rng);
    const std::vector<int> y = {1, 0, 1, 0};

    AttackSpec pgd;
    pgd.family = AttackFamily::kPgd;
    pgd.epsilon = 0.08;
    pgd.step_size = 0.02;
    pgd.steps = 5;

    AttackSpec mim = pgd;
    mim.family = AttackFamily::kMim;
    mim.mim_decay = 0.0;

    const Tensor a = perturb(model, x, y, pgd, AttackLoss::kCrossEntropy, std::uint64_t{1});
    const Tensor b = perturb(model, x, y, mim, AttackLoss::kCrossEntropy, std::uint64_t{1});
    CHECK(a.data == b.data);
}

TEST_CASE("attacks are deterministic given the seed; random starts differ across seeds") {
    const Mlp model = Mlp::build({4, {8}, 2}, 31);
    Rng rng(57);
    const Tensor x = random_inputs(5, 4, rng);
    const std::vector<int> y = {0, 0, 1, 1, 0};

    AttackSpec spec;
    spec.epsilon = 0.1;
    spec.step_size = 0.03;
    spec.steps = 4;
    spec.random_start = true;

    const Tensor a = perturb(model, x, y, spec, AttackLoss::kCrossEntropy, std::uint64_t{11});
    const Tensor b = perturb(model, x, y, spec, AttackLoss::kCrossEntropy, std::uint64_t{11});
    const Tensor c = perturb(model, x, y, spec, AttackLoss::kCrossEntropy, std::uint64_t{12});
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
}

TEST_CASE("every attack family respects the ball and the unit box") {
    Rng rng(58);
    const Mlp model = Mlp::build({3, {10}, 3}, 33);
    const AttackFamily families[] = {AttackFamily::kFgsm, AttackFamily::kPgd, AttackFamily::kMim,
                                     AttackFamily::kCwPgd};
    for (int trial = 0; trial < 60; ++trial) {
        AttackSpec spec;
        spec.family = families[trial % 4];
        spec.epsilon = rng.uniform(0.01, 1.0);
        spec.steps = spec.family == AttackFamily::kFgsm ? 1 : 1 + static_cast<int>(rng.below(5));
        spec.step_size =
            spec.family == AttackFamily::kFgsm ? spec.epsilon : rng.uniform(0.005, 0.5);
        spec.random_start = rng.below(2) == 0;
        const Tensor x = random_inputs(3, 3, rng);
        const std::vector<int> y = {0, 1, 2};
        const Tensor adv =
            perturb(model, x, y, spec, AttackLoss::kCrossEntropy, static_cast<std::uint64_t>(trial));
        CHECK(linf(adv, x) <= spec.epsilon + 1e-12);
        for (double v : adv.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("linear-model PGD saturates the ball per the closed form") {
    // Build a 2-class linear model whose per-coordinate weight differences
    // are bounded away from zero, so the CE gradient sign is constant.
    const MlpSpec spec{3, {}, 2};
    Mlp model = Mlp::build(spec, 3);
    ParamVector p = model.params();
    // weights W[3x2] then bias b[2]
    const double w[6] = {0.8, -0.1, -0.4, 0.3, 0.2, 0.9};
    for (int i = 0; i < 6; ++i) p.values[static_cast<std::size_t>(i)] = w[i];
    p.values[6] = 0.05;
    p.values[7] = -0.02;
    model.set_params(p);

    Rng rng(59);
    const Tensor x = random_inputs(8, 3, rng);
    std::vector<int> y(8);
    for (std::size_t i = 0; i < 8; ++i) y[i] = static_cast<int>(rng.below(2));

    AttackSpec attack;
    attack.family = AttackFamily::kPgd;
    attack.epsilon = 0.15;
    attack.step_size = 0.04;
    attack.steps = 6;  // 6 * 0.04 = 0.24 >= eps, saturating

    const Tensor adv = perturb(model, x, y, attack, AttackLoss::kCrossEntropy, std::uint64_t{0});
    for (std::size_t i = 0; i < 8; ++i) {
        const std::size_t other = static_cast<std::size_t>(1 - y[i]);
        for (std::size_t j = 0; j < 3; ++j) {
            const double s = sign(w[j * 2 + other] - w[j * 2 + static_cast<std::size_t>(y[i])]);
            const double lo = std::max(0.0, x.at(i, j) - attack.epsilon);
            const double hi = std::min(1.0, x.at(i, j) + attack.epsilon);
            const double expect = s > 0 ? hi : (s < 0 ? lo : x.at(i, j));
            CHECK(adv.at(i, j) == expect);
        }
    }
}

TEST_CASE("vanishing budget: robust accuracy equals clean accuracy") {
    const Mlp model = Mlp::build({2, {8}, 2}, 41);
    const Dataset data = make_two_moons(60, 0.1, 4);

    AttackSpec spec;
    spec.epsilon = 1e-9;
    spec.step_size = 1e-9;
    spec.steps = 1;
    const double robust = evaluate_robust(model, data, spec, 1);

    const Tensor logits = model.forward(data.inputs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        correct += (logits.at(i, 1) > logits.at(i, 0) ? 1 : 0) == data.labels[i] ? 1 : 0;
    }
    CHECK(robust == doctest::Approx(static_cast<double>(correct) / 60.0).epsilon(1e-12));
}

TEST_CASE("untrained model sits near chance on balanced two-class data") {
    const Dataset data = make_two_moons(200, 0.1, 6);
    AttackSpec spec;
    spec.epsilon = 0.1;
    spec.step_size = 0.025;
    spec.steps = 5;
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Mlp model = Mlp::build({2, {16}, 2}, 100 + seed);
        total += evaluate_robust(model, data, spec, seed);
    }
    const double mean = total / 5.0;
    CHECK(mean > 0.2);
    CHECK(mean < 0.8);
}

TEST_CASE("non-finite model output raises a numeric error naming the iteration") {
    Mlp model = Mlp::build({2, {4}, 2}, 43);
    ParamVector p = model.params();
    p.values[0] = std::numeric_limits<double>::quiet_NaN();
    model.set_params(p);

    AttackSpec spec;
    spec.epsilon = 0.1;
    spec.step_size = 0.05;
    spec.steps = 2;
    const Tensor x = Tensor::matrix(1, 2, {0.5, 0.5});
    try {
        perturb(model, x, {0}, spec, AttackLoss::kCrossEntropy, std::uint64_t{1});
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.where == 0);
        CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
}

#include <doctest.h>

#include <cmath>

#include "atlab/rng.hpp"
#include "atlab/trainer.hpp"

using namespace atlab;

TEST_CASE("sgd_step: plain descent and fixed-point cases") {
    ParamVector p;
    p.layout.total = 2;
    p.layout.slices = {{"w", 0, 2}};
    p.values = {1.0, -2.0};
    ParamVector g = p;
    g.values = {0.5, -1.0};
    SgdState st(2);

    sgd_step(p, g, st, 0.1, 0.0, 0.0);
    CHECK(p.values[0] == doctest::Approx(1.0 - 0.05).epsilon(1e-15));
    CHECK(p.values[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-15));

    ParamVector q = p;
    ParamVector zero = p;
    zero.values = {0.0, 0.0};
    SgdState st2(2);
    sgd_step(q, zero, st2, 0.1, 0.9, 0.0);
    CHECK(q.values == p.values);
}

TEST_CASE("sgd_step two-step momentum hand trace on f(t) = t^2") {
    // theta = 1, lr = 0.1, momentum = 0.9, grad = 2*theta
    ParamVector p;
    p.layout.total = 1;
    p.layout.slices = {{"w", 0, 1}};
    p.values = {1.0};
    SgdState st(1);

    ParamVector g = p;
    g.values = {2.0 * p.values[0]};
    sgd_step(p, g, st, 0.1, 0.9, 0.0);
    CHECK(std::fabs(p.values[0] - 0.8) < 1e-12);  // v=2, theta=1-0.2

    g.values = {2.0 * p.values[0]};
    sgd_step(p, g, st, 0.1, 0.9, 0.0);
    CHECK(std::fabs(p.values[0] - 0.46) < 1e-12);  // v=0.9*2+1.6=3.4, theta=0.8-0.34
}

TEST_CASE("sgd_step applies coupled weight decay") {
    ParamVector p;
    p.layout.total = 1;
    p.layout.slices = {{"w", 0, 1}};
    p.values = {2.0};
    ParamVector g = p;
    g.values = {0.0};
    SgdState st(1);
    sgd_step(p, g, st, 0.1, 0.0, 0.01);
    CHECK(std::fabs(p.values[0] - (2.0 - 0.1 * 0.02)) < 1e-15);
}

TEST_CASE("lr_at: constant before the first milestone, linear between, clamped after") {
    LrSchedule s;
    s.initial = 0.01;
    s.milestones = {{15, 0.01}, {22, 0.001}, {30, 0.0001}};
    CHECK(lr_at(s, 0) == 0.01);
    CHECK(lr_at(s, 10) == 0.01);
    CHECK(lr_at(s, 15) == 0.01);
    // midpoint of a linear segment is the arithmetic mean of its endpoints
    const double mid = lr_at(s, 26);
    CHECK(mid == doctest::Approx(0.5 * (0.001 + 0.0001)).epsilon(1e-12));
    CHECK(lr_at(s, 30) == doctest::Approx(0.0001).epsilon(1e-12));
    CHECK(lr_at(s, 100) == doctest::Approx(0.0001).epsilon(1e-12));
    for (int e = 0; e <= 120; ++e) CHECK(lr_at(s, e) > 0.0);
}

TEST_CASE("lr_at handles the paper-shape schedule") {
    LrSchedule s;
    s.initial = 0.01;
    s.milestones = {{60, 0.01}, {90, 0.001}, {120, 0.0001}};
    CHECK(lr_at(s, 59) == 0.01);
    CHECK(lr_at(s, 75) == doctest::Approx(0.5 * (0.01 + 0.001)).epsilon(1e-12));
    CHECK(lr_at(s, 120) == doctest::Approx(0.0001).epsilon(1e-12));
}

TEST_CASE("lr schedule validation") {
    LrSchedule s;
    s.initial = 0.0;
    CHECK_THROWS_AS(validate(s), ConfigError);
    s.initial = 0.1;
    s.milestones = {{10, 0.01}, {10, 0.001}};
    CHECK_THROWS_AS(validate(s), ConfigError);
    s.milestones = {{10, 0.01}, {20, -0.5}};
    CHECK_THROWS_AS(validate(s), ConfigError);
}

namespace {
TrainPlan tiny_plan() {
    TrainPlan plan;
    plan.warmup_epochs = 0;
    plan.adv_epochs = 1;
    plan.batch_size = 16;
    plan.lr.initial = 0.05;
    plan.lr.milestones = {{100, 0.05}};
    plan.train_attack.epsilon = 0.1;
    plan.train_attack.step_size = 0.025;
    plan.train_attack.steps = 3;
    plan.train_attack.random_start = true;
    return plan;
}
}  // namespace

TEST_CASE("adv_epoch is deterministic given identical parameters and seed") {
    const Dataset train = make_two_moons(64, 0.12, 3);
    const TrainPlan plan = tiny_plan();

    Mlp a = Mlp::build({2, {8}, 2}, 5);
    Mlp b = Mlp::build({2, {8}, 2}, 5);
    SgdState sa(a.param_count()), sb(b.param_count());
    const double la = adv_epoch(a, train, plan, 1, 777, sa);
    const double lb = adv_epoch(b, train, plan, 1, 777, sb);
    CHECK(la == lb);
    CHECK(a.params().values == b.params().values);

    Mlp c = Mlp::build({2, {8}, 2}, 5);
    SgdState sc(c.param_count());
    adv_epoch(c, train, plan, 1, 778, sc);
    CHECK(a.params().values != c.params().values);
}

TEST_CASE("zero-budget attack makes adv_epoch equal clean training") {
    const Dataset train = make_two_moons(64, 0.12, 4);
    TrainPlan plan = tiny_plan();
    plan.train_attack.epsilon = 1e-300;  // vanishing budget
    plan.train_attack.step_size = 1e-300;
    plan.train_attack.steps = 1;
    plan.train_attack.random_start = false;

    Mlp adv = Mlp::build({2, {8}, 2}, 6);
    Mlp clean = Mlp::build({2, {8}, 2}, 6);
    SgdState sa(adv.param_count()), sc(clean.param_count());
    adv_epoch(adv, train, plan, 1, 42, sa);
    clean_epoch(clean, train, plan, 1, 42, sc);
    CHECK(adv.params().values == clean.params().values);
}

TEST_CASE("mean loss on a fresh 2-class model sits near ln 2") {
    const Dataset train = make_two_moons(128, 0.12, 7);
    const TrainPlan plan = tiny_plan();
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Mlp m = Mlp::build({2, {16}, 2}, 300 + seed);
        SgdState st(m.param_count());
        total += adv_epoch(m, train, plan, 1, seed, st);
    }
    CHECK(std::fabs(total / 3.0 - std::log(2.0)) < 0.2);
}

TEST_CASE("a short loss-ascending attack cannot raise accuracy above clean") {
    const Dataset test = make_two_moons(100, 0.12, 8);
    Mlp m = Mlp::build({2, {16}, 2}, 9);
    // a little training so clean accuracy is meaningful
    TrainPlan plan = tiny_plan();
    SgdState st(m.param_count());
    for (int e = 1; e <= 5; ++e) {
        const Dataset train = make_two_moons(128, 0.12, 10);
        clean_epoch(m, train, plan, e, derive_seed(1, stream::kEpoch, static_cast<std::uint64_t>(e)), st);
    }
    AttackSpec spec;
    spec.epsilon = 0.1;
    spec.step_size = 0.025;
    spec.steps = 10;
    spec.random_start = false;
    const double robust = evaluate_robust(m, test, spec, 1);
    CHECK(robust <= clean_accuracy(m, test) + 1e-12);
}

TEST_CASE("evaluate: empty attack list gives clean accuracy only") {
    const Dataset test = make_two_moons(40, 0.1, 11);
    const Mlp m = Mlp::build({2, {8}, 2}, 12);
    const EvalResult r = evaluate(m, test, {}, 1);
    CHECK(r.robust.empty());
    CHECK(r.clean_acc >= 0.0);
    CHECK(r.clean_acc <= 1.0);
    CHECK(r.clean_loss == mean_clean_ce(m, test));
}

TEST_CASE("separable blobs: a linear model reaches full train accuracy") {
    const Dataset train = make_blobs(80, {{0.15, 0.15}, {0.85, 0.85}}, 0.03, 13);
    Mlp m = Mlp::build({2, {}, 2}, 14);
    TrainPlan plan = tiny_plan();
    plan.lr.initial = 0.5;
    plan.lr.milestones = {{1000, 0.5}};
    SgdState st(m.param_count());
    for (int e = 1; e <= 40; ++e) {
        clean_epoch(m, train, plan, e, derive_seed(2, stream::kEpoch, static_cast<std::uint64_t>(e)), st);
    }
    CHECK(clean_accuracy(m, train) == 1.0);
}

TEST_CASE("train plan validation") {
    TrainPlan plan = tiny_plan();
    plan.momentum = 1.0;
    CHECK_THROWS_AS(validate(plan), ConfigError);
    plan.momentum = 0.9;
    plan.batch_size = 0;
    CHECK_THROWS_AS(validate(plan), ConfigError);
    plan.batch_size = 8;
    plan.weight_decay = -0.1;
    CHECK_THROWS_AS(validate(plan), ConfigError);
    plan.weight_decay = 0.0;
    CHECK_NOTHROW(validate(plan));
}

#include "atlab/piat.hpp"

#include <chrono>

#include "atlab/rng.hpp"

namespace atlab {

void validate(const LambdaSchedule& s) {
    if (s.kind == LambdaKind::kFixed) {
        if (!(s.fixed_value >= 0.0 && s.fixed_value <= 1.0)) {
            throw ConfigError("lambda: fixed value must be in [0, 1]");
        }
    } else {
        if (!(s.c >= 1.0)) throw ConfigError("lambda: dynamic schedule requires c >= 1");
    }
    if (s.epoch_base != 0 && s.epoch_base != 1) throw ConfigError("lambda: epoch_base must be 0 or 1");
}

std::string lambda_kind_str(LambdaKind k) { return k == LambdaKind::kFixed ? "fixed" : "dynamic"; }

LambdaKind lambda_kind_from_str(const std::string& s) {
    if (s == "fixed") return LambdaKind::kFixed;
    if (s == "dynamic") return LambdaKind::kDynamic;
    throw ConfigError("lambda: unknown kind '" + s + "'");
}

double lambda_at(const LambdaSchedule& s, int n) {
    if (n < 0) throw ConfigError("lambda_at: n must be >= 0");
    if (s.kind == LambdaKind::kFixed) return s.fixed_value;
    return (static_cast<double>(n) + 1.0) / (static_cast<double>(n) + s.c);
}

ParamVector interpolate(const ParamVector& theta_prev, const ParamVector& theta_cur, double lambda) {
    check_layout_match(theta_prev, theta_cur, "interpolate");
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("interpolate: lambda must be in [0, 1], got " + std::to_string(lambda));
    }
    if (lambda == 0.0) return theta_cur;
    if (lambda == 1.0) return theta_prev;
    ParamVector out;
    out.layout = theta_cur.layout;
    out.values.resize(theta_cur.values.size());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = lambda * theta_prev.values[i] + (1.0 - lambda) * theta_cur.values[i];
    }
    return out;
}

namespace {

void check_finite_params(const Mlp& model, int epoch) {
    if (!all_finite(model.params().values)) {
        throw NumericError("piat: non-finite parameters after epoch " + std::to_string(epoch), epoch);
    }
}

EpochRecord finish_record(EpochRecord rec, const Mlp& model, const PiatCallbacks& cb,
                          std::chrono::steady_clock::time_point t0) {
    if (cb.evaluate) {
        const PiatEval ev = cb.evaluate(model);
        rec.clean_acc = ev.clean_acc;
        rec.robust_acc = ev.robust_acc;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cb.on_epoch_end) cb.on_epoch_end(rec, model);
    return rec;
}

}  // namespace

PiatResult run_piat(Mlp& model, int warmup_epochs, int adv_epochs, const LambdaSchedule& schedule,
                    std::uint64_t master_seed, const PiatCallbacks& callbacks) {
    if (warmup_epochs < 0) throw ConfigError("run_piat: warmup_epochs must be >= 0");
    if (adv_epochs < 0) throw ConfigError("run_piat: adv_epochs must be >= 0");
    validate(schedule);
    if (!callbacks.clean_step && warmup_epochs > 0) {
        throw ContractError("run_piat: warm-up requested without a clean_step callback");
    }
    if (!callbacks.adv_step && adv_epochs > 0) {
        throw ContractError("run_piat: adversarial epochs requested without an adv_step callback");
    }

    PiatResult result;
    int global_epoch = 0;

    for (int i = 1; i <= warmup_epochs; ++i) {
        ++global_epoch;
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = global_epoch;
        rec.phase = "warmup";
        rec.train_loss = callbacks.clean_step(model, global_epoch,
                                              derive_seed(master_seed, stream::kEpoch, global_epoch));
        check_finite_params(model, global_epoch);
        result.records.push_back(finish_record(std::move(rec), model, callbacks, t0));
    }

    ParamVector theta_interp = model.params();  // theta'_0

    for (int i = 1; i <= adv_epochs; ++i) {
        ++global_epoch;
        const auto t0 = std::chrono::steady_clock::now();
        model.set_params(theta_interp);  // theta_i <- theta'_{i-1}

        EpochRecord rec;
        rec.epoch = global_epoch;
        rec.phase = "adv";
        rec.adv_epoch = i;
        rec.train_loss = callbacks.adv_step(model, global_epoch,
                                            derive_seed(master_seed, stream::kEpoch, global_epoch));
        check_finite_params(model, global_epoch);

        const double lambda = lambda_at(schedule, i - 1 + schedule.epoch_base);
        rec.lambda = lambda;
        theta_interp = interpolate(theta_interp, model.params(), lambda);
        model.set_params(theta_interp);
        check_finite_params(model, global_epoch);

        result.records.push_back(finish_record(std::move(rec), model, callbacks, t0));
    }

    result.final_params = theta_interp;
    return result;
}

}  // namespace atlab

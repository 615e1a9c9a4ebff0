#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "atlab/model.hpp"
#include "atlab/piat_schedule.hpp"

namespace atlab {

// Element-wise lambda*theta_prev + (1-lambda)*theta_cur. The lambda = 0 and
// lambda = 1 boundaries are exact copies, bit for bit.
ParamVector interpolate(const ParamVector& theta_prev, const ParamVector& theta_cur, double lambda);

// Per-epoch metrics, serialized to the JSON-lines stream. `seconds` stays
// out of the stream so reruns reproduce the file byte for byte.
struct EpochRecord {
    int epoch = 0;          // 1-based over warm-up + adversarial epochs
    std::string phase;      // "warmup" | "adv"
    int adv_epoch = 0;      // 1-based adversarial index; 0 during warm-up
    double lambda = 0.0;    // 0 during warm-up
    double train_loss = 0.0;
    double clean_acc = 0.0;
    std::vector<std::pair<std::string, double>> robust_acc;
    double seconds = 0.0;
};

struct PiatEval {
    double clean_acc = 0.0;
    std::vector<std::pair<std::string, double>> robust_acc;
};

// The pieces run_piat drives. Steps mutate the model in place and return the
// epoch's mean training loss; seeds arrive pre-derived per global epoch.
struct PiatCallbacks {
    std::function<double(Mlp&, int global_epoch, std::uint64_t epoch_seed)> clean_step;
    std::function<double(Mlp&, int global_epoch, std::uint64_t epoch_seed)> adv_step;
    std::function<PiatEval(const Mlp&)> evaluate;                      // optional
    std::function<void(const EpochRecord&, const Mlp&)> on_epoch_end;  // optional
};

struct PiatResult {
    ParamVector final_params;
    std::vector<EpochRecord> records;
};

// Warm-up on clean steps, then adversarial epochs with epoch-end parameter
// interpolation:
//   theta'_0 <- theta after warm-up
//   for i = 1..N: restore theta <- theta'_{i-1}; run one adversarial epoch;
//                 theta'_i <- lambda_i*theta'_{i-1} + (1-lambda_i)*theta_i
// Metrics are evaluated on the post-interpolation parameters, the ones the
// method deploys. Epoch seeds are derive_seed(master_seed, kEpoch, epoch).
PiatResult run_piat(Mlp& model, int warmup_epochs, int adv_epochs, const LambdaSchedule& schedule,
                    std::uint64_t master_seed, const PiatCallbacks& callbacks);

}  // namespace atlab

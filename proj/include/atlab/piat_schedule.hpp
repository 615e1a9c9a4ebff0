#pragma once

#include <string>

#include "atlab/error.hpp"

namespace atlab {

enum class LambdaKind { kFixed, kDynamic };

// Mixing coefficient for the epoch-end interpolation. DYNAMIC follows
// g(n) = (n+1)/(n+c), growing toward 1 so later epochs retain more history.
struct LambdaSchedule {
    LambdaKind kind = LambdaKind::kDynamic;
    double fixed_value = 0.0;  // FIXED only
    double c = 10.0;           // DYNAMIC only, >= 1
    // Index of the first adversarial epoch when evaluating g: 1 matches the
    // training loop's i = 1..N, 0 starts at g(0) = 1/c.
    int epoch_base = 1;
};

void validate(const LambdaSchedule& s);
std::string lambda_kind_str(LambdaKind k);
LambdaKind lambda_kind_from_str(const std::string& s);

// FIXED -> fixed_value; DYNAMIC -> (n+1)/(n+c). Requires n >= 0.
double lambda_at(const LambdaSchedule& s, int n);

}  // namespace atlab

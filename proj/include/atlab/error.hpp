#pragma once

#include <stdexcept>
#include <string>

namespace atlab {

// Dimension/shape disagreement; message names both shapes.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Out-of-range class label or element index.
struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A logit row with L2 norm below the degeneracy threshold.
struct DegenerateLogitsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Zero direction vector handed to the landscape probe.
struct DegenerateDirectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ParamVector layouts disagree (length or slice structure).
struct LayoutError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API contract violation (non-scalar backward root, reused graph, ...).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value; message carries the field path(s).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, bad header).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / stream failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite value where a finite one is required. `where` identifies the
// failing epoch / batch / iteration, depending on context.
struct NumericError : std::runtime_error {
    int where;
    NumericError(const std::string& msg, int where_index)
        : std::runtime_error(msg), where(where_index) {}
};

}  // namespace atlab

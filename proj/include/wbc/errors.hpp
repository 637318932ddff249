#pragma once

#include <stdexcept>
#include <string>

namespace wbc {

/// Tensor or parameter dimensions disagree with what an operation expects.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A spatial configuration (window, stride, padding, grid) cannot fit the data.
struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input data (CSV cells, row widths, label ranges). Messages carry
/// file and row context where available.
struct DataFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training aborted (non-finite loss, bad batch geometry); message carries
/// epoch/batch context.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rank-deficient linear system with no regularization to rescue it.
struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace wbc

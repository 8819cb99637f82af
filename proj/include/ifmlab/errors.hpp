#pragma once

#include <stdexcept>
#include <string>

namespace ifm {

// Dataset / ingestion
struct BadMagic : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TruncatedPayload : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientTextures : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnreadableImage : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TextureTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptySource : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File formats
struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadHeader : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ChecksumMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model / numerics
struct BadShape : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadLabel : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct WidthMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ZeroSamples : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyBatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonIntegerScale : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateRho : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training
struct DivergedLoss : std::runtime_error {
    long step_index;
    DivergedLoss(const std::string& msg, long step) : std::runtime_error(msg), step_index(step) {}
};
struct DataExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyHistory : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptySplit : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ifm

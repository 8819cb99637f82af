#pragma once

// Checkpoint archive: named float32 arrays (parameters and batch-norm running
// statistics) plus a JSON metadata block (epoch, validation metrics, config
// echo), with a trailing CRC32.

#include <string>
#include <vector>

#include "models.hpp"

namespace ifm {

struct NamedArray {
    std::string name;
    std::vector<int64_t> dims;
    std::vector<float> data;
};

struct CheckpointState {
    std::vector<NamedArray> arrays;
    std::string meta_json;
};

void save_checkpoint(const CheckpointState& state, const std::string& path);
CheckpointState load_checkpoint(const std::string& path);

CheckpointState snapshot_arrays(std::vector<ParamRef<float>> refs, const std::string& meta_json);

// Copies arrays back into the referenced tensors; throws VersionMismatch when
// a name is missing or a shape differs.
void restore_arrays(std::vector<ParamRef<float>> refs, const CheckpointState& state);

}  // namespace ifm

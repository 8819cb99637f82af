#pragma once

// Scoring of checkpoints on dual-labeled splits: the same logits are compared
// against the digit label and the texture label separately.

#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "models.hpp"

namespace ifm {

struct EvalResult {
    std::string model;  // checkpoint id / row label
    std::string split;
    int64_t n = 0;
    double digit_accuracy = 0.0;
    double texture_accuracy = 0.0;
    // min/max ratio of the two accuracies; 1.0 means both features are
    // learned equally.
    double balance() const;
};

// Single forward pass in eval mode over the split.
EvalResult evaluate_model(Classifier<float>& model, const Split& split, const std::string& split_name,
                          const std::string& checkpoint_id, int64_t batch = 512);

// Rebuilds the classifier recorded in the checkpoint metadata and scores it.
EvalResult evaluate(const CheckpointState& ckpt, const Split& split, const std::string& split_name,
                    const std::string& checkpoint_id);

Classifier<float> classifier_from_checkpoint(const CheckpointState& ckpt);

struct ReferenceRow {
    std::string model;
    double digit_acc;        // fraction
    double texture_acc;      // fraction; < 0 means not reported
};

// Test accuracies reported for this benchmark (used for side-by-side
// comparison in reports): two texture-dominated baselines, the invertible
// iCE fi-RevNet literature row, and the two IFM-selected models.
const std::vector<ReferenceRow>& paper_reference_rows();

std::string report_csv(const std::vector<EvalResult>& results);
std::string report_table(const std::vector<EvalResult>& results, bool with_reference_rows);

}  // namespace ifm

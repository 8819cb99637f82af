#pragma once

// End-to-end optimization of L = L_clf - lambda * sum_l F_l over the
// classifier and the three pair discriminators jointly, with per-epoch
// validation, dual model selection and checkpointing.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "mi.hpp"
#include "models.hpp"

namespace ifm {

struct TrainSeeds {
    uint64_t data = 1;
    uint64_t model = 2;
    uint64_t sampling = 3;
};

struct TrainConfig {
    double learning_rate = 0.01;
    int64_t batch_size = 128;
    int64_t epochs = 30;
    double lambda_ifm = 1.0;  // 0.0 = baseline
    int64_t pairs_per_image = 32;
    ObjectiveForm objective_form = ObjectiveForm::Standard;
    TrainSeeds seeds;
    double momentum = 0.9;
    // With the machinery disabled no discriminator exists at all; a lambda of
    // 0 with the machinery on still reports F_l but routes no gradient.
    bool ifm_machinery = true;
    ClassifierConfig classifier;
    std::array<int64_t, 3> disc_hidden{256, 128, 64};
    int64_t eval_batch = 512;
    std::string metrics_path;  // JSONL, one epoch record per line, if nonempty
    bool verbose = false;

    void validate() const;
};

struct EpochRecord {
    int64_t epoch = 0;
    double loss = 0.0;       // mean over steps of L
    double clf_loss = 0.0;   // mean over steps of L_clf
    std::array<double, 3> f{0.0, 0.0, 0.0};  // mean F_l per adjacent pair
    double val_digit_acc = 0.0;
    double val_texture_acc = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    CheckpointState checkpoint_best_digit;
    CheckpointState checkpoint_best_texture;
    CheckpointState checkpoint_final;
    int64_t best_digit_epoch = 0;
    int64_t best_texture_epoch = 0;
    TrainConfig config;
};

TrainResult train(const TrainConfig& config, const DatasetBundle& bundle);

// argmax over epochs of the respective validation accuracy; ties resolve to
// the earliest epoch.
std::pair<int64_t, int64_t> select_checkpoints(const std::vector<EpochRecord>& history);

std::string epoch_record_json(const EpochRecord& r);

std::string objective_form_name(ObjectiveForm form);
ObjectiveForm objective_form_from_name(const std::string& name);

}  // namespace ifm

#include "ifmlab/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ifmlab/eval.hpp"
#include "ifmlab/optim.hpp"
#include "json.hpp"

namespace ifm {

void TrainConfig::validate() const {
    if (lambda_ifm < 0) throw std::invalid_argument("lambda_ifm must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    if (pairs_per_image < 1) throw std::invalid_argument("pairs_per_image must be >= 1");
}

std::string objective_form_name(ObjectiveForm form) {
    return form == ObjectiveForm::Standard ? "standard" : "paper_literal";
}

ObjectiveForm objective_form_from_name(const std::string& name) {
    if (name == "standard") return ObjectiveForm::Standard;
    if (name == "paper_literal") return ObjectiveForm::PaperLiteral;
    throw std::invalid_argument("unknown objective form: " + name);
}

std::string epoch_record_json(const EpochRecord& r) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["clf_loss"] = r.clf_loss;
    j["f_conv12"] = r.f[0];
    j["f_conv23"] = r.f[1];
    j["f_conv34"] = r.f[2];
    j["val_digit_acc"] = r.val_digit_acc;
    j["val_texture_acc"] = r.val_texture_acc;
    j["seconds"] = r.seconds;
    return j.dump();
}

std::pair<int64_t, int64_t> select_checkpoints(const std::vector<EpochRecord>& history) {
    if (history.empty()) throw EmptyHistory("no epochs recorded");
    int64_t best_digit = 0, best_texture = 0;
    for (int64_t i = 1; i < static_cast<int64_t>(history.size()); ++i) {
        if (history[static_cast<size_t>(i)].val_digit_acc >
            history[static_cast<size_t>(best_digit)].val_digit_acc)
            best_digit = i;
        if (history[static_cast<size_t>(i)].val_texture_acc >
            history[static_cast<size_t>(best_texture)].val_texture_acc)
            best_texture = i;
    }
    return {best_digit, best_texture};
}

namespace {

nlohmann::json config_echo(const TrainConfig& c) {
    nlohmann::json j;
    j["learning_rate"] = c.learning_rate;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["lambda_ifm"] = c.lambda_ifm;
    j["pairs_per_image"] = c.pairs_per_image;
    j["objective_form"] = objective_form_name(c.objective_form);
    j["momentum"] = c.momentum;
    j["ifm_machinery"] = c.ifm_machinery;
    j["seeds"] = {{"data", c.seeds.data}, {"model", c.seeds.model}, {"sampling", c.seeds.sampling}};
    j["conv_channels"] = c.classifier.conv_channels;
    j["num_classes"] = c.classifier.num_classes;
    j["input_hw"] = c.classifier.input_hw;
    j["leaky_slope"] = c.classifier.leaky_slope;
    j["disc_hidden"] = c.disc_hidden;
    return j;
}

Tensor<float> batch_tensor(const Split& split, const std::vector<int64_t>& order, int64_t begin,
                           int64_t count, int64_t hw, std::vector<int>* digit_labels,
                           std::vector<int>* texture_labels) {
    Tensor<float> x(count, 1, hw, hw);
    if (digit_labels) digit_labels->resize(static_cast<size_t>(count));
    if (texture_labels) texture_labels->resize(static_cast<size_t>(count));
    for (int64_t k = 0; k < count; ++k) {
        const ShiftedExample& ex = split[static_cast<size_t>(order[static_cast<size_t>(begin + k)])];
        float* dst = x.ptr() + k * hw * hw;
        for (int64_t i = 0; i < hw * hw; ++i)
            dst[i] = static_cast<float>(ex.image[static_cast<size_t>(i)]) * (1.0f / 255.0f);
        if (digit_labels) (*digit_labels)[static_cast<size_t>(k)] = ex.digit_label;
        if (texture_labels) (*texture_labels)[static_cast<size_t>(k)] = ex.texture_label;
    }
    return x;
}

struct ModelStack {
    Classifier<float> clf;
    std::array<Discriminator<float>, 3> ds;
    bool has_ds = false;

    std::vector<ParamRef<float>> all_params() {
        std::vector<ParamRef<float>> refs = clf.params();
        if (has_ds)
            for (int l = 0; l < 3; ++l) {
                auto dp = ds[static_cast<size_t>(l)].params("disc" + std::to_string(l));
                refs.insert(refs.end(), dp.begin(), dp.end());
            }
        return refs;
    }
};

}  // namespace

TrainResult train(const TrainConfig& config, const DatasetBundle& bundle) {
    config.validate();
    if (bundle.train.size() < 2) throw DataExhausted("train split too small");
    if (bundle.val.empty()) throw DataExhausted("validation split is empty");

    ModelStack m;
    m.clf.init(config.classifier, config.seeds.model);
    m.has_ds = config.ifm_machinery;
    if (m.has_ds) {
        for (int l = 0; l < 3; ++l) {
            DiscriminatorConfig dc;
            dc.input_width =
                config.classifier.conv_channels[static_cast<size_t>(l)] +
                config.classifier.conv_channels[static_cast<size_t>(l) + 1];
            dc.hidden = config.disc_hidden;
            dc.leaky_slope = config.classifier.leaky_slope;
            m.ds[static_cast<size_t>(l)].init(dc, mix_seed(config.seeds.model, 0xD15C, l));
        }
    }
    auto params = m.all_params();
    SgdMomentum<float> sgd(static_cast<float>(config.learning_rate),
                           static_cast<float>(config.momentum));

    const int64_t n = static_cast<int64_t>(bundle.train.size());
    const int64_t hw = config.classifier.input_hw;
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::vector<int64_t> val_order(bundle.val.size());
    for (size_t i = 0; i < val_order.size(); ++i) val_order[i] = static_cast<int64_t>(i);

    std::ofstream metrics;
    if (!config.metrics_path.empty()) {
        metrics.open(config.metrics_path, std::ios::trunc);
        if (!metrics) throw IoFailure("cannot open metrics log: " + config.metrics_path);
    }

    TrainResult result;
    result.config = config;
    const float lambda = static_cast<float>(config.lambda_ifm);
    int64_t global_step = 0;
    double best_digit = -1.0, best_texture = -1.0;

    auto snapshot = [&](int64_t epoch, double vd, double vt) {
        nlohmann::json meta;
        meta["epoch"] = epoch;
        meta["val_digit_acc"] = vd;
        meta["val_texture_acc"] = vt;
        meta["config"] = config_echo(config);
        return snapshot_arrays(m.all_params(), meta.dump());
    };

    for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
        Rng shuffle_rng(mix_seed(config.seeds.data, 0xE9, static_cast<uint64_t>(epoch)));
        for (size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i],
                      order[static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i)))]);

        double sum_loss = 0.0, sum_clf = 0.0;
        std::array<double, 3> sum_f{0.0, 0.0, 0.0};
        int64_t steps = 0;

        for (int64_t begin = 0; begin + 2 <= n; begin += config.batch_size) {
            const int64_t bsz = std::min(config.batch_size, n - begin);
            if (bsz < 2) break;
            std::vector<int> labels;
            Tensor<float> x = batch_tensor(bundle.train, order, begin, bsz, hw, &labels, nullptr);

            auto out = m.clf.forward(x, Mode::Train);
            Tensor<float> dlogits;
            const double clf_loss = softmax_xent(out.logits, labels, &dlogits);

            double total = clf_loss;
            std::array<Tensor<float>, 4> tap_grads;
            bool have_tap_grads = false;
            if (m.has_ds) {
                Rng step_rng(mix_seed(config.seeds.sampling, 0xF0, static_cast<uint64_t>(epoch),
                                      static_cast<uint64_t>(begin)));
                const float scale = -lambda;  // minimizing L descends -lambda * F
                IfmResult<float> ifm =
                    ifm_loss(out.taps, m.ds, config.pairs_per_image, step_rng,
                             config.objective_form, scale, scale != 0.0f ? &tap_grads : nullptr);
                have_tap_grads = scale != 0.0f;
                for (int l = 0; l < 3; ++l)
                    sum_f[static_cast<size_t>(l)] += ifm.per_layer[static_cast<size_t>(l)].value;
                total = clf_loss - config.lambda_ifm * ifm.total;
            }
            if (!std::isfinite(total))
                throw DivergedLoss("non-finite loss at step " + std::to_string(global_step),
                                   global_step);

            m.clf.backward(dlogits, have_tap_grads ? &tap_grads : nullptr);
            sgd.step(params);

            sum_loss += total;
            sum_clf += clf_loss;
            ++steps;
            ++global_step;
        }
        if (steps == 0) throw DataExhausted("batch size exceeds usable training examples");

        EvalResult val = evaluate_model(m.clf, bundle.val, "val", "current", config.eval_batch);
        const auto t1 = std::chrono::steady_clock::now();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = sum_loss / static_cast<double>(steps);
        rec.clf_loss = sum_clf / static_cast<double>(steps);
        for (int l = 0; l < 3; ++l)
            rec.f[static_cast<size_t>(l)] = sum_f[static_cast<size_t>(l)] / static_cast<double>(steps);
        rec.val_digit_acc = val.digit_accuracy;
        rec.val_texture_acc = val.texture_accuracy;
        rec.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.history.push_back(rec);

        if (rec.val_digit_acc > best_digit) {
            best_digit = rec.val_digit_acc;
            result.best_digit_epoch = epoch;
            result.checkpoint_best_digit = snapshot(epoch, rec.val_digit_acc, rec.val_texture_acc);
        }
        if (rec.val_texture_acc > best_texture) {
            best_texture = rec.val_texture_acc;
            result.best_texture_epoch = epoch;
            result.checkpoint_best_texture = snapshot(epoch, rec.val_digit_acc, rec.val_texture_acc);
        }
        if (metrics.is_open()) {
            metrics << epoch_record_json(rec) << "\n";
            metrics.flush();
        }
        if (config.verbose) {
            std::fprintf(stderr,
                         "epoch %3lld  loss %.4f  clf %.4f  F %.3f/%.3f/%.3f  val digit %.4f  "
                         "val texture %.4f  (%.1fs)\n",
                         static_cast<long long>(epoch), rec.loss, rec.clf_loss, rec.f[0], rec.f[1],
                         rec.f[2], rec.val_digit_acc, rec.val_texture_acc, rec.seconds);
        }
    }

    const auto [bd, bt] = select_checkpoints(result.history);
    result.best_digit_epoch = bd;
    result.best_texture_epoch = bt;
    result.checkpoint_final =
        snapshot(config.epochs - 1, result.history.back().val_digit_acc,
                 result.history.back().val_texture_acc);
    return result;
}

}  // namespace ifm

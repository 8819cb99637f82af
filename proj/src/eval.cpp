#include "ifmlab/eval.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"

namespace ifm {

double EvalResult::balance() const {
    const double mx = std::max(digit_accuracy, texture_accuracy);
    const double mn = std::min(digit_accuracy, texture_accuracy);
    return mx > 0.0 ? mn / mx : 0.0;
}

EvalResult evaluate_model(Classifier<float>& model, const Split& split, const std::string& split_name,
                          const std::string& checkpoint_id, int64_t batch) {
    if (split.empty()) throw EmptySplit("cannot evaluate an empty split");
    const int64_t hw = model.cfg.input_hw;
    const int64_t n = static_cast<int64_t>(split.size());
    int64_t digit_hits = 0, texture_hits = 0;
    for (int64_t begin = 0; begin < n; begin += batch) {
        const int64_t bsz = std::min(batch, n - begin);
        Tensor<float> x(bsz, 1, hw, hw);
        for (int64_t k = 0; k < bsz; ++k) {
            const ShiftedExample& ex = split[static_cast<size_t>(begin + k)];
            float* dst = x.ptr() + k * hw * hw;
            for (int64_t i = 0; i < hw * hw; ++i)
                dst[i] = static_cast<float>(ex.image[static_cast<size_t>(i)]) * (1.0f / 255.0f);
        }
        auto out = model.forward(x, Mode::Eval);
        const int64_t k10 = out.logits.dims[1];
        for (int64_t k = 0; k < bsz; ++k) {
            const float* row = out.logits.ptr() + k * k10;
            int64_t arg = 0;
            for (int64_t j = 1; j < k10; ++j)
                if (row[j] > row[arg]) arg = j;
            const ShiftedExample& ex = split[static_cast<size_t>(begin + k)];
            if (arg == ex.digit_label) ++digit_hits;
            if (arg == ex.texture_label) ++texture_hits;
        }
    }
    EvalResult r;
    r.model = checkpoint_id;
    r.split = split_name;
    r.n = n;
    r.digit_accuracy = static_cast<double>(digit_hits) / static_cast<double>(n);
    r.texture_accuracy = static_cast<double>(texture_hits) / static_cast<double>(n);
    return r;
}

Classifier<float> classifier_from_checkpoint(const CheckpointState& ckpt) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ckpt.meta_json);
    } catch (...) {
        throw ConfigMismatch("checkpoint metadata is not valid JSON");
    }
    if (!meta.contains("config")) throw ConfigMismatch("checkpoint metadata lacks config echo");
    const auto& c = meta["config"];
    ClassifierConfig cfg;
    const auto ch = c.at("conv_channels").get<std::vector<int64_t>>();
    if (ch.size() != 4) throw ConfigMismatch("bad conv_channels in checkpoint");
    std::copy(ch.begin(), ch.end(), cfg.conv_channels.begin());
    cfg.num_classes = c.at("num_classes").get<int64_t>();
    cfg.input_hw = c.at("input_hw").get<int64_t>();
    cfg.leaky_slope = c.at("leaky_slope").get<double>();
    Classifier<float> model;
    model.init(cfg, 0);
    restore_arrays(model.params(), ckpt);
    return model;
}

EvalResult evaluate(const CheckpointState& ckpt, const Split& split, const std::string& split_name,
                    const std::string& checkpoint_id) {
    Classifier<float> model = classifier_from_checkpoint(ckpt);
    return evaluate_model(model, split, split_name, checkpoint_id);
}

const std::vector<ReferenceRow>& paper_reference_rows() {
    static const std::vector<ReferenceRow> rows = {
        {"Baseline_Digit", 0.1244, 0.9507},
        {"Baseline_Texture", 0.1205, 0.9644},
        {"iCE fi-RevNet", 0.4001, -1.0},
        {"ours_Digit", 0.5454, 0.4041},
        {"ours_Texture", 0.3178, 0.6900},
    };
    return rows;
}

std::string report_csv(const std::vector<EvalResult>& results) {
    std::string out = "model,split,n,digit_acc,texture_acc,balance\n";
    char buf[256];
    for (const EvalResult& r : results) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%lld,%.6f,%.6f,%.6f\n", r.model.c_str(),
                      r.split.c_str(), static_cast<long long>(r.n), r.digit_accuracy,
                      r.texture_accuracy, r.balance());
        out += buf;
    }
    return out;
}

std::string report_table(const std::vector<EvalResult>& results, bool with_reference_rows) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-24s  %-6s  %8s  %11s  %13s  %8s\n", "model", "split", "n",
                  "acc (digit)", "acc (texture)", "balance");
    out += buf;
    out += std::string(out.size() - 1, '-') + "\n";
    for (const EvalResult& r : results) {
        std::snprintf(buf, sizeof(buf), "%-24s  %-6s  %8lld  %10.2f%%  %12.2f%%  %8.3f\n",
                      r.model.c_str(), r.split.c_str(), static_cast<long long>(r.n),
                      100.0 * r.digit_accuracy, 100.0 * r.texture_accuracy, r.balance());
        out += buf;
    }
    if (with_reference_rows) {
        out += "\nreference (reported test accuracies)\n";
        for (const ReferenceRow& r : paper_reference_rows()) {
            if (r.texture_acc < 0)
                std::snprintf(buf, sizeof(buf), "%-24s  %-6s  %8s  %10.2f%%  %13s\n", r.model.c_str(),
                              "test", "-", 100.0 * r.digit_acc, "-");
            else
                std::snprintf(buf, sizeof(buf), "%-24s  %-6s  %8s  %10.2f%%  %12.2f%%\n",
                              r.model.c_str(), "test", "-", 100.0 * r.digit_acc,
                              100.0 * r.texture_acc);
            out += buf;
        }
    }
    return out;
}

}  // namespace ifm

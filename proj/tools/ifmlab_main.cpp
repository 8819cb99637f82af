// ifmlab command-line tool: build the shifted-digit dataset, train with or
// without the information-flow regularizer, evaluate checkpoints, aggregate
// reports, and run the Gaussian estimator sanity harness.
//
// Exit codes: 0 success, 2 input error, 3 numeric divergence, 4 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"

#include "ifmlab/config_file.hpp"
#include "ifmlab/dataset.hpp"
#include "ifmlab/eval.hpp"
#include "ifmlab/gaussian.hpp"
#include "ifmlab/train.hpp"

namespace fs = std::filesystem;
using namespace ifm;

namespace {

struct BuildDataArgs {
    std::string config_path;
    std::string out_dir;
    std::string textures = "procedural";
    std::string mnist_dir;
    int64_t synthetic_train = 60000;
    int64_t synthetic_test = 10000;
    uint64_t seed = 1;
};

struct TrainArgs {
    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    uint64_t seed = 1;
    TrainConfig cfg;
    std::string objective_form = "standard";
    int64_t limit_train = 0;
    int64_t limit_val = 0;
    bool no_ifm = false;
    bool verbose = false;
};

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

int cmd_build_data(const BuildDataArgs& a) {
    fs::create_directories(a.out_dir);

    TextureBank bank;
    if (a.textures == "procedural") {
        bank = build_texture_bank_procedural(a.seed);
    } else {
        if (!fs::is_directory(a.textures)) {
            std::cerr << "texture directory does not exist: " << a.textures << "\n";
            return 2;
        }
        bank = build_texture_bank_external(a.textures, a.seed);
    }

    LabeledImageSet train_digits, test_digits;
    std::string digit_source;
    if (!a.mnist_dir.empty()) {
        auto pick = [&](const std::string& base) -> std::string {
            for (const char* suffix : {"", ".gz"}) {
                std::string p = join_path(a.mnist_dir, base + suffix);
                if (fs::exists(p)) return p;
            }
            throw IoFailure("missing MNIST file " + join_path(a.mnist_dir, base) + "[.gz]");
        };
        if (!fs::is_directory(a.mnist_dir)) {
            std::cerr << "MNIST directory does not exist: " << a.mnist_dir << "\n";
            return 2;
        }
        train_digits = load_idx_files(pick("train-images-idx3-ubyte"), pick("train-labels-idx1-ubyte"));
        test_digits = load_idx_files(pick("t10k-images-idx3-ubyte"), pick("t10k-labels-idx1-ubyte"));
        digit_source = "idx";
    } else {
        train_digits = make_synthetic_digits(a.synthetic_train, mix_seed(a.seed, 0x51));
        test_digits = make_synthetic_digits(a.synthetic_test, mix_seed(a.seed, 0x52));
        digit_source = "synthetic";
    }

    DatasetBundle bundle = build_splits(train_digits, test_digits, bank, a.seed);
    bundle.manifest.digit_source = digit_source;

    write_split(bundle.train, join_path(a.out_dir, "train.smn1"));
    write_split(bundle.val, join_path(a.out_dir, "val.smn1"));
    write_split(bundle.test, join_path(a.out_dir, "test.smn1"));
    write_manifest(bundle.manifest, join_path(a.out_dir, "manifest.json"));
    std::printf("wrote %s: train=%lld val=%lld test=%lld (digits: %s, textures: %s)\n",
                a.out_dir.c_str(), static_cast<long long>(bundle.manifest.train_size),
                static_cast<long long>(bundle.manifest.val_size),
                static_cast<long long>(bundle.manifest.test_size), digit_source.c_str(),
                bundle.manifest.source_kind.c_str());
    return 0;
}

// Config-file values apply only where the corresponding flag was not given;
// flags win.
void apply_train_config_file(TrainArgs& a, const std::map<std::string, bool>& flag_given) {
    if (a.config_path.empty()) return;
    ConfigFile cf = ConfigFile::parse_file(a.config_path);
    auto absent = [&](const char* k) { return !flag_given.at(k); };
    if (absent("lr")) a.cfg.learning_rate = cf.get_double("learning_rate", a.cfg.learning_rate);
    if (absent("batch_size")) a.cfg.batch_size = cf.get_int("batch_size", a.cfg.batch_size);
    if (absent("epochs")) a.cfg.epochs = cf.get_int("epochs", a.cfg.epochs);
    if (absent("lambda_ifm")) a.cfg.lambda_ifm = cf.get_double("lambda_ifm", a.cfg.lambda_ifm);
    if (absent("pairs_per_image"))
        a.cfg.pairs_per_image = cf.get_int("pairs_per_image", a.cfg.pairs_per_image);
    if (absent("momentum")) a.cfg.momentum = cf.get_double("momentum", a.cfg.momentum);
    if (absent("objective_form"))
        a.objective_form = cf.get_string("objective_form", a.objective_form);
    if (absent("seed") && cf.has("seed")) a.seed = static_cast<uint64_t>(cf.get_int("seed", 1));
    if (absent("limit_train")) a.limit_train = cf.get_int("limit_train", a.limit_train);
    if (absent("limit_val")) a.limit_val = cf.get_int("limit_val", a.limit_val);
    if (a.data_dir.empty()) a.data_dir = cf.get_string("data", a.data_dir);
    if (a.out_dir.empty()) a.out_dir = cf.get_string("out", a.out_dir);
}

int cmd_train(TrainArgs a) {
    if (a.data_dir.empty() || !fs::is_directory(a.data_dir)) {
        std::cerr << "data directory does not exist: " << a.data_dir << "\n";
        return 2;
    }
    fs::create_directories(a.out_dir);

    DatasetBundle bundle;
    bundle.train = read_split(join_path(a.data_dir, "train.smn1"));
    bundle.val = read_split(join_path(a.data_dir, "val.smn1"));
    if (a.limit_train > 0 && a.limit_train < static_cast<int64_t>(bundle.train.size()))
        bundle.train.resize(static_cast<size_t>(a.limit_train));
    if (a.limit_val > 0 && a.limit_val < static_cast<int64_t>(bundle.val.size()))
        bundle.val.resize(static_cast<size_t>(a.limit_val));

    a.cfg.objective_form = objective_form_from_name(a.objective_form);
    a.cfg.ifm_machinery = !a.no_ifm;
    a.cfg.seeds = TrainSeeds{a.seed, a.seed, a.seed};
    a.cfg.metrics_path = join_path(a.out_dir, "metrics.jsonl");
    a.cfg.verbose = a.verbose;

    // effective configuration is on disk before any work starts
    {
        nlohmann::json echo;
        echo["data"] = a.data_dir;
        echo["out"] = a.out_dir;
        echo["seed"] = a.seed;
        echo["learning_rate"] = a.cfg.learning_rate;
        echo["batch_size"] = a.cfg.batch_size;
        echo["epochs"] = a.cfg.epochs;
        echo["lambda_ifm"] = a.cfg.lambda_ifm;
        echo["pairs_per_image"] = a.cfg.pairs_per_image;
        echo["objective_form"] = objective_form_name(a.cfg.objective_form);
        echo["momentum"] = a.cfg.momentum;
        echo["ifm_machinery"] = a.cfg.ifm_machinery;
        echo["limit_train"] = a.limit_train;
        echo["limit_val"] = a.limit_val;
        echo["train_examples"] = bundle.train.size();
        echo["val_examples"] = bundle.val.size();
        std::ofstream f(join_path(a.out_dir, "run_config.json"), std::ios::trunc);
        if (!f) throw IoFailure("cannot write run_config.json");
        f << echo.dump(2) << "\n";
    }

    TrainResult result = train(a.cfg, bundle);
    save_checkpoint(result.checkpoint_best_digit, join_path(a.out_dir, "best_digit.ckpt"));
    save_checkpoint(result.checkpoint_best_texture, join_path(a.out_dir, "best_texture.ckpt"));
    save_checkpoint(result.checkpoint_final, join_path(a.out_dir, "final.ckpt"));
    std::printf("trained %lld epochs; best digit val acc %.4f (epoch %lld), best texture val acc "
                "%.4f (epoch %lld)\n",
                static_cast<long long>(a.cfg.epochs),
                result.history[static_cast<size_t>(result.best_digit_epoch)].val_digit_acc,
                static_cast<long long>(result.best_digit_epoch),
                result.history[static_cast<size_t>(result.best_texture_epoch)].val_texture_acc,
                static_cast<long long>(result.best_texture_epoch));
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& split_name,
             std::string model_name, const std::string& out_csv) {
    CheckpointState state = load_checkpoint(ckpt_path);
    Split split = read_split(join_path(data_dir, split_name + ".smn1"));
    if (model_name.empty()) model_name = fs::path(ckpt_path).stem().string();
    EvalResult r = evaluate(state, split, split_name, model_name);
    std::string csv = report_csv({r});
    if (!out_csv.empty()) {
        std::ofstream f(out_csv, std::ios::trunc);
        if (!f) throw IoFailure("cannot write " + out_csv);
        f << csv;
    }
    std::fputs(csv.c_str(), stdout);
    return 0;
}

std::vector<EvalResult> parse_results_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoFailure("cannot open " + path);
    std::vector<EvalResult> out;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (first) {
            first = false;
            continue;  // header
        }
        if (line.empty()) continue;
        EvalResult r;
        size_t p = 0;
        auto field = [&]() {
            size_t c = line.find(',', p);
            std::string s = line.substr(p, c == std::string::npos ? std::string::npos : c - p);
            p = c == std::string::npos ? line.size() : c + 1;
            return s;
        };
        r.model = field();
        r.split = field();
        r.n = std::stoll(field());
        r.digit_accuracy = std::stod(field());
        r.texture_accuracy = std::stod(field());
        out.push_back(r);
    }
    return out;
}

int cmd_report(const std::vector<std::string>& inputs, bool with_refs, const std::string& out_csv,
               const std::string& out_table) {
    std::vector<EvalResult> rows;
    for (const std::string& in : inputs) {
        std::string path = in;
        if (fs::is_directory(in)) path = join_path(in, "results.csv");
        if (!fs::exists(path)) {
            std::cerr << "no results at " << path << "\n";
            return 2;
        }
        auto part = parse_results_csv(path);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) {
        std::cerr << "no evaluation rows found\n";
        return 2;
    }
    const std::string csv = report_csv(rows);
    const std::string table = report_table(rows, with_refs);
    if (!out_csv.empty()) {
        std::ofstream f(out_csv, std::ios::trunc);
        f << csv;
    }
    if (!out_table.empty()) {
        std::ofstream f(out_table, std::ios::trunc);
        f << table;
    }
    std::fputs(table.c_str(), stdout);
    return 0;
}

int cmd_mi_sanity(std::vector<double> rhos, int64_t samples, int64_t steps, uint64_t seed) {
    if (rhos.empty()) rhos = {0.0, 0.5, 0.9};
    std::printf("%8s  %14s  %14s  %12s\n", "rho", "estimate", "oracle 2*JSD", "true MI");
    for (double rho : rhos) {
        GaussianJsdReference ref = gaussian_reference_jsd(rho);
        MIEstimate est = estimate_mi_gaussian(rho, samples, steps, seed);
        std::printf("%8.3f  %14.6f  %14.6f  %12.6f\n", rho, est.value, ref.jsd_times_two,
                    ref.true_mi);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"information-flow maximization lab"};
    app.require_subcommand(1);

    BuildDataArgs bd;
    auto* build = app.add_subcommand("build-data", "build the shifted-digit dataset splits");
    build->add_option("--config", bd.config_path, "TOML config file");
    build->add_option("--out", bd.out_dir, "output directory")->required();
    build->add_option("--seed", bd.seed, "dataset seed");
    build->add_option("--textures", bd.textures, "'procedural' or a texture directory");
    build->add_option("--mnist-dir", bd.mnist_dir, "directory with the four MNIST IDX files");
    build->add_option("--synthetic-train", bd.synthetic_train, "synthetic digit count (train source)");
    build->add_option("--synthetic-test", bd.synthetic_test, "synthetic digit count (test)");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train the classifier (with IFM unless --no-ifm)");
    train_cmd->add_option("--config", tr.config_path, "TOML config file");
    train_cmd->add_option("--data", tr.data_dir, "dataset directory (from build-data)");
    train_cmd->add_option("--out", tr.out_dir, "run output directory");
    auto* opt_seed = train_cmd->add_option("--seed", tr.seed, "base seed (data/model/sampling)");
    auto* opt_lr = train_cmd->add_option("--lr", tr.cfg.learning_rate, "learning rate");
    auto* opt_bs = train_cmd->add_option("--batch-size", tr.cfg.batch_size, "batch size");
    auto* opt_ep = train_cmd->add_option("--epochs", tr.cfg.epochs, "epochs");
    auto* opt_la = train_cmd->add_option("--lambda-ifm", tr.cfg.lambda_ifm, "IFM weight (0 = baseline)");
    auto* opt_pp =
        train_cmd->add_option("--pairs-per-image", tr.cfg.pairs_per_image, "pairs per image per layer pair");
    auto* opt_mo = train_cmd->add_option("--momentum", tr.cfg.momentum, "SGD momentum");
    auto* opt_of = train_cmd->add_option("--objective-form", tr.objective_form, "standard | paper_literal");
    auto* opt_lt = train_cmd->add_option("--limit-train", tr.limit_train, "use only the first N train examples");
    auto* opt_lv = train_cmd->add_option("--limit-val", tr.limit_val, "use only the first N val examples");
    train_cmd->add_flag("--no-ifm", tr.no_ifm, "vanilla loop without the IFM machinery");
    train_cmd->add_flag("--verbose", tr.verbose, "per-epoch progress on stderr");

    std::string ev_ckpt, ev_data, ev_split = "test", ev_name, ev_out;
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a split");
    eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data", ev_data, "dataset directory")->required();
    eval_cmd->add_option("--split", ev_split, "train | val | test");
    eval_cmd->add_option("--model-name", ev_name, "row label (defaults to checkpoint stem)");
    eval_cmd->add_option("--out", ev_out, "also write CSV here");

    std::vector<std::string> rp_inputs;
    bool rp_refs = false;
    std::string rp_csv, rp_table;
    auto* report_cmd = app.add_subcommand("report", "aggregate evaluation CSV rows into a table");
    report_cmd->add_option("--runs", rp_inputs, "results.csv files or directories containing them")
        ->required();
    report_cmd->add_flag("--with-paper-refs", rp_refs, "include reported reference accuracies");
    report_cmd->add_option("--out-csv", rp_csv, "write merged CSV here");
    report_cmd->add_option("--out-table", rp_table, "write the aligned table here");

    std::vector<double> ms_rhos;
    int64_t ms_samples = 50000, ms_steps = 2000;
    uint64_t ms_seed = 1;
    auto* ms = app.add_subcommand("mi-sanity", "Gaussian estimator check against the quadrature oracle");
    ms->add_option("--rho", ms_rhos, "correlation values (default 0 0.5 0.9)");
    ms->add_option("--samples", ms_samples, "sample pool size");
    ms->add_option("--steps", ms_steps, "discriminator training steps");
    ms->add_option("--seed", ms_seed, "seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) return cmd_build_data(bd);
        if (*train_cmd) {
            std::map<std::string, bool> given = {
                {"lr", !opt_lr->empty()},           {"batch_size", !opt_bs->empty()},
                {"epochs", !opt_ep->empty()},       {"lambda_ifm", !opt_la->empty()},
                {"pairs_per_image", !opt_pp->empty()}, {"momentum", !opt_mo->empty()},
                {"objective_form", !opt_of->empty()},  {"seed", !opt_seed->empty()},
                {"limit_train", !opt_lt->empty()},  {"limit_val", !opt_lv->empty()},
            };
            apply_train_config_file(tr, given);
            if (tr.out_dir.empty()) {
                std::cerr << "--out (or config key 'out') is required\n";
                return 2;
            }
            return cmd_train(tr);
        }
        if (*eval_cmd) return cmd_eval(ev_ckpt, ev_data, ev_split, ev_name, ev_out);
        if (*report_cmd) return cmd_report(rp_inputs, rp_refs, rp_csv, rp_table);
        if (*ms) return cmd_mi_sanity(ms_rhos, ms_samples, ms_steps, ms_seed);
    } catch (const DivergedLoss& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 3;
    } catch (const IoFailure& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const ChecksumMismatch& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

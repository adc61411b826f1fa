#include "CLI11.hpp"

#include "faultbench/common.hpp"
#include "faultbench/detect.hpp"
#include "faultbench/eval.hpp"
#include "faultbench/ingest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fb = faultbench;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, fb::ModelKind> kModelNames{
    {"hmm", fb::ModelKind::hmm}, {"vae", fb::ModelKind::vae}, {"gan", fb::ModelKind::gan}};
const std::map<std::string, fb::FeatureMode> kFeatureNames{{"stats", fb::FeatureMode::stats},
                                                           {"raw", fb::FeatureMode::raw}};
const std::map<std::string, fb::Aggregation> kAggregationNames{{"max", fb::Aggregation::max},
                                                               {"mean", fb::Aggregation::mean}};
const std::map<std::string, fb::HmmScoreMode> kHmmScoreNames{
    {"reconstruction", fb::HmmScoreMode::reconstruction}, {"nll", fb::HmmScoreMode::nll}};
const std::map<std::string, fb::GanScoreMode> kGanScoreNames{
    {"discriminator", fb::GanScoreMode::discriminator}, {"inversion", fb::GanScoreMode::inversion}};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

// All file outputs go through a temp file in the target directory plus a
// rename, so a failed run never leaves a partial artifact behind.
template <typename WriteBody>
void write_atomic(const std::string& path, WriteBody&& body) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path temp = target;
    temp += ".tmp";
    try {
        body(temp.string());
        fs::rename(temp, target);
    } catch (...) {
        std::error_code ec;
        fs::remove(temp, ec);
        throw;
    }
}

void write_text_atomic(const std::string& path, const std::string& content) {
    write_atomic(path, [&](const std::string& temp) {
        std::ofstream out(temp, std::ios::binary);
        fb::require(out.is_open(), "cannot open '" + temp + "' for writing");
        out << content;
        out.close();
        fb::require(out.good(), "writing '" + temp + "' failed");
    });
}

// Resolved-configuration echo: one line per setting, defaults included, so
// any artifact can be regenerated from a run's log alone.
void log_config(const std::vector<std::pair<std::string, std::string>>& entries) {
    for (const auto& [key, value] : entries)
        std::cerr << "config " << key << "=" << value << "\n";
}

struct SynthArgs {
    std::string out;
    fb::SynthConfig config;
    std::vector<std::string> kind_names;
};

struct TrainArgs {
    std::string dataset;
    std::string out;
    fb::BenchConfig config;
};

struct CalibrateArgs {
    std::string dataset;
    std::string bundle;
    std::string out;
    double fpr = 0.05;
    std::size_t kfold = 5;
    std::uint64_t kfold_seed = 0;
};

struct ScoreArgs {
    std::string dataset;
    std::string bundle;
    std::string out;
};

struct BenchArgs {
    std::string train;
    std::string test;
    std::string dataset;
    std::string out;
    std::string records;
    fb::BenchConfig config;
};

void add_model_options(CLI::App* cmd, fb::BenchConfig& c, std::optional<fb::Aggregation>& agg) {
    cmd->add_option("--model", c.model, "model kind: hmm, vae, gan")
        ->required()
        ->transform(CLI::CheckedTransformer(kModelNames, CLI::ignore_case))
        ->option_text("{hmm, vae, gan} REQUIRED");
    cmd->add_option("--window-size", c.window_size, "window length in samples (1 sample = 1 ms)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--stride", c.stride, "window stride in samples; 0 = window size")
        ->capture_default_str();
    cmd->add_option("--feature-mode", c.feature_mode, "window representation: stats, raw")
        ->transform(CLI::CheckedTransformer(kFeatureNames, CLI::ignore_case))
        ->option_text("{stats, raw}");
    cmd->add_option("--aggregation", agg,
                    "window-to-sequence aggregation: max, mean (default: mean for stats, max for raw)")
        ->transform(CLI::CheckedTransformer(kAggregationNames, CLI::ignore_case))
        ->option_text("{max, mean}");
    cmd->add_option("--seed", c.seed, "seed for every random draw in the run")
        ->capture_default_str();
    cmd->add_option("--epochs", c.epochs, "training epochs (vae, gan)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--batch-size", c.batch_size, "minibatch size; 0 = model default (vae 32, gan 64)")
        ->capture_default_str();
    cmd->add_option("--learning-rate", c.learning_rate,
                    "optimizer step size; 0 = model default (vae 1e-3, gan 2e-4)")
        ->capture_default_str();
    cmd->add_option("--hmm-states", c.hmm_states, "hidden state count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--hmm-iters", c.hmm_max_iters, "Baum-Welch iteration cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--hmm-tol", c.hmm_tol, "Baum-Welch log-likelihood stopping tolerance")
        ->capture_default_str();
    cmd->add_option("--hmm-score", c.hmm_score_mode, "hmm score: reconstruction, nll")
        ->transform(CLI::CheckedTransformer(kHmmScoreNames, CLI::ignore_case))
        ->option_text("{reconstruction, nll}");
    cmd->add_option("--gan-score", c.gan_score_mode, "gan score: discriminator, inversion")
        ->transform(CLI::CheckedTransformer(kGanScoreNames, CLI::ignore_case))
        ->option_text("{discriminator, inversion}");
    cmd->add_option("--gan-noise-dim", c.gan_noise_dim, "generator noise dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--gan-inversion-steps", c.gan_inversion.n_steps,
                    "latent search steps per window (inversion score)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--gan-inversion-lr", c.gan_inversion.learning_rate,
                    "latent search initial step size (inversion score)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--gan-inversion-blend", c.gan_inversion.blend,
                    "discriminator weight mixed into the inversion score, in [0,1]")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--vae-hidden1", c.vae_hidden1, "encoder first hidden width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--vae-hidden2", c.vae_hidden2, "encoder second hidden width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--vae-latent", c.vae_latent, "latent dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

std::vector<std::pair<std::string, std::string>> model_config_entries(const fb::BenchConfig& c) {
    std::vector<std::pair<std::string, std::string>> e;
    e.emplace_back("model", fb::to_string(c.model));
    e.emplace_back("window_size", std::to_string(c.window_size));
    e.emplace_back("stride", std::to_string(fb::effective_stride(c)));
    e.emplace_back("feature_mode", fb::to_string(c.feature_mode));
    e.emplace_back("aggregation", fb::to_string(fb::effective_aggregation(c)));
    e.emplace_back("seed", std::to_string(c.seed));
    switch (c.model) {
    case fb::ModelKind::hmm:
        e.emplace_back("hmm_states", std::to_string(c.hmm_states));
        e.emplace_back("hmm_iters", std::to_string(c.hmm_max_iters));
        e.emplace_back("hmm_tol", fmt(c.hmm_tol));
        e.emplace_back("hmm_score",
                       c.hmm_score_mode == fb::HmmScoreMode::nll ? "nll" : "reconstruction");
        break;
    case fb::ModelKind::vae:
        e.emplace_back("epochs", std::to_string(c.epochs));
        e.emplace_back("batch_size", std::to_string(c.batch_size == 0 ? 32 : c.batch_size));
        e.emplace_back("learning_rate", fmt(c.learning_rate == 0.0 ? 1e-3 : c.learning_rate));
        e.emplace_back("vae_hidden1", std::to_string(c.vae_hidden1));
        e.emplace_back("vae_hidden2", std::to_string(c.vae_hidden2));
        e.emplace_back("vae_latent", std::to_string(c.vae_latent));
        e.emplace_back("vae_l2", fmt(c.vae_l2));
        e.emplace_back("vae_kl_weight", fmt(c.vae_kl_weight));
        break;
    case fb::ModelKind::gan:
        e.emplace_back("epochs", std::to_string(c.epochs));
        e.emplace_back("batch_size", std::to_string(c.batch_size == 0 ? 64 : c.batch_size));
        e.emplace_back("learning_rate", fmt(c.learning_rate == 0.0 ? 2e-4 : c.learning_rate));
        e.emplace_back("gan_noise_dim", std::to_string(c.gan_noise_dim));
        e.emplace_back("gan_score", c.gan_score_mode == fb::GanScoreMode::inversion
                                        ? "inversion"
                                        : "discriminator");
        if (c.gan_score_mode == fb::GanScoreMode::inversion) {
            e.emplace_back("gan_inversion_steps", std::to_string(c.gan_inversion.n_steps));
            e.emplace_back("gan_inversion_lr", fmt(c.gan_inversion.learning_rate));
            e.emplace_back("gan_inversion_blend", fmt(c.gan_inversion.blend));
        }
        break;
    }
    return e;
}

int run_synth(const SynthArgs& args) {
    fb::SynthConfig config = args.config;
    if (!args.kind_names.empty()) {
        config.kinds.clear();
        for (const std::string& name : args.kind_names)
            config.kinds.push_back(fb::anomaly_kind_from_string(name));
    }

    std::string kinds;
    for (std::size_t i = 0; i < config.kinds.size(); ++i)
        kinds += std::string(i ? "," : "") + fb::to_string(config.kinds[i]);
    log_config({{"subcommand", "synth"},
                {"out", args.out},
                {"n_normal", std::to_string(config.n_normal)},
                {"n_anomalous", std::to_string(config.n_anomalous)},
                {"min_length", std::to_string(config.min_length)},
                {"max_length", std::to_string(config.max_length)},
                {"n_sinusoids", std::to_string(config.n_sinusoids)},
                {"amplitude", fmt(config.amplitude_min) + ".." + fmt(config.amplitude_max)},
                {"frequency", fmt(config.frequency_min) + ".." + fmt(config.frequency_max)},
                {"noise_sigma", fmt(config.noise_sigma)},
                {"kinds", kinds},
                {"magnitude", fmt(config.magnitude_min) + ".." + fmt(config.magnitude_max)},
                {"seed", std::to_string(config.seed)},
                {"id_prefix", config.id_prefix}});

    fb::Dataset dataset = fb::generate_synthetic(config);
    write_atomic(args.out,
                 [&](const std::string& temp) { fb::write_dataset_file(dataset, temp); });
    std::cerr << "wrote " << dataset.sequences.size() << " sequences to " << args.out << "\n";
    return 0;
}

int run_train(const TrainArgs& args) {
    auto entries = model_config_entries(args.config);
    entries.insert(entries.begin(), {"subcommand", "train"});
    entries.emplace_back("dataset", args.dataset);
    entries.emplace_back("out", args.out);
    log_config(entries);

    fb::Dataset train = fb::read_dataset_file(args.dataset);
    fb::ModelBundle bundle = fb::train_bundle(train, args.config);
    write_atomic(args.out,
                 [&](const std::string& temp) { fb::save_bundle_file(bundle, temp); });
    std::cerr << "wrote " << fb::to_string(bundle.kind) << " bundle to " << args.out << "\n";
    return 0;
}

int run_calibrate(const CalibrateArgs& args) {
    log_config({{"subcommand", "calibrate"},
                {"dataset", args.dataset},
                {"bundle", args.bundle},
                {"out", args.out},
                {"fpr", fmt(args.fpr)},
                {"kfold", std::to_string(args.kfold)},
                {"kfold_seed", std::to_string(args.kfold_seed)}});

    fb::ModelBundle bundle = fb::load_bundle_file(args.bundle);
    fb::Dataset train = fb::read_dataset_file(args.dataset);
    for (const fb::RawSequence& seq : train.sequences)
        fb::require(seq.label == 0, "calibration dataset must contain only normal sequences ('" +
                                        seq.id + "' is labeled anomalous)");

    std::vector<double> scores = fb::training_scores(bundle, train);
    bundle.threshold = fb::calibrate(scores, args.fpr);
    write_atomic(args.out,
                 [&](const std::string& temp) { fb::save_bundle_file(bundle, temp); });

    std::cerr << "threshold " << bundle.threshold->value << " from " << scores.size()
              << " training scores at fpr tolerance " << args.fpr << "\n";
    if (args.kfold >= 2 && scores.size() >= args.kfold) {
        std::vector<double> folds =
            fb::calibrate_kfold(scores, args.fpr, args.kfold, args.kfold_seed);
        double lo = folds.front(), hi = folds.front();
        for (double f : folds) {
            lo = std::min(lo, f);
            hi = std::max(hi, f);
        }
        std::cerr << "threshold stability over " << args.kfold << " folds: min " << lo << ", max "
                  << hi << ", spread " << (hi - lo) << "\n";
    } else if (args.kfold >= 2) {
        std::cerr << "threshold stability skipped: fewer scores than folds\n";
    }
    std::cerr << "wrote calibrated bundle to " << args.out << "\n";
    return 0;
}

int run_score(const ScoreArgs& args) {
    log_config({{"subcommand", "score"},
                {"dataset", args.dataset},
                {"bundle", args.bundle},
                {"out", args.out}});

    fb::ModelBundle bundle = fb::load_bundle_file(args.bundle);
    fb::Dataset dataset = fb::read_dataset_file(args.dataset);
    std::vector<fb::Verdict> verdicts = fb::judge(bundle, dataset);

    std::ostringstream out;
    std::size_t flagged = 0;
    for (const fb::Verdict& v : verdicts) {
        char score[64];
        std::snprintf(score, sizeof(score), "%.17g", v.score);
        out << "verdict\t" << v.sequence_id << "\t" << score << "\t" << (v.flagged ? 1 : 0)
            << "\t";
        if (v.true_label)
            out << *v.true_label;
        else
            out << "-";
        out << "\t" << (v.unscorable ? 1 : 0) << "\n";
        if (v.flagged) ++flagged;
    }
    write_text_atomic(args.out, out.str());
    std::cerr << "flagged " << flagged << " of " << verdicts.size() << " sequences; verdicts in "
              << args.out << "\n";
    return 0;
}

int run_bench(const BenchArgs& args) {
    fb::require(args.dataset.empty() != (args.train.empty() && args.test.empty()),
                "pass either --dataset or both --train and --test");
    if (args.dataset.empty())
        fb::require(!args.train.empty() && !args.test.empty(),
                    "pass either --dataset or both --train and --test");

    auto entries = model_config_entries(args.config);
    entries.insert(entries.begin(), {"subcommand", "bench"});
    entries.emplace_back("fpr", fmt(args.config.fpr_tolerance));
    if (!args.dataset.empty()) {
        entries.emplace_back("dataset", args.dataset);
        entries.emplace_back("split_ratio", fmt(args.config.split_ratio));
    } else {
        entries.emplace_back("train", args.train);
        entries.emplace_back("test", args.test);
    }
    if (!args.out.empty()) entries.emplace_back("out", args.out);
    if (!args.records.empty()) entries.emplace_back("records", args.records);
    log_config(entries);

    fb::EvalReport report;
    if (!args.dataset.empty()) {
        fb::Dataset dataset = fb::read_dataset_file(args.dataset);
        report = fb::run_benchmark(dataset, args.config);
    } else {
        fb::Dataset train = fb::read_dataset_file(args.train);
        fb::Dataset test = fb::read_dataset_file(args.test);
        report = fb::run_benchmark(train, test, args.config);
    }

    std::string text = fb::report_text(report);
    if (args.out.empty())
        std::cout << text;
    else
        write_text_atomic(args.out, text);
    if (!args.records.empty()) write_text_atomic(args.records, fb::report_records(report));

    if (!args.out.empty()) std::cerr << "wrote report to " << args.out << "\n";
    if (!args.records.empty()) std::cerr << "wrote records to " << args.records << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fault detection benchmark toolkit for 1 kHz sensor sequences", "faultbench"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a TOML file; flags override file values");

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    synth_cmd->add_option("--out", synth.out, "output dataset path")->required();
    synth_cmd->add_option("--n-normal", synth.config.n_normal, "normal sequence count")
        ->capture_default_str();
    synth_cmd->add_option("--n-anomalous", synth.config.n_anomalous, "anomalous sequence count")
        ->capture_default_str();
    synth_cmd->add_option("--min-length", synth.config.min_length, "minimum length in samples")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth_cmd->add_option("--max-length", synth.config.max_length, "maximum length in samples")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth_cmd->add_option("--n-sinusoids", synth.config.n_sinusoids, "sinusoids per sequence")
        ->capture_default_str();
    synth_cmd->add_option("--noise-sigma", synth.config.noise_sigma, "Gaussian noise level")
        ->capture_default_str();
    synth_cmd
        ->add_option("--kinds", synth.kind_names,
                     "anomaly kinds: step_shift, amplitude_burst, frequency_shift")
        ->delimiter(',');
    synth_cmd
        ->add_option("--magnitude-min", synth.config.magnitude_min,
                     "anomaly magnitude lower bound, in noise sigmas")
        ->capture_default_str();
    synth_cmd
        ->add_option("--magnitude-max", synth.config.magnitude_max,
                     "anomaly magnitude upper bound, in noise sigmas")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.config.seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--id-prefix", synth.config.id_prefix, "sequence id prefix")
        ->capture_default_str();

    TrainArgs train;
    std::optional<fb::Aggregation> train_agg;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model bundle on normal sequences");
    train_cmd->add_option("--dataset", train.dataset, "training dataset path")->required();
    train_cmd->add_option("--out", train.out, "output bundle path")->required();
    add_model_options(train_cmd, train.config, train_agg);

    CalibrateArgs cal;
    CLI::App* cal_cmd =
        app.add_subcommand("calibrate", "attach a score threshold to a trained bundle");
    cal_cmd->add_option("--dataset", cal.dataset, "normal-only calibration dataset")->required();
    cal_cmd->add_option("--bundle", cal.bundle, "trained bundle path")->required();
    cal_cmd->add_option("--out", cal.out, "output bundle path")->required();
    cal_cmd->add_option("--fpr", cal.fpr, "tolerated training false-positive rate")
        ->check(CLI::Range(0.0, 0.999999))
        ->capture_default_str();
    cal_cmd->add_option("--kfold", cal.kfold, "stability folds; < 2 disables the report")
        ->capture_default_str();
    cal_cmd->add_option("--kfold-seed", cal.kfold_seed, "fold assignment seed")
        ->capture_default_str();

    ScoreArgs score;
    CLI::App* score_cmd = app.add_subcommand("score", "judge a dataset against a bundle");
    score_cmd->add_option("--dataset", score.dataset, "dataset to score")->required();
    score_cmd->add_option("--bundle", score.bundle, "calibrated bundle path")->required();
    score_cmd->add_option("--out", score.out, "verdict output path")->required();

    BenchArgs bench;
    std::optional<fb::Aggregation> bench_agg;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "train, calibrate, and evaluate end to end");
    bench_cmd->add_option("--train", bench.train, "normal-only training dataset");
    bench_cmd->add_option("--test", bench.test, "labeled test dataset");
    bench_cmd->add_option("--dataset", bench.dataset,
                          "single labeled dataset; a seeded split makes train/test");
    bench_cmd->add_option("--split-ratio", bench.config.split_ratio,
                          "share of normal sequences used for training with --dataset")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    bench_cmd->add_option("--fpr", bench.config.fpr_tolerance,
                          "tolerated training false-positive rate")
        ->check(CLI::Range(0.0, 0.999999))
        ->capture_default_str();
    bench_cmd->add_option("--out", bench.out, "report path; stdout when omitted");
    bench_cmd->add_option("--records", bench.records, "machine-readable records path");
    add_model_options(bench_cmd, bench.config, bench_agg);

    if (argc <= 1) {
        std::cout << app.help();
        return 1;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) return run_synth(synth);
        if (*train_cmd) {
            train.config.aggregation = train_agg;
            return run_train(train);
        }
        if (*cal_cmd) return run_calibrate(cal);
        if (*score_cmd) return run_score(score);
        if (*bench_cmd) {
            bench.config.aggregation = bench_agg;
            return run_bench(bench);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

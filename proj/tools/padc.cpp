// padc: command-line front end for corpus generation, training, evaluation,
// the multichannel sweep and the studies.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime or training
// failure, 3 I/O or file-format error.

#include "padc/config.hpp"
#include "padc/errors.hpp"
#include "padc/experiments.hpp"
#include "padc/version.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>

using namespace padc;
namespace fs = std::filesystem;
namespace ex = padc::experiments;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRun = 2;
constexpr int kExitIo = 3;

// Flags shared by the commands that build a configuration.
struct ConfigFlags {
    std::optional<std::string> config_file;
    std::optional<std::string> preset;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> pairs;
    std::optional<std::size_t> valid;
    std::optional<std::size_t> length;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> validation_every;
    std::optional<double> learning_rate;
    std::optional<std::size_t> batch_size;
    std::optional<std::string> optimizer;
};

struct OutputFlags {
    std::string dir;
    bool force = false;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool training) {
    cmd->add_option("--config", f.config_file, "INI config file with [frontend] [corpus] [net] [train] sections")
        ->check(CLI::ExistingFile);
    cmd->add_option("--preset", f.preset, "Front-end preset: default-20gs or low-noise-100ms");
    cmd->add_option("--seed", f.seed,
                    training ? "Seed for the corpus, net initialization and training stream" : "Corpus seed");
    cmd->add_option("--pairs", f.pairs, "Number of data pairs");
    cmd->add_option("--valid", f.valid, "Number of validation pairs (default keeps a 50-in-417 share)");
    cmd->add_option("--length", f.length, "Samples per channel in each pair");
    if (training) {
        cmd->add_option("--steps", f.steps, "Total optimizer steps");
        cmd->add_option("--validation-every", f.validation_every, "Steps between validation passes");
        cmd->add_option("--lr", f.learning_rate, "Learning rate");
        cmd->add_option("--batch", f.batch_size, "Pairs per step");
        cmd->add_option("--optimizer", f.optimizer, "adam or adagrad");
    }
}

void add_output_flags(CLI::App* cmd, OutputFlags& o, bool required = true) {
    auto* opt = cmd->add_option("--out", o.dir, "Output directory");
    if (required) {
        opt->required();
    }
    cmd->add_flag("--force", o.force, "Replace the contents of a non-empty output directory");
}

config::Tree load_tree(const ConfigFlags& f) {
    return f.config_file ? config::read_ini(*f.config_file) : config::Tree{};
}

std::string preset_of(const ConfigFlags& f, const config::Tree& tree) {
    if (f.preset) {
        return *f.preset;
    }
    if (auto p = config::section(tree, "frontend").get_optional<std::string>("preset")) {
        return *p;
    }
    return "default-20gs";
}

void apply_corpus_flags(const ConfigFlags& f, dataset::CorpusConfig& c) {
    if (f.pairs) {
        c.n_pairs = *f.pairs;
        const auto share = static_cast<std::size_t>(std::lround(static_cast<double>(c.n_pairs) * 50.0 / 417.0));
        c.n_valid = c.n_pairs < 2 ? 0 : std::min(std::max<std::size_t>(share, 1), c.n_pairs - 1);
    }
    if (f.valid) {
        c.n_valid = *f.valid;
    }
    if (f.length) {
        c.length = *f.length;
    }
    if (f.seed) {
        c.rng_seed = *f.seed;
    }
}

void apply_train_flags(const ConfigFlags& f, training::TrainConfig& t) {
    if (f.steps) {
        t.total_steps = *f.steps;
        if (!f.validation_every && t.total_steps > 0 && t.validation_every > t.total_steps) {
            t.validation_every = t.total_steps;
        }
    }
    if (f.validation_every) {
        t.validation_every = *f.validation_every;
    }
    if (f.learning_rate) {
        t.learning_rate = *f.learning_rate;
    }
    if (f.batch_size) {
        t.batch_size = *f.batch_size;
    }
    if (f.optimizer) {
        if (*f.optimizer == "adam") {
            t.optimizer = nn::OptimizerKind::Adam;
        } else if (*f.optimizer == "adagrad") {
            t.optimizer = nn::OptimizerKind::AdaGrad;
        } else {
            throw ConfigError("--optimizer must be adam or adagrad");
        }
    }
    if (f.seed) {
        t.rng_seed = *f.seed;
    }
}

ex::StudyConfig resolve_study(const ConfigFlags& f, nn::NetKind kind) {
    const config::Tree tree = load_tree(f);
    const std::string preset = preset_of(f, tree);
    ex::StudyConfig s = kind == nn::NetKind::Linearization ? ex::default_linearization_study(preset)
                                                           : ex::default_matching_study(preset);
    s = ex::read_study(tree, s);
    apply_corpus_flags(f, s.corpus);
    apply_train_flags(f, s.train);
    if (f.seed) {
        s.net.rng_seed = *f.seed;
    }
    s.net.kind = kind;
    if (kind == nn::NetKind::Matching && !config::section(tree, "net").count("n_inputs")) {
        s.net.n_inputs = s.frontend.n_channels;
    }
    return s;
}

// Refuses to touch a non-empty directory unless forced; a forced run starts
// from an empty directory so reruns are byte-identical.
void prepare_output(const OutputFlags& o) {
    const fs::path dir(o.dir);
    std::error_code ec;
    if (fs::exists(dir, ec)) {
        if (!fs::is_directory(dir, ec)) {
            throw ConfigError(o.dir + " exists and is not a directory");
        }
        if (!fs::is_empty(dir, ec)) {
            if (!o.force) {
                throw ConfigError("output directory " + o.dir + " is not empty (use --force to replace it)");
            }
            for (const auto& entry : fs::directory_iterator(dir)) {
                fs::remove_all(entry.path(), ec);
                if (ec) {
                    throw IoError("cannot clear " + entry.path().string() + ": " + ec.message());
                }
            }
        }
    }
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + o.dir + ": " + ec.message());
    }
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

void write_history(const training::TrainHistory& h, const fs::path& path) {
    auto out = open_out(path);
    training::write_history_csv(h, out);
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

void print_record(const training::TrainRecord& r) {
    std::printf("step %zu  train_loss %.6e  valid_loss %.6e  valid_sinad %.2f dB\n", r.step, r.train_loss,
                r.valid_loss, r.mean_valid_sinad_db);
    std::fflush(stdout);
}

void print_report(const char* label, const metrics::MetricsReport& r) {
    std::printf("%s sinad_db=%.3f enob_bits=%.3f sfdr_db=%.3f fundamental_hz=%.6g\n", label, r.sinad_db, r.enob_bits,
                r.sfdr_db, r.fundamental_hz);
}

// Trains on `corpus` (or continues from a saved state) and writes the run
// directory. History is written even when training diverges.
int run_training(const std::string& command, ex::StudyConfig s, const dataset::Corpus& corpus,
                 const std::optional<std::string>& resume_from, const OutputFlags& out) {
    s.net.n_inputs = corpus.pairs.front().original.size();
    const nn::Net net = nets::build_net(s.net);
    std::optional<training::TrainState> state;
    if (resume_from) {
        fs::path p(*resume_from);
        if (fs::is_directory(p)) {
            p /= "state.pads";
        }
        state = training::load_train_state(p);
    }
    s.train.validate();
    prepare_output(out);
    const fs::path dir(out.dir);
    config::write_ini(ex::manifest(command, ex::study_tree(s)), dir / "manifest.ini");

    const double before = ex::mean_input_sinad(corpus, corpus.valid);
    std::printf("%s: %zu train / %zu valid pairs, %zu steps\n", command.c_str(), corpus.train.size(),
                corpus.valid.size(), s.train.total_steps);
    if (state) {
        std::printf("resuming at step %zu\n", state->step);
    }
    training::TrainResult result;
    try {
        result = state ? training::resume(net, *state, corpus, s.train, print_record)
                       : training::train(net, corpus, s.train, print_record);
    } catch (const training::DivergenceError& e) {
        write_history(e.history(), dir / "history.csv");
        throw;
    }
    write_history(result.history, dir / "history.csv");
    nn::save_checkpoint(result.net, dir / "final.padn");
    nn::save_checkpoint(result.best_net, dir / "best.padn");
    training::save_train_state(result.state, dir / "state.pads");
    if (!corpus.valid.empty()) {
        const double after = ex::mean_output_sinad(result.best_net, corpus, corpus.valid);
        std::printf("mean validation SINAD: before %.2f dB, after %.2f dB (best checkpoint)\n", before, after);
    }
    return 0;
}

// Runs a command body and maps the error family to an exit code.
template <typename Body>
int guarded(Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitIo;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRun;
    }
}

std::pair<std::size_t, std::size_t> parse_channel_range(const std::string& text) {
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            const std::size_t n = std::stoul(text);
            return {n, n};
        }
        return {std::stoul(text.substr(0, dots)), std::stoul(text.substr(dots + 2))};
    } catch (const std::exception&) {
        throw ConfigError("--channels expects N or A..B, got '" + text + "'");
    }
}

void write_summary(const fs::path& path, const std::vector<std::pair<std::string, double>>& rows) {
    auto out = open_out(path);
    out << "metric,value\n" << std::setprecision(17);
    for (const auto& [k, v] : rows) {
        out << k << ',' << v << '\n';
    }
}

void save_training(const training::TrainResult& r, const fs::path& dir, const std::string& prefix) {
    write_history(r.history, dir / (prefix + "history.csv"));
    nn::save_checkpoint(r.net, dir / (prefix + "final.padn"));
    nn::save_checkpoint(r.best_net, dir / (prefix + "best.padn"));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photonic ADC linearization and channel-matching toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    // generate
    ConfigFlags gen_flags;
    OutputFlags gen_out;
    std::string gen_kind = "linearization";
    std::optional<std::string> gen_mode;
    bool gen_csv = false;
    auto* gen = app.add_subcommand("generate", "Build a corpus and write it to a directory");
    add_config_flags(gen, gen_flags, false);
    add_output_flags(gen, gen_out);
    gen->add_option("--kind", gen_kind, "linearization or matching")
        ->check(CLI::IsMember({"linearization", "matching"}));
    gen->add_option("--matching-mode", gen_mode, "clean-tones or cascade (matching corpora)")
        ->check(CLI::IsMember({"clean-tones", "cascade"}));
    gen->add_flag("--csv", gen_csv, "Also write one CSV per pair");

    // train-linearize / train-match
    ConfigFlags lin_flags, match_flags;
    OutputFlags lin_out, match_out;
    std::optional<std::string> lin_corpus, match_corpus, lin_resume, match_resume;
    auto* lin = app.add_subcommand("train-linearize", "Train a linearization net");
    add_config_flags(lin, lin_flags, true);
    add_output_flags(lin, lin_out);
    lin->add_option("--corpus", lin_corpus, "Corpus directory from 'generate' (default: generate in memory)");
    lin->add_option("--resume", lin_resume, "Run directory or state.pads file to continue from");
    auto* match = app.add_subcommand("train-match", "Train a channel-matching net");
    add_config_flags(match, match_flags, true);
    add_output_flags(match, match_out);
    match->add_option("--corpus", match_corpus, "Corpus directory from 'generate' (default: generate in memory)");
    match->add_option("--resume", match_resume, "Run directory or state.pads file to continue from");

    // eval
    std::string eval_checkpoint, eval_input;
    std::optional<std::string> eval_lin;
    OutputFlags eval_out;
    bool eval_stft = false;
    std::size_t stft_window = 256, stft_hop = 64;
    auto* eval = app.add_subcommand("eval", "Run a trained net on a channel-set file and report metrics");
    eval->add_option("--checkpoint", eval_checkpoint, "Trained net (.padn)")->required();
    eval->add_option("--input", eval_input, "Channel-set file (.padc)")->required();
    eval->add_option("--linearization", eval_lin,
                     "Linearization net applied to every channel first (cascade with a matching --checkpoint)");
    add_output_flags(eval, eval_out, false);
    eval->add_flag("--stft", eval_stft, "Also write STFT CSVs of input and output (needs --out)");
    eval->add_option("--stft-window", stft_window, "STFT frame length")->capture_default_str();
    eval->add_option("--stft-hop", stft_hop, "STFT hop")->capture_default_str();

    // sweep
    ConfigFlags sweep_flags;
    OutputFlags sweep_out;
    std::optional<std::size_t> sweep_parallel, sweep_draws;
    std::optional<std::string> sweep_channels;
    bool sweep_control = false;
    auto* sweep = app.add_subcommand("sweep", "Matching-net sweep over channel counts and mismatch draws");
    add_config_flags(sweep, sweep_flags, true);
    add_output_flags(sweep, sweep_out);
    sweep->add_option("--parallel", sweep_parallel, "Rows trained concurrently (capped by PADC_THREADS)");
    sweep->add_option("--channels", sweep_channels, "Channel counts, N or A..B within 2..8");
    sweep->add_option("--draws", sweep_draws, "Mismatch draws per channel count");
    sweep->add_flag("--control", sweep_control, "Add a zero-mismatch control row per channel count");

    // study
    ConfigFlags study_flags;
    OutputFlags study_out;
    std::string study_name;
    std::optional<std::size_t> test_pairs;
    auto* study = app.add_subcommand("study", "Run a complete study and write its reports");
    study->add_option("name", study_name, "linearization, matching or enob")
        ->required()
        ->check(CLI::IsMember({"linearization", "matching", "enob"}));
    add_config_flags(study, study_flags, true);
    add_output_flags(study, study_out);
    study->add_option("--test-pairs", test_pairs, "Test tones scored after training");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (*gen) {
        return guarded([&] {
            const auto kind = gen_kind == "matching" ? nn::NetKind::Matching : nn::NetKind::Linearization;
            auto s = resolve_study(gen_flags, kind);
            if (gen_mode) {
                s.corpus.matching_mode =
                    *gen_mode == "cascade" ? dataset::MatchingMode::Cascade : dataset::MatchingMode::CleanTones;
            }
            const auto corpus = kind == nn::NetKind::Matching ? dataset::gen_matching_corpus(s.frontend, s.corpus)
                                                              : dataset::gen_linearization_corpus(s.frontend, s.corpus);
            prepare_output(gen_out);
            dataset::save_corpus(corpus, gen_out.dir, gen_csv);
            std::printf("wrote %zu pairs (%zu train / %zu valid) to %s\n", corpus.pairs.size(), corpus.train.size(),
                        corpus.valid.size(), gen_out.dir.c_str());
            return 0;
        });
    }

    const auto train_command = [&](const std::string& name, nn::NetKind kind, const ConfigFlags& flags,
                                   const OutputFlags& out, const std::optional<std::string>& corpus_dir,
                                   const std::optional<std::string>& resume) {
        return guarded([&] {
            auto s = resolve_study(flags, kind);
            s.train.validate();
            dataset::Corpus corpus;
            if (corpus_dir) {
                corpus = dataset::load_corpus(*corpus_dir);
                if (corpus.kind != kind) {
                    throw ConfigError("corpus in " + *corpus_dir + " is not a " +
                                      (kind == nn::NetKind::Matching ? "matching" : "linearization") + " corpus");
                }
                s.frontend = corpus.frontend;
                s.corpus = corpus.config;
            } else {
                corpus = kind == nn::NetKind::Matching ? dataset::gen_matching_corpus(s.frontend, s.corpus)
                                                       : dataset::gen_linearization_corpus(s.frontend, s.corpus);
            }
            return run_training(name, s, corpus, resume, out);
        });
    };
    if (*lin) {
        return train_command("train-linearize", nn::NetKind::Linearization, lin_flags, lin_out, lin_corpus,
                             lin_resume);
    }
    if (*match) {
        return train_command("train-match", nn::NetKind::Matching, match_flags, match_out, match_corpus,
                             match_resume);
    }

    if (*eval) {
        return guarded([&] {
            if (eval_stft && eval_out.dir.empty()) {
                throw ConfigError("--stft needs --out");
            }
            const nn::Net net = nn::load_checkpoint(eval_checkpoint);
            const auto set = frontend::load_channel_set(eval_input);
            std::vector<nn::Sequence> channels = set.channels;
            if (eval_lin) {
                const nn::Net lin_net = nn::load_checkpoint(*eval_lin);
                if (lin_net.kind != nn::NetKind::Linearization) {
                    throw ConfigError(*eval_lin + " is not a linearization net");
                }
                for (auto& ch : channels) {
                    ch = nn::forward(lin_net, std::vector<nn::Sequence>{ch});
                }
            }
            nn::Sequence output;
            if (net.kind == nn::NetKind::Matching) {
                if (channels.size() != net.n_inputs()) {
                    throw ConfigError("matching net expects " + std::to_string(net.n_inputs()) +
                                      " channels, input has " + std::to_string(channels.size()));
                }
                output = nn::forward(net, channels);
            } else {
                for (auto& ch : channels) {
                    ch = nn::forward(net, std::vector<nn::Sequence>{ch});
                }
                output = nn::interleave_sequences(channels);
            }
            const nn::Sequence input = set.interleaved();
            std::optional<metrics::StftRequest> req;
            if (eval_stft) {
                req = metrics::StftRequest{stft_window, stft_hop};
            }
            const auto before = metrics::analyze(input, set.sample_rate, {}, req);
            const auto after = metrics::analyze(output, set.sample_rate, {}, req);
            print_report("before:", before);
            print_report("after: ", after);
            if (!eval_out.dir.empty()) {
                prepare_output(eval_out);
                const fs::path dir(eval_out.dir);
                {
                    auto out = open_out(dir / "report.csv");
                    out << "metric,before,after\n" << std::setprecision(17);
                    out << "sinad_db," << before.sinad_db << ',' << after.sinad_db << '\n';
                    out << "enob_bits," << before.enob_bits << ',' << after.enob_bits << '\n';
                    out << "sfdr_db," << before.sfdr_db << ',' << after.sfdr_db << '\n';
                    out << "fundamental_hz," << before.fundamental_hz << ',' << after.fundamental_hz << '\n';
                }
                auto sb = open_out(dir / "spectrum_before.csv");
                metrics::write_spectrum_csv(before, sb);
                auto sa = open_out(dir / "spectrum_after.csv");
                metrics::write_spectrum_csv(after, sa);
                frontend::ChannelSet result;
                result.channels = {output};
                result.sample_rate = set.sample_rate;
                result.channel_phase = {0};
                frontend::save_channel_set(result, dir / "output.padc");
                if (eval_stft) {
                    auto tb = open_out(dir / "stft_before.csv");
                    metrics::write_stft_csv(*before.stft, tb);
                    auto ta = open_out(dir / "stft_after.csv");
                    metrics::write_stft_csv(*after.stft, ta);
                }
            }
            return 0;
        });
    }

    if (*sweep) {
        return guarded([&] {
            const config::Tree tree = load_tree(sweep_flags);
            const std::string preset = preset_of(sweep_flags, tree);
            auto cfg = ex::read_sweep(tree, ex::default_sweep(preset));
            apply_corpus_flags(sweep_flags, cfg.corpus);
            apply_train_flags(sweep_flags, cfg.train);
            if (sweep_flags.seed) {
                cfg.rng_seed = *sweep_flags.seed;
                cfg.net.rng_seed = *sweep_flags.seed;
            }
            if (sweep_flags.length) {
                cfg.total_length = *sweep_flags.length;
            }
            if (sweep_parallel) {
                cfg.parallel = *sweep_parallel;
            }
            if (sweep_draws) {
                cfg.draws = *sweep_draws;
            }
            if (sweep_channels) {
                std::tie(cfg.min_channels, cfg.max_channels) = parse_channel_range(*sweep_channels);
            }
            if (sweep_control) {
                cfg.control = true;
            }
            cfg.validate();
            prepare_output(sweep_out);
            const fs::path dir(sweep_out.dir);
            config::write_ini(ex::manifest("sweep", ex::sweep_tree(cfg)), dir / "manifest.ini");
            std::printf("sweep: channels %zu..%zu, %zu draws, %zu steps, %zu workers\n", cfg.min_channels,
                        cfg.max_channels, cfg.draws, cfg.train.total_steps, ex::effective_parallelism(cfg.parallel));
            const auto result = ex::run_multichannel_sweep(cfg, [](const ex::SweepRow& r) {
                if (r.ok) {
                    std::printf("N=%zu draw=%zu%s  input %.2f dB -> %.2f dB\n", r.n_channels, r.draw_index,
                                r.control ? " (control)" : "", r.input_mean_valid_sinad_db,
                                r.final_mean_valid_sinad_db);
                } else {
                    std::printf("N=%zu draw=%zu%s  FAILED: %s\n", r.n_channels, r.draw_index,
                                r.control ? " (control)" : "", r.error.c_str());
                }
                std::fflush(stdout);
            });
            auto out = open_out(dir / "sweep.csv");
            ex::write_sweep_csv(result, out);
            if (!result.all_ok()) {
                std::fprintf(stderr, "error: some sweep rows failed, see sweep.csv\n");
                return kExitRun;
            }
            return 0;
        });
    }

    if (*study) {
        return guarded([&] {
            const fs::path dir(study_out.dir);
            if (study_name == "enob") {
                const config::Tree tree = load_tree(study_flags);
                auto cfg = ex::read_enob(tree, ex::default_enob(preset_of(study_flags, tree)));
                apply_corpus_flags(study_flags, cfg.linearization_corpus);
                apply_corpus_flags(study_flags, cfg.matching_corpus);
                apply_train_flags(study_flags, cfg.train);
                if (study_flags.seed) {
                    cfg.linearization_net.rng_seed = cfg.matching_net.rng_seed = *study_flags.seed;
                }
                cfg.validate();
                prepare_output(study_out);
                config::write_ini(ex::manifest("enob", ex::enob_tree(cfg)), dir / "manifest.ini");
                const auto r = ex::run_enob_characterization(cfg, print_record);
                save_training(r.linearization, dir, "linearization_");
                if (r.matching) {
                    save_training(*r.matching, dir, "matching_");
                }
                auto out = open_out(dir / "enob.csv");
                ex::write_enob_csv(r.rows, out);
                for (const auto& row : r.rows) {
                    std::printf("tone %.6g Hz (alias %.6g Hz): ENOB %.2f -> %.2f bits\n", row.tone_hz, row.alias_hz,
                                row.before.enob_bits, row.after.enob_bits);
                }
                return 0;
            }
            const auto kind = study_name == "matching" ? nn::NetKind::Matching : nn::NetKind::Linearization;
            auto s = resolve_study(study_flags, kind);
            if (test_pairs) {
                s.test_pairs = *test_pairs;
            }
            s.train.validate();
            prepare_output(study_out);
            config::write_ini(ex::manifest(study_name, ex::study_tree(s)), dir / "manifest.ini");
            if (kind == nn::NetKind::Linearization) {
                const auto r = ex::run_linearization_study(s, print_record);
                save_training(r.training, dir, "");
                ex::write_signal_report(r.sine, dir, "sine");
                ex::write_signal_report(r.dual_tone, dir, "dual_tone");
                ex::write_signal_report(r.lfm, dir, "lfm");
                write_summary(dir / "summary.csv",
                              {{"mean_test_sinad_before_db", r.mean_test_sinad_before_db},
                               {"mean_test_sinad_after_db", r.mean_test_sinad_after_db},
                               {"dual_tone_spur_before_dbc", r.dual_tone.spur_before_dbc},
                               {"dual_tone_spur_after_dbc", r.dual_tone.spur_after_dbc},
                               {"lfm_sdr_before_db", r.lfm.sdr_before_db},
                               {"lfm_sdr_after_db", r.lfm.sdr_after_db}});
                std::printf("test SINAD %.2f -> %.2f dB; dual-tone spur %.2f -> %.2f dBc; LFM SDR %.2f -> %.2f dB\n",
                            r.mean_test_sinad_before_db, r.mean_test_sinad_after_db, r.dual_tone.spur_before_dbc,
                            r.dual_tone.spur_after_dbc, r.lfm.sdr_before_db, r.lfm.sdr_after_db);
            } else {
                const auto r = ex::run_matching_study(s, print_record);
                save_training(r.training, dir, "");
                ex::write_signal_report(r.sine, dir, "sine");
                ex::write_signal_report(r.lfm, dir, "lfm");
                write_summary(dir / "summary.csv",
                              {{"mean_test_sinad_before_db", r.mean_test_sinad_before_db},
                               {"mean_test_sinad_after_db", r.mean_test_sinad_after_db},
                               {"mean_spur_suppression_db", r.mean_spur_suppression_db},
                               {"lfm_sideband_before_dbc", r.lfm.sideband_before_dbc},
                               {"lfm_sideband_after_dbc", r.lfm.sideband_after_dbc}});
                std::printf("test SINAD %.2f -> %.2f dB; image spur suppressed by %.2f dB; LFM sideband %.2f -> "
                            "%.2f dBc\n",
                            r.mean_test_sinad_before_db, r.mean_test_sinad_after_db, r.mean_spur_suppression_db,
                            r.lfm.sideband_before_dbc, r.lfm.sideband_after_dbc);
            }
            return 0;
        });
    }
    return kExitConfig;
}

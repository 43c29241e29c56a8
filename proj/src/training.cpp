#include "padc/training.hpp"

#include "padc/binary_io.hpp"
#include "padc/metrics.hpp"
#include "padc/seeding.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace padc::training {

namespace {

std::span<const nn::Sequence> inputs_of(const dataset::DataPair& pair) {
    return {pair.original.data(), pair.original.size()};
}

void check_compatible(const nn::Net& net, const dataset::Corpus& corpus, const TrainConfig& cfg) {
    corpus.validate();
    if (net.kind != corpus.kind) {
        throw ConfigError("net kind does not match corpus kind");
    }
    if (corpus.pairs.empty() || corpus.train.empty()) {
        throw ConfigError("corpus has no training pairs");
    }
    const auto& first = corpus.pairs.front();
    if (first.original.size() != net.n_inputs()) {
        throw ConfigError("corpus pairs carry " + std::to_string(first.original.size()) +
                          " input sequences but the net takes " + std::to_string(net.n_inputs()));
    }
    const std::size_t length = first.original.front().size();
    if (cfg.sequence_length != 0 && cfg.sequence_length != length) {
        throw ConfigError("corpus sequences have length " + std::to_string(length) + ", config asks for " +
                          std::to_string(cfg.sequence_length));
    }
    if (length * net.n_inputs() < 2 * net.receptive_radius() + 1) {
        throw ConfigError("sequences are shorter than the net's receptive field");
    }
}

bool all_finite(const Eigen::VectorXd& v) {
    return v.allFinite();
}

void put_vector(io::BinaryWriter& w, const Eigen::VectorXd& v) {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        w.put<double>(v[i]);
    }
}

Eigen::VectorXd get_vector(io::BinaryReader& r, std::string_view field) {
    const std::uint64_t at = r.offset();
    const auto n = r.get<std::uint64_t>(field);
    if (n > (1ULL << 32)) {
        throw FormatError("implausible length for " + std::string(field), at);
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = r.get<double>(field);
    }
    return v;
}

} // namespace

double l1_loss(std::span<const double> output, std::span<const double> reference) {
    if (output.size() != reference.size()) {
        throw ShapeError("l1_loss: output has length " + std::to_string(output.size()) + ", reference " +
                         std::to_string(reference.size()));
    }
    if (output.empty()) {
        throw ShapeError("l1_loss of empty sequences");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) {
        sum += std::abs(output[i] - reference[i]);
    }
    return sum / static_cast<double>(output.size());
}

void TrainConfig::validate() const {
    if (total_steps == 0) {
        throw ConfigError("total_steps must be positive");
    }
    if (validation_every == 0 || validation_every > total_steps) {
        throw ConfigError("validation_every must be in [1, total_steps]");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    if (!(target_rms > 0.0)) {
        throw ConfigError("target_rms must be positive");
    }
}

void write_history_csv(const TrainHistory& history, std::ostream& out) {
    out << "step,train_loss,valid_loss,mean_valid_sinad_db\n" << std::setprecision(17);
    for (const auto& r : history.records) {
        out << r.step << ',' << r.train_loss << ',' << r.valid_loss << ',' << r.mean_valid_sinad_db << '\n';
    }
}

double choose_input_scale(const dataset::Corpus& corpus, double target_rms) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i : corpus.train) {
        for (const auto& seq : corpus.pairs.at(i).original) {
            for (double v : seq) {
                sum += v * v;
            }
            count += seq.size();
        }
    }
    if (count == 0 || !(sum > 0.0)) {
        return 1.0;
    }
    const double rms = std::sqrt(sum / static_cast<double>(count));
    return std::ldexp(1.0, static_cast<int>(std::lround(std::log2(target_rms / rms))));
}

TrainRecord evaluate_split(const nn::Net& net, const dataset::Corpus& corpus, std::span<const std::size_t> indices) {
    TrainRecord rec;
    if (indices.empty()) {
        return rec;
    }
    nn::ForwardCache cache;
    double loss = 0.0;
    double sinad = 0.0;
    for (std::size_t i : indices) {
        const auto& pair = corpus.pairs.at(i);
        const nn::Sequence out = nn::forward(net, inputs_of(pair), &cache);
        loss += l1_loss(out, pair.reference);
        try {
            sinad += metrics::sinad(out, corpus.sample_rate);
        } catch (const AmbiguityError&) {
            // No dominant tone left: counts as 0 dB.
        }
    }
    rec.valid_loss = loss / static_cast<double>(indices.size());
    rec.mean_valid_sinad_db = sinad / static_cast<double>(indices.size());
    return rec;
}

TrainResult train(nn::Net net, const dataset::Corpus& corpus, const TrainConfig& cfg, const ValidationHook& hook) {
    cfg.validate();
    check_compatible(net, corpus, cfg);
    net.input_scale = choose_input_scale(corpus, cfg.target_rms);
    TrainState state;
    state.input_scale = net.input_scale;
    state.params = nn::get_parameters(net);
    state.optimizer = nn::OptimizerState::make(cfg.optimizer, static_cast<std::size_t>(state.params.size()),
                                               cfg.learning_rate);
    return resume(std::move(net), std::move(state), corpus, cfg, hook);
}

TrainResult resume(nn::Net net, TrainState state, const dataset::Corpus& corpus, const TrainConfig& cfg,
                   const ValidationHook& hook) {
    cfg.validate();
    check_compatible(net, corpus, cfg);
    if (static_cast<std::size_t>(state.params.size()) != net.parameter_count()) {
        throw ConfigError("training state holds " + std::to_string(state.params.size()) +
                          " parameters but the net has " + std::to_string(net.parameter_count()));
    }
    if (state.step > cfg.total_steps) {
        throw ConfigError("training state is at step " + std::to_string(state.step) + ", past total_steps " +
                          std::to_string(cfg.total_steps));
    }
    net.input_scale = state.input_scale;
    nn::set_parameters(net, state.params);

    nn::ForwardCache cache;
    const std::size_t n_train = corpus.train.size();
    Eigen::VectorXd grads(state.params.size());
    std::vector<double> loss_grad;

    for (std::size_t step = state.step + 1; step <= cfg.total_steps; ++step) {
        grads.setZero();
        double step_loss = 0.0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const std::uint64_t draw = derive_seed(cfg.rng_seed, step * cfg.batch_size + b);
            const auto& pair = corpus.pairs[corpus.train[draw % n_train]];
            const nn::Sequence out = nn::forward(net, inputs_of(pair), &cache);
            step_loss += l1_loss(out, pair.reference);
            const double scale = 1.0 / (static_cast<double>(out.size()) * static_cast<double>(cfg.batch_size));
            loss_grad.resize(out.size());
            for (std::size_t t = 0; t < out.size(); ++t) {
                const double d = out[t] - pair.reference[t];
                loss_grad[t] = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
            }
            grads += nn::backward(net, cache, loss_grad);
        }
        nn::opt_step(state.optimizer, state.params, grads);
        if (!all_finite(state.params)) {
            throw DivergenceError("non-finite parameter after step " + std::to_string(step), state.history);
        }
        nn::set_parameters(net, state.params);
        state.step = step;
        state.running_loss += step_loss / static_cast<double>(cfg.batch_size);
        ++state.running_count;

        if (step % cfg.validation_every == 0) {
            TrainRecord rec = evaluate_split(net, corpus, corpus.valid);
            rec.step = step;
            rec.train_loss = state.running_loss / static_cast<double>(state.running_count);
            state.running_loss = 0.0;
            state.running_count = 0;
            if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.valid_loss)) {
                throw DivergenceError("non-finite loss at step " + std::to_string(step), state.history);
            }
            if (!corpus.valid.empty() && (!state.has_best || rec.valid_loss < state.best_valid_loss)) {
                state.has_best = true;
                state.best_valid_loss = rec.valid_loss;
                state.best_params = state.params;
            }
            state.history.records.push_back(rec);
            if (hook) {
                hook(rec);
            }
        }
    }

    TrainResult result;
    result.net = net;
    result.best_net = net;
    if (state.has_best) {
        nn::set_parameters(result.best_net, state.best_params);
    }
    result.history = state.history;
    result.state = std::move(state);
    return result;
}

void save_train_state(const TrainState& state, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    io::BinaryWriter w(out);
    w.magic("PADS");
    w.put<std::uint16_t>(kTrainStateVersion);
    w.put<std::uint64_t>(state.step);
    w.put<double>(state.input_scale);
    put_vector(w, state.params);
    const auto& opt = state.optimizer;
    w.put<std::uint8_t>(static_cast<std::uint8_t>(opt.algorithm));
    w.put<double>(opt.learning_rate);
    w.put<double>(opt.beta1);
    w.put<double>(opt.beta2);
    w.put<double>(opt.epsilon);
    w.put<std::uint64_t>(opt.step);
    put_vector(w, opt.first_moment);
    put_vector(w, opt.second_moment);
    w.put<double>(state.running_loss);
    w.put<std::uint64_t>(state.running_count);
    w.put<std::uint8_t>(state.has_best ? 1 : 0);
    w.put<double>(state.best_valid_loss);
    put_vector(w, state.best_params);
    w.put<std::uint64_t>(state.history.records.size());
    for (const auto& r : state.history.records) {
        w.put<std::uint64_t>(r.step);
        w.put<double>(r.train_loss);
        w.put<double>(r.valid_loss);
        w.put<double>(r.mean_valid_sinad_db);
    }
    w.check();
}

TrainState load_train_state(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    io::BinaryReader r(in);
    r.expect_magic("PADS", "training state");
    const std::uint64_t version_at = r.offset();
    const auto version = r.get<std::uint16_t>("version");
    if (version != kTrainStateVersion) {
        throw FormatError("unsupported training state version " + std::to_string(version) + " (expected " +
                              std::to_string(kTrainStateVersion) + ")",
                          version_at);
    }
    TrainState s;
    s.step = r.get<std::uint64_t>("step");
    s.input_scale = r.get<double>("input_scale");
    s.params = get_vector(r, "params");
    const std::uint64_t kind_at = r.offset();
    const auto kind = r.get<std::uint8_t>("optimizer");
    if (kind > 1) {
        throw FormatError("unknown optimizer kind " + std::to_string(kind), kind_at);
    }
    s.optimizer.algorithm = static_cast<nn::OptimizerKind>(kind);
    s.optimizer.learning_rate = r.get<double>("learning_rate");
    s.optimizer.beta1 = r.get<double>("beta1");
    s.optimizer.beta2 = r.get<double>("beta2");
    s.optimizer.epsilon = r.get<double>("epsilon");
    s.optimizer.step = r.get<std::uint64_t>("optimizer step");
    s.optimizer.first_moment = get_vector(r, "first_moment");
    s.optimizer.second_moment = get_vector(r, "second_moment");
    s.running_loss = r.get<double>("running_loss");
    s.running_count = r.get<std::uint64_t>("running_count");
    s.has_best = r.get<std::uint8_t>("has_best") != 0;
    s.best_valid_loss = r.get<double>("best_valid_loss");
    s.best_params = get_vector(r, "best_params");
    const auto n_records = r.get<std::uint64_t>("history length");
    for (std::uint64_t i = 0; i < n_records; ++i) {
        TrainRecord rec;
        rec.step = r.get<std::uint64_t>("history step");
        rec.train_loss = r.get<double>("history train_loss");
        rec.valid_loss = r.get<double>("history valid_loss");
        rec.mean_valid_sinad_db = r.get<double>("history sinad");
        s.history.records.push_back(rec);
    }
    r.expect_end();
    return s;
}

} // namespace padc::training

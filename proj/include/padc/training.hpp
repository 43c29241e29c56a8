#pragma once

// L1 training loop with a seeded per-step pair stream, periodic validation
// and exact resume.

#include "padc/dataset.hpp"
#include "padc/errors.hpp"
#include "padc/nn.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace padc::training {

double l1_loss(std::span<const double> output, std::span<const double> reference);

struct TrainConfig {
    std::size_t total_steps = 50000;
    std::size_t validation_every = 1000;
    double learning_rate = 1e-3;
    nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
    std::size_t batch_size = 1;
    std::uint64_t rng_seed = 0;
    // Per-channel length the corpus must have; 0 accepts the corpus as is.
    std::size_t sequence_length = 0;
    // RMS the training originals are scaled to (rounded to a power of two).
    double target_rms = 0.25;

    void validate() const;
};

struct TrainRecord {
    std::size_t step = 0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double mean_valid_sinad_db = 0.0;
};

struct TrainHistory {
    std::vector<TrainRecord> records;
};

void write_history_csv(const TrainHistory& history, std::ostream& out);

// Everything needed to continue a run bit-identically.
struct TrainState {
    std::size_t step = 0;
    double input_scale = 1.0;
    Eigen::VectorXd params;
    nn::OptimizerState optimizer;
    double running_loss = 0.0;
    std::size_t running_count = 0;
    double best_valid_loss = 0.0;
    bool has_best = false;
    Eigen::VectorXd best_params;
    TrainHistory history;
};

inline constexpr std::uint16_t kTrainStateVersion = 1;

void save_train_state(const TrainState& state, const std::filesystem::path& path);
TrainState load_train_state(const std::filesystem::path& path);

struct TrainResult {
    nn::Net net;       // parameters after the last step
    nn::Net best_net;  // parameters at the lowest validation loss
    TrainHistory history;
    TrainState state;
};

class DivergenceError : public RunError {
public:
    DivergenceError(const std::string& what, TrainHistory history)
        : RunError(what), history_(std::move(history)) {}

    const TrainHistory& history() const { return history_; }

private:
    TrainHistory history_;
};

using ValidationHook = std::function<void(const TrainRecord&)>;

// Power-of-two input scale that brings the training originals' RMS close to
// target_rms.
double choose_input_scale(const dataset::Corpus& corpus, double target_rms);

// Mean L1 loss and mean SINAD of the net over the validation split.
TrainRecord evaluate_split(const nn::Net& net, const dataset::Corpus& corpus, std::span<const std::size_t> indices);

TrainResult train(nn::Net net, const dataset::Corpus& corpus, const TrainConfig& cfg,
                  const ValidationHook& hook = {});

// Continues from `state` (as saved by an earlier run on the same corpus and
// config) up to cfg.total_steps.
TrainResult resume(nn::Net net, TrainState state, const dataset::Corpus& corpus, const TrainConfig& cfg,
                   const ValidationHook& hook = {});

} // namespace padc::training

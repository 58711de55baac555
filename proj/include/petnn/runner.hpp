#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "petnn/eval.hpp"
#include "petnn/run_config.hpp"
#include "petnn/serialize.hpp"
#include "petnn/tasks.hpp"
#include "petnn/train.hpp"

namespace petnn {

struct DatasetBundle {
    SequenceBatch train, val, test;
    LossKind loss = LossKind::mse;
    std::size_t input_dim = 0;
    std::size_t out_dim = 0;
    bool normalized = false;
};

DatasetBundle build_datasets(const TaskConfig& task, Rng& rng);

// content hash of the sample stream in iteration order (inputs, targets,
// labels of train, val, test); equal hashes mean equal data in equal order
std::string data_stream_hash(const DatasetBundle& data);

struct EpochRow {
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    std::optional<double> mse, mae, accuracy;
    double wall_ms = 0.0;
};

std::string metrics_csv(const std::vector<EpochRow>& rows);

EpochRow row_from_report(std::size_t epoch, const std::string& split, const MetricsReport& rep,
                         TaskKind kind);

struct TrainProgress {
    std::vector<EpochRow> rows;
    std::size_t epochs_run = 0;
    bool early_stopped = false;
};

// epoch loop with per-epoch train/val metric rows and an optional patience
// counter on validation loss
template <class Cell>
TrainProgress train_loop(Model<Cell>& model, AdamState<Cell>& opt, const DatasetBundle& data,
                         const TrainConfig& cfg, std::size_t start_epoch = 0) {
    TrainProgress progress;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t bad_epochs = 0;
    for (std::size_t epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double train_loss = run_epoch(model, opt, data.train, cfg);
        const double train_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();

        MetricsReport train_rep = evaluate(model, data.train, cfg.loss);
        EpochRow train_row = row_from_report(epoch, "train", train_rep, data.train.kind);
        train_row.wall_ms = train_ms;
        (void)train_loss;
        progress.rows.push_back(train_row);

        const MetricsReport val_rep = evaluate(model, data.val, cfg.loss);
        progress.rows.push_back(row_from_report(epoch, "val", val_rep, data.val.kind));

        progress.epochs_run = epoch;
        if (cfg.patience > 0) {
            if (val_rep.loss < best_val) {
                best_val = val_rep.loss;
                bad_epochs = 0;
            } else if (++bad_epochs > cfg.patience) {
                progress.early_stopped = true;
                break;
            }
        }
    }
    return progress;
}

Model<PetnnCell> build_petnn_model(const RunConfig& cfg, std::size_t input_dim,
                                   std::size_t out_dim, Rng& rng);
Model<RnnRefCell> build_rnn_model(const RunConfig& cfg, std::size_t input_dim,
                                  std::size_t out_dim, Rng& rng);

// command bodies; the CLI maps exceptions to exit codes
int cmd_train(const std::filesystem::path& config_path,
              const std::optional<std::string>& out_override,
              const std::optional<std::uint64_t>& seed_override);
int cmd_eval(const std::filesystem::path& config_path,
             const std::optional<std::string>& out_override,
             const std::optional<std::uint64_t>& seed_override);
int cmd_gradcheck(const std::filesystem::path& config_path,
                  const std::optional<std::string>& out_override,
                  const std::optional<std::uint64_t>& seed_override);
int cmd_ablate(const std::filesystem::path& config_path,
               const std::optional<std::string>& out_override,
               const std::optional<std::uint64_t>& seed_override);
int cmd_trace(const std::filesystem::path& config_path,
              const std::optional<std::string>& out_override,
              const std::optional<std::uint64_t>& seed_override);
int cmd_bench(const std::filesystem::path& config_path,
              const std::optional<std::string>& out_override,
              const std::optional<std::uint64_t>& seed_override);

// exit-code taxonomy: 0 ok, 1 assertion failure, 2 bad input, 3 numeric
// failure, 4 could-not-satisfy-precondition
int run_command(const std::string& command, const std::filesystem::path& config_path,
                const std::optional<std::string>& out_override,
                const std::optional<std::uint64_t>& seed_override);

}  // namespace petnn

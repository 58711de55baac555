#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "petnn/cell.hpp"
#include "petnn/tasks.hpp"
#include "petnn/train.hpp"

namespace petnn {

struct TaskConfig {
    std::string kind;  // adding_problem | first_token_recall |
                       // distractor_classification | forecast_synthetic | forecast_csv
    std::size_t length = 100;
    std::size_t n_train = 1000;
    std::size_t n_val = 200;
    std::size_t n_test = 200;
    std::size_t k_classes = 4;
    double distractor_fraction = 0.0;
    // forecasting
    std::string csv_path;
    std::vector<std::string> target_cols;  // empty = all feature columns
    ForecastSeriesSpec series;
    WindowSpec window;
    SplitSpec split;
};

struct InitConfig {
    InitScheme scheme = InitScheme::glorot_uniform;
    // starting bias of the time-decay map; positive values start units in
    // the retaining regime instead of releasing every step
    double time_decay_bias = 0.0;
    // starting bias of the mixing gate; negative values start near retention
    double mix_gate_bias = 0.0;
};

struct GradCheckConfig {
    std::size_t input_dim = 3;
    std::size_t seq_len = 6;
};

struct BenchConfig {
    std::size_t seq_len = 96;
    std::optional<std::size_t> input_dim;
    std::optional<std::size_t> out_dim;
};

struct EvalConfig {
    std::string checkpoint;
    std::string split = "test";  // train | val | test
};

struct TraceConfig {
    std::string checkpoint;
    std::string split = "test";
    std::size_t sequence_index = 0;
};

// The full run document. Unknown keys anywhere are rejected before any work.
struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "runs/out";
    std::string model_kind = "petnn";  // petnn | rnn_ref
    CellConfig cell;                   // input_dim filled from the task
    InitConfig init;
    TrainConfig train;
    std::optional<TaskConfig> task;
    std::optional<EvalConfig> eval;
    std::optional<TraceConfig> trace;
    std::optional<GradCheckConfig> gradcheck;
    std::optional<BenchConfig> bench;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace petnn

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "petnn/linalg.hpp"

namespace petnn {

enum class TaskKind { regression, classification };

// A batch of equal-length sequences. inputs[i] is an L x d matrix
// (time x feature). Regression targets are one row per sequence;
// classification uses integer labels.
struct SequenceBatch {
    std::vector<Matrix> inputs;
    Matrix targets;           // n x out_dim (regression)
    std::vector<int> labels;  // n (classification)
    TaskKind kind = TaskKind::regression;

    std::size_t size() const { return inputs.size(); }
    std::size_t seq_len() const { return inputs.empty() ? 0 : inputs[0].rows; }
    std::size_t feature_dim() const { return inputs.empty() ? 0 : inputs[0].cols; }
    std::size_t out_dim() const;

    // uniform length, finite features, target arity matches kind
    void validate() const;
};

struct WindowSpec {
    std::size_t seq_len = 96;
    std::size_t pred_len = 96;
    std::size_t stride = 1;

    void validate() const;
};

struct SplitSpec {
    double ratios[3] = {0.7, 0.1, 0.2};  // train/val/test, chronological

    void validate() const;
};

// Adding problem: channel 0 is uniform noise in [0,1]; channel 1 marks
// exactly two positions; the target is the sum of the two marked values.
SequenceBatch gen_adding_problem(Rng& rng, std::size_t n, std::size_t length);

// First step carries a one-hot class, the rest are uniform noise tokens;
// the label is the first step's class.
SequenceBatch gen_first_token_recall(Rng& rng, std::size_t n, std::size_t length,
                                     std::size_t k_classes);

// First-token recall with a contiguous distractor block covering
// distractor_fraction of the remaining steps: half of its tokens repeat a
// wrong class, the other half are uniform noise. fraction 0 reduces to
// gen_first_token_recall.
SequenceBatch gen_distractor_classification(Rng& rng, std::size_t n, std::size_t length,
                                            std::size_t k_classes, double distractor_fraction);

struct SineComponent {
    double amplitude = 1.0;
    double period = 24.0;
    double phase = 0.0;
};

struct ForecastSeriesSpec {
    std::size_t n_points = 2000;
    std::vector<SineComponent> components = {{1.0, 24.0, 0.0}};
    double trend_slope = 0.0;
    double noise_sigma = 0.0;
};

// univariate series: sum of sinusoids + linear trend + Gaussian noise,
// one column per series feature (here a single column "y")
Matrix gen_synthetic_forecast(Rng& rng, const ForecastSeriesSpec& spec);

// CSV with a header row; a first column named "date" is skipped; all other
// cells parse as decimal floats. Errors carry the 1-based line number.
struct CsvSeries {
    std::vector<std::string> feature_names;
    Matrix values;  // time x features
};
CsvSeries load_csv_series(const std::filesystem::path& path);

// shortest round-trip decimal encoding; what gen writes, load reads back
// bit-exactly
void write_csv_series(const std::filesystem::path& path,
                      const std::vector<std::string>& feature_names, const Matrix& values);

struct WindowedSplits {
    SequenceBatch train, val, test;
};

// Chronological split by ratios first, then sliding windows within each
// split; no window crosses a split boundary. Inputs carry all feature
// columns; targets are the following pred_len steps of target_cols,
// flattened row-major (time-major).
WindowedSplits window_and_split(const Matrix& series, const WindowSpec& window,
                                const SplitSpec& split, const std::vector<std::size_t>& target_cols);

struct NormStats {
    Vector mean, stddev;          // per feature
    std::vector<bool> passthrough;  // constant features left untouched
};

// z-score statistics from the train rows only
NormStats normalize_fit(const Matrix& series, std::size_t train_rows);
Matrix normalize_apply(const NormStats& stats, const Matrix& series);
Matrix normalize_invert(const NormStats& stats, const Matrix& series);

// split boundary indices (train_end, val_end) = (floor(r0*n), floor((r0+r1)*n))
std::pair<std::size_t, std::size_t> split_points(std::size_t n, const SplitSpec& split);

}  // namespace petnn

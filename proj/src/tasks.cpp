#include "petnn/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace petnn {

std::size_t SequenceBatch::out_dim() const {
    return kind == TaskKind::regression ? targets.cols : 0;
}

void SequenceBatch::validate() const {
    const std::size_t len = seq_len();
    const std::size_t dim = feature_dim();
    for (const Matrix& m : inputs) {
        if (m.rows != len || m.cols != dim) shape_error("SequenceBatch: ragged sequence lengths");
        if (!all_finite(m)) shape_error("SequenceBatch: non-finite feature");
    }
    if (kind == TaskKind::regression) {
        if (targets.rows != inputs.size()) shape_error("SequenceBatch: target count mismatch");
    } else {
        if (labels.size() != inputs.size()) shape_error("SequenceBatch: label count mismatch");
    }
}

void WindowSpec::validate() const {
    if (seq_len == 0 || pred_len == 0) shape_error("WindowSpec: seq_len and pred_len must be >= 1");
    if (stride == 0) shape_error("WindowSpec: stride must be >= 1");
}

void SplitSpec::validate() const {
    double total = 0.0;
    for (double r : ratios) {
        if (r < 0.0) shape_error("SplitSpec: negative ratio");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) shape_error("SplitSpec: ratios must sum to 1");
}

SequenceBatch gen_adding_problem(Rng& rng, std::size_t n, std::size_t length) {
    if (length < 2) shape_error("gen_adding_problem: length must be >= 2");
    SequenceBatch batch;
    batch.kind = TaskKind::regression;
    batch.inputs.reserve(n);
    batch.targets = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        Matrix seq(length, 2);
        for (std::size_t t = 0; t < length; ++t) seq(t, 0) = rng.uniform();
        const std::size_t a = rng.below(length);
        std::size_t b = rng.below(length - 1);
        if (b >= a) ++b;  // distinct second marker
        seq(a, 1) = 1.0;
        seq(b, 1) = 1.0;
        batch.targets(i, 0) = seq(a, 0) + seq(b, 0);
        batch.inputs.push_back(std::move(seq));
    }
    return batch;
}

SequenceBatch gen_first_token_recall(Rng& rng, std::size_t n, std::size_t length,
                                     std::size_t k_classes) {
    if (length < 1) shape_error("gen_first_token_recall: length must be >= 1");
    if (k_classes < 2) shape_error("gen_first_token_recall: k_classes must be >= 2");
    SequenceBatch batch;
    batch.kind = TaskKind::classification;
    batch.inputs.reserve(n);
    batch.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Matrix seq(length, k_classes);
        const std::size_t label = rng.below(k_classes);
        seq(0, label) = 1.0;
        for (std::size_t t = 1; t < length; ++t) seq(t, rng.below(k_classes)) = 1.0;
        batch.inputs.push_back(std::move(seq));
        batch.labels.push_back(static_cast<int>(label));
    }
    return batch;
}

SequenceBatch gen_distractor_classification(Rng& rng, std::size_t n, std::size_t length,
                                            std::size_t k_classes, double distractor_fraction) {
    if (length < 1) shape_error("gen_distractor_classification: length must be >= 1");
    if (k_classes < 2) shape_error("gen_distractor_classification: k_classes must be >= 2");
    if (distractor_fraction < 0.0 || distractor_fraction >= 1.0)
        shape_error("gen_distractor_classification: fraction must lie in [0,1)");
    SequenceBatch batch;
    batch.kind = TaskKind::classification;
    batch.inputs.reserve(n);
    batch.labels.reserve(n);
    const std::size_t tail = length - 1;
    const std::size_t block = static_cast<std::size_t>(distractor_fraction * static_cast<double>(tail));
    for (std::size_t i = 0; i < n; ++i) {
        Matrix seq(length, k_classes);
        const std::size_t label = rng.below(k_classes);
        seq(0, label) = 1.0;
        for (std::size_t t = 1; t < length; ++t) seq(t, rng.below(k_classes)) = 1.0;
        if (block > 0) {
            // contiguous block at a random offset; first half repeats a wrong
            // class ("interfering"), second half is fresh noise ("irrelevant")
            const std::size_t start = 1 + rng.below(tail - block + 1);
            std::size_t wrong = rng.below(k_classes - 1);
            if (wrong >= label) ++wrong;
            const std::size_t interfering = block / 2;
            for (std::size_t t = start; t < start + block; ++t) {
                for (std::size_t c = 0; c < k_classes; ++c) seq(t, c) = 0.0;
                const std::size_t cls =
                    (t - start < interfering) ? wrong : rng.below(k_classes);
                seq(t, cls) = 1.0;
            }
        }
        batch.inputs.push_back(std::move(seq));
        batch.labels.push_back(static_cast<int>(label));
    }
    return batch;
}

Matrix gen_synthetic_forecast(Rng& rng, const ForecastSeriesSpec& spec) {
    Matrix series(spec.n_points, 1);
    for (std::size_t t = 0; t < spec.n_points; ++t) {
        double y = spec.trend_slope * static_cast<double>(t);
        for (const SineComponent& c : spec.components)
            y += c.amplitude *
                 std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / c.period + c.phase);
        if (spec.noise_sigma > 0.0) y += spec.noise_sigma * rng.normal();
        series(t, 0) = y;
    }
    return series;
}

namespace {

[[noreturn]] void csv_error(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
    throw std::invalid_argument("petnn: " + path.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

CsvSeries load_csv_series(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("petnn: cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) csv_error(path, 1, "empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_csv_line(line);
    if (header.empty()) csv_error(path, 1, "empty header");
    const bool skip_date = header[0] == "date";
    CsvSeries series;
    for (std::size_t i = skip_date ? 1 : 0; i < header.size(); ++i)
        series.feature_names.push_back(header[i]);
    const std::size_t n_features = series.feature_names.size();
    if (n_features == 0) csv_error(path, 1, "no feature columns");

    std::vector<double> values;
    std::size_t n_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            csv_error(path, line_no, "expected " + std::to_string(header.size()) + " cells, got " +
                                         std::to_string(cells.size()));
        for (std::size_t i = skip_date ? 1 : 0; i < cells.size(); ++i) {
            const std::string& cell = cells[i];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size())
                csv_error(path, line_no, "non-numeric cell '" + cell + "'");
            values.push_back(v);
        }
        ++n_rows;
    }
    if (n_rows == 0) csv_error(path, line_no, "no data rows");
    series.values = Matrix(n_rows, n_features);
    series.values.data = std::move(values);
    return series;
}

void write_csv_series(const std::filesystem::path& path,
                      const std::vector<std::string>& feature_names, const Matrix& values) {
    if (feature_names.size() != values.cols) shape_error("write_csv_series: header width mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("petnn: cannot write " + path.string());
    out << "date";
    for (const std::string& name : feature_names) out << ',' << name;
    out << '\n';
    char buf[64];
    for (std::size_t t = 0; t < values.rows; ++t) {
        out << t;
        for (std::size_t j = 0; j < values.cols; ++j) {
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), values(t, j));
            out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
            (void)ec;
        }
        out << '\n';
    }
}

std::pair<std::size_t, std::size_t> split_points(std::size_t n, const SplitSpec& split) {
    const auto train_end = static_cast<std::size_t>(split.ratios[0] * static_cast<double>(n));
    const auto val_end =
        static_cast<std::size_t>((split.ratios[0] + split.ratios[1]) * static_cast<double>(n));
    return {train_end, val_end};
}

namespace {

SequenceBatch window_segment(const Matrix& series, std::size_t begin, std::size_t end,
                             const WindowSpec& w, const std::vector<std::size_t>& target_cols) {
    SequenceBatch batch;
    batch.kind = TaskKind::regression;
    const std::size_t need = w.seq_len + w.pred_len;
    const std::size_t out_dim = w.pred_len * target_cols.size();
    std::vector<std::vector<double>> target_rows;
    if (end > begin && end - begin >= need) {
        for (std::size_t start = begin; start + need <= end; start += w.stride) {
            Matrix input(w.seq_len, series.cols);
            for (std::size_t t = 0; t < w.seq_len; ++t)
                for (std::size_t j = 0; j < series.cols; ++j) input(t, j) = series(start + t, j);
            std::vector<double> target(out_dim);
            std::size_t k = 0;
            for (std::size_t t = 0; t < w.pred_len; ++t)
                for (std::size_t col : target_cols) target[k++] = series(start + w.seq_len + t, col);
            batch.inputs.push_back(std::move(input));
            target_rows.push_back(std::move(target));
        }
    }
    batch.targets = Matrix(target_rows.size(), out_dim);
    for (std::size_t i = 0; i < target_rows.size(); ++i)
        for (std::size_t j = 0; j < out_dim; ++j) batch.targets(i, j) = target_rows[i][j];
    return batch;
}

}  // namespace

WindowedSplits window_and_split(const Matrix& series, const WindowSpec& window,
                                const SplitSpec& split,
                                const std::vector<std::size_t>& target_cols) {
    window.validate();
    split.validate();
    if (target_cols.empty()) shape_error("window_and_split: no target columns");
    for (std::size_t col : target_cols)
        if (col >= series.cols) shape_error("window_and_split: target column out of range");
    const auto [train_end, val_end] = split_points(series.rows, split);
    WindowedSplits out;
    out.train = window_segment(series, 0, train_end, window, target_cols);
    out.val = window_segment(series, train_end, val_end, window, target_cols);
    out.test = window_segment(series, val_end, series.rows, window, target_cols);
    if (out.train.size() == 0)
        shape_error("window_and_split: train split too short for one window");
    return out;
}

NormStats normalize_fit(const Matrix& series, std::size_t train_rows) {
    if (train_rows == 0 || train_rows > series.rows)
        shape_error("normalize_fit: bad train row count");
    NormStats stats;
    stats.mean = Vector(series.cols);
    stats.stddev = Vector(series.cols, 1.0);
    stats.passthrough.assign(series.cols, false);
    for (std::size_t j = 0; j < series.cols; ++j) {
        double mean = 0.0;
        for (std::size_t t = 0; t < train_rows; ++t) mean += series(t, j);
        mean /= static_cast<double>(train_rows);
        double var = 0.0;
        for (std::size_t t = 0; t < train_rows; ++t) {
            const double d = series(t, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(train_rows);
        const double sd = std::sqrt(var);
        if (sd > 0.0) {
            stats.mean[j] = mean;
            stats.stddev[j] = sd;
        } else {
            stats.passthrough[j] = true;
            std::cerr << "petnn: warning: feature " << j
                      << " is constant on the train split; passing through unnormalized\n";
        }
    }
    return stats;
}

Matrix normalize_apply(const NormStats& stats, const Matrix& series) {
    if (stats.mean.size() != series.cols) shape_error("normalize_apply: feature count mismatch");
    Matrix out(series.rows, series.cols);
    for (std::size_t t = 0; t < series.rows; ++t)
        for (std::size_t j = 0; j < series.cols; ++j)
            out(t, j) = stats.passthrough[j] ? series(t, j)
                                             : (series(t, j) - stats.mean[j]) / stats.stddev[j];
    return out;
}

Matrix normalize_invert(const NormStats& stats, const Matrix& series) {
    if (stats.mean.size() != series.cols) shape_error("normalize_invert: feature count mismatch");
    Matrix out(series.rows, series.cols);
    for (std::size_t t = 0; t < series.rows; ++t)
        for (std::size_t j = 0; j < series.cols; ++j)
            out(t, j) = stats.passthrough[j] ? series(t, j)
                                             : series(t, j) * stats.stddev[j] + stats.mean[j];
    return out;
}

}  // namespace petnn

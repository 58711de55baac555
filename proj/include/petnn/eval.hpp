#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include "petnn/tasks.hpp"
#include "petnn/train.hpp"

namespace petnn {

struct MetricsReport {
    double loss = 0.0;
    double mse = 0.0;
    double mae = 0.0;
    std::optional<double> accuracy;  // classification only
    std::size_t n_samples = 0;
    bool normalized = false;  // metrics computed on normalized data
    double wall_ms = 0.0;
};

// deterministic pass over the split in order; no parameter mutation.
// Sequences are evaluated independently from the zero state.
template <class Cell>
MetricsReport evaluate(const Model<Cell>& model, const SequenceBatch& data, LossKind loss_kind);

// per-step (T, C, S, m) of one sequence
struct StateTrace {
    std::vector<Vector> t, c, s, m;
    std::size_t steps() const { return t.size(); }
};

StateTrace collect_state_trace(const Model<PetnnCell>& model, const Matrix& sequence);

// CSV with columns step,unit,T,C,S,m; one row per (step, unit)
void export_trace(const Model<PetnnCell>& model, const Matrix& sequence,
                  const std::filesystem::path& path);

struct EfficiencyReport {
    std::size_t params = 0;
    std::size_t flops_per_sequence = 0;
};

EfficiencyReport efficiency_report(const CellConfig& cfg, std::size_t out_dim,
                                   std::size_t seq_len);

// --- implementation ---

template <class Cell>
MetricsReport evaluate(const Model<Cell>& model, const SequenceBatch& data, LossKind loss_kind) {
    data.validate();
    if (data.size() == 0) shape_error("evaluate: empty split");
    MetricsReport report;
    report.n_samples = data.size();
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const ForwardResult<Cell> fw =
            forward_sequence(model, data.inputs[i], model.cell.zero_state());
        report.loss += sample_loss(fw.output, data, i, loss_kind);
        if (data.kind == TaskKind::classification) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < fw.output.size(); ++j)
                if (fw.output[j] > fw.output[best]) best = j;
            if (static_cast<int>(best) == data.labels[i]) ++correct;
        } else {
            Vector target(data.targets.cols);
            for (std::size_t j = 0; j < data.targets.cols; ++j) target[j] = data.targets(i, j);
            report.mse += mse_loss(fw.output, target);
            report.mae += mae_loss(fw.output, target);
        }
    }
    const double n = static_cast<double>(data.size());
    report.loss /= n;
    report.mse /= n;
    report.mae /= n;
    if (data.kind == TaskKind::classification)
        report.accuracy = static_cast<double>(correct) / n;
    report.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return report;
}

}  // namespace petnn

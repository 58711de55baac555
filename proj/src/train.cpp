#include "petnn/train.hpp"

#include <algorithm>
#include <cmath>

namespace petnn {

void TrainConfig::validate() const {
    if (batch_size == 0) shape_error("TrainConfig: batch_size must be >= 1");
    if (learning_rate <= 0.0) shape_error("TrainConfig: learning_rate must be > 0");
    if (grad_clip_norm <= 0.0) shape_error("TrainConfig: grad_clip_norm must be > 0");
}

double mse_loss(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size() || pred.size() == 0) shape_error("mse_loss: bad shapes");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double mae_loss(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size() || pred.size() == 0) shape_error("mae_loss: bad shapes");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

double cross_entropy_loss(const Vector& logits, int label) {
    if (logits.size() == 0 || label < 0 || static_cast<std::size_t>(label) >= logits.size())
        shape_error("cross_entropy_loss: bad label");
    double mx = logits[0];
    for (double v : logits.data) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : logits.data) denom += std::exp(v - mx);
    return std::log(denom) - (logits[static_cast<std::size_t>(label)] - mx);
}

Vector mse_grad(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size() || pred.size() == 0) shape_error("mse_grad: bad shapes");
    Vector g(pred.size());
    const double s = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) g[i] = s * (pred[i] - target[i]);
    return g;
}

Vector mae_grad(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size() || pred.size() == 0) shape_error("mae_grad: bad shapes");
    Vector g(pred.size());
    const double s = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        g[i] = d > 0.0 ? s : (d < 0.0 ? -s : 0.0);
    }
    return g;
}

Vector cross_entropy_grad(const Vector& logits, int label) {
    if (logits.size() == 0 || label < 0 || static_cast<std::size_t>(label) >= logits.size())
        shape_error("cross_entropy_grad: bad label");
    double mx = logits[0];
    for (double v : logits.data) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : logits.data) denom += std::exp(v - mx);
    Vector g(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) g[i] = std::exp(logits[i] - mx) / denom;
    g[static_cast<std::size_t>(label)] -= 1.0;
    return g;
}

CellState apply_reset_policy(const CellState& final_state, const ResetPolicy& policy) {
    CellState init(final_state.s.size());
    if (policy.time_retained) init.t = final_state.t;
    if (policy.energy_retained) init.c = final_state.c;
    return init;  // S always starts from zero
}

double sample_loss(const Vector& output, const SequenceBatch& data, std::size_t index,
                   LossKind kind) {
    if (data.kind == TaskKind::classification) {
        if (kind != LossKind::cross_entropy)
            shape_error("classification data requires cross_entropy loss");
        return cross_entropy_loss(output, data.labels[index]);
    }
    Vector target(data.targets.cols);
    for (std::size_t j = 0; j < data.targets.cols; ++j) target[j] = data.targets(index, j);
    switch (kind) {
        case LossKind::mse: return mse_loss(output, target);
        case LossKind::mae: return mae_loss(output, target);
        case LossKind::cross_entropy: shape_error("cross_entropy needs labelled data");
    }
    return 0.0;
}

Vector sample_loss_grad(const Vector& output, const SequenceBatch& data, std::size_t index,
                        LossKind kind) {
    if (data.kind == TaskKind::classification) {
        if (kind != LossKind::cross_entropy)
            shape_error("classification data requires cross_entropy loss");
        return cross_entropy_grad(output, data.labels[index]);
    }
    Vector target(data.targets.cols);
    for (std::size_t j = 0; j < data.targets.cols; ++j) target[j] = data.targets(index, j);
    switch (kind) {
        case LossKind::mse: return mse_grad(output, target);
        case LossKind::mae: return mae_grad(output, target);
        case LossKind::cross_entropy: shape_error("cross_entropy needs labelled data");
    }
    return Vector(output.size());
}

double global_grad_norm(const std::vector<const std::vector<double>*>& blocks) {
    double sq = 0.0;
    for (const auto* b : blocks)
        for (double g : *b) sq += g * g;
    return std::sqrt(sq);
}

}  // namespace petnn

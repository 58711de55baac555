#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "petnn/cell.hpp"
#include "petnn/errors.hpp"
#include "petnn/linalg.hpp"
#include "petnn/rnn_ref.hpp"
#include "petnn/tasks.hpp"

namespace petnn {

enum class LossKind { mse, mae, cross_entropy };

double mse_loss(const Vector& pred, const Vector& target);
double mae_loss(const Vector& pred, const Vector& target);
double cross_entropy_loss(const Vector& logits, int label);

// gradients of the per-sample loss w.r.t. the prediction/logits
Vector mse_grad(const Vector& pred, const Vector& target);
Vector mae_grad(const Vector& pred, const Vector& target);
Vector cross_entropy_grad(const Vector& logits, int label);

// Table 6 policies: which state components survive a sequence boundary.
struct ResetPolicy {
    bool time_retained = false;
    bool energy_retained = false;
};

struct TrainConfig {
    std::uint64_t seed = 42;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip_norm = 5.0;
    LossKind loss = LossKind::mse;
    ResetPolicy reset_policy;
    std::size_t bptt_window = 0;  // 0 = full backpropagation through time
    std::size_t patience = 0;     // early stop on validation loss; 0 = off

    void validate() const;
};

struct ReadoutHead {
    Matrix w_out;  // out_dim x h
    Vector b_out;  // out_dim

    ReadoutHead() = default;
    ReadoutHead(std::size_t out_dim, std::size_t h) : w_out(out_dim, h), b_out(out_dim) {}

    void init(Rng& rng, InitScheme scheme) { w_out = init_weights(rng, w_out.rows, w_out.cols, scheme); }
    std::size_t out_dim() const { return w_out.rows; }
};

template <typename ParamsT, typename Fn>
void visit_params(ParamsT& p, Fn&& fn) {
    visit_blocks(p, fn);
}
template <typename Fn>
void visit_params(RnnRefParams& p, Fn&& fn) {
    visit_rnn_blocks(p, fn);
}
template <typename Fn>
void visit_params(const RnnRefParams& p, Fn&& fn) {
    visit_rnn_blocks(p, fn);
}

template <typename HeadT, typename Fn>
void visit_head(HeadT& h, Fn&& fn) {
    fn("w_out", h.w_out.data);
    fn("b_out", h.b_out.data);
}

template <typename Fn>
void visit_params(ReadoutHead& h, Fn&& fn) {
    visit_head(h, fn);
}
template <typename Fn>
void visit_params(const ReadoutHead& h, Fn&& fn) {
    visit_head(h, fn);
}

// --- cell wrappers sharing one trainer interface ---

struct PetnnCell {
    using Params = CellParams;
    using Trace = StepTrace;

    CellConfig cfg;
    CellParams params;

    PetnnCell() = default;
    explicit PetnnCell(const CellConfig& c) : cfg(c), params(c) {}

    std::size_t input_dim() const { return cfg.input_dim; }
    std::size_t hidden_dim() const { return cfg.hidden_dim; }
    CellState zero_state() const { return CellState(cfg.hidden_dim); }
    Params zero_grads() const { return CellParams(cfg); }

    std::pair<CellState, Trace> forward(const CellState& state, const Vector& x) const {
        return step(params, cfg, state, x);
    }
    StateGrad backward(const Trace& tr, const StateGrad& up, Params& g, Vector* dx) const {
        return step_backward(params, cfg, tr, up, g, dx);
    }
};

struct RnnRefCell {
    using Params = RnnRefParams;
    using Trace = RnnRefTrace;

    RnnRefParams params;

    RnnRefCell() = default;
    RnnRefCell(std::size_t d, std::size_t h) : params(d, h) {}

    std::size_t input_dim() const { return params.input_dim; }
    std::size_t hidden_dim() const { return params.hidden_dim; }
    CellState zero_state() const { return CellState(params.hidden_dim); }
    Params zero_grads() const { return RnnRefParams(params.input_dim, params.hidden_dim); }

    std::pair<CellState, Trace> forward(const CellState& state, const Vector& x) const {
        return rnn_step(params, state, x);
    }
    StateGrad backward(const Trace& tr, const StateGrad& up, Params& g, Vector* dx) const {
        return rnn_step_backward(params, tr, up, g, dx);
    }
};

template <class Cell>
struct Model {
    Cell cell;
    ReadoutHead head;
};

template <class Cell>
struct ModelGrads {
    typename Cell::Params cell;
    ReadoutHead head;
};

template <class Cell>
ModelGrads<Cell> zero_grads_for(const Model<Cell>& model) {
    return {model.cell.zero_grads(), ReadoutHead(model.head.out_dim(), model.cell.hidden_dim())};
}

template <class Cell, typename Fn>
void visit_model_blocks(Model<Cell>& m, Fn&& fn) {
    visit_params(m.cell.params, fn);
    visit_head(m.head, fn);
}
template <class Cell, typename Fn>
void visit_model_blocks(const Model<Cell>& m, Fn&& fn) {
    visit_params(m.cell.params, fn);
    visit_head(m.head, fn);
}
template <class Cell, typename Fn>
void visit_model_blocks(ModelGrads<Cell>& g, Fn&& fn) {
    visit_params(g.cell, fn);
    visit_head(g.head, fn);
}
template <class Cell, typename Fn>
void visit_model_blocks(const ModelGrads<Cell>& g, Fn&& fn) {
    visit_params(g.cell, fn);
    visit_head(g.head, fn);
}

// zeroed state components per policy; S always resets at sequence boundaries
CellState apply_reset_policy(const CellState& final_state, const ResetPolicy& policy);

template <class Cell>
struct ForwardResult {
    std::vector<typename Cell::Trace> traces;
    CellState final_state;
    Vector output;  // head output from the final hidden state
};

template <class Cell>
ForwardResult<Cell> forward_sequence(const Model<Cell>& model, const Matrix& input,
                                     const CellState& init_state) {
    if (input.rows == 0) shape_error("forward_sequence: empty sequence");
    if (input.cols != model.cell.input_dim())
        shape_error("forward_sequence: feature dim " + std::to_string(input.cols) + " != " +
                    std::to_string(model.cell.input_dim()));
    ForwardResult<Cell> result;
    result.traces.reserve(input.rows);
    CellState state = init_state;
    for (std::size_t t = 0; t < input.rows; ++t) {
        Vector x(input.cols);
        for (std::size_t j = 0; j < input.cols; ++j) x[j] = input(t, j);
        try {
            auto [next, trace] = model.cell.forward(state, x);
            state = std::move(next);
            result.traces.push_back(std::move(trace));
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at step " + std::to_string(t));
        }
    }
    result.final_state = std::move(state);
    result.output = add(matvec(model.head.w_out, result.final_state.s), model.head.b_out);
    return result;
}

// Reverse-time accumulation of per-step gradients. d_output feeds the head;
// injected (when given, one entry per step) adds extra state gradients at
// each step, which is how per-step losses enter. bptt_window > 0 truncates
// the walk to the last bptt_window steps. Returns the gradient w.r.t. the
// initial state.
template <class Cell>
StateGrad backward_sequence(const Model<Cell>& model, const ForwardResult<Cell>& fw,
                            const Vector& d_output, ModelGrads<Cell>& grads,
                            const std::vector<StateGrad>* injected = nullptr,
                            std::size_t bptt_window = 0) {
    const std::size_t steps = fw.traces.size();
    const std::size_t h = model.cell.hidden_dim();
    if (d_output.size() != model.head.out_dim())
        shape_error("backward_sequence: output grad dim mismatch");
    if (injected && injected->size() != steps)
        shape_error("backward_sequence: injected grad count mismatch");

    StateGrad up(h);
    // head: output = W_out . S_L + b_out
    outer_add(grads.head.w_out, d_output, fw.final_state.s);
    add_inplace(grads.head.b_out, d_output);
    matvec_transpose_add(model.head.w_out, d_output, up.ds);

    const std::size_t stop = (bptt_window > 0 && bptt_window < steps) ? steps - bptt_window : 0;
    for (std::size_t t = steps; t-- > stop;) {
        if (injected) {
            add_inplace(up.dt, (*injected)[t].dt);
            add_inplace(up.dc, (*injected)[t].dc);
            add_inplace(up.ds, (*injected)[t].ds);
        }
        up = model.cell.backward(fw.traces[t], up, grads.cell, nullptr);
    }
    // a truncated walk never reaches the initial state
    if (stop > 0) return StateGrad(h);
    return up;
}

double global_grad_norm(const std::vector<const std::vector<double>*>& blocks);

template <class Cell>
double grad_norm(const ModelGrads<Cell>& grads) {
    double sq = 0.0;
    visit_model_blocks(grads, [&](const char*, const std::vector<double>& block) {
        for (double g : block) sq += g * g;
    });
    return std::sqrt(sq);
}

// scales all gradients by clip/norm when norm exceeds clip; returns the
// pre-clip norm. Pure rescaling, so direction is untouched.
template <class Cell>
double clip_gradients(ModelGrads<Cell>& grads, double max_norm) {
    const double norm = grad_norm(grads);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        visit_model_blocks(grads, [&](const char*, std::vector<double>& block) {
            for (double& g : block) g *= s;
        });
    }
    return norm;
}

template <class Cell>
bool grads_finite(const ModelGrads<Cell>& grads) {
    bool ok = true;
    visit_model_blocks(grads, [&](const char*, const std::vector<double>& block) {
        for (double g : block)
            if (!std::isfinite(g)) ok = false;
    });
    return ok;
}

// Adam with bias correction, applied after clipping.
template <class Cell>
struct AdamState {
    ModelGrads<Cell> m, v;
    std::uint64_t step_count = 0;

    explicit AdamState(const Model<Cell>& model)
        : m(zero_grads_for(model)), v(zero_grads_for(model)) {}
};

template <class Cell>
void adam_step(Model<Cell>& model, const ModelGrads<Cell>& grads, AdamState<Cell>& opt,
               const TrainConfig& cfg) {
    opt.step_count += 1;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(opt.step_count));

    std::vector<std::vector<double>*> p_blocks, g_blocks, m_blocks, v_blocks;
    visit_model_blocks(model, [&](const char*, std::vector<double>& b) { p_blocks.push_back(&b); });
    visit_model_blocks(const_cast<ModelGrads<Cell>&>(grads),
                       [&](const char*, std::vector<double>& b) { g_blocks.push_back(&b); });
    visit_model_blocks(opt.m, [&](const char*, std::vector<double>& b) { m_blocks.push_back(&b); });
    visit_model_blocks(opt.v, [&](const char*, std::vector<double>& b) { v_blocks.push_back(&b); });

    for (std::size_t k = 0; k < p_blocks.size(); ++k) {
        std::vector<double>& p = *p_blocks[k];
        const std::vector<double>& g = *g_blocks[k];
        std::vector<double>& m = *m_blocks[k];
        std::vector<double>& v = *v_blocks[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

// loss and gradient dispatch for one sample
double sample_loss(const Vector& output, const SequenceBatch& data, std::size_t index,
                   LossKind kind);
Vector sample_loss_grad(const Vector& output, const SequenceBatch& data, std::size_t index,
                        LossKind kind);

// One optimization pass over the batch stream in sample-index order.
// Sequence boundaries carry state per the reset policy; the carried state is
// a constant for the next sequence (no gradient crosses the boundary).
// Returns the mean training loss of the epoch.
template <class Cell>
double run_epoch(Model<Cell>& model, AdamState<Cell>& opt, const SequenceBatch& data,
                 const TrainConfig& cfg) {
    cfg.validate();
    data.validate();
    if (data.size() == 0) shape_error("run_epoch: empty dataset");
    const std::size_t n = data.size();
    double total_loss = 0.0;
    CellState carry = model.cell.zero_state();
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t stop = std::min(n, start + cfg.batch_size);
        const double inv = 1.0 / static_cast<double>(stop - start);
        ModelGrads<Cell> grads = zero_grads_for(model);
        for (std::size_t i = start; i < stop; ++i) {
            const CellState init = apply_reset_policy(carry, cfg.reset_policy);
            ForwardResult<Cell> fw = forward_sequence(model, data.inputs[i], init);
            total_loss += sample_loss(fw.output, data, i, cfg.loss);
            Vector d_out = scale(sample_loss_grad(fw.output, data, i, cfg.loss), inv);
            backward_sequence(model, fw, d_out, grads, nullptr, cfg.bptt_window);
            carry = std::move(fw.final_state);
        }
        if (!grads_finite(grads))
            throw NumericError("non-finite gradient in batch starting at sample " +
                               std::to_string(start));
        clip_gradients(grads, cfg.grad_clip_norm);
        adam_step(model, grads, opt, cfg);
    }
    return total_loss / static_cast<double>(n);
}

}  // namespace petnn

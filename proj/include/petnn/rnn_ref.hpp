#pragma once

#include <utility>

#include "petnn/cell.hpp"
#include "petnn/linalg.hpp"

namespace petnn {

// Minimal vanilla RNN used as a reference model in comparison runs:
// S_t = tanh(W . concat(x, S_{t-1}) + b). It mirrors the PETNN cell's
// interface (state carries T and C slots that stay zero) so the same
// trainer drives both.
struct RnnRefParams {
    Matrix w;  // h x (d+h)
    Vector b;  // h
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;

    RnnRefParams() = default;
    RnnRefParams(std::size_t d, std::size_t h) : w(h, d + h), b(h), input_dim(d), hidden_dim(h) {}

    void init(Rng& rng, InitScheme scheme) { w = init_weights(rng, w.rows, w.cols, scheme); }
    void fill(double v);
};

template <typename ParamsT, typename Fn>
void visit_rnn_blocks(ParamsT& p, Fn&& fn) {
    fn("w", p.w.data);
    fn("b", p.b.data);
}

struct RnnRefTrace {
    Vector x, s_prev, s_new;
};

std::pair<CellState, RnnRefTrace> rnn_step(const RnnRefParams& p, const CellState& state,
                                           const Vector& x);

StateGrad rnn_step_backward(const RnnRefParams& p, const RnnRefTrace& trace,
                            const StateGrad& upstream, RnnRefParams& g, Vector* dx);

}  // namespace petnn

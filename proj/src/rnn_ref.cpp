#include "petnn/rnn_ref.hpp"

#include <cmath>

#include "petnn/errors.hpp"

namespace petnn {

void RnnRefParams::fill(double v) {
    std::fill(w.data.begin(), w.data.end(), v);
    std::fill(b.data.begin(), b.data.end(), v);
}

std::pair<CellState, RnnRefTrace> rnn_step(const RnnRefParams& p, const CellState& state,
                                           const Vector& x) {
    if (x.size() != p.input_dim || state.s.size() != p.hidden_dim)
        shape_error("rnn_step: dim mismatch");
    RnnRefTrace tr;
    tr.x = x;
    tr.s_prev = state.s;
    tr.s_new = tanh(add(matvec(p.w, concat(x, state.s)), p.b));
    if (!all_finite(tr.s_new)) throw NumericError("non-finite value in rnn_step");
    CellState next(p.hidden_dim);
    next.s = tr.s_new;
    return {next, tr};
}

StateGrad rnn_step_backward(const RnnRefParams& p, const RnnRefTrace& tr,
                            const StateGrad& upstream, RnnRefParams& g, Vector* dx) {
    const std::size_t d = p.input_dim, h = p.hidden_dim;
    Vector d_pre(h);
    for (std::size_t i = 0; i < h; ++i)
        d_pre[i] = upstream.ds[i] * (1.0 - tr.s_new[i] * tr.s_new[i]);
    const Vector xs = concat(tr.x, tr.s_prev);
    outer_add(g.w, d_pre, xs);
    add_inplace(g.b, d_pre);
    Vector dxs(d + h);
    matvec_transpose_add(p.w, d_pre, dxs);
    StateGrad down(h);
    for (std::size_t i = 0; i < h; ++i) down.ds[i] = dxs[d + i];
    if (dx) {
        if (dx->size() != d) *dx = Vector(d);
        for (std::size_t i = 0; i < d; ++i) (*dx)[i] += dxs[i];
    }
    return down;
}

}  // namespace petnn

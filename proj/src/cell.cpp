#include "petnn/cell.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "petnn/errors.hpp"

namespace petnn {

namespace {
constexpr double kExpGateEps = 1e-12;  // floor in the exp-gate denominator

void check_finite(const Vector& v, const char* stage) {
    if (!all_finite(v)) throw NumericError(std::string("non-finite value in stage ") + stage);
}
}  // namespace

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::sigmoid: return sigmoid_scalar(x);
        case Activation::tanh: return tanh_scalar(x);
        case Activation::identity: return x;
    }
    return x;
}

double activation_deriv_from_value(Activation a, double y) {
    switch (a) {
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::tanh: return 1.0 - y * y;
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

void CellConfig::validate() const {
    if (input_dim == 0 || hidden_dim == 0)
        shape_error("cell dims must be >= 1 (got d=" + std::to_string(input_dim) +
                    ", h=" + std::to_string(hidden_dim) + ")");
    if (time_activation == Activation::identity)
        shape_error("time_activation must be sigmoid or tanh");
    if (candidate_activation == Activation::identity)
        shape_error("candidate_activation must be tanh or sigmoid");
}

CellParams::CellParams(const CellConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.input_dim, h = cfg.hidden_dim;
    variant = cfg.update_variant;
    input_dim = d;
    hidden_dim = h;
    w_zt = Matrix(h, d + h);
    w_zc = Matrix(h, d + h);
    w_zw = Matrix(h, d + h);
    b_zt = Vector(h);
    b_zc = Vector(h);
    b_zw = Vector(h);
    w_ground = Matrix(h, d);
    w_decay = Matrix(h, d);
    b_ground = Vector(h);
    b_decay = Vector(h);
    w_cand = Matrix(h, d + h);
    b_cand = Vector(h);
    if (variant == UpdateVariant::traditional_gating) {
        w_forget = Matrix(h, d + h);
        w_update = Matrix(h, d + h);
        b_forget = Vector(h);
        b_update = Vector(h);
    }
    if (variant == UpdateVariant::exp_gating) {
        w_expgate = Matrix(h, d + h);
        b_expgate = Vector(h);
    }
}

void CellParams::init(Rng& rng, InitScheme weight_scheme) {
    // weights per scheme, biases stay zero
    auto draw = [&](Matrix& w) { w = init_weights(rng, w.rows, w.cols, weight_scheme); };
    draw(w_zt);
    draw(w_zc);
    draw(w_zw);
    draw(w_ground);
    draw(w_decay);
    draw(w_cand);
    if (variant == UpdateVariant::traditional_gating) {
        draw(w_forget);
        draw(w_update);
    }
    if (variant == UpdateVariant::exp_gating) draw(w_expgate);
}

void CellParams::fill(double v) {
    visit_blocks(*this, [&](const char*, std::vector<double>& block) {
        std::fill(block.begin(), block.end(), v);
    });
}

Gates compute_gates(const CellParams& p, const Vector& x, const Vector& s_prev) {
    const Vector xs = concat(x, s_prev);
    Gates g;
    g.z_t = add(matvec(p.w_zt, xs), p.b_zt);
    g.z_c = add(matvec(p.w_zc, xs), p.b_zc);
    g.z_w_raw = add(matvec(p.w_zw, xs), p.b_zw);
    return g;
}

GroundDecay compute_ground_and_decay(const CellParams& p, const Vector& x) {
    GroundDecay gd;
    gd.ground = add(matvec(p.w_ground, x), p.b_ground);
    gd.decay = add(matvec(p.w_decay, x), p.b_decay);
    return gd;
}

TimeUpdate update_time(const Vector& t_prev, const Vector& z_t, const Vector& decay,
                       const CellConfig& cfg) {
    if (t_prev.size() != z_t.size() || t_prev.size() != decay.size())
        shape_error("update_time length mismatch");
    TimeUpdate tu;
    tu.t_pre = add(t_prev, z_t);
    tu.t_act = Vector(t_prev.size());
    tu.t_raw = Vector(t_prev.size());
    for (std::size_t i = 0; i < t_prev.size(); ++i) {
        tu.t_act[i] = apply_activation(cfg.time_activation, tu.t_pre[i]);
        tu.t_raw[i] = decay[i] * tu.t_act[i] - 1.0;
    }
    return tu;
}

Switch compute_switch(const Vector& t_raw, const CellConfig& cfg) {
    Switch sw;
    sw.m = Vector(t_raw.size());
    sw.t_new = Vector(t_raw.size());
    const bool strict = cfg.boundary_rule == BoundaryRule::release_on_lt_zero;
    for (std::size_t i = 0; i < t_raw.size(); ++i) {
        const bool release = strict ? (t_raw[i] < 0.0) : (t_raw[i] <= 0.0);
        if (release) {
            sw.m[i] = 1.0;
            sw.t_new[i] = 0.0;
        } else {
            sw.m[i] = 0.0;
            sw.t_new[i] = t_raw[i];
        }
    }
    return sw;
}

Vector update_cell_state(const Vector& c_prev, const Vector& m, const Vector& ground,
                         const Vector& z_c) {
    if (c_prev.size() != m.size() || c_prev.size() != ground.size() || c_prev.size() != z_c.size())
        shape_error("update_cell_state length mismatch");
    Vector c(c_prev.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = (1.0 - m[i]) * c_prev[i] + m[i] * ground[i] + z_c[i];
    return c;
}

Candidate compute_candidate(const CellParams& p, const Vector& x, const Vector& s_prev,
                            const Vector& c_prev, const Vector& m, const CellConfig& cfg) {
    Vector mem(s_prev.size());
    for (std::size_t i = 0; i < mem.size(); ++i) mem[i] = s_prev[i] * (1.0 - m[i]) * c_prev[i];
    Candidate cand;
    cand.pre = add(matvec(p.w_cand, concat(x, mem)), p.b_cand);
    cand.value = Vector(cand.pre.size());
    for (std::size_t i = 0; i < cand.pre.size(); ++i)
        cand.value[i] = apply_activation(cfg.candidate_activation, cand.pre[i]);
    return cand;
}

HiddenUpdate update_hidden(const Vector& s_prev, const Vector& cand, const Vector& z_w_raw,
                           const CellConfig& cfg) {
    if (s_prev.size() != cand.size() || s_prev.size() != z_w_raw.size())
        shape_error("update_hidden length mismatch");
    HiddenUpdate hu;
    hu.mix_w = (cfg.mix_gate_squash == MixGateSquash::sigmoid) ? sigmoid(z_w_raw) : z_w_raw;
    hu.pre = Vector(s_prev.size());
    hu.value = Vector(s_prev.size());
    for (std::size_t i = 0; i < s_prev.size(); ++i) {
        hu.pre[i] = (1.0 - hu.mix_w[i]) * s_prev[i] + hu.mix_w[i] * cand[i];
        hu.value[i] = apply_activation(cfg.output_activation, hu.pre[i]);
    }
    return hu;
}

namespace {

// w = exp(z) / (exp(z) + 1 + eps), evaluated overflow-free for z > 0 by
// dividing through by exp(z). Bounded in (0,1); derivative is w*(1-w).
double exp_gate(double z) {
    double w;
    if (z > 0.0) {
        w = 1.0 / (1.0 + (1.0 + kExpGateEps) * std::exp(-z));
    } else {
        const double e = std::exp(z);
        w = e / (e + 1.0 + kExpGateEps);
    }
    if (w >= 1.0) return 0x1.fffffffffffffp-1;
    if (w <= 0.0) return 0x1p-1074;
    return w;
}

struct VariantHidden {
    Vector mix_w, pre, value;
    Vector gate_f_pre, gate_f, gate_u_pre, gate_u;
    Vector expgate_pre;
};

VariantHidden hidden_traditional(const CellParams& p, const Vector& x, const Vector& s_prev,
                                 const Vector& cand) {
    const Vector xs = concat(x, s_prev);
    VariantHidden vh;
    vh.gate_f_pre = add(matvec(p.w_forget, xs), p.b_forget);
    vh.gate_u_pre = add(matvec(p.w_update, xs), p.b_update);
    vh.gate_f = sigmoid(vh.gate_f_pre);
    vh.gate_u = sigmoid(vh.gate_u_pre);
    vh.pre = Vector(s_prev.size());
    vh.value = Vector(s_prev.size());
    for (std::size_t i = 0; i < s_prev.size(); ++i) {
        vh.pre[i] = vh.gate_f[i] * s_prev[i] + vh.gate_u[i] * cand[i];
        vh.value[i] = vh.pre[i];  // no outer activation
    }
    return vh;
}

VariantHidden hidden_quasi_linear(const Vector& s_prev, const Vector& cand,
                                  const Vector& z_w_raw) {
    VariantHidden vh;
    vh.mix_w = z_w_raw;
    vh.pre = Vector(s_prev.size());
    vh.value = Vector(s_prev.size());
    for (std::size_t i = 0; i < s_prev.size(); ++i) {
        vh.pre[i] = z_w_raw[i] * s_prev[i] + cand[i];
        vh.value[i] = vh.pre[i];
    }
    return vh;
}

VariantHidden hidden_exp_gating(const CellParams& p, const Vector& x, const Vector& s_prev,
                                const Vector& cand, const CellConfig& cfg) {
    const Vector xs = concat(x, s_prev);
    VariantHidden vh;
    vh.expgate_pre = add(matvec(p.w_expgate, xs), p.b_expgate);
    vh.mix_w = Vector(s_prev.size());
    vh.pre = Vector(s_prev.size());
    vh.value = Vector(s_prev.size());
    for (std::size_t i = 0; i < s_prev.size(); ++i) {
        vh.mix_w[i] = exp_gate(vh.expgate_pre[i]);
        vh.pre[i] = (1.0 - vh.mix_w[i]) * s_prev[i] + vh.mix_w[i] * cand[i];
        vh.value[i] = apply_activation(cfg.output_activation, vh.pre[i]);
    }
    return vh;
}

}  // namespace

std::pair<CellState, StepTrace> step(const CellParams& p, const CellConfig& cfg,
                                     const CellState& state, const Vector& x) {
    const std::size_t d = cfg.input_dim, h = cfg.hidden_dim;
    if (x.size() != d) shape_error("step: input dim " + std::to_string(x.size()) + " != " + std::to_string(d));
    if (state.t.size() != h || state.c.size() != h || state.s.size() != h)
        shape_error("step: state dim mismatch");

    StepTrace tr;
    tr.x = x;
    tr.s_prev = state.s;
    tr.c_prev = state.c;
    tr.t_prev = state.t;

    const Gates gates = compute_gates(p, x, state.s);
    tr.z_t = gates.z_t;
    tr.z_c = gates.z_c;
    tr.z_w_raw = gates.z_w_raw;
    check_finite(tr.z_t, "compute_gates");
    check_finite(tr.z_c, "compute_gates");
    check_finite(tr.z_w_raw, "compute_gates");

    const GroundDecay gd = compute_ground_and_decay(p, x);
    tr.ground = gd.ground;
    tr.decay = gd.decay;
    check_finite(tr.ground, "compute_ground_and_decay");
    check_finite(tr.decay, "compute_ground_and_decay");

    const TimeUpdate tu = update_time(state.t, gates.z_t, gd.decay, cfg);
    tr.t_pre = tu.t_pre;
    tr.t_act = tu.t_act;
    tr.t_raw = tu.t_raw;
    check_finite(tr.t_raw, "update_time");

    const Switch sw = compute_switch(tu.t_raw, cfg);
    tr.m = sw.m;

    CellState next(h);
    next.t = sw.t_new;
    next.c = update_cell_state(state.c, sw.m, gd.ground, gates.z_c);
    check_finite(next.c, "update_cell_state");

    const Candidate cand = compute_candidate(p, x, state.s, state.c, sw.m, cfg);
    tr.cand_pre = cand.pre;
    tr.cand = cand.value;
    check_finite(tr.cand, "compute_candidate");

    switch (cfg.update_variant) {
        case UpdateVariant::self_selective: {
            const HiddenUpdate hu = update_hidden(state.s, cand.value, gates.z_w_raw, cfg);
            tr.mix_w = hu.mix_w;
            tr.s_pre = hu.pre;
            tr.s_new = hu.value;
            break;
        }
        case UpdateVariant::traditional_gating: {
            const VariantHidden vh = hidden_traditional(p, x, state.s, cand.value);
            tr.gate_f_pre = vh.gate_f_pre;
            tr.gate_f = vh.gate_f;
            tr.gate_u_pre = vh.gate_u_pre;
            tr.gate_u = vh.gate_u;
            tr.s_pre = vh.pre;
            tr.s_new = vh.value;
            break;
        }
        case UpdateVariant::quasi_linear: {
            const VariantHidden vh = hidden_quasi_linear(state.s, cand.value, gates.z_w_raw);
            tr.mix_w = vh.mix_w;
            tr.s_pre = vh.pre;
            tr.s_new = vh.value;
            break;
        }
        case UpdateVariant::exp_gating: {
            const VariantHidden vh = hidden_exp_gating(p, x, state.s, cand.value, cfg);
            tr.expgate_pre = vh.expgate_pre;
            tr.mix_w = vh.mix_w;
            tr.s_pre = vh.pre;
            tr.s_new = vh.value;
            break;
        }
    }
    check_finite(tr.s_new, "update_hidden");
    next.s = tr.s_new;
    return {next, tr};
}

StateGrad step_backward(const CellParams& p, const CellConfig& cfg, const StepTrace& tr,
                        const StateGrad& upstream, CellParams& g, Vector* dx_out) {
    const std::size_t d = cfg.input_dim, h = cfg.hidden_dim;
    if (tr.x.size() != d || tr.s_prev.size() != h) shape_error("step_backward: trace dim mismatch");
    if (upstream.dt.size() != h || upstream.dc.size() != h || upstream.ds.size() != h)
        shape_error("step_backward: upstream dim mismatch");

    Vector dx(d);
    StateGrad down(h);
    Vector dxs(d + h);  // grad w.r.t. concat(x, s_prev)

    Vector d_cand(h);
    Vector d_zw(h);

    // --- hidden-state update, per variant ---
    switch (cfg.update_variant) {
        case UpdateVariant::self_selective:
        case UpdateVariant::exp_gating: {
            Vector d_mix(h);
            for (std::size_t i = 0; i < h; ++i) {
                const double ds_pre =
                    upstream.ds[i] * activation_deriv_from_value(cfg.output_activation, tr.s_new[i]);
                const double w = tr.mix_w[i];
                d_mix[i] = ds_pre * (tr.cand[i] - tr.s_prev[i]);
                d_cand[i] = ds_pre * w;
                down.ds[i] += ds_pre * (1.0 - w);
            }
            if (cfg.update_variant == UpdateVariant::self_selective) {
                if (cfg.mix_gate_squash == MixGateSquash::sigmoid) {
                    for (std::size_t i = 0; i < h; ++i)
                        d_zw[i] = d_mix[i] * tr.mix_w[i] * (1.0 - tr.mix_w[i]);
                } else {
                    d_zw = d_mix;
                }
            } else {
                // exp gate: dw/dz = w*(1-w) with the eps-adjusted complement
                Vector d_zg(h);
                for (std::size_t i = 0; i < h; ++i)
                    d_zg[i] = d_mix[i] * tr.mix_w[i] * (1.0 - tr.mix_w[i]);
                const Vector xs = concat(tr.x, tr.s_prev);
                outer_add(g.w_expgate, d_zg, xs);
                add_inplace(g.b_expgate, d_zg);
                matvec_transpose_add(p.w_expgate, d_zg, dxs);
            }
            break;
        }
        case UpdateVariant::traditional_gating: {
            Vector d_zf(h), d_zu(h);
            for (std::size_t i = 0; i < h; ++i) {
                const double ds = upstream.ds[i];  // no outer activation
                down.ds[i] += ds * tr.gate_f[i];
                d_cand[i] = ds * tr.gate_u[i];
                d_zf[i] = ds * tr.s_prev[i] * tr.gate_f[i] * (1.0 - tr.gate_f[i]);
                d_zu[i] = ds * tr.cand[i] * tr.gate_u[i] * (1.0 - tr.gate_u[i]);
            }
            const Vector xs = concat(tr.x, tr.s_prev);
            outer_add(g.w_forget, d_zf, xs);
            add_inplace(g.b_forget, d_zf);
            matvec_transpose_add(p.w_forget, d_zf, dxs);
            outer_add(g.w_update, d_zu, xs);
            add_inplace(g.b_update, d_zu);
            matvec_transpose_add(p.w_update, d_zu, dxs);
            break;
        }
        case UpdateVariant::quasi_linear: {
            for (std::size_t i = 0; i < h; ++i) {
                const double ds = upstream.ds[i];
                d_zw[i] = ds * tr.s_prev[i];
                down.ds[i] += ds * tr.z_w_raw[i];
                d_cand[i] = ds;
            }
            break;
        }
    }

    // --- candidate: h_t = act(W_cand . [x, s_prev.*(1-m).*C_prev] + b) ---
    Vector d_cand_pre(h);
    for (std::size_t i = 0; i < h; ++i)
        d_cand_pre[i] = d_cand[i] * activation_deriv_from_value(cfg.candidate_activation, tr.cand[i]);
    Vector mem(h);
    for (std::size_t i = 0; i < h; ++i) mem[i] = tr.s_prev[i] * (1.0 - tr.m[i]) * tr.c_prev[i];
    const Vector xm = concat(tr.x, mem);
    outer_add(g.w_cand, d_cand_pre, xm);
    add_inplace(g.b_cand, d_cand_pre);
    Vector dxm(d + h);
    matvec_transpose_add(p.w_cand, d_cand_pre, dxm);
    for (std::size_t i = 0; i < d; ++i) dx[i] += dxm[i];
    for (std::size_t i = 0; i < h; ++i) {
        const double dmem = dxm[d + i];
        const double keep = 1.0 - tr.m[i];
        down.ds[i] += dmem * keep * tr.c_prev[i];
        down.dc[i] += dmem * keep * tr.s_prev[i];
    }

    // --- cell state: C_t = (1-m).*C_prev + m.*I_t + Z_c ---
    Vector d_ground(h), d_zc(h);
    for (std::size_t i = 0; i < h; ++i) {
        down.dc[i] += upstream.dc[i] * (1.0 - tr.m[i]);
        d_ground[i] = upstream.dc[i] * tr.m[i];
        d_zc[i] = upstream.dc[i];
    }

    // --- time: T_new = (1-m).*T_raw, T_raw = R.*act(T_prev+Z_t) - 1 ---
    Vector d_decay(h), d_zt(h);
    for (std::size_t i = 0; i < h; ++i) {
        const double d_traw = upstream.dt[i] * (1.0 - tr.m[i]);  // clamped branch blocks it
        d_decay[i] = d_traw * tr.t_act[i];
        const double d_tact = d_traw * tr.decay[i];
        const double d_tpre =
            d_tact * activation_deriv_from_value(cfg.time_activation, tr.t_act[i]);
        down.dt[i] += d_tpre;
        d_zt[i] = d_tpre;
    }

    // --- the five linear maps ---
    const Vector xs = concat(tr.x, tr.s_prev);
    outer_add(g.w_zt, d_zt, xs);
    add_inplace(g.b_zt, d_zt);
    matvec_transpose_add(p.w_zt, d_zt, dxs);
    outer_add(g.w_zc, d_zc, xs);
    add_inplace(g.b_zc, d_zc);
    matvec_transpose_add(p.w_zc, d_zc, dxs);
    outer_add(g.w_zw, d_zw, xs);
    add_inplace(g.b_zw, d_zw);
    matvec_transpose_add(p.w_zw, d_zw, dxs);
    outer_add(g.w_ground, d_ground, tr.x);
    add_inplace(g.b_ground, d_ground);
    matvec_transpose_add(p.w_ground, d_ground, dx);
    outer_add(g.w_decay, d_decay, tr.x);
    add_inplace(g.b_decay, d_decay);
    matvec_transpose_add(p.w_decay, d_decay, dx);

    for (std::size_t i = 0; i < d; ++i) dx[i] += dxs[i];
    for (std::size_t i = 0; i < h; ++i) down.ds[i] += dxs[d + i];

    if (dx_out) {
        if (dx_out->size() != d) *dx_out = Vector(d);
        add_inplace(*dx_out, dx);
    }
    return down;
}

std::size_t param_count(const CellConfig& cfg) {
    const std::size_t d = cfg.input_dim, h = cfg.hidden_dim;
    std::size_t n = 4 * h * (d + h + 1) + 2 * h * (d + 1);
    if (cfg.update_variant == UpdateVariant::traditional_gating) n += 2 * h * (d + h + 1);
    if (cfg.update_variant == UpdateVariant::exp_gating) n += h * (d + h + 1);
    return n;
}

// FLOP convention: multiply-add in a matvec counts 2, every elementwise
// add/sub/mul counts 1, every activation evaluation counts 4. The switch
// comparison and clamp are not counted.
std::size_t flop_count_per_step(const CellConfig& cfg) {
    const std::size_t d = cfg.input_dim, h = cfg.hidden_dim;
    const std::size_t act = 4;
    std::size_t flops = 0;
    flops += 3 * (2 * h * (d + h) + h);  // three Z gates + bias
    flops += 2 * (2 * h * d + h);        // ground level and decay rate + bias
    flops += h + act * h + 2 * h;        // time: add, activation, scale, minus one
    flops += 5 * h;                      // cell state: (1-m), two muls, two adds
    flops += 3 * h;                      // memory path s.*(1-m).*C
    flops += 2 * h * (d + h) + h;        // candidate matvec + bias
    flops += act * h;                    // candidate activation
    switch (cfg.update_variant) {
        case UpdateVariant::self_selective:
            if (cfg.mix_gate_squash == MixGateSquash::sigmoid) flops += act * h;
            flops += 4 * h;  // (1-w), two muls, add
            if (cfg.output_activation != Activation::identity) flops += act * h;
            break;
        case UpdateVariant::traditional_gating:
            flops += 2 * (2 * h * (d + h) + h);  // two gate matvecs + bias
            flops += 2 * act * h;                // two sigmoids
            flops += 3 * h;                      // two muls, add
            break;
        case UpdateVariant::quasi_linear:
            flops += 2 * h;  // mul, add
            break;
        case UpdateVariant::exp_gating:
            flops += 2 * h * (d + h) + h;  // gate matvec + bias
            flops += act * h;              // exp gate
            flops += 4 * h;
            if (cfg.output_activation != Activation::identity) flops += act * h;
            break;
    }
    return flops;
}

}  // namespace petnn

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "petnn/linalg.hpp"

namespace petnn {

enum class Activation { sigmoid, tanh, identity };
enum class MixGateSquash { sigmoid, none };
enum class BoundaryRule { release_on_leq_zero, release_on_lt_zero };
enum class UpdateVariant { self_selective, traditional_gating, quasi_linear, exp_gating };

double apply_activation(Activation a, double x);
// derivative expressed through the activation's output value
double activation_deriv_from_value(Activation a, double y);

struct CellConfig {
    std::size_t input_dim = 1;
    std::size_t hidden_dim = 64;
    Activation time_activation = Activation::sigmoid;
    Activation candidate_activation = Activation::tanh;
    Activation output_activation = Activation::tanh;
    MixGateSquash mix_gate_squash = MixGateSquash::sigmoid;
    BoundaryRule boundary_rule = BoundaryRule::release_on_leq_zero;
    UpdateVariant update_variant = UpdateVariant::self_selective;

    // throws on d or h of 0, or an activation outside its allowed set
    void validate() const;
};

// All learnable parameters of one cell. The three Z-gates and the candidate
// weights act on concat(x, s_prev); the ground level and decay rate act on
// x alone.
struct CellParams {
    Matrix w_zt, w_zc, w_zw;  // h x (d+h)
    Vector b_zt, b_zc, b_zw;  // h
    Matrix w_ground, w_decay;  // h x d
    Vector b_ground, b_decay;  // h
    Matrix w_cand;             // h x (d+h)
    Vector b_cand;             // h
    // traditional_gating extras
    Matrix w_forget, w_update;  // h x (d+h)
    Vector b_forget, b_update;  // h
    // exp_gating extra
    Matrix w_expgate;  // h x (d+h)
    Vector b_expgate;  // h

    UpdateVariant variant = UpdateVariant::self_selective;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;

    CellParams() = default;
    explicit CellParams(const CellConfig& cfg);  // zero-filled, variant-sized

    void init(Rng& rng, InitScheme weight_scheme);
    void fill(double v);
};

// Visits every allocated parameter block in a fixed order shared by params,
// gradients and optimizer moments. fn(name, std::vector<double>&).
template <typename ParamsT, typename Fn>
void visit_blocks(ParamsT& p, Fn&& fn) {
    fn("w_zt", p.w_zt.data);
    fn("b_zt", p.b_zt.data);
    fn("w_zc", p.w_zc.data);
    fn("b_zc", p.b_zc.data);
    fn("w_zw", p.w_zw.data);
    fn("b_zw", p.b_zw.data);
    fn("w_ground", p.w_ground.data);
    fn("b_ground", p.b_ground.data);
    fn("w_decay", p.w_decay.data);
    fn("b_decay", p.b_decay.data);
    fn("w_cand", p.w_cand.data);
    fn("b_cand", p.b_cand.data);
    if (p.variant == UpdateVariant::traditional_gating) {
        fn("w_forget", p.w_forget.data);
        fn("b_forget", p.b_forget.data);
        fn("w_update", p.w_update.data);
        fn("b_update", p.b_update.data);
    }
    if (p.variant == UpdateVariant::exp_gating) {
        fn("w_expgate", p.w_expgate.data);
        fn("b_expgate", p.b_expgate.data);
    }
}

// (T, C, S): remaining time, cell state (energy), hidden state.
struct CellState {
    Vector t;
    Vector c;
    Vector s;

    CellState() = default;
    explicit CellState(std::size_t h) : t(h), c(h), s(h) {}
};

// Everything the backward pass needs from one forward step.
struct StepTrace {
    Vector x, s_prev, c_prev, t_prev;
    Vector z_t, z_c, z_w_raw;  // gate pre-activations
    Vector mix_w;              // Z_w after the squash (== z_w_raw when squash is none)
    Vector ground, decay;      // I_t, R_t
    Vector t_pre;              // T_{t-1} + Z_t, pre-activation of the time update
    Vector t_act;              // time activation output
    Vector t_raw;              // R_t * act - 1, before the switch clamp
    Vector m;                  // release switch, entries exactly 0.0 or 1.0
    Vector cand_pre, cand;     // h_t pre-activation and value
    Vector s_pre, s_new;       // hidden update pre-activation and value
    // variant extras (sized only when the variant uses them)
    Vector gate_f_pre, gate_f, gate_u_pre, gate_u;  // traditional_gating
    Vector expgate_pre;                             // exp_gating (mix_w holds the gate value)
};

struct StateGrad {
    Vector dt, dc, ds;

    StateGrad() = default;
    explicit StateGrad(std::size_t h) : dt(h), dc(h), ds(h) {}
};

// --- the individual update stages (composition order matches step) ---

struct Gates {
    Vector z_t, z_c, z_w_raw;
};
Gates compute_gates(const CellParams& p, const Vector& x, const Vector& s_prev);

struct GroundDecay {
    Vector ground, decay;  // I_t, R_t
};
GroundDecay compute_ground_and_decay(const CellParams& p, const Vector& x);

// T_raw[i] = R_t[i] * act(T_prev[i] + Z_t[i]) - 1
struct TimeUpdate {
    Vector t_pre, t_act, t_raw;
};
TimeUpdate update_time(const Vector& t_prev, const Vector& z_t, const Vector& decay,
                       const CellConfig& cfg);

// release units get m = 1 and T clamped to 0; comparison per boundary rule
struct Switch {
    Vector m, t_new;
};
Switch compute_switch(const Vector& t_raw, const CellConfig& cfg);

// C_t = (1-m) .* C_prev + m .* I_t + Z_c, evaluated so that the release and
// retention branches hold exactly in floating point
Vector update_cell_state(const Vector& c_prev, const Vector& m, const Vector& ground,
                         const Vector& z_c);

// h_t = act(W_cand . concat(x, s_prev .* (1-m) .* C_prev) + b_cand)
struct Candidate {
    Vector pre, value;
};
Candidate compute_candidate(const CellParams& p, const Vector& x, const Vector& s_prev,
                            const Vector& c_prev, const Vector& m, const CellConfig& cfg);

// self-selective mixing: S_t = act_out((1-w) .* s_prev + w .* h_t),
// w = squash(Z_w_raw)
struct HiddenUpdate {
    Vector mix_w, pre, value;
};
HiddenUpdate update_hidden(const Vector& s_prev, const Vector& cand, const Vector& z_w_raw,
                           const CellConfig& cfg);

// one full forward step; throws NumericError naming the stage if any output
// goes non-finite
std::pair<CellState, StepTrace> step(const CellParams& p, const CellConfig& cfg,
                                     const CellState& state, const Vector& x);

// Analytic backward for one step under the straight-through convention:
// m is a constant in {0,1}; gradients flow through every path m multiplies
// but never through the threshold comparison itself. Accumulates parameter
// gradients into g, input gradient into dx (if non-null), and returns the
// gradient w.r.t. the incoming state.
StateGrad step_backward(const CellParams& p, const CellConfig& cfg, const StepTrace& trace,
                        const StateGrad& upstream, CellParams& g, Vector* dx);

std::size_t param_count(const CellConfig& cfg);
std::size_t flop_count_per_step(const CellConfig& cfg);

}  // namespace petnn

#include "petnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "petnn/errors.hpp"

namespace petnn {

namespace {

struct Problem {
    std::vector<Vector> xs;  // per-step inputs
    CellState init;
    std::vector<StateGrad> coeffs;  // per-step loss coefficients (a_t, b_t, c_t)
};

double run_loss(const CellParams& params, const CellConfig& cfg, const Problem& prob,
                double* min_abs_t_raw = nullptr) {
    CellState state = prob.init;
    double loss = 0.0;
    double min_t = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < prob.xs.size(); ++t) {
        auto [next, trace] = step(params, cfg, state, prob.xs[t]);
        for (std::size_t i = 0; i < next.s.size(); ++i) {
            loss += prob.coeffs[t].dt[i] * next.t[i] + prob.coeffs[t].dc[i] * next.c[i] +
                    prob.coeffs[t].ds[i] * next.s[i];
            min_t = std::min(min_t, std::abs(trace.t_raw[i]));
        }
        state = std::move(next);
    }
    if (min_abs_t_raw) *min_abs_t_raw = min_t;
    return loss;
}

double rel_err(double analytic, double fd, double floor) {
    return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), floor});
}

}  // namespace

GradCheckReport gradcheck_run(const CellConfig& cfg, std::uint64_t seed,
                              const GradCheckOptions& opts) {
    cfg.validate();
    const std::size_t d = cfg.input_dim, h = cfg.hidden_dim, steps = opts.seq_len;
    if (steps == 0) shape_error("gradcheck: seq_len must be >= 1");

    Rng rng(seed);
    CellParams params(cfg);
    params.init(rng, InitScheme::glorot_uniform);
    // a mildly positive decay bias makes both switch branches likely
    for (std::size_t i = 0; i < h; ++i) params.b_decay[i] = 1.0 + rng.uniform();

    GradCheckReport report;
    Problem prob;
    bool safe = false;
    for (int attempt = 0; attempt < opts.max_tries && !safe; ++attempt) {
        prob.xs.assign(steps, Vector(d));
        for (auto& x : prob.xs)
            for (std::size_t j = 0; j < d; ++j) x[j] = rng.uniform(-1.0, 1.0);
        prob.init = CellState(h);
        for (std::size_t i = 0; i < h; ++i) {
            prob.init.t[i] = rng.uniform(0.0, 1.0);
            prob.init.c[i] = rng.uniform(-1.0, 1.0);
            prob.init.s[i] = rng.uniform(-0.5, 0.5);
        }
        prob.coeffs.assign(steps, StateGrad(h));
        for (auto& c : prob.coeffs)
            for (std::size_t i = 0; i < h; ++i) {
                c.dt[i] = rng.uniform(-1.0, 1.0);
                c.dc[i] = rng.uniform(-1.0, 1.0);
                c.ds[i] = rng.uniform(-1.0, 1.0);
            }
        run_loss(params, cfg, prob, &report.min_abs_t_raw);
        safe = report.min_abs_t_raw >= opts.switch_safety;
        report.resamples = attempt;
    }
    if (!safe)
        throw PreconditionError("gradcheck: no switch-safe sample after " +
                                std::to_string(opts.max_tries) + " tries (min |T_raw| " +
                                std::to_string(report.min_abs_t_raw) + ")");

    // analytic gradients
    CellParams analytic(cfg);
    std::vector<Vector> dx(steps, Vector(d));
    StateGrad d_init(h);
    {
        std::vector<StepTrace> traces;
        CellState state = prob.init;
        for (std::size_t t = 0; t < steps; ++t) {
            auto [next, trace] = step(params, cfg, state, prob.xs[t]);
            traces.push_back(std::move(trace));
            state = std::move(next);
        }
        StateGrad up(h);
        for (std::size_t t = steps; t-- > 0;) {
            add_inplace(up.dt, prob.coeffs[t].dt);
            add_inplace(up.dc, prob.coeffs[t].dc);
            add_inplace(up.ds, prob.coeffs[t].ds);
            up = step_backward(params, cfg, traces[t], up, analytic, &dx[t]);
        }
        d_init = up;
    }

    // finite differences, one scalar at a time
    CellParams mutable_params = params;
    Problem mutable_prob = prob;
    auto fd_of = [&](double* slot) {
        const double saved = *slot;
        *slot = saved + opts.eps;
        const double up_loss = run_loss(mutable_params, cfg, mutable_prob);
        *slot = saved - opts.eps;
        const double down_loss = run_loss(mutable_params, cfg, mutable_prob);
        *slot = saved;
        return (up_loss - down_loss) / (2.0 * opts.eps);
    };

    std::vector<std::vector<double>*> param_blocks, analytic_blocks;
    std::vector<std::string> block_names;
    visit_blocks(mutable_params, [&](const char* name, std::vector<double>& b) {
        param_blocks.push_back(&b);
        block_names.push_back(name);
    });
    visit_blocks(analytic, [&](const char*, std::vector<double>& b) { analytic_blocks.push_back(&b); });

    for (std::size_t k = 0; k < param_blocks.size(); ++k) {
        GradCheckReport::Entry entry{block_names[k], 0.0};
        for (std::size_t i = 0; i < param_blocks[k]->size(); ++i) {
            const double fd = fd_of(&(*param_blocks[k])[i]);
            entry.max_rel_err =
                std::max(entry.max_rel_err, rel_err((*analytic_blocks[k])[i], fd, opts.rel_floor));
        }
        report.entries.push_back(entry);
    }

    GradCheckReport::Entry x_entry{"x", 0.0};
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t j = 0; j < d; ++j) {
            const double fd = fd_of(&mutable_prob.xs[t][j]);
            x_entry.max_rel_err = std::max(x_entry.max_rel_err, rel_err(dx[t][j], fd, opts.rel_floor));
        }
    report.entries.push_back(x_entry);

    auto state_entry = [&](const char* name, Vector& slot_vec, const Vector& analytic_vec) {
        GradCheckReport::Entry entry{name, 0.0};
        for (std::size_t i = 0; i < h; ++i) {
            const double fd = fd_of(&slot_vec[i]);
            entry.max_rel_err =
                std::max(entry.max_rel_err, rel_err(analytic_vec[i], fd, opts.rel_floor));
        }
        report.entries.push_back(entry);
    };
    state_entry("T0", mutable_prob.init.t, d_init.dt);
    state_entry("C0", mutable_prob.init.c, d_init.dc);
    state_entry("S0", mutable_prob.init.s, d_init.ds);

    for (const auto& e : report.entries) report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
    report.pass = report.max_rel_err <= opts.tol;
    return report;
}

}  // namespace petnn

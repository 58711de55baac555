#include "petnn/eval.hpp"

#include <charconv>
#include <fstream>

namespace petnn {

StateTrace collect_state_trace(const Model<PetnnCell>& model, const Matrix& sequence) {
    if (sequence.cols != model.cell.input_dim()) shape_error("collect_state_trace: dim mismatch");
    StateTrace out;
    CellState state = model.cell.zero_state();
    for (std::size_t t = 0; t < sequence.rows; ++t) {
        Vector x(sequence.cols);
        for (std::size_t j = 0; j < sequence.cols; ++j) x[j] = sequence(t, j);
        auto [next, trace] = model.cell.forward(state, x);
        out.t.push_back(next.t);
        out.c.push_back(next.c);
        out.s.push_back(next.s);
        out.m.push_back(trace.m);
        state = std::move(next);
    }
    return out;
}

void export_trace(const Model<PetnnCell>& model, const Matrix& sequence,
                  const std::filesystem::path& path) {
    const StateTrace trace = collect_state_trace(model, sequence);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("petnn: cannot write " + path.string());
    out << "step,unit,T,C,S,m\n";
    char buf[64];
    auto field = [&](double v) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        (void)ec;
        out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    };
    const std::size_t h = model.cell.hidden_dim();
    for (std::size_t t = 0; t < trace.steps(); ++t) {
        for (std::size_t u = 0; u < h; ++u) {
            out << t << ',' << u;
            field(trace.t[t][u]);
            field(trace.c[t][u]);
            field(trace.s[t][u]);
            field(trace.m[t][u]);
            out << '\n';
        }
    }
}

EfficiencyReport efficiency_report(const CellConfig& cfg, std::size_t out_dim,
                                   std::size_t seq_len) {
    cfg.validate();
    EfficiencyReport report;
    report.params = param_count(cfg) + out_dim * cfg.hidden_dim + out_dim;
    // recurrent part is exactly linear in sequence length; the head runs once
    report.flops_per_sequence =
        seq_len * flop_count_per_step(cfg) + 2 * out_dim * cfg.hidden_dim + out_dim;
    return report;
}

}  // namespace petnn

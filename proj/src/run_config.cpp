#include "petnn/run_config.hpp"

#include <set>
#include <stdexcept>

#include "petnn/serialize.hpp"

namespace petnn {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    if (!j.is_object())
        throw std::invalid_argument("petnn: config section '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key))
            throw std::invalid_argument("petnn: unknown key '" + key + "' in " + where);
    }
}

TaskConfig parse_task(const nlohmann::json& j) {
    TaskConfig task;
    task.kind = j.at("kind").get<std::string>();
    if (task.kind == "adding_problem") {
        check_keys(j, {"kind", "length", "n_train", "n_val", "n_test"}, "task");
    } else if (task.kind == "first_token_recall") {
        check_keys(j, {"kind", "length", "n_train", "n_val", "n_test", "k_classes"}, "task");
    } else if (task.kind == "distractor_classification") {
        check_keys(j, {"kind", "length", "n_train", "n_val", "n_test", "k_classes",
                       "distractor_fraction"},
                   "task");
    } else if (task.kind == "forecast_synthetic") {
        check_keys(j, {"kind", "n_points", "components", "trend_slope", "noise_sigma", "window",
                       "split"},
                   "task");
    } else if (task.kind == "forecast_csv") {
        check_keys(j, {"kind", "csv_path", "target_cols", "window", "split"}, "task");
    } else {
        throw std::invalid_argument("petnn: unknown task kind '" + task.kind + "'");
    }

    if (j.contains("length")) task.length = j.at("length").get<std::size_t>();
    if (j.contains("n_train")) task.n_train = j.at("n_train").get<std::size_t>();
    if (j.contains("n_val")) task.n_val = j.at("n_val").get<std::size_t>();
    if (j.contains("n_test")) task.n_test = j.at("n_test").get<std::size_t>();
    if (j.contains("k_classes")) task.k_classes = j.at("k_classes").get<std::size_t>();
    if (j.contains("distractor_fraction"))
        task.distractor_fraction = j.at("distractor_fraction").get<double>();
    if (j.contains("csv_path")) task.csv_path = j.at("csv_path").get<std::string>();
    if (j.contains("target_cols"))
        task.target_cols = j.at("target_cols").get<std::vector<std::string>>();
    if (j.contains("n_points")) task.series.n_points = j.at("n_points").get<std::size_t>();
    if (j.contains("trend_slope")) task.series.trend_slope = j.at("trend_slope").get<double>();
    if (j.contains("noise_sigma")) task.series.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("components")) {
        task.series.components.clear();
        for (const auto& c : j.at("components")) {
            check_keys(c, {"amplitude", "period", "phase"}, "task.components[]");
            SineComponent comp;
            if (c.contains("amplitude")) comp.amplitude = c.at("amplitude").get<double>();
            comp.period = c.at("period").get<double>();
            if (c.contains("phase")) comp.phase = c.at("phase").get<double>();
            task.series.components.push_back(comp);
        }
    }
    if (j.contains("window")) {
        const auto& w = j.at("window");
        check_keys(w, {"seq_len", "pred_len", "stride"}, "task.window");
        if (w.contains("seq_len")) task.window.seq_len = w.at("seq_len").get<std::size_t>();
        if (w.contains("pred_len")) task.window.pred_len = w.at("pred_len").get<std::size_t>();
        if (w.contains("stride")) task.window.stride = w.at("stride").get<std::size_t>();
        task.window.validate();
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        check_keys(s, {"ratios"}, "task.split");
        const auto ratios = s.at("ratios").get<std::vector<double>>();
        if (ratios.size() != 3)
            throw std::invalid_argument("petnn: task.split.ratios needs exactly 3 entries");
        for (int i = 0; i < 3; ++i) task.split.ratios[i] = ratios[static_cast<std::size_t>(i)];
        task.split.validate();
    }
    return task;
}

CellConfig parse_model(const nlohmann::json& j, std::string& kind_out) {
    check_keys(j,
               {"kind", "hidden_dim", "time_activation", "candidate_activation",
                "output_activation", "mix_gate_squash", "boundary_rule", "update_variant"},
               "model");
    CellConfig cfg;
    if (j.contains("kind")) kind_out = j.at("kind").get<std::string>();
    if (kind_out != "petnn" && kind_out != "rnn_ref")
        throw std::invalid_argument("petnn: model.kind must be petnn or rnn_ref");
    cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    if (j.contains("time_activation"))
        cfg.time_activation = activation_from_name(j.at("time_activation").get<std::string>());
    if (j.contains("candidate_activation"))
        cfg.candidate_activation =
            activation_from_name(j.at("candidate_activation").get<std::string>());
    if (j.contains("output_activation"))
        cfg.output_activation = activation_from_name(j.at("output_activation").get<std::string>());
    if (j.contains("mix_gate_squash")) {
        const std::string squash = j.at("mix_gate_squash").get<std::string>();
        if (squash == "sigmoid")
            cfg.mix_gate_squash = MixGateSquash::sigmoid;
        else if (squash == "none")
            cfg.mix_gate_squash = MixGateSquash::none;
        else
            throw std::invalid_argument("petnn: unknown mix_gate_squash '" + squash + "'");
    }
    if (j.contains("boundary_rule")) {
        const std::string rule = j.at("boundary_rule").get<std::string>();
        if (rule == "release_on_leq_zero")
            cfg.boundary_rule = BoundaryRule::release_on_leq_zero;
        else if (rule == "release_on_lt_zero")
            cfg.boundary_rule = BoundaryRule::release_on_lt_zero;
        else
            throw std::invalid_argument("petnn: unknown boundary_rule '" + rule + "'");
    }
    if (j.contains("update_variant"))
        cfg.update_variant = variant_from_name(j.at("update_variant").get<std::string>());
    return cfg;
}

TrainConfig parse_train(const nlohmann::json& j) {
    check_keys(j,
               {"epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
                "grad_clip_norm", "loss", "reset_policy", "bptt_window", "patience"},
               "train");
    TrainConfig cfg;
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("adam_beta1")) cfg.adam_beta1 = j.at("adam_beta1").get<double>();
    if (j.contains("adam_beta2")) cfg.adam_beta2 = j.at("adam_beta2").get<double>();
    if (j.contains("adam_eps")) cfg.adam_eps = j.at("adam_eps").get<double>();
    if (j.contains("grad_clip_norm")) cfg.grad_clip_norm = j.at("grad_clip_norm").get<double>();
    if (j.contains("loss")) cfg.loss = loss_from_name(j.at("loss").get<std::string>());
    if (j.contains("reset_policy")) {
        const auto& r = j.at("reset_policy");
        check_keys(r, {"time_retained", "energy_retained"}, "train.reset_policy");
        if (r.contains("time_retained"))
            cfg.reset_policy.time_retained = r.at("time_retained").get<bool>();
        if (r.contains("energy_retained"))
            cfg.reset_policy.energy_retained = r.at("energy_retained").get<bool>();
    }
    if (j.contains("bptt_window")) cfg.bptt_window = j.at("bptt_window").get<std::size_t>();
    if (j.contains("patience")) cfg.patience = j.at("patience").get<std::size_t>();
    cfg.validate();
    return cfg;
}

InitConfig parse_init(const nlohmann::json& j) {
    check_keys(j, {"scheme", "time_decay_bias", "mix_gate_bias"}, "init");
    InitConfig init;
    if (j.contains("scheme")) {
        const std::string scheme = j.at("scheme").get<std::string>();
        if (scheme == "glorot_uniform")
            init.scheme = InitScheme::glorot_uniform;
        else if (scheme == "zero")
            init.scheme = InitScheme::zero;
        else
            throw std::invalid_argument("petnn: unknown init scheme '" + scheme + "'");
    }
    if (j.contains("time_decay_bias")) init.time_decay_bias = j.at("time_decay_bias").get<double>();
    if (j.contains("mix_gate_bias")) init.mix_gate_bias = j.at("mix_gate_bias").get<double>();
    return init;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
    check_keys(j, {"seed", "out_dir", "model", "init", "task", "train", "eval", "trace",
                   "gradcheck", "bench"},
               "config");
    RunConfig cfg;
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("model")) cfg.cell = parse_model(j.at("model"), cfg.model_kind);
    if (j.contains("init")) cfg.init = parse_init(j.at("init"));
    if (j.contains("task")) cfg.task = parse_task(j.at("task"));
    if (j.contains("train")) cfg.train = parse_train(j.at("train"));
    cfg.train.seed = cfg.seed;
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, {"checkpoint", "split"}, "eval");
        EvalConfig ev;
        ev.checkpoint = e.at("checkpoint").get<std::string>();
        if (e.contains("split")) ev.split = e.at("split").get<std::string>();
        cfg.eval = ev;
    }
    if (j.contains("trace")) {
        const auto& t = j.at("trace");
        check_keys(t, {"checkpoint", "split", "sequence_index"}, "trace");
        TraceConfig tc;
        tc.checkpoint = t.at("checkpoint").get<std::string>();
        if (t.contains("split")) tc.split = t.at("split").get<std::string>();
        if (t.contains("sequence_index"))
            tc.sequence_index = t.at("sequence_index").get<std::size_t>();
        cfg.trace = tc;
    }
    if (j.contains("gradcheck")) {
        const auto& g = j.at("gradcheck");
        check_keys(g, {"input_dim", "seq_len"}, "gradcheck");
        GradCheckConfig gc;
        if (g.contains("input_dim")) gc.input_dim = g.at("input_dim").get<std::size_t>();
        if (g.contains("seq_len")) gc.seq_len = g.at("seq_len").get<std::size_t>();
        cfg.gradcheck = gc;
    }
    if (j.contains("bench")) {
        const auto& b = j.at("bench");
        check_keys(b, {"seq_len", "input_dim", "out_dim"}, "bench");
        BenchConfig bc;
        if (b.contains("seq_len")) bc.seq_len = b.at("seq_len").get<std::size_t>();
        if (b.contains("input_dim")) bc.input_dim = b.at("input_dim").get<std::size_t>();
        if (b.contains("out_dim")) bc.out_dim = b.at("out_dim").get<std::size_t>();
        cfg.bench = bc;
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("petnn: cannot parse " + path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

}  // namespace petnn

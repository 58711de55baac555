#include "petnn/runner.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <limits>
#include <thread>

#include "petnn/errors.hpp"
#include "petnn/gradcheck.hpp"

namespace petnn {

namespace {

std::size_t find_target_col(const CsvSeries& series, const std::string& name) {
    for (std::size_t i = 0; i < series.feature_names.size(); ++i)
        if (series.feature_names[i] == name) return i;
    throw std::invalid_argument("petnn: target column '" + name + "' not in CSV header");
}

DatasetBundle forecast_bundle(const Matrix& raw, const TaskConfig& task,
                              const std::vector<std::size_t>& target_cols) {
    DatasetBundle data;
    const auto [train_end, val_end] = split_points(raw.rows, task.split);
    (void)val_end;
    const NormStats stats = normalize_fit(raw, train_end);
    const Matrix normalized = normalize_apply(stats, raw);
    WindowedSplits splits = window_and_split(normalized, task.window, task.split, target_cols);
    data.train = std::move(splits.train);
    data.val = std::move(splits.val);
    data.test = std::move(splits.test);
    data.loss = LossKind::mse;
    data.input_dim = raw.cols;
    data.out_dim = task.window.pred_len * target_cols.size();
    data.normalized = true;
    return data;
}

}  // namespace

DatasetBundle build_datasets(const TaskConfig& task, Rng& rng) {
    DatasetBundle data;
    if (task.kind == "adding_problem") {
        data.train = gen_adding_problem(rng, task.n_train, task.length);
        data.val = gen_adding_problem(rng, task.n_val, task.length);
        data.test = gen_adding_problem(rng, task.n_test, task.length);
        data.loss = LossKind::mse;
        data.input_dim = 2;
        data.out_dim = 1;
    } else if (task.kind == "first_token_recall") {
        data.train = gen_first_token_recall(rng, task.n_train, task.length, task.k_classes);
        data.val = gen_first_token_recall(rng, task.n_val, task.length, task.k_classes);
        data.test = gen_first_token_recall(rng, task.n_test, task.length, task.k_classes);
        data.loss = LossKind::cross_entropy;
        data.input_dim = task.k_classes;
        data.out_dim = task.k_classes;
    } else if (task.kind == "distractor_classification") {
        data.train = gen_distractor_classification(rng, task.n_train, task.length, task.k_classes,
                                                   task.distractor_fraction);
        data.val = gen_distractor_classification(rng, task.n_val, task.length, task.k_classes,
                                                 task.distractor_fraction);
        data.test = gen_distractor_classification(rng, task.n_test, task.length, task.k_classes,
                                                  task.distractor_fraction);
        data.loss = LossKind::cross_entropy;
        data.input_dim = task.k_classes;
        data.out_dim = task.k_classes;
    } else if (task.kind == "forecast_synthetic") {
        const Matrix raw = gen_synthetic_forecast(rng, task.series);
        data = forecast_bundle(raw, task, {0});
    } else if (task.kind == "forecast_csv") {
        const CsvSeries series = load_csv_series(task.csv_path);
        std::vector<std::size_t> cols;
        if (task.target_cols.empty()) {
            for (std::size_t i = 0; i < series.values.cols; ++i) cols.push_back(i);
        } else {
            for (const std::string& name : task.target_cols)
                cols.push_back(find_target_col(series, name));
        }
        data = forecast_bundle(series.values, task, cols);
    } else {
        throw std::invalid_argument("petnn: unknown task kind '" + task.kind + "'");
    }
    data.train.validate();
    data.val.validate();
    data.test.validate();
    return data;
}

std::string data_stream_hash(const DatasetBundle& data) {
    std::vector<unsigned char> bytes;
    auto push_doubles = [&](const std::vector<double>& xs) {
        const std::size_t at = bytes.size();
        bytes.resize(at + xs.size() * sizeof(double));
        std::memcpy(bytes.data() + at, xs.data(), xs.size() * sizeof(double));
    };
    for (const SequenceBatch* batch : {&data.train, &data.val, &data.test}) {
        for (const Matrix& input : batch->inputs) push_doubles(input.data);
        push_doubles(batch->targets.data);
        for (int label : batch->labels) {
            const auto v = static_cast<std::int64_t>(label);
            const std::size_t at = bytes.size();
            bytes.resize(at + sizeof(v));
            std::memcpy(bytes.data() + at, &v, sizeof(v));
        }
    }
    return sha1_hex(bytes.data(), bytes.size());
}

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, static_cast<std::size_t>(ptr - buf));
}

}  // namespace

std::string metrics_csv(const std::vector<EpochRow>& rows) {
    std::string out = "epoch,split,loss,mse,mae,accuracy,wall_ms\n";
    for (const EpochRow& row : rows) {
        out += std::to_string(row.epoch);
        out += ',' + row.split;
        out += ',' + format_double(row.loss);
        out += ',';
        if (row.mse) out += format_double(*row.mse);
        out += ',';
        if (row.mae) out += format_double(*row.mae);
        out += ',';
        if (row.accuracy) out += format_double(*row.accuracy);
        out += ',' + format_double(row.wall_ms);
        out += '\n';
    }
    return out;
}

EpochRow row_from_report(std::size_t epoch, const std::string& split, const MetricsReport& rep,
                         TaskKind kind) {
    EpochRow row;
    row.epoch = epoch;
    row.split = split;
    row.loss = rep.loss;
    if (kind == TaskKind::regression) {
        row.mse = rep.mse;
        row.mae = rep.mae;
    } else {
        row.accuracy = rep.accuracy;
    }
    row.wall_ms = rep.wall_ms;
    return row;
}

Model<PetnnCell> build_petnn_model(const RunConfig& cfg, std::size_t input_dim,
                                   std::size_t out_dim, Rng& rng) {
    CellConfig cell_cfg = cfg.cell;
    cell_cfg.input_dim = input_dim;
    cell_cfg.validate();
    Model<PetnnCell> model;
    model.cell = PetnnCell(cell_cfg);
    model.cell.params.init(rng, cfg.init.scheme);
    model.cell.params.b_decay.fill(cfg.init.time_decay_bias);
    model.cell.params.b_zw.fill(cfg.init.mix_gate_bias);
    model.head = ReadoutHead(out_dim, cell_cfg.hidden_dim);
    model.head.init(rng, cfg.init.scheme);
    return model;
}

Model<RnnRefCell> build_rnn_model(const RunConfig& cfg, std::size_t input_dim,
                                  std::size_t out_dim, Rng& rng) {
    Model<RnnRefCell> model;
    model.cell = RnnRefCell(input_dim, cfg.cell.hidden_dim);
    model.cell.params.init(rng, cfg.init.scheme);
    model.head = ReadoutHead(out_dim, cfg.cell.hidden_dim);
    model.head.init(rng, cfg.init.scheme);
    return model;
}

namespace {

struct CommandContext {
    RunConfig cfg;
    nlohmann::json raw_config;
    std::string config_hash;
    std::filesystem::path out_dir;
};

CommandContext make_context(const std::filesystem::path& config_path,
                            const std::optional<std::string>& out_override,
                            const std::optional<std::uint64_t>& seed_override) {
    CommandContext ctx;
    const std::string content = read_file(config_path);
    ctx.config_hash = git_blob_sha1(content);
    try {
        ctx.raw_config = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("petnn: cannot parse " + config_path.string() + ": " +
                                    e.what());
    }
    ctx.cfg = parse_run_config(ctx.raw_config);
    if (seed_override) {
        ctx.cfg.seed = *seed_override;
        ctx.cfg.train.seed = *seed_override;
    }
    ctx.out_dir = out_override ? std::filesystem::path(*out_override)
                               : std::filesystem::path(ctx.cfg.out_dir);
    std::filesystem::create_directories(ctx.out_dir);
    return ctx;
}

void write_manifest(const CommandContext& ctx, const std::string& command,
                    nlohmann::json extra) {
    nlohmann::json manifest = {
        {"command", command},
        {"config", ctx.raw_config},
        {"config_hash", ctx.config_hash},
        {"seed", ctx.cfg.seed},
    };
    for (auto& [key, value] : extra.items()) manifest[key] = value;
    write_file_atomic(ctx.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

const TaskConfig& require_task(const RunConfig& cfg) {
    if (!cfg.task) throw std::invalid_argument("petnn: config has no task section");
    return *cfg.task;
}

const SequenceBatch& pick_split(const DatasetBundle& data, const std::string& split) {
    if (split == "train") return data.train;
    if (split == "val") return data.val;
    if (split == "test") return data.test;
    throw std::invalid_argument("petnn: unknown split '" + split + "'");
}

template <class Cell>
int train_and_persist(const CommandContext& ctx, Model<Cell> model, const DatasetBundle& data,
                      const std::string& data_hash) {
    AdamState<Cell> opt(model);
    Rng rng(ctx.cfg.seed);  // run-level stream; data/model draws already consumed
    TrainProgress progress = train_loop(model, opt, data, ctx.cfg.train);

    TrainerSnapshot<Cell> snap{std::move(model), std::move(opt.m), std::move(opt.v),
                               opt.step_count,   progress.epochs_run,
                               rng.state(),      ctx.cfg.train};
    write_file_atomic(ctx.out_dir / "metrics.csv", metrics_csv(progress.rows));
    write_file_atomic(ctx.out_dir / "checkpoint.json", snapshot_to_json(snap).dump(2) + "\n");
    write_manifest(ctx, "train",
                   {{"data_hash", data_hash},
                    {"epochs_run", progress.epochs_run},
                    {"early_stopped", progress.early_stopped},
                    {"outputs", {"metrics.csv", "checkpoint.json"}}});
    return 0;
}

}  // namespace

int cmd_train(const std::filesystem::path& config_path,
              const std::optional<std::string>& out_override,
              const std::optional<std::uint64_t>& seed_override) {
    CommandContext ctx = make_context(config_path, out_override, seed_override);
    const TaskConfig& task = require_task(ctx.cfg);
    Rng rng(ctx.cfg.seed);
    const DatasetBundle data = build_datasets(task, rng);
    ctx.cfg.train.loss = data.loss;
    const std::string data_hash = data_stream_hash(data);
    if (ctx.cfg.model_kind == "rnn_ref")
        return train_and_persist(ctx, build_rnn_model(ctx.cfg, data.input_dim, data.out_dim, rng),
                                 data, data_hash);
    return train_and_persist(ctx, build_petnn_model(ctx.cfg, data.input_dim, data.out_dim, rng),
                             data, data_hash);
}

int cmd_eval(const std::filesystem::path& config_path,
             const std::optional<std::string>& out_override,
             const std::optional<std::uint64_t>& seed_override) {
    CommandContext ctx = make_context(config_path, out_override, seed_override);
    if (!ctx.cfg.eval) throw std::invalid_argument("petnn: config has no eval section");
    const TaskConfig& task = require_task(ctx.cfg);
    Rng rng(ctx.cfg.seed);
    const DatasetBundle data = build_datasets(task, rng);
    const SequenceBatch& split = pick_split(data, ctx.cfg.eval->split);

    const nlohmann::json ckpt = nlohmann::json::parse(read_file(ctx.cfg.eval->checkpoint));
    MetricsReport report;
    if (snapshot_model_kind(ckpt) == "rnn_ref") {
        const auto snap = rnn_snapshot_from_json(ckpt);
        report = evaluate(snap.model, split, data.loss);
    } else {
        const auto snap = petnn_snapshot_from_json(ckpt);
        report = evaluate(snap.model, split, data.loss);
    }
    report.normalized = data.normalized;

    nlohmann::json metrics = {
        {"loss", report.loss},
        {"mse", report.mse},
        {"mae", report.mae},
        {"n_samples", report.n_samples},
        {"wall_ms", report.wall_ms},
    };
    if (report.accuracy) metrics["accuracy"] = *report.accuracy;
    const nlohmann::json out = {
        {"metrics", metrics},
        {"config_hash", ctx.config_hash},
        {"split", ctx.cfg.eval->split},
        {"convention", {{"normalized_metrics", report.normalized}}},
    };
    write_file_atomic(ctx.out_dir / "metrics.json", out.dump(2) + "\n");
    write_manifest(ctx, "eval", {{"outputs", {"metrics.json"}}});
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_gradcheck(const std::filesystem::path& config_path,
                  const std::optional<std::string>& out_override,
                  const std::optional<std::uint64_t>& seed_override) {
    CommandContext ctx = make_context(config_path, out_override, seed_override);
    const GradCheckConfig gc = ctx.cfg.gradcheck.value_or(GradCheckConfig{});
    if (gc.input_dim > 8 || ctx.cfg.cell.hidden_dim > 8 || gc.seq_len > 8)
        throw std::invalid_argument("petnn: gradcheck requires d,h <= 8 and seq_len <= 8");
    CellConfig cell_cfg = ctx.cfg.cell;
    cell_cfg.input_dim = gc.input_dim;
    GradCheckOptions opts;
    opts.seq_len = gc.seq_len;
    const GradCheckReport report = gradcheck_run(cell_cfg, ctx.cfg.seed, opts);
    for (const auto& entry : report.entries)
        std::cout << entry.block << " max_rel_err " << format_double(entry.max_rel_err) << "\n";
    std::cout << (report.pass ? "PASS" : "FAIL") << " max_rel_err "
              << format_double(report.max_rel_err) << " tol " << format_double(opts.tol) << "\n";
    write_manifest(ctx, "gradcheck",
                   {{"max_rel_err", report.max_rel_err},
                    {"pass", report.pass},
                    {"resamples", report.resamples}});
    return report.pass ? 0 : 1;
}

int cmd_ablate(const std::filesystem::path& config_path,
               const std::optional<std::string>& out_override,
               const std::optional<std::uint64_t>& seed_override) {
    CommandContext ctx = make_context(config_path, out_override, seed_override);
    const TaskConfig& task = require_task(ctx.cfg);
    if (ctx.cfg.model_kind != "petnn")
        throw std::invalid_argument("petnn: ablate runs the petnn model only");
    Rng data_rng(ctx.cfg.seed);
    const DatasetBundle data = build_datasets(task, data_rng);

    struct SubRun {
        std::string group, name;
        UpdateVariant variant = UpdateVariant::self_selective;
        ResetPolicy policy;
        std::vector<EpochRow> rows;
        std::string data_hash;
        std::string error;
        bool ok = false;
    };
    std::vector<SubRun> runs;
    for (UpdateVariant v : {UpdateVariant::self_selective, UpdateVariant::traditional_gating,
                            UpdateVariant::quasi_linear, UpdateVariant::exp_gating}) {
        SubRun r;
        r.group = "variant";
        r.name = variant_name(v);
        r.variant = v;
        r.policy = ctx.cfg.train.reset_policy;
        runs.push_back(std::move(r));
    }
    const std::pair<bool, bool> policies[4] = {{true, true}, {false, true}, {true, false},
                                               {false, false}};
    for (const auto& [time_kept, energy_kept] : policies) {
        SubRun r;
        r.group = "policy";
        r.name = std::string("time=") + (time_kept ? "1" : "0") + ",energy=" +
                 (energy_kept ? "1" : "0");
        r.variant = UpdateVariant::self_selective;
        r.policy = ResetPolicy{time_kept, energy_kept};
        runs.push_back(std::move(r));
    }

    auto run_one = [&](SubRun& r) {
        try {
            r.data_hash = data_stream_hash(data);
            RunConfig sub_cfg = ctx.cfg;
            sub_cfg.cell.update_variant = r.variant;
            sub_cfg.train.reset_policy = r.policy;
            sub_cfg.train.loss = data.loss;
            Rng rng(sub_cfg.seed);
            Model<PetnnCell> model = build_petnn_model(sub_cfg, data.input_dim, data.out_dim, rng);
            AdamState<PetnnCell> opt(model);
            TrainProgress progress = train_loop(model, opt, data, sub_cfg.train);
            r.rows = std::move(progress.rows);
            r.ok = true;
        } catch (const std::exception& e) {
            r.error = e.what();
        }
    };

    std::size_t n_threads = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("PETNN_THREADS")) {
        const unsigned long parsed = std::strtoul(env, nullptr, 10);
        if (parsed > 0) n_threads = parsed;
    }
    n_threads = std::max<std::size_t>(1, std::min(n_threads, runs.size()));
    if (n_threads == 1) {
        for (SubRun& r : runs) run_one(r);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (std::size_t k = 0; k < n_threads; ++k)
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= runs.size()) return;
                    run_one(runs[i]);
                }
            });
        for (std::thread& t : pool) t.join();
    }

    std::string csv = "group,name,epoch,split,loss,mse,mae,accuracy,wall_ms\n";
    nlohmann::json statuses = nlohmann::json::array();
    bool all_ok = true;
    bool hashes_match = true;
    for (const SubRun& r : runs) {
        all_ok = all_ok && r.ok;
        hashes_match = hashes_match && (r.data_hash == runs.front().data_hash);
        statuses.push_back({{"group", r.group},
                            {"name", r.name},
                            {"ok", r.ok},
                            {"error", r.error},
                            {"data_hash", r.data_hash}});
        for (const EpochRow& row : r.rows) {
            csv += r.group + ',' + r.name + ',' + std::to_string(row.epoch) + ',' + row.split;
            csv += ',' + format_double(row.loss);
            csv += ',';
            if (row.mse) csv += format_double(*row.mse);
            csv += ',';
            if (row.mae) csv += format_double(*row.mae);
            csv += ',';
            if (row.accuracy) csv += format_double(*row.accuracy);
            csv += ',' + format_double(row.wall_ms) + '\n';
        }
    }
    write_file_atomic(ctx.out_dir / "ablation.csv", csv);
    write_manifest(ctx, "ablate",
                   {{"sub_runs", statuses},
                    {"data_hash", runs.front().data_hash},
                    {"data_hashes_match", hashes_match},
                    {"outputs", {"ablation.csv"}}});
    if (!hashes_match) return 1;
    return all_ok ? 0 : 1;
}

int cmd_trace(const std::filesystem::path& config_path,
              const std::optional<std::string>& out_override,
              const std::optional<std::uint64_t>& seed_override) {
    CommandContext ctx = make_context(config_path, out_override, seed_override);
    if (!ctx.cfg.trace) throw std::invalid_argument("petnn: config has no trace section");
    const TaskConfig& task = require_task(ctx.cfg);
    Rng rng(ctx.cfg.seed);
    const DatasetBundle data = build_datasets(task, rng);
    const SequenceBatch& split = pick_split(data, ctx.cfg.trace->split);
    if (ctx.cfg.trace->sequence_index >= split.size())
        throw std::invalid_argument("petnn: trace sequence_index out of range");

    const nlohmann::json ckpt = nlohmann::json::parse(read_file(ctx.cfg.trace->checkpoint));
    if (snapshot_model_kind(ckpt) != "petnn")
        throw std::invalid_argument("petnn: trace requires a petnn checkpoint");
    const auto snap = petnn_snapshot_from_json(ckpt);
    export_trace(snap.model, split.inputs[ctx.cfg.trace->sequence_index],
                 ctx.out_dir / "trace.csv");
    write_manifest(ctx, "trace", {{"outputs", {"trace.csv"}}});
    return 0;
}

int cmd_bench(const std::filesystem::path& config_path,
              const std::optional<std::string>& out_override,
              const std::optional<std::uint64_t>& seed_override) {
    CommandContext ctx = make_context(config_path, out_override, seed_override);
    const BenchConfig bench = ctx.cfg.bench.value_or(BenchConfig{});
    CellConfig cell_cfg = ctx.cfg.cell;
    std::size_t out_dim = 1;
    if (ctx.cfg.task) {
        Rng rng(ctx.cfg.seed);
        const DatasetBundle data = build_datasets(*ctx.cfg.task, rng);
        cell_cfg.input_dim = data.input_dim;
        out_dim = data.out_dim;
    }
    if (bench.input_dim) cell_cfg.input_dim = *bench.input_dim;
    if (bench.out_dim) out_dim = *bench.out_dim;
    const EfficiencyReport report = efficiency_report(cell_cfg, out_dim, bench.seq_len);
    const nlohmann::json out = {
        {"params", report.params},
        {"flops_per_sequence", report.flops_per_sequence},
        {"seq_len", bench.seq_len},
        {"input_dim", cell_cfg.input_dim},
        {"hidden_dim", cell_cfg.hidden_dim},
        {"out_dim", out_dim},
        {"convention", {{"flops_per_multiply_add", 2}, {"flops_per_activation", 4}}},
    };
    write_file_atomic(ctx.out_dir / "bench.json", out.dump(2) + "\n");
    write_manifest(ctx, "bench", {{"outputs", {"bench.json"}}});
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_command(const std::string& command, const std::filesystem::path& config_path,
                const std::optional<std::string>& out_override,
                const std::optional<std::uint64_t>& seed_override) {
    try {
        if (command == "train") return cmd_train(config_path, out_override, seed_override);
        if (command == "eval") return cmd_eval(config_path, out_override, seed_override);
        if (command == "gradcheck") return cmd_gradcheck(config_path, out_override, seed_override);
        if (command == "ablate") return cmd_ablate(config_path, out_override, seed_override);
        if (command == "trace") return cmd_trace(config_path, out_override, seed_override);
        if (command == "bench") return cmd_bench(config_path, out_override, seed_override);
        std::cerr << "petnn: unknown command '" << command << "'\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const PreconditionError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "petnn: bad config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}

}  // namespace petnn

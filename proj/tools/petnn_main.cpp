#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "petnn/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"PETNN training and evaluation harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;

    const char* names[] = {"train", "eval", "gradcheck", "ablate", "trace", "bench"};
    const char* descriptions[] = {
        "train a model and write metrics + checkpoint",
        "evaluate a checkpoint on a dataset split",
        "compare analytic gradients against finite differences",
        "run the update-variant and retention-policy sweeps",
        "export per-step T/C/S/m of one sequence as CSV",
        "report parameter and FLOP counts",
    };
    for (int i = 0; i < 6; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descriptions[i]);
        sub->add_option("--config", config_path, "run configuration JSON")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "seed override");
    }

    CLI11_PARSE(app, argc, argv);
    return petnn::run_command(app.get_subcommands().front()->get_name(), config_path, out_dir,
                              seed);
}

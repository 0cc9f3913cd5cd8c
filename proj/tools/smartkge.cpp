// Command-line front end: train / grid / eval.

#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smartkge/experiment.hpp"

namespace {

using namespace smartkge;

void add_common_options(CLI::App& app, ExperimentConfig& cfg,
                        std::string& variant, std::string& egt_order,
                        std::string& cross_phase) {
    app.add_option("--train", cfg.train_path, "train split TSV");
    app.add_option("--valid", cfg.valid_path, "valid split TSV");
    app.add_option("--test", cfg.test_path, "test split TSV");
    app.add_option("--dim", cfg.model.dim, "embedding dimension");
    app.add_option("--gamma", cfg.model.gamma, "margin");
    app.add_option("--alpha", cfg.model.alpha, "self-adversarial temperature");
    app.add_option("--eta", cfg.model.eta, "negatives per positive");
    app.add_option("--batch", cfg.model.batch, "batch size");
    app.add_option("--lr", cfg.model.lr, "learning rate");
    app.add_option("--rho", cfg.model.rho, "regularization coefficient");
    app.add_option("--norm", cfg.model.norm_order, "distance norm order")
        ->check(CLI::IsMember({1, 2}));
    app.add_option("--variant", variant, "smart | smart-m | smart-gt")
        ->check(CLI::IsMember({"smart", "smart-m", "smart-gt"}));
    app.add_option("--epsilon", cfg.model.epsilon,
                   "attention threshold for smart-gt");
    app.add_option("--steps-t", cfg.model.steps_t, "max steps, training phase");
    app.add_option("--steps-ta", cfg.model.steps_ta,
                   "max steps, adaptive-learning phase");
    app.add_option("--steps-f", cfg.model.steps_f, "max steps, freezing phase");
    app.add_option("--valid-every", cfg.model.valid_every,
                   "validation cadence in steps");
    app.add_option("--patience", cfg.model.patience,
                   "evaluations without improvement before stopping");
    app.add_option("--cross-phase-stop", cross_phase,
                   "return the best phase checkpoint (on|off)")
        ->check(CLI::IsMember({"on", "off"}));
    app.add_option("--runs", cfg.n_runs, "number of runs (seeds seed+0..n-1)");
    app.add_option("--seed", cfg.model.seed, "base RNG seed");
    app.add_option("--egt-order", egt_order,
                   "comma list, e.g. Trans,Rot,Ref,Scal");
    app.add_option("--adherence-in", cfg.adherence_in,
                   "adherence TSV to fine-tune from (skips phases T and TA)");
    app.add_option("--adherence-out", cfg.adherence_out,
                   "extra path for the aggregated adherence TSV");
    app.add_option("--out-dir", cfg.out_dir, "output directory");
    app.set_config("--config", "", "flat key=value config file; flags override");
}

void finish_config(ExperimentConfig& cfg, const std::string& variant,
                   const std::string& egt_order,
                   const std::string& cross_phase) {
    if (variant == "smart") cfg.model.variant = Variant::Smart;
    else if (variant == "smart-m") cfg.model.variant = Variant::SmartMajority;
    else if (variant == "smart-gt") cfg.model.variant = Variant::SmartThreshold;
    cfg.model.cross_phase_stop = (cross_phase == "on");
    try {
        cfg.model.egt_order = EgtOrder::parse(egt_order);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void print_metrics(const MetricsReport& m) {
    std::printf("mrr_x1000\t%.3f\n", m.mrr * 1000.0);
    for (int n : {1, 3, 10})
        std::printf("h%d\t%.4f\n", n, m.hits_at.at(n));
    std::printf("n_queries\t%zu\n", m.n_queries);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SMART knowledge-graph-embedding engine"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string variant = "smart";
    std::string egt_order = "Trans,Rot,Ref,Scal";
    std::string cross_phase = "off";
    std::vector<std::string> grid_specs;
    std::string checkpoint, split = "test";

    CLI::App* train = app.add_subcommand("train", "multi-run training");
    add_common_options(*train, cfg, variant, egt_order, cross_phase);

    CLI::App* grid = app.add_subcommand("grid", "hyperparameter grid search");
    add_common_options(*grid, cfg, variant, egt_order, cross_phase);
    grid->add_option("--grid", grid_specs,
                     "grid axis, e.g. gamma=1,9,24 (repeatable)")
        ->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common_options(*eval, cfg, variant, egt_order, cross_phase);
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval->add_option("--split", split, "train | valid | test")
        ->check(CLI::IsMember({"train", "valid", "test"}));

    CLI11_PARSE(app, argc, argv);

    try {
        finish_config(cfg, variant, egt_order, cross_phase);
        if (train->parsed()) {
            smartkge::cmd_train(cfg);
        } else if (grid->parsed()) {
            for (const std::string& spec : grid_specs) {
                const std::size_t eq = spec.find('=');
                if (eq == std::string::npos)
                    throw smartkge::ConfigError("bad grid spec: " + spec);
                std::vector<std::string> values;
                std::string list = spec.substr(eq + 1);
                std::size_t pos = 0;
                while (pos <= list.size()) {
                    const std::size_t comma = list.find(',', pos);
                    values.push_back(list.substr(pos, comma - pos));
                    if (comma == std::string::npos) break;
                    pos = comma + 1;
                }
                cfg.grid[spec.substr(0, eq)] = values;
            }
            const auto outcome = smartkge::cmd_grid(cfg);
            const auto& best = outcome.cells[outcome.best];
            std::printf("best cell (valid mrr %.6f):\n", best.valid_mrr);
            for (const auto& [k, v] : best.assignment)
                std::printf("  %s = %s\n", k.c_str(), v.c_str());
            print_metrics(best.test_metrics);
        } else if (eval->parsed()) {
            print_metrics(smartkge::cmd_eval(checkpoint, cfg, split));
        }
    } catch (const smartkge::DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return 3;
    } catch (const smartkge::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const smartkge::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

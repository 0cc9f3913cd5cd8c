#pragma once
// Experiment orchestration: multi-run training with adherence aggregation,
// hyperparameter grid search, and checkpoint evaluation.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "smartkge/analysis.hpp"
#include "smartkge/evaluation.hpp"
#include "smartkge/kgdata.hpp"
#include "smartkge/model.hpp"
#include "smartkge/training.hpp"

namespace smartkge {

struct ExperimentConfig {
    std::string train_path;
    std::string valid_path;
    std::string test_path;
    ModelConfig model;
    int n_runs = 1;
    std::string adherence_in;   // optional: skip T/TA, fine-tune from table
    std::string adherence_out;  // optional: extra copy of the adherence TSV
    std::map<std::string, std::vector<std::string>> grid;
    std::string out_dir = "out";

    void validate() const {
        if (train_path.empty() || valid_path.empty() || test_path.empty())
            throw ConfigError("train/valid/test paths are required");
        if (n_runs < 1) throw ConfigError("runs must be >= 1");
        model.validate();
    }
};

namespace detail {

inline std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

inline void write_metrics_tsv(const std::string& path, Variant variant,
                              const std::string& phase, int dim,
                              const MetricsReport& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write metrics file: " + path);
    out << "variant\tphase\tdim\tmrr_x1000\th1\th3\th10\tn_queries\n"
        << variant_name(variant) << '\t' << phase << '\t' << dim << '\t'
        << fmt(m.mrr * 1000.0, 3) << '\t' << fmt(m.hits_at.at(1), 4) << '\t'
        << fmt(m.hits_at.at(3), 4) << '\t' << fmt(m.hits_at.at(10), 4) << '\t'
        << m.n_queries << '\n';
}

}  // namespace detail

struct TrainOutcome {
    std::vector<RunResult> runs;
    AdherenceTable adherence;
    MetricsReport mean_metrics;  // mean over runs, for quick inspection
};

// Trains n_runs models with seeds seed+0..n_runs-1 and writes per-run
// checkpoints, logs and metrics plus the aggregated adherence and summary.
inline TrainOutcome cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    const KnowledgeGraph kg =
        load_dataset(cfg.train_path, cfg.valid_path, cfg.test_path);
    fs::create_directories(cfg.out_dir);

    std::optional<std::map<RelationId, Egt>> preloaded;
    if (!cfg.adherence_in.empty()) {
        const AdherenceTable t =
            load_adherence(cfg.adherence_in, kg, cfg.model.egt_order);
        preloaded = t.selections(cfg.model.egt_order);
    }

    TrainOutcome outcome;
    std::vector<std::map<RelationId, Egt>> run_selections;
    for (int j = 0; j < cfg.n_runs; ++j) {
        ModelConfig mc = cfg.model;
        mc.seed = cfg.model.seed + static_cast<std::uint64_t>(j);
        std::mt19937_64 rng(mc.seed);

        const fs::path run_dir = fs::path(cfg.out_dir) / ("run_" + std::to_string(j));
        fs::create_directories(run_dir);
        std::ofstream log_t(run_dir / "train_log_T.tsv", std::ios::binary);
        std::ofstream log_ta(run_dir / "train_log_TA.tsv", std::ios::binary);
        std::ofstream log_f(run_dir / "train_log_F.tsv", std::ios::binary);
        PhaseLogs logs{&log_t, &log_ta, &log_f};

        RunResult res = run_smart(kg, mc, rng, preloaded, logs);
        save_checkpoint((run_dir / "checkpoint.bin").string(), res.state,
                        res.att);
        detail::write_metrics_tsv((run_dir / "metrics.tsv").string(),
                                  mc.variant, res.chosen_phase, mc.dim,
                                  res.test_metrics);
        run_selections.push_back(res.selections);
        outcome.runs.push_back(std::move(res));
    }

    outcome.adherence = compute_adherence(run_selections);
    save_adherence((fs::path(cfg.out_dir) / "adherence.tsv").string(),
                   outcome.adherence, kg, cfg.model.egt_order);
    if (!cfg.adherence_out.empty())
        save_adherence(cfg.adherence_out, outcome.adherence, kg,
                       cfg.model.egt_order);

    const auto profiles = analyze_patterns(kg);
    {
        std::ofstream rep(fs::path(cfg.out_dir) / "report.tsv",
                          std::ios::binary);
        rep << adherence_report(outcome.adherence, profiles, kg,
                                cfg.model.egt_order, false);
        std::ofstream repmd(fs::path(cfg.out_dir) / "report.md",
                            std::ios::binary);
        repmd << adherence_report(outcome.adherence, profiles, kg,
                                  cfg.model.egt_order, true);
    }

    // summary: mean and std of the test metrics across runs
    std::map<std::string, std::vector<double>> series;
    for (const RunResult& r : outcome.runs) {
        series["mrr_x1000"].push_back(r.test_metrics.mrr * 1000.0);
        series["h1"].push_back(r.test_metrics.hits_at.at(1));
        series["h3"].push_back(r.test_metrics.hits_at.at(3));
        series["h10"].push_back(r.test_metrics.hits_at.at(10));
    }
    std::ofstream sum(fs::path(cfg.out_dir) / "summary.tsv", std::ios::binary);
    std::ofstream summd(fs::path(cfg.out_dir) / "summary.md", std::ios::binary);
    sum << "metric\tmean\tstd\tn_runs\n";
    summd << "| metric | mean | std |\n|---|---|---|\n";
    for (const char* key : {"mrr_x1000", "h1", "h3", "h10"}) {
        const auto [mean, sd] = detail::mean_std(series[key]);
        sum << key << '\t' << detail::fmt(mean) << '\t' << detail::fmt(sd)
            << '\t' << cfg.n_runs << '\n';
        summd << "| " << key << " | " << detail::fmt(mean) << " | "
              << detail::fmt(sd) << " |\n";
    }

    outcome.mean_metrics.n_queries = outcome.runs.front().test_metrics.n_queries;
    outcome.mean_metrics.mrr = detail::mean_std(series["mrr_x1000"]).first / 1000.0;
    for (int n : {1, 3, 10})
        outcome.mean_metrics.hits_at[n] =
            detail::mean_std(series["h" + std::to_string(n)]).first;
    return outcome;
}

namespace detail {

inline void apply_grid_value(ModelConfig& mc, const std::string& key,
                             const std::string& value) {
    try {
        if (key == "gamma") mc.gamma = std::stod(value);
        else if (key == "alpha") mc.alpha = std::stod(value);
        else if (key == "eta") mc.eta = std::stoi(value);
        else if (key == "batch") mc.batch = std::stoi(value);
        else if (key == "lr") mc.lr = std::stod(value);
        else if (key == "rho") mc.rho = std::stod(value);
        else if (key == "dim") mc.dim = std::stoi(value);
        else if (key == "norm") mc.norm_order = std::stoi(value);
        else throw ConfigError("unknown grid parameter: " + key);
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad grid value for " + key + ": " + value);
    }
}

}  // namespace detail

struct GridCell {
    std::map<std::string, std::string> assignment;
    double valid_mrr = 0.0;
    MetricsReport test_metrics;
};

struct GridOutcome {
    std::vector<GridCell> cells;
    std::size_t best = 0;  // index of the best-validation-MRR cell
};

// Cartesian product over the configured value lists; one seed per cell;
// best cell by validation MRR.
inline GridOutcome cmd_grid(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.grid.empty()) throw ConfigError("grid is empty");
    namespace fs = std::filesystem;
    const KnowledgeGraph kg =
        load_dataset(cfg.train_path, cfg.valid_path, cfg.test_path);
    fs::create_directories(cfg.out_dir);

    std::vector<std::string> keys;
    for (const auto& [k, vs] : cfg.grid) {
        if (vs.empty()) throw ConfigError("grid list for " + k + " is empty");
        keys.push_back(k);
    }

    GridOutcome outcome;
    std::vector<std::size_t> idx(keys.size(), 0);
    while (true) {
        GridCell cell;
        ModelConfig mc = cfg.model;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            const std::string& v = cfg.grid.at(keys[i])[idx[i]];
            detail::apply_grid_value(mc, keys[i], v);
            cell.assignment[keys[i]] = v;
        }
        mc.validate();
        std::mt19937_64 rng(mc.seed);
        RunResult res = run_smart(kg, mc, rng);
        cell.valid_mrr = res.valid_mrr;
        cell.test_metrics = res.test_metrics;
        outcome.cells.push_back(std::move(cell));

        std::size_t carry = 0;
        for (; carry < keys.size(); ++carry) {
            if (++idx[carry] < cfg.grid.at(keys[carry]).size()) break;
            idx[carry] = 0;
        }
        if (carry == keys.size()) break;
    }

    for (std::size_t i = 1; i < outcome.cells.size(); ++i)
        if (outcome.cells[i].valid_mrr > outcome.cells[outcome.best].valid_mrr)
            outcome.best = i;

    std::ofstream out(fs::path(cfg.out_dir) / "grid.tsv", std::ios::binary);
    for (const std::string& k : keys) out << k << '\t';
    out << "valid_mrr\ttest_mrr_x1000\th10\tbest\n";
    for (std::size_t i = 0; i < outcome.cells.size(); ++i) {
        const GridCell& c = outcome.cells[i];
        for (const std::string& k : keys) out << c.assignment.at(k) << '\t';
        out << detail::fmt(c.valid_mrr) << '\t'
            << detail::fmt(c.test_metrics.mrr * 1000.0, 3) << '\t'
            << detail::fmt(c.test_metrics.hits_at.at(10), 4) << '\t'
            << (i == outcome.best ? 1 : 0) << '\n';
    }
    return outcome;
}

// Evaluates a checkpoint on one split of a dataset.
inline MetricsReport cmd_eval(const std::string& checkpoint_path,
                              const ExperimentConfig& cfg,
                              const std::string& split) {
    const KnowledgeGraph kg =
        load_dataset(cfg.train_path, cfg.valid_path, cfg.test_path);
    auto [st, att] = load_checkpoint(checkpoint_path);
    if (st.n_ent != kg.num_entities() || st.n_rel != kg.num_relations())
        throw DataError(
            "checkpoint/dataset vocabulary mismatch: checkpoint has " +
            std::to_string(st.n_ent) + " entities / " +
            std::to_string(st.n_rel) + " relations, dataset has " +
            std::to_string(kg.num_entities()) + " / " +
            std::to_string(kg.num_relations()));
    const std::vector<Triple>* triples = nullptr;
    if (split == "train") triples = &kg.train;
    else if (split == "valid") triples = &kg.valid;
    else if (split == "test") triples = &kg.test;
    else throw ConfigError("unknown split: " + split);
    return evaluate_split(st, att, kg, *triples, cfg.model.norm_order);
}

}  // namespace smartkge

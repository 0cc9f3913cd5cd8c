#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <set>

#include "helpers.hpp"
#include "smartkge/training.hpp"

using namespace smartkge;
using testutil::TempDir;
using testutil::write_tsv;

namespace {

KnowledgeGraph load_lines(
    const std::vector<std::array<std::string, 3>>& train,
    const std::vector<std::array<std::string, 3>>& valid,
    const std::vector<std::array<std::string, 3>>& test) {
    TempDir tmp("training_kg");
    write_tsv(tmp.file("train.tsv"), train);
    write_tsv(tmp.file("valid.tsv"), valid);
    write_tsv(tmp.file("test.tsv"), test);
    return load_dataset(tmp.file("train.tsv"), tmp.file("valid.tsv"),
                        tmp.file("test.tsv"));
}

// A chain a0 -> a1 -> ... -> a{n-1} under one relation: perfectly fit by a
// constant translation.
KnowledgeGraph chain_kg(int n) {
    std::vector<std::array<std::string, 3>> train, valid, test;
    for (int i = 0; i + 1 < n; ++i)
        train.push_back({"a" + std::to_string(i), "next",
                         "a" + std::to_string(i + 1)});
    valid.push_back(train.front());
    test.push_back(train.back());
    return load_lines(train, valid, test);
}

// Straight-line scalar reimplementation of the batch loss. Everything is
// recomputed with std::complex per coordinate, no shared code with the
// library beyond the weight definition. Passing fixed_pj pins the
// adversarial weights, which the backward pass treats as constants — finite
// differences must do the same.
double oracle_loss(const EmbeddingState& st, const AttentionState& att,
                   const Batch& batch, const ModelConfig& cfg,
                   const std::vector<std::vector<double>>* fixed_pj = nullptr) {
    auto delta = [&](const Triple& tr) {
        const auto w = effective_weights(att, tr.relation);
        const int d = st.dim;
        std::vector<std::complex<double>> h(d), t(d), u(d);
        for (int k = 0; k < d; ++k) {
            h[k] = {st.entity_re(tr.head)[k], st.entity_im(tr.head)[k]};
            t[k] = {st.entity_re(tr.tail)[k], st.entity_im(tr.tail)[k]};
            const auto p = st.relation_params(tr.relation);
            u[k] = {p.trans_re[k], p.trans_im[k]};
        }
        const auto p = st.relation_params(tr.relation);
        std::array<double, 4> dist{};
        for (int col = 0; col < 4; ++col) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) {
                std::complex<double> x;
                switch (att.egt_order.slots[static_cast<std::size_t>(col)]) {
                    case Egt::Trans: x = h[k] + u[k]; break;
                    case Egt::Rot: x = std::polar(1.0, p.theta[k]) * h[k]; break;
                    case Egt::Ref:
                        x = std::polar(1.0, 2.0 * p.phi[k]) * std::conj(h[k]);
                        break;
                    case Egt::Scal: x = p.scal[k] * h[k]; break;
                }
                const auto diff = x - t[k];
                acc += (cfg.norm_order == 2) ? std::norm(diff) : std::abs(diff);
            }
            dist[col] = (cfg.norm_order == 2) ? std::sqrt(acc) : acc;
        }
        double s = 0.0;
        for (int col = 0; col < 4; ++col) s += w[col] * dist[col];
        return -s;
    };
    auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

    double loss = 0.0;
    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
        loss -= std::log(sigmoid(cfg.gamma + delta(batch.positives[i])));
        const auto& negs = batch.negatives[i];
        std::vector<double> nd(negs.size()), pj(negs.size());
        double z = 0.0;
        for (std::size_t j = 0; j < negs.size(); ++j) {
            nd[j] = delta(negs[j]);
            pj[j] = std::exp(cfg.alpha * nd[j]);
            z += pj[j];
        }
        for (std::size_t j = 0; j < negs.size(); ++j) {
            const double weight = fixed_pj ? (*fixed_pj)[i][j] : pj[j] / z;
            loss -= weight * std::log(sigmoid(-nd[j] - cfg.gamma));
        }
    }
    loss /= static_cast<double>(batch.positives.size());

    if (cfg.rho > 0.0) {
        std::set<EntityId> touched;
        for (std::size_t i = 0; i < batch.positives.size(); ++i) {
            touched.insert(batch.positives[i].head);
            touched.insert(batch.positives[i].tail);
            for (const Triple& n : batch.negatives[i]) {
                touched.insert(n.head);
                touched.insert(n.tail);
            }
        }
        double sq = 0.0;
        for (EntityId e : touched)
            for (int k = 0; k < st.dim; ++k)
                sq += st.entity_re(e)[k] * st.entity_re(e)[k] +
                      st.entity_im(e)[k] * st.entity_im(e)[k];
        loss += cfg.rho * sq /
                (static_cast<double>(touched.size()) * st.dim);
    }
    return loss;
}

}  // namespace

TEST_CASE("sample_negatives structure") {
    const auto kg = chain_kg(8);
    std::mt19937_64 rng(3);
    const auto negs = sample_negatives(kg, kg.train[2], 4, rng);
    REQUIRE(negs.size() == 4);
    for (const Triple& n : negs) {
        const bool head_changed = n.head != kg.train[2].head;
        const bool tail_changed = n.tail != kg.train[2].tail;
        CHECK(head_changed != tail_changed);  // exactly one slot corrupted
        CHECK(n.relation == kg.train[2].relation);
    }
}

TEST_CASE("sample_negatives with two entities forces the other entity") {
    const auto kg = load_lines({{"a", "r", "b"}}, {{"a", "r", "b"}},
                               {{"a", "r", "b"}});
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<Side> sides;
        const auto negs = sample_negatives(kg, kg.train[0], 1, rng, &sides);
        if (sides[0] == Side::Tail) {
            CHECK(negs[0].tail == kg.train[0].head);
        } else {
            CHECK(negs[0].head == kg.train[0].tail);
        }
    }
}

TEST_CASE("negative replacement entities are uniform") {
    std::vector<std::array<std::string, 3>> train;
    for (int i = 0; i + 1 < 100; ++i)
        train.push_back({"e" + std::to_string(i), "r",
                         "e" + std::to_string(i + 1)});
    const auto kg = load_lines(train, {train[0]}, {train[1]});
    std::mt19937_64 rng(11);
    std::vector<long> hist(kg.num_entities(), 0);
    const Triple pos = kg.train[50];
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        std::vector<Side> sides;
        const auto negs = sample_negatives(kg, pos, 1, rng, &sides);
        hist[static_cast<std::size_t>(sides[0] == Side::Tail ? negs[0].tail
                                                             : negs[0].head)]++;
    }
    // each side excludes one original entity; both halves are uniform over 99
    const double expected = static_cast<double>(draws) / 99.0;
    for (std::size_t e = 0; e < hist.size(); ++e) {
        if (e == static_cast<std::size_t>(pos.head) ||
            e == static_cast<std::size_t>(pos.tail))
            continue;  // excluded on one side each, so ~expected anyway
        CHECK(std::abs(hist[e] - expected) / expected < 0.15);
    }
}

TEST_CASE("adversarial weights: uniform at alpha 0, single negative") {
    // alpha = 0 must reduce to the uniform-weight loss; verified against a
    // direct formula evaluation
    const auto kg = chain_kg(6);
    ModelConfig cfg;
    cfg.dim = 4;
    cfg.alpha = 0.0;
    cfg.gamma = 2.0;
    std::mt19937_64 rng(13);
    auto [st, att] = init_state(kg, cfg, rng);
    Batch batch = sample_batch(kg, 2, 3, rng);
    Gradients g;
    const double loss = self_adversarial_loss(st, att, batch, cfg, g);

    double direct = 0.0;
    auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
        direct -= std::log(
            sigmoid(cfg.gamma + score_triple(st, att, batch.positives[i], 2)));
        for (const Triple& n : batch.negatives[i])
            direct -= (1.0 / 3.0) *
                      std::log(sigmoid(-score_triple(st, att, n, 2) -
                                       cfg.gamma));
    }
    direct /= 2.0;
    CHECK(loss == Catch::Approx(direct).margin(1e-10));

    // a single negative gets weight 1 for any alpha
    cfg.alpha = 7.5;
    Batch single = sample_batch(kg, 1, 1, rng);
    Gradients g2;
    const double l2 = self_adversarial_loss(st, att, single, cfg, g2);
    double want =
        -std::log(sigmoid(cfg.gamma +
                          score_triple(st, att, single.positives[0], 2))) -
        std::log(sigmoid(-score_triple(st, att, single.negatives[0][0], 2) -
                         cfg.gamma));
    CHECK(l2 == Catch::Approx(want).margin(1e-10));
}

TEST_CASE("loss matches the scalar oracle and finite differences") {
    const auto kg = chain_kg(6);
    for (double alpha : {0.0, 1.0}) {
        for (double rho : {0.0, 0.01}) {
            ModelConfig cfg;
            cfg.dim = 4;
            cfg.alpha = alpha;
            cfg.rho = rho;
            cfg.gamma = 1.5;
            std::mt19937_64 rng(17);
            auto [st, att] = init_state(kg, cfg, rng);
            att.mode = AttentionMode::Adaptive;
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            for (double& x : att.logits) x = u(rng);

            Batch batch = sample_batch(kg, 2, 2, rng);
            Gradients g;
            const double loss = self_adversarial_loss(st, att, batch, cfg, g);
            CHECK(loss ==
                  Catch::Approx(oracle_loss(st, att, batch, cfg)).margin(1e-8));

            // finite differences for every parameter class; adversarial
            // weights stay pinned at their center-point values
            std::vector<std::vector<double>> center_pj;
            for (const auto& negs : batch.negatives) {
                std::vector<double> pj(negs.size());
                double z = 0.0;
                for (std::size_t j = 0; j < negs.size(); ++j) {
                    pj[j] = std::exp(
                        cfg.alpha *
                        score_triple(st, att, negs[j], cfg.norm_order));
                    z += pj[j];
                }
                for (double& v : pj) v /= z;
                center_pj.push_back(std::move(pj));
            }
            const double eps = 1e-6;
            auto fd = [&](double* slot) {
                const double orig = *slot;
                *slot = orig + eps;
                const double fp = oracle_loss(st, att, batch, cfg, &center_pj);
                *slot = orig - eps;
                const double fm = oracle_loss(st, att, batch, cfg, &center_pj);
                *slot = orig;
                return (fp - fm) / (2.0 * eps);
            };
            auto check_rows = [&](SparseRows& rows, std::vector<double>& bank,
                                  int width) {
                for (auto& [row, grad] : rows.rows)
                    for (int k = 0; k < width; ++k) {
                        const double numeric =
                            fd(&bank[static_cast<std::size_t>(row) * width + k]);
                        const double denom = std::max(
                            {std::abs(numeric), std::abs(grad[k]), 1e-4});
                        CHECK(std::abs(grad[k] - numeric) / denom < 1e-4);
                    }
            };
            check_rows(g.ent_re, st.ent_re, cfg.dim);
            check_rows(g.ent_im, st.ent_im, cfg.dim);
            check_rows(g.trans_re, st.trans_re, cfg.dim);
            check_rows(g.trans_im, st.trans_im, cfg.dim);
            check_rows(g.rot_theta, st.rot_theta, cfg.dim);
            check_rows(g.ref_phi, st.ref_phi, cfg.dim);
            check_rows(g.scal_s, st.scal_s, cfg.dim);
            check_rows(g.logits, att.logits, 4);
        }
    }
}

TEST_CASE("adam: scalar oracle, zero gradient, determinism") {
    // first step with m = v = 0: update is -lr * g / (|g| + eps_adam)
    std::vector<double> p{1.0}, g{1.0}, m{0.0}, v{0.0};
    adam_update(p, g, m, v, 1, 0.1);
    const double m1 = 0.1 * 1.0;           // (1-beta1)*g
    const double v1 = 0.001 * 1.0;         // (1-beta2)*g^2
    const double mhat = m1 / (1.0 - 0.9);  // bias corrected
    const double vhat = v1 / (1.0 - 0.999);
    const double want = 1.0 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(p[0] == Catch::Approx(want).margin(1e-12));
    CHECK(m[0] == Catch::Approx(m1).margin(1e-15));
    CHECK(v[0] == Catch::Approx(v1).margin(1e-15));

    // an independent scalar Adam recurrence over several steps
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double om = 0.0, ov = 0.0, op = 0.3;
    std::vector<double> lp{0.3}, lm{0.0}, lv{0.0};
    for (long step = 1; step <= 20; ++step) {
        const double grad = u(rng);
        om = 0.9 * om + 0.1 * grad;
        ov = 0.999 * ov + 0.001 * grad * grad;
        op -= 0.05 * (om / (1.0 - std::pow(0.9, step))) /
              (std::sqrt(ov / (1.0 - std::pow(0.999, step))) + 1e-8);
        std::vector<double> gg{grad};
        adam_update(lp, gg, lm, lv, step, 0.05);
        CHECK(lp[0] == Catch::Approx(op).margin(1e-12));
    }

    // zero gradients from fresh moments leave parameters unchanged
    std::vector<double> p2{2.0}, g2{0.0}, m2{0.0}, v2{0.0};
    adam_update(p2, g2, m2, v2, 1, 0.1);
    CHECK(p2[0] == 2.0);

    // identical inputs, identical outputs
    std::vector<double> a{1.0, -2.0}, b{1.0, -2.0}, grads{0.5, 0.25};
    std::vector<double> am{0.1, 0.2}, av{0.3, 0.4}, bm{0.1, 0.2}, bv{0.3, 0.4};
    adam_update(a, grads, am, av, 4, 0.01);
    adam_update(b, grads, bm, bv, 4, 0.01);
    CHECK(a == b);
}

TEST_CASE("run_phase with zero budget echoes the initial validation MRR") {
    const auto kg = chain_kg(6);
    ModelConfig cfg;
    cfg.dim = 4;
    cfg.steps_t = 0;
    std::mt19937_64 rng(29);
    auto [st, att] = init_state(kg, cfg, rng);
    const double mrr0 = evaluate_split(st, att, kg, kg.valid, 2).mrr;
    const auto rep = run_phase(kg, st, att, cfg, Phase::T, rng);
    CHECK(rep.steps_run == 0);
    CHECK(rep.best_valid_mrr == Catch::Approx(mrr0));
    CHECK(rep.best_step == 0);
    CHECK(!rep.stopped_early);
}

TEST_CASE("phase T keeps logits bit-unchanged and fits a translation chain") {
    const auto kg = chain_kg(5);
    ModelConfig cfg;
    cfg.dim = 8;
    cfg.batch = 4;
    cfg.eta = 2;
    cfg.lr = 0.05;
    cfg.gamma = 2.0;
    cfg.steps_t = 200;
    cfg.valid_every = 50;
    cfg.patience = 100;  // keep running
    std::mt19937_64 rng(31);
    auto [st, att] = init_state(kg, cfg, rng);
    const std::vector<double> logits_before = att.logits;
    auto worst_distance = [&] {
        double worst = -1e9;
        for (const Triple& t : kg.train)
            worst = std::max(worst, -score_triple(st, att, t, 2));
        return worst;
    };
    const double before = worst_distance();
    run_phase(kg, st, att, cfg, Phase::T, rng);
    CHECK(att.logits == logits_before);
    // training drives positive scores up on the tiny instance
    CHECK(worst_distance() < before);
}

TEST_CASE("phase preconditions") {
    const auto kg = chain_kg(4);
    ModelConfig cfg;
    cfg.dim = 2;
    cfg.steps_t = 0;
    cfg.steps_ta = 0;
    cfg.steps_f = 0;
    std::mt19937_64 rng(37);
    auto [st, att] = init_state(kg, cfg, rng);
    CHECK_THROWS_AS(run_phase(kg, st, att, cfg, Phase::TA, rng), ConfigError);
    CHECK_THROWS_AS(run_phase(kg, st, att, cfg, Phase::F, rng), ConfigError);
    att.mode = AttentionMode::Adaptive;
    CHECK_THROWS_AS(run_phase(kg, st, att, cfg, Phase::T, rng), ConfigError);
}

TEST_CASE("phase F: pruned banks receive zero gradient and never move") {
    const auto kg = chain_kg(5);
    ModelConfig cfg;
    cfg.dim = 4;
    cfg.batch = 4;
    cfg.eta = 2;
    cfg.steps_f = 30;
    cfg.valid_every = 10;
    cfg.patience = 100;
    std::mt19937_64 rng(41);
    auto [st, att] = init_state(kg, cfg, rng);
    att.mode = AttentionMode::Adaptive;
    att.logits[1] = 3.0;  // relation 0 selects Rot
    att = freeze(att, Variant::Smart);

    // direct gradient check: only the Rot bank is touched
    Batch batch = sample_batch(kg, 4, 2, rng);
    Gradients g;
    self_adversarial_loss(st, att, batch, cfg, g);
    CHECK(g.rot_theta.rows.count(0) == 1);
    CHECK(g.trans_re.rows.empty());
    CHECK(g.ref_phi.rows.empty());
    CHECK(g.scal_s.rows.empty());
    CHECK(g.logits.rows.empty());

    // and over a whole phase the pruned banks stay bit-identical
    const auto trans_before = st.trans_re;
    const auto phi_before = st.ref_phi;
    const auto scal_before = st.scal_s;
    run_phase(kg, st, att, cfg, Phase::F, rng);
    CHECK(st.trans_re == trans_before);
    CHECK(st.ref_phi == phi_before);
    CHECK(st.scal_s == scal_before);
}

TEST_CASE("run_smart: determinism and cross-phase selection contract") {
    const auto kg = chain_kg(6);
    ModelConfig cfg;
    cfg.dim = 4;
    cfg.batch = 4;
    cfg.eta = 2;
    cfg.lr = 0.02;
    cfg.gamma = 2.0;
    cfg.steps_t = 40;
    cfg.steps_ta = 40;
    cfg.steps_f = 40;
    cfg.valid_every = 20;
    cfg.patience = 2;
    cfg.cross_phase_stop = true;

    std::mt19937_64 rng1(43), rng2(43);
    const auto res1 = run_smart(kg, cfg, rng1);
    const auto res2 = run_smart(kg, cfg, rng2);
    CHECK(res1.state.ent_re == res2.state.ent_re);
    CHECK(res1.state.rot_theta == res2.state.rot_theta);
    CHECK(res1.att.frozen_mask == res2.att.frozen_mask);
    CHECK(res1.chosen_phase == res2.chosen_phase);
    CHECK(res1.test_metrics.mrr == res2.test_metrics.mrr);

    // returned model dominates every discarded phase checkpoint
    REQUIRE(res1.reports.size() == 3);
    for (const auto& rep : res1.reports)
        CHECK(res1.valid_mrr >= rep.best_valid_mrr);
}

TEST_CASE("run_smart with preloaded adherence skips phases T and TA") {
    const auto kg = chain_kg(6);
    ModelConfig cfg;
    cfg.dim = 4;
    cfg.batch = 4;
    cfg.eta = 2;
    cfg.steps_t = 50;
    cfg.steps_ta = 50;
    cfg.steps_f = 10;
    cfg.valid_every = 5;
    cfg.patience = 100;
    std::map<RelationId, Egt> selection{{0, Egt::Rot}};
    std::mt19937_64 rng(47);
    const auto res = run_smart(kg, cfg, rng, selection);
    REQUIRE(res.reports.size() == 3);
    CHECK(res.reports[0].steps_run == 0);
    CHECK(res.reports[1].steps_run == 0);
    CHECK(res.reports[2].steps_run > 0);
    CHECK(res.att.mode == AttentionMode::Frozen);
    CHECK(res.att.frozen_mask[1] == 1.0);  // Rot column one-hot
    CHECK(res.selections.at(0) == Egt::Rot);

    // unknown relation id in the table is rejected
    std::map<RelationId, Egt> bad{{5, Egt::Rot}};
    std::mt19937_64 rng2(47);
    CHECK_THROWS_AS(run_smart(kg, cfg, rng2, bad), DataError);
}

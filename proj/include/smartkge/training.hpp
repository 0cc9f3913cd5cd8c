#pragma once
// Negative sampling, the self-adversarial margin loss with analytic
// gradients, Adam, and the three-phase pipeline with early stopping.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "smartkge/evaluation.hpp"
#include "smartkge/geometry.hpp"
#include "smartkge/kgdata.hpp"
#include "smartkge/model.hpp"

namespace smartkge {

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Batch {
    std::vector<Triple> positives;
    std::vector<std::vector<Triple>> negatives;  // eta per positive
    std::vector<std::vector<Side>> corrupted_side;
};

// Uniform raw corruption: one side per negative, replacement entity uniform
// over E \ {original}. Not filtered against the KG.
inline std::vector<Triple> sample_negatives(const KnowledgeGraph& kg,
                                            const Triple& positive, int eta,
                                            std::mt19937_64& rng,
                                            std::vector<Side>* sides = nullptr) {
    const auto n_ent = static_cast<EntityId>(kg.num_entities());
    if (n_ent < 2) throw DataError("sample_negatives: need at least 2 entities");
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<EntityId> ent(0, n_ent - 2);
    std::vector<Triple> out;
    out.reserve(static_cast<std::size_t>(eta));
    for (int i = 0; i < eta; ++i) {
        const Side side = coin(rng) ? Side::Tail : Side::Head;
        const EntityId original = (side == Side::Tail) ? positive.tail
                                                       : positive.head;
        EntityId e = ent(rng);
        if (e >= original) ++e;  // skip the original, stay uniform
        Triple neg = positive;
        (side == Side::Tail ? neg.tail : neg.head) = e;
        out.push_back(neg);
        if (sides) sides->push_back(side);
    }
    return out;
}

inline Batch sample_batch(const KnowledgeGraph& kg, int beta, int eta,
                          std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, kg.train.size() - 1);
    Batch b;
    b.positives.reserve(static_cast<std::size_t>(beta));
    for (int i = 0; i < beta; ++i) b.positives.push_back(kg.train[pick(rng)]);
    for (const Triple& pos : b.positives) {
        std::vector<Side> sides;
        b.negatives.push_back(sample_negatives(kg, pos, eta, rng, &sides));
        b.corrupted_side.push_back(std::move(sides));
    }
    return b;
}

// Sparse per-row gradient accumulators. std::map keys give a deterministic
// application order.
struct SparseRows {
    std::map<std::int32_t, std::vector<double>> rows;

    std::vector<double>& row(std::int32_t r, std::size_t width) {
        auto [it, inserted] = rows.try_emplace(r);
        if (inserted) it->second.assign(width, 0.0);
        return it->second;
    }
};

struct Gradients {
    SparseRows ent_re, ent_im;
    SparseRows trans_re, trans_im;
    SparseRows rot_theta, ref_phi, scal_s;
    SparseRows logits;  // rows of width 4
};

namespace detail {

inline double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double log_sigmoid(double x) {
    // log sigma(x) = -softplus(-x)
    if (x >= 0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

inline SparseRows& bank_for(Gradients& g, Egt kind) {
    switch (kind) {
        case Egt::Trans: return g.trans_re;  // re half; im handled separately
        case Egt::Rot: return g.rot_theta;
        case Egt::Ref: return g.ref_phi;
        case Egt::Scal: return g.scal_s;
    }
    throw std::logic_error("bank_for: bad tag");
}

// Accumulates coef * dDelta/d(everything) for one triple.
inline void backprop_triple(const EmbeddingState& st, const AttentionState& att,
                            const Triple& tr, int p, double coef,
                            const std::array<double, 4>& weights,
                            const std::array<double, 4>& dists, Gradients& g) {
    const std::size_t d = static_cast<std::size_t>(st.dim);
    const auto params = st.relation_params(tr.relation);
    auto& gh_re = g.ent_re.row(tr.head, d);
    auto& gh_im = g.ent_im.row(tr.head, d);
    auto& gt_re = g.ent_re.row(tr.tail, d);
    auto& gt_im = g.ent_im.row(tr.tail, d);

    for (int j = 0; j < 4; ++j) {
        const double c = -coef * weights[static_cast<std::size_t>(j)];
        if (c == 0.0) continue;
        const Egt kind = att.egt_order.slots[static_cast<std::size_t>(j)];
        EgtGradSink sink;
        sink.param_re = bank_for(g, kind).row(tr.relation, d);
        if (kind == Egt::Trans)
            sink.param_im = g.trans_im.row(tr.relation, d);
        sink.h_re = gh_re;
        sink.h_im = gh_im;
        sink.t_re = gt_re;
        sink.t_im = gt_im;
        egt_distance_backward(kind, params, st.entity_re(tr.head),
                              st.entity_im(tr.head), st.entity_re(tr.tail),
                              st.entity_im(tr.tail), p, c, sink);
    }

    if (att.mode == AttentionMode::Adaptive) {
        // dDelta/dlogit_k = -w_k * (d_k - sum_j w_j d_j)
        double s = 0.0;
        for (int j = 0; j < 4; ++j) s += weights[j] * dists[j];
        auto& row = g.logits.row(tr.relation, 4);
        for (int j = 0; j < 4; ++j)
            row[j] += coef * (-weights[j] * (dists[j] - s));
    }
}

}  // namespace detail

// L = mean_i [ -log s(gamma + Delta(pos_i))
//              - sum_j p_ij log s(-Delta(neg_ij) - gamma) ]
//     + rho * mean squared modulus of batch-touched entity embeddings,
// p_ij = softmax_j(alpha * Delta(neg_ij)), treated as constant in backward.
inline double self_adversarial_loss(const EmbeddingState& st,
                                    const AttentionState& att,
                                    const Batch& batch,
                                    const ModelConfig& config, Gradients& g) {
    const int p = config.norm_order;
    const double inv_beta = 1.0 / static_cast<double>(batch.positives.size());
    double loss = 0.0;

    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
        const Triple& pos = batch.positives[i];
        const auto weights = effective_weights(att, pos.relation);
        const auto pos_d = per_egt_distances(st, att.egt_order, pos, p);
        const double delta_pos = combine_distances(weights, pos_d);

        const auto& negs = batch.negatives[i];
        std::vector<double> neg_delta(negs.size());
        std::vector<std::array<double, 4>> neg_dists(negs.size());
        for (std::size_t j = 0; j < negs.size(); ++j) {
            neg_dists[j] = per_egt_distances(st, att.egt_order, negs[j], p);
            neg_delta[j] = combine_distances(weights, neg_dists[j]);
        }

        // adversarial weights, constant in the backward pass
        std::vector<double> pj(negs.size());
        double mx = -std::numeric_limits<double>::infinity();
        for (double nd : neg_delta) mx = std::max(mx, config.alpha * nd);
        double z = 0.0;
        for (std::size_t j = 0; j < negs.size(); ++j) {
            pj[j] = std::exp(config.alpha * neg_delta[j] - mx);
            z += pj[j];
        }
        for (double& v : pj) v /= z;

        loss -= inv_beta * detail::log_sigmoid(config.gamma + delta_pos);
        const double c_pos =
            -inv_beta * detail::stable_sigmoid(-(config.gamma + delta_pos));
        detail::backprop_triple(st, att, pos, p, c_pos, weights, pos_d, g);

        for (std::size_t j = 0; j < negs.size(); ++j) {
            loss -= inv_beta * pj[j] *
                    detail::log_sigmoid(-neg_delta[j] - config.gamma);
            const double c_neg =
                inv_beta * pj[j] *
                detail::stable_sigmoid(neg_delta[j] + config.gamma);
            detail::backprop_triple(st, att, negs[j], p, c_neg, weights,
                                    neg_dists[j], g);
        }
    }

    if (config.rho > 0.0) {
        // touched entity rows were registered by backprop_triple
        const std::size_t n_rows = g.ent_re.rows.size();
        const double scale =
            config.rho / (static_cast<double>(n_rows) * st.dim);
        double sq = 0.0;
        for (auto& [row, grad_re] : g.ent_re.rows) {
            auto re = st.entity_re(row);
            auto im = st.entity_im(row);
            auto& grad_im = g.ent_im.row(row, re.size());
            for (std::size_t k = 0; k < re.size(); ++k) {
                sq += re[k] * re[k] + im[k] * im[k];
                grad_re[k] += 2.0 * scale * re[k];
                grad_im[k] += 2.0 * scale * im[k];
            }
        }
        loss += scale * sq;
    }

    if (!std::isfinite(loss))
        throw DivergenceError("non-finite training loss");
    return loss;
}

// --- Adam -------------------------------------------------------------------

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One bias-corrected Adam update over a parameter slice; `step` starts at 1.
inline void adam_update(std::span<double> params, std::span<const double> grads,
                        std::span<double> m, std::span<double> v, long step,
                        double lr) {
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * grads[k];
        v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * grads[k] * grads[k];
        const double m_hat = m[k] / bc1;
        const double v_hat = v[k] / bc2;
        params[k] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
}

// Lazy per-row Adam over all banks; moments live alongside the state.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t n_ent, std::size_t n_rel, int dim) {
        const std::size_t ne = n_ent * static_cast<std::size_t>(dim);
        const std::size_t nr = n_rel * static_cast<std::size_t>(dim);
        ent_re_.init(ne); ent_im_.init(ne);
        trans_re_.init(nr); trans_im_.init(nr);
        rot_theta_.init(nr); ref_phi_.init(nr); scal_s_.init(nr);
        logits_.init(n_rel * 4);
        dim_ = dim;
    }

    long step_count() const { return step_; }

    void apply(EmbeddingState& st, AttentionState& att, const Gradients& g,
               double lr) {
        ++step_;
        apply_bank(st.ent_re, g.ent_re, ent_re_, dim_, lr);
        apply_bank(st.ent_im, g.ent_im, ent_im_, dim_, lr);
        apply_bank(st.trans_re, g.trans_re, trans_re_, dim_, lr);
        apply_bank(st.trans_im, g.trans_im, trans_im_, dim_, lr);
        apply_bank(st.rot_theta, g.rot_theta, rot_theta_, dim_, lr);
        apply_bank(st.ref_phi, g.ref_phi, ref_phi_, dim_, lr);
        apply_bank(st.scal_s, g.scal_s, scal_s_, dim_, lr);
        apply_bank(att.logits, g.logits, logits_, 4, lr);
        for (const auto& [r, unused] : g.scal_s.rows) {
            auto row = std::span<double>(
                st.scal_s.data() + static_cast<std::size_t>(r) * dim_,
                static_cast<std::size_t>(dim_));
            for (double& s : row)
                if (std::abs(s) < kScalFloor) s = std::copysign(kScalFloor, s);
        }
    }

private:
    struct Moments {
        std::vector<double> m, v;
        void init(std::size_t n) { m.assign(n, 0.0); v.assign(n, 0.0); }
    };

    void apply_bank(std::vector<double>& params, const SparseRows& grads,
                    Moments& mo, int width, double lr) {
        for (const auto& [r, grad] : grads.rows) {
            const std::size_t off = static_cast<std::size_t>(r) * width;
            adam_update({params.data() + off, grad.size()}, grad,
                        {mo.m.data() + off, grad.size()},
                        {mo.v.data() + off, grad.size()}, step_, lr);
        }
    }

    Moments ent_re_, ent_im_, trans_re_, trans_im_, rot_theta_, ref_phi_,
        scal_s_, logits_;
    long step_ = 0;
    int dim_ = 0;
};

// --- phases -----------------------------------------------------------------

enum class Phase { T, TA, F };

inline const char* phase_name(Phase ph) {
    switch (ph) {
        case Phase::T: return "T";
        case Phase::TA: return "TA";
        case Phase::F: return "F";
    }
    return "?";
}

struct PhaseReport {
    Phase phase = Phase::T;
    long steps_run = 0;
    double best_valid_mrr = 0.0;
    long best_step = 0;
    bool stopped_early = false;
};

// Runs one phase up to its step budget, validating every `valid_every`
// steps and restoring the best-MRR checkpoint on exit. Which parameters
// move follows from the attention mode: Fixed/Frozen weights carry no
// logit gradient, and Frozen zero weights kill the pruned banks' gradients.
inline PhaseReport run_phase(const KnowledgeGraph& kg, EmbeddingState& st,
                             AttentionState& att, const ModelConfig& config,
                             Phase phase, std::mt19937_64& rng,
                             std::ostream* log = nullptr) {
    switch (phase) {
        case Phase::T:
            if (att.mode != AttentionMode::Fixed)
                throw ConfigError("phase T requires fixed attention");
            break;
        case Phase::TA:
            if (att.mode != AttentionMode::Adaptive)
                throw ConfigError("phase TA requires adaptive attention");
            break;
        case Phase::F:
            if (att.mode != AttentionMode::Frozen)
                throw ConfigError("phase F requires frozen attention");
            break;
    }
    const long max_steps = phase == Phase::T ? config.steps_t
                         : phase == Phase::TA ? config.steps_ta
                                              : config.steps_f;

    PhaseReport rep;
    rep.phase = phase;
    rep.best_valid_mrr =
        evaluate_split(st, att, kg, kg.valid, config.norm_order).mrr;
    rep.best_step = 0;
    EmbeddingState best_st = st;
    AttentionState best_att = att;

    if (log) *log << "step\tloss\tvalid_mrr\n";

    AdamOptimizer opt(st.n_ent, st.n_rel, st.dim);
    int evals_without_improvement = 0;
    double last_loss = 0.0;
    for (long step = 1; step <= max_steps; ++step) {
        Batch batch = sample_batch(kg, config.batch, config.eta, rng);
        Gradients g;
        last_loss = self_adversarial_loss(st, att, batch, config, g);
        opt.apply(st, att, g, config.lr);
        rep.steps_run = step;

        if (step % config.valid_every == 0 || step == max_steps) {
            const double mrr =
                evaluate_split(st, att, kg, kg.valid, config.norm_order).mrr;
            if (log)
                *log << step << '\t' << last_loss << '\t' << mrr << '\n';
            if (mrr > rep.best_valid_mrr) {
                rep.best_valid_mrr = mrr;
                rep.best_step = step;
                best_st = st;
                best_att = att;
                evals_without_improvement = 0;
            } else if (++evals_without_improvement >= config.patience) {
                rep.stopped_early = true;
                break;
            }
        }
    }

    st = std::move(best_st);
    att = std::move(best_att);
    return rep;
}

struct RunResult {
    EmbeddingState state;
    AttentionState att;
    std::vector<PhaseReport> reports;
    MetricsReport test_metrics;
    double valid_mrr = 0.0;
    std::map<RelationId, Egt> selections;  // Eq.-(3) argmax at freeze time
    std::string chosen_phase;              // "T", "TA" or "F"
};

struct PhaseLogs {
    std::ostream* t = nullptr;
    std::ostream* ta = nullptr;
    std::ostream* f = nullptr;
};

// Full pipeline: T -> TA -> freeze(variant) -> F. With preloaded per-relation
// selections the first two phases are skipped and only F runs. With
// cross-phase stopping enabled the phase-end checkpoint with the best
// validation MRR is returned.
inline RunResult run_smart(
    const KnowledgeGraph& kg, const ModelConfig& config, std::mt19937_64& rng,
    const std::optional<std::map<RelationId, Egt>>& preloaded = std::nullopt,
    const PhaseLogs& logs = {}) {
    config.validate();
    RunResult res;
    auto [st, att] = init_state(kg, config, rng);

    struct Candidate {
        std::string phase;
        double valid_mrr;
        EmbeddingState st;
        AttentionState att;
    };
    std::vector<Candidate> candidates;

    if (preloaded) {
        for (const auto& [r, tag] : *preloaded)
            if (r < 0 || static_cast<std::size_t>(r) >= kg.num_relations())
                throw DataError("adherence table references unknown relation " +
                                std::to_string(r));
        res.selections = *preloaded;
        res.reports.push_back(PhaseReport{Phase::T, 0, 0.0, 0, false});
        res.reports.push_back(PhaseReport{Phase::TA, 0, 0.0, 0, false});
        att = frozen_from_selection(kg.num_relations(), config.egt_order,
                                    *preloaded);
    } else {
        PhaseReport rt = run_phase(kg, st, att, config, Phase::T, rng, logs.t);
        res.reports.push_back(rt);
        candidates.push_back({"T", rt.best_valid_mrr, st, att});

        att.mode = AttentionMode::Adaptive;
        PhaseReport rta =
            run_phase(kg, st, att, config, Phase::TA, rng, logs.ta);
        res.reports.push_back(rta);
        candidates.push_back({"TA", rta.best_valid_mrr, st, att});

        for (std::size_t r = 0; r < kg.num_relations(); ++r)
            res.selections[static_cast<RelationId>(r)] =
                select_egt(att, static_cast<RelationId>(r));
        att = freeze(att, config.variant, config.epsilon);
    }

    PhaseReport rf = run_phase(kg, st, att, config, Phase::F, rng, logs.f);
    res.reports.push_back(rf);
    candidates.push_back({"F", rf.best_valid_mrr, std::move(st), std::move(att)});

    std::size_t pick = candidates.size() - 1;
    if (config.cross_phase_stop) {
        pick = 0;
        for (std::size_t i = 1; i < candidates.size(); ++i)
            if (candidates[i].valid_mrr > candidates[pick].valid_mrr) pick = i;
    }
    res.chosen_phase = candidates[pick].phase;
    res.valid_mrr = candidates[pick].valid_mrr;
    res.state = std::move(candidates[pick].st);
    res.att = std::move(candidates[pick].att);
    res.test_metrics =
        evaluate_split(res.state, res.att, kg, kg.test, config.norm_order);
    return res;
}

}  // namespace smartkge

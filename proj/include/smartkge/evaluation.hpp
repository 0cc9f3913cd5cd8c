#pragma once
// Filtered link-prediction ranking and MRR / Hits@N computation.

#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "smartkge/kgdata.hpp"
#include "smartkge/model.hpp"

namespace smartkge {

struct RankResult {
    Triple triple;
    Side side = Side::Tail;
    long rank = 1;  // filtered, tie-averaged, rounded half up
};

struct MetricsReport {
    double mrr = 0.0;
    std::map<int, double> hits_at;  // N -> fraction, N in {1, 3, 10}
    std::size_t n_queries = 0;
};

// Scores every candidate substitution on `side`, excluding entities known
// true in any split (the query's own answer stays in).
inline RankResult rank_query(const EmbeddingState& st,
                             const AttentionState& att,
                             const KnowledgeGraph& kg, const Triple& tr,
                             Side side, int p) {
    const EntityId truth = (side == Side::Tail) ? tr.tail : tr.head;
    const EntityId anchor = (side == Side::Tail) ? tr.head : tr.tail;
    const auto& known = kg.filtered_candidates(anchor, tr.relation, side);

    Triple probe = tr;
    const double true_score = score_triple(st, att, tr, p);
    long higher = 0, equal = 0;
    const auto n_ent = static_cast<EntityId>(kg.num_entities());
    for (EntityId e = 0; e < n_ent; ++e) {
        if (e == truth) continue;
        if (known.count(e)) continue;
        if (side == Side::Tail) probe.tail = e; else probe.head = e;
        const double s = score_triple(st, att, probe, p);
        if (s > true_score) ++higher;
        else if (s == true_score) ++equal;
    }
    const double raw = 1.0 + static_cast<double>(higher) +
                       static_cast<double>(equal) / 2.0;
    return RankResult{tr, side, static_cast<long>(std::floor(raw + 0.5))};
}

inline MetricsReport compute_metrics(const std::vector<RankResult>& ranks) {
    if (ranks.empty()) throw DataError("compute_metrics: empty rank list");
    MetricsReport rep;
    rep.n_queries = ranks.size();
    std::map<int, long> hit_counts{{1, 0}, {3, 0}, {10, 0}};
    double rr_sum = 0.0;
    for (const RankResult& r : ranks) {
        rr_sum += 1.0 / static_cast<double>(r.rank);
        for (auto& [n, cnt] : hit_counts)
            if (r.rank <= n) ++cnt;
    }
    rep.mrr = rr_sum / static_cast<double>(ranks.size());
    for (auto& [n, cnt] : hit_counts)
        rep.hits_at[n] =
            static_cast<double>(cnt) / static_cast<double>(ranks.size());
    return rep;
}

// One head-side and one tail-side query per triple.
inline std::vector<RankResult> rank_split(const EmbeddingState& st,
                                          const AttentionState& att,
                                          const KnowledgeGraph& kg,
                                          const std::vector<Triple>& split,
                                          int p) {
    std::vector<RankResult> out;
    out.reserve(split.size() * 2);
    for (const Triple& t : split) {
        out.push_back(rank_query(st, att, kg, t, Side::Tail, p));
        out.push_back(rank_query(st, att, kg, t, Side::Head, p));
    }
    return out;
}

inline MetricsReport evaluate_split(const EmbeddingState& st,
                                    const AttentionState& att,
                                    const KnowledgeGraph& kg,
                                    const std::vector<Triple>& split, int p) {
    return compute_metrics(rank_split(st, att, kg, split, p));
}

}  // namespace smartkge

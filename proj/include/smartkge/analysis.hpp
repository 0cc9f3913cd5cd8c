#pragma once
// Multi-run adherence aggregation, adherence persistence/transfer, and the
// relational-pattern analyzer (symmetry, inversion, composition).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <tuple>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "smartkge/geometry.hpp"
#include "smartkge/kgdata.hpp"
#include "smartkge/model.hpp"

namespace smartkge {

// Per-relation fraction of runs selecting each EGT; rows indexed by the
// canonical tag (Trans, Rot, Ref, Scal) and sum to 1.
struct AdherenceTable {
    std::map<RelationId, std::array<double, 4>> rows;
    int n_runs = 0;

    const std::array<double, 4>& row(RelationId r) const {
        auto it = rows.find(r);
        if (it == rows.end())
            throw DataError("no adherence row for relation " +
                            std::to_string(r));
        return it->second;
    }

    // argmax selection with ties broken by the given order
    Egt select(RelationId r, const EgtOrder& order) const {
        const auto& a = row(r);
        Egt best = order.slots[0];
        for (int c = 1; c < 4; ++c) {
            const Egt cand = order.slots[static_cast<std::size_t>(c)];
            if (a[static_cast<std::size_t>(static_cast<int>(cand))] >
                a[static_cast<std::size_t>(static_cast<int>(best))])
                best = cand;
        }
        return best;
    }

    std::map<RelationId, Egt> selections(const EgtOrder& order) const {
        std::map<RelationId, Egt> out;
        for (const auto& [r, unused] : rows) out[r] = select(r, order);
        return out;
    }
};

inline AdherenceTable compute_adherence(
    const std::vector<std::map<RelationId, Egt>>& run_selections) {
    if (run_selections.empty())
        throw ConfigError("compute_adherence: need at least one run");
    AdherenceTable table;
    table.n_runs = static_cast<int>(run_selections.size());
    for (const auto& [r, unused] : run_selections.front())
        table.rows[r] = {0.0, 0.0, 0.0, 0.0};
    for (const auto& run : run_selections) {
        if (run.size() != table.rows.size())
            throw DataError("compute_adherence: runs cover different relations");
        for (const auto& [r, tag] : run) {
            auto it = table.rows.find(r);
            if (it == table.rows.end())
                throw DataError(
                    "compute_adherence: runs cover different relations");
            it->second[static_cast<std::size_t>(static_cast<int>(tag))] +=
                1.0 / table.n_runs;
        }
    }
    return table;
}

// TSV rows: relation_label, then the four fractions in `order`.
// Fractions are written with 12 decimal digits.
inline void save_adherence(const std::string& path, const AdherenceTable& table,
                           const KnowledgeGraph& kg, const EgtOrder& order) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write adherence file: " + path);
    char buf[64];
    for (const auto& [r, a] : table.rows) {
        out << kg.relations.labels.at(static_cast<std::size_t>(r));
        for (int c = 0; c < 4; ++c) {
            const Egt tag = order.slots[static_cast<std::size_t>(c)];
            std::snprintf(buf, sizeof buf, "%.12f",
                          a[static_cast<std::size_t>(static_cast<int>(tag))]);
            out << '\t' << buf;
        }
        out << '\n';
    }
}

// Adherence is dimension-free: a table saved from one embedding dimension
// loads against any KG sharing the relation vocabulary.
inline AdherenceTable load_adherence(const std::string& path,
                                     const KnowledgeGraph& kg,
                                     const EgtOrder& order, int n_runs = 1) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open adherence file: " + path);
    AdherenceTable table;
    table.n_runs = n_runs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string label;
        if (!std::getline(ss, label, '\t'))
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": bad adherence row");
        const RelationId r = kg.relations.lookup(label);
        std::array<double, 4> a{};
        double sum = 0.0;
        for (int c = 0; c < 4; ++c) {
            std::string field;
            if (!std::getline(ss, field, '\t'))
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": expected 4 fractions");
            const double v = std::stod(field);
            if (v < 0.0 || v > 1.0)
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": fraction out of [0,1]");
            a[static_cast<std::size_t>(static_cast<int>(
                order.slots[static_cast<std::size_t>(c)]))] = v;
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": adherence row does not sum to 1");
        table.rows[r] = a;
    }
    if (table.rows.empty()) throw DataError("empty adherence file: " + path);
    return table;
}

// --- relational patterns ----------------------------------------------------

struct CompositionHit {
    RelationId r1 = 0, r2 = 0, r3 = 0;
    long support = 0;
};

struct PatternProfile {
    RelationId relation = 0;
    double symmetry_score = 0.0;  // fraction of pairs present in both directions
    std::map<RelationId, double> inversion_partners;
    std::vector<CompositionHit> composition_hits;
};

// Symmetry, inversion overlap and composition-rule support over the train
// split. Composition rules are counted per path instance (h, r1, m, r2, t)
// whose closure (h, r3, t) is present; rules below min_support are dropped.
inline std::vector<PatternProfile> analyze_patterns(const KnowledgeGraph& kg,
                                                    long min_support = 10) {
    if (kg.train.empty()) throw DataError("analyze_patterns: empty train split");
    const std::size_t n_rel = kg.num_relations();

    auto pair_key = [](EntityId h, EntityId t) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(h))
                << 32) |
               static_cast<std::uint32_t>(t);
    };

    // (h, t) -> relations, per relation pair set, head index
    std::vector<std::unordered_set<std::uint64_t>> pairs(n_rel);
    std::unordered_map<std::uint64_t, std::vector<RelationId>> rel_by_pair;
    std::unordered_map<EntityId, std::vector<Triple>> by_head;
    for (const Triple& t : kg.train) {
        pairs[static_cast<std::size_t>(t.relation)].insert(
            pair_key(t.head, t.tail));
        rel_by_pair[pair_key(t.head, t.tail)].push_back(t.relation);
        by_head[t.head].push_back(t);
    }

    std::vector<PatternProfile> out(n_rel);
    for (std::size_t r = 0; r < n_rel; ++r) {
        PatternProfile& prof = out[r];
        prof.relation = static_cast<RelationId>(r);
        const auto& ps = pairs[r];
        if (ps.empty()) continue;
        long sym = 0;
        std::vector<long> inv(n_rel, 0);
        for (std::uint64_t key : ps) {
            const EntityId h = static_cast<EntityId>(key >> 32);
            const EntityId t = static_cast<EntityId>(key & 0xffffffffu);
            if (ps.count(pair_key(t, h))) ++sym;
            for (std::size_t r2 = 0; r2 < n_rel; ++r2)
                if (pairs[r2].count(pair_key(t, h))) ++inv[r2];
        }
        prof.symmetry_score = static_cast<double>(sym) / ps.size();
        for (std::size_t r2 = 0; r2 < n_rel; ++r2)
            if (inv[r2] > 0)
                prof.inversion_partners[static_cast<RelationId>(r2)] =
                    static_cast<double>(inv[r2]) / ps.size();
    }

    // composition support: join on the middle entity
    std::map<std::tuple<RelationId, RelationId, RelationId>, long> support;
    for (const Triple& first : kg.train) {
        auto it = by_head.find(first.tail);
        if (it == by_head.end()) continue;
        for (const Triple& second : it->second) {
            auto closed = rel_by_pair.find(pair_key(first.head, second.tail));
            if (closed == rel_by_pair.end()) continue;
            for (RelationId r3 : closed->second)
                ++support[{first.relation, second.relation, r3}];
        }
    }
    for (const auto& [rule, count] : support) {
        if (count < min_support) continue;
        const auto [r1, r2, r3] = rule;
        out[static_cast<std::size_t>(r1)].composition_hits.push_back(
            CompositionHit{r1, r2, r3, count});
    }
    return out;
}

// Table-6-style rendering: adherence percentages per relation plus pattern
// cross-checks. A relation with symmetry_score > 0.9 whose adherence argmax
// is Trans or Scal gets flagged.
inline std::string adherence_report(const AdherenceTable& adh,
                                    const std::vector<PatternProfile>& profiles,
                                    const KnowledgeGraph& kg,
                                    const EgtOrder& order,
                                    bool markdown = false) {
    std::map<RelationId, const PatternProfile*> by_rel;
    for (const auto& p : profiles) by_rel[p.relation] = &p;

    std::ostringstream out;
    const char* sep = markdown ? " | " : "\t";
    if (markdown) out << "| ";
    out << "relation";
    for (int c = 0; c < 4; ++c)
        out << sep << egt_name(order.slots[static_cast<std::size_t>(c)]);
    out << sep << "symmetry" << sep << "flag";
    if (markdown) out << " |";
    out << '\n';
    if (markdown) out << "|---|---|---|---|---|---|---|\n";

    char buf[64];
    for (const auto& [r, a] : adh.rows) {
        if (markdown) out << "| ";
        out << kg.relations.labels.at(static_cast<std::size_t>(r));
        for (int c = 0; c < 4; ++c) {
            const Egt tag = order.slots[static_cast<std::size_t>(c)];
            std::snprintf(buf, sizeof buf, "%.1f",
                          100.0 *
                              a[static_cast<std::size_t>(static_cast<int>(tag))]);
            out << sep << buf;
        }
        double symmetry = 0.0;
        auto it = by_rel.find(r);
        if (it != by_rel.end()) symmetry = it->second->symmetry_score;
        std::snprintf(buf, sizeof buf, "%.3f", symmetry);
        const Egt chosen = adh.select(r, order);
        const bool flagged = symmetry > 0.9 &&
                             (chosen == Egt::Trans || chosen == Egt::Scal);
        out << sep << buf << sep << (flagged ? "SYMMETRY-MISMATCH" : "-");
        if (markdown) out << " |";
        out << '\n';
    }
    return out.str();
}

}  // namespace smartkge

#pragma once
// Benchmark triple files -> vocabularies, splits, and the filtered-ranking
// index. Files are plain TSV: head \t relation \t tail, one triple per line.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace smartkge {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    bool operator==(const Triple&) const = default;
};

enum class Side { Head, Tail };

struct Vocabulary {
    std::vector<std::string> labels;
    std::unordered_map<std::string, std::int32_t> ids;

    std::int32_t intern(const std::string& label) {
        auto it = ids.find(label);
        if (it != ids.end()) return it->second;
        auto id = static_cast<std::int32_t>(labels.size());
        labels.push_back(label);
        ids.emplace(label, id);
        return id;
    }

    std::int32_t lookup(const std::string& label) const {
        auto it = ids.find(label);
        if (it == ids.end())
            throw DataError("unknown label: " + label);
        return it->second;
    }

    std::size_t size() const { return labels.size(); }
};

class KnowledgeGraph {
public:
    Vocabulary entities;
    Vocabulary relations;
    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;

    std::size_t num_entities() const { return entities.size(); }
    std::size_t num_relations() const { return relations.size(); }

    // All entity-ids e such that substituting e on `side` of
    // (query_entity, relation, .) yields a triple present in any split.
    const std::unordered_set<EntityId>& filtered_candidates(
        EntityId query_entity, RelationId relation, Side side) const {
        static const std::unordered_set<EntityId> kEmpty;
        auto it = filter_index_.find(filter_key(query_entity, relation, side));
        return it == filter_index_.end() ? kEmpty : it->second;
    }

    bool contains(const Triple& t) const {
        const auto& s = filtered_candidates(t.head, t.relation, Side::Tail);
        return s.count(t.tail) != 0;
    }

    void build_filter_index() {
        filter_index_.clear();
        for (const auto* split : {&train, &valid, &test})
            for (const Triple& t : *split) {
                filter_index_[filter_key(t.head, t.relation, Side::Tail)]
                    .insert(t.tail);
                filter_index_[filter_key(t.tail, t.relation, Side::Head)]
                    .insert(t.head);
            }
    }

private:
    static std::uint64_t filter_key(EntityId e, RelationId r, Side side) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e)) << 33) |
               (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 1) |
               (side == Side::Tail ? 1u : 0u);
    }

    std::unordered_map<std::uint64_t, std::unordered_set<EntityId>> filter_index_;
};

namespace detail {

inline void load_split(const std::string& path, KnowledgeGraph& kg,
                       std::vector<Triple>& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open triple file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab1 = line.find('\t');
        const std::size_t tab2 =
            tab1 == std::string::npos ? std::string::npos
                                      : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos ||
            line.find('\t', tab2 + 1) != std::string::npos) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected 3 tab-separated fields");
        }
        Triple t;
        t.head = kg.entities.intern(line.substr(0, tab1));
        t.relation = kg.relations.intern(line.substr(tab1 + 1, tab2 - tab1 - 1));
        t.tail = kg.entities.intern(line.substr(tab2 + 1));
        out.push_back(t);
    }
}

}  // namespace detail

// Entity/relation ids are assigned in first-appearance order over
// train -> valid -> test.
inline KnowledgeGraph load_dataset(const std::string& train_path,
                                   const std::string& valid_path,
                                   const std::string& test_path) {
    KnowledgeGraph kg;
    detail::load_split(train_path, kg, kg.train);
    detail::load_split(valid_path, kg, kg.valid);
    detail::load_split(test_path, kg, kg.test);
    if (kg.train.empty())
        throw ConfigError("empty train split: " + train_path);
    kg.build_filter_index();
    return kg;
}

}  // namespace smartkge

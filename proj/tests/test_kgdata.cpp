#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "helpers.hpp"
#include "smartkge/kgdata.hpp"

using namespace smartkge;
using testutil::TempDir;
using testutil::write_tsv;

TEST_CASE("minimal one-line dataset") {
    TempDir tmp("kgdata_min");
    write_tsv(tmp.file("train.tsv"), {{"a", "r", "b"}});
    write_tsv(tmp.file("valid.tsv"), {});
    write_tsv(tmp.file("test.tsv"), {});
    const auto kg = load_dataset(tmp.file("train.tsv"), tmp.file("valid.tsv"),
                                 tmp.file("test.tsv"));
    CHECK(kg.num_entities() == 2);
    CHECK(kg.num_relations() == 1);
    CHECK(kg.train.size() == 1);
    CHECK(kg.valid.empty());
    CHECK(kg.entities.labels[0] == "a");
    CHECK(kg.entities.labels[1] == "b");
}

TEST_CASE("ids assigned in first-appearance order across splits") {
    TempDir tmp("kgdata_order");
    write_tsv(tmp.file("train.tsv"), {{"x", "r1", "y"}, {"y", "r2", "z"}});
    write_tsv(tmp.file("valid.tsv"), {{"w", "r1", "x"}});
    write_tsv(tmp.file("test.tsv"), {{"v", "r3", "w"}});
    const auto kg = load_dataset(tmp.file("train.tsv"), tmp.file("valid.tsv"),
                                 tmp.file("test.tsv"));
    CHECK(kg.entities.labels ==
          std::vector<std::string>{"x", "y", "z", "w", "v"});
    CHECK(kg.relations.labels == std::vector<std::string>{"r1", "r2", "r3"});
    // round-trip: every id decodes back to its input label
    for (const auto* split : {&kg.train, &kg.valid, &kg.test})
        for (const Triple& t : *split) {
            CHECK(kg.entities.lookup(kg.entities.labels[t.head]) == t.head);
            CHECK(kg.relations.lookup(kg.relations.labels[t.relation]) ==
                  t.relation);
        }
}

TEST_CASE("malformed lines and empty train are rejected") {
    TempDir tmp("kgdata_err");
    std::ofstream(tmp.file("bad.tsv")) << "a\tr\n";
    write_tsv(tmp.file("empty.tsv"), {});
    write_tsv(tmp.file("ok.tsv"), {{"a", "r", "b"}});
    CHECK_THROWS_WITH(
        load_dataset(tmp.file("bad.tsv"), tmp.file("empty.tsv"),
                     tmp.file("empty.tsv")),
        Catch::Matchers::ContainsSubstring(":1:"));
    CHECK_THROWS_AS(load_dataset(tmp.file("empty.tsv"), tmp.file("ok.tsv"),
                                 tmp.file("ok.tsv")),
                    ConfigError);

    std::ofstream(tmp.file("four.tsv")) << "a\tr\tb\tc\n";
    CHECK_THROWS_AS(load_dataset(tmp.file("four.tsv"), tmp.file("empty.tsv"),
                                 tmp.file("empty.tsv")),
                    DataError);
}

TEST_CASE("labels keep surrounding whitespace; tab is the only separator") {
    TempDir tmp("kgdata_ws");
    std::ofstream(tmp.file("train.tsv")) << " a \tr\tb c\n";
    write_tsv(tmp.file("empty.tsv"), {});
    const auto kg = load_dataset(tmp.file("train.tsv"), tmp.file("empty.tsv"),
                                 tmp.file("empty.tsv"));
    CHECK(kg.entities.labels[0] == " a ");
    CHECK(kg.entities.labels[1] == "b c");
}

TEST_CASE("filtered_candidates direct lookups") {
    TempDir tmp("kgdata_filter");
    write_tsv(tmp.file("train.tsv"), {{"a", "r", "b"}, {"a", "r", "c"}});
    write_tsv(tmp.file("valid.tsv"), {});
    write_tsv(tmp.file("test.tsv"), {{"a", "r", "d"}});
    const auto kg = load_dataset(tmp.file("train.tsv"), tmp.file("valid.tsv"),
                                 tmp.file("test.tsv"));
    const EntityId a = kg.entities.lookup("a");
    const RelationId r = kg.relations.lookup("r");

    const auto& tails = kg.filtered_candidates(a, r, Side::Tail);
    std::set<EntityId> got(tails.begin(), tails.end());
    CHECK(got == std::set<EntityId>{kg.entities.lookup("b"),
                                    kg.entities.lookup("c"),
                                    kg.entities.lookup("d")});

    const auto& heads =
        kg.filtered_candidates(kg.entities.lookup("b"), r, Side::Head);
    CHECK(heads.size() == 1);
    CHECK(heads.count(a) == 1);

    CHECK(kg.filtered_candidates(a, r, Side::Head).empty());
}

TEST_CASE("duplicates kept in splits, deduplicated in the filter index") {
    TempDir tmp("kgdata_dup");
    write_tsv(tmp.file("train.tsv"), {{"a", "r", "b"}, {"a", "r", "b"}});
    write_tsv(tmp.file("empty.tsv"), {});
    const auto kg = load_dataset(tmp.file("train.tsv"), tmp.file("empty.tsv"),
                                 tmp.file("empty.tsv"));
    CHECK(kg.train.size() == 2);
    CHECK(kg.filtered_candidates(0, 0, Side::Tail).size() == 1);
}

TEST_CASE("filtered_candidates equals a brute-force scan on random KGs") {
    std::mt19937_64 rng(41);
    TempDir tmp("kgdata_rand");
    for (int kg_rep = 0; kg_rep < 5; ++kg_rep) {
        std::uniform_int_distribution<int> ent(0, 19), rel(0, 3), split(0, 2);
        std::vector<std::array<std::string, 3>> splits[3];
        for (int i = 0; i < 120; ++i)
            splits[split(rng)].push_back({"e" + std::to_string(ent(rng)),
                                          "r" + std::to_string(rel(rng)),
                                          "e" + std::to_string(ent(rng))});
        if (splits[0].empty()) splits[0].push_back({"e0", "r0", "e1"});
        write_tsv(tmp.file("train.tsv"), splits[0]);
        write_tsv(tmp.file("valid.tsv"), splits[1]);
        write_tsv(tmp.file("test.tsv"), splits[2]);
        const auto kg = load_dataset(tmp.file("train.tsv"),
                                     tmp.file("valid.tsv"),
                                     tmp.file("test.tsv"));

        auto brute = [&](EntityId q, RelationId r, Side side) {
            std::set<EntityId> out;
            for (const auto* sp : {&kg.train, &kg.valid, &kg.test})
                for (const Triple& t : *sp) {
                    if (t.relation != r) continue;
                    if (side == Side::Tail && t.head == q) out.insert(t.tail);
                    if (side == Side::Head && t.tail == q) out.insert(t.head);
                }
            return out;
        };

        std::uniform_int_distribution<EntityId> qe(
            0, static_cast<EntityId>(kg.num_entities()) - 1);
        std::uniform_int_distribution<RelationId> qr(
            0, static_cast<RelationId>(kg.num_relations()) - 1);
        for (int q = 0; q < 200; ++q) {
            const EntityId e = qe(rng);
            const RelationId r = qr(rng);
            const Side side = (q % 2) ? Side::Head : Side::Tail;
            const auto& fast = kg.filtered_candidates(e, r, side);
            CHECK(std::set<EntityId>(fast.begin(), fast.end()) ==
                  brute(e, r, side));
        }
    }
}

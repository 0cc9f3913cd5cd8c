#pragma once
// Learnable state: entity embeddings, the four per-relation EGT parameter
// banks, relational attention weights, the plausibility score, and the
// checkpoint format.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "smartkge/geometry.hpp"
#include "smartkge/kgdata.hpp"

namespace smartkge {

enum class Variant { Smart, SmartMajority, SmartThreshold };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Smart: return "smart";
        case Variant::SmartMajority: return "smart-m";
        case Variant::SmartThreshold: return "smart-gt";
    }
    return "?";
}

struct ModelConfig {
    int dim = 32;
    int norm_order = 2;        // p in {1, 2}
    double gamma = 9.0;        // margin
    double alpha = 0.0;        // self-adversarial temperature
    int eta = 512;             // negatives per positive
    int batch = 1024;          // beta
    double lr = 1e-4;          // lambda
    double rho = 0.0;          // regularization coefficient
    long steps_t = 120000;
    long steps_ta = 50000;
    long steps_f = 90000;
    long valid_every = 5000;
    int patience = 1;
    bool cross_phase_stop = false;
    std::uint64_t seed = 0;
    EgtOrder egt_order;
    Variant variant = Variant::Smart;
    double epsilon = 0.35;     // threshold for Variant::SmartThreshold

    void validate() const {
        if (dim < 1) throw ConfigError("dim must be positive");
        if (norm_order != 1 && norm_order != 2)
            throw ConfigError("norm order must be 1 or 2");
        if (eta < 1) throw ConfigError("eta must be >= 1");
        if (batch < 1) throw ConfigError("batch must be >= 1");
        if (lr <= 0) throw ConfigError("learning rate must be positive");
        if (alpha < 0) throw ConfigError("alpha must be >= 0");
        if (rho < 0) throw ConfigError("rho must be >= 0");
        if (steps_t < 0 || steps_ta < 0 || steps_f < 0)
            throw ConfigError("phase step budgets must be >= 0");
        if (valid_every < 1) throw ConfigError("valid-every must be >= 1");
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (variant == Variant::SmartThreshold &&
            (epsilon <= 0.0 || epsilon >= 1.0))
            throw ConfigError("epsilon must be in (0, 1)");
    }
};

// Scaling parameters are clamped away from the non-invertible zero map.
inline constexpr double kScalFloor = 0.01;

struct EmbeddingState {
    int dim = 0;
    std::size_t n_ent = 0;
    std::size_t n_rel = 0;
    std::vector<double> ent_re, ent_im;      // n_ent x dim
    std::vector<double> trans_re, trans_im;  // n_rel x dim
    std::vector<double> rot_theta;           // n_rel x dim
    std::vector<double> ref_phi;             // n_rel x dim
    std::vector<double> scal_s;              // n_rel x dim

    std::span<const double> entity_re(EntityId e) const {
        return {ent_re.data() + static_cast<std::size_t>(e) * dim,
                static_cast<std::size_t>(dim)};
    }
    std::span<const double> entity_im(EntityId e) const {
        return {ent_im.data() + static_cast<std::size_t>(e) * dim,
                static_cast<std::size_t>(dim)};
    }

    RelationParamsView relation_params(RelationId r) const {
        const std::size_t off = static_cast<std::size_t>(r) * dim;
        const std::size_t d = static_cast<std::size_t>(dim);
        return RelationParamsView{
            {trans_re.data() + off, d}, {trans_im.data() + off, d},
            {rot_theta.data() + off, d}, {ref_phi.data() + off, d},
            {scal_s.data() + off, d}};
    }

    void clamp_scal() {
        for (double& s : scal_s)
            if (std::abs(s) < kScalFloor) s = std::copysign(kScalFloor, s);
    }
};

enum class AttentionMode { Fixed, Adaptive, Frozen };

inline const char* attention_mode_name(AttentionMode m) {
    switch (m) {
        case AttentionMode::Fixed: return "fixed";
        case AttentionMode::Adaptive: return "adaptive";
        case AttentionMode::Frozen: return "frozen";
    }
    return "?";
}

// Relational attention weight matrix W. Column j of a row is the weight of
// egt_order.slots[j]; the column index is also the tie-break priority.
struct AttentionState {
    std::size_t n_rel = 0;
    std::vector<double> logits;       // n_rel x 4
    std::vector<double> frozen_mask;  // n_rel x 4, 0/1 entries, valid if Frozen
    AttentionMode mode = AttentionMode::Fixed;
    EgtOrder egt_order;

    std::span<const double> logits_row(RelationId r) const {
        return {logits.data() + static_cast<std::size_t>(r) * 4, 4};
    }
    std::span<double> logits_row(RelationId r) {
        return {logits.data() + static_cast<std::size_t>(r) * 4, 4};
    }
    std::span<const double> mask_row(RelationId r) const {
        return {frozen_mask.data() + static_cast<std::size_t>(r) * 4, 4};
    }
};

inline std::pair<EmbeddingState, AttentionState> init_state(
    const KnowledgeGraph& kg, const ModelConfig& config, std::mt19937_64& rng) {
    config.validate();
    EmbeddingState st;
    st.dim = config.dim;
    st.n_ent = kg.num_entities();
    st.n_rel = kg.num_relations();
    const std::size_t ne = st.n_ent * config.dim;
    const std::size_t nr = st.n_rel * config.dim;
    st.ent_re.resize(ne);
    st.ent_im.resize(ne);
    st.trans_re.resize(nr);
    st.trans_im.resize(nr);
    st.rot_theta.resize(nr);
    st.ref_phi.resize(nr);
    st.scal_s.resize(nr);

    const double c = 6.0 / std::sqrt(static_cast<double>(config.dim));
    std::uniform_real_distribution<double> lin(-c, c);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> scal(0.5, 1.5);
    constexpr double kPi = 3.14159265358979323846;
    // pi - u*2pi with u in [0,1) lands in (-pi, pi]
    auto angle = [&](std::mt19937_64& g) { return kPi - unit(g) * 2.0 * kPi; };

    for (double& v : st.ent_re) v = lin(rng);
    for (double& v : st.ent_im) v = lin(rng);
    for (double& v : st.trans_re) v = lin(rng);
    for (double& v : st.trans_im) v = lin(rng);
    for (double& v : st.rot_theta) v = angle(rng);
    for (double& v : st.ref_phi) v = angle(rng);
    for (double& v : st.scal_s) v = scal(rng);

    AttentionState att;
    att.n_rel = st.n_rel;
    att.logits.assign(st.n_rel * 4, 0.0);
    att.frozen_mask.assign(st.n_rel * 4, 0.0);
    att.mode = AttentionMode::Fixed;
    att.egt_order = config.egt_order;
    return {std::move(st), std::move(att)};
}

// Column-indexed weight row; always sums to 1.
inline std::array<double, 4> effective_weights(const AttentionState& att,
                                               RelationId r) {
    std::array<double, 4> w{0.25, 0.25, 0.25, 0.25};
    switch (att.mode) {
        case AttentionMode::Fixed:
            break;
        case AttentionMode::Adaptive: {
            auto row = att.logits_row(r);
            const double mx = *std::max_element(row.begin(), row.end());
            double z = 0.0;
            for (int j = 0; j < 4; ++j) {
                w[j] = std::exp(row[j] - mx);
                z += w[j];
            }
            for (double& x : w) x /= z;
            break;
        }
        case AttentionMode::Frozen: {
            auto row = att.mask_row(r);
            double z = 0.0;
            for (int j = 0; j < 4; ++j) z += row[j];
            if (z <= 0.0)
                throw DataError("frozen mask row is all-zero for relation " +
                                std::to_string(r));
            for (int j = 0; j < 4; ++j) w[j] = row[j] / z;
            break;
        }
    }
    return w;
}

// Distances d_tau indexed by attention column (egt_order slot).
inline std::array<double, 4> per_egt_distances(const EmbeddingState& st,
                                               const EgtOrder& order,
                                               const Triple& tr, int p) {
    const std::size_t d = static_cast<std::size_t>(st.dim);
    auto h_re = st.entity_re(tr.head);
    auto h_im = st.entity_im(tr.head);
    auto t_re = st.entity_re(tr.tail);
    auto t_im = st.entity_im(tr.tail);
    auto params = st.relation_params(tr.relation);
    std::vector<double> x_re(d), x_im(d);
    std::array<double, 4> out{};
    for (int j = 0; j < 4; ++j) {
        apply_egt(order.slots[static_cast<std::size_t>(j)], params, h_re, h_im,
                  x_re, x_im);
        out[j] = egt_distance(x_re, x_im, t_re, t_im, p);
    }
    return out;
}

inline double combine_distances(const std::array<double, 4>& weights,
                                const std::array<double, 4>& dists) {
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) acc += weights[j] * dists[j];
    return -acc;
}

// Delta(h, r, t) = -sum_tau w_{r,tau} * ||r(tau, h) - t||; always <= 0.
inline double score_triple(const EmbeddingState& st, const AttentionState& att,
                           const Triple& tr, int p) {
    return combine_distances(effective_weights(att, tr.relation),
                             per_egt_distances(st, att.egt_order, tr, p));
}

// Argmax of the weight row; ties broken by the smallest column index.
inline Egt select_egt(const AttentionState& att, RelationId r) {
    const auto w = effective_weights(att, r);
    int best = 0;
    for (int j = 1; j < 4; ++j)
        if (w[j] > w[best]) best = j;
    return att.egt_order.slots[static_cast<std::size_t>(best)];
}

inline Egt majority_vote(const AttentionState& att) {
    if (att.n_rel == 0) throw ConfigError("majority_vote: no relations");
    std::array<std::size_t, 4> counts{};  // by column
    for (std::size_t r = 0; r < att.n_rel; ++r) {
        const Egt tag = select_egt(att, static_cast<RelationId>(r));
        counts[static_cast<std::size_t>(att.egt_order.column_of(tag))]++;
    }
    int best = 0;
    for (int j = 1; j < 4; ++j)
        if (counts[j] > counts[best]) best = j;
    return att.egt_order.slots[static_cast<std::size_t>(best)];
}

// {tau | w_{r,tau} > epsilon}; may be empty.
inline std::vector<Egt> threshold_select(const AttentionState& att,
                                         RelationId r, double epsilon) {
    if (epsilon <= 0.0 || epsilon >= 1.0)
        throw ConfigError("epsilon must be in (0, 1)");
    const auto w = effective_weights(att, r);
    std::vector<Egt> out;
    for (int j = 0; j < 4; ++j)
        if (w[j] > epsilon)
            out.push_back(att.egt_order.slots[static_cast<std::size_t>(j)]);
    return out;
}

// Pins the EGT selection: one-hot per relation (Smart), one EGT everywhere
// (SmartMajority), or a thresholded mask (SmartThreshold).
inline AttentionState freeze(const AttentionState& att, Variant variant,
                             double epsilon = 0.35) {
    if (att.mode != AttentionMode::Adaptive)
        throw ConfigError("freeze requires an adaptive attention state");
    AttentionState out = att;
    out.mode = AttentionMode::Frozen;
    std::fill(out.frozen_mask.begin(), out.frozen_mask.end(), 0.0);
    switch (variant) {
        case Variant::Smart:
            for (std::size_t r = 0; r < att.n_rel; ++r) {
                const Egt tag = select_egt(att, static_cast<RelationId>(r));
                out.frozen_mask[r * 4 + att.egt_order.column_of(tag)] = 1.0;
            }
            break;
        case Variant::SmartMajority: {
            const Egt tag = majority_vote(att);
            const int col = att.egt_order.column_of(tag);
            for (std::size_t r = 0; r < att.n_rel; ++r)
                out.frozen_mask[r * 4 + col] = 1.0;
            break;
        }
        case Variant::SmartThreshold:
            for (std::size_t r = 0; r < att.n_rel; ++r) {
                const auto sel =
                    threshold_select(att, static_cast<RelationId>(r), epsilon);
                if (sel.empty())
                    throw ConfigError(
                        "threshold freeze selected no EGT for relation " +
                        std::to_string(r) + " at epsilon " +
                        std::to_string(epsilon));
                for (Egt tag : sel)
                    out.frozen_mask[r * 4 + att.egt_order.column_of(tag)] = 1.0;
            }
            break;
    }
    return out;
}

// Builds a frozen attention state directly from per-relation selections
// (the adherence-transfer entry point).
inline AttentionState frozen_from_selection(
    std::size_t n_rel, const EgtOrder& order,
    const std::map<RelationId, Egt>& selection) {
    AttentionState att;
    att.n_rel = n_rel;
    att.logits.assign(n_rel * 4, 0.0);
    att.frozen_mask.assign(n_rel * 4, 0.0);
    att.mode = AttentionMode::Frozen;
    att.egt_order = order;
    for (std::size_t r = 0; r < n_rel; ++r) {
        auto it = selection.find(static_cast<RelationId>(r));
        if (it == selection.end())
            throw DataError("no EGT selection for relation " +
                            std::to_string(r));
        att.frozen_mask[r * 4 + order.column_of(it->second)] = 1.0;
    }
    return att;
}

// --- checkpoint format ------------------------------------------------------
//
// Text header: "SMARTKGE1", then "|E| |R| d", the EGT order comma list, and
// the attention mode, one per line. Then flat little-endian float64 arrays
// in the order: entity_re, entity_im, trans_u_re, trans_u_im, rot_theta,
// ref_phi, scal_s, logits, frozen_mask.

inline constexpr const char* kCheckpointMagic = "SMARTKGE1";

namespace detail {
inline void write_array(std::ofstream& out, const std::vector<double>& a) {
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(a.data()),
              static_cast<std::streamsize>(a.size() * sizeof(double)));
}
inline void read_array(std::ifstream& in, std::vector<double>& a,
                       std::size_t n, const std::string& path) {
    a.resize(n);
    in.read(reinterpret_cast<char*>(a.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint: " + path);
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, const EmbeddingState& st,
                            const AttentionState& att) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << kCheckpointMagic << '\n'
        << st.n_ent << ' ' << st.n_rel << ' ' << st.dim << '\n'
        << att.egt_order.to_string() << '\n'
        << attention_mode_name(att.mode) << '\n';
    detail::write_array(out, st.ent_re);
    detail::write_array(out, st.ent_im);
    detail::write_array(out, st.trans_re);
    detail::write_array(out, st.trans_im);
    detail::write_array(out, st.rot_theta);
    detail::write_array(out, st.ref_phi);
    detail::write_array(out, st.scal_s);
    detail::write_array(out, att.logits);
    detail::write_array(out, att.frozen_mask);
    if (!out) throw DataError("checkpoint write failed: " + path);
}

inline std::pair<EmbeddingState, AttentionState> load_checkpoint(
    const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string magic;
    std::getline(in, magic);
    if (magic != kCheckpointMagic)
        throw DataError("bad checkpoint magic in " + path);
    std::string line;
    std::getline(in, line);
    std::istringstream dims(line);
    EmbeddingState st;
    if (!(dims >> st.n_ent >> st.n_rel >> st.dim) || st.dim < 1)
        throw DataError("bad checkpoint dimensions in " + path);
    AttentionState att;
    att.n_rel = st.n_rel;
    std::getline(in, line);
    att.egt_order = EgtOrder::parse(line);
    std::getline(in, line);
    if (line == "fixed") att.mode = AttentionMode::Fixed;
    else if (line == "adaptive") att.mode = AttentionMode::Adaptive;
    else if (line == "frozen") att.mode = AttentionMode::Frozen;
    else throw DataError("bad attention mode in " + path);

    const std::size_t ne = st.n_ent * static_cast<std::size_t>(st.dim);
    const std::size_t nr = st.n_rel * static_cast<std::size_t>(st.dim);
    detail::read_array(in, st.ent_re, ne, path);
    detail::read_array(in, st.ent_im, ne, path);
    detail::read_array(in, st.trans_re, nr, path);
    detail::read_array(in, st.trans_im, nr, path);
    detail::read_array(in, st.rot_theta, nr, path);
    detail::read_array(in, st.ref_phi, nr, path);
    detail::read_array(in, st.scal_s, nr, path);
    detail::read_array(in, att.logits, st.n_rel * 4, path);
    detail::read_array(in, att.frozen_mask, st.n_rel * 4, path);
    return {std::move(st), std::move(att)};
}

}  // namespace smartkge

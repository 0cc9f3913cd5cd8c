#pragma once
// Complex-vector kernel: the four elementary geometric transformations
// (translation, rotation, reflection, scaling), their distances and
// analytic gradients, and the composition/commutativity algebra.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace smartkge {

// A d-dimensional complex vector stored as parallel real/imag arrays.
struct ComplexVector {
    std::vector<double> re;
    std::vector<double> im;

    ComplexVector() = default;
    explicit ComplexVector(std::size_t d) : re(d, 0.0), im(d, 0.0) {}
    ComplexVector(std::vector<double> r, std::vector<double> i)
        : re(std::move(r)), im(std::move(i)) {
        if (re.size() != im.size())
            throw std::invalid_argument("ComplexVector: re/im length mismatch");
    }

    std::size_t dim() const { return re.size(); }
};

enum class Egt : int { Trans = 0, Rot = 1, Ref = 2, Scal = 3 };

inline constexpr std::array<Egt, 4> kAllEgts{Egt::Trans, Egt::Rot, Egt::Ref,
                                             Egt::Scal};

inline const char* egt_name(Egt t) {
    switch (t) {
        case Egt::Trans: return "Trans";
        case Egt::Rot: return "Rot";
        case Egt::Ref: return "Ref";
        case Egt::Scal: return "Scal";
    }
    return "?";
}

inline std::optional<Egt> egt_from_name(std::string_view s) {
    for (Egt t : kAllEgts)
        if (s == egt_name(t)) return t;
    return std::nullopt;
}

// Mapping between the four attention-weight columns and the EGTs.
// Column index doubles as the tie-breaking priority (lower wins).
struct EgtOrder {
    std::array<Egt, 4> slots{Egt::Trans, Egt::Rot, Egt::Ref, Egt::Scal};

    static EgtOrder standard() { return EgtOrder{}; }

    int column_of(Egt t) const {
        for (int c = 0; c < 4; ++c)
            if (slots[static_cast<std::size_t>(c)] == t) return c;
        throw std::logic_error("EgtOrder: tag missing from permutation");
    }

    std::string to_string() const {
        std::string s;
        for (int c = 0; c < 4; ++c) {
            if (c) s += ',';
            s += egt_name(slots[static_cast<std::size_t>(c)]);
        }
        return s;
    }

    // Parses a comma list like "Trans,Scal,Ref,Rot"; must be a permutation.
    static EgtOrder parse(std::string_view text) {
        EgtOrder order;
        std::array<bool, 4> seen{};
        std::size_t pos = 0;
        for (int c = 0; c < 4; ++c) {
            std::size_t comma = text.find(',', pos);
            std::string_view tok = (c < 3)
                ? text.substr(pos, comma - pos)
                : text.substr(pos);
            if (c < 3 && comma == std::string_view::npos)
                throw std::invalid_argument("egt order: expected 4 names");
            auto tag = egt_from_name(tok);
            if (!tag)
                throw std::invalid_argument("egt order: unknown name '" +
                                            std::string(tok) + "'");
            if (seen[static_cast<std::size_t>(static_cast<int>(*tag))])
                throw std::invalid_argument("egt order: duplicate name");
            seen[static_cast<std::size_t>(static_cast<int>(*tag))] = true;
            order.slots[static_cast<std::size_t>(c)] = *tag;
            pos = comma + 1;
        }
        return order;
    }

    bool operator==(const EgtOrder&) const = default;
};

namespace detail {
inline void check_dims(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}
}  // namespace detail

// --- forward maps (span kernels) -------------------------------------------

inline void apply_translation(std::span<const double> u_re,
                              std::span<const double> u_im,
                              std::span<const double> h_re,
                              std::span<const double> h_im,
                              std::span<double> out_re,
                              std::span<double> out_im) {
    detail::check_dims(u_re.size(), h_re.size(), "apply_translation");
    for (std::size_t k = 0; k < h_re.size(); ++k) {
        out_re[k] = h_re[k] + u_re[k];
        out_im[k] = h_im[k] + u_im[k];
    }
}

inline void apply_rotation(std::span<const double> theta,
                           std::span<const double> h_re,
                           std::span<const double> h_im,
                           std::span<double> out_re,
                           std::span<double> out_im) {
    detail::check_dims(theta.size(), h_re.size(), "apply_rotation");
    for (std::size_t k = 0; k < h_re.size(); ++k) {
        const double c = std::cos(theta[k]), s = std::sin(theta[k]);
        out_re[k] = c * h_re[k] - s * h_im[k];
        out_im[k] = s * h_re[k] + c * h_im[k];
    }
}

// Ref(z) = e^{2i*phi} * conj(z)
inline void apply_reflection(std::span<const double> phi,
                             std::span<const double> h_re,
                             std::span<const double> h_im,
                             std::span<double> out_re,
                             std::span<double> out_im) {
    detail::check_dims(phi.size(), h_re.size(), "apply_reflection");
    for (std::size_t k = 0; k < h_re.size(); ++k) {
        const double c = std::cos(2.0 * phi[k]), s = std::sin(2.0 * phi[k]);
        out_re[k] = c * h_re[k] + s * h_im[k];
        out_im[k] = s * h_re[k] - c * h_im[k];
    }
}

inline void apply_scaling(std::span<const double> s,
                          std::span<const double> h_re,
                          std::span<const double> h_im,
                          std::span<double> out_re,
                          std::span<double> out_im) {
    detail::check_dims(s.size(), h_re.size(), "apply_scaling");
    for (std::size_t k = 0; k < h_re.size(); ++k) {
        out_re[k] = s[k] * h_re[k];
        out_im[k] = s[k] * h_im[k];
    }
}

// Per-relation parameter rows for all four EGTs.
struct RelationParamsView {
    std::span<const double> trans_re;
    std::span<const double> trans_im;
    std::span<const double> theta;
    std::span<const double> phi;
    std::span<const double> scal;
};

inline void apply_egt(Egt kind, const RelationParamsView& p,
                      std::span<const double> h_re,
                      std::span<const double> h_im,
                      std::span<double> out_re, std::span<double> out_im) {
    switch (kind) {
        case Egt::Trans:
            apply_translation(p.trans_re, p.trans_im, h_re, h_im, out_re, out_im);
            return;
        case Egt::Rot:
            apply_rotation(p.theta, h_re, h_im, out_re, out_im);
            return;
        case Egt::Ref:
            apply_reflection(p.phi, h_re, h_im, out_re, out_im);
            return;
        case Egt::Scal:
            apply_scaling(p.scal, h_re, h_im, out_re, out_im);
            return;
    }
}

// --- ComplexVector conveniences --------------------------------------------

inline ComplexVector apply_translation(const ComplexVector& u,
                                       const ComplexVector& h) {
    ComplexVector out(h.dim());
    apply_translation(u.re, u.im, h.re, h.im, out.re, out.im);
    return out;
}

inline ComplexVector apply_rotation(std::span<const double> theta,
                                    const ComplexVector& h) {
    ComplexVector out(h.dim());
    apply_rotation(theta, h.re, h.im, out.re, out.im);
    return out;
}

inline ComplexVector apply_reflection(std::span<const double> phi,
                                      const ComplexVector& h) {
    ComplexVector out(h.dim());
    apply_reflection(phi, h.re, h.im, out.re, out.im);
    return out;
}

inline ComplexVector apply_scaling(std::span<const double> s,
                                   const ComplexVector& h) {
    ComplexVector out(h.dim());
    apply_scaling(s, h.re, h.im, out.re, out.im);
    return out;
}

// --- distance ---------------------------------------------------------------

// ||x - t||_p with the complex modulus per coordinate; p in {1, 2}.
inline double egt_distance(std::span<const double> x_re,
                           std::span<const double> x_im,
                           std::span<const double> t_re,
                           std::span<const double> t_im, int p) {
    detail::check_dims(x_re.size(), t_re.size(), "egt_distance");
    if (p != 1 && p != 2) throw std::invalid_argument("egt_distance: p must be 1 or 2");
    double acc = 0.0;
    for (std::size_t k = 0; k < x_re.size(); ++k) {
        const double dr = x_re[k] - t_re[k];
        const double di = x_im[k] - t_im[k];
        const double sq = dr * dr + di * di;
        acc += (p == 2) ? sq : std::sqrt(sq);
    }
    return (p == 2) ? std::sqrt(acc) : acc;
}

inline double egt_distance(const ComplexVector& x, const ComplexVector& t,
                           int p) {
    return egt_distance(x.re, x.im, t.re, t.im, p);
}

// --- gradients --------------------------------------------------------------

// Accumulation targets for one backward pass. Spans may be empty to skip
// that output.
struct EgtGradSink {
    std::span<double> param_re;  // u_re / theta / phi / s
    std::span<double> param_im;  // u_im only (Trans); empty otherwise
    std::span<double> h_re;
    std::span<double> h_im;
    std::span<double> t_re;
    std::span<double> t_im;
};

// Accumulates coef * d/d(.) of egt_distance(apply_egt(kind, p, h), t, p_norm)
// into the sink. At zero distance (p=2) or zero per-coordinate modulus (p=1)
// the subgradient is taken as zero.
inline void egt_distance_backward(Egt kind, const RelationParamsView& params,
                                  std::span<const double> h_re,
                                  std::span<const double> h_im,
                                  std::span<const double> t_re,
                                  std::span<const double> t_im, int p_norm,
                                  double coef, const EgtGradSink& sink) {
    const std::size_t d = h_re.size();
    std::vector<double> x_re(d), x_im(d);
    apply_egt(kind, params, h_re, h_im, x_re, x_im);

    // g = coef * d(dist)/dx, elementwise over re/im
    std::vector<double> g_re(d, 0.0), g_im(d, 0.0);
    if (p_norm == 2) {
        const double dist = egt_distance(x_re, x_im, t_re, t_im, 2);
        if (dist > 0.0) {
            const double inv = coef / dist;
            for (std::size_t k = 0; k < d; ++k) {
                g_re[k] = inv * (x_re[k] - t_re[k]);
                g_im[k] = inv * (x_im[k] - t_im[k]);
            }
        }
    } else if (p_norm == 1) {
        for (std::size_t k = 0; k < d; ++k) {
            const double dr = x_re[k] - t_re[k];
            const double di = x_im[k] - t_im[k];
            const double m = std::sqrt(dr * dr + di * di);
            if (m > 0.0) {
                g_re[k] = coef * dr / m;
                g_im[k] = coef * di / m;
            }
        }
    } else {
        throw std::invalid_argument("egt_distance_backward: p must be 1 or 2");
    }

    if (!sink.t_re.empty())
        for (std::size_t k = 0; k < d; ++k) {
            sink.t_re[k] -= g_re[k];
            sink.t_im[k] -= g_im[k];
        }

    switch (kind) {
        case Egt::Trans:
            if (!sink.param_re.empty())
                for (std::size_t k = 0; k < d; ++k) {
                    sink.param_re[k] += g_re[k];
                    sink.param_im[k] += g_im[k];
                }
            if (!sink.h_re.empty())
                for (std::size_t k = 0; k < d; ++k) {
                    sink.h_re[k] += g_re[k];
                    sink.h_im[k] += g_im[k];
                }
            break;
        case Egt::Rot:
            for (std::size_t k = 0; k < d; ++k) {
                const double c = std::cos(params.theta[k]);
                const double s = std::sin(params.theta[k]);
                // dx/dtheta = i * x
                if (!sink.param_re.empty())
                    sink.param_re[k] += g_re[k] * (-x_im[k]) + g_im[k] * x_re[k];
                if (!sink.h_re.empty()) {
                    sink.h_re[k] += g_re[k] * c + g_im[k] * s;
                    sink.h_im[k] += -g_re[k] * s + g_im[k] * c;
                }
            }
            break;
        case Egt::Ref:
            for (std::size_t k = 0; k < d; ++k) {
                const double c = std::cos(2.0 * params.phi[k]);
                const double s = std::sin(2.0 * params.phi[k]);
                // dx/dphi = 2i * x
                if (!sink.param_re.empty())
                    sink.param_re[k] +=
                        2.0 * (g_re[k] * (-x_im[k]) + g_im[k] * x_re[k]);
                if (!sink.h_re.empty()) {
                    sink.h_re[k] += g_re[k] * c + g_im[k] * s;
                    sink.h_im[k] += g_re[k] * s - g_im[k] * c;
                }
            }
            break;
        case Egt::Scal:
            for (std::size_t k = 0; k < d; ++k) {
                if (!sink.param_re.empty())
                    sink.param_re[k] += g_re[k] * h_re[k] + g_im[k] * h_im[k];
                if (!sink.h_re.empty()) {
                    sink.h_re[k] += g_re[k] * params.scal[k];
                    sink.h_im[k] += g_im[k] * params.scal[k];
                }
            }
            break;
    }
}

// Fresh-buffer variant returning all partials of
// egt_distance(apply_egt(kind, params, h), t, p).
struct EgtGradients {
    std::vector<double> param_re;  // u_re / theta / phi / s
    std::vector<double> param_im;  // only for Trans
    ComplexVector grad_head;
    ComplexVector grad_tail;
};

inline EgtGradients egt_gradients(Egt kind, const RelationParamsView& params,
                                  const ComplexVector& h,
                                  const ComplexVector& t, int p) {
    const std::size_t d = h.dim();
    EgtGradients g;
    g.param_re.assign(d, 0.0);
    if (kind == Egt::Trans) g.param_im.assign(d, 0.0);
    g.grad_head = ComplexVector(d);
    g.grad_tail = ComplexVector(d);
    EgtGradSink sink{g.param_re, g.param_im, g.grad_head.re, g.grad_head.im,
                     g.grad_tail.re, g.grad_tail.im};
    egt_distance_backward(kind, params, h.re, h.im, t.re, t.im, p, 1.0, sink);
    return g;
}

// --- composition algebra ----------------------------------------------------

enum class Closure { SameEgt, OtherEgt, NotEgt };

struct ComposeResult {
    Closure closure;
    std::optional<Egt> result_kind;  // set when closure != NotEgt
    bool commutes;
};

// Classification of a.b (apply b first, then a).
inline ComposeResult compose_check(Egt a, Egt b) {
    auto egt = [](Egt a_, Egt b_, Egt out) {
        return ComposeResult{(out == a_ && out == b_) ? Closure::SameEgt
                                                      : Closure::OtherEgt,
                             out, false};
    };
    ComposeResult r{Closure::NotEgt, std::nullopt, false};
    if (a == b) {
        // diagonal: Ref.Ref is a rotation, the others close on themselves
        r = (a == Egt::Ref) ? egt(a, b, Egt::Rot) : egt(a, b, a);
    } else if ((a == Egt::Rot && b == Egt::Ref) ||
               (a == Egt::Ref && b == Egt::Rot)) {
        r = egt(a, b, Egt::Ref);
    }
    // commutativity: Trans only with itself; Scal with everything but Trans;
    // Rot with Rot and Scal; Ref only with Scal.
    auto commutes = [](Egt x, Egt y) {
        if (x == y) return x != Egt::Ref;
        if (x == Egt::Trans || y == Egt::Trans) return false;
        if (x == Egt::Scal || y == Egt::Scal) return true;
        return false;  // Rot vs Ref
    };
    r.commutes = commutes(a, b);
    return r;
}

}  // namespace smartkge

#pragma once
// Shared test fixtures: random draws, scalar std::complex oracles, tiny
// dataset builders. The oracles deliberately take a different route than
// the library (per-coordinate std::complex arithmetic).

#include <array>
#include <complex>
#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "smartkge/geometry.hpp"
#include "smartkge/kgdata.hpp"

namespace testutil {

using smartkge::ComplexVector;
using smartkge::Egt;

inline std::vector<double> random_reals(std::mt19937_64& rng, std::size_t d,
                                        double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(d);
    for (double& x : v) x = u(rng);
    return v;
}

inline ComplexVector random_cvec(std::mt19937_64& rng, std::size_t d) {
    return ComplexVector{random_reals(rng, d), random_reals(rng, d)};
}

inline std::vector<std::complex<double>> to_complex(const ComplexVector& v) {
    std::vector<std::complex<double>> out(v.dim());
    for (std::size_t k = 0; k < v.dim(); ++k) out[k] = {v.re[k], v.im[k]};
    return out;
}

inline ComplexVector from_complex(const std::vector<std::complex<double>>& v) {
    ComplexVector out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        out.re[k] = v[k].real();
        out.im[k] = v[k].imag();
    }
    return out;
}

// scalar-loop oracle for any of the four transforms
inline ComplexVector oracle_apply(Egt kind, const ComplexVector& u,
                                  const std::vector<double>& angle_or_scale,
                                  const ComplexVector& h) {
    auto z = to_complex(h);
    for (std::size_t k = 0; k < z.size(); ++k) {
        switch (kind) {
            case Egt::Trans:
                z[k] += std::complex<double>{u.re[k], u.im[k]};
                break;
            case Egt::Rot:
                z[k] *= std::polar(1.0, angle_or_scale[k]);
                break;
            case Egt::Ref:
                z[k] = std::polar(1.0, 2.0 * angle_or_scale[k]) * std::conj(z[k]);
                break;
            case Egt::Scal:
                z[k] *= angle_or_scale[k];
                break;
        }
    }
    return from_complex(z);
}

inline double oracle_distance(const ComplexVector& x, const ComplexVector& t,
                              int p) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.dim(); ++k) {
        const std::complex<double> diff{x.re[k] - t.re[k], x.im[k] - t.im[k]};
        acc += (p == 2) ? std::norm(diff) : std::abs(diff);
    }
    return (p == 2) ? std::sqrt(acc) : acc;
}

inline double max_abs_diff(const ComplexVector& a, const ComplexVector& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.dim(); ++k) {
        m = std::max(m, std::abs(a.re[k] - b.re[k]));
        m = std::max(m, std::abs(a.im[k] - b.im[k]));
    }
    return m;
}

// Scratch directory unique per test binary invocation.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        namespace fs = std::filesystem;
        path_ = fs::temp_directory_path() /
                ("smartkge_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }
    std::string dir() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

inline void write_tsv(const std::string& path,
                      const std::vector<std::array<std::string, 3>>& triples) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& t : triples) out << t[0] << '\t' << t[1] << '\t' << t[2] << '\n';
}

}  // namespace testutil

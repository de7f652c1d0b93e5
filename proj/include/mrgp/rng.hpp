#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mrgp {

/// Mixing hash used for every seed derivation in the library (Steele et al.'s
/// splitmix64 finalizer). All derived streams are documented as
/// mt19937_64(seed expression built from splitmix64), which pins results
/// bit-for-bit for a given build.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derive an independent child seed from (parent, stream index).
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
    return splitmix64(parent ^ splitmix64(stream + 1));
}

/// Random source with explicit sampling algorithms. std::normal_distribution
/// and friends are implementation-defined, so the samplers are spelled out
/// here: polar Marsaglia for normals, Bailey's polar method for Student-t.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (-1, 1).
    double uniform_signed() { return 2.0 * uniform() - 1.0; }

    /// Standard normal draw (polar Marsaglia; second variate cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform_signed();
            v = uniform_signed();
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Student-t draw with `dof` degrees of freedom (Bailey 1994, polar
    /// method). Unstandardized: variance is dof/(dof-2) for dof > 2.
    double student_t(double dof) {
        double u, v, w;
        do {
            u = uniform_signed();
            v = uniform_signed();
            w = u * u + v * v;
        } while (w >= 1.0 || w == 0.0);
        const double c = std::sqrt(dof * (std::pow(w, -2.0 / dof) - 1.0) / w);
        return u * c;
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mrgp

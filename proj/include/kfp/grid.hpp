#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "kfp/error.hpp"

namespace kfp {

/// Signed FFT-standard mode number for array index i of an n-point axis:
/// i in [0, n/2) maps to i, i in [n/2, n) maps to i - n.
inline int signed_mode(int i, int n) { return i < n / 2 ? i : i - n; }

/// Array index of the negated mode, with the self-paired Nyquist mode fixed.
inline int negated_index(int i, int n) { return i == 0 ? 0 : n - i; }

/// The single lattice function: angular frequency (pi/L) * k for index i.
inline double lattice_freq(int i, int n, double half_len) {
    return std::numbers::pi / half_len * signed_mode(i, n);
}

/// Periodic phase-space box [-L_x, L_x)^d x [-L_v, L_v)^d with n_x and n_v
/// points per dimension, plus the uniform time lattice
/// {t_start + n dt : n = 0..n_t}.
struct PhaseGrid {
    int n_x = 0;
    int n_v = 0;
    int dim = 1;
    double half_len_x = std::numbers::pi;
    double half_len_v = std::numbers::pi;
    double t_start = 0.0;
    double t_end = 1.0;
    int n_t = 1;

    void validate() const {
        if (n_x <= 0 || n_x % 2 != 0 || n_v <= 0 || n_v % 2 != 0)
            throw ConfigError("PhaseGrid: n_x and n_v must be even and positive");
        if (dim < 1 || dim > 3) throw ConfigError("PhaseGrid: dim must be in [1, 3]");
        if (!(half_len_x > 0.0) || !(half_len_v > 0.0))
            throw ConfigError("PhaseGrid: box half-lengths must be positive");
        if (!(t_start < t_end)) throw ConfigError("PhaseGrid: need t_start < t_end");
        if (n_t < 1) throw ConfigError("PhaseGrid: n_t must be >= 1");
    }

    double dt() const { return (t_end - t_start) / n_t; }
    int n_slices() const { return n_t + 1; }
    double t_at(int n) const { return t_start + n * dt(); }

    /// Flattened mode counts over all dimensions.
    std::int64_t modes_x() const {
        std::int64_t m = 1;
        for (int a = 0; a < dim; ++a) m *= n_x;
        return m;
    }
    std::int64_t modes_v() const {
        std::int64_t m = 1;
        for (int a = 0; a < dim; ++a) m *= n_v;
        return m;
    }
    std::int64_t slice_size() const { return modes_x() * modes_v(); }
    std::int64_t total_size() const { return slice_size() * n_slices(); }

    double dx() const { return 2.0 * half_len_x / n_x; }
    double dv() const { return 2.0 * half_len_v / n_v; }
    double x_at(int j) const { return -half_len_x + j * dx(); }
    double v_at(int j) const { return -half_len_v + j * dv(); }

    /// L^2_{x,v} quadrature weight for one squared mode coefficient.
    double mode_weight() const {
        double w = 1.0;
        for (int a = 0; a < dim; ++a) w /= (2.0 * half_len_x) * (2.0 * half_len_v);
        return w;
    }

    /// Decodes a flattened x-mode index (row-major over dimensions) into
    /// the frequency vector phi.
    void phi_at(std::int64_t flat, std::array<double, 3>& out) const {
        for (int a = dim - 1; a >= 0; --a) {
            const int idx = static_cast<int>(flat % n_x);
            out[static_cast<std::size_t>(a)] = lattice_freq(idx, n_x, half_len_x);
            flat /= n_x;
        }
    }
    void xi_at(std::int64_t flat, std::array<double, 3>& out) const {
        for (int a = dim - 1; a >= 0; --a) {
            const int idx = static_cast<int>(flat % n_v);
            out[static_cast<std::size_t>(a)] = lattice_freq(idx, n_v, half_len_v);
            flat /= n_v;
        }
    }
    std::array<double, 3> phi_at(std::int64_t flat) const {
        std::array<double, 3> out{};
        phi_at(flat, out);
        return out;
    }
    std::array<double, 3> xi_at(std::int64_t flat) const {
        std::array<double, 3> out{};
        xi_at(flat, out);
        return out;
    }

    /// Flattened index of the mode with every axis index negated.
    std::int64_t negated_x(std::int64_t flat) const { return negated_flat(flat, n_x); }
    std::int64_t negated_v(std::int64_t flat) const { return negated_flat(flat, n_v); }

    /// Largest representable |frequency| per axis.
    double phi_max() const { return std::numbers::pi / half_len_x * (n_x / 2); }
    double xi_max() const { return std::numbers::pi / half_len_v * (n_v / 2); }

    bool operator==(const PhaseGrid&) const = default;

  private:
    std::int64_t negated_flat(std::int64_t flat, int n) const {
        std::int64_t out = 0;
        std::array<int, 3> idx{};
        for (int a = dim - 1; a >= 0; --a) {
            idx[static_cast<std::size_t>(a)] = static_cast<int>(flat % n);
            flat /= n;
        }
        for (int a = 0; a < dim; ++a)
            out = out * n + negated_index(idx[static_cast<std::size_t>(a)], n);
        return out;
    }
};

/// Grid whose index array realizes the kinetically rescaled field: frequency
/// lattices map to phi -> delta^{2*beta+1} * phi and xi -> delta * xi while the
/// time line contracts by delta^{2*beta}, so the per-mode transport phases
/// int |xi - tau*phi|^{2*beta} dtau are unchanged entry by entry.
inline PhaseGrid scaled_grid(const PhaseGrid& g, double beta, double delta) {
    if (!(beta > 0.0) || !(delta > 0.0) || !std::isfinite(delta))
        throw ConfigError("scaled_grid: beta and delta must be positive");
    PhaseGrid out = g;
    out.half_len_x = g.half_len_x / std::pow(delta, 2.0 * beta + 1.0);
    out.half_len_v = g.half_len_v / delta;
    const double st = std::pow(delta, 2.0 * beta);
    out.t_start = g.t_start / st;
    out.t_end = g.t_end / st;
    return out;
}

/// Per-axis lattices in FFT-standard order plus the time lattice.
struct Lattices {
    std::vector<double> phi;
    std::vector<double> xi;
    std::vector<double> t;
};

inline Lattices make_lattices(const PhaseGrid& grid) {
    grid.validate();
    Lattices l;
    l.phi.resize(static_cast<std::size_t>(grid.n_x));
    for (int i = 0; i < grid.n_x; ++i)
        l.phi[static_cast<std::size_t>(i)] = lattice_freq(i, grid.n_x, grid.half_len_x);
    l.xi.resize(static_cast<std::size_t>(grid.n_v));
    for (int i = 0; i < grid.n_v; ++i)
        l.xi[static_cast<std::size_t>(i)] = lattice_freq(i, grid.n_v, grid.half_len_v);
    l.t.resize(static_cast<std::size_t>(grid.n_slices()));
    for (int n = 0; n <= grid.n_t; ++n) l.t[static_cast<std::size_t>(n)] = grid.t_at(n);
    return l;
}

}  // namespace kfp

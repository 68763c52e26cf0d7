#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kfp/error.hpp"
#include "kfp/field.hpp"
#include "kfp/grid.hpp"

namespace kfp {

/// On-disk field: a line-oriented text header followed by the raw values as
/// little-endian 64-bit float (re, im) pairs, time-major then phi then xi --
/// the in-memory layout.  Write then read is bit-exact.
struct FieldFile {
    static constexpr int version = 1;

    SpectralField field;
    double beta = 1.0;
    bool hermitian = false;
};

namespace detail {

inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

static_assert(std::endian::native == std::endian::little,
              "field payload I/O assumes a little-endian host");

/// Max |value(-phi,-xi) - conj(value(phi,xi))| over the field, and the max
/// modulus for the relative comparison.
inline void hermitian_defect(const SpectralField& f, double& defect,
                             double& scale) {
    const PhaseGrid& g = f.grid;
    defect = 0.0;
    scale = 0.0;
    for (int n = 0; n < g.n_slices(); ++n)
        for (std::int64_t ix = 0; ix < g.modes_x(); ++ix)
            for (std::int64_t iv = 0; iv < g.modes_v(); ++iv) {
                const cplx a = f.at(n, ix, iv);
                const cplx b = f.at(n, g.negated_x(ix), g.negated_v(iv));
                defect = std::max(defect, std::abs(b - std::conj(a)));
                scale = std::max(scale, std::abs(a));
            }
}

inline bool field_is_hermitian(const SpectralField& f) {
    double defect = 0.0, scale = 0.0;
    hermitian_defect(f, defect, scale);
    return defect <= 1e-12 * scale;
}

}  // namespace detail

/// Serializes the field with its parameters.  The hermitian flag is measured
/// from the data (real-valued represented function), not asserted by the
/// caller.
inline void write_field(const std::string& path, const SpectralField& f,
                        double beta) {
    f.grid.validate();
    const PhaseGrid& g = f.grid;
    std::ostringstream h;
    h << "kfp-field " << FieldFile::version << "\n";
    h << "endian little\n";
    h << "dim " << g.dim << "\n";
    h << "n_x " << g.n_x << "\n";
    h << "half_len_x " << detail::fmt_double(g.half_len_x) << "\n";
    h << "n_v " << g.n_v << "\n";
    h << "half_len_v " << detail::fmt_double(g.half_len_v) << "\n";
    h << "t_start " << detail::fmt_double(g.t_start) << "\n";
    h << "t_end " << detail::fmt_double(g.t_end) << "\n";
    h << "n_t " << g.n_t << "\n";
    h << "frame " << (f.frame == Frame::Physical ? "physical" : "galilean")
      << "\n";
    h << "beta " << detail::fmt_double(beta) << "\n";
    h << "hermitian " << (detail::field_is_hermitian(f) ? 1 : 0) << "\n";
    h << "values " << f.values.size() << "\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open field file for writing: " + path);
    const std::string header = h.str();
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(cplx)));
    if (!out) throw NumericalError("short write on field file: " + path);
}

namespace detail {

inline std::string header_value(std::istream& in, const std::string& key,
                                const std::string& path) {
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("field file " + path + ": missing header line " + key);
    const auto sp = line.find(' ');
    if (sp == std::string::npos || line.substr(0, sp) != key)
        throw ConfigError("field file " + path + ": expected header key '" +
                          key + "', got '" + line + "'");
    return line.substr(sp + 1);
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("field file: bad numeric value for " + what + ": " + s);
    }
}

inline long long parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("field file: bad integer value for " + what + ": " + s);
    }
}

}  // namespace detail

/// Reads a field file back; validates the header against the format, the
/// payload length against the grid, and the Hermitian flag against the data
/// when set.
inline FieldFile read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open field file: " + path);

    const std::string magic = detail::header_value(in, "kfp-field", path);
    if (detail::parse_int(magic, "version") != FieldFile::version)
        throw ConfigError("field file " + path + ": unsupported version " + magic);
    if (detail::header_value(in, "endian", path) != "little")
        throw ConfigError("field file " + path + ": unsupported byte order");

    PhaseGrid g;
    g.dim = static_cast<int>(
        detail::parse_int(detail::header_value(in, "dim", path), "dim"));
    g.n_x = static_cast<int>(
        detail::parse_int(detail::header_value(in, "n_x", path), "n_x"));
    g.half_len_x =
        detail::parse_double(detail::header_value(in, "half_len_x", path), "half_len_x");
    g.n_v = static_cast<int>(
        detail::parse_int(detail::header_value(in, "n_v", path), "n_v"));
    g.half_len_v =
        detail::parse_double(detail::header_value(in, "half_len_v", path), "half_len_v");
    g.t_start =
        detail::parse_double(detail::header_value(in, "t_start", path), "t_start");
    g.t_end = detail::parse_double(detail::header_value(in, "t_end", path), "t_end");
    g.n_t = static_cast<int>(
        detail::parse_int(detail::header_value(in, "n_t", path), "n_t"));
    g.validate();

    const std::string frame = detail::header_value(in, "frame", path);
    if (frame != "physical" && frame != "galilean")
        throw ConfigError("field file " + path + ": unknown frame tag " + frame);

    FieldFile ff;
    ff.beta = detail::parse_double(detail::header_value(in, "beta", path), "beta");
    const long long herm =
        detail::parse_int(detail::header_value(in, "hermitian", path), "hermitian");
    if (herm != 0 && herm != 1)
        throw ConfigError("field file " + path + ": hermitian flag must be 0 or 1");
    ff.hermitian = herm == 1;

    const long long count =
        detail::parse_int(detail::header_value(in, "values", path), "values");
    if (count != g.total_size())
        throw ConfigError("field file " + path + ": value count does not match the grid");

    ff.field = SpectralField(
        g, frame == "physical" ? Frame::Physical : Frame::Galilean);
    in.read(reinterpret_cast<char*>(ff.field.values.data()),
            static_cast<std::streamsize>(ff.field.values.size() * sizeof(cplx)));
    if (in.gcount() !=
        static_cast<std::streamsize>(ff.field.values.size() * sizeof(cplx)))
        throw ConfigError("field file " + path + ": truncated payload");

    if (ff.hermitian) {
        double defect = 0.0, scale = 0.0;
        detail::hermitian_defect(ff.field, defect, scale);
        if (defect > 1e-12 * scale)
            throw ConfigError("field file " + path +
                              ": declares hermitian symmetry but the payload violates it");
    }
    return ff;
}

}  // namespace kfp

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "kfp/error.hpp"
#include "kfp/grid.hpp"
#include "kfp/params.hpp"
#include "kfp/rough.hpp"
#include "kfp/sources.hpp"

namespace kfp {

enum class Command {
    SolveKolmogorov,
    SolveCauchy,
    SolveRough,
    VerifyKernel,
    VerifyOperatorNorms,
    VerifyEmbedding,
    EnergyReport,
};

inline Command parse_command(const std::string& s) {
    if (s == "solve-kolmogorov") return Command::SolveKolmogorov;
    if (s == "solve-cauchy") return Command::SolveCauchy;
    if (s == "solve-rough") return Command::SolveRough;
    if (s == "verify-kernel") return Command::VerifyKernel;
    if (s == "verify-operator-norms") return Command::VerifyOperatorNorms;
    if (s == "verify-embedding") return Command::VerifyEmbedding;
    if (s == "energy-report") return Command::EnergyReport;
    throw ConfigError("unknown command: " + s);
}

inline const char* command_name(Command c) {
    switch (c) {
        case Command::SolveKolmogorov: return "solve-kolmogorov";
        case Command::SolveCauchy: return "solve-cauchy";
        case Command::SolveRough: return "solve-rough";
        case Command::VerifyKernel: return "verify-kernel";
        case Command::VerifyOperatorNorms: return "verify-operator-norms";
        case Command::VerifyEmbedding: return "verify-embedding";
        case Command::EnergyReport: return "energy-report";
    }
    return "";
}

/// Diffusion-form request for the rough commands.  Matrix coefficients come
/// from two builtin families (a constant, and a smooth seeded oscillation
/// filling the ellipticity window); the kernel form is the truncated stable
/// kernel matched to the box.
struct FormSpec {
    enum class Kind {
        FractionalMultiplier,
        MatrixConstant,
        MatrixRandom,
        FractionalKernel,
    };

    Kind kind = Kind::FractionalMultiplier;
    double beta = 0.5;
    double lambda = 1.0;
    double big_lambda = 1.0;
    double c_shift = 0.0;
    double value = 1.0;  ///< MatrixConstant coefficient
    std::uint64_t seed = 1;

    DiffusionForm build(const PhaseGrid& g) const {
        DiffusionForm form;
        form.c_shift = c_shift;
        switch (kind) {
            case Kind::FractionalMultiplier:
                form.kind = DiffusionForm::Kind::FractionalMultiplier;
                form.beta = beta;
                break;
            case Kind::MatrixConstant: {
                form.kind = DiffusionForm::Kind::Matrix;
                form.lambda = lambda;
                form.big_lambda = big_lambda;
                const double a = value;
                if (!(a >= lambda) || !(a <= big_lambda))
                    throw ConfigError("form: constant coefficient outside [lambda, big_lambda]");
                form.coeff = [a](double, double, double) { return a; };
                break;
            }
            case Kind::MatrixRandom: {
                form.kind = DiffusionForm::Kind::Matrix;
                form.lambda = lambda;
                form.big_lambda = big_lambda;
                std::mt19937_64 rng(seed);
                std::uniform_real_distribution<double> w(-3.0, 3.0);
                std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
                const double wt = w(rng), wx = w(rng), wv = w(rng);
                const double p0 = ph(rng), p1 = ph(rng);
                const double lo = lambda, hi = big_lambda;
                form.coeff = [=](double t, double x, double v) {
                    const double u = 0.5 + 0.5 * std::sin(wt * t + wx * x + p0) *
                                               std::cos(wv * v + p1);
                    return lo + (hi - lo) * u;
                };
                break;
            }
            case Kind::FractionalKernel:
                form = fractional_kernel_form(beta, g.half_len_v);
                form.c_shift = c_shift;
                break;
        }
        form.validate();
        return form;
    }
};

/// One entry of the source list: a builtin generator or a field file, bound
/// to a decomposition slot.
struct SourceEntry {
    int slot = 1;  ///< 1..3
    std::optional<SourceSpec> generator;
    std::optional<std::string> file;
};

/// Everything a run needs; parsed strictly (unknown keys are errors).
struct RunConfig {
    Command command = Command::SolveKolmogorov;
    KineticParams params;
    PhaseGrid grid;
    std::optional<FormSpec> form;
    std::vector<SourceEntry> sources;
    std::optional<SourceSpec> initial;
    std::optional<std::string> initial_file;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    int threads = 1;

    std::int64_t samples = 1000;  ///< verify-kernel sample count
    double ratio_ceiling = std::numeric_limits<double>::infinity();

    nlohmann::json echo;  ///< parsed document, for the manifest
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed,
                                const std::string& where) {
    if (!j.is_object())
        throw ConfigError("config: " + where + " must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) { ok = true; break; }
        if (!ok)
            throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
    }
}

template <typename T>
T field_as(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key))
        throw ConfigError("config: missing key '" + std::string(key) + "' in " + where);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: bad value for '" + std::string(key) + "' in " + where);
    }
}

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback,
           const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: bad value for '" + std::string(key) + "' in " + where);
    }
}

inline PhaseGrid parse_grid(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"n_x", "n_v", "dim", "half_len_x", "half_len_v",
                         "t_start", "t_end", "n_t"},
                        "grid");
    PhaseGrid g;
    g.n_x = field_as<int>(j, "n_x", "grid");
    g.n_v = field_as<int>(j, "n_v", "grid");
    g.dim = field_or<int>(j, "dim", 1, "grid");
    g.half_len_x = field_or<double>(j, "half_len_x", g.half_len_x, "grid");
    g.half_len_v = field_or<double>(j, "half_len_v", g.half_len_v, "grid");
    g.t_start = field_as<double>(j, "t_start", "grid");
    g.t_end = field_as<double>(j, "t_end", "grid");
    g.n_t = field_as<int>(j, "n_t", "grid");
    g.validate();
    return g;
}

inline KineticParams parse_params(const nlohmann::json& j) {
    reject_unknown_keys(j, {"beta", "dim", "lambda", "big_lambda"}, "params");
    KineticParams p;
    p.beta = field_as<double>(j, "beta", "params");
    p.dim = field_or<int>(j, "dim", 1, "params");
    p.lambda = field_or<double>(j, "lambda", 1.0, "params");
    p.big_lambda = field_or<double>(j, "big_lambda", p.lambda, "params");
    p.validate();
    return p;
}

inline FormSpec parse_form(const nlohmann::json& j, double default_beta,
                           std::uint64_t default_seed) {
    reject_unknown_keys(
        j, {"kind", "beta", "lambda", "big_lambda", "c_shift", "value", "seed"},
        "form");
    FormSpec f;
    const std::string kind = field_as<std::string>(j, "kind", "form");
    if (kind == "fractional-multiplier")
        f.kind = FormSpec::Kind::FractionalMultiplier;
    else if (kind == "matrix-constant")
        f.kind = FormSpec::Kind::MatrixConstant;
    else if (kind == "matrix-random")
        f.kind = FormSpec::Kind::MatrixRandom;
    else if (kind == "fractional-kernel")
        f.kind = FormSpec::Kind::FractionalKernel;
    else
        throw ConfigError("config: unknown form kind: " + kind);
    f.beta = field_or<double>(j, "beta", default_beta, "form");
    f.lambda = field_or<double>(j, "lambda", 1.0, "form");
    f.big_lambda = field_or<double>(j, "big_lambda", f.lambda, "form");
    f.c_shift = field_or<double>(j, "c_shift", 0.0, "form");
    f.value = field_or<double>(j, "value", f.lambda, "form");
    f.seed = field_or<std::uint64_t>(j, "seed", default_seed, "form");
    return f;
}

inline SourceSpec parse_generator(const nlohmann::json& j,
                                  std::uint64_t default_seed,
                                  const std::string& where) {
    reject_unknown_keys(j,
                        {"slot", "kind", "amplitude", "mode_x", "mode_v",
                         "band_lo", "band_hi", "seed", "width", "cutoff",
                         "window"},
                        where);
    SourceSpec s;
    const std::string kind = field_as<std::string>(j, "kind", where);
    if (kind == "single-mode")
        s.kind = SourceSpec::Kind::SingleMode;
    else if (kind == "random-band-limited")
        s.kind = SourceSpec::Kind::RandomBandLimited;
    else if (kind == "gaussian-bump-modes")
        s.kind = SourceSpec::Kind::GaussianBumpModes;
    else
        throw ConfigError("config: unknown generator: " + kind);
    s.amplitude = field_or<double>(j, "amplitude", 1.0, where);
    if (j.contains("mode_x")) {
        const auto v = field_as<std::vector<int>>(j, "mode_x", where);
        if (v.empty() || v.size() > 3)
            throw ConfigError("config: mode_x needs 1..3 entries in " + where);
        for (std::size_t a = 0; a < v.size(); ++a) s.mode_x[a] = v[a];
    }
    if (j.contains("mode_v")) {
        const auto v = field_as<std::vector<int>>(j, "mode_v", where);
        if (v.empty() || v.size() > 3)
            throw ConfigError("config: mode_v needs 1..3 entries in " + where);
        for (std::size_t a = 0; a < v.size(); ++a) s.mode_v[a] = v[a];
    }
    s.band_lo = field_or<int>(j, "band_lo", s.band_lo, where);
    s.band_hi = field_or<int>(j, "band_hi", s.band_hi, where);
    s.seed = field_or<std::uint64_t>(j, "seed", default_seed, where);
    s.width = field_or<double>(j, "width", s.width, where);
    s.cutoff = field_or<int>(j, "cutoff", s.cutoff, where);
    if (j.contains("window")) {
        const auto w = field_as<std::vector<double>>(j, "window", where);
        if (w.size() != 2)
            throw ConfigError("config: window needs exactly [t0, t1] in " + where);
        s.windowed = true;
        s.window.t0 = w[0];
        s.window.t1 = w[1];
        s.window.validate();
    }
    return s;
}

}  // namespace detail

/// Parses and validates a config document.  Every object is checked for
/// unknown keys so a typo fails the run instead of silently changing it.
inline RunConfig parse_config(const nlohmann::json& doc) {
    detail::reject_unknown_keys(doc,
                                {"command", "params", "grid", "form", "sources",
                                 "initial", "out", "seed", "threads", "samples",
                                 "ratio_ceiling"},
                                "config root");
    RunConfig c;
    c.echo = doc;
    c.command = parse_command(
        detail::field_as<std::string>(doc, "command", "config root"));
    c.seed = detail::field_or<std::uint64_t>(doc, "seed", 1, "config root");
    c.threads = detail::field_or<int>(doc, "threads", 1, "config root");
    if (c.threads < 1) throw ConfigError("config: threads must be >= 1");
    c.out_dir = detail::field_or<std::string>(doc, "out", ".", "config root");
    c.samples =
        detail::field_or<std::int64_t>(doc, "samples", 1000, "config root");
    if (c.samples < 1) throw ConfigError("config: samples must be >= 1");
    c.ratio_ceiling = detail::field_or<double>(doc, "ratio_ceiling",
                                               c.ratio_ceiling, "config root");

    if (!doc.contains("params"))
        throw ConfigError("config: missing key 'params' in config root");
    c.params = detail::parse_params(doc.at("params"));

    const bool needs_grid = c.command != Command::VerifyKernel &&
                            c.command != Command::VerifyOperatorNorms;
    if (doc.contains("grid"))
        c.grid = detail::parse_grid(doc.at("grid"));
    else if (needs_grid)
        throw ConfigError("config: missing key 'grid' in config root");

    if (doc.contains("form"))
        c.form = detail::parse_form(doc.at("form"), c.params.beta, c.seed);

    if (doc.contains("sources")) {
        const auto& arr = doc.at("sources");
        if (!arr.is_array())
            throw ConfigError("config: sources must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto& e = arr[i];
            const std::string where = "sources[" + std::to_string(i) + "]";
            SourceEntry entry;
            if (e.contains("file")) {
                detail::reject_unknown_keys(e, {"slot", "file"}, where);
                entry.file = detail::field_as<std::string>(e, "file", where);
            } else {
                entry.generator = detail::parse_generator(e, c.seed, where);
            }
            entry.slot = detail::field_or<int>(e, "slot", 1, where);
            if (entry.slot < 1 || entry.slot > 3)
                throw ConfigError("config: " + where + " slot must be 1..3");
            c.sources.push_back(std::move(entry));
        }
    }

    if (doc.contains("initial")) {
        const auto& e = doc.at("initial");
        if (e.contains("file")) {
            detail::reject_unknown_keys(e, {"file"}, "initial");
            c.initial_file = detail::field_as<std::string>(e, "file", "initial");
        } else {
            c.initial = detail::parse_generator(e, c.seed, "initial");
        }
    }

    switch (c.command) {
        case Command::SolveRough:
        case Command::EnergyReport:
            if (!c.form)
                throw ConfigError("config: rough commands need a form block");
            if (c.grid.dim != 1 || c.params.dim != 1)
                throw ConfigError("config: rough commands support dim = 1 only");
            break;
        case Command::SolveCauchy:
            if (!c.initial && !c.initial_file)
                throw ConfigError("config: solve-cauchy needs initial data");
            break;
        default:
            break;
    }
    return c;
}

/// Raw document load, separate from parsing so callers can patch overrides
/// (seed, output directory) into the document before generator seeds are
/// resolved.
inline nlohmann::json load_config_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
}

inline RunConfig load_config(const std::string& path) {
    return parse_config(load_config_document(path));
}

}  // namespace kfp

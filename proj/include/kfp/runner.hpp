#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kfp/bounds.hpp"
#include "kfp/config.hpp"
#include "kfp/diagnostics.hpp"
#include "kfp/duhamel.hpp"
#include "kfp/field_io.hpp"
#include "kfp/rough.hpp"
#include "kfp/sources.hpp"

namespace kfp {

inline constexpr const char* kfp_version = "0.1.0";

namespace detail {

/// CSV sink: every float goes through %.17g, so reruns are byte-identical
/// and values round-trip exactly.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path) : out_(path) {
        if (!out_)
            throw ConfigError("cannot open report for writing: " + path.string());
    }

    CsvWriter& cell(const std::string& s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
        return *this;
    }
    CsvWriter& cell(double v) { return cell(fmt_double(v)); }
    CsvWriter& cell(std::int64_t v) { return cell(std::to_string(v)); }
    CsvWriter& cell(int v) { return cell(std::to_string(v)); }
    void endrow() {
        out_ << '\n';
        first_ = true;
    }

  private:
    std::ofstream out_;
    bool first_ = true;
};

/// Builds the run's source decomposition: generators evaluated on the grid,
/// file entries read and layout-checked.  Entries bound to the same slot
/// accumulate.
inline SourceDecomposition assemble_sources(const RunConfig& c) {
    SourceDecomposition S;
    auto slot_of = [&](int slot) -> std::optional<SpectralField>& {
        return slot == 1 ? S.s1 : slot == 2 ? S.s2 : S.s3;
    };
    for (const auto& entry : c.sources) {
        SpectralField part(c.grid, Frame::Physical);
        if (entry.generator) {
            part = generate_source(*entry.generator, c.grid);
        } else {
            FieldFile ff = read_field(*entry.file);
            if (!(ff.field.grid == c.grid))
                throw ConfigError("source file grid does not match the run grid: " +
                                  *entry.file);
            if (ff.field.frame != Frame::Physical)
                throw ConfigError("source file must hold a physical-frame field: " +
                                  *entry.file);
            part = std::move(ff.field);
        }
        auto& slot = slot_of(entry.slot);
        if (!slot) {
            slot = std::move(part);
        } else {
            for (std::size_t i = 0; i < slot->values.size(); ++i)
                slot->values[i] += part.values[i];
        }
    }
    return S;
}

/// Initial slice for the Cauchy command: generator pattern at unit envelope,
/// or slice 0 of a field file on the same grid.
inline std::vector<cplx> assemble_initial(const RunConfig& c) {
    std::vector<cplx> psi(static_cast<std::size_t>(c.grid.slice_size()));
    if (c.initial) {
        SourceSpec spec = *c.initial;
        if (spec.windowed)
            throw ConfigError("initial data takes no time window");
        const SpectralField f = generate_source(spec, c.grid);
        const auto s = f.slice(0);
        std::copy(s.begin(), s.end(), psi.begin());
    } else if (c.initial_file) {
        FieldFile ff = read_field(*c.initial_file);
        if (!(ff.field.grid == c.grid))
            throw ConfigError("initial file grid does not match the run grid: " +
                              *c.initial_file);
        if (ff.field.frame != Frame::Physical)
            throw ConfigError("initial file must hold a physical-frame field: " +
                              *c.initial_file);
        const auto s = ff.field.slice(0);
        std::copy(s.begin(), s.end(), psi.begin());
    }
    return psi;
}

inline void write_manifest(const RunConfig& c,
                           const std::filesystem::path& dir) {
    nlohmann::json m;
    m["config"] = c.echo;
    m["command"] = command_name(c.command);
    m["seed"] = c.seed;
    m["threads"] = c.threads;
    m["out"] = c.out_dir;
    m["versions"]["field_format"] = FieldFile::version;
    m["versions"]["kfp"] = kfp_version;
    m["versions"]["compiler"] = __VERSION__;
    std::ofstream out(dir / "manifest.json");
    if (!out)
        throw ConfigError("cannot open manifest for writing in " + dir.string());
    out << m.dump(2) << '\n';
}

inline void write_energy_csv(const SpectralField& f,
                             const std::filesystem::path& path) {
    CsvWriter csv(path);
    csv.cell("slice").cell("t").cell("l2_sq");
    csv.endrow();
    for (int n = 0; n < f.grid.n_slices(); ++n) {
        csv.cell(static_cast<std::int64_t>(n))
            .cell(f.grid.t_at(n))
            .cell(f.l2_sq_slice(n));
        csv.endrow();
    }
}

inline void write_ledger_csv(const EnergyLedger& ledger,
                             const std::filesystem::path& path) {
    CsvWriter csv(path);
    csv.cell("step")
        .cell("t")
        .cell("norm_sq_before")
        .cell("norm_sq_after")
        .cell("dissipation")
        .cell("work_s1")
        .cell("work_s2")
        .cell("work_s3")
        .cell("defect_sq")
        .cell("residual")
        .cell("scale");
    csv.endrow();
    for (std::size_t i = 0; i < ledger.steps.size(); ++i) {
        const EnergyStep& s = ledger.steps[i];
        csv.cell(static_cast<std::int64_t>(i))
            .cell(s.t)
            .cell(s.norm_sq_before)
            .cell(s.norm_sq_after)
            .cell(s.dissipation)
            .cell(s.work_s1)
            .cell(s.work_s2)
            .cell(s.work_s3)
            .cell(s.defect_sq)
            .cell(s.residual())
            .cell(s.scale());
        csv.endrow();
    }
}

inline void append_bound_row(CsvWriter& csv, const BoundReport& rep,
                             double gamma, bool with_gamma) {
    csv.cell(estimate_name(rep.id));
    if (with_gamma) csv.cell(gamma);
    csv.cell(rep.sample_count)
        .cell(rep.worst_ratio_low)
        .cell(rep.worst_ratio_high);
    csv.endrow();
}

inline void run_verify_kernel(const RunConfig& c,
                              const std::filesystem::path& dir) {
    CsvWriter csv(dir / "kernel.csv");
    csv.cell("estimate").cell("samples").cell("worst_ratio_low").cell(
        "worst_ratio_high");
    csv.endrow();

    const BoundReport comp = estimate_comp_constants(
        c.params.beta, c.params.dim, c.samples, c.seed, c.threads);
    comp.validate();
    append_bound_row(csv, comp, 0.0, false);

    KernelScan scan;
    scan.n_modes = c.samples;
    scan.seed = c.seed;
    scan.threads = c.threads;
    for (EstimateId id : {EstimateId::K1, EstimateId::K2, EstimateId::K5,
                          EstimateId::K6, EstimateId::EquivAB}) {
        const BoundReport rep =
            verify_kernel_integrals(id, c.params.beta, c.params.dim, scan);
        rep.validate();
        append_bound_row(csv, rep, 0.0, false);
    }
}

inline void run_verify_operator_norms(const RunConfig& c,
                                      const std::filesystem::path& dir) {
    CsvWriter csv(dir / "bounds.csv");
    csv.cell("estimate").cell("gamma").cell("samples").cell("worst_ratio_low")
        .cell("worst_ratio_high");
    csv.endrow();
    OperatorScan scan;
    scan.n_modes = c.samples;
    scan.seed = c.seed;
    scan.threads = c.threads;
    for (double gamma : {0.0, c.params.beta, 2.0 * c.params.beta})
        for (EstimateId id : {EstimateId::T_L2L2, EstimateId::T_L1L2,
                              EstimateId::T_L2C0, EstimateId::T_L1C0}) {
            const BoundReport rep =
                operator_norm_scan(id, gamma, c.params.beta, c.params.dim, scan);
            rep.validate();
            append_bound_row(csv, rep, gamma, true);
        }
}

inline void run_verify_embedding(const RunConfig& c,
                                 const std::filesystem::path& dir) {
    SourceDecomposition S = assemble_sources(c);
    if (!S.s1 && !S.s2 && !S.s3)
        throw ConfigError("verify-embedding needs at least one source");
    const SpectralField f = solve_forward(S, c.params, c.threads);
    SourceDecomposition transport;
    transport.s1 = detail::transport_of(f, c.params, c.threads);
    const EmbeddingReport rep =
        embedding_report(f, transport, c.params, c.ratio_ceiling, c.threads);

    CsvWriter csv(dir / "embedding.csv");
    csv.cell("lhs_sup_t")
        .cell("lhs_dx")
        .cell("rhs_dv")
        .cell("rhs_s1")
        .cell("rhs_s2")
        .cell("rhs_s3")
        .cell("ratio")
        .cell("kappa")
        .cell("lebesgue_norm")
        .cell("kappa_constant")
        .cell("decomposition_residual")
        .cell("violation");
    csv.endrow();
    csv.cell(rep.lhs_sup_t)
        .cell(rep.lhs_dx)
        .cell(rep.rhs_dv)
        .cell(rep.rhs_s1)
        .cell(rep.rhs_s2)
        .cell(rep.rhs_s3)
        .cell(rep.ratio)
        .cell(rep.kappa_check ? rep.kappa_check->kappa : 0.0)
        .cell(rep.kappa_check ? rep.kappa_check->lebesgue_norm : 0.0)
        .cell(rep.kappa_check ? rep.kappa_check->constant : 0.0)
        .cell(rep.decomposition_residual)
        .cell(rep.violation ? 1 : 0);
    csv.endrow();
}

}  // namespace detail

/// Executes one configured pipeline, writing every artifact under the
/// config's output directory.  Errors surface as the library exception
/// types; the CLI maps them to exit codes.
inline void run(const RunConfig& config) {
    const std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir);

    switch (config.command) {
        case Command::SolveKolmogorov: {
            SourceDecomposition S = detail::assemble_sources(config);
            if (!S.s1 && !S.s2 && !S.s3)
                S.s1 = SpectralField(config.grid, Frame::Physical);
            const SpectralField f = solve_forward(S, config.params, config.threads);
            write_field((dir / "field.kfpf").string(), f, config.params.beta);
            detail::write_energy_csv(f, dir / "energy.csv");
            break;
        }
        case Command::SolveCauchy: {
            SourceDecomposition S = detail::assemble_sources(config);
            const std::vector<cplx> psi = detail::assemble_initial(config);
            const bool any = S.s1 || S.s2 || S.s3;
            const SpectralField f =
                solve_cauchy(psi, any ? &S : nullptr, config.grid, config.params,
                             config.threads);
            write_field((dir / "field.kfpf").string(), f, config.params.beta);
            detail::write_energy_csv(f, dir / "energy.csv");
            break;
        }
        case Command::SolveRough:
        case Command::EnergyReport: {
            const DiffusionForm form = config.form->build(config.grid);
            SourceDecomposition S = detail::assemble_sources(config);
            const bool any = S.s1 || S.s2 || S.s3;
            std::vector<cplx> psi = detail::assemble_initial(config);
            const RoughSolution sol =
                weak_solve(form, any ? &S : nullptr,
                           (config.initial || config.initial_file) ? &psi : nullptr,
                           config.grid, config.threads);
            if (config.command == Command::SolveRough)
                write_field((dir / "field.kfpf").string(), sol.field,
                            config.params.beta);
            detail::write_ledger_csv(sol.ledger, dir / "ledger.csv");
            break;
        }
        case Command::VerifyKernel:
            detail::run_verify_kernel(config, dir);
            break;
        case Command::VerifyOperatorNorms:
            detail::run_verify_operator_norms(config, dir);
            break;
        case Command::VerifyEmbedding:
            detail::run_verify_embedding(config, dir);
            break;
    }
    detail::write_manifest(config, dir);
}

}  // namespace kfp

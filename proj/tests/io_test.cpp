#include "kfp/runner.hpp"

#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kfp/config.hpp"
#include "kfp/field_io.hpp"
#include "kfp/sources.hpp"

namespace {

using kfp::cplx;
namespace fs = std::filesystem;

/// Fresh directory under the system temp root, removed on scope exit.
struct TempDir {
    fs::path path;

    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path = fs::temp_directory_path() /
               ("kfp_io_test_" + std::to_string(rng()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const char* name) const { return (path / name).string(); }
};

kfp::PhaseGrid small_grid(int n_x = 8, int n_v = 8, int n_t = 6) {
    kfp::PhaseGrid g;
    g.n_x = n_x;
    g.n_v = n_v;
    g.dim = 1;
    g.t_start = 0.0;
    g.t_end = 0.5;
    g.n_t = n_t;
    return g;
}

int mode_index(int k, int n) { return k >= 0 ? k : n + k; }

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

kfp::RunConfig config_from(const char* text) {
    return kfp::parse_config(nlohmann::json::parse(text));
}

}  // namespace

TEST(SourceGen, SingleModeOccupiesOneEntry) {
    const auto g = small_grid();
    kfp::SourceSpec spec;
    spec.kind = kfp::SourceSpec::Kind::SingleMode;
    spec.amplitude = 2.5;
    spec.mode_x[0] = 1;
    spec.mode_v[0] = -2;
    const auto f = kfp::generate_source(spec, g);
    const std::int64_t hit =
        mode_index(1, g.n_x) * g.n_v + mode_index(-2, g.n_v);
    for (int n = 0; n <= g.n_t; ++n) {
        const auto s = f.slice(n);
        for (std::int64_t i = 0; i < g.slice_size(); ++i) {
            if (i == hit)
                EXPECT_EQ(s[static_cast<std::size_t>(i)], cplx(2.5));
            else
                EXPECT_EQ(s[static_cast<std::size_t>(i)], cplx(0.0));
        }
    }
}

TEST(SourceGen, SingleModeOutsideLatticeThrows) {
    const auto g = small_grid();
    kfp::SourceSpec spec;
    spec.mode_x[0] = 4;  // valid signed range on n = 8 is [-4, 3]
    EXPECT_THROW(kfp::generate_source(spec, g), kfp::ConfigError);
}

TEST(SourceGen, RandomBandLimitedIsHermitianAndDeterministic) {
    const auto g = small_grid(16, 16, 4);
    kfp::SourceSpec spec;
    spec.kind = kfp::SourceSpec::Kind::RandomBandLimited;
    spec.band_lo = 2;
    spec.band_hi = 5;
    spec.seed = 77;
    const auto f = kfp::generate_source(spec, g);
    const auto f2 = kfp::generate_source(spec, g);
    EXPECT_EQ(f.values, f2.values);
    double defect = 0.0, scale = 0.0;
    kfp::detail::hermitian_defect(f, defect, scale);
    EXPECT_GT(scale, 0.0);
    EXPECT_EQ(defect, 0.0);
    // in-band support only: max-norm of (k, m) must lie in [band_lo, band_hi]
    for (int k = -g.n_x / 2 + 1; k < g.n_x / 2; ++k)
        for (int m = -g.n_v / 2 + 1; m < g.n_v / 2; ++m) {
            const int mag = std::max(std::abs(k), std::abs(m));
            const cplx v =
                f.at(0, mode_index(k, g.n_x), mode_index(m, g.n_v));
            if (mag < spec.band_lo || mag > spec.band_hi) {
                EXPECT_EQ(v, cplx(0.0)) << k << "," << m;
            }
        }
}

TEST(SourceGen, DifferentSeedsDiffer) {
    const auto g = small_grid(16, 16, 4);
    kfp::SourceSpec spec;
    spec.kind = kfp::SourceSpec::Kind::RandomBandLimited;
    spec.band_hi = 5;
    spec.seed = 1;
    auto f = kfp::generate_source(spec, g);
    spec.seed = 2;
    const auto f2 = kfp::generate_source(spec, g);
    EXPECT_NE(f.values, f2.values);
}

TEST(SourceGen, WindowVanishesOutsideSupportExactly) {
    const auto g = small_grid(8, 8, 10);
    kfp::SourceSpec spec;
    spec.mode_x[0] = 1;
    spec.mode_v[0] = 1;
    spec.windowed = true;
    spec.window = {0.1, 0.35};
    const auto f = kfp::generate_source(spec, g);
    for (int n = 0; n <= g.n_t; ++n) {
        const double t = g.t_at(n);
        const cplx v = f.at(n, 1, 1);
        if (t <= 0.1 || t >= 0.35)
            EXPECT_EQ(v, cplx(0.0)) << "slice " << n;
        else
            EXPECT_GT(std::abs(v), 0.0) << "slice " << n;
    }
}

TEST(SourceGen, GaussianBumpIsRealAndEven) {
    const auto g = small_grid(16, 16, 3);
    kfp::SourceSpec spec;
    spec.kind = kfp::SourceSpec::Kind::GaussianBumpModes;
    spec.width = 1.5;
    spec.cutoff = 5;
    const auto f = kfp::generate_source(spec, g);
    double mass = 0.0;
    for (std::int64_t ix = 0; ix < g.n_x; ++ix)
        for (std::int64_t iv = 0; iv < g.n_v; ++iv) {
            const cplx v = f.at(0, ix, iv);
            EXPECT_EQ(v.imag(), 0.0);
            EXPECT_EQ(v, f.at(0, g.negated_x(ix), g.negated_v(iv)));
            mass += std::abs(v);
        }
    EXPECT_GT(mass, 0.0);
}

TEST(SourceGen, BandBeyondLatticeThrows) {
    const auto g = small_grid();
    kfp::SourceSpec spec;
    spec.kind = kfp::SourceSpec::Kind::RandomBandLimited;
    spec.band_hi = 4;  // needs band_hi < n/2 = 4
    EXPECT_THROW(kfp::generate_source(spec, g), kfp::ConfigError);
    kfp::SourceSpec bump;
    bump.kind = kfp::SourceSpec::Kind::GaussianBumpModes;
    bump.cutoff = 4;
    EXPECT_THROW(kfp::generate_source(bump, g), kfp::ConfigError);
}

TEST(SourceGen, BackwardWindowThrows) {
    const auto g = small_grid();
    kfp::SourceSpec spec;
    spec.windowed = true;
    spec.window = {0.4, 0.4};
    EXPECT_THROW(kfp::generate_source(spec, g), kfp::ConfigError);
}

TEST(FieldRoundTrip, BitExactThroughDisk) {
    TempDir dir;
    const auto g = small_grid(8, 16, 5);
    kfp::SpectralField f(g, kfp::Frame::Physical);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : f.values) v = cplx(u(rng), u(rng));
    kfp::write_field(dir.file("f.kfpf"), f, 0.75);

    const auto back = kfp::read_field(dir.file("f.kfpf"));
    EXPECT_EQ(back.beta, 0.75);
    EXPECT_FALSE(back.hermitian);
    EXPECT_EQ(back.field.frame, kfp::Frame::Physical);
    EXPECT_EQ(back.field.grid.n_x, g.n_x);
    EXPECT_EQ(back.field.grid.n_v, g.n_v);
    EXPECT_EQ(back.field.grid.n_t, g.n_t);
    EXPECT_EQ(back.field.grid.t_end, g.t_end);
    ASSERT_EQ(back.field.values.size(), f.values.size());
    EXPECT_EQ(std::memcmp(back.field.values.data(), f.values.data(),
                          f.values.size() * sizeof(cplx)),
              0);

    // a second write of the load is byte-identical to the first file
    kfp::write_field(dir.file("g.kfpf"), back.field, back.beta);
    EXPECT_EQ(read_bytes(dir.file("f.kfpf")), read_bytes(dir.file("g.kfpf")));
}

TEST(FieldRoundTrip, HermitianFlagMeasuredOnWriteCheckedOnRead) {
    TempDir dir;
    const auto g = small_grid(8, 8, 2);
    kfp::SourceSpec spec;
    spec.kind = kfp::SourceSpec::Kind::RandomBandLimited;
    spec.band_lo = 1;
    spec.band_hi = 3;
    spec.seed = 3;
    const auto f = kfp::generate_source(spec, g);
    kfp::write_field(dir.file("h.kfpf"), f, 0.5);
    EXPECT_TRUE(kfp::read_field(dir.file("h.kfpf")).hermitian);

    // flip one payload double: the declared symmetry no longer holds
    auto bytes = read_bytes(dir.file("h.kfpf"));
    const std::size_t payload = f.values.size() * sizeof(cplx);
    double big = 64.0;
    std::memcpy(bytes.data() + bytes.size() - payload + 8, &big, sizeof big);
    std::ofstream(dir.file("bad.kfpf"), std::ios::binary)
        << std::string_view(bytes);
    EXPECT_THROW(kfp::read_field(dir.file("bad.kfpf")), kfp::ConfigError);
}

TEST(FieldRoundTrip, TruncatedPayloadThrows) {
    TempDir dir;
    const auto g = small_grid(8, 8, 2);
    kfp::SpectralField f(g, kfp::Frame::Physical);
    f.at(0, 1, 1) = cplx(1.0, -2.0);
    kfp::write_field(dir.file("f.kfpf"), f, 1.0);
    auto bytes = read_bytes(dir.file("f.kfpf"));
    bytes.resize(bytes.size() - 16);
    std::ofstream(dir.file("cut.kfpf"), std::ios::binary)
        << std::string_view(bytes);
    EXPECT_THROW(kfp::read_field(dir.file("cut.kfpf")), kfp::ConfigError);
}

TEST(FieldRoundTrip, RejectsForeignHeader) {
    TempDir dir;
    std::ofstream(dir.file("x.kfpf")) << "not-a-field 3\n";
    EXPECT_THROW(kfp::read_field(dir.file("x.kfpf")), kfp::ConfigError);
    EXPECT_THROW(kfp::read_field(dir.file("missing.kfpf")), kfp::ConfigError);
}

TEST(ConfigParse, AcceptsFullDocumentAndDefaults) {
    const auto c = config_from(R"({
        "command": "solve-kolmogorov",
        "params": {"beta": 0.75},
        "grid": {"n_x": 8, "n_v": 8, "t_start": 0.0, "t_end": 1.0, "n_t": 16},
        "sources": [{"slot": 1, "kind": "single-mode",
                     "mode_x": [1], "mode_v": [2]}],
        "seed": 12
    })");
    EXPECT_EQ(c.command, kfp::Command::SolveKolmogorov);
    EXPECT_EQ(c.params.beta, 0.75);
    EXPECT_EQ(c.grid.n_x, 8);
    EXPECT_EQ(c.seed, 12u);
    EXPECT_EQ(c.threads, 1);
    EXPECT_EQ(c.out_dir, ".");
    ASSERT_EQ(c.sources.size(), 1u);
    EXPECT_EQ(c.sources[0].slot, 1);
}

TEST(ConfigParse, GeneratorSeedDefaultsToConfigSeed) {
    const auto c = config_from(R"({
        "command": "solve-kolmogorov",
        "params": {"beta": 0.5},
        "grid": {"n_x": 8, "n_v": 8, "t_start": 0.0, "t_end": 1.0, "n_t": 8},
        "sources": [{"slot": 1, "kind": "random-band-limited", "band_hi": 3},
                    {"slot": 2, "kind": "random-band-limited", "band_hi": 3,
                     "seed": 99}],
        "seed": 41
    })");
    ASSERT_TRUE(c.sources[0].generator.has_value());
    EXPECT_EQ(c.sources[0].generator->seed, 41u);
    EXPECT_EQ(c.sources[1].generator->seed, 99u);
}

TEST(ConfigParse, UnknownKeysRejectedAtEveryLevel) {
    EXPECT_THROW(config_from(R"({"command": "verify-kernel",
        "params": {"beta": 1.0}, "extra": 1})"),
                 kfp::ConfigError);
    EXPECT_THROW(config_from(R"({"command": "verify-kernel",
        "params": {"beta": 1.0, "wat": 2}})"),
                 kfp::ConfigError);
    EXPECT_THROW(config_from(R"({"command": "solve-kolmogorov",
        "params": {"beta": 1.0},
        "grid": {"n_x": 8, "n_v": 8, "t_start": 0, "t_end": 1, "n_t": 4,
                 "pad": true}})"),
                 kfp::ConfigError);
    EXPECT_THROW(config_from(R"({"command": "solve-kolmogorov",
        "params": {"beta": 1.0},
        "grid": {"n_x": 8, "n_v": 8, "t_start": 0, "t_end": 1, "n_t": 4},
        "sources": [{"slot": 1, "kind": "single-mode", "mode_x": [1],
                     "mode_v": [1], "phase": 0.2}]})"),
                 kfp::ConfigError);
}

TEST(ConfigParse, CommandNamesRoundTrip) {
    for (kfp::Command c :
         {kfp::Command::SolveKolmogorov, kfp::Command::SolveCauchy,
          kfp::Command::SolveRough, kfp::Command::VerifyKernel,
          kfp::Command::VerifyOperatorNorms, kfp::Command::VerifyEmbedding,
          kfp::Command::EnergyReport})
        EXPECT_EQ(kfp::parse_command(kfp::command_name(c)), c);
    EXPECT_THROW(kfp::parse_command("solveKolmogorov"), kfp::ConfigError);
}

TEST(ConfigParse, CommandRequirementsEnforced) {
    // cauchy needs initial data
    EXPECT_THROW(config_from(R"({"command": "solve-cauchy",
        "params": {"beta": 0.5},
        "grid": {"n_x": 8, "n_v": 8, "t_start": 0, "t_end": 1, "n_t": 4}})"),
                 kfp::ConfigError);
    // rough needs a form
    EXPECT_THROW(config_from(R"({"command": "solve-rough",
        "params": {"beta": 0.5},
        "grid": {"n_x": 8, "n_v": 8, "t_start": 0, "t_end": 1, "n_t": 4},
        "sources": [{"slot": 1, "kind": "single-mode", "mode_x": [1],
                     "mode_v": [1]}]})"),
                 kfp::ConfigError);
    // kernel scans carry no grid at all
    EXPECT_NO_THROW(config_from(
        R"({"command": "verify-kernel", "params": {"beta": 1.0}})"));
}

TEST(ConfigParse, InitialFileVariant) {
    const auto c = config_from(R"({
        "command": "solve-cauchy",
        "params": {"beta": 0.5},
        "grid": {"n_x": 8, "n_v": 8, "t_start": 0.0, "t_end": 1.0, "n_t": 4},
        "initial": {"file": "state.kfpf"}
    })");
    EXPECT_FALSE(c.initial.has_value());
    ASSERT_TRUE(c.initial_file.has_value());
    EXPECT_EQ(*c.initial_file, "state.kfpf");
}

TEST(RunnerSmoke, KolmogorovArtifactsAreDeterministic) {
    TempDir a, b;
    const std::string body = R"({
        "command": "solve-kolmogorov",
        "params": {"beta": 0.6},
        "grid": {"n_x": 8, "n_v": 16, "t_start": 0.0, "t_end": 0.5, "n_t": 16},
        "sources": [{"slot": 1, "kind": "random-band-limited", "band_hi": 3,
                     "window": [0.1, 0.4]}],
        "seed": 8)";
    auto ca = config_from((body + R"(, "out": ")" + a.path.string() + "\"}")
                              .c_str());
    auto cb = config_from((body + R"(, "out": ")" + b.path.string() + "\"}")
                              .c_str());
    kfp::run(ca);
    kfp::run(cb);
    // manifests differ in the output path only; the data products must not
    for (const char* name : {"energy.csv", "field.kfpf"}) {
        const auto bytes = read_bytes(a.file(name));
        EXPECT_FALSE(bytes.empty()) << name;
        EXPECT_EQ(bytes, read_bytes(b.file(name))) << name;
    }
    EXPECT_FALSE(read_bytes(a.file("manifest.json")).empty());
    // windowed source: nothing has happened before the window opens
    std::ifstream energy(a.file("energy.csv"));
    std::string line;
    std::getline(energy, line);
    EXPECT_EQ(line, "slice,t,l2_sq");
    std::getline(energy, line);
    EXPECT_EQ(line, "0,0,0");
}

TEST(RunnerSmoke, RoughLedgerBalancesEveryStep) {
    TempDir dir;
    const auto c = config_from((std::string(R"({
        "command": "energy-report",
        "params": {"beta": 0.5},
        "grid": {"n_x": 8, "n_v": 16, "t_start": 0.0, "t_end": 0.5, "n_t": 32},
        "form": {"kind": "matrix-random", "lambda": 1.0, "big_lambda": 2.0},
        "sources": [{"slot": 1, "kind": "gaussian-bump-modes", "width": 1.5,
                     "cutoff": 3, "window": [0.05, 0.45]}],
        "seed": 4, "out": ")") + dir.path.string() + "\"}")
                                   .c_str());
    kfp::run(c);
    std::ifstream ledger(dir.file("ledger.csv"));
    std::string line;
    std::getline(ledger, line);
    EXPECT_EQ(line,
              "step,t,norm_sq_before,norm_sq_after,dissipation,work_s1,"
              "work_s2,work_s3,defect_sq,residual,scale");
    int rows = 0;
    while (std::getline(ledger, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> cols;
        while (std::getline(ss, cell, ',')) cols.push_back(std::stod(cell));
        ASSERT_EQ(cols.size(), 11u);
        EXPECT_LE(cols[9], 1e-10 * std::max(cols[10], 1e-30)) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 32);
}

TEST(RunnerSmoke, FieldFileFeedsBackAsInitialData) {
    TempDir dir;
    const std::string grid_text =
        R"("grid": {"n_x": 8, "n_v": 16, "t_start": 0.0, "t_end": 0.5, "n_t": 8})";
    auto first = config_from((std::string(R"({
        "command": "solve-cauchy",
        "params": {"beta": 0.5}, )") + grid_text + R"(,
        "initial": {"kind": "gaussian-bump-modes", "width": 1.5, "cutoff": 3},
        "out": ")" + dir.path.string() + "\"}")
                                 .c_str());
    kfp::run(first);
    auto second = config_from((std::string(R"({
        "command": "solve-cauchy",
        "params": {"beta": 0.5}, )") + grid_text + R"(,
        "initial": {"file": ")" + dir.file("field.kfpf") + R"("},
        "out": ")" + (dir.path / "again").string() + "\"}")
                                  .c_str());
    kfp::run(second);
    // restart consumes slice 0 of the stored field: initial masses agree
    std::string l1, l2;
    std::ifstream e1(dir.file("energy.csv")), e2(dir.path / "again" / "energy.csv");
    std::getline(e1, l1);
    std::getline(e2, l2);
    std::getline(e1, l1);
    std::getline(e2, l2);
    EXPECT_EQ(l1, l2);
}

TEST(RunnerSmoke, MismatchedRestartGridRejected) {
    TempDir dir;
    const auto g = small_grid(8, 8, 4);
    kfp::SpectralField f(g, kfp::Frame::Physical);
    f.at(0, 1, 1) = cplx(0.5, 0.0);
    kfp::write_field(dir.file("f.kfpf"), f, 0.5);
    auto c = config_from((std::string(R"({
        "command": "solve-cauchy",
        "params": {"beta": 0.5},
        "grid": {"n_x": 8, "n_v": 16, "t_start": 0.0, "t_end": 0.5, "n_t": 4},
        "initial": {"file": ")") + dir.file("f.kfpf") + R"("},
        "out": ")" + (dir.path / "out").string() + "\"}")
                             .c_str());
    EXPECT_THROW(kfp::run(c), kfp::ConfigError);
}

TEST(RunnerSmoke, KernelScanCsvWellFormed) {
    TempDir dir;
    auto c = config_from((std::string(R"({
        "command": "verify-kernel",
        "params": {"beta": 0.75},
        "samples": 25, "seed": 6,
        "out": ")") + dir.path.string() + "\"}")
                             .c_str());
    kfp::run(c);
    std::ifstream csv(dir.file("kernel.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "estimate,samples,worst_ratio_low,worst_ratio_high");
    std::vector<std::string> names;
    while (std::getline(csv, line))
        names.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(names, (std::vector<std::string>{"Comp", "K1", "K2", "K5", "K6",
                                               "EquivAB"}));
}

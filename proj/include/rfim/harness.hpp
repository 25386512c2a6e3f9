#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/estimators.hpp"
#include "rfim/gibbs.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/lattice.hpp"

namespace rfim {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind {
    MScan,
    Tension,
    Variance,
    Covariance,
    PosT,
    Curdle,
    Mandelbrot,
    HighDisorder,
    Avalanche,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from(const std::string& name);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::MScan;
    double j = 1.0;  // isotropic nearest-neighbor coupling
    DisorderParams params{0.0, 1.0, 0.0};
    std::vector<int> scales = {1, 2, 4};
    int replicas = 1000;
    std::uint64_t base_seed = 1;
    int threads = 0;  // 0 = hardware concurrency
    std::string engine = "exact";
    int sweeps = 20000;
    int burn_in = -1;
    std::string out_dir = "out";

    // kind-specific knobs
    double removal_p = 0.3;  // mandelbrot
    int levels = 3;          // mandelbrot
    int max_level = 3;       // curdle
    int window_radius = 16;  // highdisorder
    double h_min = -6.0;     // avalanche
    double h_max = 6.0;
    int h_steps = 25;
    bool check_identity = false;  // tension: also run the threshold identity
    double alpha = 0.1;           // variance: conditional-variance diagnostic

    CouplingSpec coupling() const { return CouplingSpec::nearest_neighbor(j); }
    GibbsEngine gibbs_engine(std::uint64_t chain_seed) const;
    int worker_count() const;

    void validate() const;          // throws with a description before any work
    std::string canonical() const;  // sorted key=value lines, numerics at 17 digits
    std::uint64_t hash() const;     // FNV-1a64 of canonical()
};

struct ResultRow {
    double scale = 0.0;
    std::string statistic;
    double mean = 0.0;
    double std_error = 0.0;
    int replicas = 0;
    std::uint64_t seed = 0;
};

struct VerdictRow {
    std::string claim;
    Verdict verdict = Verdict::Inconclusive;
    double margin = 0.0;
    std::string detail;
};

struct ResultRecord {
    ExperimentConfig config;
    std::uint64_t config_hash = 0;
    std::vector<ResultRow> rows;
    std::vector<VerdictRow> verdicts;
    std::vector<int> failed_replicas;
    std::vector<std::string> failure_messages;
    std::string grid_text;  // layered grids, when the experiment produces one
    std::string fit_json;   // serialized fit/aux report, when present
    double wall_seconds = 0.0;
};

// Dispatches to the modules and fills a record. Deterministic given the
// config: rerunning yields identical rows for any thread count.
ResultRecord run(const ExperimentConfig& config);

// results.csv + summary.json (+ grid.txt when present) written atomically.
// Timing goes to run.log so the comparable outputs stay byte-identical.
void write_outputs(const ResultRecord& record);

std::string render_csv(const ResultRecord& record);
std::string render_summary_json(const ResultRecord& record);

// Portable JSON form of a spin configuration: region metadata plus the
// row-major spin array.
std::string spin_config_json(const SpinConfig& config);

}  // namespace rfim

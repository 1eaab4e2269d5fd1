#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dq/holder.hpp"
#include "dq/lab.hpp"
#include "dq/path.hpp"
#include "dq/wiener.hpp"

namespace dq {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ensemble container: paths sharing one (d, dt, T) grid.
/// Binary layout (little endian): magic "DQPATH1\0", u32 d, u64 grid length,
/// f64 dt, f64 T, u32 n_paths, then n_paths * len * d doubles row-major.
void save_ensemble(const std::string& file, const std::vector<SampledPath>& paths);
std::vector<SampledPath> load_ensemble(const std::string& file);

/// Codebook layout (little endian): magic "DQCB1\0\0\0", u8 norm kind,
/// f64 q, u32 d, u64 grid length, f64 dt, u64 entry count, u8 contains_zero,
/// then entries as doubles. Round-trips bit-exactly.
void save_codebook(const std::string& file, const Codebook& cb);
Codebook load_codebook(const std::string& file);

/// Human-readable key=value serialization of a layered net plan.
void save_net_plan(const std::string& file, const LayeredNetPlan& plan);
LayeredNetPlan load_net_plan(const std::string& file);

/// Single path as CSV with columns t, x_1..x_d.
void save_path_csv(const std::string& file, const SampledPath& path);

struct CsvOptions {
    bool timestamp = true;  // emit a "# generated ..." comment line
    std::uint64_t seed = 0;
};

/// Curve CSV: rate, log_codebook_size, p, norm, distortion, stderr,
/// sqrt_r_times_d, n_paths, seed. Also writes a gnuplot-friendly long-format
/// companion (suffix .long.csv) with one (rate, metric, value) row per cell.
void save_curve_csv(const std::string& file, const std::vector<DistortionReport>& curve,
                    const CsvOptions& options = {});

/// Per-path encoder records: path id, codeword indices, per-stage errors.
void save_encode_csv(const std::string& file, const std::vector<Reconstruction>& recs,
                     const CsvOptions& options = {});

/// Short header dump for DQPATH1/DQCB1 files (the `inspect` subcommand).
std::string describe_file(const std::string& file);

std::string format_double(double v);  // shortest round-trip formatting

}  // namespace dq

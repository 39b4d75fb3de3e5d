#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spindecay/fit.hpp"
#include "spindecay/sweep.hpp"
#include "spindecay/types.hpp"

namespace spindecay {

/// Ordered key/value headers (std::map so emission order is deterministic).
using HeaderMap = std::map<std::string, std::string>;

/// Writes content to path via a temp file + rename so readers never observe
/// a truncated file.  Always '\n' line endings, '.' decimal separator.
void atomic_write_text(const std::string& path, const std::string& content);

/// Shortest round-trip decimal formatting (std::to_chars); locale-free.
std::string format_double(double v);
std::string format_u64(std::uint64_t v);
double parse_double(const std::string& s, long line = -1);
std::uint64_t parse_u64(const std::string& s, long line = -1);

/// Histogram CSV: '#' comment header block (seed, config hash, grid and
/// geometry metadata), then `time_ns,counts` rows with time at bin centers.
void write_histogram_csv(const std::string& path, const DecayHistogram& h,
                         const HeaderMap& extra = {});

/// Parses a histogram CSV; headers (all `# key=value` lines) are returned
/// through `headers` when non-null.  Throws ParseError with the offending
/// line number on malformed input.
DecayHistogram read_histogram_csv(const std::string& path, HeaderMap* headers = nullptr);

/// Fit reports: '#' comment block then `key=value` lines.
void write_biexp_report(const std::string& path, const BiexpFitResult& r,
                        const HeaderMap& extra = {});
void write_mono_report(const std::string& path, const MonoFitResult& r,
                       const IrfModel& irf, const HeaderMap& extra = {});
void write_calibration_report(const std::string& path, const IrfCalibration& cal,
                              double bin_width_ns, const HeaderMap& extra = {});

struct FitReport {
    HeaderMap comments;
    HeaderMap values;

    const std::string& get(const std::string& key) const;
    /// Long lifetime regardless of model kind (biexp tau1 / mono tau).
    double tau_long_ns() const;
    double tau_long_err_ns() const;
};
FitReport read_fit_report(const std::string& path);

/// Sweep exports (column sets are part of the CLI contract).
void write_sweep_points_csv(const std::string& path, const SweepResult& r,
                            const HeaderMap& extra = {});
void write_sweep_delta_csv(const std::string& path, const SweepResult& r,
                           const HeaderMap& extra = {});
/// Cosine-fit and first-extremum summaries as key-value text.
void write_sweep_summary(const std::string& path, const SweepResult& r,
                         const HeaderMap& extra = {});

/// Generic two-column curve export (used for oracle expectation curves).
void write_curve_csv(const std::string& path, const std::vector<double>& t,
                     const std::vector<double>& y, const std::string& y_column,
                     const HeaderMap& extra = {});

}  // namespace spindecay

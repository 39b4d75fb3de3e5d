#include "spindecay/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spindecay/errors.hpp"

namespace spindecay {

namespace {

constexpr const char* kHistMagic = "spindecay histogram v1";
constexpr const char* kReportMagic = "spindecay report v1";
constexpr const char* kSweepMagic = "spindecay sweep v1";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Splits into lines, dropping a trailing empty line from the final '\n'.
std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

std::vector<std::string> split_csv_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// '# key=value' -> (key, value); returns false for bare comments.
bool parse_header_line(const std::string& line, std::string& key, std::string& value) {
    std::size_t i = 1;  // past '#'
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t eq = line.find('=', i);
    if (eq == std::string::npos) return false;
    key = line.substr(i, eq - i);
    value = line.substr(eq + 1);
    return !key.empty() && key.find(' ') == std::string::npos;
}

void append_header(std::string& out, const std::string& key, const std::string& value) {
    out += "# ";
    out += key;
    out += '=';
    out += value;
    out += '\n';
}

// Headers common to every emitted file: magic line first, then seed and
// config hash (defaulted to 0 when the caller does not supply them).
void append_common_headers(std::string& out, const char* magic, const HeaderMap& extra,
                           const std::string& default_seed) {
    out += "# ";
    out += magic;
    out += '\n';
    const auto seed_it = extra.find("seed");
    append_header(out, "seed", seed_it != extra.end() ? seed_it->second : default_seed);
    const auto hash_it = extra.find("config_hash");
    append_header(out, "config_hash", hash_it != extra.end() ? hash_it->second : "0");
    for (const auto& [k, v] : extra)
        if (k != "seed" && k != "config_hash") append_header(out, k, v);
}

std::string format_axis(const std::array<double, 3>& a) {
    return format_double(a[0]) + "," + format_double(a[1]) + "," + format_double(a[2]);
}

std::array<double, 3> parse_axis(const std::string& s, long line) {
    const auto parts = split_csv_fields(s);
    if (parts.size() != 3) throw ParseError("chiral_axis needs 3 components", line);
    return {parse_double(parts[0], line), parse_double(parts[1], line),
            parse_double(parts[2], line)};
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_u64(std::uint64_t v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, long line) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ParseError("invalid number '" + s + "'", line);
    return v;
}

std::uint64_t parse_u64(const std::string& s, long line) {
    std::uint64_t v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ParseError("invalid unsigned integer '" + s + "'", line);
    return v;
}

void write_histogram_csv(const std::string& path, const DecayHistogram& h,
                         const HeaderMap& extra) {
    const AcquisitionMeta& m = h.meta();
    std::string out;
    out.reserve(h.size() * 16 + 512);
    append_common_headers(out, kHistMagic, extra, format_u64(m.seed));
    append_header(out, "bin_width_ns", format_double(h.bin_width_ns()));
    append_header(out, "t_start_ns", format_double(h.t_start_ns()));
    append_header(out, "b_gauss", format_double(m.field.magnitude_gauss));
    append_header(out, "theta_deg", format_double(m.field.theta_deg));
    append_header(out, "phi_deg", format_double(m.field.phi_deg));
    append_header(out, "chiral_axis", format_axis(m.field.chiral_axis));
    append_header(out, "polarization", to_string(m.polarization));
    append_header(out, "sampled_tau_up_ns", format_double(m.sampled_tau_up_ns));
    append_header(out, "sampled_tau_down_ns", format_double(m.sampled_tau_down_ns));
    if (!m.label.empty()) append_header(out, "label", m.label);
    out += "time_ns,counts\n";
    for (std::size_t i = 0; i < h.size(); ++i) {
        out += format_double(h.bin_center_ns(i));
        out += ',';
        out += format_u64(h.counts()[i]);
        out += '\n';
    }
    atomic_write_text(path, out);
}

DecayHistogram read_histogram_csv(const std::string& path, HeaderMap* headers) {
    const auto lines = split_lines(read_file(path));
    HeaderMap hdr;
    std::vector<std::uint64_t> counts;
    bool seen_columns = false;
    long lineno = 0;
    double first_time = 0.0;
    bool have_first_time = false;
    for (const auto& line : lines) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string k, v;
            if (parse_header_line(line, k, v)) hdr[k] = v;
            continue;
        }
        if (!seen_columns) {
            if (line != "time_ns,counts")
                throw ParseError("expected column header 'time_ns,counts', got '" + line + "'",
                                 lineno);
            seen_columns = true;
            continue;
        }
        const auto fields = split_csv_fields(line);
        if (fields.size() != 2)
            throw ParseError("expected 2 comma-separated fields", lineno);
        const double t = parse_double(fields[0], lineno);
        if (!have_first_time) {
            first_time = t;
            have_first_time = true;
        }
        counts.push_back(parse_u64(fields[1], lineno));
    }
    if (!seen_columns) throw ParseError("missing 'time_ns,counts' column header in " + path);
    if (counts.size() < 2) throw ParseError("histogram needs at least 2 data rows", lineno);
    const auto bw_it = hdr.find("bin_width_ns");
    if (bw_it == hdr.end()) throw ParseError("missing required header bin_width_ns in " + path);
    const double bin_width = parse_double(bw_it->second);
    double t_start = 0.0;
    if (const auto it = hdr.find("t_start_ns"); it != hdr.end())
        t_start = parse_double(it->second);

    AcquisitionMeta meta;
    if (const auto it = hdr.find("seed"); it != hdr.end()) meta.seed = parse_u64(it->second);
    if (const auto it = hdr.find("b_gauss"); it != hdr.end())
        meta.field.magnitude_gauss = parse_double(it->second);
    if (const auto it = hdr.find("theta_deg"); it != hdr.end())
        meta.field.theta_deg = parse_double(it->second);
    if (const auto it = hdr.find("phi_deg"); it != hdr.end())
        meta.field.phi_deg = parse_double(it->second);
    if (const auto it = hdr.find("chiral_axis"); it != hdr.end())
        meta.field.chiral_axis = parse_axis(it->second, -1);
    if (const auto it = hdr.find("polarization"); it != hdr.end())
        meta.polarization = polarization_from_string(it->second);
    if (const auto it = hdr.find("sampled_tau_up_ns"); it != hdr.end())
        meta.sampled_tau_up_ns = parse_double(it->second);
    if (const auto it = hdr.find("sampled_tau_down_ns"); it != hdr.end())
        meta.sampled_tau_down_ns = parse_double(it->second);
    if (const auto it = hdr.find("label"); it != hdr.end()) meta.label = it->second;

    // Sanity: the first time value must sit at the first bin center.
    const double expected_first = t_start + 0.5 * bin_width;
    if (std::abs(first_time - expected_first) > 1e-6 * std::max(1.0, std::abs(expected_first)))
        throw ParseError("first time value inconsistent with bin_width/t_start headers");

    if (headers) *headers = hdr;
    return DecayHistogram(bin_width, t_start, std::move(counts), std::move(meta));
}

namespace {
void append_kv(std::string& out, const std::string& key, const std::string& value) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
}
}  // namespace

void write_biexp_report(const std::string& path, const BiexpFitResult& r,
                        const HeaderMap& extra) {
    std::string out;
    append_common_headers(out, kReportMagic, extra, "0");
    append_kv(out, "model", "biexp");
    append_kv(out, "converged", r.converged ? "1" : "0");
    append_kv(out, "a_long", format_double(r.a_long));
    append_kv(out, "a_short", format_double(r.a_short));
    append_kv(out, "tau1_ns", format_double(r.tau1_ns));
    append_kv(out, "tau2_ns", format_double(r.tau2_ns));
    append_kv(out, "c_offset", format_double(r.c_offset));
    append_kv(out, "tau1_err_ns", format_double(r.tau1_err_ns()));
    append_kv(out, "tau2_err_ns", format_double(r.tau2_err_ns()));
    append_kv(out, "chi2_reduced", format_double(r.chi2_reduced));
    append_kv(out, "iterations", std::to_string(r.iterations));
    append_kv(out, "condition", format_double(r.condition));
    append_kv(out, "irf_s_ns", format_double(r.irf.s_ns));
    append_kv(out, "irf_t0_ns", format_double(r.irf.t0_ns));
    atomic_write_text(path, out);
}

void write_mono_report(const std::string& path, const MonoFitResult& r,
                       const IrfModel& irf, const HeaderMap& extra) {
    std::string out;
    append_common_headers(out, kReportMagic, extra, "0");
    append_kv(out, "model", "mono");
    append_kv(out, "converged", r.converged ? "1" : "0");
    append_kv(out, "amplitude", format_double(r.amplitude));
    append_kv(out, "tau_ns", format_double(r.tau_ns));
    append_kv(out, "c_offset", format_double(r.c_offset));
    append_kv(out, "tau_err_ns", format_double(r.tau_err_ns()));
    append_kv(out, "chi2_reduced", format_double(r.chi2_reduced));
    append_kv(out, "iterations", std::to_string(r.iterations));
    append_kv(out, "condition", format_double(r.condition));
    append_kv(out, "irf_s_ns", format_double(irf.s_ns));
    append_kv(out, "irf_t0_ns", format_double(irf.t0_ns));
    atomic_write_text(path, out);
}

void write_calibration_report(const std::string& path, const IrfCalibration& cal,
                              double bin_width_ns, const HeaderMap& extra) {
    std::string out;
    append_common_headers(out, kReportMagic, extra, "0");
    append_kv(out, "model", "irf_gaussian");
    append_kv(out, "s_ns", format_double(cal.irf.s_ns));
    append_kv(out, "t0_ns", format_double(cal.irf.t0_ns));
    append_kv(out, "s_err_ns", format_double(cal.s_err_ns));
    append_kv(out, "t0_err_ns", format_double(cal.t0_err_ns));
    append_kv(out, "amplitude", format_double(cal.amplitude));
    append_kv(out, "baseline", format_double(cal.baseline));
    append_kv(out, "chi2_reduced", format_double(cal.chi2_reduced));
    append_kv(out, "resolution_limited", cal.resolution_limited ? "1" : "0");
    append_kv(out, "bin_width_ns", format_double(bin_width_ns));
    atomic_write_text(path, out);
}

const std::string& FitReport::get(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ParseError("fit report missing key '" + key + "'");
    return it->second;
}

double FitReport::tau_long_ns() const {
    const auto model = values.find("model");
    if (model != values.end() && model->second == "mono") return parse_double(get("tau_ns"));
    return parse_double(get("tau1_ns"));
}

double FitReport::tau_long_err_ns() const {
    const auto model = values.find("model");
    if (model != values.end() && model->second == "mono")
        return parse_double(get("tau_err_ns"));
    return parse_double(get("tau1_err_ns"));
}

FitReport read_fit_report(const std::string& path) {
    const auto lines = split_lines(read_file(path));
    FitReport rep;
    long lineno = 0;
    for (const auto& line : lines) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string k, v;
            if (parse_header_line(line, k, v)) rep.comments[k] = v;
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ParseError("expected key=value", lineno);
        rep.values[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (rep.values.empty()) throw ParseError("empty fit report " + path);
    return rep;
}

void write_sweep_points_csv(const std::string& path, const SweepResult& r,
                            const HeaderMap& extra) {
    std::string out;
    append_common_headers(out, kSweepMagic, extra, format_u64(r.master_seed));
    append_header(out, "mode", r.mode == SweepMode::oracle ? "oracle" : "monte_carlo");
    out += "phi_deg,B_gauss,polarization,tau_long_ns,tau_long_err_ns,chi2_reduced,flag\n";
    for (const auto& p : r.points) {
        out += format_double(p.phi_deg);
        out += ',';
        out += format_double(p.b_gauss);
        out += ',';
        out += to_string(p.polarization);
        out += ',';
        if (p.ok) {
            out += format_double(p.tau_long_ns);
            out += ',';
            out += format_double(p.tau_long_err_ns);
            out += ',';
            out += format_double(p.chi2_reduced);
        } else {
            out += "nan,nan,nan";
        }
        out += ',';
        out += p.flag;
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_sweep_delta_csv(const std::string& path, const SweepResult& r,
                           const HeaderMap& extra) {
    std::string out;
    append_common_headers(out, kSweepMagic, extra, format_u64(r.master_seed));
    append_header(out, "mode", r.mode == SweepMode::oracle ? "oracle" : "monte_carlo");
    out += "phi_deg,B_gauss,dtau_ns,dtau_err_ns\n";
    for (const auto& d : r.deltas) {
        out += format_double(d.phi_deg);
        out += ',';
        out += format_double(d.b_gauss);
        out += ',';
        out += format_double(d.dtau_ns);
        out += ',';
        out += format_double(d.dtau_err_ns);
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_sweep_summary(const std::string& path, const SweepResult& r,
                         const HeaderMap& extra) {
    std::string out;
    append_common_headers(out, kSweepMagic, extra, format_u64(r.master_seed));
    append_kv(out, "mode", r.mode == SweepMode::oracle ? "oracle" : "monte_carlo");
    std::size_t ok = 0;
    for (const auto& p : r.points)
        if (p.ok) ++ok;
    append_kv(out, "points_total", std::to_string(r.points.size()));
    append_kv(out, "points_ok", std::to_string(ok));
    append_kv(out, "points_failed", std::to_string(r.points.size() - ok));
    for (const auto& p : r.points)
        if (!p.ok)
            out += "failed_point=" + format_double(p.phi_deg) + "," +
                   format_double(p.b_gauss) + "," + to_string(p.polarization) + "," +
                   p.flag + "\n";
    for (double b : r.b_values_gauss) {
        out += "[cosine_fit B=" + format_double(b) + "]\n";
        try {
            const CosineFit c = cosine_fit(r, b);
            append_kv(out, "amplitude_ns", format_double(c.amplitude));
            append_kv(out, "phase_deg", format_double(c.phase_deg));
            append_kv(out, "offset_ns", format_double(c.offset));
            append_kv(out, "rms_ns", format_double(c.rms));
            append_kv(out, "n_points", std::to_string(c.n_points));
        } catch (const Error& e) {
            append_kv(out, "error", e.what());
        }
    }
    for (double phi : r.phi_values_deg) {
        out += "[first_extremum phi=" + format_double(phi) + "]\n";
        try {
            const double b = first_extremum(r, phi);
            append_kv(out, "b_gauss", format_double(b));
        } catch (const NoSignificantExtremumError&) {
            append_kv(out, "b_gauss", "none");
        } catch (const Error& e) {
            append_kv(out, "error", e.what());
        }
    }
    atomic_write_text(path, out);
}

void write_curve_csv(const std::string& path, const std::vector<double>& t,
                     const std::vector<double>& y, const std::string& y_column,
                     const HeaderMap& extra) {
    if (t.size() != y.size()) throw ValidationError("curve export: t/y length mismatch");
    std::string out;
    append_common_headers(out, kHistMagic, extra, "0");
    out += "time_ns," + y_column + "\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        out += format_double(t[i]);
        out += ',';
        out += format_double(y[i]);
        out += '\n';
    }
    atomic_write_text(path, out);
}

}  // namespace spindecay

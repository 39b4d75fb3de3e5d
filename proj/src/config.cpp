#include "spindecay/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spindecay/errors.hpp"

namespace spindecay {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key))
            throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

double get_number(const json& obj, const std::string& where, const std::string& key,
                  double fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number())
        throw ConfigError(where + "." + key + ": expected a number");
    return it->get<double>();
}

bool get_bool(const json& obj, const std::string& where, const std::string& key,
              bool fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean())
        throw ConfigError(where + "." + key + ": expected a boolean");
    return it->get<bool>();
}

std::uint64_t get_u64(const json& obj, const std::string& where, const std::string& key,
                      std::uint64_t fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (it->is_number_unsigned()) return it->get<std::uint64_t>();
    if (it->is_number_integer() && it->get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(it->get<std::int64_t>());
    if (it->is_number_float()) {
        const double v = it->get<double>();
        if (v >= 0.0 && std::floor(v) == v && v <= 1.8e19)
            return static_cast<std::uint64_t>(v);
    }
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
}

std::string get_string(const json& obj, const std::string& where, const std::string& key,
                       const std::string& fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_string())
        throw ConfigError(where + "." + key + ": expected a string");
    return it->get<std::string>();
}

// Either an explicit array of numbers or an inclusive {min, max, step} range.
std::vector<double> get_grid(const json& obj, const std::string& where,
                             const std::string& key, std::vector<double> fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    const std::string path = where + "." + key;
    if (it->is_array()) {
        std::vector<double> out;
        for (const auto& v : *it) {
            if (!v.is_number()) throw ConfigError(path + ": expected numbers");
            out.push_back(v.get<double>());
        }
        if (out.empty()) throw ConfigError(path + ": empty grid");
        return out;
    }
    if (it->is_object()) {
        require_keys(*it, path, {"min", "max", "step"});
        for (const char* k : {"min", "max", "step"})
            if (!it->contains(k)) throw ConfigError(path + ": range needs min/max/step");
        try {
            return make_range(get_number(*it, path, "min", 0.0),
                              get_number(*it, path, "max", 0.0),
                              get_number(*it, path, "step", 0.0));
        } catch (const ValidationError& e) {
            throw ConfigError(path + ": " + e.what());
        }
    }
    throw ConfigError(path + ": expected an array or {min,max,step} object");
}

void parse_model(const json& obj, SpinModelParams& m) {
    require_keys(obj, "model",
                 {"tau_up_mean_ns", "tau_down_mean_ns", "sigma_tau_ns",
                  "gamma_rad_per_ns_gauss", "n0", "dt_ns", "horizon_ns", "bin_width_ns"});
    m.tau_up_mean_ns = get_number(obj, "model", "tau_up_mean_ns", m.tau_up_mean_ns);
    m.tau_down_mean_ns = get_number(obj, "model", "tau_down_mean_ns", m.tau_down_mean_ns);
    m.sigma_tau_ns = get_number(obj, "model", "sigma_tau_ns", m.sigma_tau_ns);
    m.gamma_rad_per_ns_gauss =
        get_number(obj, "model", "gamma_rad_per_ns_gauss", m.gamma_rad_per_ns_gauss);
    m.n0 = get_u64(obj, "model", "n0", m.n0);
    m.dt_ns = get_number(obj, "model", "dt_ns", m.dt_ns);
    m.horizon_ns = get_number(obj, "model", "horizon_ns", m.horizon_ns);
    m.bin_width_ns = get_number(obj, "model", "bin_width_ns", m.bin_width_ns);
}

void parse_geometry(const json& obj, FieldGeometry& g) {
    require_keys(obj, "geometry",
                 {"magnitude_gauss", "theta_deg", "phi_deg", "chiral_axis",
                  "chiral_tilt_deg", "chiral_azimuth_deg"});
    g.magnitude_gauss = get_number(obj, "geometry", "magnitude_gauss", g.magnitude_gauss);
    g.theta_deg = get_number(obj, "geometry", "theta_deg", g.theta_deg);
    g.phi_deg = get_number(obj, "geometry", "phi_deg", g.phi_deg);
    const bool has_vec = obj.contains("chiral_axis");
    const bool has_angles =
        obj.contains("chiral_tilt_deg") || obj.contains("chiral_azimuth_deg");
    if (has_vec && has_angles)
        throw ConfigError(
            "geometry: give either chiral_axis or chiral_tilt_deg/chiral_azimuth_deg, not both");
    if (has_vec) {
        const auto& v = obj.at("chiral_axis");
        if (!v.is_array() || v.size() != 3)
            throw ConfigError("geometry.chiral_axis: expected an array of 3 numbers");
        for (int i = 0; i < 3; ++i) {
            if (!v[i].is_number())
                throw ConfigError("geometry.chiral_axis: expected an array of 3 numbers");
            g.chiral_axis[static_cast<std::size_t>(i)] = v[i].get<double>();
        }
    } else if (has_angles) {
        g.chiral_axis =
            axis_from_angles(get_number(obj, "geometry", "chiral_tilt_deg", 45.0),
                             get_number(obj, "geometry", "chiral_azimuth_deg", 200.0));
    }
}

void parse_sweep(const json& obj, SweepPlan& p, bool& oracle) {
    require_keys(obj, "sweep",
                 {"b_gauss", "phi_deg", "theta_deg", "polarizations", "runs_per_point",
                  "master_seed", "randomize_order", "parallelism", "oracle"});
    p.b_values_gauss = get_grid(obj, "sweep", "b_gauss", p.b_values_gauss);
    p.phi_values_deg = get_grid(obj, "sweep", "phi_deg", p.phi_values_deg);
    p.theta_deg = get_number(obj, "sweep", "theta_deg", p.theta_deg);
    if (const auto it = obj.find("polarizations"); it != obj.end()) {
        if (!it->is_array() || it->empty())
            throw ConfigError("sweep.polarizations: expected a non-empty array");
        p.polarizations.clear();
        for (const auto& v : *it) {
            if (!v.is_string())
                throw ConfigError("sweep.polarizations: expected strings (RCP/LCP)");
            try {
                p.polarizations.push_back(polarization_from_string(v.get<std::string>()));
            } catch (const ValidationError& e) {
                throw ConfigError(std::string("sweep.polarizations: ") + e.what());
            }
        }
    }
    const std::uint64_t rpp = get_u64(obj, "sweep", "runs_per_point",
                                      static_cast<std::uint64_t>(p.runs_per_point));
    if (rpp < 1 || rpp > 100000) throw ConfigError("sweep.runs_per_point: out of range");
    p.runs_per_point = static_cast<int>(rpp);
    p.master_seed = get_u64(obj, "sweep", "master_seed", p.master_seed);
    p.randomize_order = get_bool(obj, "sweep", "randomize_order", p.randomize_order);
    const std::uint64_t par = get_u64(obj, "sweep", "parallelism",
                                      static_cast<std::uint64_t>(p.parallelism));
    if (par > 4096) throw ConfigError("sweep.parallelism: out of range");
    p.parallelism = static_cast<int>(par);
    oracle = get_bool(obj, "sweep", "oracle", oracle);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ConfigDocument parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    require_keys(doc, "config",
                 {"model", "geometry", "irf", "sweep", "io", "polarization", "seed",
                  "label"});

    ConfigDocument cfg;
    // Defaults shared with the sweep: the chiral axis lives in geometry.
    cfg.geometry.chiral_axis = axis_from_angles(45.0, 200.0);
    cfg.geometry.magnitude_gauss = 280.0;

    if (const auto it = doc.find("model"); it != doc.end()) {
        if (!it->is_object()) throw ConfigError("model: expected an object");
        parse_model(*it, cfg.model);
    }
    if (const auto it = doc.find("geometry"); it != doc.end()) {
        if (!it->is_object()) throw ConfigError("geometry: expected an object");
        parse_geometry(*it, cfg.geometry);
    }
    if (const auto it = doc.find("irf"); it != doc.end()) {
        if (!it->is_object()) throw ConfigError("irf: expected an object");
        require_keys(*it, "irf", {"s_ns", "t0_ns"});
        cfg.has_irf = true;
        cfg.irf.s_ns = get_number(*it, "irf", "s_ns", cfg.irf.s_ns);
        cfg.irf.t0_ns = get_number(*it, "irf", "t0_ns", cfg.irf.t0_ns);
    }
    if (const auto it = doc.find("sweep"); it != doc.end()) {
        if (!it->is_object()) throw ConfigError("sweep: expected an object");
        parse_sweep(*it, cfg.sweep, cfg.sweep_oracle);
    }
    if (const auto it = doc.find("io"); it != doc.end()) {
        if (!it->is_object()) throw ConfigError("io: expected an object");
        require_keys(*it, "io", {"out"});
        cfg.out_path = get_string(*it, "io", "out", "");
    }
    if (const auto it = doc.find("polarization"); it != doc.end()) {
        if (!it->is_string()) throw ConfigError("polarization: expected RCP or LCP");
        try {
            cfg.polarization = polarization_from_string(it->get<std::string>());
        } catch (const ValidationError& e) {
            throw ConfigError(std::string("polarization: ") + e.what());
        }
    }
    cfg.seed = get_u64(doc, "config", "seed", cfg.seed);
    cfg.label = get_string(doc, "config", "label", "");

    // The sweep shares the geometry's chiral axis.
    cfg.sweep.chiral_axis = cfg.geometry.chiral_axis;

    try {
        cfg.model.validate();
        cfg.geometry.validate();
        if (cfg.has_irf) cfg.irf.validate();
        cfg.sweep.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("config validation: ") + e.what());
    }

    // Canonical hash: nlohmann stores objects key-sorted, so dump() is
    // independent of the original member order.
    cfg.hash = fnv1a64(doc.dump());
    return cfg;
}

ConfigDocument load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace spindecay

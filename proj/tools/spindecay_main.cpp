// spindecay: spin-selective PL decay simulator and fitting toolkit.
//
// Exit codes (public contract): 0 ok, 2 config/parse/input error,
// 3 simulation step-size guard, 4 fit failure, 5 every sweep point failed.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "spindecay/config.hpp"
#include "spindecay/csv.hpp"
#include "spindecay/errors.hpp"
#include "spindecay/fit.hpp"
#include "spindecay/simulate.hpp"
#include "spindecay/sweep.hpp"

namespace {

using namespace spindecay;

IrfModel parse_irf_spec(const std::string& spec) {
    if (spec.find(',') != std::string::npos) {
        const std::size_t pos = spec.find(',');
        IrfModel irf;
        irf.s_ns = parse_double(spec.substr(0, pos));
        irf.t0_ns = parse_double(spec.substr(pos + 1));
        irf.validate();
        return irf;
    }
    // Otherwise a calibration histogram path.
    const DecayHistogram prompt = read_histogram_csv(spec);
    return calibrate_irf(prompt).irf;
}

void write_simulate_sidecar(const std::string& hist_path, const ConfigDocument& cfg,
                            const DecayHistogram& h) {
    nlohmann::json meta;
    meta["config_hash"] = cfg.hash;
    meta["seed"] = h.meta().seed;
    meta["polarization"] = to_string(h.meta().polarization);
    meta["b_gauss"] = h.meta().field.magnitude_gauss;
    meta["theta_deg"] = h.meta().field.theta_deg;
    meta["phi_deg"] = h.meta().field.phi_deg;
    meta["chiral_axis"] = h.meta().field.chiral_axis;
    meta["sampled_tau_up_ns"] = h.meta().sampled_tau_up_ns;
    meta["sampled_tau_down_ns"] = h.meta().sampled_tau_down_ns;
    meta["bin_width_ns"] = h.bin_width_ns();
    meta["n_bins"] = h.size();
    meta["total_counts"] = h.total_counts();
    if (cfg.has_irf) {
        meta["irf_s_ns"] = cfg.irf.s_ns;
        meta["irf_t0_ns"] = cfg.irf.t0_ns;
    }
    atomic_write_text(hist_path + ".meta.json", meta.dump(2) + "\n");
}

int cmd_simulate(const std::string& config_path, std::string out,
                 const std::uint64_t* seed_override) {
    ConfigDocument cfg = load_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    SimRun run;
    run.params = cfg.model;
    run.geometry = cfg.geometry;
    run.polarization = cfg.polarization;
    run.seed = cfg.seed;
    run.label = cfg.label;
    const DecayHistogram h =
        cfg.has_irf ? simulate_with_irf(run, cfg.irf) : simulate_decay(run);
    if (out.empty()) out = cfg.out_path.empty() ? "histogram.csv" : cfg.out_path;
    write_histogram_csv(out, h, {{"config_hash", format_u64(cfg.hash)}});
    write_simulate_sidecar(out, cfg, h);
    std::cout << "wrote " << out << " (" << h.size() << " bins, " << h.total_counts()
              << " counts)\n";
    return 0;
}

int cmd_oracle(const std::string& config_path, std::string out,
               const std::uint64_t* seed_override) {
    ConfigDocument cfg = load_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    const std::vector<double> em =
        expected_emission(cfg.model, cfg.geometry, initial_phase(cfg.polarization));
    std::vector<double> t(em.size());
    for (std::size_t i = 0; i < em.size(); ++i)
        t[i] = (static_cast<double>(i) + 0.5) * cfg.model.bin_width_ns;
    if (out.empty()) out = cfg.out_path.empty() ? "oracle.csv" : cfg.out_path;
    HeaderMap extra{{"config_hash", format_u64(cfg.hash)},
                    {"seed", format_u64(cfg.seed)},
                    {"b_gauss", format_double(cfg.geometry.magnitude_gauss)},
                    {"theta_deg", format_double(cfg.geometry.theta_deg)},
                    {"phi_deg", format_double(cfg.geometry.phi_deg)},
                    {"polarization", to_string(cfg.polarization)}};
    write_curve_csv(out, t, em, "expected_counts", extra);
    std::cout << "wrote " << out << " (" << em.size() << " bins)\n";
    return 0;
}

int cmd_fit(const std::string& hist_path, const std::string& irf_spec, std::string out,
            const std::string& window_spec, bool uniform_weights) {
    HeaderMap hdr;
    const DecayHistogram h = read_histogram_csv(hist_path, &hdr);
    const IrfModel irf = parse_irf_spec(irf_spec);
    FitConfig fc;
    if (uniform_weights) fc.weighting = FitWeighting::uniform;
    if (!window_spec.empty()) {
        const std::size_t pos = window_spec.find(',');
        if (pos == std::string::npos)
            throw ValidationError("--window expects 'lo,hi' in ns");
        fc.window_ns = {{parse_double(window_spec.substr(0, pos)),
                         parse_double(window_spec.substr(pos + 1))}};
    }
    const BiexpFitResult r = fit_biexp_irf(h, irf, fc);
    if (!r.converged)
        throw NonConvergenceError("fit did not converge within " +
                                  std::to_string(r.iterations) + " iterations");
    if (out.empty()) out = "fit_report.txt";
    HeaderMap extra{{"source", hist_path}};
    if (const auto it = hdr.find("seed"); it != hdr.end()) extra["seed"] = it->second;
    if (const auto it = hdr.find("config_hash"); it != hdr.end())
        extra["config_hash"] = it->second;
    write_biexp_report(out, r, extra);
    std::cout << "tau1 = " << r.tau1_ns << " +/- " << r.tau1_err_ns()
              << " ns, tau2 = " << r.tau2_ns << " +/- " << r.tau2_err_ns()
              << " ns, chi2_red = " << r.chi2_reduced << "\n";
    return 0;
}

int cmd_calibrate(const std::string& prompt_path, std::string out) {
    const DecayHistogram prompt = read_histogram_csv(prompt_path);
    const IrfCalibration cal = calibrate_irf(prompt);
    if (out.empty()) out = "irf_report.txt";
    write_calibration_report(out, cal, prompt.bin_width_ns(), {{"source", prompt_path}});
    std::cout << "s = " << cal.irf.s_ns << " +/- " << cal.s_err_ns
              << " ns, t0 = " << cal.irf.t0_ns << " +/- " << cal.t0_err_ns << " ns"
              << (cal.resolution_limited ? " (resolution-limited)" : "") << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, std::string out_dir, bool oracle_flag,
              const std::uint64_t* seed_override) {
    ConfigDocument cfg = load_config(config_path);
    SweepPlan plan = cfg.sweep;
    if (seed_override) plan.master_seed = *seed_override;
    const SweepMode mode =
        (oracle_flag || cfg.sweep_oracle) ? SweepMode::oracle : SweepMode::monte_carlo;
    if (mode == SweepMode::monte_carlo && !cfg.has_irf)
        throw ConfigError("sweep: monte_carlo mode requires an irf section");
    if (out_dir.empty()) out_dir = cfg.out_path.empty() ? "sweep_out" : cfg.out_path;
    std::filesystem::create_directories(out_dir);

    const SweepResult r = run_sweep(plan, cfg.model, cfg.irf, mode);

    const HeaderMap extra{{"config_hash", format_u64(cfg.hash)},
                          {"seed", format_u64(plan.master_seed)}};
    const auto dir = std::filesystem::path(out_dir);
    write_sweep_points_csv((dir / "sweep_points.csv").string(), r, extra);
    write_sweep_delta_csv((dir / "sweep_delta.csv").string(), r, extra);
    write_sweep_summary((dir / "sweep_summary.txt").string(), r, extra);

    std::size_t ok = 0;
    for (const auto& p : r.points)
        if (p.ok) ++ok;
    std::cout << "sweep: " << ok << "/" << r.points.size() << " points fitted, "
              << r.deltas.size() << " delta rows; outputs in " << out_dir << "\n";
    if (ok == 0) {
        std::cerr << "error: every sweep point failed\n";
        return 5;
    }
    return 0;
}

int cmd_delta(const std::vector<std::string>& rcp, const std::vector<std::string>& lcp,
              std::string out) {
    if (rcp.size() != lcp.size())
        throw ValidationError("--rcp and --lcp need the same number of reports");
    if (out.empty()) out = "delta.csv";
    std::string body = "index,tau_rcp_ns,tau_lcp_ns,dtau_ns,dtau_err_ns\n";
    for (std::size_t i = 0; i < rcp.size(); ++i) {
        const FitReport a = read_fit_report(rcp[i]);
        const FitReport b = read_fit_report(lcp[i]);
        const double tr = a.tau_long_ns();
        const double tl = b.tau_long_ns();
        const double er = a.tau_long_err_ns();
        const double el = b.tau_long_err_ns();
        body += format_u64(i) + "," + format_double(tr) + "," + format_double(tl) + "," +
                format_double(tr - tl) + "," + format_double(std::sqrt(er * er + el * el)) +
                "\n";
    }
    std::string content;
    content += "# spindecay report v1\n";
    content += "# seed=0\n# config_hash=0\n";
    content += body;
    atomic_write_text(out, content);
    std::cout << "wrote " << out << " (" << rcp.size() << " rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spin-selective PL decay: simulate, fit, and sweep"};
    app.require_subcommand(1);

    std::string config_path, out_path, hist_path, irf_spec, window_spec, prompt_path;
    std::uint64_t seed = 0;
    bool oracle_flag = false, uniform_weights = false;
    std::vector<std::string> rcp_files, lcp_files;

    auto* sim = app.add_subcommand("simulate", "generate a decay histogram from a config");
    sim->add_option("--config", config_path, "JSON config path")->required();
    auto* sim_seed = sim->add_option("--seed", seed, "override the config seed");
    sim->add_option("--out", out_path, "output histogram CSV path");

    auto* orc = app.add_subcommand("oracle", "export the analytic expected-decay curve");
    orc->add_option("--config", config_path, "JSON config path")->required();
    auto* orc_seed = orc->add_option("--seed", seed, "recorded in the output header");
    orc->add_option("--out", out_path, "output CSV path");

    auto* fit = app.add_subcommand("fit", "biexponential reconvolution fit of a histogram");
    fit->add_option("histogram", hist_path, "decay histogram CSV")->required();
    fit->add_option("--irf", irf_spec, "IRF spec: 's,t0' in ns, or a prompt CSV path")
        ->required();
    fit->add_option("--window", window_spec, "fit window 'lo,hi' in ns");
    fit->add_flag("--uniform-weights", uniform_weights,
                  "unweighted least squares instead of Poisson weights");
    fit->add_option("--out", out_path, "output report path");

    auto* cal = app.add_subcommand("calibrate-irf", "fit a Gaussian IRF to a prompt histogram");
    cal->add_option("prompt", prompt_path, "prompt (scattered laser) histogram CSV")
        ->required();
    cal->add_option("--out", out_path, "output report path");

    auto* swp = app.add_subcommand("sweep", "run a field/azimuth sweep and export tables");
    swp->add_option("--config", config_path, "JSON config path")->required();
    swp->add_option("--out", out_path, "output directory");
    swp->add_flag("--oracle", oracle_flag, "fit analytic oracle curves instead of MC runs");
    auto* swp_seed = swp->add_option("--seed", seed, "override sweep.master_seed");

    auto* dlt = app.add_subcommand("delta", "delta-tau table from paired fit reports");
    dlt->add_option("--rcp", rcp_files, "RCP fit reports (in order)")->required();
    dlt->add_option("--lcp", lcp_files, "LCP fit reports (in order)")->required();
    dlt->add_option("--out", out_path, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // help/version exit 0; usage errors exit 2
    }

    try {
        if (sim->parsed())
            return cmd_simulate(config_path, out_path,
                                sim_seed->count() ? &seed : nullptr);
        if (orc->parsed())
            return cmd_oracle(config_path, out_path, orc_seed->count() ? &seed : nullptr);
        if (fit->parsed())
            return cmd_fit(hist_path, irf_spec, out_path, window_spec, uniform_weights);
        if (cal->parsed()) return cmd_calibrate(prompt_path, out_path);
        if (swp->parsed())
            return cmd_sweep(config_path, out_path, oracle_flag,
                             swp_seed->count() ? &seed : nullptr);
        if (dlt->parsed()) return cmd_delta(rcp_files, lcp_files, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const SimulationGuardError& e) {
        std::cerr << "simulation guard: " << e.what() << "\n";
        return 3;
    } catch (const FitError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 4;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

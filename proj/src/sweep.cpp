#include "spindecay/sweep.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "spindecay/errors.hpp"
#include "spindecay/fit.hpp"
#include "spindecay/rng.hpp"
#include "spindecay/simulate.hpp"

namespace spindecay {

namespace {

constexpr std::uint64_t kShuffleTag = 0x53485546ULL;  // stream domain for shuffles
constexpr std::uint64_t kPointTag = 0x504f494eULL;    // stream domain for points

bool close(double a, double b) { return std::abs(a - b) <= 1e-9; }

// Grid-point fit shared by both sweep modes: biexponential first, falling
// back to a single exponential when the biexponential is degenerate.
void fit_point(const CurveData& curve, const IrfModel& irf, SweepPointRecord& rec) {
    try {
        try {
            const BiexpFitResult r = fit_biexp_curve(curve, irf);
            const LongLifetime lt = extract_long_lifetime(r);  // throws if unconverged
            rec.tau_long_ns = lt.tau_ns;
            rec.tau_long_err_ns = lt.err_ns;
            rec.chi2_reduced = r.chi2_reduced;
            rec.ok = true;
            return;
        } catch (const IllConditionedError&) {
            const MonoFitResult m = fit_mono_curve(curve, irf);
            if (!m.converged)
                throw NonConvergenceError("mono fallback did not converge");
            rec.tau_long_ns = m.tau_ns;
            rec.tau_long_err_ns = m.tau_err_ns();
            rec.chi2_reduced = m.chi2_reduced;
            rec.flag = "mono";
            rec.ok = true;
            return;
        }
    } catch (const NonConvergenceError&) {
        rec.flag = "no_convergence";
    } catch (const IllConditionedError&) {
        rec.flag = "ill_conditioned";
    } catch (const Error&) {
        rec.flag = "fit_error";
    }
    rec.ok = false;
}

}  // namespace

std::vector<double> make_range(double lo, double hi, double step) {
    if (!(step > 0.0)) throw ValidationError("range step must be positive");
    if (hi < lo) throw ValidationError("range upper bound below lower bound");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    out.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    return out;
}

SweepPlan::SweepPlan()
    : b_values_gauss(make_range(60.0, 1020.0, 20.0)),
      phi_values_deg(make_range(-40.0, 80.0, 20.0)),
      chiral_axis(axis_from_angles(45.0, 200.0)) {}

void SweepPlan::validate() const {
    if (b_values_gauss.empty()) throw ValidationError("sweep: b_values must be non-empty");
    for (double b : b_values_gauss)
        if (!(b >= 0.0) || !std::isfinite(b))
            throw ValidationError("sweep: b_values must be finite and >= 0");
    for (std::size_t i = 1; i < b_values_gauss.size(); ++i)
        if (!(b_values_gauss[i] > b_values_gauss[i - 1]))
            throw ValidationError("sweep: b_values must be strictly increasing");
    if (phi_values_deg.empty())
        throw ValidationError("sweep: phi_values must be non-empty");
    for (std::size_t i = 1; i < phi_values_deg.size(); ++i)
        if (!(phi_values_deg[i] > phi_values_deg[i - 1]))
            throw ValidationError("sweep: phi_values must be strictly increasing");
    if (!std::isfinite(theta_deg)) throw ValidationError("sweep: theta must be finite");
    if (polarizations.empty())
        throw ValidationError("sweep: polarizations must be non-empty");
    if (polarizations.size() > 2 ||
        (polarizations.size() == 2 && polarizations[0] == polarizations[1]))
        throw ValidationError("sweep: duplicate polarizations");
    if (runs_per_point < 1) throw ValidationError("sweep: runs_per_point must be >= 1");
    if (parallelism < 0) throw ValidationError("sweep: parallelism must be >= 0");
    FieldGeometry g;
    g.chiral_axis = chiral_axis;
    g.validate();
}

std::vector<ExecutionItem> shuffle_plan(const SweepPlan& plan) {
    plan.validate();
    std::vector<ExecutionItem> items;
    items.reserve(plan.phi_values_deg.size() * plan.b_values_gauss.size() *
                  plan.polarizations.size());
    for (std::size_t pi = 0; pi < plan.phi_values_deg.size(); ++pi) {
        std::vector<std::size_t> order(plan.b_values_gauss.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        if (plan.randomize_order) {
            // Fisher-Yates keyed by (master_seed, azimuth-set index); integer
            // arithmetic only, so the permutation is platform-stable.
            RandomStream rng(mix_seed(plan.master_seed, {kShuffleTag, pi}));
            for (std::size_t i = order.size(); i > 1; --i) {
                const std::size_t j = rng.next_u64() % i;
                std::swap(order[i - 1], order[j]);
            }
        }
        for (std::size_t bi : order)
            for (Polarization pol : plan.polarizations)
                items.push_back(ExecutionItem{pi, bi, pol});
    }
    return items;
}

SweepResult run_sweep(const SweepPlan& plan, const SpinModelParams& params,
                      const IrfModel& irf, SweepMode mode) {
    plan.validate();
    params.validate();
    irf.validate();
    const std::vector<ExecutionItem> items = shuffle_plan(plan);

    SweepResult result;
    result.b_values_gauss = plan.b_values_gauss;
    result.phi_values_deg = plan.phi_values_deg;
    result.mode = mode;
    result.master_seed = plan.master_seed;
    result.points.resize(items.size());

    const auto process = [&](const ExecutionItem& it, SweepPointRecord& rec) {
        rec.phi_deg = plan.phi_values_deg[it.phi_idx];
        rec.b_gauss = plan.b_values_gauss[it.b_idx];
        rec.polarization = it.polarization;
        // Keyed by grid identity, not execution position: order independence.
        rec.seed = mix_seed(plan.master_seed,
                            {kPointTag, it.phi_idx, it.b_idx,
                             static_cast<std::uint64_t>(it.polarization)});
        FieldGeometry geom;
        geom.magnitude_gauss = rec.b_gauss;
        geom.theta_deg = plan.theta_deg;
        geom.phi_deg = rec.phi_deg;
        geom.chiral_axis = plan.chiral_axis;

        try {
            if (mode == SweepMode::oracle) {
                const std::vector<double> em =
                    expected_emission(params, geom, initial_phase(it.polarization));
                CurveData curve;
                curve.t_ns.resize(em.size());
                for (std::size_t i = 0; i < em.size(); ++i)
                    curve.t_ns[i] =
                        (static_cast<double>(i) + 0.5) * params.bin_width_ns;
                curve.y = em;
                // Near-delta IRF: the oracle curve has no instrument blur.
                const IrfModel irf_oracle{params.bin_width_ns / 10.0, 0.0};
                fit_point(curve, irf_oracle, rec);
            } else {
                std::vector<DecayHistogram> runs;
                runs.reserve(static_cast<std::size_t>(plan.runs_per_point));
                for (int r = 0; r < plan.runs_per_point; ++r) {
                    SimRun sim;
                    sim.params = params;
                    sim.geometry = geom;
                    sim.polarization = it.polarization;
                    sim.seed = mix_seed(rec.seed, {static_cast<std::uint64_t>(r)});
                    runs.push_back(simulate_with_irf(sim, irf));
                }
                const DecayHistogram pooled = sum_histograms(runs);
                CurveData curve;
                curve.t_ns.resize(pooled.size());
                curve.y.resize(pooled.size());
                for (std::size_t i = 0; i < pooled.size(); ++i) {
                    curve.t_ns[i] = pooled.bin_center_ns(i);
                    curve.y[i] = static_cast<double>(pooled.counts()[i]);
                }
                fit_point(curve, irf, rec);
            }
        } catch (const Error&) {
            rec.ok = false;
            rec.flag = "sim_error";
        }
    };

    unsigned n_threads = plan.parallelism > 0
                             ? static_cast<unsigned>(plan.parallelism)
                             : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(items.size()));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i) process(items[i], result.points[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(n_threads);
        for (unsigned w = 0; w < n_threads; ++w) {
            workers.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= items.size()) return;
                    process(items[i], result.points[i]);
                }
            });
        }
        for (auto& t : workers) t.join();
    }

    // Deterministic assembly independent of execution/completion order.
    std::sort(result.points.begin(), result.points.end(),
              [](const SweepPointRecord& a, const SweepPointRecord& b) {
                  if (a.phi_deg != b.phi_deg) return a.phi_deg < b.phi_deg;
                  if (a.b_gauss != b.b_gauss) return a.b_gauss < b.b_gauss;
                  return static_cast<int>(a.polarization) < static_cast<int>(b.polarization);
              });

    for (double phi : plan.phi_values_deg) {
        for (double b : plan.b_values_gauss) {
            const SweepPointRecord* rcp = nullptr;
            const SweepPointRecord* lcp = nullptr;
            for (const auto& p : result.points) {
                if (!close(p.phi_deg, phi) || !close(p.b_gauss, b) || !p.ok) continue;
                if (p.polarization == Polarization::RCP) rcp = &p;
                else lcp = &p;
            }
            if (rcp && lcp) {
                DeltaRecord d;
                d.phi_deg = phi;
                d.b_gauss = b;
                d.dtau_ns = rcp->tau_long_ns - lcp->tau_long_ns;
                d.dtau_err_ns = std::hypot(rcp->tau_long_err_ns, lcp->tau_long_err_ns);
                result.deltas.push_back(d);
            }
        }
    }
    return result;
}

DeltaValue delta_lifetime(const SweepResult& result, double b_gauss, double phi_deg) {
    for (const auto& d : result.deltas)
        if (close(d.b_gauss, b_gauss) && close(d.phi_deg, phi_deg))
            return {d.dtau_ns, d.dtau_err_ns};
    // Distinguish "no such grid point" from "grid point lacks a polarization".
    bool on_grid = false;
    for (const auto& p : result.points)
        if (close(p.b_gauss, b_gauss) && close(p.phi_deg, phi_deg)) on_grid = true;
    if (on_grid)
        throw MissingPolarizationError(
            "delta_lifetime: both polarizations required at (B=" +
            std::to_string(b_gauss) + ", phi=" + std::to_string(phi_deg) + ")");
    throw ValidationError("delta_lifetime: no such sweep grid point");
}

double first_extremum(const SweepResult& result, double phi_deg) {
    std::vector<const DeltaRecord*> ds;
    for (const auto& d : result.deltas)
        if (close(d.phi_deg, phi_deg)) ds.push_back(&d);
    if (ds.size() < 5)
        throw UnderDeterminedError("first_extremum needs >= 5 field points");
    for (std::size_t i = 1; i + 1 < ds.size(); ++i) {
        const double s1 = ds[i]->dtau_ns - ds[i - 1]->dtau_ns;
        const double s2 = ds[i + 1]->dtau_ns - ds[i]->dtau_ns;
        if (!(s1 * s2 < 0.0)) continue;  // not a strict local extremum
        if (!(std::abs(ds[i]->dtau_ns) > 2.0 * ds[i]->dtau_err_ns)) continue;
        // Parabola through the three surrounding points (Newton form).
        const double x0 = ds[i - 1]->b_gauss, x1 = ds[i]->b_gauss, x2 = ds[i + 1]->b_gauss;
        const double y0 = ds[i - 1]->dtau_ns, y1 = ds[i]->dtau_ns, y2 = ds[i + 1]->dtau_ns;
        const double d1 = (y1 - y0) / (x1 - x0);
        const double d2 = (y2 - y1) / (x2 - x1);
        const double a2 = (d2 - d1) / (x2 - x0);
        double vertex = 0.5 * (x0 + x1) - d1 / (2.0 * a2);
        vertex = std::min(std::max(vertex, x0), x2);
        return vertex;
    }
    throw NoSignificantExtremumError(
        "no significant extremum of dtau(B) at phi = " + std::to_string(phi_deg));
}

CosineFit cosine_fit(const SweepResult& result, double b_gauss) {
    std::vector<const DeltaRecord*> ds;
    for (const auto& d : result.deltas)
        if (close(d.b_gauss, b_gauss)) ds.push_back(&d);
    if (ds.size() < 4)
        throw UnderDeterminedError("cosine_fit needs >= 4 azimuth points");
    const auto n = static_cast<Eigen::Index>(ds.size());
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double phi = ds[static_cast<std::size_t>(i)]->phi_deg * std::numbers::pi / 180.0;
        x(i, 0) = std::cos(phi);
        x(i, 1) = std::sin(phi);
        x(i, 2) = 1.0;
        y[i] = ds[static_cast<std::size_t>(i)]->dtau_ns;
    }
    const Eigen::Vector3d c = x.colPivHouseholderQr().solve(y);
    CosineFit fit;
    fit.amplitude = std::hypot(c[0], c[1]);
    fit.phase_deg = std::atan2(c[1], c[0]) * 180.0 / std::numbers::pi;
    fit.offset = c[2];
    fit.rms = std::sqrt((x * c - y).squaredNorm() / static_cast<double>(n));
    fit.n_points = ds.size();
    return fit;
}

}  // namespace spindecay

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "phenoflow/diagnostics.hpp"
#include "phenoflow/solver.hpp"

namespace phenoflow {

struct Snapshot {
    double t = 0.0;
    ScalarField rho, p, v;
    PopulationField n;
};

/// Left-Riemann time integrals accumulated on the adaptive step sequence.
/// The late-window residual averages run over [T/2, T].
struct RunIntegrals {
    double grad_p_l2 = 0.0;        // ∫∫ |D_h p|^2
    double grad_p_l4 = 0.0;        // ∫∫ |D_h p|^4
    double hessian_weighted = 0.0; // ∫∫ p (D^2 p)^2
    double p_l1 = 0.0;             // ∫∫ p
    double saturation_late = 0.0;
    double complementarity_late = 0.0;
    double late_window = 0.0;      // measure of the window actually integrated
    std::vector<double> weighted_grad4;  // one entry per configured alpha

    double saturation_avg() const {
        return late_window > 0.0 ? saturation_late / late_window : 0.0;
    }
    double complementarity_avg() const {
        return late_window > 0.0 ? complementarity_late / late_window : 0.0;
    }
};

/// Run-level invariant monitors, updated every step.
struct RunMonitors {
    double mass_initial = 0.0;
    double mass_final = 0.0;
    double gronwall_max_ratio = 0.0;  // max_t M(t) / (M(0) e^(||R|| t))
    double sup_rho_max = 0.0;
    double mass_drift_rel = 0.0;      // max_t |M(t)-M(0)|/M(0), meaningful when R = 0
    long steps = 0;
    double min_dt = std::numeric_limits<double>::infinity();
    long flushed_cells = 0;
    double flushed_mass = 0.0;
    bool boundary_contact = false;
    bool reaction_valid = false;
    bool well_prepared = false;
};

struct RunResult {
    SimulationState state;  // final state at t = T
    std::vector<Snapshot> snapshots;
    std::vector<DiagnosticsRecord> series;
    RunIntegrals integrals;
    RunMonitors monitors;
};

using StepObserver = std::function<void(const SimulationState&)>;

namespace detail {

inline Snapshot take_snapshot(const SimulationState& state) {
    return Snapshot{state.t, state.rho, state.p, state.v, state.n};
}

}  // namespace detail

/// Advance the structured system from n0 to t_end with adaptive
/// dt = stable_dt, recording snapshots at the configured times, a
/// decimated diagnostics series, always-on integral accumulators and
/// invariant monitors. Deterministic for a given configuration.
///
/// Preconditions: the reaction satisfies the growth assumptions and the
/// initial data are well-prepared, unless config.override_assumptions is
/// set. The eps-lift is applied here when configured.
inline RunResult run(const PopulationField& n0, const SpatialGrid& grid,
                     const PhenotypeMesh& mesh, const SolverConfig& config,
                     const StepObserver& observer = {}) {
    const ModelParams& model = config.model;

    PopulationField initial = n0;
    if (config.lift_initial && model.epsilon > 0.0)
        initial = lift_initial_data(n0, model.epsilon, grid, mesh);

    const ReactionReport reaction_report =
        config.mutation_mode ? ReactionReport{model.mutation && model.mutation->well_formed(),
                                              model.sup_rate(true),
                                              {}}
                             : validate_reaction(model.reaction, mesh);
    const WellPreparedReport prepared =
        check_well_prepared(initial, mesh, grid, model.reaction, model.gamma);
    if (!config.override_assumptions) {
        if (!reaction_report.pass)
            throw ConfigError("reaction assumptions violated: " + reaction_report.summary());
        if (!prepared.pass)
            throw ConfigError("initial data not well-prepared: " + prepared.summary());
    }

    RunResult result{make_state(grid, mesh, std::move(initial), model), {}, {}, {}, {}};
    SimulationState& state = result.state;
    RunMonitors& mon = result.monitors;
    RunIntegrals& acc = result.integrals;
    acc.weighted_grad4.assign(config.diag_alphas.size(), 0.0);

    mon.reaction_valid = reaction_report.pass;
    mon.well_prepared = prepared.pass;
    const double sup_rate = model.sup_rate(config.mutation_mode);

    const double t_end = config.t_end;
    std::vector<double> snaps = config.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    std::size_t next_snap = 0;

    const double record_interval =
        config.diag_rows > 0 ? t_end / config.diag_rows : 0.0;
    double next_record = 0.0;

    auto update_monitors = [&]() {
        const BasicNorms norms = basic_norms(state);
        if (state.step_count == 0) mon.mass_initial = norms.mass;
        const double bound = mon.mass_initial * std::exp(sup_rate * state.t);
        if (bound > 0.0)
            mon.gronwall_max_ratio = std::max(mon.gronwall_max_ratio, norms.mass / bound);
        mon.sup_rho_max = std::max(mon.sup_rho_max, norms.sup_rho);
        if (mon.mass_initial > 0.0)
            mon.mass_drift_rel =
                std::max(mon.mass_drift_rel,
                         std::abs(norms.mass - mon.mass_initial) / mon.mass_initial);
        mon.mass_final = norms.mass;
    };

    auto maybe_record = [&]() {
        if (config.diag_rows > 0 && state.t + 1e-14 < next_record) return;
        const double alpha = config.diag_alphas.empty() ? 0.0 : config.diag_alphas.front();
        result.series.push_back(compute_record(state, model, alpha));
        next_record += record_interval;
    };

    update_monitors();
    maybe_record();
    if (observer) observer(state);

    const double time_eps = 1e-12 * std::max(t_end, 1.0);
    while (state.t < t_end - time_eps) {
        double dt = stable_dt(state, config);
        dt = std::min(dt, t_end - state.t);
        if (next_snap < snaps.size())
            dt = std::min(dt, std::max(snaps[next_snap] - state.t, time_eps));

        // left-Riemann accumulation on the pre-step state
        acc.grad_p_l2 += dt * grad_p_l2(state.p, state.grid);
        acc.grad_p_l4 += dt * grad_p_l4(state.p, state.grid);
        acc.hessian_weighted += dt * hessian_weighted(state.p, state.grid).first;
        {
            const double hv = state.grid.cell_volume();
            double p_sum = 0.0;
            for (int j = 0; j < grid.ny(); ++j)
                for (int i = 0; i < grid.nx(); ++i) p_sum += hv * state.p(i, j);
            acc.p_l1 += dt * p_sum;
        }
        for (std::size_t a = 0; a < config.diag_alphas.size(); ++a)
            acc.weighted_grad4[a] +=
                dt * weighted_grad4(state.p, config.diag_alphas[a], model.gamma, state.grid,
                                    model.reaction.p_m)
                         .first;
        if (state.t >= 0.5 * t_end - time_eps) {
            acc.saturation_late += dt * saturation_residual(state.p, state.rho, state.grid);
            acc.complementarity_late +=
                dt * complementarity_residual(state.n, state.p, state.mesh, state.grid,
                                              model.reaction);
            acc.late_window += dt;
        }

        step(state, dt, config);

        mon.steps += 1;
        mon.min_dt = std::min(mon.min_dt, dt);
        update_monitors();
        maybe_record();
        if (observer) observer(state);

        if (next_snap < snaps.size() && state.t >= snaps[next_snap] - time_eps) {
            result.snapshots.push_back(detail::take_snapshot(state));
            ++next_snap;
        }
    }

    mon.flushed_cells = state.flushed_cells;
    mon.flushed_mass = state.flushed_mass;
    mon.boundary_contact = state.boundary_contact;
    if (result.series.empty() || result.series.back().t < state.t - time_eps) {
        const double alpha = config.diag_alphas.empty() ? 0.0 : config.diag_alphas.front();
        result.series.push_back(compute_record(state, model, alpha));
    }
    return result;
}

struct ConsistencyResult {
    double max_gap_per_step = 0.0;  // max_k gap(k)/k
    double final_gap = 0.0;
    long steps = 0;
};

/// Dual-advance check of the layer-sum property: the trait layers are
/// advanced with step() while the total density is advanced with
/// step_density_only() on the same dt sequence; both flux forms share the
/// donor-density structure, so the gap stays at roundoff when R does not
/// depend on the trait.
inline ConsistencyResult layer_sum_consistency(const PopulationField& n0,
                                               const SpatialGrid& grid,
                                               const PhenotypeMesh& mesh,
                                               const SolverConfig& config, long max_steps) {
    SimulationState state = make_state(grid, mesh, n0, config.model);
    ScalarField rho_direct = state.rho;
    ConsistencyResult result;
    for (long k = 0; k < max_steps && state.t < config.t_end; ++k) {
        double dt = stable_dt(state, config);
        dt = std::min(dt, config.t_end - state.t);
        rho_direct = step_density_only(rho_direct, dt, config, grid, mesh);
        step(state, dt, config);
        double gap = 0.0;
        for (int j = 0; j < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i)
                gap = std::max(gap, std::abs(state.rho(i, j) - rho_direct(i, j)));
        result.final_gap = gap;
        result.steps = k + 1;
        result.max_gap_per_step = std::max(result.max_gap_per_step, gap / result.steps);
    }
    return result;
}

}  // namespace phenoflow

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "phenoflow/errors.hpp"
#include "phenoflow/fields.hpp"
#include "phenoflow/grid.hpp"
#include "phenoflow/reaction.hpp"

namespace phenoflow {

enum class BoundaryContactPolicy { Abort, Warn };

/// Model-level parameters: pressure stiffness, viscosity, reaction.
struct ModelParams {
    double gamma = 2.0;
    double epsilon = 0.0;
    ReactionSpec reaction;
    std::optional<MutationKernel> mutation;

    double rho_max() const { return reaction.rho_max(gamma); }

    /// ||R||_inf used by CFL caps and Gronwall bounds.
    double sup_rate(bool mutation_mode) const {
        return mutation_mode && mutation ? mutation->sup_rate() : reaction.sup_rate();
    }
};

/// Numerical configuration of a run.
struct SolverConfig {
    ModelParams model;
    double cfl = 0.4;  // in (0, 1]
    double t_end = 1.0;
    std::vector<double> snapshot_times;
    bool mutation_mode = false;
    BoundaryContactPolicy contact = BoundaryContactPolicy::Abort;
    bool override_assumptions = false;  // run despite failed model assumptions
    bool lift_initial = true;           // apply the eps*exp(-|x|^2) lift when eps > 0

    // diagnostics recording
    int diag_rows = 1000;                  // target rows in the time series (0 = every step)
    std::vector<double> diag_alphas;       // alphas for the weighted |grad p|^4 integrals
};

/// Full solver state at one time level. The derived fields are refreshed
/// from n after every accepted step.
struct SimulationState {
    SpatialGrid grid;
    PhenotypeMesh mesh;
    double t = 0.0;
    long step_count = 0;
    PopulationField n;
    ScalarField rho, p, v, mean_r;
    FractionField sigma;
    long flushed_cells = 0;    // cumulative count of negative-roundoff flushes
    double flushed_mass = 0.0; // cumulative |mass| flushed to zero
    bool boundary_contact = false;

    SimulationState(const SpatialGrid& g, const PhenotypeMesh& m, PopulationField initial)
        : grid(g), mesh(m), n(std::move(initial)) {}
};

/// Recompute the cached rho, p, v, sigma and mean reaction from n.
inline void refresh_state(SimulationState& state, const ModelParams& model) {
    state.rho = total_density(state.n, state.mesh, state.grid);
    state.p = pressure(state.rho, model.gamma);
    state.v = v_field(state.rho, model.gamma);
    state.sigma = fraction_densities(state.n, state.rho, state.mesh, state.grid,
                                     kSigmaFloorRel * model.rho_max());
    state.mean_r = mean_reaction(state.sigma, state.p, state.mesh, state.grid, model.reaction);
}

inline SimulationState make_state(const SpatialGrid& grid, const PhenotypeMesh& mesh,
                                  PopulationField n0, const ModelParams& model) {
    SimulationState state(grid, mesh, std::move(n0));
    refresh_state(state, model);
    return state;
}

/// Largest face gradient of the pressure, |D_h p|, over all faces
/// including the ghost-adjacent ones (ghost p = 0).
inline double max_face_gradient(const ScalarField& p, const SpatialGrid& grid) {
    const double h = grid.spacing();
    double m = 0.0;
    for (int j = 0; j < grid.ny(); ++j)
        for (int f = 0; f <= grid.nx(); ++f)
            m = std::max(m, std::abs(p(f, j) - p(f - 1, j)) / h);
    if (grid.dim() == 2)
        for (int i = 0; i < grid.nx(); ++i)
            for (int f = 0; f <= grid.ny(); ++f)
                m = std::max(m, std::abs(p(i, f) - p(i, f - 1)) / h);
    return m;
}

/// Explicit-stability step size:
///   dt = cfl * min( h^2 / (2 d (gamma p_max + eps)),
///                   h / (max |D_h p| + delta),
///                   1 / (2 ||R||_inf) ).
inline double stable_dt(const SimulationState& state, const SolverConfig& config) {
    const double h = state.grid.spacing();
    const int d = state.grid.dim();
    const double p_max = std::max(state.p.max_interior(), 0.0);
    const double diffusive =
        h * h / (2.0 * d * (config.model.gamma * p_max + config.model.epsilon) + 1e-300);
    const double advective = h / (max_face_gradient(state.p, state.grid) + 1e-30);
    double dt = std::min(diffusive, advective);
    const double sup_rate = config.model.sup_rate(config.mutation_mode);
    if (sup_rate > 0.0) dt = std::min(dt, 1.0 / (2.0 * sup_rate));
    return config.cfl * dt;
}

namespace detail {

/// Conservative upwind transport increment for one layer:
/// acc -= dt/h * (F_right - F_left), face flux F = u * donor,
/// face velocity u = -(p_R - p_L)/h. Ghost values are zero.
inline void add_upwind_transport(const ScalarField& field, const ScalarField& p,
                                 const SpatialGrid& grid, double dt, ScalarField& acc) {
    const double h = grid.spacing();
    const double lam = dt / h;
    for (int j = 0; j < grid.ny(); ++j) {
        double flux_left = 0.0;
        {
            const double u = -(p(0, j) - p(-1, j)) / h;
            flux_left = u * (u > 0.0 ? field(-1, j) : field(0, j));
        }
        for (int i = 0; i < grid.nx(); ++i) {
            const double u = -(p(i + 1, j) - p(i, j)) / h;
            const double flux_right = u * (u > 0.0 ? field(i, j) : field(i + 1, j));
            acc(i, j) -= lam * (flux_right - flux_left);
            flux_left = flux_right;
        }
    }
    if (grid.dim() == 2) {
        for (int i = 0; i < grid.nx(); ++i) {
            double flux_left = 0.0;
            {
                const double u = -(p(i, 0) - p(i, -1)) / h;
                flux_left = u * (u > 0.0 ? field(i, -1) : field(i, 0));
            }
            for (int j = 0; j < grid.ny(); ++j) {
                const double u = -(p(i, j + 1) - p(i, j)) / h;
                const double flux_right = u * (u > 0.0 ? field(i, j) : field(i, j + 1));
                acc(i, j) -= lam * (flux_right - flux_left);
                flux_left = flux_right;
            }
        }
    }
}

/// acc += dt * eps * Lap_h(field), zero ghosts.
inline void add_diffusion(const ScalarField& field, const SpatialGrid& grid, double dt,
                          double eps, ScalarField& acc) {
    if (eps == 0.0) return;
    const double h = grid.spacing();
    const double mu = dt * eps / (h * h);
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            double lap = field(i - 1, j) - 2.0 * field(i, j) + field(i + 1, j);
            if (grid.dim() == 2)
                lap += field(i, j - 1) - 2.0 * field(i, j) + field(i, j + 1);
            acc(i, j) += mu * lap;
        }
}

/// Scan a freshly updated layer: NaN or negativity beyond the guard
/// aborts; negative roundoff in [-guard, 0) is flushed to zero and
/// tallied.
inline void guard_layer(ScalarField& layer, const SpatialGrid& grid, double guard,
                        double layer_weight, SimulationState& state, const char* what) {
    const double hv = grid.cell_volume();
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            double& val = layer(i, j);
            if (!std::isfinite(val))
                throw SolverError(std::string(what) + ": non-finite value at cell (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")",
                                  state.step_count, state.t);
            if (val < -guard)
                throw SolverError(std::string(what) + ": negativity beyond roundoff guard (" +
                                      std::to_string(val) + ") at cell (" + std::to_string(i) +
                                      "," + std::to_string(j) + ")",
                                  state.step_count, state.t);
            if (val < 0.0) {
                state.flushed_cells += 1;
                state.flushed_mass += -val * hv * layer_weight;
                val = 0.0;
            }
        }
}

/// True when the support (cells above the vacuum floor) touches the
/// first or last interior cell along any axis.
inline bool support_touches_boundary(const ScalarField& rho, const SpatialGrid& grid,
                                     double floor) {
    for (int j = 0; j < grid.ny(); ++j)
        if (rho(0, j) > floor || rho(grid.nx() - 1, j) > floor) return true;
    if (grid.dim() == 2)
        for (int i = 0; i < grid.nx(); ++i)
            if (rho(i, 0) > floor || rho(i, grid.ny() - 1) > floor) return true;
    return false;
}

}  // namespace detail

/// One forward-Euler step of the structured system. For each trait layer:
///   n' = n + dt * [ -div_h(upwind(n) * u) + eps Lap_h n + reaction ],
/// u = -D_h p at faces; the reaction is diagonal n R(y, p) or, in
/// mutation mode, the cross-trait integral. Caller guarantees
/// dt <= stable_dt.
inline void step(SimulationState& state, double dt, const SolverConfig& config) {
    const SpatialGrid& grid = state.grid;
    const PhenotypeMesh& mesh = state.mesh;
    const ModelParams& model = config.model;
    const double guard = 1e-14 * model.rho_max();

    std::optional<PopulationField> mutation_term;
    if (config.mutation_mode) {
        if (!model.mutation)
            throw SolverError("mutation mode enabled without a mutation kernel",
                              state.step_count, state.t);
        mutation_term = mutation_reaction(state.n, state.p, *model.mutation, mesh, grid);
    }

    for (int layer = 0; layer < mesh.size(); ++layer) {
        ScalarField updated = state.n.layer(layer);
        detail::add_upwind_transport(state.n.layer(layer), state.p, grid, dt, updated);
        detail::add_diffusion(state.n.layer(layer), grid, dt, model.epsilon, updated);
        if (config.mutation_mode) {
            for (int j = 0; j < grid.ny(); ++j)
                for (int i = 0; i < grid.nx(); ++i)
                    updated(i, j) += dt * mutation_term->layer(layer)(i, j);
        } else {
            const double y = mesh.node(layer);
            for (int j = 0; j < grid.ny(); ++j)
                for (int i = 0; i < grid.nx(); ++i)
                    updated(i, j) +=
                        dt * state.n.layer(layer)(i, j) *
                        reaction_rate(y, state.p(i, j), model.reaction);
        }
        detail::guard_layer(updated, grid, guard, mesh.weight(layer), state, "step");
        state.n.layer(layer) = std::move(updated);
    }

    state.t += dt;
    state.step_count += 1;
    refresh_state(state, model);

    if (detail::support_touches_boundary(state.rho, grid, guard)) {
        if (config.contact == BoundaryContactPolicy::Abort)
            throw BoundaryContactError(
                "support reached the domain boundary; the compact-support reduction is invalid",
                state.step_count, state.t);
        state.boundary_contact = true;
    }
}

/// Uniform-trait mean rate sum_j w_j R(y_j, p), the reaction closure of
/// the density-only mode.
inline double uniform_mean_rate(double p, const PhenotypeMesh& mesh, const ReactionSpec& spec) {
    double acc = 0.0;
    for (int j = 0; j < mesh.size(); ++j)
        acc += mesh.weight(j) * reaction_rate(mesh.node(j), p, spec);
    return acc;
}

/// One step of the density equation advanced directly. The flux is the
/// same upwind rho * (-D_h p) form as the layered scheme (never a direct
/// Laplacian of rho^(gamma+1)), so summing trait layers and advancing the
/// density agree to roundoff when R is trait-independent.
inline ScalarField step_density_only(const ScalarField& rho, double dt,
                                     const SolverConfig& config, const SpatialGrid& grid,
                                     const PhenotypeMesh& mesh) {
    const ModelParams& model = config.model;
    const ScalarField p = pressure(rho, model.gamma);
    ScalarField updated = rho;
    detail::add_upwind_transport(rho, p, grid, dt, updated);
    detail::add_diffusion(rho, grid, dt, model.epsilon, updated);
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
            updated(i, j) += dt * rho(i, j) * uniform_mean_rate(p(i, j), mesh, model.reaction);

    const double guard = 1e-14 * model.rho_max();
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            double& val = updated(i, j);
            if (!std::isfinite(val))
                throw SolverError("density step: non-finite value", -1, 0.0);
            if (val < -guard)
                throw SolverError("density step: negativity beyond roundoff guard", -1, 0.0);
            if (val < 0.0) val = 0.0;
        }
    return updated;
}

/// CFL bound for the density-only mode (same formula as stable_dt).
inline double stable_dt_density(const ScalarField& rho, const SolverConfig& config,
                                const SpatialGrid& grid, const PhenotypeMesh& mesh) {
    const ScalarField p = pressure(rho, config.model.gamma);
    const double h = grid.spacing();
    const int d = grid.dim();
    const double p_max = std::max(p.max_interior(), 0.0);
    const double diffusive =
        h * h / (2.0 * d * (config.model.gamma * p_max + config.model.epsilon) + 1e-300);
    const double advective = h / (max_face_gradient(p, grid) + 1e-30);
    double dt = std::min(diffusive, advective);
    const double sup_rate = config.model.sup_rate(false);
    if (sup_rate > 0.0) dt = std::min(dt, 1.0 / (2.0 * sup_rate));
    return config.cfl * dt;
}

/// Ratio against the viscous-regime lower barrier
/// rho_low = eps e^(-K t) e^(-|x|^2), K = 2(eps + gamma) + ||R||_inf,
/// minimized over cells with |x| <= radius (default 2) where the barrier
/// is resolvable above roundoff. Returns +inf when eps == 0.
inline double subsolution_ratio(const SimulationState& state, const SolverConfig& config,
                                double radius = 2.0) {
    const double eps = config.model.epsilon;
    if (eps <= 0.0) return std::numeric_limits<double>::infinity();
    const double K = 2.0 * (eps + config.model.gamma) +
                     config.model.sup_rate(config.mutation_mode);
    const double decay = std::exp(-K * state.t);
    double worst = std::numeric_limits<double>::infinity();
    for (int j = 0; j < state.grid.ny(); ++j)
        for (int i = 0; i < state.grid.nx(); ++i) {
            const double r_sq = state.grid.center_radius_sq(i, j);
            if (r_sq > radius * radius) continue;
            const double barrier = eps * decay * std::exp(-r_sq);
            worst = std::min(worst, state.rho(i, j) / barrier);
        }
    return worst;
}

}  // namespace phenoflow

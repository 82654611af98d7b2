#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "phenoflow/errors.hpp"
#include "phenoflow/fields.hpp"
#include "phenoflow/grid.hpp"
#include "phenoflow/reaction.hpp"
#include "phenoflow/solver.hpp"

namespace phenoflow {

/// Pressure floor (relative to p_M) in the denominators of the weighted
/// gradient integrands. The integrands are integrable despite vacuum;
/// the floor only prevents 0/0 at faces where D_h p = 0.
inline constexpr double kPressureFloorRel = 1e-12;

struct BasicNorms {
    double mass = 0.0;
    double sup_rho = 0.0;
    double second_moment = 0.0;
    double sigma_sup = 0.0;
};

inline BasicNorms basic_norms(const SimulationState& state) {
    BasicNorms out;
    const SpatialGrid& grid = state.grid;
    const double hv = grid.cell_volume();
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            const double r = state.rho(i, j);
            out.mass += hv * r;
            out.sup_rho = std::max(out.sup_rho, r);
            out.second_moment += hv * r * grid.center_radius_sq(i, j);
            for (int l = 0; l < state.mesh.size(); ++l)
                out.sigma_sup = std::max(out.sigma_sup, state.sigma.layer(l)(i, j));
        }
    return out;
}

namespace detail {

/// Applies fn(left, right) at every face between two interior cells and
/// accumulates fn's value times the cell volume. Ghost faces are excluded,
/// which matches the hand-quadrature convention of the diagnostics; for
/// compactly supported fields they contribute nothing anyway.
template <typename FaceFn>
double face_quadrature(const ScalarField& f, const SpatialGrid& grid, FaceFn&& fn) {
    const double hv = grid.cell_volume();
    double acc = 0.0;
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i + 1 < grid.nx(); ++i) acc += hv * fn(f(i, j), f(i + 1, j));
    if (grid.dim() == 2)
        for (int j = 0; j + 1 < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i) acc += hv * fn(f(i, j), f(i, j + 1));
    return acc;
}

}  // namespace detail

/// ∫ |D_h p|^2 by face quadrature.
inline double grad_p_l2(const ScalarField& p, const SpatialGrid& grid) {
    const double h = grid.spacing();
    return detail::face_quadrature(p, grid, [h](double a, double b) {
        const double g = (b - a) / h;
        return g * g;
    });
}

/// ∫ |D_h p|^4 by face quadrature.
inline double grad_p_l4(const ScalarField& p, const SpatialGrid& grid) {
    const double h = grid.spacing();
    return detail::face_quadrature(p, grid, [h](double a, double b) {
        const double g = (b - a) / h;
        return g * g * g * g;
    });
}

/// Entropy-dissipation functional (4 gamma/(gamma+1)^2) ∫ |D_h rho^((gamma+1)/2)|^2.
inline double entropy_dissipation(const ScalarField& rho, double gamma,
                                  const SpatialGrid& grid) {
    const double h = grid.spacing();
    const double e = (gamma + 1.0) / 2.0;
    const double coeff = 4.0 * gamma / ((gamma + 1.0) * (gamma + 1.0));
    return coeff * detail::face_quadrature(rho, grid, [h, e](double a, double b) {
               const double g = (std::pow(b, e) - std::pow(a, e)) / h;
               return g * g;
           });
}

/// (1/gamma) ∫ |D_h p|^2 / pbar^(1-1/gamma) with the face mean floored.
inline double ab_weighted_grad(const ScalarField& p, double gamma, const SpatialGrid& grid,
                               double p_m = 1.0) {
    const double h = grid.spacing();
    const double floor = kPressureFloorRel * p_m;
    const double expo = 1.0 - 1.0 / gamma;
    return (1.0 / gamma) * detail::face_quadrature(p, grid, [=](double a, double b) {
               const double g = (b - a) / h;
               if (g == 0.0) return 0.0;
               const double mean = std::max(0.5 * (a + b), floor);
               return g * g / std::pow(mean, expo);
           });
}

/// Weighted fourth-power gradient integral of the trait-structured L4
/// estimate: returns { ∫ |D_h p|^4 / pbar^(1-alpha), kappa(alpha) } with
/// kappa(alpha) = alpha/6 (1 - alpha gamma). Requires 0 <= alpha < 1/gamma.
inline std::pair<double, double> weighted_grad4(const ScalarField& p, double alpha,
                                                double gamma, const SpatialGrid& grid,
                                                double p_m = 1.0) {
    // kappa vanishes at both endpoints of [0, 1/gamma]; outside, the
    // estimate is meaningless
    if (!(alpha >= 0.0 && alpha <= 1.0 / gamma))
        throw ParameterError("weighted gradient integral requires 0 <= alpha <= 1/gamma");
    const double h = grid.spacing();
    const double floor = kPressureFloorRel * p_m;
    const double expo = 1.0 - alpha;
    const double value = detail::face_quadrature(p, grid, [=](double a, double b) {
        const double g = (b - a) / h;
        if (g == 0.0) return 0.0;
        const double g2 = g * g;
        const double mean = std::max(0.5 * (a + b), floor);
        return g2 * g2 / std::pow(mean, expo);
    });
    const double kappa = alpha / 6.0 * (1.0 - alpha * gamma);
    return {value, kappa};
}

/// Cell-centered second-difference integrals:
/// { ∫ p (D^2_{i,j} p)^2, ∫ |D_h p|^4 } with (D^2)^2 the squared Frobenius
/// norm of the Hessian stencil and the gradient by central differences.
inline std::pair<double, double> hessian_weighted(const ScalarField& p,
                                                  const SpatialGrid& grid) {
    const double h = grid.spacing();
    const double hv = grid.cell_volume();
    double weighted = 0.0, grad4 = 0.0;
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            const double pxx = (p(i - 1, j) - 2.0 * p(i, j) + p(i + 1, j)) / (h * h);
            double frob = pxx * pxx;
            double gx = (p(i + 1, j) - p(i - 1, j)) / (2.0 * h);
            double grad_sq = gx * gx;
            if (grid.dim() == 2) {
                const double pyy = (p(i, j - 1) - 2.0 * p(i, j) + p(i, j + 1)) / (h * h);
                const double pxy = (p(i + 1, j + 1) - p(i + 1, j - 1) - p(i - 1, j + 1) +
                                    p(i - 1, j - 1)) /
                                   (4.0 * h * h);
                frob += pyy * pyy + 2.0 * pxy * pxy;
                const double gy = (p(i, j + 1) - p(i, j - 1)) / (2.0 * h);
                grad_sq += gy * gy;
            }
            weighted += hv * p(i, j) * frob;
            grad4 += hv * grad_sq * grad_sq;
        }
    return {weighted, grad4};
}

/// ∫ |p (1 - rho)| — vanishes in the stiff limit (saturation relation).
inline double saturation_residual(const ScalarField& p, const ScalarField& rho,
                                  const SpatialGrid& grid) {
    const double hv = grid.cell_volume();
    double acc = 0.0;
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
            acc += hv * std::abs(p(i, j) * (1.0 - rho(i, j)));
    return acc;
}

/// Discrete Laplacian at a cell (zero ghosts).
inline double laplacian_at(const ScalarField& p, const SpatialGrid& grid, int i, int j) {
    const double h = grid.spacing();
    double lap = (p(i - 1, j) - 2.0 * p(i, j) + p(i + 1, j)) / (h * h);
    if (grid.dim() == 2)
        lap += (p(i, j - 1) - 2.0 * p(i, j) + p(i, j + 1)) / (h * h);
    return lap;
}

/// ∫ |p (Lap_h p + sum_j w_j n_j R(y_j, p))| — vanishes in the stiff
/// limit (complementarity relation). O(1) on compressible profiles.
inline double complementarity_residual(const PopulationField& n, const ScalarField& p,
                                       const PhenotypeMesh& mesh, const SpatialGrid& grid,
                                       const ReactionSpec& spec) {
    const double hv = grid.cell_volume();
    double acc = 0.0;
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            const double pv = p(i, j);
            if (pv == 0.0) continue;
            double reaction = 0.0;
            for (int l = 0; l < mesh.size(); ++l)
                reaction += mesh.weight(l) * n.layer(l)(i, j) *
                            reaction_rate(mesh.node(l), pv, spec);
            acc += hv * std::abs(pv * (laplacian_at(p, grid, i, j) + reaction));
        }
    return acc;
}

/// The completed-estimate integrand ∫ p^(alpha+1) (Lap_h p + calR)^2.
/// Recorded for reference; no bound is asserted on it.
inline double elliptic_weighted(const ScalarField& p, const ScalarField& mean_r, double alpha,
                                const SpatialGrid& grid) {
    const double hv = grid.cell_volume();
    double acc = 0.0;
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            const double pv = p(i, j);
            if (pv == 0.0) continue;
            const double e = laplacian_at(p, grid, i, j) + mean_r(i, j);
            acc += hv * std::pow(pv, alpha + 1.0) * e * e;
        }
    return acc;
}

/// 1D free-boundary locations: sign changes of (p - threshold) between
/// consecutive cell centers, located by linear interpolation.
inline std::vector<double> free_boundary(const ScalarField& p, const SpatialGrid& grid,
                                         double threshold) {
    if (grid.dim() != 1)
        throw DimensionError("interface positions are defined in 1D; use the indicator in 2D");
    std::vector<double> crossings;
    for (int i = 0; i + 1 < grid.nx(); ++i) {
        const double a = p(i, 0) - threshold;
        const double b = p(i + 1, 0) - threshold;
        if ((a > 0.0 && b <= 0.0) || (a <= 0.0 && b > 0.0)) {
            const double x0 = grid.center(0, i);
            crossings.push_back(x0 + grid.spacing() * a / (a - b));
        }
    }
    return crossings;
}

/// Cells where the pressure exceeds the threshold (any dimension).
inline std::vector<std::pair<int, int>> free_boundary_indicator(const ScalarField& p,
                                                                const SpatialGrid& grid,
                                                                double threshold) {
    std::vector<std::pair<int, int>> cells;
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
            if (p(i, j) > threshold) cells.push_back({i, j});
    return cells;
}

/// The chain-rule identity behind the weighted gradient bound:
/// (4 gamma/(gamma+1)^2) |D rho^((gamma+1)/2)|^2 and
/// (1/gamma) |D p|^2 / pbar^(1-1/gamma) evaluated over the same face set
/// (faces whose smaller density exceeds rho_mask), returned as
/// { entropy quadrature, weighted quadrature }.
inline std::pair<double, double> entropy_ab_identity(const ScalarField& rho, double gamma,
                                                     const SpatialGrid& grid,
                                                     double rho_mask) {
    const double h = grid.spacing();
    const double hv = grid.cell_volume();
    const double e = (gamma + 1.0) / 2.0;
    const double coeff = 4.0 * gamma / ((gamma + 1.0) * (gamma + 1.0));
    const double expo = 1.0 - 1.0 / gamma;
    double entropy = 0.0, weighted = 0.0;
    auto add_face = [&](double ra, double rb) {
        if (std::min(ra, rb) < rho_mask) return;
        const double ge = (std::pow(rb, e) - std::pow(ra, e)) / h;
        entropy += hv * coeff * ge * ge;
        const double pa = std::pow(ra, gamma), pb = std::pow(rb, gamma);
        const double gp = (pb - pa) / h;
        weighted += hv * gp * gp / std::pow(0.5 * (pa + pb), expo) / gamma;
    };
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i + 1 < grid.nx(); ++i) add_face(rho(i, j), rho(i + 1, j));
    if (grid.dim() == 2)
        for (int j = 0; j + 1 < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i) add_face(rho(i, j), rho(i, j + 1));
    return {entropy, weighted};
}

/// One row of the diagnostics time series: every functional the model
/// analysis bounds or drives to zero.
struct DiagnosticsRecord {
    double t = 0.0;
    double mass = 0.0;
    double sup_rho = 0.0;
    double second_moment = 0.0;
    double sigma_sup = 0.0;
    double grad_p_l2 = 0.0;
    double grad_p_l4 = 0.0;
    double weighted_grad4_alpha = 0.0;
    double weighted_grad4 = 0.0;
    double kappa = 0.0;
    double entropy_dissipation = 0.0;
    double ab_weighted = 0.0;
    double hessian_weighted = 0.0;   // ∫ p (D^2 p)^2
    double grad_p_l4_cell = 0.0;     // companion cell-quadrature of ∫ |grad p|^4
    double elliptic_weighted = 0.0;  // ∫ p^(alpha+1) (Lap p + calR)^2
    double saturation_residual = 0.0;
    double complementarity_residual = 0.0;
};

inline DiagnosticsRecord compute_record(const SimulationState& state, const ModelParams& model,
                                        double alpha) {
    DiagnosticsRecord rec;
    rec.t = state.t;
    const BasicNorms norms = basic_norms(state);
    rec.mass = norms.mass;
    rec.sup_rho = norms.sup_rho;
    rec.second_moment = norms.second_moment;
    rec.sigma_sup = norms.sigma_sup;
    rec.grad_p_l2 = grad_p_l2(state.p, state.grid);
    rec.grad_p_l4 = grad_p_l4(state.p, state.grid);
    rec.weighted_grad4_alpha = alpha;
    if (alpha > 0.0 && alpha < 1.0 / model.gamma) {
        const auto [value, kappa] =
            weighted_grad4(state.p, alpha, model.gamma, state.grid, model.reaction.p_m);
        rec.weighted_grad4 = value;
        rec.kappa = kappa;
    }
    rec.entropy_dissipation = entropy_dissipation(state.rho, model.gamma, state.grid);
    rec.ab_weighted =
        ab_weighted_grad(state.p, model.gamma, state.grid, model.reaction.p_m);
    const auto [hess, grad4_cell] = hessian_weighted(state.p, state.grid);
    rec.hessian_weighted = hess;
    rec.grad_p_l4_cell = grad4_cell;
    rec.elliptic_weighted = elliptic_weighted(state.p, state.mean_r, alpha, state.grid);
    rec.saturation_residual = saturation_residual(state.p, state.rho, state.grid);
    rec.complementarity_residual = complementarity_residual(
        state.n, state.p, state.mesh, state.grid, model.reaction);
    return rec;
}

}  // namespace phenoflow

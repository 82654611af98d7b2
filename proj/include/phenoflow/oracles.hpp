#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "phenoflow/errors.hpp"
#include "phenoflow/grid.hpp"
#include "phenoflow/reaction.hpp"

namespace phenoflow {

/// Self-similar profile of the porous medium equation with exponent
/// m = gamma + 1, used as the reference solution for the density
/// equation with zero reaction. The equation carries the coefficient
/// gamma/(gamma+1), which is absorbed as a rescaling of time.
struct BarenblattParams {
    double gamma = 2.0;
    int dim = 1;
    double mass = 1.0;
    double t0 = 0.1;  // time offset that avoids the initial singularity

    double m() const { return gamma + 1.0; }
    double alpha() const { return dim / (dim * (m() - 1.0) + 2.0); }
    double beta() const { return alpha() / dim; }
    double k() const { return alpha() * (m() - 1.0) / (2.0 * m() * dim); }

    /// Profile constant fixed so the total mass equals `mass`:
    /// M = pi^(d/2) k^(-d/2) C^(d/2+q) Gamma(q+1)/Gamma(d/2+q+1), q = 1/(m-1).
    double profile_constant() const {
        const double q = 1.0 / (m() - 1.0);
        const double d2 = dim / 2.0;
        const double denom = std::pow(std::numbers::pi, d2) * std::tgamma(q + 1.0) /
                             std::tgamma(d2 + q + 1.0);
        return std::pow(mass * std::pow(k(), d2) / denom, 1.0 / (d2 + q));
    }

    /// Rescaled time tau = gamma/(gamma+1) * (t + t0).
    double tau(double t) const { return gamma / (gamma + 1.0) * (t + t0); }

    /// Edge of the support at time t: |x| = sqrt(C/k) * tau^beta.
    double support_radius(double t) const {
        return std::sqrt(profile_constant() / k()) * std::pow(tau(t), beta());
    }
};

/// U(x, tau) = tau^(-alpha) (C - k |x|^2 tau^(-2 beta))_+^(1/(m-1)).
inline double barenblatt_density(double radius_sq, double t, const BarenblattParams& params) {
    if (!(t > 0.0)) throw ParameterError("Barenblatt profile requires t > 0");
    const double tau = params.tau(t);
    const double arg = params.profile_constant() -
                       params.k() * radius_sq * std::pow(tau, -2.0 * params.beta());
    if (arg <= 0.0) return 0.0;
    return std::pow(tau, -params.alpha()) * std::pow(arg, 1.0 / (params.m() - 1.0));
}

struct BarenblattSelfTest {
    bool pass = false;
    double mass_error = 0.0;          // relative quadrature error of the mass
    double residual_order = 0.0;      // observed refinement order of the PDE residual
    std::vector<double> residuals;    // max residual per refinement level
};

/// Gate that every consumer of the oracle runs first: (i) fine-quadrature
/// mass agrees with the requested mass to 1e-8 relative, (ii) the discrete
/// PDE residual d_t U - gamma/(gamma+1) Lap_h U^(gamma+1), evaluated inside
/// the support, decreases at first order or better under refinement.
/// 1D and 2D (tensor quadrature) are supported.
inline BarenblattSelfTest barenblatt_self_test(const BarenblattParams& params,
                                               double t_check = 0.3) {
    BarenblattSelfTest result;

    // radial quadrature M = omega_d int_0^R U(r) r^(d-1) dr; the edge
    // singularity (R-r)^(1/(m-1)) needs a fine mesh to reach 1e-8
    {
        const double r_max = params.support_radius(t_check) * 1.001;
        const double omega = params.dim == 1 ? 2.0 : 2.0 * std::numbers::pi;
        const long n = 2000000;
        const double h = r_max / n;
        double mass = 0.0;
        for (long i = 0; i < n; ++i) {
            const double r = (i + 0.5) * h;
            mass += h * barenblatt_density(r * r, t_check, params) *
                    (params.dim == 1 ? 1.0 : r);
        }
        mass *= omega;
        result.mass_error = std::abs(mass - params.mass) / params.mass;
    }

    // PDE residual along a slice through the origin, central differences in
    // both t and x, restricted to 80% of the support where the profile is
    // smooth. In 2D the transverse second difference is evaluated from the
    // radial closed form at radius^2 = x^2 + h^2.
    const double c = params.gamma / (params.gamma + 1.0);
    for (int level = 0; level < 3; ++level) {
        const int n = 400 << level;
        const double h = 2.0 * params.support_radius(t_check) / n;
        const double dt = h;
        double max_res = 0.0;
        auto um = [&](double radius_sq) {
            return std::pow(barenblatt_density(radius_sq, t_check, params), params.m());
        };
        for (int i = 1; i + 1 < n; ++i) {
            const double x = -params.support_radius(t_check) + (i + 0.5) * h;
            if (std::abs(x) > 0.8 * params.support_radius(t_check)) continue;
            const double dudt = (barenblatt_density(x * x, t_check + dt, params) -
                                 barenblatt_density(x * x, t_check - dt, params)) /
                                (2.0 * dt);
            const double xm = x - h, xp = x + h;
            double lap = (um(xp * xp) - 2.0 * um(x * x) + um(xm * xm)) / (h * h);
            if (params.dim == 2)
                lap += 2.0 * (um(x * x + h * h) - um(x * x)) / (h * h);
            const double res = std::abs(dudt - c * lap);
            max_res = std::max(max_res, res);
        }
        result.residuals.push_back(max_res);
    }
    // observed order between successive levels (h halves each level)
    double order = 0.0;
    for (std::size_t l = 1; l < result.residuals.size(); ++l)
        order += std::log2(result.residuals[l - 1] / result.residuals[l]);
    result.residual_order = order / (result.residuals.size() - 1);

    result.pass = result.mass_error < 1e-8 && result.residual_order >= 1.0;
    return result;
}

/// High-accuracy fixed-step RK4 reference for the space-homogeneous
/// reduction: dn_j/dt = n_j R(y_j, rho^gamma), rho = sum_j w_j n_j.
inline std::vector<double> ode_reference(std::vector<double> n0, const ReactionSpec& spec,
                                         const PhenotypeMesh& mesh, double gamma, double t_end,
                                         double dt = 1e-5) {
    if (static_cast<int>(n0.size()) != mesh.size())
        throw DimensionError("initial values do not match phenotype mesh");
    const int count = mesh.size();
    auto rhs = [&](const std::vector<double>& n, std::vector<double>& out) {
        double rho = 0.0;
        for (int j = 0; j < count; ++j) rho += mesh.weight(j) * n[j];
        const double p = std::pow(std::max(rho, 0.0), gamma);
        for (int j = 0; j < count; ++j) out[j] = n[j] * reaction_rate(mesh.node(j), p, spec);
    };

    std::vector<double> k1(count), k2(count), k3(count), k4(count), tmp(count);
    double t = 0.0;
    while (t < t_end - 1e-15) {
        const double step = std::min(dt, t_end - t);
        rhs(n0, k1);
        for (int j = 0; j < count; ++j) tmp[j] = n0[j] + 0.5 * step * k1[j];
        rhs(tmp, k2);
        for (int j = 0; j < count; ++j) tmp[j] = n0[j] + 0.5 * step * k2[j];
        rhs(tmp, k3);
        for (int j = 0; j < count; ++j) tmp[j] = n0[j] + step * k3[j];
        rhs(tmp, k4);
        for (int j = 0; j < count; ++j)
            n0[j] += step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        t += step;
    }
    return n0;
}

struct ConvergenceResult {
    double order = 0.0;
    bool monotone = true;  // false when the error sequence is not decreasing
};

/// Least-squares slope of log(error) against log(spacing).
inline ConvergenceResult convergence_order(const std::vector<double>& errors,
                                           const std::vector<double>& spacings) {
    if (errors.size() != spacings.size() || errors.size() < 3)
        throw DimensionError("convergence fit needs >= 3 matching (error, spacing) pairs");
    for (std::size_t i = 1; i < spacings.size(); ++i)
        if (!(spacings[i] < spacings[i - 1]))
            throw ParameterError("spacings must be strictly decreasing");

    ConvergenceResult result;
    const std::size_t count = errors.size();
    double sx = 0.0, sy = 0.0;
    std::vector<double> lx(count), ly(count);
    for (std::size_t i = 0; i < count; ++i) {
        lx[i] = std::log(spacings[i]);
        ly[i] = std::log(std::max(errors[i], 1e-300));
        sx += lx[i];
        sy += ly[i];
        if (i > 0 && errors[i] > errors[i - 1]) result.monotone = false;
    }
    const double mx = sx / count, my = sy / count;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    result.order = num / den;
    return result;
}

}  // namespace phenoflow

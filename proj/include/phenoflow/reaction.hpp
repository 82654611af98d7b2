#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phenoflow/errors.hpp"
#include "phenoflow/fields.hpp"
#include "phenoflow/grid.hpp"

namespace phenoflow {

/// Growth-rate table sampled on a trait-node / pressure lattice.
/// Header semantics follow the CSV interface: one row per trait node,
/// one column per pressure sample. Values are interpolated linearly in p
/// and clamped outside the sampled range.
struct TabulatedRate {
    std::vector<double> y_nodes;              // strictly increasing
    std::vector<double> p_samples;            // strictly increasing, starting at 0
    std::vector<std::vector<double>> values;  // values[y][p]

    double eval(int y_index, double p) const {
        const auto& row = values[y_index];
        if (p <= p_samples.front()) return row.front();
        if (p >= p_samples.back()) return row.back();
        auto it = std::upper_bound(p_samples.begin(), p_samples.end(), p);
        const std::size_t k = static_cast<std::size_t>(it - p_samples.begin()) - 1;
        const double t = (p - p_samples[k]) / (p_samples[k + 1] - p_samples[k]);
        return row[k] + t * (row[k + 1] - row[k]);
    }
};

/// Reaction-rate specification. Families:
///  - linear_inhibition: R(y,p) = g(y) (1 - p/p_M) with g(y) = g0 + g1 y
///  - custom_tabulated:  sampled table, linear in p
///  - none:              R = 0 (reduced runs; fails the growth assumption
///                       and therefore requires an explicit override)
struct ReactionSpec {
    enum class Family { LinearInhibition, CustomTabulated, None };

    Family family = Family::LinearInhibition;
    double g0 = 1.0;      // trait growth profile g(y) = g0 + g1*y
    double g1 = 0.0;
    double p_m = 1.0;     // homeostatic pressure
    TabulatedRate table;  // used by CustomTabulated

    static ReactionSpec linear_inhibition(double g0, double g1, double p_m = 1.0) {
        ReactionSpec s;
        s.family = Family::LinearInhibition;
        s.g0 = g0;
        s.g1 = g1;
        s.p_m = p_m;
        return s;
    }

    static ReactionSpec none() {
        ReactionSpec s;
        s.family = Family::None;
        return s;
    }

    static ReactionSpec tabulated(TabulatedRate t, double p_m = 1.0) {
        ReactionSpec s;
        s.family = Family::CustomTabulated;
        s.table = std::move(t);
        s.p_m = p_m;
        return s;
    }

    /// sup_y R(y, 0) over the whole trait interval. For the affine growth
    /// profile the supremum sits at an endpoint of [0,1].
    double sup_rate() const {
        switch (family) {
            case Family::LinearInhibition: return std::max(g0, g0 + g1);
            case Family::None: return 0.0;
            case Family::CustomTabulated: {
                double m = 0.0;
                for (const auto& row : table.values) m = std::max(m, row.front());
                return m;
            }
        }
        return 0.0;
    }

    /// rho_M = p_M^(1/gamma), the density at homeostatic pressure.
    double rho_max(double gamma) const { return std::pow(p_m, 1.0 / gamma); }
};

/// R(y, p). For tabulated rates y must coincide with one of the table's
/// trait nodes.
inline double reaction_rate(double y, double p, const ReactionSpec& spec) {
    if (p < 0.0) throw ParameterError("reaction rate evaluated at negative pressure");
    switch (spec.family) {
        case ReactionSpec::Family::LinearInhibition:
            return (spec.g0 + spec.g1 * y) * (1.0 - p / spec.p_m);
        case ReactionSpec::Family::None:
            return 0.0;
        case ReactionSpec::Family::CustomTabulated: {
            const auto& nodes = spec.table.y_nodes;
            for (std::size_t j = 0; j < nodes.size(); ++j)
                if (std::abs(nodes[j] - y) <= 1e-12)
                    return spec.table.eval(static_cast<int>(j), p);
            throw ParameterError("trait value is not a node of the tabulated rate");
        }
    }
    return 0.0;
}

/// One assumption violation found by validate_reaction.
struct ReactionViolation {
    std::string condition;  // which condition failed
    double y = 0.0;
    double p = 0.0;
    double value = 0.0;
};

struct ReactionReport {
    bool pass = false;
    double sup_rate = 0.0;  // ||R||_inf = sup_y R(y,0)
    std::vector<ReactionViolation> violations;

    std::string summary() const {
        if (pass) return "reaction assumptions satisfied";
        std::ostringstream os;
        os << violations.size() << " violation(s):";
        for (const auto& v : violations)
            os << " [" << v.condition << " at y=" << v.y << ", p=" << v.p
               << ", R=" << v.value << "]";
        return os.str();
    }
};

/// Checks the three growth-assumption conditions on a sampling lattice:
/// R(y,0) > 0, R(y,p_M) <= 0, and p -> R(y,p) nonincreasing, at every
/// trait node and >= 64 pressure samples in [0, p_M].
inline ReactionReport validate_reaction(const ReactionSpec& spec, const PhenotypeMesh& mesh,
                                        int p_samples = 64) {
    ReactionReport report;
    p_samples = std::max(p_samples, 64);
    if (spec.family == ReactionSpec::Family::LinearInhibition) {
        // the affine profile attains its extrema at the trait endpoints,
        // which the node lattice never contains
        if (!(spec.g0 > 0.0))
            report.violations.push_back({"R(y,0) > 0", 0.0, 0.0, spec.g0});
        if (!(spec.g0 + spec.g1 > 0.0))
            report.violations.push_back({"R(y,0) > 0", 1.0, 0.0, spec.g0 + spec.g1});
        if (!(spec.p_m > 0.0)) {
            report.violations.push_back({"p_M > 0", 0.0, spec.p_m, spec.p_m});
            return report;  // the rate cannot even be sampled
        }
    }
    for (int j = 0; j < mesh.size(); ++j) {
        const double y = mesh.node(j);
        const double at_zero = reaction_rate(y, 0.0, spec);
        report.sup_rate = std::max(report.sup_rate, at_zero);
        if (!(at_zero > 0.0))
            report.violations.push_back({"R(y,0) > 0", y, 0.0, at_zero});
        const double at_pm = reaction_rate(y, spec.p_m, spec);
        if (!(at_pm <= 0.0))
            report.violations.push_back({"R(y,p_M) <= 0", y, spec.p_m, at_pm});
        double prev = at_zero;
        for (int k = 1; k < p_samples; ++k) {
            const double p = spec.p_m * k / (p_samples - 1);
            const double r = reaction_rate(y, p, spec);
            if (r > prev + 1e-14 * std::abs(prev))
                report.violations.push_back({"R nonincreasing in p", y, p, r});
            prev = r;
        }
    }
    report.pass = report.violations.empty();
    return report;
}

/// Mean growth rate across the trait distribution:
/// cal_R(x) = sum_j w_j sigma_j(x) R(y_j, p(x)).
inline ScalarField mean_reaction(const FractionField& sigma, const ScalarField& p,
                                 const PhenotypeMesh& mesh, const SpatialGrid& grid,
                                 const ReactionSpec& spec) {
    if (sigma.layer_count() != mesh.size())
        throw DimensionError("fraction field layer count does not match phenotype mesh");
    ScalarField out(grid);
    for (int j = 0; j < mesh.size(); ++j) {
        const double y = mesh.node(j);
        const double w = mesh.weight(j);
        for (int jy = 0; jy < grid.ny(); ++jy)
            for (int i = 0; i < grid.nx(); ++i)
                out(i, jy) += w * sigma.layer(j)(i, jy) * reaction_rate(y, p(i, jy), spec);
    }
    return out;
}

/// Mutation kernel R(eta, y, p) tabulated on trait-node pairs with
/// pressure samples, linear in p (clamped outside the range).
struct MutationKernel {
    std::vector<double> p_samples;                          // strictly increasing
    std::vector<std::vector<std::vector<double>>> values;   // values[eta][y][p]

    int trait_count() const { return static_cast<int>(values.size()); }

    double eval(int eta, int y, double p) const {
        const auto& row = values[eta][y];
        if (p <= p_samples.front()) return row.front();
        if (p >= p_samples.back()) return row.back();
        auto it = std::upper_bound(p_samples.begin(), p_samples.end(), p);
        const std::size_t k = static_cast<std::size_t>(it - p_samples.begin()) - 1;
        const double t = (p - p_samples[k]) / (p_samples[k + 1] - p_samples[k]);
        return row[k] + t * (row[k + 1] - row[k]);
    }

    /// sup over (eta, y) of R(eta, y, 0).
    double sup_rate() const {
        double m = 0.0;
        for (const auto& plane : values)
            for (const auto& row : plane) m = std::max(m, row.front());
        return m;
    }

    /// Monotone nonincreasing in p for every trait pair, all entries finite.
    bool well_formed() const {
        for (const auto& plane : values)
            for (const auto& row : plane) {
                for (std::size_t k = 0; k < row.size(); ++k) {
                    if (!std::isfinite(row[k])) return false;
                    if (k > 0 && row[k] > row[k - 1] + 1e-14 * std::abs(row[k - 1]))
                        return false;
                }
            }
        return true;
    }
};

/// Cross-trait reaction out(y_j, x) = sum_k w_k n(eta_k, x) R(eta_k, y_j, p(x)).
/// Replaces the diagonal reaction when mutation mode is enabled.
inline PopulationField mutation_reaction(const PopulationField& n, const ScalarField& p,
                                         const MutationKernel& kernel, const PhenotypeMesh& mesh,
                                         const SpatialGrid& grid) {
    if (kernel.trait_count() != mesh.size())
        throw DimensionError("mutation kernel trait count does not match phenotype mesh");
    if (n.layer_count() != mesh.size())
        throw DimensionError("population field layer count does not match phenotype mesh");
    PopulationField out(grid, mesh);
    for (int jy = 0; jy < grid.ny(); ++jy)
        for (int i = 0; i < grid.nx(); ++i) {
            const double pv = p(i, jy);
            for (int j = 0; j < mesh.size(); ++j) {
                double acc = 0.0;
                for (int k = 0; k < mesh.size(); ++k)
                    acc += mesh.weight(k) * n.layer(k)(i, jy) * kernel.eval(k, j, pv);
                out.layer(j)(i, jy) = acc;
            }
        }
    return out;
}

/// Adds the viscosity lift eps * exp(-|x|^2) to every trait layer.
/// The lift is truncated at the ghost boundary, so data remain Dirichlet
/// compatible; the truncation error is below eps * exp(-|x_max|^2).
inline PopulationField lift_initial_data(const PopulationField& n0, double eps,
                                         const SpatialGrid& grid, const PhenotypeMesh& mesh) {
    if (eps < 0.0) throw ParameterError("lift requires eps >= 0");
    PopulationField out = n0;
    if (eps == 0.0) return out;
    for (int j = 0; j < out.layer_count(); ++j)
        for (int jy = 0; jy < grid.ny(); ++jy)
            for (int i = 0; i < grid.nx(); ++i)
                out.layer(j)(i, jy) += eps * std::exp(-grid.center_radius_sq(i, jy));
    return out;
}

/// Well-preparedness report for initial data: density below rho_M,
/// bounded initial fractions, finite second moment.
struct WellPreparedReport {
    bool pass = false;
    bool density_at_bound = false;  // sup rho0 == rho_M within roundoff
    double sup_rho = 0.0;
    double sup_sigma = 0.0;
    double second_moment = 0.0;
    std::vector<std::pair<int, int>> violations;  // cells where rho0 > rho_M

    std::string summary() const {
        std::ostringstream os;
        os << (pass ? "well-prepared" : "NOT well-prepared") << ": sup rho0 = " << sup_rho
           << ", sup sigma0 = " << sup_sigma << ", second moment = " << second_moment;
        if (!violations.empty())
            os << "; rho0 exceeds rho_M at " << violations.size()
               << " cell(s), first at index (" << violations.front().first << ","
               << violations.front().second << ")";
        return os.str();
    }
};

inline WellPreparedReport check_well_prepared(const PopulationField& n0,
                                              const PhenotypeMesh& mesh, const SpatialGrid& grid,
                                              const ReactionSpec& spec, double gamma) {
    WellPreparedReport rep;
    const double rho_m = spec.rho_max(gamma);
    const ScalarField rho = total_density(n0, mesh, grid);
    const FractionField sigma =
        fraction_densities(n0, rho, mesh, grid, kSigmaFloorRel * rho_m);
    const double hv = grid.cell_volume();
    for (int jy = 0; jy < grid.ny(); ++jy)
        for (int i = 0; i < grid.nx(); ++i) {
            const double r = rho(i, jy);
            rep.sup_rho = std::max(rep.sup_rho, r);
            rep.second_moment += hv * r * grid.center_radius_sq(i, jy);
            if (r > rho_m * (1.0 + 1e-12)) rep.violations.push_back({i, jy});
            for (int j = 0; j < mesh.size(); ++j)
                rep.sup_sigma = std::max(rep.sup_sigma, sigma.layer(j)(i, jy));
        }
    rep.density_at_bound = std::abs(rep.sup_rho - rho_m) <= 1e-12 * rho_m;
    rep.pass = rep.violations.empty() && std::isfinite(rep.second_moment) &&
               std::isfinite(rep.sup_sigma);
    return rep;
}

}  // namespace phenoflow

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "phenoflow/errors.hpp"
#include "phenoflow/grid.hpp"

namespace phenoflow {

/// Cell-centered scalar field with one ghost layer per side. Ghost cells
/// are kept at zero (homogeneous Dirichlet) unless written explicitly.
/// Interior indices run 0..nx-1 (and 0..ny-1 in 2D); ghosts live at -1
/// and nx (ny).
class ScalarField {
public:
    ScalarField() = default;

    explicit ScalarField(const SpatialGrid& grid, double fill = 0.0)
        : nx_(grid.nx()), ny_(grid.ny()), dim_(grid.dim()),
          data_(static_cast<std::size_t>(nx_ + 2) * (ny_ + 2), 0.0) {
        if (fill != 0.0) {
            for (int j = 0; j < ny_; ++j)
                for (int i = 0; i < nx_; ++i) (*this)(i, j) = fill;
        }
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int dim() const { return dim_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int i, int j = 0) {
        return data_[static_cast<std::size_t>(j + 1) * (nx_ + 2) + (i + 1)];
    }
    double operator()(int i, int j = 0) const {
        return data_[static_cast<std::size_t>(j + 1) * (nx_ + 2) + (i + 1)];
    }

    bool same_shape(const ScalarField& other) const {
        return nx_ == other.nx_ && ny_ == other.ny_ && dim_ == other.dim_;
    }

    bool matches(const SpatialGrid& grid) const {
        return nx_ == grid.nx() && ny_ == grid.ny() && dim_ == grid.dim();
    }

    /// Maximum over interior cells (0 for an all-zero field).
    double max_interior() const {
        double m = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i) m = std::max(m, (*this)(i, j));
        return m;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    int nx_ = 0, ny_ = 0, dim_ = 0;
    std::vector<double> data_;
};

/// Phenotype-structured density n(y_j, x_i): one scalar layer per trait
/// node. Layers share the spatial grid.
class PopulationField {
public:
    PopulationField() = default;

    PopulationField(const SpatialGrid& grid, const PhenotypeMesh& mesh)
        : layers_(mesh.size(), ScalarField(grid)) {}

    int layer_count() const { return static_cast<int>(layers_.size()); }
    ScalarField& layer(int j) { return layers_[j]; }
    const ScalarField& layer(int j) const { return layers_[j]; }

    bool all_finite() const {
        for (const auto& l : layers_)
            if (!l.all_finite()) return false;
        return true;
    }

private:
    std::vector<ScalarField> layers_;
};

/// Trait fractions sigma = n/rho with the zero convention where rho
/// vanishes. Same layered layout as PopulationField.
class FractionField {
public:
    FractionField() = default;

    FractionField(const SpatialGrid& grid, const PhenotypeMesh& mesh)
        : layers_(mesh.size(), ScalarField(grid)) {}

    int layer_count() const { return static_cast<int>(layers_.size()); }
    ScalarField& layer(int j) { return layers_[j]; }
    const ScalarField& layer(int j) const { return layers_[j]; }

private:
    std::vector<ScalarField> layers_;
};

/// Relative floor under which a cell counts as vacuum for the sigma zero
/// convention; scaled by rho_M = p_M^(1/gamma) at the call site.
inline constexpr double kSigmaFloorRel = 1e-14;

/// Total density rho(x) = sum_j w_j n(y_j, x). Fixed left-to-right
/// summation over trait layers for bit reproducibility.
inline ScalarField total_density(const PopulationField& n, const PhenotypeMesh& mesh,
                                 const SpatialGrid& grid) {
    if (n.layer_count() != mesh.size())
        throw DimensionError("population field layer count does not match phenotype mesh");
    ScalarField rho(grid);
    for (int j = 0; j < n.layer_count(); ++j) {
        if (!n.layer(j).matches(grid))
            throw DimensionError("population layer shape does not match grid");
        const double w = mesh.weight(j);
        for (int jy = 0; jy < grid.ny(); ++jy)
            for (int i = 0; i < grid.nx(); ++i) rho(i, jy) += w * n.layer(j)(i, jy);
    }
    return rho;
}

/// Pressure law p = rho^gamma. gamma = 1 is accepted as the linear edge
/// case; anything below is rejected.
inline ScalarField pressure(const ScalarField& rho, double gamma) {
    if (!(gamma >= 1.0)) throw ParameterError("pressure law requires gamma >= 1");
    ScalarField p = rho;
    for (int j = 0; j < rho.ny(); ++j)
        for (int i = 0; i < rho.nx(); ++i) p(i, j) = std::pow(rho(i, j), gamma);
    return p;
}

/// v = rho^(gamma+1); pointwise equal to rho * p up to roundoff.
inline ScalarField v_field(const ScalarField& rho, double gamma) {
    if (!(gamma >= 1.0)) throw ParameterError("v field requires gamma >= 1");
    ScalarField v = rho;
    for (int j = 0; j < rho.ny(); ++j)
        for (int i = 0; i < rho.nx(); ++i) v(i, j) = std::pow(rho(i, j), gamma + 1.0);
    return v;
}

/// sigma = n/rho where rho exceeds the floor, zero elsewhere.
inline FractionField fraction_densities(const PopulationField& n, const ScalarField& rho,
                                        const PhenotypeMesh& mesh, const SpatialGrid& grid,
                                        double rho_floor = kSigmaFloorRel) {
    if (n.layer_count() != mesh.size())
        throw DimensionError("population field layer count does not match phenotype mesh");
    FractionField sigma(grid, mesh);
    for (int j = 0; j < n.layer_count(); ++j) {
        for (int jy = 0; jy < grid.ny(); ++jy)
            for (int i = 0; i < grid.nx(); ++i) {
                const double r = rho(i, jy);
                sigma.layer(j)(i, jy) = r > rho_floor ? n.layer(j)(i, jy) / r : 0.0;
            }
    }
    return sigma;
}

}  // namespace phenoflow

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "phenoflow/errors.hpp"

namespace phenoflow {

/// Uniform cell-centered mesh in 1 or 2 space dimensions with one ghost
/// cell per side. Ghost cells hold the homogeneous Dirichlet value (zero);
/// interior cells have centers x_i = x_min + (i + 1/2) h.
///
/// In 2D the spacing must be identical on both axes, so every stencil
/// carries a single h.
class SpatialGrid {
public:
    SpatialGrid(double x_min, double x_max, int cells)
        : dim_(1), min_{x_min, 0.0}, max_{x_max, 0.0}, cells_{cells, 1} {
        validate();
    }

    SpatialGrid(std::array<double, 2> min, std::array<double, 2> max,
                std::array<int, 2> cells)
        : dim_(2), min_(min), max_(max), cells_(cells) {
        validate();
    }

    int dim() const { return dim_; }
    double spacing() const { return spacing_; }
    double cell_volume() const { return dim_ == 1 ? spacing_ : spacing_ * spacing_; }

    int nx() const { return cells_[0]; }
    int ny() const { return cells_[1]; }  // 1 when dim() == 1
    int cells(int axis) const { return cells_[axis]; }
    double axis_min(int axis) const { return min_[axis]; }
    double axis_max(int axis) const { return max_[axis]; }

    /// Center coordinate of interior cell index i (0-based) along an axis.
    double center(int axis, int i) const {
        return min_[axis] + (i + 0.5) * spacing_;
    }

    /// Squared distance of a cell center from the origin.
    double center_radius_sq(int i, int j = 0) const {
        const double x = center(0, i);
        if (dim_ == 1) return x * x;
        const double y = center(1, j);
        return x * x + y * y;
    }

    long interior_cells() const {
        return static_cast<long>(cells_[0]) * cells_[1];
    }

private:
    void validate() {
        for (int a = 0; a < dim_; ++a) {
            if (cells_[a] < 4) throw ParameterError("grid needs at least 4 cells per axis");
            if (!(max_[a] > min_[a])) throw ParameterError("grid extent must be positive");
        }
        spacing_ = (max_[0] - min_[0]) / cells_[0];
        if (dim_ == 2) {
            const double hy = (max_[1] - min_[1]) / cells_[1];
            if (std::abs(hy - spacing_) > 1e-12 * spacing_)
                throw ParameterError("2D grid requires equal spacing on both axes");
        }
    }

    int dim_;
    std::array<double, 2> min_, max_;
    std::array<int, 2> cells_;
    double spacing_ = 0.0;
};

/// Midpoint quadrature on the trait interval [0,1]: nodes y_j = (j+1/2)/N,
/// equal weights 1/N. The weights sum to one exactly, which keeps the
/// trait integral of a constant exact.
class PhenotypeMesh {
public:
    explicit PhenotypeMesh(int nodes) : count_(nodes) {
        if (nodes < 1) throw ParameterError("phenotype mesh needs at least one node");
    }

    int size() const { return count_; }
    double node(int j) const { return (j + 0.5) / count_; }
    double weight(int) const { return 1.0 / count_; }

    std::vector<double> nodes() const {
        std::vector<double> v(count_);
        for (int j = 0; j < count_; ++j) v[j] = node(j);
        return v;
    }

private:
    int count_;
};

}  // namespace phenoflow

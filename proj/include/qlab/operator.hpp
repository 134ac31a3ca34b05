#pragma once

#include "qlab/field.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <vector>

namespace qlab::op {

using field::cplx;
using field::Grid2D;
using field::GridFunction;
using field::MetricField;
using field::PotentialField;
using field::Vec2;

enum class Backend { finite_difference, spectral };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& name);

/// P = -h^2 Delta_g + V on a periodic box.
///
/// The finite-difference backend discretizes the quadratic form
///   sum_faces a^{ii} (du)^2 + sum_corners 2 a^{12} D1u D2u,  a^{ij} = g^{ij} sqrt(gbar),
/// so the stiffness matrix L is symmetric and P = h^2 W^{-1} L + V with
/// W = diag(sqrt(gbar)). P is therefore symmetric in the sqrt(gbar)-weighted
/// inner product, and S = W^{1/2} P W^{-1/2} is symmetric in the flat one.
/// The spectral backend requires a constant metric.
class SemiclassicalOperator {
public:
    static SemiclassicalOperator assemble(double h, MetricField metric, PotentialField potential, Grid2D grid,
                                          Backend backend);

    double h() const { return h_; }
    const Grid2D& grid() const { return grid_; }
    Backend backend() const { return backend_; }
    const MetricField& metric() const { return metric_; }
    const PotentialField& potential() const { return potential_; }
    std::size_t dimension() const { return grid_.size(); }

    GridFunction apply(const GridFunction& u) const;

    /// Y = S X for a block of real column vectors.
    void apply_symmetric(const Eigen::MatrixXd& x, Eigen::MatrixXd& y) const;
    /// sqrt(gbar) at every grid point, row-major like GridFunction.
    const Eigen::VectorXd& volume_weight() const { return weight_; }
    const Eigen::VectorXd& potential_samples() const { return v_; }
    /// Upper bound on the spectral radius of S.
    double norm_upper_bound() const;
    /// Finite-difference S as a sparse matrix; equal to S for that backend.
    Eigen::SparseMatrix<double> sparse_model() const;
    /// S as a dense matrix (small grids only).
    Eigen::MatrixXd dense_symmetric() const;

private:
    SemiclassicalOperator(double h, MetricField metric, PotentialField potential, Grid2D grid, Backend backend);
    void apply_real(const double* in, double* out) const;

    double h_;
    MetricField metric_;
    PotentialField potential_;
    Grid2D grid_;
    Backend backend_;
    Eigen::VectorXd v_;
    Eigen::VectorXd weight_;
    Eigen::VectorXd inv_sqrt_weight_;
    Eigen::SparseMatrix<double, Eigen::RowMajor> stiffness_;  // L
    std::vector<double> symbol_;                               // h^2 xi.G.xi, spectral only
};

struct Residual {
    double res_l2;
    double u_l2;
};

/// ||P u|| and ||u||; u is a weak quasimode when res_l2 <= h and u_l2 <= 1.
Residual residual(const SemiclassicalOperator& p, const GridFunction& u);

/// Multiplier a(hD): the symbol is evaluated at (h xi_1, h xi_2).
struct FourierMultiplier {
    std::function<cplx(const Vec2&)> symbol;
    double h;
};

GridFunction fourier_multiplier(const FourierMultiplier& m, const GridFunction& u);

/// Symbol eta_1 * eta_2, i.e. the multiplier h^2 xi_1 xi_2 = -h^2 d1 d2.
FourierMultiplier hyperbolic_multiplier(double h);
/// Radial cutoff equal to 1 for |eta| <= inner, 0 for |eta| >= outer, smooth between.
FourierMultiplier radial_cutoff(double h, double inner = 4.0, double outer = 8.0);

/// sup |u - chi(hD) u| over the grid samples.
double cutoff_defect(const GridFunction& u, const FourierMultiplier& chi);

}  // namespace qlab::op

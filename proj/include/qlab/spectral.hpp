#pragma once

#include "qlab/field.hpp"
#include "qlab/operator.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace qlab::spectral {

using field::cplx;
using field::GridFunction;
using op::SemiclassicalOperator;

struct EigenPair {
    double energy;
    /// Unit norm in the sqrt(gbar)-weighted L^2 inner product.
    GridFunction function;
    /// ||P w - E w|| in that same norm.
    double residual;
};

struct EigensolveOptions {
    std::size_t max_count = 64;
    /// Extra block columns beyond max_count; 0 picks max(4, max_count / 4).
    std::size_t guard = 0;
    double tolerance = 1e-9;
    int max_iterations = 4000;
    std::uint64_t seed = 0x5eed;
    /// Relative slack on the window edge so eigenvalues sitting exactly on it are kept.
    double window_slack = 1e-9;
};

/// All eigenpairs of P with |E| <= half_width.
///
/// Folded solve: LOBPCG for the lowest eigenpairs of S^2 (S the symmetrized
/// operator), preconditioned with (M^2 + w^2)^{-1} for M the sparse
/// finite-difference model of S and w the half width, then Rayleigh-Ritz with S
/// on the converged subspace to recover signed eigenvalues. Degenerate eigenvalues come back as an orthonormal basis
/// of the eigenspace, in no canonical order.
///
/// Throws NonConvergence at the iteration cap and TooManyEigenvalues when the
/// window holds more than opts.max_count eigenvalues.
std::vector<EigenPair> interior_eigenpairs(const SemiclassicalOperator& p, double half_width,
                                           const EigensolveOptions& opts = {});

/// Stochastic (Hutchinson + Jackson-damped Chebyshev) estimate of the number of
/// eigenvalues of P in [lo, hi].
double estimate_eigenvalue_count(const SemiclassicalOperator& p, double lo, double hi, int degree = 400,
                                 int probes = 12, std::uint64_t seed = 0x5eed);

struct SpectralCluster {
    double h;
    double width_constant;
    std::vector<double> eigenvalues;
    std::vector<GridFunction> eigenfunctions;
    std::vector<cplx> coefficients;
};

struct ClusterBuild {
    SpectralCluster cluster;
    GridFunction w;
};

/// w = sum_j c_j w_j. Requires sum |c_j|^2 <= 1 and |E_j| <= C h.
ClusterBuild build_cluster(double h, double width_constant, const std::vector<EigenPair>& pairs,
                           const std::vector<cplx>& coefficients);

/// Unit coefficients that make the cluster real and maximal at grid index (i1, i2):
/// c_j = conj(w_j(x)) / sqrt(sum_k |w_k(x)|^2).
std::vector<cplx> coherent_coefficients(const std::vector<EigenPair>& pairs, std::size_t i1, std::size_t i2);

/// Grid index maximizing the spectral function sum_j |w_j(x)|^2.
std::pair<std::size_t, std::size_t> spectral_function_peak(const std::vector<EigenPair>& pairs);

using LatticeMode = std::pair<long, long>;

/// Lattice points k with |h^2 |k|^2 - 1| <= C h, in lexicographic order.
std::vector<LatticeMode> torus_annulus_modes(double h, double width_constant);

struct TorusCluster {
    double h;
    double width_constant;
    std::vector<LatticeMode> modes;
    /// Samples on [-pi, pi)^2. When `aliased_sampling` is set the grid is below
    /// Nyquist: the samples are still exact point values but l2_norm(w) is not
    /// the L^2 norm, so use the fields below.
    GridFunction w;
    bool aliased_sampling;
    double l2_norm;      // from the coefficients (Parseval)
    double residual_l2;  // ||(-h^2 Delta - 1) w|| from the coefficients
};

/// Equal-weight, equal-phase combination of the modes e^{ik.x}/(2 pi) of the
/// flat torus cluster for V = -1. Throws PreconditionError when empty.
TorusCluster coherent_torus_cluster(double h, double width_constant, std::size_t max_points = 2048);

}  // namespace qlab::spectral

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qlab::sweep {

/// One experiment at one value of h.
struct ScalingRecord {
    double h = 0.0;
    double l2_norm = 0.0;
    double sup_norm = 0.0;
    double residual_l2 = 0.0;
    /// Named extras (cluster_dim, origin_value, ...); sorted by name.
    std::map<std::string, double> extra;
    /// residual_l2 <= C h; uncertified records never enter a fit.
    bool certified = false;
    /// Set when the builder threw; the numeric fields are then meaningless.
    std::optional<std::string> failure;
};

struct Fit {
    double slope;
    double stderr_slope;
    double intercept;
    double t_statistic;  // slope / stderr (infinite for an exact fit)
    double p_value;      // two-sided, Student t with n - 2 degrees of freedom
    std::size_t points;
};

/// OLS of y on x. Throws PreconditionError for fewer than 3 points or a degenerate design.
Fit ordinary_least_squares(const std::vector<double>& x, const std::vector<double>& y);

/// Slope of log sup_norm against log h. Requires >= 5 records with positive sup_norm.
Fit fit_exponent(const std::vector<ScalingRecord>& records);

/// Slope of (sup_norm h^{1/2})^2 against ln(1/h). Requires >= 5 records.
Fit test_log_factor(const std::vector<ScalingRecord>& records);

struct ScalingReport {
    std::string experiment;
    std::vector<ScalingRecord> records;  // in the order of the h list
    /// Fits over certified records; empty with fewer than five of them.
    std::optional<Fit> exponent;
    std::optional<Fit> log_factor;
    /// Slope of log(sup h^{1/2}) against log(|log h|^{1/2}).
    std::optional<Fit> log_exponent;
    /// "log-corrected" (log-factor slope > 0 with p < 0.01), "pure-power", or "undetermined".
    std::string verdict;
    std::size_t uncertified = 0;
    std::size_t failures = 0;
};

struct SweepConfig {
    /// Cluster width C, also the certificate constant (residual <= C h).
    double cluster_width = 1.0;
    /// Grid points per side: the harmonic eigensolve grid, the torus sampling cap.
    std::size_t grid = 0;  // 0 picks 256 (harmonic) or 4096 (torus)
    /// Multiplies the Fourier truncation of the separable experiments.
    double resolution = 1.0;
    std::size_t workers = 1;
};

/// Scale applied to the counterexample so that it is a weak quasimode for k >= 2:
/// ||kappa u_h|| <= 1 and ||kappa (h^2 d1 d2 +- x1 x2) u_h|| <= h.
inline constexpr double kCounterexampleScale = 1.0 / 72.0;

std::vector<std::string> experiment_names();
bool is_experiment(const std::string& name);

/// Dyadic h values 2^-k for k = k_min..k_max.
std::vector<double> dyadic_h(int k_min, int k_max);

/// Requires a known experiment and h strictly decreasing with every h <= 1/4.
/// Builder failures are recorded per h instead of thrown.
ScalingReport run_sweep(const std::string& experiment, const std::vector<double>& h_values,
                        const SweepConfig& config = {});

/// Builds and certifies a single record (no fitting); throws on builder failure.
ScalingRecord build_record(const std::string& experiment, double h, const SweepConfig& config = {});

/// Periodic potential a + b cos(x) + c sin(x) along one axis.
struct Trig1D {
    double a = 0.0, b = 0.0, c = 0.0;
};

/// Coherent spectral cluster of -h^2 Delta + v1(x1) + v2(x2) on the torus [-pi, pi)^2.
/// Each factor is diagonalized in a truncated Fourier basis (|k| <= K, K ~ 2 resolution / h);
/// the cluster is every product with |e_a + e_b| <= C h, combined with the
/// coefficients that maximize the value at the peak of the spectral function.
/// sup_norm is that peak value over a grid of at least 2(2K+1) points per side,
/// l2_norm and residual_l2 follow from orthonormality. Certified when residual_l2 <= C h.
ScalingRecord separable_cluster(double h, const Trig1D& v1, const Trig1D& v2, double width_constant,
                                double resolution = 1.0);

}  // namespace qlab::sweep

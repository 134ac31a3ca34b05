#pragma once

#include "qlab/field.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace qlab::rescale {

using field::Grid2D;
using field::GridFunction;
using field::Mat2;
using field::MetricField;
using field::PotentialField;
using field::Vec2;

struct NormalizationReport {
    bool cond1_ok;
    double cond1_deviation;  // max |g^{ij}(0) - delta^{ij}|
    /// sup over |x| < 2 of |V| + |dV|.
    double cond2_first;
    /// sup over |x| < 2 of |d^2 V| + sum_{ij} |d g^{ij}| (operator norm, Euclidean gradients).
    double cond2_second;
    bool cond2_ok;
    /// C_N for N = 0..8; empty entries where the fields lack partials of that order.
    std::vector<std::optional<double>> cond3_constants;
    /// Largest c found for which (cV(cx), g(cx)) passes cond2; set only when cond2 fails.
    std::optional<double> suggested_c;

    bool ok() const { return cond1_ok && cond2_ok; }
};

/// Samples B* = {|x| < 2} with spacing `spacing` (cond1, cond2) and
/// `derivative_spacing` (C_N, which needs many partials per point).
NormalizationReport verify_normalization(const MetricField& metric, const PotentialField& potential,
                                         double spacing = 0.01, double derivative_spacing = 0.04);

/// V(x) -> a V(s Q x) + b with exact derivatives; partials only for Q = I.
PotentialField transform_potential(const PotentialField& v, double a, double s, const Mat2& q, double b);
/// g^{ij}(x) -> Q^T g^{ij}(s Q x) Q with exact first derivatives; partials only for Q = I.
MetricField transform_metric(const MetricField& g, double s, const Mat2& q);

struct Normalized {
    MetricField metric;
    PotentialField potential;
    /// The equation for u(cx) has semiclassical parameter h * h_multiplier.
    double h_multiplier;
};

/// V'(x) = c V(cx), g'(x) = g(cx). Requires 0 < c <= 1.
Normalized rescale_to_normalization(const MetricField& metric, const PotentialField& potential, double c);

enum class ResampleMethod { trigonometric, padded_cubic };

const char* to_string(ResampleMethod m);

/// u'(x) = s u(s Q x) on `target`. Axis-aligned maps evaluate the trigonometric
/// interpolant exactly; rotations zero-pad by 4 and interpolate with cubics
/// (error O(spacing^4)). Throws PreconditionError if a target point maps
/// outside the source box.
GridFunction scale_function(const GridFunction& u, double s, const Mat2& q, const Grid2D& target,
                            ResampleMethod* used = nullptr);

struct Rescaled {
    GridFunction u;
    MetricField metric;
    PotentialField potential;
    double h;
    /// Residual on |x| < 2 after the map equals factor times the residual before,
    /// on the preimage disk.
    double factor;
    ResampleMethod method;
};

/// u'(x) = h^{1/2} u(h^{1/2} x), g' = g(h^{1/2} x), V' = 0, h' = 1.
/// ||Delta_{g'} u'||_{L^2(|x|<2)} = h ||Delta_g u||_{L^2(|x|<2h^{1/2})}; factor = h.
/// Default target: same point count on [-L h^{-1/2}, L h^{-1/2}]^2.
Rescaled lemma3_rescale(const GridFunction& u, const MetricField& metric, double h,
                        std::optional<Grid2D> target = std::nullopt);

/// u' = c^{1/2} u(c^{1/2} x), g' = g(c^{1/2} x), V' = V(c^{1/2} x) / c, h' = h / c; factor = 1/c.
/// Throws PreconditionError unless h <= c <= 1.
Rescaled lemma4_rescale(const GridFunction& u, const MetricField& metric, const PotentialField& potential, double h,
                        double c, std::optional<Grid2D> target = std::nullopt);

struct Case2Result {
    Rescaled rescaled;
    double beta;            // |dV(0)| after the optional division by 4
    double constant_shift;  // V(0), subtracted before rotating
    bool divided_by_four;   // V replaced by V / 4 with h unchanged
    Mat2 rotation;          // Q with Q^T dV(0) = (|dV(0)|, 0)
};

/// Subtract V(0), rotate dV(0) onto e1, divide V by 4 if |dV(0)| > 1/2, then
/// u' = beta u(beta Q x), g' = Q^T g(beta Q x) Q, V' = V(beta Q x) / beta^2,
/// h' = h / beta^2; factor = beta^{-2}. Requires |V(0)| <= h and
/// 8 h^{1/2} <= |dV(0)| <= 2. The default target is the largest box whose
/// rotated preimage stays inside the source box.
Case2Result case2_rescale(const GridFunction& u, const MetricField& metric, const PotentialField& potential, double h,
                          std::optional<Grid2D> target = std::nullopt);

// ---------------------------------------------------------------------------
// Case classification
// ---------------------------------------------------------------------------

/// The four case conditions at a point with |V| = v, |dV| = b, ties resolved
/// toward the lower case:
///   1: v <= h, b <= 8 h^{1/2}     2: v <= h, b > 8 h^{1/2}
///   3: v > h,  b <= 9 v^{1/2}     4: v > h,  b > 9 v^{1/2}
std::array<bool, 4> case_conditions(double v, double b, double h);

struct CaseDecision {
    int case_id;
    Vec2 center;       // the classified point
    double radius;     // ball about `center` on which the sup bound holds
    Vec2 translation;  // Case 4: zero of V used for Case 2; otherwise the center
    double beta_or_c;  // |dV| (cases 1, 2, 4) or |V| (case 3)
};

/// Radii: Case 1 h^{1/2}; Case 2 |dV|; Case 3 |V|^{1/2} / 40; Case 4 0.9998 |dV|
/// after a Newton search along dV for a zero within |V|^{1/2} / 8 (throws
/// PreconditionError when none is found). Requires h <= 1/4 and |x0| < 1.
CaseDecision classify_case(const PotentialField& potential, double h, const Vec2& x0);

struct Cover {
    std::vector<CaseDecision> balls;
    std::size_t sample_points;
    std::size_t uncovered;
    /// Sample points first covered by a ball of case 1..4.
    std::array<std::size_t, 4> points_by_case;
};

/// Greedy cover of the unit disk: classify every point of a samples x samples
/// grid in the disk, then visit points by decreasing radius (raster order on
/// ties) and add a ball for each point not yet covered. Throws
/// PreconditionError past max_balls.
Cover cover_ball(const PotentialField& potential, double h, std::size_t samples = 400,
                 std::size_t max_balls = 1000000);

/// Named potentials that satisfy cond2: zero, linear (0.6 x1),
/// quadratic-well (0.005 |x|^2 - 0.004), saddle (0.005 (x1^2 - x2^2)).
PotentialField builtin_potential(const std::string& name);
std::vector<std::string> builtin_potential_names();

}  // namespace qlab::rescale

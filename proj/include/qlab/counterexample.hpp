#pragma once

#include "qlab/field.hpp"

#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace qlab::counterexample {

using field::BumpProfile;
using field::cplx;
using field::Grid1D;
using field::GridFunction;

/// Which dyadic pieces enter u_h: 1 <= 2^j <= 1/h (full) or 1 <= 2^j <= h^{-1/2}.
enum class Cap { full, restricted };

const char* to_string(Cap cap);

/// floor(log2(1/h)), exact for dyadic h.
int dyadic_order(double h);
/// Number of pieces: floor(log2(1/h)) + 1, or floor(log2(1/h) / 2) + 1.
std::size_t piece_count(double h, Cap cap);
/// |log h| (natural log); the sum is normalized by its inverse square root.
double log_factor(double h);
/// |log h|^{-1/2} (floor(log2(1/h)) + 1) h^{-1/2}, the exact origin value of the full sum.
double expected_origin_value(double h);

/// L^2 quantities of a piece u_{h,j} or of the normalized sum u_h.
struct Measures {
    double origin_value = 0.0;
    double l2_norm = 0.0;
    double hyperbolic = 0.0;  // ||h^2 d1 d2 u||
    double x1x2 = 0.0;        // ||x1 x2 u||
    double x1sq = 0.0;        // ||x1^2 u||
    double kt_plus = 0.0;     // ||h^2 d1 d2 u + x1 x2 u||
    double kt_minus = 0.0;    // ||h^2 d1 d2 u - x1 x2 u||
    /// max over i != j of |<u_i, u_j>| / (||u_i|| ||u_j||); 0 for a single piece.
    double max_overlap = 0.0;
};

/// Frequency-side evaluation of the construction.
///
/// u_{h,j} = f_j(x1) g_j(x2) with f_j, g_j given by Riemann sums over the
/// lattice xi = m * dxi of e^{ix xi} h^{1/2} chi(2^j h xi) and e^{ix xi} psi(2^{-j} xi).
/// Every L^2 quantity is read off the frequency samples through Parseval
/// (x -> i d/dxi, d/dx -> i xi), so no spatial grid is needed and h can go
/// down to 2^-16 cheaply. Sums of profile samples are cached per step.
class SpectralQuadrature {
public:
    explicit SpectralQuadrature(BumpProfile profiles = {}, double frequency_step = 1.0 / 256.0);

    double frequency_step() const { return dxi_; }
    const BumpProfile& profiles() const { return profiles_; }

    Measures piece(double h, int j) const;
    Measures sum(double h, Cap cap) const;

    /// sum_{m} dxi |a(m dxi)|^2 style moments of one profile at sample step delta.
    struct Moments {
        double s0;   // delta sum p
        double n0;   // delta sum p^2
        double t2;   // delta sum t^2 p^2
        double d1;   // delta sum p'^2
        double d2;   // delta sum p''^2
        double tpp;  // delta sum t p p'
    };
    Moments chi_moments(double delta) const;
    Moments psi_moments(double delta) const;

private:
    struct Factor;
    Factor factor_f(double h, int j) const;
    Factor factor_g(int j) const;

    BumpProfile profiles_;
    double dxi_;
    mutable std::mutex mutex_;
    mutable std::map<double, Moments> chi_cache_;
    mutable std::map<double, Moments> psi_cache_;
};

/// The rectangle carrying the DFT of u_{h,j}.
struct FrequencyBox {
    double xi1_max;  // |xi1| <= 2^{-j} / h
    double xi2_lo;   // 2^j
    double xi2_hi;   // 2^{j+1}
};

FrequencyBox frequency_box(double h, int j);

/// u_{h,j} synthesized on a pair of 1D grids by inverse DFT of the frequency samples.
struct CounterexamplePiece {
    double h;
    int j;
    Grid1D axis1;
    Grid1D axis2;
    std::vector<cplx> f;  // on axis1
    std::vector<cplx> g;  // on axis2
    FrequencyBox box;

    cplx value_at_origin() const;
};

/// Throws NyquistViolation when the box does not fit in the band of an axis,
/// PreconditionError unless 1 <= 2^j <= 1/h.
CounterexamplePiece build_piece(double h, int j, const BumpProfile& profiles, const Grid1D& axis1,
                                const Grid1D& axis2);

/// Axes with dyadic frequency step that hold every piece of the capped sum.
/// The half width starts at pi / frequency_step and doubles until the tails of
/// all factors on the outer tenth of the box are below 1e-9 of their peak.
std::pair<Grid1D, Grid1D> tensor_axes(double h, Cap cap, const BumpProfile& profiles,
                                      double frequency_step = 1.0 / 256.0);

struct CounterexampleSum {
    double h;
    Cap cap;
    double normalization;  // |log h|^{-1/2}
    std::vector<CounterexamplePiece> pieces;
};

/// Requires h <= 1/4.
CounterexampleSum build_sum(double h, const BumpProfile& profiles, Cap cap);
CounterexampleSum build_sum(double h, const BumpProfile& profiles, Cap cap, const Grid1D& axis1,
                            const Grid1D& axis2);

/// Spatial measurement from the 1D factors; sums use full Gram matrices, so
/// cross terms are computed rather than assumed to vanish.
Measures measure(const CounterexamplePiece& piece);
Measures measure(const CounterexampleSum& sum);

/// max over both signs of ||h^2 d1 d2 u_h +- x1 x2 u_h||.
double kt_form_residual(const CounterexampleSum& sum);

/// u_h sampled on the square grid axis x axis (axes must coincide).
GridFunction assemble_2d(const CounterexampleSum& sum);

/// u_h restricted to the coordinate axes: (x, u_h(x, 0)) and (x, u_h(0, x)).
struct AxisProfiles {
    std::vector<double> x1, along_x1;
    std::vector<double> x2, along_x2;
};
AxisProfiles axis_profiles(const CounterexampleSum& sum, double window);

struct RestrictedReport {
    double h;
    std::size_t piece_count;
    std::size_t full_piece_count;
    double value_at_origin;
    double full_value_at_origin;
    double x1sq_over_h;
    double x1sq_over_h_full;
};

/// Restricted sum next to the full one, both from the frequency side. Requires h <= 1/4.
RestrictedReport verify_restricted_sum(double h, const SpectralQuadrature& quad);

}  // namespace qlab::counterexample

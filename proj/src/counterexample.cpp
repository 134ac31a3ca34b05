#include "qlab/counterexample.hpp"

#include "qlab/error.hpp"
#include "qlab/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qlab::counterexample {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

using Profile = double (BumpProfile::*)(double) const;

SpectralQuadrature::Moments moments_of(const BumpProfile& b, Profile p, Profile p1, Profile p2, field::Interval support,
                                       double delta) {
    const long first = static_cast<long>(std::ceil(support.lo / delta));
    const long last = static_cast<long>(std::floor(support.hi / delta));
    long double s0 = 0, n0 = 0, t2 = 0, d1 = 0, d2 = 0, tpp = 0;
    for (long m = first; m <= last; ++m) {
        const double t = static_cast<double>(m) * delta;
        const double v = (b.*p)(t);
        const double v1 = (b.*p1)(t);
        const double v2 = (b.*p2)(t);
        s0 += v;
        n0 += v * v;
        t2 += t * t * v * v;
        d1 += v1 * v1;
        d2 += v2 * v2;
        tpp += t * v * v1;
    }
    const long double d = delta;
    return {static_cast<double>(d * s0),  static_cast<double>(d * n0), static_cast<double>(d * t2),
            static_cast<double>(d * d1),  static_cast<double>(d * d2), static_cast<double>(d * tpp)};
}

void require_piece_index(double h, int j) {
    if (!(h > 0.0 && h <= 1.0)) throw PreconditionError("counterexample: h must lie in (0, 1]");
    if (j < 0 || std::ldexp(1.0, j) > 1.0 / h) throw PreconditionError("counterexample: need 1 <= 2^j <= 1/h");
}

void require_sum_h(double h) {
    if (!(h > 0.0 && h <= 0.25))
        throw PreconditionError("counterexample: the sum needs h <= 1/4 so that |log h| > 1");
}

}  // namespace

const char* to_string(Cap cap) { return cap == Cap::full ? "full" : "restricted"; }

int dyadic_order(double h) {
    if (!(h > 0.0 && h <= 1.0)) throw PreconditionError("dyadic_order: h must lie in (0, 1]");
    const double inv = 1.0 / h;
    int k = static_cast<int>(std::floor(std::log2(inv)));
    while (std::ldexp(1.0, k + 1) <= inv) ++k;
    while (k > 0 && std::ldexp(1.0, k) > inv) --k;
    return k;
}

std::size_t piece_count(double h, Cap cap) {
    const int k = dyadic_order(h);
    return static_cast<std::size_t>(cap == Cap::full ? k : k / 2) + 1;
}

double log_factor(double h) { return std::abs(std::log(h)); }

double expected_origin_value(double h) {
    return static_cast<double>(dyadic_order(h) + 1) / std::sqrt(log_factor(h) * h);
}

// ---------------------------------------------------------------------------
// Frequency-side route
// ---------------------------------------------------------------------------

/// Squared norms of one 1D factor, continuum normalization ||u||^2 = 2 pi int |a|^2.
struct SpectralQuadrature::Factor {
    double value0;  // factor at x = 0
    double n0;      // ||f||^2
    double nxi;     // ||f'||^2
    double nd1;     // ||x f||^2
    double nd2;     // ||x^2 f||^2
    double cross;   // <f', x f>
};

SpectralQuadrature::SpectralQuadrature(BumpProfile profiles, double frequency_step)
    : profiles_(std::move(profiles)), dxi_(frequency_step) {
    if (!(frequency_step > 0.0)) throw PreconditionError("SpectralQuadrature: frequency step must be positive");
}

SpectralQuadrature::Moments SpectralQuadrature::chi_moments(double delta) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = chi_cache_.find(delta); it != chi_cache_.end()) return it->second;
    }
    const auto m = moments_of(profiles_, &BumpProfile::chi, &BumpProfile::chi_d1, &BumpProfile::chi_d2,
                              profiles_.chi_support(), delta);
    std::lock_guard lock(mutex_);
    chi_cache_.emplace(delta, m);
    return m;
}

SpectralQuadrature::Moments SpectralQuadrature::psi_moments(double delta) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = psi_cache_.find(delta); it != psi_cache_.end()) return it->second;
    }
    const auto m = moments_of(profiles_, &BumpProfile::psi, &BumpProfile::psi_d1, &BumpProfile::psi_d2,
                              profiles_.psi_support(), delta);
    std::lock_guard lock(mutex_);
    psi_cache_.emplace(delta, m);
    return m;
}

namespace {

// Frequency function a(xi) = amp * p(sigma xi) sampled at xi = m dxi, i.e. t = m sigma dxi.
template <class M, class F>
F scale_factor(const M& m, double amp, double sigma) {
    const double a2 = amp * amp;
    return {amp * m.s0 / sigma,
            two_pi * a2 * m.n0 / sigma,
            two_pi * a2 * m.t2 / (sigma * sigma * sigma),
            two_pi * a2 * sigma * m.d1,
            two_pi * a2 * sigma * sigma * sigma * m.d2,
            two_pi * a2 * m.tpp / sigma};
}

}  // namespace

SpectralQuadrature::Factor SpectralQuadrature::factor_f(double h, int j) const {
    const double sigma = std::ldexp(h, j);
    return scale_factor<Moments, Factor>(chi_moments(sigma * dxi_), std::sqrt(h), sigma);
}

SpectralQuadrature::Factor SpectralQuadrature::factor_g(int j) const {
    const double sigma = std::ldexp(1.0, -j);
    return scale_factor<Moments, Factor>(psi_moments(sigma * dxi_), 1.0, sigma);
}

Measures SpectralQuadrature::piece(double h, int j) const {
    require_piece_index(h, j);
    const Factor f = factor_f(h, j);
    const Factor g = factor_g(j);
    Measures out;
    out.origin_value = f.value0 * g.value0;
    out.l2_norm = std::sqrt(f.n0 * g.n0);
    const double hyp2 = h * h * h * h * f.nxi * g.nxi;
    const double x1x2_2 = f.nd1 * g.nd1;
    const double cross = h * h * f.cross * g.cross;
    out.hyperbolic = std::sqrt(hyp2);
    out.x1x2 = std::sqrt(x1x2_2);
    out.x1sq = std::sqrt(f.nd2 * g.n0);
    out.kt_plus = std::sqrt(std::max(0.0, hyp2 + x1x2_2 + 2.0 * cross));
    out.kt_minus = std::sqrt(std::max(0.0, hyp2 + x1x2_2 - 2.0 * cross));
    return out;
}

Measures SpectralQuadrature::sum(double h, Cap cap) const {
    require_sum_h(h);
    const int count = static_cast<int>(piece_count(h, cap));
    const double c = 1.0 / std::sqrt(log_factor(h));
    long double origin = 0, n0 = 0, hyp = 0, x1x2 = 0, x1sq = 0, cross = 0;
    std::vector<Factor> fs, gs;
    for (int j = 0; j < count; ++j) {
        const Factor f = factor_f(h, j);
        const Factor g = factor_g(j);
        origin += f.value0 * g.value0;
        n0 += f.n0 * g.n0;
        hyp += h * h * h * h * f.nxi * g.nxi;
        x1x2 += f.nd1 * g.nd1;
        x1sq += f.nd2 * g.n0;
        cross += h * h * f.cross * g.cross;
        fs.push_back(f);
        gs.push_back(g);
    }
    // Pieces i != j share at most the sample xi2 = 2^{max(i,j)}, where one psi factor vanishes.
    double overlap = 0.0;
    for (int i = 0; i < count; ++i)
        for (int j = i + 1; j < count; ++j) {
            const double lo = std::ldexp(1.0, j), hi = std::ldexp(1.0, i + 1);
            if (lo > hi) continue;
            long double g_ij = 0;
            const long first = static_cast<long>(std::ceil(lo / dxi_)), last = static_cast<long>(std::floor(hi / dxi_));
            for (long m = first; m <= last; ++m) {
                const double xi = static_cast<double>(m) * dxi_;
                g_ij += profiles_.psi(std::ldexp(xi, -i)) * profiles_.psi(std::ldexp(xi, -j));
            }
            const double g_abs = std::abs(static_cast<double>(two_pi * dxi_ * g_ij));
            if (g_abs == 0.0) continue;
            // <f_i, f_j> <= ||f_i|| ||f_j||, so this bounds the normalized overlap.
            overlap = std::max(overlap, g_abs / std::sqrt(gs[static_cast<std::size_t>(i)].n0 *
                                                          gs[static_cast<std::size_t>(j)].n0));
        }
    Measures out;
    out.origin_value = c * static_cast<double>(origin);
    out.l2_norm = c * std::sqrt(static_cast<double>(n0));
    out.hyperbolic = c * std::sqrt(static_cast<double>(hyp));
    out.x1x2 = c * std::sqrt(static_cast<double>(x1x2));
    out.x1sq = c * std::sqrt(static_cast<double>(x1sq));
    out.kt_plus = c * std::sqrt(std::max(0.0, static_cast<double>(hyp + x1x2 + 2 * cross)));
    out.kt_minus = c * std::sqrt(std::max(0.0, static_cast<double>(hyp + x1x2 - 2 * cross)));
    out.max_overlap = overlap;
    return out;
}

// ---------------------------------------------------------------------------
// Spatial tensor route
// ---------------------------------------------------------------------------

FrequencyBox frequency_box(double h, int j) {
    require_piece_index(h, j);
    return {std::ldexp(1.0, -j) / h, std::ldexp(1.0, j), std::ldexp(1.0, j + 1)};
}

cplx CounterexamplePiece::value_at_origin() const { return f[axis1.origin_index()] * g[axis2.origin_index()]; }

namespace {

/// dxi * sum_m a(m dxi) e^{i x_n m dxi} on the axis, by one inverse DFT.
std::vector<cplx> synthesize(const Grid1D& axis, const std::function<double(double)>& a) {
    const std::size_t n = axis.points();
    const double dxi = axis.frequency_step();
    std::vector<cplx> buf(n);
    for (std::size_t k = 0; k < n; ++k) {
        const long m = fft::signed_index(k, n);
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;  // e^{i x_0 xi_m} = (-1)^m
        buf[k] = sign * dxi * a(static_cast<double>(m) * dxi);
    }
    fft::transform_1d(buf, fft::Direction::backward);
    return buf;
}

std::vector<cplx> derivative(const Grid1D& axis, const std::vector<cplx>& f) {
    const std::size_t n = axis.points();
    std::vector<cplx> buf(f);
    fft::transform_1d(buf, fft::Direction::forward);
    const double dxi = axis.frequency_step();
    for (std::size_t k = 0; k < n; ++k)
        buf[k] *= cplx(0.0, dxi * static_cast<double>(fft::signed_index(k, n)) / static_cast<double>(n));
    fft::transform_1d(buf, fft::Direction::backward);
    return buf;
}

std::vector<cplx> times_power(const Grid1D& axis, const std::vector<cplx>& f, int power) {
    std::vector<cplx> out(f);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= std::pow(axis.coordinate(i), power);
    return out;
}

cplx inner(const Grid1D& axis, const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx acc(0.0, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * std::conj(b[i]);
    return acc * axis.spacing();
}

/// Largest |f| on the outer tenth of the box relative to max |f|.
double tail_ratio(const Grid1D& axis, const std::vector<cplx>& f) {
    double peak = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double v = std::abs(f[i]);
        peak = std::max(peak, v);
        if (std::abs(axis.coordinate(i)) >= 0.9 * axis.half_width()) tail = std::max(tail, v);
    }
    return peak > 0.0 ? tail / peak : 0.0;
}

/// Per-piece 1D vectors for every operator the measurements need.
struct Factors {
    std::vector<cplx> f, df, xf, x2f;
    std::vector<cplx> g, dg, xg;
};

Factors factors_of(const CounterexamplePiece& p) {
    Factors out;
    out.f = p.f;
    out.df = derivative(p.axis1, p.f);
    out.xf = times_power(p.axis1, p.f, 1);
    out.x2f = times_power(p.axis1, p.f, 2);
    out.g = p.g;
    out.dg = derivative(p.axis2, p.g);
    out.xg = times_power(p.axis2, p.g, 1);
    return out;
}

}  // namespace

CounterexamplePiece build_piece(double h, int j, const BumpProfile& profiles, const Grid1D& axis1,
                                const Grid1D& axis2) {
    const FrequencyBox box = frequency_box(h, j);
    // Box edges carry zero samples, so an edge exactly at the Nyquist frequency is harmless.
    if (box.xi1_max > axis1.nyquist())
        throw NyquistViolation("build_piece: |xi1| <= 2^-j/h exceeds the band of the x1 axis");
    if (box.xi2_hi > axis2.nyquist())
        throw NyquistViolation("build_piece: xi2 <= 2^{j+1} exceeds the band of the x2 axis");
    const double sh = std::sqrt(h);
    const double s1 = std::ldexp(h, j), s2 = std::ldexp(1.0, -j);
    CounterexamplePiece out{h, j, axis1, axis2, {}, {}, box};
    out.f = synthesize(axis1, [&](double xi) { return sh * profiles.chi(s1 * xi); });
    out.g = synthesize(axis2, [&](double xi) { return profiles.psi(s2 * xi); });
    return out;
}

std::pair<Grid1D, Grid1D> tensor_axes(double h, Cap cap, const BumpProfile& profiles, double frequency_step) {
    require_sum_h(h);
    const int top = static_cast<int>(piece_count(h, cap)) - 1;
    double dxi = frequency_step;
    for (int attempt = 0; attempt < 8; ++attempt, dxi *= 0.5) {
        const double half_width = std::numbers::pi / dxi;
        // nyquist = N dxi / 2 must reach 1/h (piece 0 in x1) and 2^{top+1} (last piece in x2).
        auto points_for = [&](double band) {
            std::size_t n = 2;
            while (static_cast<double>(n) * dxi / 2.0 < band) n *= 2;
            return n;
        };
        const Grid1D a1(half_width, points_for(1.0 / h));
        const Grid1D a2(half_width, points_for(std::ldexp(1.0, top + 1)));
        double worst = 0.0;
        for (int j = 0; j <= top; ++j) {
            const auto p = build_piece(h, j, profiles, a1, a2);
            worst = std::max({worst, tail_ratio(a1, p.f), tail_ratio(a2, p.g)});
        }
        if (worst <= 1e-9) return {a1, a2};
    }
    throw PreconditionError("tensor_axes: tails do not decay inside the box");
}

CounterexampleSum build_sum(double h, const BumpProfile& profiles, Cap cap) {
    const auto [a1, a2] = tensor_axes(h, cap, profiles);
    return build_sum(h, profiles, cap, a1, a2);
}

CounterexampleSum build_sum(double h, const BumpProfile& profiles, Cap cap, const Grid1D& axis1,
                            const Grid1D& axis2) {
    require_sum_h(h);
    CounterexampleSum out{h, cap, 1.0 / std::sqrt(log_factor(h)), {}};
    const int count = static_cast<int>(piece_count(h, cap));
    for (int j = 0; j < count; ++j) out.pieces.push_back(build_piece(h, j, profiles, axis1, axis2));
    return out;
}

Measures measure(const CounterexamplePiece& p) {
    CounterexampleSum single{p.h, Cap::full, 1.0, {p}};
    return measure(single);
}

Measures measure(const CounterexampleSum& sum) {
    if (sum.pieces.empty()) throw PreconditionError("measure: empty sum");
    const Grid1D& a1 = sum.pieces.front().axis1;
    const Grid1D& a2 = sum.pieces.front().axis2;
    std::vector<Factors> fs;
    fs.reserve(sum.pieces.size());
    for (const auto& p : sum.pieces) {
        if (!(p.axis1 == a1 && p.axis2 == a2)) throw GridMismatch("measure: pieces live on different axes");
        fs.push_back(factors_of(p));
    }
    const double h = sum.h;
    const double h2 = h * h;
    cplx origin(0.0, 0.0);
    cplx n0(0.0, 0.0), hyp(0.0, 0.0), x1x2(0.0, 0.0), x1sq(0.0, 0.0), cross(0.0, 0.0);
    double overlap = 0.0;
    std::vector<double> piece_norm;
    for (const auto& f : fs) piece_norm.push_back(std::sqrt(inner(a1, f.f, f.f).real() * inner(a2, f.g, f.g).real()));
    for (std::size_t i = 0; i < fs.size(); ++i) {
        origin += sum.pieces[i].value_at_origin();
        for (std::size_t j = 0; j < fs.size(); ++j) {
            const Factors& u = fs[i];
            const Factors& v = fs[j];
            const cplx uv = inner(a1, u.f, v.f) * inner(a2, u.g, v.g);
            n0 += uv;
            hyp += h2 * h2 * inner(a1, u.df, v.df) * inner(a2, u.dg, v.dg);
            x1x2 += inner(a1, u.xf, v.xf) * inner(a2, u.xg, v.xg);
            x1sq += inner(a1, u.x2f, v.x2f) * inner(a2, u.g, v.g);
            cross += h2 * inner(a1, u.df, v.xf) * inner(a2, u.dg, v.xg);
            if (i != j) overlap = std::max(overlap, std::abs(uv) / (piece_norm[i] * piece_norm[j]));
        }
    }
    const double c = sum.normalization;
    Measures out;
    out.origin_value = c * origin.real();
    out.l2_norm = c * std::sqrt(n0.real());
    out.hyperbolic = c * std::sqrt(hyp.real());
    out.x1x2 = c * std::sqrt(x1x2.real());
    out.x1sq = c * std::sqrt(x1sq.real());
    out.kt_plus = c * std::sqrt(std::max(0.0, hyp.real() + x1x2.real() + 2.0 * cross.real()));
    out.kt_minus = c * std::sqrt(std::max(0.0, hyp.real() + x1x2.real() - 2.0 * cross.real()));
    out.max_overlap = overlap;
    return out;
}

double kt_form_residual(const CounterexampleSum& sum) {
    const Measures m = measure(sum);
    return std::max(m.kt_plus, m.kt_minus);
}

GridFunction assemble_2d(const CounterexampleSum& sum) {
    if (sum.pieces.empty()) throw PreconditionError("assemble_2d: empty sum");
    const Grid1D& axis = sum.pieces.front().axis1;
    for (const auto& p : sum.pieces)
        if (!(p.axis1 == axis && p.axis2 == axis)) throw GridMismatch("assemble_2d: both axes must be the same grid");
    const std::size_t n = axis.points();
    field::Grid2D grid(axis.half_width(), n);
    GridFunction u(grid);
    auto vals = u.values();
    for (const auto& p : sum.pieces)
        for (std::size_t i1 = 0; i1 < n; ++i1) {
            const cplx fi = sum.normalization * p.f[i1];
            for (std::size_t i2 = 0; i2 < n; ++i2) vals[grid.index(i1, i2)] += fi * p.g[i2];
        }
    return u;
}

AxisProfiles axis_profiles(const CounterexampleSum& sum, double window) {
    if (sum.pieces.empty()) throw PreconditionError("axis_profiles: empty sum");
    AxisProfiles out;
    const Grid1D& a1 = sum.pieces.front().axis1;
    const Grid1D& a2 = sum.pieces.front().axis2;
    for (std::size_t i = 0; i < a1.points(); ++i) {
        if (std::abs(a1.coordinate(i)) > window) continue;
        cplx acc(0.0, 0.0);
        for (const auto& p : sum.pieces) acc += p.f[i] * p.g[a2.origin_index()];
        out.x1.push_back(a1.coordinate(i));
        out.along_x1.push_back(std::abs(sum.normalization * acc));
    }
    for (std::size_t i = 0; i < a2.points(); ++i) {
        if (std::abs(a2.coordinate(i)) > window) continue;
        cplx acc(0.0, 0.0);
        for (const auto& p : sum.pieces) acc += p.f[a1.origin_index()] * p.g[i];
        out.x2.push_back(a2.coordinate(i));
        out.along_x2.push_back(std::abs(sum.normalization * acc));
    }
    return out;
}

RestrictedReport verify_restricted_sum(double h, const SpectralQuadrature& quad) {
    require_sum_h(h);
    const Measures r = quad.sum(h, Cap::restricted);
    const Measures f = quad.sum(h, Cap::full);
    return {h,
            piece_count(h, Cap::restricted),
            piece_count(h, Cap::full),
            r.origin_value,
            f.origin_value,
            r.x1sq / h,
            f.x1sq / h};
}

}  // namespace qlab::counterexample

#include "qlab/rescale.hpp"

#include "qlab/error.hpp"
#include "qlab/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace qlab::rescale {

using field::cplx;
using field::Poly2;

namespace {

constexpr double kCond2First = 2.0;
constexpr double kCond2Second = 0.01;
constexpr int kMaxDerivativeOrder = 8;

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

/// Points of B* = {|x| < 2} on a square lattice of the given spacing.
std::vector<Vec2> ball_samples(double radius, double spacing) {
    const long m = static_cast<long>(std::floor(radius / spacing));
    std::vector<Vec2> pts;
    for (long i = -m; i <= m; ++i)
        for (long j = -m; j <= m; ++j) {
            Vec2 x(i * spacing, j * spacing);
            if (x.norm() < radius) pts.push_back(x);
        }
    return pts;
}

struct Cond2 {
    double first;
    double second;
    bool ok() const { return first <= kCond2First * (1 + 1e-12) && second <= kCond2Second * (1 + 1e-12); }
};

Cond2 cond2_on(const MetricField& g, const PotentialField& v, const std::vector<Vec2>& pts) {
    Cond2 c{0.0, 0.0};
    for (const Vec2& x : pts) {
        c.first = std::max(c.first, std::abs(v.value(x)) + v.gradient(x).norm());
        const Eigen::SelfAdjointEigenSolver<Mat2> es(v.hessian(x), Eigen::EigenvaluesOnly);
        double s = es.eigenvalues().cwiseAbs().maxCoeff();
        const auto dg = g.inverse_gradient(x);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) s += std::hypot(dg[0](i, j), dg[1](i, j));
        c.second = std::max(c.second, s);
    }
    return c;
}

bool is_axis_aligned(const Mat2& q) {
    return q(0, 1) == 0.0 && q(1, 0) == 0.0 && std::abs(q(0, 0)) == 1.0 && std::abs(q(1, 1)) == 1.0;
}

bool is_identity(const Mat2& q) { return q == Mat2::Identity(); }

/// Row m holds the trigonometric interpolation basis e^{i xi_k (y_m + L)};
/// the Nyquist slot uses the cosine so real data stays real.
Eigen::MatrixXcd synthesis_matrix(const field::Grid1D& axis, const std::vector<double>& y) {
    const std::size_t n = axis.points();
    const double dxi = axis.frequency_step();
    const double l = axis.half_width();
    Eigen::MatrixXcd e(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < y.size(); ++m)
        for (std::size_t k = 0; k < n; ++k) {
            const double xi = static_cast<double>(fft::signed_index(k, n)) * dxi;
            const double phase = xi * (y[m] + l);
            e(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) =
                k == n / 2 ? cplx(std::cos(phase), 0.0) : std::polar(1.0, phase);
        }
    return e;
}

void require_inside(double y, double l) {
    if (std::abs(y) > l * (1 + 1e-9))
        throw PreconditionError("resample: target point maps to " + fmt(y) + ", outside the source box [-" + fmt(l) +
                                ", " + fmt(l) + "]");
}

GridFunction trigonometric_resample(const GridFunction& u, double s, const Mat2& q, const Grid2D& target) {
    const auto& src = u.grid();
    const std::size_t n = src.points_per_dim();
    const std::size_t m = target.points_per_dim();
    std::vector<double> y1(m), y2(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double x = target.axis().coordinate(i);
        y1[i] = s * q(0, 0) * x;
        y2[i] = s * q(1, 1) * x;
        require_inside(y1[i], src.half_width());
        require_inside(y2[i], src.half_width());
    }
    std::vector<cplx> hat(u.values().begin(), u.values().end());
    fft::transform_2d(hat, n, fft::Direction::forward);
    Eigen::MatrixXcd c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t k1 = 0; k1 < n; ++k1)
        for (std::size_t k2 = 0; k2 < n; ++k2)
            c(static_cast<Eigen::Index>(k1), static_cast<Eigen::Index>(k2)) = hat[k1 * n + k2];
    c /= static_cast<double>(n * n);
    const Eigen::MatrixXcd e1 = synthesis_matrix(src.axis(), y1);
    const Eigen::MatrixXcd e2 = synthesis_matrix(src.axis(), y2);
    const Eigen::MatrixXcd out = e1 * c * e2.transpose();
    GridFunction r(target);
    for (std::size_t i1 = 0; i1 < m; ++i1)
        for (std::size_t i2 = 0; i2 < m; ++i2)
            r(i1, i2) = s * out(static_cast<Eigen::Index>(i1), static_cast<Eigen::Index>(i2));
    return r;
}

/// Cubic Lagrange weights for nodes i-1, i, i+1, i+2 at fractional offset t in [0, 1).
std::array<double, 4> cubic_weights(double t) {
    return {-t * (t - 1) * (t - 2) / 6, (t + 1) * (t - 1) * (t - 2) / 2, -(t + 1) * t * (t - 2) / 2,
            (t + 1) * t * (t - 1) / 6};
}

GridFunction padded_cubic_resample(const GridFunction& u, double s, const Mat2& q, const Grid2D& target) {
    constexpr std::size_t pad = 4;
    const auto& src = u.grid();
    const std::size_t n = src.points_per_dim();
    const std::size_t p = pad * n;
    const double l = src.half_width();

    std::vector<cplx> hat(u.values().begin(), u.values().end());
    fft::transform_2d(hat, n, fft::Direction::forward);
    std::vector<cplx> big(p * p, cplx(0.0, 0.0));
    // Each source slot lands on its signed frequency; the Nyquist row/column is
    // split evenly between +n/2 and -n/2.
    auto targets = [&](std::size_t k) {
        std::vector<std::pair<std::size_t, double>> t;
        const long sk = fft::signed_index(k, n);
        if (k == n / 2) {
            t.emplace_back(n / 2, 0.5);
            t.emplace_back(p - n / 2, 0.5);
        } else {
            t.emplace_back(sk >= 0 ? static_cast<std::size_t>(sk) : p - static_cast<std::size_t>(-sk), 1.0);
        }
        return t;
    };
    for (std::size_t k1 = 0; k1 < n; ++k1)
        for (std::size_t k2 = 0; k2 < n; ++k2)
            for (auto [a, wa] : targets(k1))
                for (auto [b, wb] : targets(k2)) big[a * p + b] += wa * wb * hat[k1 * n + k2];
    fft::transform_2d(big, p, fft::Direction::backward);
    const double norm = 1.0 / static_cast<double>(n * n);
    const double dxf = src.spacing() / static_cast<double>(pad);

    GridFunction r(target);
    const std::size_t m = target.points_per_dim();
    for (std::size_t i1 = 0; i1 < m; ++i1)
        for (std::size_t i2 = 0; i2 < m; ++i2) {
            const Vec2 y = s * (q * target.point(i1, i2));
            require_inside(y[0], l);
            require_inside(y[1], l);
            const double t1 = (y[0] + l) / dxf;
            const double t2 = (y[1] + l) / dxf;
            const double f1 = std::floor(t1);
            const double f2 = std::floor(t2);
            const auto w1 = cubic_weights(t1 - f1);
            const auto w2 = cubic_weights(t2 - f2);
            const long b1 = static_cast<long>(f1) - 1;
            const long b2 = static_cast<long>(f2) - 1;
            cplx acc(0.0, 0.0);
            for (int a = 0; a < 4; ++a) {
                const std::size_t r1 = static_cast<std::size_t>(((b1 + a) % static_cast<long>(p) + static_cast<long>(p)) %
                                                                static_cast<long>(p));
                cplx row(0.0, 0.0);
                for (int b = 0; b < 4; ++b) {
                    const std::size_t r2 = static_cast<std::size_t>(
                        ((b2 + b) % static_cast<long>(p) + static_cast<long>(p)) % static_cast<long>(p));
                    row += w2[static_cast<std::size_t>(b)] * big[r1 * p + r2];
                }
                acc += w1[static_cast<std::size_t>(a)] * row;
            }
            r(i1, i2) = s * norm * acc;
        }
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

NormalizationReport verify_normalization(const MetricField& metric, const PotentialField& potential, double spacing,
                                         double derivative_spacing) {
    if (!(spacing > 0.0 && spacing <= 0.01))
        throw PreconditionError("verify_normalization: sample spacing must lie in (0, 0.01]");
    if (!(derivative_spacing > 0.0)) throw PreconditionError("verify_normalization: derivative spacing must be positive");

    NormalizationReport rep{};
    const Mat2 g0 = metric.inverse(Vec2::Zero());
    rep.cond1_deviation = (g0 - Mat2::Identity()).cwiseAbs().maxCoeff();
    rep.cond1_ok = rep.cond1_deviation <= 1e-10;

    const auto pts = ball_samples(2.0, spacing);
    const Cond2 c2 = cond2_on(metric, potential, pts);
    rep.cond2_first = c2.first;
    rep.cond2_second = c2.second;
    rep.cond2_ok = c2.ok();

    // C_N: running max over orders; an order without partials ends the list.
    const auto dpts = ball_samples(2.0, derivative_spacing);
    rep.cond3_constants.assign(kMaxDerivativeOrder + 1, std::nullopt);
    double running = 0.0;
    for (int order = 0; order <= kMaxDerivativeOrder; ++order) {
        bool available = true;
        double best = 0.0;
        for (const Vec2& x : dpts) {
            for (int a1 = 0; a1 <= order && available; ++a1) {
                const int a2 = order - a1;
                const auto dv = potential.partial(x, a1, a2);
                const auto dg = metric.partial(x, a1, a2);
                if (!dv || !dg) {
                    available = false;
                    break;
                }
                best = std::max(best, std::abs(*dv) + dg->cwiseAbs().sum());
            }
            if (!available) break;
        }
        if (!available) break;
        running = std::max(running, best);
        rep.cond3_constants[static_cast<std::size_t>(order)] = running;
    }

    if (!rep.cond2_ok) {
        // Halve until (cV(cx), g(cx)) passes, then bisect back toward the failing side.
        const auto coarse = ball_samples(2.0, std::max(spacing, 0.04));
        auto passes = [&](double c, const std::vector<Vec2>& where) {
            const auto n = rescale_to_normalization(metric, potential, c);
            return cond2_on(n.metric, n.potential, where).ok();
        };
        double good = 0.5;
        int halvings = 0;
        while (!passes(good, coarse)) {
            good *= 0.5;
            if (++halvings > 60) break;
        }
        if (halvings <= 60) {
            double bad = 2.0 * good;
            for (int it = 0; it < 40; ++it) {
                const double mid = 0.5 * (good + bad);
                (passes(mid, coarse) ? good : bad) = mid;
            }
            // Confirm on the fine lattice, backing off if the coarse search overshot.
            for (int it = 0; it < 60 && !passes(good, pts); ++it) good *= 0.999;
            rep.suggested_c = good;
        }
    }
    return rep;
}

PotentialField transform_potential(const PotentialField& v, double a, double s, const Mat2& q, double b) {
    PotentialField::Partial partial;
    if (is_identity(q) && v.has_all_partials())
        partial = [v, a, s, b](const Vec2& x, int a1, int a2) {
            const double d = *v.partial(s * x, a1, a2);
            return a * std::pow(s, a1 + a2) * d + (a1 == 0 && a2 == 0 ? b : 0.0);
        };
    std::string desc = fmt(a) + " * V(" + fmt(s) + " Q x)" + (b != 0.0 ? " + " + fmt(b) : "") + " with V = " +
                       v.description();
    return PotentialField([v, a, s, q, b](const Vec2& x) { return a * v.value(s * (q * x)) + b; },
                          [v, a, s, q](const Vec2& x) { return Vec2(a * s * (q.transpose() * v.gradient(s * (q * x)))); },
                          [v, a, s, q](const Vec2& x) {
                              return Mat2(a * s * s * (q.transpose() * v.hessian(s * (q * x)) * q));
                          },
                          partial, desc);
}

MetricField transform_metric(const MetricField& g, double s, const Mat2& q) {
    MetricField::Partial partial;
    if (is_identity(q) && g.has_all_partials())
        partial = [g, s](const Vec2& x, int a1, int a2) { return Mat2(std::pow(s, a1 + a2) * *g.partial(s * x, a1, a2)); };
    return MetricField(
        [g, s, q](const Vec2& x) { return Mat2(q.transpose() * g.inverse(s * (q * x)) * q); },
        [g, s, q](const Vec2& x) {
            const auto d = g.inverse_gradient(s * (q * x));
            std::array<Mat2, 2> r;
            for (int k = 0; k < 2; ++k)
                r[static_cast<std::size_t>(k)] = s * q.transpose() * (q(0, k) * d[0] + q(1, k) * d[1]) * q;
            return r;
        },
        partial, "g(" + fmt(s) + " Q x) with g = " + g.description(), g.is_constant());
}

Normalized rescale_to_normalization(const MetricField& metric, const PotentialField& potential, double c) {
    if (!(c > 0.0 && c <= 1.0)) throw PreconditionError("rescale_to_normalization: c must lie in (0, 1]");
    return {transform_metric(metric, c, Mat2::Identity()), transform_potential(potential, c, c, Mat2::Identity(), 0.0),
            1.0 / std::sqrt(c)};
}

// ---------------------------------------------------------------------------
// Resampling and the rescaling maps
// ---------------------------------------------------------------------------

const char* to_string(ResampleMethod m) {
    return m == ResampleMethod::trigonometric ? "trigonometric" : "padded_cubic";
}

GridFunction scale_function(const GridFunction& u, double s, const Mat2& q, const Grid2D& target,
                            ResampleMethod* used) {
    if (!(s > 0.0)) throw PreconditionError("scale_function: scale must be positive");
    if (!(q.transpose() * q).isApprox(Mat2::Identity(), 1e-12))
        throw PreconditionError("scale_function: Q must be orthogonal");
    const bool aligned = is_axis_aligned(q);
    if (used) *used = aligned ? ResampleMethod::trigonometric : ResampleMethod::padded_cubic;
    return aligned ? trigonometric_resample(u, s, q, target) : padded_cubic_resample(u, s, q, target);
}

Rescaled lemma3_rescale(const GridFunction& u, const MetricField& metric, double h, std::optional<Grid2D> target) {
    if (!(h > 0.0 && h <= 1.0)) throw PreconditionError("lemma3_rescale: h must lie in (0, 1]");
    const double s = std::sqrt(h);
    const Grid2D tgt = target.value_or(Grid2D(u.grid().half_width() / s, u.grid().points_per_dim()));
    ResampleMethod method{};
    auto v = scale_function(u, s, Mat2::Identity(), tgt, &method);
    return {std::move(v), transform_metric(metric, s, Mat2::Identity()), PotentialField::constant(0.0), 1.0, h, method};
}

Rescaled lemma4_rescale(const GridFunction& u, const MetricField& metric, const PotentialField& potential, double h,
                        double c, std::optional<Grid2D> target) {
    if (!(h > 0.0 && h <= c && c <= 1.0)) throw PreconditionError("lemma4_rescale: need 0 < h <= c <= 1");
    const double s = std::sqrt(c);
    const Grid2D tgt = target.value_or(Grid2D(u.grid().half_width() / s, u.grid().points_per_dim()));
    ResampleMethod method{};
    auto v = scale_function(u, s, Mat2::Identity(), tgt, &method);
    return {std::move(v), transform_metric(metric, s, Mat2::Identity()),
            transform_potential(potential, 1.0 / c, s, Mat2::Identity(), 0.0), h / c, 1.0 / c, method};
}

Case2Result case2_rescale(const GridFunction& u, const MetricField& metric, const PotentialField& potential, double h,
                          std::optional<Grid2D> target) {
    if (!(h > 0.0 && h <= 0.25)) throw PreconditionError("case2_rescale: h must lie in (0, 1/4]");
    const double v0 = potential.value(Vec2::Zero());
    const Vec2 d = potential.gradient(Vec2::Zero());
    const double b = d.norm();
    if (std::abs(v0) > h * (1 + 1e-12)) throw PreconditionError("case2_rescale: |V(0)| exceeds h");
    if (b < 8.0 * std::sqrt(h) * (1 - 1e-12)) throw PreconditionError("case2_rescale: |dV(0)| below 8 h^{1/2}");
    if (b > 2.0 * (1 + 1e-12)) throw PreconditionError("case2_rescale: |dV(0)| above 2, normalize first");

    Mat2 q;
    q << d[0] / b, -d[1] / b, d[1] / b, d[0] / b;
    const bool divide = b > 0.5;
    const double shrink = divide ? 0.25 : 1.0;
    const double beta = b * shrink;

    const double l = u.grid().half_width();
    const double reach = is_axis_aligned(q) ? l / beta : l / (beta * std::numbers::sqrt2);
    const Grid2D tgt = target.value_or(Grid2D(reach, u.grid().points_per_dim()));
    ResampleMethod method{};
    auto v = scale_function(u, beta, q, tgt, &method);
    const double a = shrink / (beta * beta);
    Rescaled r{std::move(v), transform_metric(metric, beta, q), transform_potential(potential, a, beta, q, -a * v0),
               h / (beta * beta), 1.0 / (beta * beta), method};
    return {std::move(r), beta, v0, divide, q};
}

// ---------------------------------------------------------------------------
// Case classification
// ---------------------------------------------------------------------------

std::array<bool, 4> case_conditions(double v, double b, double h) {
    const bool small_v = v <= h;
    return {small_v && b <= 8.0 * std::sqrt(h), small_v && b > 8.0 * std::sqrt(h), !small_v && b <= 9.0 * std::sqrt(v),
            !small_v && b > 9.0 * std::sqrt(v)};
}

CaseDecision classify_case(const PotentialField& potential, double h, const Vec2& x0) {
    if (!(h > 0.0 && h <= 0.25)) throw PreconditionError("classify_case: h must lie in (0, 1/4]");
    if (!(x0.norm() <= 1.0)) throw PreconditionError("classify_case: point outside the unit disk");
    const double v = std::abs(potential.value(x0));
    const Vec2 grad = potential.gradient(x0);
    const double b = grad.norm();
    const auto cond = case_conditions(v, b, h);
    const int id = static_cast<int>(std::find(cond.begin(), cond.end(), true) - cond.begin()) + 1;
    switch (id) {
        case 1: return {1, x0, std::sqrt(h), x0, b};
        case 2: return {2, x0, b, x0, b};
        case 3: return {3, x0, std::sqrt(v) / 40.0, x0, v};
        default: break;
    }
    // Case 4: Newton along the gradient direction for a zero of V.
    const Vec2 e = grad / b;
    double t = 0.0;
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
        const Vec2 x = x0 + t * e;
        const double f = potential.value(x);
        if (std::abs(f) <= 1e-12) {
            converged = true;
            break;
        }
        const double df = potential.gradient(x).dot(e);
        if (df == 0.0) break;
        t -= f / df;
    }
    if (!converged || std::abs(t) > std::sqrt(v) / 8.0 * (1 + 1e-9))
        throw PreconditionError("classify_case: no zero of V within |V|^{1/2}/8 of the point (Case 4)");
    return {4, x0, 0.9998 * b, x0 + t * e, b};
}

Cover cover_ball(const PotentialField& potential, double h, std::size_t samples, std::size_t max_balls) {
    if (samples < 2) throw PreconditionError("cover_ball: need at least 2 samples per side");
    const double step = 2.0 / static_cast<double>(samples);
    std::vector<Vec2> pts;
    for (std::size_t i = 0; i < samples; ++i)
        for (std::size_t j = 0; j < samples; ++j) {
            const Vec2 x(-1.0 + (static_cast<double>(i) + 0.5) * step, -1.0 + (static_cast<double>(j) + 0.5) * step);
            if (x.norm() < 1.0) pts.push_back(x);
        }
    std::vector<CaseDecision> decisions;
    decisions.reserve(pts.size());
    for (const Vec2& x : pts) decisions.push_back(classify_case(potential, h, x));

    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return decisions[a].radius > decisions[b].radius; });

    // Index the samples by lattice cell so marking a ball only touches its bounding box.
    std::vector<long> cell(samples * samples, -1);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto i = static_cast<std::size_t>(std::lround((pts[k][0] + 1.0) / step - 0.5));
        const auto j = static_cast<std::size_t>(std::lround((pts[k][1] + 1.0) / step - 0.5));
        cell[i * samples + j] = static_cast<long>(k);
    }
    std::vector<char> covered(pts.size(), 0);
    Cover out{{}, pts.size(), 0, {}};
    for (std::size_t k : order) {
        if (covered[k]) continue;
        if (out.balls.size() >= max_balls)
            throw PreconditionError("cover_ball: coverage incomplete after " + std::to_string(max_balls) + " balls");
        const CaseDecision& d = decisions[k];
        out.balls.push_back(d);
        const auto lo = [&](double c) {
            return static_cast<std::size_t>(std::clamp(std::floor((c - d.radius + 1.0) / step - 0.5), 0.0,
                                                       static_cast<double>(samples - 1)));
        };
        const auto hi = [&](double c) {
            return static_cast<std::size_t>(std::clamp(std::ceil((c + d.radius + 1.0) / step - 0.5), 0.0,
                                                       static_cast<double>(samples - 1)));
        };
        for (std::size_t i = lo(d.center[0]); i <= hi(d.center[0]); ++i)
            for (std::size_t j = lo(d.center[1]); j <= hi(d.center[1]); ++j) {
                const long idx = cell[i * samples + j];
                if (idx < 0 || covered[static_cast<std::size_t>(idx)]) continue;
                if ((pts[static_cast<std::size_t>(idx)] - d.center).norm() < d.radius) {
                    covered[static_cast<std::size_t>(idx)] = 1;
                    ++out.points_by_case[static_cast<std::size_t>(d.case_id - 1)];
                }
            }
        if (!covered[k]) {
            covered[k] = 1;
            ++out.points_by_case[static_cast<std::size_t>(d.case_id - 1)];
        }
    }
    out.uncovered = static_cast<std::size_t>(std::count(covered.begin(), covered.end(), 0));
    return out;
}

PotentialField builtin_potential(const std::string& name) {
    if (name == "zero") return PotentialField::polynomial(Poly2::constant(0.0));
    if (name == "linear") return PotentialField::polynomial(Poly2::monomial(0.6, 1, 0));
    if (name == "quadratic-well")
        return PotentialField::polynomial(Poly2({{{2, 0}, 0.005}, {{0, 2}, 0.005}, {{0, 0}, -0.004}}));
    if (name == "saddle") return PotentialField::polynomial(Poly2({{{2, 0}, 0.005}, {{0, 2}, -0.005}}));
    throw PreconditionError("unknown builtin potential '" + name + "'");
}

std::vector<std::string> builtin_potential_names() { return {"zero", "linear", "quadratic-well", "saddle"}; }

}  // namespace qlab::rescale

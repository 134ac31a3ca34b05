#include "qlab/sweep.hpp"

#include "qlab/counterexample.hpp"
#include "qlab/error.hpp"
#include "qlab/fft.hpp"
#include "qlab/operator.hpp"
#include "qlab/spectral.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace qlab::sweep {

using field::cplx;

namespace {

constexpr std::size_t kMinFitRecords = 5;

const std::vector<std::string>& names() {
    static const std::vector<std::string> n{"torus-cluster", "harmonic-ground", "zero-crossing", "elliptic",
                                            "hyperbolic-counterexample"};
    return n;
}

std::vector<const ScalingRecord*> usable(const std::vector<ScalingRecord>& records) {
    std::vector<const ScalingRecord*> r;
    for (const auto& rec : records)
        if (!rec.failure && rec.certified) r.push_back(&rec);
    return r;
}

void require_records(std::size_t n, const char* what) {
    if (n < kMinFitRecords)
        throw PreconditionError(std::string(what) + ": need at least 5 records, got " + std::to_string(n));
}

ScalingRecord torus_record(double h, const SweepConfig& cfg) {
    const std::size_t cap = cfg.grid ? cfg.grid : 4096;
    const auto tc = spectral::coherent_torus_cluster(h, cfg.cluster_width, cap);
    ScalingRecord r;
    r.h = h;
    r.l2_norm = tc.l2_norm;
    r.sup_norm = field::sup_norm(tc.w);
    r.residual_l2 = tc.residual_l2;
    r.extra["cluster_dim"] = static_cast<double>(tc.modes.size());
    r.extra["aliased_sampling"] = tc.aliased_sampling ? 1.0 : 0.0;
    if (!tc.aliased_sampling) r.extra["cutoff_defect"] = op::cutoff_defect(tc.w, op::radial_cutoff(h));
    return r;
}

ScalingRecord harmonic_record(double h, const SweepConfig& cfg) {
    const std::size_t n = cfg.grid ? cfg.grid : 256;
    const field::Grid2D grid(2.0, n);
    const auto v = field::PotentialField::polynomial(
        field::Poly2({{{2, 0}, 1.0}, {{0, 2}, 1.0}, {{0, 0}, -2.0 * h}}));
    const auto p = op::SemiclassicalOperator::assemble(h, field::MetricField::identity(), v, grid,
                                                       op::Backend::finite_difference);
    spectral::EigensolveOptions opts;
    opts.max_count = 4;
    const auto pairs = spectral::interior_eigenpairs(p, h, opts);
    if (pairs.empty()) throw Error("harmonic-ground: no eigenvalue within h of the ground energy");
    const auto& ground = *std::min_element(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        return std::abs(a.energy) < std::abs(b.energy);
    });
    ScalingRecord r;
    r.h = h;
    r.l2_norm = field::l2_norm(ground.function);
    r.sup_norm = field::sup_norm(ground.function);
    r.residual_l2 = op::residual(p, ground.function).res_l2;
    r.extra["cluster_dim"] = 1.0;
    r.extra["energy"] = ground.energy + 2.0 * h;
    r.extra["sup_times_sqrt_pi_h"] = r.sup_norm * std::sqrt(std::numbers::pi * h);
    return r;
}

ScalingRecord counterexample_record(double h) {
    static const counterexample::SpectralQuadrature quad;
    const auto m = quad.sum(h, counterexample::Cap::full);
    const double kappa = kCounterexampleScale;
    ScalingRecord r;
    r.h = h;
    r.l2_norm = kappa * m.l2_norm;
    // Every piece has a nonnegative Fourier transform, so the sup sits at the origin.
    r.sup_norm = kappa * m.origin_value;
    r.residual_l2 = kappa * std::max(m.kt_plus, m.kt_minus);
    r.extra["origin_value"] = m.origin_value;
    r.extra["quasimode_scale"] = kappa;
    r.extra["hyperbolic_over_h"] = m.hyperbolic / h;
    r.extra["x1x2_over_h"] = m.x1x2 / h;
    r.extra["max_overlap"] = m.max_overlap;
    r.extra["piece_count"] = static_cast<double>(counterexample::piece_count(h, counterexample::Cap::full));
    return r;
}

/// Eigenpairs of -h^2 d^2 + a + b cos x + c sin x in the basis e^{ikx} / sqrt(2 pi), |k| <= K.
struct Factor {
    std::vector<double> energies;
    Eigen::MatrixXcd vectors;  // column per eigenpair, row k + K
    long kmax;
};

Factor diagonalize(double h, const Trig1D& v, long kmax) {
    const long m = 2 * kmax + 1;
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(m, m);
    for (long k = -kmax; k <= kmax; ++k) {
        const long i = k + kmax;
        a(i, i) = h * h * static_cast<double>(k * k) + v.a;
        if (k < kmax) {
            // cos x = (e^{ix} + e^{-ix}) / 2, sin x = (e^{ix} - e^{-ix}) / 2i
            const cplx up(0.5 * v.b, -0.5 * v.c);  // coefficient of e^{i(k+1)x} from e^{ikx}
            a(i + 1, i) = up;
            a(i, i + 1) = std::conj(up);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
    if (es.info() != Eigen::Success) throw NonConvergence("separable_cluster: 1D eigensolve failed", {});
    Factor f;
    f.energies.assign(es.eigenvalues().data(), es.eigenvalues().data() + m);
    f.vectors = es.eigenvectors();
    f.kmax = kmax;
    return f;
}

/// Samples of the selected eigenfunctions on x_n = -pi + 2 pi n / N; one column each.
Eigen::MatrixXcd sample_factor(const Factor& f, const std::vector<std::size_t>& cols, std::size_t n) {
    Eigen::MatrixXcd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    std::vector<cplx> buf(n);
    const auto ln = static_cast<long>(n);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        std::fill(buf.begin(), buf.end(), cplx(0.0, 0.0));
        for (long k = -f.kmax; k <= f.kmax; ++k) {
            // e^{ik x_n} = (-1)^k e^{2 pi i k n / N}
            const double sign = (k % 2 == 0) ? 1.0 : -1.0;
            buf[static_cast<std::size_t>(((k % ln) + ln) % ln)] +=
                sign * norm * f.vectors(k + f.kmax, static_cast<Eigen::Index>(cols[c]));
        }
        fft::transform_1d(buf, fft::Direction::backward);
        for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = buf[i];
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

Fit ordinary_least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw PreconditionError("ordinary_least_squares: size mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw PreconditionError("ordinary_least_squares: need at least 3 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw PreconditionError("ordinary_least_squares: degenerate design matrix");
    Fit f{};
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - f.intercept - f.slope * x[i];
        rss += e * e;
    }
    const double dof = static_cast<double>(n - 2);
    f.stderr_slope = std::sqrt(rss / dof / sxx);
    if (f.stderr_slope > 0.0) {
        f.t_statistic = f.slope / f.stderr_slope;
        const boost::math::students_t dist(dof);
        f.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(f.t_statistic)));
    } else {
        f.t_statistic = f.slope == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), f.slope);
        f.p_value = f.slope == 0.0 ? 1.0 : 0.0;
    }
    return f;
}

Fit fit_exponent(const std::vector<ScalingRecord>& records) {
    require_records(records.size(), "fit_exponent");
    std::vector<double> x, y;
    for (const auto& r : records) {
        if (!(r.sup_norm > 0.0) || !(r.h > 0.0)) throw PreconditionError("fit_exponent: sup_norm and h must be positive");
        x.push_back(std::log(r.h));
        y.push_back(std::log(r.sup_norm));
    }
    return ordinary_least_squares(x, y);
}

Fit test_log_factor(const std::vector<ScalingRecord>& records) {
    require_records(records.size(), "test_log_factor");
    std::vector<double> x, y;
    for (const auto& r : records) {
        if (!(r.h > 0.0 && r.h < 1.0)) throw PreconditionError("test_log_factor: h must lie in (0, 1)");
        const double s = r.sup_norm * std::sqrt(r.h);
        x.push_back(std::log(1.0 / r.h));
        y.push_back(s * s);
    }
    return ordinary_least_squares(x, y);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

std::vector<std::string> experiment_names() { return names(); }

bool is_experiment(const std::string& name) {
    return std::find(names().begin(), names().end(), name) != names().end();
}

std::vector<double> dyadic_h(int k_min, int k_max) {
    if (k_min > k_max) throw PreconditionError("dyadic_h: empty k range");
    std::vector<double> h;
    for (int k = k_min; k <= k_max; ++k) h.push_back(std::ldexp(1.0, -k));
    return h;
}

ScalingRecord separable_cluster(double h, const Trig1D& v1, const Trig1D& v2, double width_constant,
                                double resolution) {
    if (!(h > 0.0 && h <= 0.25)) throw PreconditionError("separable_cluster: h must lie in (0, 1/4]");
    if (!(width_constant > 0.0)) throw PreconditionError("separable_cluster: width constant must be positive");
    if (!(resolution >= 1.0)) throw PreconditionError("separable_cluster: resolution must be at least 1");
    const long kmax = static_cast<long>(std::ceil(2.0 * resolution / h)) + 16;
    const Factor f1 = diagonalize(h, v1, kmax);
    const Factor f2 = diagonalize(h, v2, kmax);
    const double window = width_constant * h;

    // Factor eigenpairs that pair with at least one partner inside the window.
    const double lo2 = f2.energies.front(), hi2 = f2.energies.back();
    std::vector<std::size_t> c1, c2;
    for (std::size_t a = 0; a < f1.energies.size(); ++a)
        if (f1.energies[a] + lo2 <= window && f1.energies[a] + hi2 >= -window) c1.push_back(a);
    const double lo1 = c1.empty() ? 0.0 : f1.energies[c1.front()];
    const double hi1 = c1.empty() ? 0.0 : f1.energies[c1.back()];
    for (std::size_t b = 0; b < f2.energies.size(); ++b)
        if (f2.energies[b] + lo1 <= window && f2.energies[b] + hi1 >= -window) c2.push_back(b);

    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c1.size()),
                                                 static_cast<Eigen::Index>(c2.size()));
    std::size_t dim = 0;
    for (std::size_t a = 0; a < c1.size(); ++a)
        for (std::size_t b = 0; b < c2.size(); ++b)
            if (std::abs(f1.energies[c1[a]] + f2.energies[c2[b]]) <= window) {
                mask(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 1.0;
                ++dim;
            }
    if (dim == 0) throw PreconditionError("separable_cluster: the window holds no eigenvalues");

    std::size_t n = 2;
    while (n < 2 * static_cast<std::size_t>(2 * kmax + 1)) n *= 2;
    const Eigen::MatrixXcd s1 = sample_factor(f1, c1, n);
    const Eigen::MatrixXcd s2 = sample_factor(f2, c2, n);
    // Spectral function S(x1, x2) = sum over the cluster of |phi_a(x1)|^2 |phi_b(x2)|^2.
    const Eigen::MatrixXd a1 = s1.cwiseAbs2();
    const Eigen::MatrixXd a2 = s2.cwiseAbs2();
    const Eigen::MatrixXd spec = a1 * mask * a2.transpose();
    Eigen::Index i1 = 0, i2 = 0;
    const double peak = spec.maxCoeff(&i1, &i2);

    // c_ab = conj(phi_a(x1) phi_b(x2)) / sqrt(S(x)): |w| <= sqrt(S) everywhere, with equality at x.
    double res2 = 0.0;
    for (std::size_t a = 0; a < c1.size(); ++a)
        for (std::size_t b = 0; b < c2.size(); ++b) {
            if (mask(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) == 0.0) continue;
            const double w2 = a1(i1, static_cast<Eigen::Index>(a)) * a2(i2, static_cast<Eigen::Index>(b)) / peak;
            const double e = f1.energies[c1[a]] + f2.energies[c2[b]];
            res2 += w2 * e * e;
        }
    ScalingRecord r;
    r.h = h;
    r.l2_norm = 1.0;
    r.sup_norm = std::sqrt(peak);
    r.residual_l2 = std::sqrt(res2);
    r.extra["cluster_dim"] = static_cast<double>(dim);
    const double x0 = -std::numbers::pi;
    const double dx = 2.0 * std::numbers::pi / static_cast<double>(n);
    r.extra["peak_x1"] = x0 + static_cast<double>(i1) * dx;
    r.extra["peak_x2"] = x0 + static_cast<double>(i2) * dx;
    r.certified = r.residual_l2 <= width_constant * h;
    return r;
}

namespace {

ScalingRecord build_uncertified(const std::string& experiment, double h, const SweepConfig& config) {
    if (experiment == "torus-cluster") return torus_record(h, config);
    if (experiment == "harmonic-ground") return harmonic_record(h, config);
    if (experiment == "hyperbolic-counterexample") return counterexample_record(h);
    if (experiment == "elliptic")
        // V = -1 + 0.1 (2 - cos x1 - cos x2): 1/2 <= |V| <= 2 on |x| <= 2
        return separable_cluster(h, {-0.4, -0.1, 0.0}, {-0.4, -0.1, 0.0}, config.cluster_width, config.resolution);
    if (experiment == "zero-crossing")
        // V = sin x1 + 0.005 (1 - cos x2): V(0) = 0, dV(0) = e1
        return separable_cluster(h, {0.0, 0.0, 1.0}, {0.005, -0.005, 0.0}, config.cluster_width, config.resolution);
    throw PreconditionError("unknown experiment '" + experiment + "'");
}

}  // namespace

ScalingRecord build_record(const std::string& experiment, double h, const SweepConfig& config) {
    ScalingRecord r = build_uncertified(experiment, h, config);
    r.certified = r.residual_l2 <= config.cluster_width * r.h && r.l2_norm <= 1.0 + 1e-9;
    return r;
}

ScalingReport run_sweep(const std::string& experiment, const std::vector<double>& h_values,
                        const SweepConfig& config) {
    if (!is_experiment(experiment)) throw PreconditionError("unknown experiment '" + experiment + "'");
    if (h_values.empty()) throw PreconditionError("run_sweep: empty h list");
    for (std::size_t i = 0; i < h_values.size(); ++i) {
        if (!(h_values[i] > 0.0 && h_values[i] <= 0.25))
            throw PreconditionError("run_sweep: every h must lie in (0, 1/4]");
        if (i > 0 && !(h_values[i] < h_values[i - 1]))
            throw PreconditionError("run_sweep: h values must be strictly decreasing");
    }

    ScalingReport rep;
    rep.experiment = experiment;
    rep.records.resize(h_values.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < h_values.size(); i = next++) {
            try {
                rep.records[i] = build_record(experiment, h_values[i], config);
            } catch (const std::exception& e) {
                rep.records[i] = ScalingRecord{};
                rep.records[i].h = h_values[i];
                rep.records[i].failure = e.what();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(config.workers, 1, h_values.size());
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    for (auto& r : rep.records) {
        if (r.failure) {
            ++rep.failures;
            continue;
        }
        if (!r.certified) ++rep.uncertified;
    }
    std::vector<ScalingRecord> fit_set;
    for (const auto* r : usable(rep.records)) fit_set.push_back(*r);
    rep.verdict = "undetermined";
    if (fit_set.size() >= kMinFitRecords) {
        rep.exponent = fit_exponent(fit_set);
        rep.log_factor = test_log_factor(fit_set);
        std::vector<double> x, y;
        for (const auto& r : fit_set) {
            x.push_back(std::log(std::sqrt(std::log(1.0 / r.h))));
            y.push_back(std::log(r.sup_norm * std::sqrt(r.h)));
        }
        rep.log_exponent = ordinary_least_squares(x, y);
        rep.verdict = rep.log_factor->slope > 0.0 && rep.log_factor->p_value < 0.01 ? "log-corrected" : "pure-power";
    }
    return rep;
}

}  // namespace qlab::sweep

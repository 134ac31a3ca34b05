// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "report.hpp"

#include "qlab/counterexample.hpp"
#include "qlab/error.hpp"
#include "qlab/operator.hpp"
#include "qlab/rescale.hpp"
#include "qlab/spectral.hpp"
#include "qlab/sweep.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace qlab;
using field::Grid1D;
using field::Grid2D;
using field::GridFunction;
using field::MetricField;
using field::Poly2;
using field::PotentialField;
using field::Vec2;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.pass) ++failures;
    std::printf("criterion %d %-34s %s  %s (%.1f s)\n", id, name, out.pass ? "PASS" : "FAIL", out.detail.c_str(), secs);
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// 1. Torus coherent clusters: exponent -1/2, no log factor.
Outcome sup_norm_law() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = sweep::run_sweep("torus-cluster", sweep::dyadic_h(4, 12));
    const double secs = seconds_since(t0);
    if (!rep.exponent || !rep.log_factor) return {false, "no fit"};
    const double e = rep.exponent->slope;
    const double t = rep.log_factor->t_statistic;
    const bool pass = std::abs(e + 0.5) <= 0.05 && std::abs(t) < 2.0 && secs < 60.0 && rep.uncertified == 0;
    return {pass, fmt("exponent=%.4f", e) + fmt(" +- %.4f", rep.exponent->stderr_slope) + fmt(", log-factor t=%.3f", t)};
}

// 2. Harmonic oscillator ground state on N = 256.
Outcome harmonic_saturation() {
    const auto t0 = std::chrono::steady_clock::now();
    sweep::SweepConfig cfg;
    cfg.grid = 256;
    bool pass = true;
    std::ostringstream os;
    for (int k : {3, 4, 5}) {
        const double h = std::ldexp(1.0, -k);
        const auto r = sweep::build_record("harmonic-ground", h, cfg);
        const double e_err = std::abs(r.extra.at("energy") - 2 * h) / (2 * h);
        const double s_err = std::abs(r.extra.at("sup_times_sqrt_pi_h") - 1.0);
        pass = pass && e_err <= 0.01 && s_err <= 0.02;
        os << "h=1/" << (1 << k) << ": E/2h-1=" << fmt("%.2e", e_err) << " sup*(pi h)^1/2-1=" << fmt("%.2e", s_err) << "; ";
    }
    pass = pass && seconds_since(t0) < 300.0;
    return {pass, os.str()};
}

// 3. Origin value of the counterexample against the closed form.
Outcome origin_value() {
    const auto t0 = std::chrono::steady_clock::now();
    const counterexample::SpectralQuadrature quad;
    double worst = 0.0, prev = INFINITY, last = 0.0;
    bool monotone = true;
    for (int k = 6; k <= 16; ++k) {
        const double h = std::ldexp(1.0, -k);
        const double logh = k * std::log(2.0);
        const double expected = (k + 1) / std::sqrt(logh * h);
        const double got = quad.sum(h, counterexample::Cap::full).origin_value;
        worst = std::max(worst, std::abs(got - expected) / expected);
        const double s = got * std::sqrt(h / logh);
        monotone = monotone && s < prev && s > 1 / std::log(2.0);
        prev = last = s;
    }
    const double gap = last * std::log(2.0) - 1.0;
    const bool pass = worst <= 1e-8 && monotone && gap <= 0.1 && seconds_since(t0) < 30.0;
    return {pass, fmt("max rel err=%.2e", worst) + ", monotone=" + (monotone ? "yes" : "no") +
                      fmt(", k=16 ratio to 1/ln2 = 1+%.4f", gap)};
}

// 4. Residual ratios bounded by their k = 6 values.
Outcome residual_bounds() {
    const counterexample::SpectralQuadrature quad;
    double c_hyp = 0, c_x1x2 = 0, c_x1sq = 0;
    double m_hyp = 0, m_x1x2 = 0, m_x1sq = 0;
    for (int k = 6; k <= 16; ++k) {
        const double h = std::ldexp(1.0, -k);
        const auto m = quad.sum(h, counterexample::Cap::full);
        const auto r = counterexample::verify_restricted_sum(h, quad);
        if (k == 6) c_hyp = m.hyperbolic / h, c_x1x2 = m.x1x2 / h, c_x1sq = r.x1sq_over_h;
        m_hyp = std::max(m_hyp, m.hyperbolic / h / c_hyp);
        m_x1x2 = std::max(m_x1x2, m.x1x2 / h / c_x1x2);
        m_x1sq = std::max(m_x1sq, r.x1sq_over_h / c_x1sq);
    }
    const double slack = 1 + 1e-12;
    const bool pass = m_hyp <= slack && m_x1x2 <= slack && m_x1sq <= slack;
    return {pass, fmt("frozen C: hyp/h=%.3f", c_hyp) + fmt(" x1x2/h=%.3f", c_x1x2) + fmt(" x1^2/h=%.3f", c_x1sq) +
                      fmt("; max ratio to C: %.4f", m_hyp) + fmt(", %.4f", m_x1x2) + fmt(", %.4f", m_x1sq)};
}

// 5. Orthogonality, constant piece norms, tensor path against 2D assembly.
Outcome orthogonality_plancherel() {
    const counterexample::SpectralQuadrature quad;
    double overlap = 0.0, norm_spread = 0.0, ref = 0.0;
    for (int k = 6; k <= 16; ++k) {
        const double h = std::ldexp(1.0, -k);
        overlap = std::max(overlap, quad.sum(h, counterexample::Cap::full).max_overlap);
        for (int j = 0; j <= k; ++j) {
            const double n = quad.piece(h, j).l2_norm;
            if (ref == 0.0) ref = n;
            norm_spread = std::max(norm_spread, std::abs(n - ref) / ref);
        }
    }
    double gap2d = 0.0;
    for (int k = 4; k <= 8; ++k) {
        const double h = std::ldexp(1.0, -k);
        // Nyquist N/4 = 2^{k+1} covers 1/h in x1 and the top piece 2^{k+1} in x2.
        const Grid1D axis(2 * pi, std::size_t{1} << (k + 3));
        const auto sum = counterexample::build_sum(h, field::BumpProfile{}, counterexample::Cap::full, axis, axis);
        const auto t = counterexample::measure(sum);
        const auto u = counterexample::assemble_2d(sum);
        const auto hyp = op::fourier_multiplier(op::hyperbolic_multiplier(h), u);
        auto x1x2 = [](const Vec2& x) { return x[0] * x[1]; };
        const double pairs[][2] = {
            {u.value_at_origin().real(), t.origin_value},
            {field::l2_norm(u), t.l2_norm},
            {field::l2_norm(hyp), t.hyperbolic},
            {field::weighted_norm(u, x1x2), t.x1x2},
            {field::weighted_norm(u, [](const Vec2& x) { return x[0] * x[0]; }), t.x1sq},
            // the multiplier is h^2 xi1 xi2 = -h^2 d1 d2, so the signs swap
            {field::l2_norm(hyp + u.multiplied_by(x1x2)), t.kt_minus},
            {field::l2_norm(hyp - u.multiplied_by(x1x2)), t.kt_plus},
        };
        for (const auto& p : pairs) gap2d = std::max(gap2d, std::abs(p[0] - p[1]) / std::abs(p[1]));
    }
    const bool pass = overlap <= 1e-12 && norm_spread <= 1e-10 && gap2d <= 1e-8;
    return {pass, fmt("max overlap=%.2e", overlap) + fmt(", piece norm spread=%.2e", norm_spread) +
                      fmt(", tensor vs 2D=%.2e", gap2d)};
}

// 6. Frequency cutoff defect shows no trend in h.
Outcome cutoff_defect() {
    std::vector<double> x, y;
    double worst = 0.0;
    for (int k = 4; k <= 10; ++k) {
        const double h = std::ldexp(1.0, -k);
        const auto tc = spectral::coherent_torus_cluster(h, 1.0, 4096);
        if (tc.aliased_sampling) return {false, "grid below Nyquist at k=" + std::to_string(k)};
        const double d = op::cutoff_defect(tc.w, op::radial_cutoff(h));
        x.push_back(std::log(h));
        y.push_back(d);
        worst = std::max(worst, d);
    }
    const auto fit = sweep::ordinary_least_squares(x, y);
    return {std::abs(fit.slope) <= 0.05, fmt("max defect=%.2e", worst) + fmt(", slope vs log h=%.2e", fit.slope)};
}

// 7. Rescaling identities converge at second order; scaling maps are isometries.
Outcome rescaling_identities() {
    bool pass = true;
    std::ostringstream os;
    for (const char* kind : {"lemma3", "lemma4", "case2"}) {
        const auto c = cli::rescaling_identity_check(kind);
        pass = pass && c.pass;
        os << kind << " ratio=" << fmt("%.3f", c.ratio) << "; ";
    }
    const Grid2D src(2.0, 256);
    const auto u = GridFunction::sample(src, [](const Vec2& x) {
        return field::cplx(std::exp(-(x - Vec2(0.05, -0.1)).squaredNorm() / 0.08), 0.0);
    });
    const double n = field::l2_norm(u);
    const double a = 0.9273;  // rotation angle of dV(0) = (0.6, 0.8)
    field::Mat2 q;
    q << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    struct Map {
        double s;
        field::Mat2 q;
        double target;
    };
    const Map maps[] = {{0.25, field::Mat2::Identity(), 8.0}, {0.5, field::Mat2::Identity(), 4.0}, {0.3, q, 4.7}};
    double iso = 0.0;
    for (const auto& m : maps)
        iso = std::max(iso, std::abs(field::l2_norm(rescale::scale_function(u, m.s, m.q, Grid2D(m.target, 256))) - n) / n);
    pass = pass && iso <= 1e-6;
    os << "isometry err=" << fmt("%.2e", iso);
    return {pass, os.str()};
}

// 8. Classifier totality, exclusivity and thresholds; full covers.
Outcome classifier() {
    const double h = 1.0 / 256;
    const double sh = std::sqrt(h);
    bool pass = true;
    std::ostringstream os;
    // Verbatim thresholds at and just past equality.
    const double up = 1 + 1e-12;
    pass = pass && rescale::case_conditions(h, 8 * sh, h)[0] && rescale::case_conditions(h, 8 * sh * up, h)[1];
    pass = pass && rescale::case_conditions(0.25, 9 * 0.5, h)[2] && rescale::case_conditions(0.25, 9 * 0.5 * up, h)[3];
    const std::size_t n = 400;
    for (const auto& name : rescale::builtin_potential_names()) {
        const auto v = rescale::builtin_potential(name);
        std::size_t samples = 0, bad = 0;
        std::vector<Vec2> pts;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const Vec2 x(-1 + (i + 0.5) * 2.0 / n, -1 + (j + 0.5) * 2.0 / n);
                if (x.norm() >= 1) continue;
                ++samples;
                pts.push_back(x);
                const double val = std::abs(v.value(x));
                const double b = v.gradient(x).norm();
                const auto c = rescale::case_conditions(val, b, h);
                const int fired = c[0] + c[1] + c[2] + c[3];
                const auto d = rescale::classify_case(v, h, x);
                bool ok = fired == 1 && c[static_cast<std::size_t>(d.case_id - 1)] && d.radius > 0;
                switch (d.case_id) {
                    case 1: ok = ok && d.radius == sh; break;
                    case 2: ok = ok && d.radius == b; break;
                    case 3: ok = ok && std::abs(d.radius - std::sqrt(val) / 40) <= 1e-15; break;
                    case 4:
                        ok = ok && (d.translation - x).norm() <= std::sqrt(val) / 8 &&
                             std::abs(v.value(d.translation)) <= 1e-12 &&
                             std::abs(d.radius - 0.9998 * d.beta_or_c) <= 1e-15;
                        break;
                }
                if (!ok) ++bad;
            }
        const auto cover = rescale::cover_ball(v, h, n);
        // Brute-force membership of every sample in some ball.
        std::size_t outside = 0;
        for (const auto& x : pts) {
            bool in = false;
            for (const auto& b : cover.balls)
                if ((x - b.center).norm() <= b.radius) {
                    in = true;
                    break;
                }
            if (!in) ++outside;
        }
        pass = pass && bad == 0 && cover.uncovered == 0 && outside == 0 && cover.sample_points == samples;
        os << name << ": " << cover.balls.size() << " balls, " << bad << " bad, " << outside << " uncovered; ";
    }
    return {pass, os.str()};
}

// 9. Folded interior eigensolve against dense diagonalization.
Outcome dense_oracle() {
    struct Problem {
        const char* label;
        op::SemiclassicalOperator p;
        double window;
    };
    const auto wavy = MetricField::polynomial(Poly2({{{0, 0}, 1.0}, {{1, 0}, 0.05}, {{0, 2}, 0.03}}),
                                              Poly2::monomial(0.02, 1, 1), Poly2({{{0, 0}, 1.0}, {{0, 1}, -0.04}}));
    const auto well = PotentialField::polynomial(Poly2({{{2, 0}, 1.0}, {{0, 2}, 1.0}, {{0, 0}, -0.6}}));
    std::vector<Problem> problems;
    problems.push_back({"torus N=32", op::SemiclassicalOperator::assemble(0.25, MetricField::identity(), PotentialField::constant(-1),
                                                                         Grid2D(pi, 32), op::Backend::spectral), 0.25});
    problems.push_back({"well N=64", op::SemiclassicalOperator::assemble(0.125, MetricField::identity(), well, Grid2D(2.0, 64),
                                                                        op::Backend::finite_difference), 0.2});
    problems.push_back({"metric N=32", op::SemiclassicalOperator::assemble(0.125, wavy, well, Grid2D(2.0, 32),
                                                                          op::Backend::finite_difference), 0.2});
    bool pass = true;
    std::ostringstream os;
    for (const auto& pr : problems) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pr.p.dense_symmetric(), Eigen::EigenvaluesOnly);
        std::vector<double> dense;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            if (std::abs(es.eigenvalues()[i]) <= pr.window * (1 + 1e-9)) dense.push_back(es.eigenvalues()[i]);
        std::vector<double> folded;
        for (const auto& e : spectral::interior_eigenpairs(pr.p, pr.window)) folded.push_back(e.energy);
        std::sort(folded.begin(), folded.end());
        double gap = 0.0;
        const bool same = folded.size() == dense.size();
        if (same)
            for (std::size_t i = 0; i < dense.size(); ++i) gap = std::max(gap, std::abs(folded[i] - dense[i]));
        pass = pass && same && gap <= 1e-9 && !dense.empty();
        os << pr.label << ": " << folded.size() << "/" << dense.size() << " eigenvalues, max diff " << fmt("%.1e", gap) << "; ";
    }
    return {pass, os.str()};
}

}  // namespace

int main() {
    criterion(1, "sup-norm law (torus clusters)", sup_norm_law);
    criterion(2, "harmonic oscillator saturation", harmonic_saturation);
    criterion(3, "counterexample origin value", origin_value);
    criterion(4, "counterexample residuals", residual_bounds);
    criterion(5, "orthogonality and Plancherel", orthogonality_plancherel);
    criterion(6, "frequency cutoff defect", cutoff_defect);
    criterion(7, "rescaling identities", rescaling_identities);
    criterion(8, "classifier and cover", classifier);
    criterion(9, "eigensolver dense oracle", dense_oracle);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

#include "doctest.h"

#include "qlab/error.hpp"
#include "qlab/sweep.hpp"

#include <cmath>
#include <limits>

using namespace qlab;
using namespace qlab::sweep;

namespace {

std::vector<ScalingRecord> synthetic(int k_min, int k_max, double (*sup)(double)) {
    std::vector<ScalingRecord> out;
    for (double h : dyadic_h(k_min, k_max)) {
        ScalingRecord r;
        r.h = h;
        r.l2_norm = 1.0;
        r.sup_norm = sup(h);
        r.certified = true;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_CASE("ordinary least squares") {
    // Reference values from an independent statistics package.
    const auto f = ordinary_least_squares({1, 2, 3, 4, 5, 6}, {1.0, 2.0, 1.3, 3.75, 2.25, 4.1});
    CHECK(f.slope == doctest::Approx(0.5342857142857143).epsilon(1e-13));
    CHECK(f.stderr_slope == doctest::Approx(0.20940147944042023).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(0.53).epsilon(1e-12));
    CHECK(f.t_statistic == doctest::Approx(2.551489682467747).epsilon(1e-12));
    CHECK(f.p_value == doctest::Approx(0.06320549122927462).epsilon(1e-9));
    CHECK(f.points == 6);

    const auto exact = ordinary_least_squares({0, 1, 2, 3}, {1, 4, 7, 10});
    CHECK(exact.slope == doctest::Approx(3.0));
    CHECK(std::isinf(exact.t_statistic));
    CHECK(exact.p_value == 0.0);

    CHECK_THROWS_AS(ordinary_least_squares({1, 2}, {1, 2}), PreconditionError);
    CHECK_THROWS_AS(ordinary_least_squares({1, 1, 1}, {1, 2, 3}), PreconditionError);
}

TEST_CASE("synthetic exponent fits") {
    const auto pure = fit_exponent(synthetic(4, 12, [](double h) { return std::pow(h, -0.5); }));
    CHECK(std::abs(pure.slope + 0.5) <= 1e-12);
    const auto logged = fit_exponent(synthetic(6, 16, [](double h) { return std::pow(h, -0.5) * std::sqrt(std::log(1 / h)); }));
    // Fit of the model itself (independent numpy polyfit): the log factor steepens the slope.
    CHECK(logged.slope == doctest::Approx(-0.5691793581636453).epsilon(1e-12));
    const auto flat = fit_exponent(synthetic(4, 12, [](double) { return 3.0; }));
    CHECK(std::abs(flat.slope) <= 1e-14);

    const auto lf = test_log_factor(synthetic(4, 12, [](double h) { return 2 * std::pow(h, -0.5); }));
    CHECK(std::abs(lf.slope) <= 1e-12);
    const auto lf2 = test_log_factor(synthetic(6, 16, [](double h) { return std::pow(h, -0.5) * std::sqrt(std::log(1 / h)); }));
    CHECK(lf2.slope == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(fit_exponent(synthetic(4, 7, [](double) { return 1.0; })), PreconditionError);
    CHECK_THROWS_AS(fit_exponent(synthetic(4, 10, [](double) { return 0.0; })), PreconditionError);
}

TEST_CASE("dyadic h and sweep preconditions") {
    const auto hs = dyadic_h(2, 5);
    CHECK(hs == std::vector<double>{0.25, 0.125, 0.0625, 0.03125});
    CHECK(is_experiment("torus-cluster"));
    CHECK_FALSE(is_experiment("bogus"));
    CHECK(experiment_names().size() == 5);
    CHECK_THROWS_AS(run_sweep("bogus", hs), PreconditionError);
    CHECK_THROWS_AS(run_sweep("torus-cluster", {0.0625, 0.125}), PreconditionError);
    CHECK_THROWS_AS(run_sweep("torus-cluster", {0.5}), PreconditionError);
}

TEST_CASE("torus cluster records") {
    const auto r = build_record("torus-cluster", 1.0 / 16);
    CHECK(r.certified);
    CHECK(r.residual_l2 <= r.h);
    CHECK(r.l2_norm == doctest::Approx(1.0).epsilon(1e-12));
    const double m = r.extra.at("cluster_dim");
    CHECK(r.sup_norm == doctest::Approx(std::sqrt(m) / (2 * 3.141592653589793)).epsilon(1e-12));
}

TEST_CASE("sweeps are deterministic across worker counts") {
    SweepConfig one, three;
    three.workers = 3;
    const auto hs = dyadic_h(4, 9);
    const auto a = run_sweep("torus-cluster", hs, one);
    const auto b = run_sweep("torus-cluster", hs, three);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].h == b.records[i].h);
        CHECK(a.records[i].sup_norm == b.records[i].sup_norm);
        CHECK(a.records[i].residual_l2 == b.records[i].residual_l2);
        CHECK(a.records[i].extra == b.records[i].extra);
    }
    REQUIRE(a.exponent.has_value());
    CHECK(a.exponent->slope == b.exponent->slope);
    CHECK(a.verdict == b.verdict);
}

TEST_CASE("hyperbolic counterexample sweep is log-corrected") {
    const auto rep = run_sweep("hyperbolic-counterexample", dyadic_h(6, 16));
    CHECK(rep.failures == 0);
    CHECK(rep.uncertified == 0);
    REQUIRE(rep.log_factor.has_value());
    CHECK(rep.log_factor->slope > 0);
    CHECK(rep.log_factor->p_value < 0.01);
    CHECK(rep.log_factor->t_statistic > 10);
    REQUIRE(rep.log_exponent.has_value());
    CHECK(rep.log_exponent->slope == doctest::Approx(1.0).epsilon(0.2));
    CHECK(rep.verdict == "log-corrected");
    for (const auto& r : rep.records) {
        CHECK(r.residual_l2 <= r.h);
        CHECK(r.l2_norm <= 1.0);
    }
}

TEST_CASE("separable clusters") {
    // V = -1 along x1 only: the flat torus in disguise.
    const auto flat = separable_cluster(1.0 / 16, Trig1D{-1.0, 0, 0}, Trig1D{}, 1.0);
    const auto torus = build_record("torus-cluster", 1.0 / 16);
    CHECK(flat.extra.at("cluster_dim") == torus.extra.at("cluster_dim"));
    CHECK(flat.sup_norm == doctest::Approx(torus.sup_norm).epsilon(1e-10));
    CHECK(flat.certified);

    const auto e = build_record("elliptic", 1.0 / 32);
    CHECK(e.certified);
    CHECK(e.l2_norm == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(e.residual_l2 <= e.h);
    const auto again = build_record("elliptic", 1.0 / 32);
    CHECK(again.sup_norm == e.sup_norm);
    CHECK_THROWS_AS(separable_cluster(0.5, Trig1D{}, Trig1D{}, 1.0), PreconditionError);
}

TEST_CASE("harmonic ground state record") {
    SweepConfig cfg;
    cfg.grid = 128;
    const auto r = build_record("harmonic-ground", 1.0 / 8, cfg);
    CHECK(r.certified);
    CHECK(r.extra.at("energy") == doctest::Approx(2.0 / 8).epsilon(0.01));
    CHECK(r.extra.at("sup_times_sqrt_pi_h") == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("failures are recorded per h") {
    // 1/h^2 = 21.5 lies between the lattice values 20 and 25, so a tiny annulus is empty.
    SweepConfig cfg;
    cfg.cluster_width = 1e-6;
    const auto rep = run_sweep("torus-cluster", {1 / std::sqrt(21.5)}, cfg);
    REQUIRE(rep.records.size() == 1);
    CHECK(rep.failures == 1);
    CHECK(rep.records[0].failure.has_value());
    CHECK_FALSE(rep.exponent.has_value());
    CHECK(rep.verdict == "undetermined");
}

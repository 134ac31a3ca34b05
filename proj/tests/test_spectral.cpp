#include "doctest.h"

#include "qlab/error.hpp"
#include "qlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace qlab;
using namespace qlab::field;
using namespace qlab::op;
using namespace qlab::spectral;

namespace {

constexpr double pi = std::numbers::pi;

// Brute-force lattice annulus: |h^2 |k|^2 - 1| <= C h.
std::vector<std::pair<long, long>> enumerate_annulus(double h, double c) {
    std::vector<std::pair<long, long>> out;
    const long r = static_cast<long>(std::ceil(std::sqrt((1 + c * h) / (h * h)))) + 1;
    for (long a = -r; a <= r; ++a)
        for (long b = -r; b <= r; ++b)
            if (std::abs(h * h * static_cast<double>(a * a + b * b) - 1.0) <= c * h * (1 + 1e-12)) out.emplace_back(a, b);
    return out;
}

SemiclassicalOperator torus_operator(double h, std::size_t n) {
    return SemiclassicalOperator::assemble(h, MetricField::identity(), PotentialField::constant(-1.0), Grid2D(pi, n),
                                           Backend::spectral);
}

}  // namespace

TEST_CASE("elliptic potential has no spectrum near zero") {
    const auto p = SemiclassicalOperator::assemble(0.125, MetricField::identity(), PotentialField::constant(1.0), Grid2D(2.0, 32),
                                                   Backend::finite_difference);
    CHECK(interior_eigenpairs(p, 0.125).empty());
}

TEST_CASE("flat torus eigenvalues match lattice enumeration") {
    const double h = 0.25;
    const auto p = torus_operator(h, 32);
    const auto pairs = interior_eigenpairs(p, h);
    const auto modes = enumerate_annulus(h, 1.0);
    REQUIRE(pairs.size() == modes.size());
    std::vector<double> got, want;
    for (const auto& e : pairs) got.push_back(e.energy);
    for (const auto& [a, b] : modes) want.push_back(h * h * static_cast<double>(a * a + b * b) - 1.0);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-9);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].residual <= 1e-8);
        for (std::size_t j = 0; j < pairs.size(); ++j) {
            const double ip = std::abs(inner_product(pairs[i].function, pairs[j].function));
            CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) <= 1e-8);
        }
    }
    CHECK(torus_annulus_modes(h, 1.0) == modes);
    CHECK(estimate_eigenvalue_count(p, -h, h) == doctest::Approx(static_cast<double>(modes.size())).epsilon(0.35));
}

TEST_CASE("window cap and errors") {
    const auto p = torus_operator(0.25, 32);
    EigensolveOptions opts;
    opts.max_count = 4;
    CHECK_THROWS_AS(interior_eigenpairs(p, 0.25, opts), TooManyEigenvalues);
    CHECK_THROWS_AS(interior_eigenpairs(p, -1.0), PreconditionError);
}

TEST_CASE("harmonic oscillator ground state") {
    const double h = 1.0 / 8;
    const auto v = PotentialField::polynomial(Poly2({{{2, 0}, 1.0}, {{0, 2}, 1.0}, {{0, 0}, -2 * h}}));
    const auto p = SemiclassicalOperator::assemble(h, MetricField::identity(), v, Grid2D(2.0, 128), Backend::finite_difference);
    const auto pairs = interior_eigenpairs(p, h);
    REQUIRE(pairs.size() == 1);
    CHECK(std::abs(pairs[0].energy) <= 0.01 * h);
    const auto phi = GridFunction::sample(p.grid(), [h](const Vec2& x) {
        return cplx(std::exp(-x.squaredNorm() / (2 * h)) / std::sqrt(pi * h), 0.0);
    });
    CHECK(std::abs(inner_product(pairs[0].function, phi)) >= 0.999);
}

TEST_CASE("cluster construction") {
    const double h = 0.25;
    const auto p = torus_operator(h, 32);
    const auto pairs = interior_eigenpairs(p, h);
    const std::size_t m = pairs.size();

    SUBCASE("single pair") {
        const auto b = build_cluster(h, 1.0, {pairs[0]}, {cplx(1.0, 0.0)});
        CHECK(l2_norm(b.w - pairs[0].function) == 0.0);
    }
    SUBCASE("coefficient norm above one") {
        std::vector<cplx> c(m, cplx(1.0, 0.0));
        CHECK_THROWS_AS(build_cluster(h, 1.0, pairs, c), PreconditionError);
    }
    SUBCASE("random coefficients stay quasimodes and below the coherent bound") {
        // |w(x)| <= (sum_j |w_j(x)|^2)^{1/2} by Cauchy-Schwarz, maximal at the spectral peak.
        const auto [i1, i2] = spectral_function_peak(pairs);
        double peak = 0.0;
        for (const auto& e : pairs) peak += std::norm(e.function(i1, i2));
        const double bound = std::sqrt(peak);
        const auto coherent = build_cluster(h, 1.0, pairs, coherent_coefficients(pairs, i1, i2));
        CHECK(sup_norm(coherent.w) == doctest::Approx(bound).epsilon(1e-10));
        std::mt19937_64 rng(42);
        std::normal_distribution<double> n;
        for (int draw = 0; draw < 50; ++draw) {
            std::vector<cplx> c(m);
            double s = 0.0;
            for (auto& z : c) {
                z = cplx(n(rng), n(rng));
                s += std::norm(z);
            }
            for (auto& z : c) z /= std::sqrt(s);
            const auto b = build_cluster(h, 1.0, pairs, c);
            const auto r = residual(p, b.w);
            CHECK(r.res_l2 <= h * (1 + 1e-6));
            CHECK(r.u_l2 == doctest::Approx(1.0).epsilon(1e-8));
            CHECK(sup_norm(b.w) <= bound * (1 + 1e-12));
        }
    }
}

TEST_CASE("coherent torus cluster") {
    const double h = 0.25;
    const auto tc = coherent_torus_cluster(h, 1.0);
    CHECK(tc.modes == enumerate_annulus(h, 1.0));
    const double m = static_cast<double>(tc.modes.size());
    CHECK(tc.w.value_at_origin().real() * 2 * pi == doctest::Approx(std::sqrt(m)).epsilon(1e-12));
    CHECK(tc.l2_norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(tc.aliased_sampling);
    CHECK(l2_norm(tc.w) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tc.residual_l2 <= h);
    CHECK(sup_norm(tc.w) == doctest::Approx(std::sqrt(m) / (2 * pi)).epsilon(1e-12));
    // Residual from the coefficients agrees with the spectral operator on the grid.
    const auto p = torus_operator(h, tc.w.grid().points_per_dim());
    CHECK(residual(p, tc.w).res_l2 == doctest::Approx(tc.residual_l2).epsilon(1e-10));
    // h in a spectral gap of the lattice: with a tiny width there are no modes.
    CHECK_THROWS_AS(coherent_torus_cluster(1.0 / std::sqrt(3.0), 1e-3), PreconditionError);
}

#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qlab::field {

using cplx = std::complex<double>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

bool is_power_of_two(std::size_t n);

/// Uniform periodic grid on [-L, L) with N points; x_n = -L + n*dx.
/// N even, so the origin is the sample n = N/2.
class Grid1D {
public:
    Grid1D(double half_width, std::size_t points);

    double half_width() const { return half_width_; }
    std::size_t points() const { return points_; }
    double spacing() const { return spacing_; }
    double coordinate(std::size_t n) const { return -half_width_ + static_cast<double>(n) * spacing_; }
    std::size_t origin_index() const { return points_ / 2; }
    /// Step of the dual frequency lattice, pi / L.
    double frequency_step() const;
    /// Largest |xi| representable without aliasing, pi / dx.
    double nyquist() const;

    bool operator==(const Grid1D&) const = default;

private:
    double half_width_;
    std::size_t points_;
    double spacing_;
};

/// Tensor square of a Grid1D: the box [-L, L)^2, periodic in both directions.
class Grid2D {
public:
    Grid2D(double half_width, std::size_t points_per_dim);

    double half_width() const { return axis_.half_width(); }
    std::size_t points_per_dim() const { return axis_.points(); }
    std::size_t size() const { return axis_.points() * axis_.points(); }
    double spacing() const { return axis_.spacing(); }
    double cell_area() const { return spacing() * spacing(); }
    const Grid1D& axis() const { return axis_; }

    std::size_t index(std::size_t i1, std::size_t i2) const { return i1 * points_per_dim() + i2; }
    Vec2 point(std::size_t i1, std::size_t i2) const {
        return {axis_.coordinate(i1), axis_.coordinate(i2)};
    }
    /// Wave vector (xi_1, xi_2) attached to DFT slot (k1, k2).
    Vec2 wave_vector(std::size_t k1, std::size_t k2) const;

    bool operator==(const Grid2D&) const = default;

private:
    Grid1D axis_;
};

/// Complex samples of a function on a Grid2D.
class GridFunction {
public:
    explicit GridFunction(Grid2D grid);
    GridFunction(Grid2D grid, std::vector<cplx> values);

    static GridFunction sample(const Grid2D& grid, const std::function<cplx(const Vec2&)>& f);

    const Grid2D& grid() const { return grid_; }
    std::span<const cplx> values() const { return values_; }
    std::span<cplx> values() { return values_; }
    cplx& operator()(std::size_t i1, std::size_t i2) { return values_[grid_.index(i1, i2)]; }
    cplx operator()(std::size_t i1, std::size_t i2) const { return values_[grid_.index(i1, i2)]; }
    cplx value_at_origin() const;

    GridFunction& operator+=(const GridFunction& other);
    GridFunction& operator-=(const GridFunction& other);
    GridFunction& operator*=(cplx scale);
    void axpy(cplx a, const GridFunction& x);

    /// Pointwise product with a real coefficient function.
    GridFunction multiplied_by(const std::function<double(const Vec2&)>& w) const;

private:
    Grid2D grid_;
    std::vector<cplx> values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(cplx s, GridFunction a);

void require_same_grid(const Grid2D& a, const Grid2D& b, const char* where);

/// Midpoint-rule L^2 norm.
double l2_norm(const GridFunction& u);
/// L^2 norm from the DFT via the discrete Plancherel identity.
double plancherel_l2_norm(const GridFunction& u);
/// L^2 norm restricted to the disk |x - center| < radius.
double l2_norm_in_disk(const GridFunction& u, const Vec2& center, double radius);

enum class SupMode { samples, refined };

struct SupLocation {
    double value;
    Vec2 point;
};

/// Max of |u| over the samples. The continuum sup is at least this large;
/// `refined` adds a separable quadratic fit around the arg-max.
SupLocation sup_location(const GridFunction& u, SupMode mode = SupMode::samples);
double sup_norm(const GridFunction& u, SupMode mode = SupMode::samples);

/// <u, v> = integral of u * conj(v).
cplx inner_product(const GridFunction& u, const GridFunction& v);
double weighted_norm(const GridFunction& u, const std::function<double(const Vec2&)>& w);

// ---------------------------------------------------------------------------
// Coefficient fields
// ---------------------------------------------------------------------------

/// Polynomial in (x1, x2) with exact partial derivatives.
class Poly2 {
public:
    using Exponent = std::pair<int, int>;

    Poly2() = default;
    explicit Poly2(std::map<Exponent, double> coefficients);
    static Poly2 constant(double c);
    static Poly2 monomial(double c, int a1, int a2);

    double operator()(const Vec2& x) const;
    Poly2 derivative(int a1, int a2) const;
    Poly2 operator+(const Poly2& other) const;
    Poly2 scaled(double s) const;
    const std::map<Exponent, double>& coefficients() const { return coefficients_; }
    std::string to_string() const;

private:
    std::map<Exponent, double> coefficients_;
};

/// Real potential V with gradient and Hessian; optionally all partials.
class PotentialField {
public:
    using Scalar = std::function<double(const Vec2&)>;
    using Gradient = std::function<Vec2(const Vec2&)>;
    using Hessian = std::function<Mat2(const Vec2&)>;
    using Partial = std::function<double(const Vec2&, int, int)>;

    PotentialField(Scalar v, Gradient grad, Hessian hess, Partial partial = {},
                   std::string description = "custom");

    static PotentialField constant(double c);
    static PotentialField polynomial(const Poly2& p);

    double value(const Vec2& x) const { return v_(x); }
    Vec2 gradient(const Vec2& x) const { return grad_(x); }
    Mat2 hessian(const Vec2& x) const { return hess_(x); }
    /// d^{a1}_{x1} d^{a2}_{x2} V; orders above two need a partial callable.
    std::optional<double> partial(const Vec2& x, int a1, int a2) const;
    bool has_all_partials() const { return static_cast<bool>(partial_); }
    const std::string& description() const { return description_; }

    PotentialField plus_constant(double c) const;
    PotentialField scaled(double s) const;

private:
    Scalar v_;
    Gradient grad_;
    Hessian hess_;
    Partial partial_;
    std::string description_;
};

/// Inverse metric g^{ij}(x) and its first derivatives.
class MetricField {
public:
    using Inverse = std::function<Mat2(const Vec2&)>;
    using InverseGradient = std::function<std::array<Mat2, 2>(const Vec2&)>;
    using Partial = std::function<Mat2(const Vec2&, int, int)>;

    MetricField(Inverse inverse, InverseGradient gradient, Partial partial = {},
                std::string description = "custom", bool constant = false);

    static MetricField identity();
    static MetricField constant(const Mat2& inverse);
    /// g^{11} = p11, g^{12} = g^{21} = p12, g^{22} = p22.
    static MetricField polynomial(const Poly2& p11, const Poly2& p12, const Poly2& p22);

    Mat2 inverse(const Vec2& x) const { return inverse_(x); }
    std::array<Mat2, 2> inverse_gradient(const Vec2& x) const { return gradient_(x); }
    std::optional<Mat2> partial(const Vec2& x, int a1, int a2) const;
    bool has_all_partials() const { return static_cast<bool>(partial_); }
    /// sqrt(det g_ij) = det(g^{ij})^{-1/2}.
    double sqrt_det(const Vec2& x) const;
    bool is_constant() const { return constant_; }
    const std::string& description() const { return description_; }

    /// Smallest eigenvalue of g^{ij} over the grid points.
    double min_eigenvalue_on(const Grid2D& grid) const;

private:
    Inverse inverse_;
    InverseGradient gradient_;
    Partial partial_;
    std::string description_;
    bool constant_;
};

// ---------------------------------------------------------------------------
// Bump profiles psi (support [1, 2]) and chi (support [-1, 1])
// ---------------------------------------------------------------------------

struct Interval {
    double lo, hi;
};

/// The fixed pair of 1D profiles used by the hyperbolic counterexample.
///   psi(t) = c * exp(-1 / (1 - (2t - 3)^2)) on (1, 2), normalized to unit mass;
///   chi(t) = s(1 - |t|) with s the exp(-1/t) smooth step.
/// chi has unit mass, chi(0) = 1, and its integer translates sum to one.
class BumpProfile {
public:
    BumpProfile();

    double psi(double t) const;
    double psi_d1(double t) const;
    double psi_d2(double t) const;
    double chi(double t) const;
    double chi_d1(double t) const;
    double chi_d2(double t) const;

    Interval psi_support() const { return {1.0, 2.0}; }
    Interval chi_support() const { return {-1.0, 1.0}; }
    double psi_scale() const { return psi_scale_; }
    /// Half width of the region where chi == 1; the unit-mass constraint forces 0.
    double chi_plateau() const { return 0.0; }

    /// Samples f(m * step) for every lattice point m*step in the support.
    struct Samples {
        double step;
        long first_index;
        std::vector<double> values;
        double discrete_integral() const;
    };
    Samples sample_psi(double step) const;
    Samples sample_chi(double step) const;

private:
    double psi_scale_;
};

/// Smooth step s(t): 0 for t <= 0, 1 for t >= 1, s(t) + s(1 - t) = 1.
double smooth_step(double t);
double smooth_step_d1(double t);
double smooth_step_d2(double t);

}  // namespace qlab::field

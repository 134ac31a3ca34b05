#include "qlab/field.hpp"

#include "qlab/error.hpp"
#include "qlab/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace qlab::field {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

Grid1D::Grid1D(double half_width, std::size_t points)
    : half_width_(half_width), points_(points), spacing_(2.0 * half_width / static_cast<double>(points)) {
    if (!(half_width > 0.0)) throw PreconditionError("Grid1D: half_width must be positive");
    if (!is_power_of_two(points) || points < 2)
        throw PreconditionError("Grid1D: points must be a power of two >= 2");
}

double Grid1D::frequency_step() const { return std::numbers::pi / half_width_; }
double Grid1D::nyquist() const { return std::numbers::pi / spacing_; }

Grid2D::Grid2D(double half_width, std::size_t points_per_dim) : axis_(half_width, points_per_dim) {}

Vec2 Grid2D::wave_vector(std::size_t k1, std::size_t k2) const {
    const double step = axis_.frequency_step();
    const std::size_t n = points_per_dim();
    return {step * static_cast<double>(fft::signed_index(k1, n)),
            step * static_cast<double>(fft::signed_index(k2, n))};
}

void require_same_grid(const Grid2D& a, const Grid2D& b, const char* where) {
    if (!(a == b)) throw GridMismatch(std::string(where) + ": grid mismatch");
}

// ---------------------------------------------------------------------------
// GridFunction
// ---------------------------------------------------------------------------

GridFunction::GridFunction(Grid2D grid) : grid_(grid), values_(grid.size(), cplx{0.0, 0.0}) {}

GridFunction::GridFunction(Grid2D grid, std::vector<cplx> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw GridMismatch("GridFunction: value count does not match grid");
}

GridFunction GridFunction::sample(const Grid2D& grid, const std::function<cplx(const Vec2&)>& f) {
    GridFunction u(grid);
    const std::size_t n = grid.points_per_dim();
    for (std::size_t i1 = 0; i1 < n; ++i1)
        for (std::size_t i2 = 0; i2 < n; ++i2) u(i1, i2) = f(grid.point(i1, i2));
    return u;
}

cplx GridFunction::value_at_origin() const {
    const std::size_t c = grid_.axis().origin_index();
    return (*this)(c, c);
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
    require_same_grid(grid_, other.grid_, "GridFunction::+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
    require_same_grid(grid_, other.grid_, "GridFunction::-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

GridFunction& GridFunction::operator*=(cplx scale) {
    for (auto& v : values_) v *= scale;
    return *this;
}

void GridFunction::axpy(cplx a, const GridFunction& x) {
    require_same_grid(grid_, x.grid_, "GridFunction::axpy");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
}

GridFunction GridFunction::multiplied_by(const std::function<double(const Vec2&)>& w) const {
    GridFunction out(grid_);
    const std::size_t n = grid_.points_per_dim();
    for (std::size_t i1 = 0; i1 < n; ++i1)
        for (std::size_t i2 = 0; i2 < n; ++i2) out(i1, i2) = w(grid_.point(i1, i2)) * (*this)(i1, i2);
    return out;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(cplx s, GridFunction a) { return a *= s; }

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

double l2_norm(const GridFunction& u) {
    double acc = 0.0;
    for (const auto& v : u.values()) acc += std::norm(v);
    return std::sqrt(acc * u.grid().cell_area());
}

double plancherel_l2_norm(const GridFunction& u) {
    std::vector<cplx> spectrum(u.values().begin(), u.values().end());
    const std::size_t n = u.grid().points_per_dim();
    fft::transform_2d(spectrum, n, fft::Direction::forward);
    double acc = 0.0;
    for (const auto& v : spectrum) acc += std::norm(v);
    const double count = static_cast<double>(u.grid().size());
    return std::sqrt(acc * u.grid().cell_area() / count);
}

double l2_norm_in_disk(const GridFunction& u, const Vec2& center, double radius) {
    const auto& grid = u.grid();
    const std::size_t n = grid.points_per_dim();
    double acc = 0.0;
    for (std::size_t i1 = 0; i1 < n; ++i1)
        for (std::size_t i2 = 0; i2 < n; ++i2)
            if ((grid.point(i1, i2) - center).norm() < radius) acc += std::norm(u(i1, i2));
    return std::sqrt(acc * grid.cell_area());
}

SupLocation sup_location(const GridFunction& u, SupMode mode) {
    const auto& grid = u.grid();
    const std::size_t n = grid.points_per_dim();
    std::size_t best = 0;
    double best_value = -1.0;
    const auto vals = u.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double a = std::abs(vals[i]);
        if (a > best_value) {
            best_value = a;
            best = i;
        }
    }
    const std::size_t b1 = best / n;
    const std::size_t b2 = best % n;
    SupLocation loc{best_value, grid.point(b1, b2)};
    if (mode == SupMode::samples) return loc;

    // Separable parabola through the three samples on each axis.
    auto at = [&](long i1, long i2) {
        const long nn = static_cast<long>(n);
        return std::abs(u(static_cast<std::size_t>((i1 + nn) % nn), static_cast<std::size_t>((i2 + nn) % nn)));
    };
    const long c1 = static_cast<long>(b1);
    const long c2 = static_cast<long>(b2);
    double lift = 0.0;
    Vec2 offset = Vec2::Zero();
    for (int axis = 0; axis < 2; ++axis) {
        const double fm = axis == 0 ? at(c1 - 1, c2) : at(c1, c2 - 1);
        const double fp = axis == 0 ? at(c1 + 1, c2) : at(c1, c2 + 1);
        const double curvature = fm - 2.0 * best_value + fp;
        if (curvature >= 0.0) continue;
        lift += -(fm - fp) * (fm - fp) / (8.0 * curvature);
        offset[axis] = grid.spacing() * (fm - fp) / (2.0 * curvature);
    }
    loc.value = best_value + std::max(lift, 0.0);
    loc.point += offset;
    return loc;
}

double sup_norm(const GridFunction& u, SupMode mode) { return sup_location(u, mode).value; }

cplx inner_product(const GridFunction& u, const GridFunction& v) {
    require_same_grid(u.grid(), v.grid(), "inner_product");
    cplx acc{0.0, 0.0};
    const auto a = u.values();
    const auto b = v.values();
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * std::conj(b[i]);
    return acc * u.grid().cell_area();
}

double weighted_norm(const GridFunction& u, const std::function<double(const Vec2&)>& w) {
    return l2_norm(u.multiplied_by(w));
}

// ---------------------------------------------------------------------------
// Poly2
// ---------------------------------------------------------------------------

Poly2::Poly2(std::map<Exponent, double> coefficients) : coefficients_(std::move(coefficients)) {
    std::erase_if(coefficients_, [](const auto& kv) { return kv.second == 0.0; });
}

Poly2 Poly2::constant(double c) { return Poly2({{{0, 0}, c}}); }
Poly2 Poly2::monomial(double c, int a1, int a2) { return Poly2({{{a1, a2}, c}}); }

double Poly2::operator()(const Vec2& x) const {
    double acc = 0.0;
    for (const auto& [e, c] : coefficients_) acc += c * std::pow(x[0], e.first) * std::pow(x[1], e.second);
    return acc;
}

Poly2 Poly2::derivative(int a1, int a2) const {
    std::map<Exponent, double> out;
    for (const auto& [e, c] : coefficients_) {
        if (e.first < a1 || e.second < a2) continue;
        double factor = c;
        for (int k = 0; k < a1; ++k) factor *= e.first - k;
        for (int k = 0; k < a2; ++k) factor *= e.second - k;
        out[{e.first - a1, e.second - a2}] += factor;
    }
    return Poly2(std::move(out));
}

Poly2 Poly2::operator+(const Poly2& other) const {
    auto out = coefficients_;
    for (const auto& [e, c] : other.coefficients_) out[e] += c;
    return Poly2(std::move(out));
}

Poly2 Poly2::scaled(double s) const {
    auto out = coefficients_;
    for (auto& kv : out) kv.second *= s;
    return Poly2(std::move(out));
}

std::string Poly2::to_string() const {
    if (coefficients_.empty()) return "0";
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [e, c] : coefficients_) {
        if (!first) os << " + ";
        first = false;
        os << c;
        if (e.first > 0) os << "*x1^" << e.first;
        if (e.second > 0) os << "*x2^" << e.second;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// PotentialField
// ---------------------------------------------------------------------------

PotentialField::PotentialField(Scalar v, Gradient grad, Hessian hess, Partial partial, std::string description)
    : v_(std::move(v)),
      grad_(std::move(grad)),
      hess_(std::move(hess)),
      partial_(std::move(partial)),
      description_(std::move(description)) {}

PotentialField PotentialField::constant(double c) {
    std::ostringstream os;
    os.precision(17);
    os << c;
    return PotentialField(
        [c](const Vec2&) { return c; }, [](const Vec2&) { return Vec2(Vec2::Zero()); },
        [](const Vec2&) { return Mat2(Mat2::Zero()); },
        [c](const Vec2&, int a1, int a2) { return a1 == 0 && a2 == 0 ? c : 0.0; }, os.str());
}

PotentialField PotentialField::polynomial(const Poly2& p) {
    const Poly2 d1 = p.derivative(1, 0), d2 = p.derivative(0, 1);
    const Poly2 d11 = p.derivative(2, 0), d12 = p.derivative(1, 1), d22 = p.derivative(0, 2);
    return PotentialField([p](const Vec2& x) { return p(x); },
                          [d1, d2](const Vec2& x) { return Vec2(d1(x), d2(x)); },
                          [d11, d12, d22](const Vec2& x) {
                              Mat2 m;
                              m << d11(x), d12(x), d12(x), d22(x);
                              return m;
                          },
                          [p](const Vec2& x, int a1, int a2) { return p.derivative(a1, a2)(x); }, p.to_string());
}

std::optional<double> PotentialField::partial(const Vec2& x, int a1, int a2) const {
    if (partial_) return partial_(x, a1, a2);
    const int order = a1 + a2;
    if (order == 0) return value(x);
    if (order == 1) return gradient(x)[a1 == 1 ? 0 : 1];
    if (order == 2) {
        const Mat2 h = hessian(x);
        if (a1 == 2) return h(0, 0);
        if (a2 == 2) return h(1, 1);
        return h(0, 1);
    }
    return std::nullopt;
}

PotentialField PotentialField::plus_constant(double c) const {
    auto self = *this;
    Partial partial;
    if (partial_)
        partial = [p = partial_, c](const Vec2& x, int a1, int a2) {
            return p(x, a1, a2) + (a1 == 0 && a2 == 0 ? c : 0.0);
        };
    std::ostringstream os;
    os.precision(17);
    os << "(" << description_ << ") + " << c;
    return PotentialField([v = v_, c](const Vec2& x) { return v(x) + c; }, grad_, hess_, partial, os.str());
}

PotentialField PotentialField::scaled(double s) const {
    Partial partial;
    if (partial_) partial = [p = partial_, s](const Vec2& x, int a1, int a2) { return s * p(x, a1, a2); };
    std::ostringstream os;
    os.precision(17);
    os << s << " * (" << description_ << ")";
    return PotentialField([v = v_, s](const Vec2& x) { return s * v(x); },
                          [g = grad_, s](const Vec2& x) { return Vec2(s * g(x)); },
                          [h = hess_, s](const Vec2& x) { return Mat2(s * h(x)); }, partial, os.str());
}

// ---------------------------------------------------------------------------
// MetricField
// ---------------------------------------------------------------------------

MetricField::MetricField(Inverse inverse, InverseGradient gradient, Partial partial, std::string description,
                         bool constant)
    : inverse_(std::move(inverse)),
      gradient_(std::move(gradient)),
      partial_(std::move(partial)),
      description_(std::move(description)),
      constant_(constant) {}

MetricField MetricField::identity() {
    auto m = constant(Mat2::Identity());
    m.description_ = "identity";
    return m;
}

MetricField MetricField::constant(const Mat2& inverse) {
    std::ostringstream os;
    os.precision(17);
    os << "constant [" << inverse(0, 0) << ", " << inverse(0, 1) << "; " << inverse(1, 0) << ", " << inverse(1, 1)
       << "]";
    return MetricField(
        [inverse](const Vec2&) { return inverse; },
        [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; },
        [inverse](const Vec2&, int a1, int a2) { return a1 == 0 && a2 == 0 ? inverse : Mat2(Mat2::Zero()); },
        os.str(), true);
}

MetricField MetricField::polynomial(const Poly2& p11, const Poly2& p12, const Poly2& p22) {
    auto build = [](const Poly2& a, const Poly2& b, const Poly2& c, const Vec2& x) {
        Mat2 m;
        m << a(x), b(x), b(x), c(x);
        return m;
    };
    const bool is_const = [&] {
        for (const Poly2* p : {&p11, &p12, &p22})
            for (const auto& kv : p->coefficients())
                if (kv.first != Poly2::Exponent{0, 0}) return false;
        return true;
    }();
    return MetricField(
        [=](const Vec2& x) { return build(p11, p12, p22, x); },
        [=, d11 = p11.derivative(1, 0), d12 = p12.derivative(1, 0), d22 = p22.derivative(1, 0),
         e11 = p11.derivative(0, 1), e12 = p12.derivative(0, 1), e22 = p22.derivative(0, 1)](const Vec2& x) {
            return std::array<Mat2, 2>{build(d11, d12, d22, x), build(e11, e12, e22, x)};
        },
        [=](const Vec2& x, int a1, int a2) {
            return build(p11.derivative(a1, a2), p12.derivative(a1, a2), p22.derivative(a1, a2), x);
        },
        "g11 = " + p11.to_string() + "; g12 = " + p12.to_string() + "; g22 = " + p22.to_string(), is_const);
}

std::optional<Mat2> MetricField::partial(const Vec2& x, int a1, int a2) const {
    if (partial_) return partial_(x, a1, a2);
    if (a1 + a2 == 0) return inverse(x);
    if (a1 + a2 == 1) return inverse_gradient(x)[a1 == 1 ? 0 : 1];
    return std::nullopt;
}

double MetricField::sqrt_det(const Vec2& x) const { return 1.0 / std::sqrt(inverse(x).determinant()); }

double MetricField::min_eigenvalue_on(const Grid2D& grid) const {
    const std::size_t n = grid.points_per_dim();
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i1 = 0; i1 < n; ++i1)
        for (std::size_t i2 = 0; i2 < n; ++i2) {
            const Mat2 g = inverse(grid.point(i1, i2));
            const double mean = 0.5 * (g(0, 0) + g(1, 1));
            const double half_diff = 0.5 * (g(0, 0) - g(1, 1));
            lo = std::min(lo, mean - std::hypot(half_diff, 0.5 * (g(0, 1) + g(1, 0))));
        }
    return lo;
}

// ---------------------------------------------------------------------------
// Smooth step and bump profiles
// ---------------------------------------------------------------------------

namespace {

struct StepParts {
    double s, one_minus_s, r, dr;
};

// s = 1 / (1 + e^q), q = 1/t - 1/(1-t), for t in (0, 1).
StepParts step_parts(double t) {
    const double q = 1.0 / t - 1.0 / (1.0 - t);
    StepParts p{};
    p.s = 1.0 / (1.0 + std::exp(q));
    p.one_minus_s = 1.0 / (1.0 + std::exp(-q));
    p.r = 1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t));
    p.dr = -2.0 / (t * t * t) + 2.0 / ((1.0 - t) * (1.0 - t) * (1.0 - t));
    return p;
}

double unit_bump(double y) {
    const double w = 1.0 - y * y;
    return w > 0.0 ? std::exp(-1.0 / w) : 0.0;
}

double unit_bump_d1(double y) {
    const double w = 1.0 - y * y;
    return w > 0.0 ? std::exp(-1.0 / w) * (-2.0 * y / (w * w)) : 0.0;
}

double unit_bump_d2(double y) {
    const double w = 1.0 - y * y;
    if (w <= 0.0) return 0.0;
    const double w2 = w * w;
    return std::exp(-1.0 / w) * (4.0 * y * y / (w2 * w2) - 2.0 / w2 - 8.0 * y * y / (w2 * w));
}

}  // namespace

double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return step_parts(t).s;
}

double smooth_step_d1(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const auto p = step_parts(t);
    return p.s * p.one_minus_s * p.r;
}

double smooth_step_d2(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const auto p = step_parts(t);
    const double d1 = p.s * p.one_minus_s * p.r;
    return d1 * (p.one_minus_s - p.s) * p.r + p.s * p.one_minus_s * p.dr;
}

BumpProfile::BumpProfile() {
    // Trapezoid rule is spectrally accurate for this compactly supported bump.
    constexpr int panels = 1 << 14;
    const double dy = 2.0 / panels;
    double mass = 0.0;
    for (int k = 1; k < panels; ++k) mass += unit_bump(-1.0 + k * dy);
    mass *= dy;
    psi_scale_ = 2.0 / mass;
}

double BumpProfile::psi(double t) const { return psi_scale_ * unit_bump(2.0 * t - 3.0); }
double BumpProfile::psi_d1(double t) const { return 2.0 * psi_scale_ * unit_bump_d1(2.0 * t - 3.0); }
double BumpProfile::psi_d2(double t) const { return 4.0 * psi_scale_ * unit_bump_d2(2.0 * t - 3.0); }

double BumpProfile::chi(double t) const { return smooth_step(1.0 - std::abs(t)); }
double BumpProfile::chi_d1(double t) const {
    if (t == 0.0) return 0.0;
    return (t > 0.0 ? -1.0 : 1.0) * smooth_step_d1(1.0 - std::abs(t));
}
double BumpProfile::chi_d2(double t) const { return smooth_step_d2(1.0 - std::abs(t)); }

double BumpProfile::Samples::discrete_integral() const {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc * step;
}

namespace {

BumpProfile::Samples sample_on(const std::function<double(double)>& f, Interval support, double step) {
    BumpProfile::Samples s{};
    s.step = step;
    s.first_index = static_cast<long>(std::ceil(support.lo / step));
    const long last = static_cast<long>(std::floor(support.hi / step));
    for (long m = s.first_index; m <= last; ++m) s.values.push_back(f(static_cast<double>(m) * step));
    return s;
}

}  // namespace

BumpProfile::Samples BumpProfile::sample_psi(double step) const {
    return sample_on([this](double t) { return psi(t); }, psi_support(), step);
}

BumpProfile::Samples BumpProfile::sample_chi(double step) const {
    return sample_on([this](double t) { return chi(t); }, chi_support(), step);
}

}  // namespace qlab::field

#include "qlab/operator.hpp"

#include "qlab/error.hpp"
#include "qlab/fft.hpp"

#include <algorithm>
#include <cmath>

namespace qlab::op {

std::string to_string(Backend b) { return b == Backend::spectral ? "spectral" : "finite-difference"; }

Backend backend_from_string(const std::string& name) {
    if (name == "spectral") return Backend::spectral;
    if (name == "finite-difference" || name == "fd") return Backend::finite_difference;
    throw PreconditionError("unknown backend: " + name);
}

namespace {

bool metric_is_constant_on(const MetricField& metric, const Grid2D& grid) {
    if (metric.is_constant()) return true;
    const std::size_t n = grid.points_per_dim();
    const Eigen::Matrix2d g0 = metric.inverse(grid.point(0, 0));
    for (std::size_t i1 = 0; i1 < n; ++i1)
        for (std::size_t i2 = 0; i2 < n; ++i2)
            if ((metric.inverse(grid.point(i1, i2)) - g0).cwiseAbs().maxCoeff() > 1e-14) return false;
    return true;
}

}  // namespace

SemiclassicalOperator::SemiclassicalOperator(double h, MetricField metric, PotentialField potential, Grid2D grid,
                                             Backend backend)
    : h_(h),
      metric_(std::move(metric)),
      potential_(std::move(potential)),
      grid_(grid),
      backend_(backend) {}

SemiclassicalOperator SemiclassicalOperator::assemble(double h, MetricField metric, PotentialField potential,
                                                      Grid2D grid, Backend backend) {
    if (!(h > 0.0 && h <= 1.0)) throw PreconditionError("assemble: h must lie in (0, 1]");
    if (!(metric.min_eigenvalue_on(grid) > 0.0))
        throw PreconditionError("assemble: metric is not positive definite on the grid");
    if (backend == Backend::spectral && !metric_is_constant_on(metric, grid))
        throw PreconditionError("assemble: spectral backend requires a constant metric");

    SemiclassicalOperator op(h, std::move(metric), std::move(potential), grid, backend);
    const std::size_t n = grid.points_per_dim();
    const std::size_t dim = grid.size();
    const double dx = grid.spacing();

    op.v_.resize(static_cast<Eigen::Index>(dim));
    op.weight_.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t i1 = 0; i1 < n; ++i1)
        for (std::size_t i2 = 0; i2 < n; ++i2) {
            const auto idx = static_cast<Eigen::Index>(grid.index(i1, i2));
            const Vec2 x = grid.point(i1, i2);
            op.v_[idx] = op.potential_.value(x);
            op.weight_[idx] = op.metric_.sqrt_det(x);
        }
    op.inv_sqrt_weight_ = op.weight_.cwiseSqrt().cwiseInverse();

    // Stiffness matrix from the face/corner quadratic form. The spectral backend
    // keeps it as a sparse model for preconditioning.
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(dim * 24);
    auto id = [&](std::size_t i1, std::size_t i2) {
        return static_cast<int>(grid.index(i1 % n, i2 % n));
    };
    auto a_coeff = [&](const Vec2& x) { return Eigen::Matrix2d(op.metric_.inverse(x) * op.metric_.sqrt_det(x)); };
    const double inv_dx2 = 1.0 / (dx * dx);
    for (std::size_t i1 = 0; i1 < n; ++i1)
        for (std::size_t i2 = 0; i2 < n; ++i2) {
            const Vec2 x = grid.point(i1, i2);
            const int p00 = id(i1, i2), p10 = id(i1 + 1, i2), p01 = id(i1, i2 + 1), p11 = id(i1 + 1, i2 + 1);
            // Face in direction 1 between (i1, i2) and (i1 + 1, i2).
            const double a11 = a_coeff(x + Vec2(0.5 * dx, 0.0))(0, 0) * inv_dx2;
            triplets.emplace_back(p00, p00, a11);
            triplets.emplace_back(p10, p10, a11);
            triplets.emplace_back(p00, p10, -a11);
            triplets.emplace_back(p10, p00, -a11);
            // Face in direction 2.
            const double a22 = a_coeff(x + Vec2(0.0, 0.5 * dx))(1, 1) * inv_dx2;
            triplets.emplace_back(p00, p00, a22);
            triplets.emplace_back(p01, p01, a22);
            triplets.emplace_back(p00, p01, -a22);
            triplets.emplace_back(p01, p00, -a22);
            // Corner (i1 + 1/2, i2 + 1/2): a12 (d1 d2^T + d2 d1^T).
            const double a12 = a_coeff(x + Vec2(0.5 * dx, 0.5 * dx))(0, 1);
            if (a12 == 0.0) continue;
            const std::array<int, 4> nodes{p00, p10, p01, p11};
            const std::array<double, 4> d1{-1.0, 1.0, -1.0, 1.0};
            const std::array<double, 4> d2{-1.0, -1.0, 1.0, 1.0};
            const double scale = a12 * 0.25 * inv_dx2;
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c)
                    triplets.emplace_back(nodes[r], nodes[c], scale * (d1[r] * d2[c] + d2[r] * d1[c]));
        }
    op.stiffness_.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    op.stiffness_.setFromTriplets(triplets.begin(), triplets.end());
    op.stiffness_.makeCompressed();
    if (backend == Backend::spectral) {
        const Eigen::Matrix2d g = op.metric_.inverse(grid.point(0, 0));
        op.symbol_.resize(dim);
        for (std::size_t k1 = 0; k1 < n; ++k1)
            for (std::size_t k2 = 0; k2 < n; ++k2) {
                const Vec2 xi = grid.wave_vector(k1, k2);
                // The Nyquist slot has no partner; keep only its cosine part in the cross term.
                const double c1 = k1 == n / 2 ? 0.0 : xi[0];
                const double c2 = k2 == n / 2 ? 0.0 : xi[1];
                op.symbol_[grid.index(k1, k2)] =
                    h * h * (g(0, 0) * xi[0] * xi[0] + 2.0 * g(0, 1) * c1 * c2 + g(1, 1) * xi[1] * xi[1]);
            }
    }
    return op;
}

void SemiclassicalOperator::apply_real(const double* in, double* out) const {
    const auto dim = static_cast<Eigen::Index>(dimension());
    Eigen::Map<const Eigen::VectorXd> x(in, dim);
    Eigen::Map<Eigen::VectorXd> y(out, dim);
    if (backend_ == Backend::spectral) {
        std::vector<cplx> buf(static_cast<std::size_t>(dim));
        for (Eigen::Index i = 0; i < dim; ++i) buf[static_cast<std::size_t>(i)] = x[i];
        const std::size_t n = grid_.points_per_dim();
        fft::transform_2d(buf, n, fft::Direction::forward);
        const double inv = 1.0 / static_cast<double>(dim);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= symbol_[i] * inv;
        fft::transform_2d(buf, n, fft::Direction::backward);
        for (Eigen::Index i = 0; i < dim; ++i) y[i] = buf[static_cast<std::size_t>(i)].real() + v_[i] * x[i];
        return;
    }
    // S x = h^2 W^{-1/2} L W^{-1/2} x + V x
    const Eigen::VectorXd scaled = inv_sqrt_weight_.cwiseProduct(x);
    y = (h_ * h_) * inv_sqrt_weight_.cwiseProduct(stiffness_ * scaled) + v_.cwiseProduct(x);
}

void SemiclassicalOperator::apply_symmetric(const Eigen::MatrixXd& x, Eigen::MatrixXd& y) const {
    y.resize(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) apply_real(x.col(c).data(), y.col(c).data());
}

GridFunction SemiclassicalOperator::apply(const GridFunction& u) const {
    field::require_same_grid(grid_, u.grid(), "apply");
    const auto dim = static_cast<Eigen::Index>(dimension());
    GridFunction out(grid_);
    if (backend_ == Backend::spectral) {
        std::vector<cplx> buf(u.values().begin(), u.values().end());
        const std::size_t n = grid_.points_per_dim();
        fft::transform_2d(buf, n, fft::Direction::forward);
        const double inv = 1.0 / static_cast<double>(dim);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= symbol_[i] * inv;
        fft::transform_2d(buf, n, fft::Direction::backward);
        auto o = out.values();
        const auto in = u.values();
        for (std::size_t i = 0; i < buf.size(); ++i) o[i] = buf[i] + v_[static_cast<Eigen::Index>(i)] * in[i];
        return out;
    }
    // P u = h^2 W^{-1} L u + V u, applied to real and imaginary parts.
    Eigen::VectorXd re(dim), im(dim);
    const auto in = u.values();
    for (Eigen::Index i = 0; i < dim; ++i) {
        re[i] = in[static_cast<std::size_t>(i)].real();
        im[i] = in[static_cast<std::size_t>(i)].imag();
    }
    const Eigen::VectorXd lre = stiffness_ * re;
    const Eigen::VectorXd lim = stiffness_ * im;
    auto o = out.values();
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double s = h_ * h_ / weight_[i];
        o[static_cast<std::size_t>(i)] = cplx(s * lre[i] + v_[i] * re[i], s * lim[i] + v_[i] * im[i]);
    }
    return out;
}

double SemiclassicalOperator::norm_upper_bound() const {
    const double vmax = v_.cwiseAbs().maxCoeff();
    if (backend_ == Backend::spectral) return *std::max_element(symbol_.begin(), symbol_.end()) + vmax;
    double row_max = 0.0;
    for (Eigen::Index r = 0; r < stiffness_.outerSize(); ++r) {
        double acc = 0.0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(stiffness_, r); it; ++it)
            acc += std::abs(it.value()) * inv_sqrt_weight_[it.col()];
        row_max = std::max(row_max, acc * inv_sqrt_weight_[r]);
    }
    return h_ * h_ * row_max + vmax;
}

Eigen::SparseMatrix<double> SemiclassicalOperator::sparse_model() const {
    const Eigen::VectorXd s = h_ * inv_sqrt_weight_;
    Eigen::SparseMatrix<double> out = stiffness_;
    for (Eigen::Index r = 0; r < out.outerSize(); ++r)
        for (Eigen::SparseMatrix<double>::InnerIterator it(out, r); it; ++it)
            it.valueRef() *= s[it.row()] * s[it.col()];
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.coeffRef(i, i) += v_[i];
    out.makeCompressed();
    return out;
}

Eigen::MatrixXd SemiclassicalOperator::dense_symmetric() const {
    const auto dim = static_cast<Eigen::Index>(dimension());
    Eigen::MatrixXd out(dim, dim);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index c = 0; c < dim; ++c) {
        e[c] = 1.0;
        apply_real(e.data(), out.col(c).data());
        e[c] = 0.0;
    }
    return 0.5 * (out + out.transpose());
}

Residual residual(const SemiclassicalOperator& p, const GridFunction& u) {
    return {field::l2_norm(p.apply(u)), field::l2_norm(u)};
}

GridFunction fourier_multiplier(const FourierMultiplier& m, const GridFunction& u) {
    const auto& grid = u.grid();
    const std::size_t n = grid.points_per_dim();
    std::vector<cplx> buf(u.values().begin(), u.values().end());
    fft::transform_2d(buf, n, fft::Direction::forward);
    const double inv = 1.0 / static_cast<double>(grid.size());
    for (std::size_t k1 = 0; k1 < n; ++k1)
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            const Vec2 eta = m.h * grid.wave_vector(k1, k2);
            buf[grid.index(k1, k2)] *= m.symbol(eta) * inv;
        }
    fft::transform_2d(buf, n, fft::Direction::backward);
    return GridFunction(grid, std::move(buf));
}

FourierMultiplier hyperbolic_multiplier(double h) {
    return {[](const Vec2& eta) { return cplx(eta[0] * eta[1], 0.0); }, h};
}

FourierMultiplier radial_cutoff(double h, double inner, double outer) {
    return {[inner, outer](const Vec2& eta) {
                const double r = eta.norm();
                return cplx(field::smooth_step((outer - r) / (outer - inner)), 0.0);
            },
            h};
}

double cutoff_defect(const GridFunction& u, const FourierMultiplier& chi) {
    GridFunction diff = u;
    diff -= fourier_multiplier(chi, u);
    return field::sup_norm(diff);
}

}  // namespace qlab::op

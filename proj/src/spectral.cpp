#include "qlab/spectral.hpp"

#include "qlab/error.hpp"
#include "qlab/fft.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace qlab::spectral {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Orthonormalize the columns of q (SVQB), dropping numerically dependent ones.
MatrixXd svqb(const MatrixXd& q) {
    if (q.cols() == 0) return q;
    const MatrixXd m = q.transpose() * q;
    VectorXd d = m.diagonal();
    for (Index i = 0; i < d.size(); ++i) d[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
    const MatrixXd scaled = d.asDiagonal() * m * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(scaled);
    const VectorXd& s = es.eigenvalues();
    const double smax = s.maxCoeff();
    std::vector<Index> keep;
    for (Index i = 0; i < s.size(); ++i)
        if (s[i] > 1e-14 * smax) keep.push_back(i);
    MatrixXd u(q.cols(), static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
        u.col(static_cast<Index>(j)) = es.eigenvectors().col(keep[j]) / std::sqrt(s[keep[j]]);
    return q * d.asDiagonal() * u;
}

void project_out(MatrixXd& q, const MatrixXd& x) {
    for (int pass = 0; pass < 2; ++pass) q -= x * (x.transpose() * q);
}

class FoldedProblem {
public:
    // Preconditioner T = (M^2 + tau^2)^{-1} = Im((M - i tau)^{-1}) / tau, M the sparse
    // finite-difference model of S.
    FoldedProblem(const SemiclassicalOperator& p, double tau) : p_(p), tau_(tau) {
        const Eigen::SparseMatrix<double> m = p.sparse_model();
        Eigen::SparseMatrix<cplx> shifted = m.cast<cplx>();
        for (Index i = 0; i < shifted.rows(); ++i) shifted.coeffRef(i, i) -= cplx(0.0, tau);
        shifted.makeCompressed();
        lu_.compute(shifted);
        if (lu_.info() != Eigen::Success) throw Error("interior_eigenpairs: preconditioner factorization failed");
    }

    void apply_s(const MatrixXd& x, MatrixXd& y) const { p_.apply_symmetric(x, y); }
    void apply_a(const MatrixXd& x, MatrixXd& y) const {
        MatrixXd tmp;
        apply_s(x, tmp);
        apply_s(tmp, y);
    }
    MatrixXd precondition(const MatrixXd& r) const {
        const Eigen::MatrixXcd sol = lu_.solve(r.cast<cplx>());
        return sol.imag() / tau_;
    }

private:
    const SemiclassicalOperator& p_;
    double tau_;
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu_;
};

struct Unfolded {
    VectorXd energy;
    MatrixXd vectors;
    VectorXd residual;
};

/// Rayleigh-Ritz for S on span(x), x orthonormal.
Unfolded unfold(const FoldedProblem& prob, const MatrixXd& x) {
    MatrixXd sx;
    prob.apply_s(x, sx);
    MatrixXd m = x.transpose() * sx;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    Unfolded out;
    out.energy = es.eigenvalues();
    out.vectors = x * es.eigenvectors();
    const MatrixXd r = sx * es.eigenvectors() - out.vectors * out.energy.asDiagonal();
    out.residual = r.colwise().norm().transpose();
    return out;
}

}  // namespace

std::vector<EigenPair> interior_eigenpairs(const SemiclassicalOperator& p, double half_width,
                                           const EigensolveOptions& opts) {
    if (!(half_width > 0.0)) throw PreconditionError("interior_eigenpairs: window half width must be positive");
    if (opts.max_count == 0) throw PreconditionError("interior_eigenpairs: max_count must be positive");
    const auto dim = static_cast<Index>(p.dimension());
    const std::size_t guard = opts.guard != 0 ? opts.guard : std::max<std::size_t>(4, opts.max_count / 4);
    const Index block = std::min<Index>(static_cast<Index>(opts.max_count + guard), dim);
    const double edge = half_width * (1.0 + opts.window_slack);
    const double edge2 = edge * edge;

    FoldedProblem prob(p, half_width);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    MatrixXd x(dim, block);
    for (Index c = 0; c < block; ++c)
        for (Index i = 0; i < dim; ++i) x(i, c) = normal(rng);
    x = svqb(x);

    // Initial Rayleigh-Ritz for A = S^2.
    MatrixXd ax;
    prob.apply_a(x, ax);
    {
        MatrixXd g = x.transpose() * ax;
        g = 0.5 * (g + g.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
        x = x * es.eigenvectors();
        ax = ax * es.eigenvectors();
    }
    VectorXd theta = (x.transpose() * ax).diagonal();
    MatrixXd pdir;  // previous search directions, same column count as x or empty

    const double scale = p.norm_upper_bound();
    // Folded residual target; tightened until the unfolded residuals meet opts.tolerance.
    double tol_a = opts.tolerance * std::max(edge, 1e-3 * scale);
    const double tol_floor = 1e-15 * scale * scale;
    std::vector<double> last_residuals;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        const MatrixXd r = ax - x * theta.asDiagonal();
        const VectorXd rn = r.colwise().norm().transpose();

        Index wanted = 0;
        while (wanted < block && theta[wanted] <= edge2) ++wanted;
        if (wanted > static_cast<Index>(opts.max_count)) {
            const double est = estimate_eigenvalue_count(p, -half_width, half_width);
            throw TooManyEigenvalues("interior_eigenpairs: more than " + std::to_string(opts.max_count) +
                                         " eigenvalues in the window",
                                     std::max(est, static_cast<double>(wanted)));
        }
        // The first eigenvalue outside the window must be converged too, to certify the count.
        const Index must = std::min<Index>(wanted + 1, block);
        bool done = true;
        for (Index i = 0; i < must; ++i)
            if (rn[i] > tol_a) done = false;

        if (done) {
            if (wanted == 0) return {};
            const Unfolded u = unfold(prob, x.leftCols(must));
            std::vector<Index> inside;
            for (Index i = 0; i < u.energy.size(); ++i)
                if (std::abs(u.energy[i]) <= edge) inside.push_back(i);
            double worst = 0.0;
            for (Index i : inside) worst = std::max(worst, u.residual[i]);
            if (worst <= opts.tolerance && static_cast<Index>(inside.size()) == wanted) {
                std::vector<EigenPair> out;
                const auto& grid = p.grid();
                const double inv_dx = 1.0 / grid.spacing();
                const auto& weight = p.volume_weight();
                std::vector<Index> order(inside);
                std::sort(order.begin(), order.end(),
                          [&](Index a, Index b) { return u.energy[a] < u.energy[b]; });
                for (Index i : order) {
                    std::vector<cplx> vals(static_cast<std::size_t>(dim));
                    for (Index k = 0; k < dim; ++k)
                        vals[static_cast<std::size_t>(k)] = u.vectors(k, i) * inv_dx / std::sqrt(weight[k]);
                    out.push_back({u.energy[i], GridFunction(grid, std::move(vals)), u.residual[i]});
                }
                return out;
            }
            if (tol_a <= tol_floor)
                throw NonConvergence("interior_eigenpairs: residual target unreachable at working precision",
                                     std::vector<double>(u.residual.data(), u.residual.data() + u.residual.size()));
            tol_a = std::max(tol_a * 0.05, tol_floor);
            continue;
        }
        last_residuals.assign(rn.data(), rn.data() + rn.size());

        std::vector<Index> active;
        for (Index i = 0; i < block; ++i)
            if (rn[i] > tol_a) active.push_back(i);
        const auto na = static_cast<Index>(active.size());
        MatrixXd wdir(dim, na);
        for (Index j = 0; j < na; ++j) wdir.col(j) = r.col(active[j]);
        wdir = prob.precondition(wdir);
        MatrixXd q = wdir;
        if (pdir.cols() == block) {
            q.conservativeResize(dim, 2 * na);
            for (Index j = 0; j < na; ++j) q.col(na + j) = pdir.col(active[j]);
        }
        project_out(q, x);
        q = svqb(q);
        project_out(q, x);
        q = svqb(q);
        MatrixXd aq;
        prob.apply_a(q, aq);

        const Index m = block + q.cols();
        MatrixXd g(m, m);
        g.topLeftCorner(block, block) = theta.asDiagonal();
        g.topRightCorner(block, q.cols()) = x.transpose() * aq;
        g.bottomLeftCorner(q.cols(), block) = g.topRightCorner(block, q.cols()).transpose();
        g.bottomRightCorner(q.cols(), q.cols()) = q.transpose() * aq;
        g = 0.5 * (g + g.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
        const MatrixXd y = es.eigenvectors().leftCols(block);
        const MatrixXd yx = y.topRows(block);
        const MatrixXd yq = y.bottomRows(q.cols());

        pdir = q * yq;
        const MatrixXd apdir = aq * yq;
        x = x * yx + pdir;
        ax = ax * yx + apdir;
        theta = es.eigenvalues().head(block);

        // Guard against drift out of orthonormality.
        if ((x.transpose() * x - MatrixXd::Identity(block, block)).cwiseAbs().maxCoeff() > 1e-10) {
            x = svqb(x);
            prob.apply_a(x, ax);
            MatrixXd gx = x.transpose() * ax;
            gx = 0.5 * (gx + gx.transpose());
            Eigen::SelfAdjointEigenSolver<MatrixXd> ex(gx);
            x = x * ex.eigenvectors();
            ax = ax * ex.eigenvectors();
            theta = ex.eigenvalues();
            pdir.resize(0, 0);
        }
    }
    throw NonConvergence("interior_eigenpairs: iteration cap reached", last_residuals);
}

double estimate_eigenvalue_count(const SemiclassicalOperator& p, double lo, double hi, int degree, int probes,
                                 std::uint64_t seed) {
    if (!(hi > lo)) throw PreconditionError("estimate_eigenvalue_count: empty interval");
    const double bound = p.norm_upper_bound() * 1.01;
    const auto dim = static_cast<Index>(p.dimension());
    const double a = std::clamp(lo / bound, -1.0, 1.0), b = std::clamp(hi / bound, -1.0, 1.0);
    const double ta = std::acos(a), tb = std::acos(b);
    // Jackson-damped Chebyshev coefficients of the indicator of [a, b].
    std::vector<double> coef(static_cast<std::size_t>(degree + 1));
    const double alpha = std::numbers::pi / (degree + 2);
    for (int k = 0; k <= degree; ++k) {
        const double jackson = ((degree + 2 - k) * std::cos(k * alpha) + std::sin(k * alpha) / std::tan(alpha)) /
                               (degree + 2);
        const double c = k == 0 ? (ta - tb) / std::numbers::pi
                                : 2.0 * (std::sin(k * ta) - std::sin(k * tb)) / (k * std::numbers::pi);
        coef[static_cast<std::size_t>(k)] = c * jackson;
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin;
    double total = 0.0;
    for (int s = 0; s < probes; ++s) {
        MatrixXd z(dim, 1);
        for (Index i = 0; i < dim; ++i) z(i, 0) = coin(rng) ? 1.0 : -1.0;
        MatrixXd t0 = z, t1, t2;
        p.apply_symmetric(z, t1);
        t1 /= bound;
        double acc = coef[0] * z.squaredNorm() + coef[1] * (z.col(0).dot(t1.col(0)));
        for (int k = 2; k <= degree; ++k) {
            p.apply_symmetric(t1, t2);
            t2 = 2.0 * t2 / bound - t0;
            acc += coef[static_cast<std::size_t>(k)] * z.col(0).dot(t2.col(0));
            t0.swap(t1);
            t1.swap(t2);
        }
        total += acc;
    }
    return std::max(0.0, total / probes);
}

ClusterBuild build_cluster(double h, double width_constant, const std::vector<EigenPair>& pairs,
                           const std::vector<cplx>& coefficients) {
    if (pairs.empty()) throw PreconditionError("build_cluster: no eigenpairs");
    if (pairs.size() != coefficients.size())
        throw PreconditionError("build_cluster: coefficient count does not match eigenpair count");
    double norm2 = 0.0;
    for (const auto& c : coefficients) norm2 += std::norm(c);
    if (norm2 > 1.0 + 1e-12) throw PreconditionError("build_cluster: coefficient vector has norm above 1");
    const double edge = width_constant * h * (1.0 + 1e-9);
    SpectralCluster cluster{h, width_constant, {}, {}, coefficients};
    GridFunction w(pairs.front().function.grid());
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        if (std::abs(pairs[j].energy) > edge)
            throw PreconditionError("build_cluster: eigenvalue outside [-C h, C h]");
        cluster.eigenvalues.push_back(pairs[j].energy);
        cluster.eigenfunctions.push_back(pairs[j].function);
        w.axpy(coefficients[j], pairs[j].function);
    }
    return {std::move(cluster), std::move(w)};
}

std::vector<cplx> coherent_coefficients(const std::vector<EigenPair>& pairs, std::size_t i1, std::size_t i2) {
    std::vector<cplx> c;
    double total = 0.0;
    for (const auto& pr : pairs) {
        c.push_back(std::conj(pr.function(i1, i2)));
        total += std::norm(pr.function(i1, i2));
    }
    if (!(total > 0.0)) throw PreconditionError("coherent_coefficients: every eigenfunction vanishes at the point");
    const double inv = 1.0 / std::sqrt(total);
    for (auto& v : c) v *= inv;
    return c;
}

std::pair<std::size_t, std::size_t> spectral_function_peak(const std::vector<EigenPair>& pairs) {
    if (pairs.empty()) throw PreconditionError("spectral_function_peak: no eigenpairs");
    const auto& grid = pairs.front().function.grid();
    std::vector<double> density(grid.size(), 0.0);
    for (const auto& pr : pairs) {
        const auto v = pr.function.values();
        for (std::size_t i = 0; i < v.size(); ++i) density[i] += std::norm(v[i]);
    }
    const auto at = static_cast<std::size_t>(std::max_element(density.begin(), density.end()) - density.begin());
    const std::size_t n = grid.points_per_dim();
    return {at / n, at % n};
}

std::vector<LatticeMode> torus_annulus_modes(double h, double width_constant) {
    if (!(h > 0.0 && h <= 1.0)) throw PreconditionError("torus_annulus_modes: h must lie in (0, 1]");
    if (!(width_constant > 0.0)) throw PreconditionError("torus_annulus_modes: C must be positive");
    const double rmax = std::sqrt((1.0 + width_constant * h) / (h * h));
    const long kmax = static_cast<long>(std::floor(rmax)) + 1;
    std::vector<LatticeMode> modes;
    for (long k1 = -kmax; k1 <= kmax; ++k1)
        for (long k2 = -kmax; k2 <= kmax; ++k2) {
            const double e = h * h * static_cast<double>(k1 * k1 + k2 * k2) - 1.0;
            if (std::abs(e) <= width_constant * h) modes.emplace_back(k1, k2);
        }
    return modes;
}

TorusCluster coherent_torus_cluster(double h, double width_constant, std::size_t max_points) {
    auto modes = torus_annulus_modes(h, width_constant);
    if (modes.empty()) throw PreconditionError("coherent_torus_cluster: the annulus contains no lattice points");
    if (!field::is_power_of_two(max_points) || max_points < 2)
        throw PreconditionError("coherent_torus_cluster: max_points must be a power of two");
    long kmax = 0;
    for (const auto& [a, b] : modes) kmax = std::max({kmax, std::labs(a), std::labs(b)});
    std::size_t n = 2;
    while (static_cast<long>(n / 2) <= kmax && n < max_points) n *= 2;
    const bool aliased = static_cast<long>(n / 2) <= kmax;

    const double m = static_cast<double>(modes.size());
    const double c = 1.0 / (2.0 * std::numbers::pi * std::sqrt(m));
    field::Grid2D grid(std::numbers::pi, n);
    std::vector<cplx> buf(grid.size(), cplx(0.0, 0.0));
    const auto ln = static_cast<long>(n);
    double res2 = 0.0;
    for (const auto& [k1, k2] : modes) {
        // x_n = -pi + 2 pi n / N, so e^{ik x_n} = (-1)^k e^{2 pi i k n / N}.
        const double sign = ((k1 + k2) % 2 == 0) ? 1.0 : -1.0;
        const auto s1 = static_cast<std::size_t>(((k1 % ln) + ln) % ln);
        const auto s2 = static_cast<std::size_t>(((k2 % ln) + ln) % ln);
        buf[grid.index(s1, s2)] += sign * c;
        const double e = h * h * static_cast<double>(k1 * k1 + k2 * k2) - 1.0;
        res2 += e * e;
    }
    fft::transform_2d(buf, n, fft::Direction::backward);
    const double parseval = 2.0 * std::numbers::pi * c;  // ||c e^{ik.x}|| on the torus
    return {h,
            width_constant,
            std::move(modes),
            GridFunction(grid, std::move(buf)),
            aliased,
            parseval * std::sqrt(m),
            parseval * std::sqrt(res2)};
}

}  // namespace qlab::spectral

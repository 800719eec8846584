#pragma once

#include "kirchhoff/common.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace kirchhoff {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct DomainSpec {
    std::vector<double> extents;  // per-axis lengths
    std::vector<int> nodes;       // per-axis interior node counts
};

/// Uniform finite-difference grid on a box with homogeneous Dirichlet data.
/// Node ordering: axis 0 varies fastest.
class Grid {
  public:
    static Grid build(const DomainSpec& spec) {
        const std::size_t dim = spec.extents.size();
        if (dim < 1 || dim > 3) throw ConfigError("domain dimension must be 1, 2 or 3");
        if (spec.nodes.size() != dim) throw ConfigError("domain.nodes must list one count per axis");
        Grid g;
        g.spec_ = spec;
        g.size_ = 1;
        g.weight_ = 1.0;
        for (std::size_t k = 0; k < dim; ++k) {
            if (!(spec.extents[k] > 0.0)) throw ConfigError("domain extents must be > 0");
            if (spec.nodes[k] < 3) throw ConfigError("domain resolution must be >= 3 nodes per axis");
            const double h = spec.extents[k] / (spec.nodes[k] + 1);
            g.h_.push_back(h);
            g.weight_ *= h;
            g.size_ *= spec.nodes[k];
        }
        g.weights_ = Field::Constant(g.size_, g.weight_);
        g.assemble();
        return g;
    }

    [[nodiscard]] int dim() const { return static_cast<int>(h_.size()); }
    [[nodiscard]] Eigen::Index size() const { return size_; }
    [[nodiscard]] const DomainSpec& spec() const { return spec_; }
    [[nodiscard]] const std::vector<double>& spacing() const { return h_; }
    [[nodiscard]] int nodes(int axis) const { return spec_.nodes[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] double extent(int axis) const { return spec_.extents[static_cast<std::size_t>(axis)]; }
    /// Lumped quadrature weight; identical for every interior node.
    [[nodiscard]] double weight() const { return weight_; }
    [[nodiscard]] const Field& weights() const { return weights_; }
    [[nodiscard]] double measure() const {
        double v = 1.0;
        for (double e : spec_.extents) v *= e;
        return v;
    }
    /// Discrete -Laplacian stencil L (diagonal 2/h^2 per axis).
    [[nodiscard]] const SparseMatrix& laplacian() const { return lap_; }
    /// Stiffness A = w L, so that u^T A u approximates the Dirichlet integral.
    [[nodiscard]] const SparseMatrix& stiffness() const { return stiff_; }

    [[nodiscard]] std::array<int, 3> multi_index(Eigen::Index idx) const {
        std::array<int, 3> m{0, 0, 0};
        for (int k = 0; k < dim(); ++k) {
            m[static_cast<std::size_t>(k)] = static_cast<int>(idx % nodes(k));
            idx /= nodes(k);
        }
        return m;
    }

    [[nodiscard]] std::array<double, 3> coords(Eigen::Index idx) const {
        const auto m = multi_index(idx);
        std::array<double, 3> x{0.0, 0.0, 0.0};
        for (int k = 0; k < dim(); ++k) x[static_cast<std::size_t>(k)] = (m[static_cast<std::size_t>(k)] + 1) * h_[static_cast<std::size_t>(k)];
        return x;
    }

    /// Samples f(x, y, z) at the interior nodes.
    template <class F>
    [[nodiscard]] Field sample(F&& f) const {
        Field u(size_);
        for (Eigen::Index i = 0; i < size_; ++i) {
            const auto x = coords(i);
            u[i] = f(x[0], x[1], x[2]);
        }
        return u;
    }

    /// Closed-form eigenvalue of the 1D stencil: (4/h^2) sin^2(j pi h / (2 L)), j = 1..N.
    [[nodiscard]] double axis_eigenvalue(int axis, int j) const {
        const double h = h_[static_cast<std::size_t>(axis)];
        const double s = std::sin(j * std::numbers::pi / (2.0 * (nodes(axis) + 1)));
        return 4.0 / (h * h) * s * s;
    }

    /// Sum of per-axis lowest stencil eigenvalues.
    [[nodiscard]] double exact_lambda1() const {
        double s = 0.0;
        for (int k = 0; k < dim(); ++k) s += axis_eigenvalue(k, 1);
        return s;
    }

    /// Separable sine mode with per-axis indices j (1-based), unnormalized.
    [[nodiscard]] Field sine_mode(const std::array<int, 3>& j) const {
        Field u(size_);
        for (Eigen::Index i = 0; i < size_; ++i) {
            const auto m = multi_index(i);
            double v = 1.0;
            for (int k = 0; k < dim(); ++k) {
                const auto kk = static_cast<std::size_t>(k);
                v *= std::sin(std::numbers::pi * j[kk] * (m[kk] + 1) / (nodes(k) + 1));
            }
            u[i] = v;
        }
        return u;
    }

    void check_field(const Field& u, const char* what = "field") const {
        if (u.size() != size_) throw ConfigError(std::string(what) + " length does not match the discretization");
    }

  private:
    void assemble() {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(size_) * (1 + 2 * h_.size()));
        std::array<Eigen::Index, 3> stride{1, 1, 1};
        for (int k = 1; k < dim(); ++k) stride[static_cast<std::size_t>(k)] = stride[static_cast<std::size_t>(k - 1)] * nodes(k - 1);
        for (Eigen::Index i = 0; i < size_; ++i) {
            const auto m = multi_index(i);
            double diag = 0.0;
            for (int k = 0; k < dim(); ++k) {
                const auto kk = static_cast<std::size_t>(k);
                const double c = 1.0 / (h_[kk] * h_[kk]);
                diag += 2.0 * c;
                if (m[kk] > 0) trip.emplace_back(i, i - stride[kk], -c);
                if (m[kk] + 1 < nodes(k)) trip.emplace_back(i, i + stride[kk], -c);
            }
            trip.emplace_back(i, i, diag);
        }
        lap_.resize(size_, size_);
        lap_.setFromTriplets(trip.begin(), trip.end());
        lap_.makeCompressed();
        stiff_ = weight_ * lap_;
        stiff_.makeCompressed();
    }

    DomainSpec spec_;
    std::vector<double> h_;
    Eigen::Index size_ = 0;
    double weight_ = 0.0;
    Field weights_;
    SparseMatrix lap_;
    SparseMatrix stiff_;
};

/// The four norms every functional consumes.
struct Norms {
    double g2 = 0.0;   // |grad u|_2^2
    double m2 = 0.0;   // |u|_2^2
    double l4 = 0.0;   // |u|_4^4
    double lp1 = 0.0;  // |u|_{p+1}^{p+1}

    [[nodiscard]] Norms scaled(double c, double p) const {
        const double c2 = c * c;
        return {c2 * g2, c2 * m2, c2 * c2 * l4, pow_abs(c, p + 1.0) * lp1};
    }
};

inline double dirichlet_energy(const Grid& g, const Field& u) {
    return g.weight() * u.dot(g.laplacian() * u);
}

inline Norms norms(const Grid& g, const Field& u, double p) {
    g.check_field(u);
    if (!(p > 1.0)) throw ConfigError("norms: p must be > 1");
    Norms n;
    n.g2 = dirichlet_energy(g, u);
    double m2 = 0.0, l4 = 0.0, lp1 = 0.0;
    const bool cubic = is_cubic(p);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double s2 = u[i] * u[i];
        m2 += s2;
        l4 += s2 * s2;
        if (!cubic) lp1 += pow_abs(u[i], p + 1.0);
    }
    const double w = g.weight();
    n.m2 = w * m2;
    n.l4 = w * l4;
    n.lp1 = cubic ? n.l4 : w * lp1;
    return n;
}

inline double lq_power(const Grid& g, const Field& u, double q) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) s += pow_abs(u[i], q);
    return g.weight() * s;
}

inline double l2_inner(const Grid& g, const Field& u, const Field& v) { return g.weight() * u.dot(v); }

/// Direct solver for (alpha I + beta L) x = r with alpha >= 0, beta > 0.
/// 1D uses the Thomas algorithm; higher dimensions diagonalize L axis by axis in the sine basis.
class ShiftedLaplacian {
  public:
    explicit ShiftedLaplacian(const Grid& g) : grid_(&g) {
        if (g.dim() > 1) {
            for (int k = 0; k < g.dim(); ++k) {
                const int n = g.nodes(k);
                Eigen::MatrixXd q(n, n);
                const double s = std::sqrt(2.0 / (n + 1));
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) q(i, j) = s * std::sin(std::numbers::pi * (i + 1) * (j + 1) / (n + 1));
                basis_.push_back(std::move(q));
                Field mu(n);
                for (int j = 0; j < n; ++j) mu[j] = g.axis_eigenvalue(k, j + 1);
                eig_.push_back(std::move(mu));
            }
        }
    }

    void solve(double alpha, double beta, const Field& r, Field& x) const {
        const Grid& g = *grid_;
        x.resize(r.size());
        if (g.dim() == 1) {
            thomas(alpha, beta, r, x);
        } else {
            separable(alpha, beta, r, x);
        }
    }

    [[nodiscard]] Field solve(double alpha, double beta, const Field& r) const {
        Field x;
        solve(alpha, beta, r, x);
        return x;
    }

    [[nodiscard]] const Grid& grid() const { return *grid_; }

  private:
    void thomas(double alpha, double beta, const Field& r, Field& x) const {
        const double h = grid_->spacing()[0];
        const double off = -beta / (h * h);
        const double diag = alpha + 2.0 * beta / (h * h);
        const Eigen::Index n = r.size();
        thread_local std::vector<double> c;
        c.resize(static_cast<std::size_t>(n));
        double denom = diag;
        c[0] = off / denom;
        x[0] = r[0] / denom;
        for (Eigen::Index i = 1; i < n; ++i) {
            denom = diag - off * c[static_cast<std::size_t>(i - 1)];
            c[static_cast<std::size_t>(i)] = off / denom;
            x[i] = (r[i] - off * x[i - 1]) / denom;
        }
        for (Eigen::Index i = n - 2; i >= 0; --i) x[i] -= c[static_cast<std::size_t>(i)] * x[i + 1];
    }

    // Applies the orthogonal sine transform along every axis (it is its own inverse).
    void transform(Field& v) const {
        const Grid& g = *grid_;
        thread_local Field line_in, line_out;
        Eigen::Index stride = 1;
        for (int k = 0; k < g.dim(); ++k) {
            const int n = g.nodes(k);
            line_in.resize(n);
            line_out.resize(n);
            const Eigen::Index block = stride * n;
            for (Eigen::Index base = 0; base < v.size(); base += block) {
                for (Eigen::Index off = 0; off < stride; ++off) {
                    for (int i = 0; i < n; ++i) line_in[i] = v[base + off + i * stride];
                    line_out.noalias() = basis_[static_cast<std::size_t>(k)] * line_in;
                    for (int i = 0; i < n; ++i) v[base + off + i * stride] = line_out[i];
                }
            }
            stride = block;
        }
    }

    void separable(double alpha, double beta, const Field& r, Field& x) const {
        const Grid& g = *grid_;
        x = r;
        transform(x);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const auto m = g.multi_index(i);
            double mu = 0.0;
            for (int k = 0; k < g.dim(); ++k) mu += eig_[static_cast<std::size_t>(k)][m[static_cast<std::size_t>(k)]];
            x[i] /= alpha + beta * mu;
        }
        transform(x);
    }

    const Grid* grid_;
    std::vector<Eigen::MatrixXd> basis_;
    std::vector<Field> eig_;
};

struct Eigenpair {
    double lambda1 = 0.0;
    Field psi1;
    double residual = 0.0;
    int iterations = 0;
};

/// Smallest generalized eigenpair of (A, diag w) by inverse power iteration.
/// psi1 is positive with sum_i w_i psi1_i^2 = 1; the residual is |A psi - lambda W psi|_2.
inline Eigenpair principal_eigenpair(const Grid& g, const ShiftedLaplacian& solver, double tol = 1e-10,
                                     int max_iter = 5000) {
    if (!(tol > 0.0)) throw ConfigError("eigen tolerance must be > 0");
    const double w = g.weight();
    Field x = Field::Ones(g.size());
    Field y, r;
    Eigenpair out;
    double best = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    for (int it = 1; it <= max_iter; ++it) {
        // A y = W x  <=>  L y = x
        solver.solve(0.0, 1.0, x, y);
        x = y / std::sqrt(w * y.squaredNorm());
        const Field lx = g.laplacian() * x;
        const double lam = x.dot(lx) / x.squaredNorm();
        r = w * (lx - lam * x);
        const double res = r.norm();
        out.lambda1 = lam;
        out.residual = res;
        out.iterations = it;
        if (res <= tol) break;
        if (res < 0.999 * best) {
            best = res;
            stagnant = 0;
        } else if (++stagnant > 50) {
            break;
        }
    }
    if (x.sum() < 0.0) x = -x;
    out.psi1 = x;
    if (!(out.residual <= tol))
        throw NumericalError("principal eigenpair did not converge: residual " + std::to_string(out.residual) +
                             " after " + std::to_string(out.iterations) + " iterations");
    return out;
}

}  // namespace kirchhoff

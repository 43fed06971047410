#pragma once

// Small dense linear algebra and safeguarded root finding used by the
// bandit core. Matrices are Eigen dynamic matrices; only symmetric
// eigendecomposition and the PSD pseudo-inverse are provided on top.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lcb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised when an iterative method cannot reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Raised when a root bracket does not contain a sign change.
class BracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Spectral decomposition A = V diag(values) V^T, values sorted descending.
struct SymEig {
    Vector eigenvalues;
    Matrix eigenvectors;
};

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-12) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline SymEig sym_eig(const Matrix& a) {
    if (a.rows() != a.cols())
        throw ContractViolation("sym_eig: matrix is not square");
    if (!a.allFinite())
        throw ContractViolation("sym_eig: non-finite entry");
    if (!is_symmetric(a))
        throw ContractViolation("sym_eig: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("sym_eig: eigensolver failed", 0.0);

    // Eigen returns ascending order; flip to descending.
    const Eigen::Index n = a.rows();
    SymEig out{Vector(n), Matrix(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.eigenvalues(i) = solver.eigenvalues()(n - 1 - i);
        out.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
    return out;
}

inline constexpr double kDefaultPinvTol = 1e-10;

/// Moore-Penrose pseudo-inverse of a PSD matrix. Eigenvalues below
/// rel_tol * lambda_max are treated as zero. Throws when the input has an
/// eigenvalue below -rel_tol * lambda_max.
inline Matrix pinv_psd(const Matrix& a, double rel_tol = kDefaultPinvTol,
                       Eigen::Index* rank_out = nullptr) {
    const SymEig eig = sym_eig(a);
    const Eigen::Index n = a.rows();
    const double lmax = n > 0 ? std::max(0.0, eig.eigenvalues(0)) : 0.0;
    const double cutoff = rel_tol * lmax;
    if (n > 0 && eig.eigenvalues(n - 1) < -cutoff && eig.eigenvalues(n - 1) < 0.0) {
        std::ostringstream msg;
        msg << "pinv_psd: matrix is indefinite, most negative eigenvalue "
            << eig.eigenvalues(n - 1) << " (largest " << lmax << ")";
        throw ContractViolation(msg.str());
    }
    Matrix out = Matrix::Zero(n, n);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = eig.eigenvalues(i);
        if (lmax > 0.0 && v > cutoff) {
            const auto col = eig.eigenvectors.col(i);
            out.noalias() += (1.0 / v) * col * col.transpose();
            ++rank;
        }
    }
    if (rank_out) *rank_out = rank;
    // Symmetrize away rounding asymmetry from the rank-one sums.
    return 0.5 * (out + out.transpose());
}

struct RootResult {
    double root = 0.0;
    double residual = 0.0;
    int iterations = 0;
    int bisection_steps = 0;
};

/// Newton's method on a bracket (lo, hi) with a bisection fallback.
///
/// f must be strictly monotone on the bracket with f(lo) and f(hi) of
/// opposite sign (either may be infinite). Iteration starts at x0 when it
/// lies inside the bracket, otherwise at the midpoint. Every Newton step that
/// would leave the current bracket is replaced by a bisection step, so the
/// method always converges. Stops once |f(x)| <= tol.
template <class F, class FPrime>
RootResult newton_root(const F& f, const FPrime& fprime,
                       double lo, double hi, double tol, int max_iter,
                       double x0 = std::numeric_limits<double>::quiet_NaN()) {
    if (!(lo < hi))
        throw ContractViolation("newton_root: requires lo < hi");
    const double flo = f(lo);
    const double fhi = f(hi);
    if (std::isnan(flo) || std::isnan(fhi) || !((flo > 0.0 && fhi < 0.0) || (flo < 0.0 && fhi > 0.0))) {
        if (flo == 0.0) return {lo, 0.0, 0, 0};
        if (fhi == 0.0) return {hi, 0.0, 0, 0};
        std::ostringstream msg;
        msg << "newton_root: no sign change on [" << lo << ", " << hi << "], f(lo)=" << flo
            << " f(hi)=" << fhi;
        throw BracketError(msg.str());
    }
    const bool decreasing = flo > 0.0;

    RootResult res;
    double x = (x0 > lo && x0 < hi) ? x0 : 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        const double fx = f(x);
        res.iterations = it + 1;
        if (std::abs(fx) <= tol) {
            res.root = x;
            res.residual = std::abs(fx);
            return res;
        }
        // Shrink the bracket around the root.
        if ((fx > 0.0) == decreasing)
            lo = x;
        else
            hi = x;

        const double d = fprime(x);
        double next = x - fx / d;
        if (!std::isfinite(next) || !(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
            ++res.bisection_steps;
        }
        if (next == x) {
            // Bracket collapsed to floating point resolution.
            res.root = x;
            res.residual = std::abs(fx);
            if (res.residual <= tol) return res;
            break;
        }
        x = next;
    }
    const double fx = f(x);
    if (std::abs(fx) <= tol) {
        res.root = x;
        res.residual = std::abs(fx);
        return res;
    }
    std::ostringstream msg;
    msg << "newton_root: no convergence after " << max_iter << " iterations, residual " << fx
        << " at x=" << x << " bracket [" << lo << ", " << hi << "]";
    throw ConvergenceError(msg.str(), std::abs(fx));
}

/// Neumaier-compensated accumulator.
class CompensatedSum {
public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace lcb

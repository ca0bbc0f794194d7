#include "cmwf/linalg.hpp"

#include <algorithm>
#include <string>

#include "cmwf/error.hpp"

namespace cmwf {

GevdResult gevd(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw Error("gevd: dimension mismatch (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
    const Eigen::Index n = a.rows();
    GevdResult r;

    Eigen::LLT<CMatrix> llt(b);
    if (llt.info() != Eigen::Success) {
        const double floor = 1e-10 * std::max(b.trace().real(), 0.0) / static_cast<double>(n);
        llt.compute(b + CMatrix::Identity(n, n) * std::max(floor, std::numeric_limits<double>::min()));
        r.floored = true;
        if (llt.info() != Eigen::Success) throw LinalgError("gevd: B is not positive definite");
    }
    r.whitening = llt.matrixL();
    const auto lower = r.whitening.triangularView<Eigen::Lower>();
    const CMatrix t = lower.solve(a);                 // L^-1 A
    CMatrix w = lower.solve(t.adjoint());             // L^-1 A L^-H
    w = (0.5 * (w + w.adjoint())).eval();

    Eigen::SelfAdjointEigenSolver<CMatrix> es(w);
    if (es.info() != Eigen::Success) throw LinalgError("gevd: eigensolver did not converge");
    r.eigenvalues = es.eigenvalues().reverse();
    r.whitened_eigenvectors = es.eigenvectors().rowwise().reverse();
    r.eigenvectors = r.whitening.adjoint().triangularView<Eigen::Upper>().solve(r.whitened_eigenvectors);
    return r;
}

CMatrix lowrank_target(const CMatrix& noisy, const CMatrix& noise, std::size_t rank) {
    const Eigen::Index n = noisy.rows();
    if (rank < 1 || static_cast<Eigen::Index>(rank) > n)
        throw Error("lowrank_target: rank " + std::to_string(rank) + " outside [1, " + std::to_string(n) + "]");
    const GevdResult g = gevd(noisy, noise);
    const auto r = static_cast<Eigen::Index>(rank);
    const CMatrix lu = g.whitening * g.whitened_eigenvectors.leftCols(r);
    Eigen::VectorXd gain(r);
    for (Eigen::Index i = 0; i < r; ++i) gain(i) = std::max(g.eigenvalues(i) - 1.0, 0.0);
    CMatrix sd = lu * gain.asDiagonal() * lu.adjoint();
    return 0.5 * (sd + sd.adjoint());
}

namespace {
Eigen::LLT<CMatrix> factor_loaded(const CMatrix& s, double lambda, long bin) {
    if (s.rows() != s.cols()) throw Error("loaded_solve: matrix is not square");
    if (!(lambda >= 0.0)) throw Error("loaded_solve: loading must be non-negative");
    Eigen::LLT<CMatrix> llt(s + lambda * CMatrix::Identity(s.rows(), s.cols()));
    if (llt.info() != Eigen::Success) throw LinalgError("loaded_solve: S + lambda I is not positive definite", bin);
    return llt;
}
}  // namespace

CMatrix loaded_solve(const CMatrix& s, double lambda, const CMatrix& rhs, long bin) {
    if (rhs.rows() != s.rows()) throw Error("loaded_solve: right-hand side has wrong size");
    return factor_loaded(s, lambda, bin).solve(rhs);
}

CVector loaded_solve(const CMatrix& s, double lambda, const CVector& rhs, long bin) {
    if (rhs.rows() != s.rows()) throw Error("loaded_solve: right-hand side has wrong size");
    return factor_loaded(s, lambda, bin).solve(rhs);
}

double diag_loading_lambda(double trace, LoadingBounds bounds) {
    return std::min(bounds.max, std::max(bounds.min, trace));
}

double diag_loading_lambda(const CMatrix& target_estimate, LoadingBounds bounds) {
    return diag_loading_lambda(target_estimate.trace().real(), bounds);
}

}  // namespace cmwf

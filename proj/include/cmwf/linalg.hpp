#pragma once

#include <Eigen/Dense>

#include "cmwf/cyclic_spectrum.hpp"

namespace cmwf {

// Generalized Hermitian eigenpairs of (A, B): A q = lambda B q, sorted by
// descending lambda, with B-orthonormal q. Computed by Cholesky whitening
// B = L L^H followed by an ordinary eigendecomposition of L^-1 A L^-H.
struct GevdResult {
    Eigen::VectorXd eigenvalues;
    CMatrix eigenvectors;           // q_i, B-orthonormal
    CMatrix whitened_eigenvectors;  // u_i = L^H q_i, orthonormal
    CMatrix whitening;              // lower Cholesky factor L of B
    bool floored = false;           // B needed a diagonal floor to factor
};

GevdResult gevd(const CMatrix& a, const CMatrix& b);

// Rank-limited target covariance from the top `rank` whitened eigenpairs:
//   L U_r diag(max(lambda - 1, 0)) U_r^H L^H.
CMatrix lowrank_target(const CMatrix& noisy, const CMatrix& noise, std::size_t rank);

// Solves (S + lambda I) w = rhs with a Cholesky factorization.
// Throws LinalgError (tagged with `bin`) if S + lambda I is not positive definite.
CMatrix loaded_solve(const CMatrix& s, double lambda, const CMatrix& rhs, long bin = -1);
CVector loaded_solve(const CMatrix& s, double lambda, const CVector& rhs, long bin = -1);

struct LoadingBounds {
    double min = 1e-9;
    double max = 1e-4;
};

// lambda = min(lambda_max, max(lambda_min, trace))
double diag_loading_lambda(double trace, LoadingBounds bounds = {});
double diag_loading_lambda(const CMatrix& target_estimate, LoadingBounds bounds = {});

}  // namespace cmwf

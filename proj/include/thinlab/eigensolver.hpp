#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <random>
#include <string>

#include "errors.hpp"

namespace thinlab {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct EigenOptions {
    int dense_limit = 500;
    // Neumann stiffness is singular, so the shift sits just below zero
    double shift = -1.0;
    double tol = 1e-10;
    int max_iter = 2000;
    unsigned seed = 12345;
};

struct EigenResult {
    Vec values;
    Mat vectors; // M-orthonormal columns
    int iterations = 0;
    std::string method;
};

namespace detail {

inline double norm1(const SpMat& A) {
    Vec s = Vec::Zero(A.cols());
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) s(it.col()) += std::abs(it.value());
    return s.size() ? s.maxCoeff() : 0.0;
}

inline EigenResult dense_solve(const SpMat& K, const SpMat& M, int n) {
    Mat Kd = Mat(K), Md = Mat(M);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Kd, Md);
    if (es.info() != Eigen::Success) fail(Errc::eigensolver_failure, "dense generalized eigensolver failed");
    EigenResult r;
    r.values = es.eigenvalues().head(n);
    r.vectors = es.eigenvectors().leftCols(n);
    r.iterations = 1;
    r.method = "dense";
    return r;
}

// shift-invert subspace iteration with Rayleigh-Ritz on the pencil (K, M)
inline EigenResult subspace_solve(const SpMat& K, const SpMat& M, int n, const EigenOptions& opt) {
    const int dim = static_cast<int>(K.rows());
    const int p = std::min(dim, std::max(2 * n, n + 10));
    SpMat A = K - opt.shift * M;
    Eigen::SimplicialLDLT<SpMat> ldlt(A);
    if (ldlt.info() != Eigen::Success) fail(Errc::eigensolver_failure, "factorization of K - sigma M failed");

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    Mat X(dim, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < dim; ++i) X(i, j) = nd(rng);

    const double kn = norm1(K), mn = norm1(M);
    EigenResult r;
    r.method = "shift-invert subspace";
    for (int it = 1; it <= opt.max_iter; ++it) {
        Mat Y = ldlt.solve(M * X);
        Mat KY = K * Y, MY = M * Y;
        Mat Kr = Y.transpose() * KY, Mr = Y.transpose() * MY;
        Kr = 0.5 * (Kr + Kr.transpose());
        Mr = 0.5 * (Mr + Mr.transpose());
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Kr, Mr);
        if (es.info() != Eigen::Success) fail(Errc::eigensolver_failure, "Rayleigh-Ritz step failed");
        X = Y * es.eigenvectors();
        Vec th = es.eigenvalues();
        Mat R = K * X.leftCols(n) - (M * X.leftCols(n)) * th.head(n).asDiagonal();
        double worst = 0.0;
        for (int j = 0; j < n; ++j) worst = std::max(worst, R.col(j).norm() / (kn + std::abs(th(j)) * mn));
        if (worst < opt.tol) {
            r.values = th.head(n);
            r.vectors = X.leftCols(n);
            r.iterations = it;
            return r;
        }
    }
    fail(Errc::eigensolver_failure, "subspace iteration did not converge");
}

} // namespace detail

// Lowest n eigenpairs of K v = lambda M v, K symmetric semidefinite, M positive definite.
inline EigenResult solve_generalized(const SpMat& K, const SpMat& M, int n, const EigenOptions& opt = {}) {
    require(n >= 1 && n <= K.rows(), Errc::invalid_argument, "requested eigenpair count out of range");
    EigenResult r = K.rows() <= opt.dense_limit ? detail::dense_solve(K, M, n) : detail::subspace_solve(K, M, n, opt);
    // fixed sign: largest entry of each vector positive
    for (int j = 0; j < r.vectors.cols(); ++j) {
        Eigen::Index imax;
        r.vectors.col(j).cwiseAbs().maxCoeff(&imax);
        if (r.vectors(imax, j) < 0) r.vectors.col(j) *= -1.0;
    }
    return r;
}

} // namespace thinlab

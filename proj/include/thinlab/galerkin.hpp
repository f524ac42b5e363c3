#pragma once

#include <cmath>
#include <random>

#include "eigensolver.hpp"
#include "errors.hpp"

namespace thinlab {

// First N eigenvectors of (K, diag(mass)) as nodal columns.  Nodal
// quadrature makes the basis orthonormal in the same inner product that
// integrates f(u), |u|^q and F(u), so projections and energies agree.
struct GalerkinBasis {
    Mat W;       // nodes x N
    Vec lambda;  // N eigenvalues
    Vec mass;    // lumped nodal weights
    double eps = 0.0;

    int N() const { return static_cast<int>(W.cols()); }
    int nodes() const { return static_cast<int>(W.rows()); }
    double volume() const { return mass.sum(); }

    Vec nodal(const Vec& c) const { return W * c; }
    Vec project(const Vec& values) const { return W.transpose() * mass.cwiseProduct(values); }

    double l2(const Vec& c) const { return c.norm(); }
    // (a(u,u) + |u|^2)^{1/2}, the |.|_eps norm for eps > 0 and the H^1 norm at eps = 0
    double h1(const Vec& c) const { return std::sqrt((lambda.array() + 1.0).matrix().dot(c.cwiseAbs2())); }
    // sum_i m_i |u_i|^q, by repeated products for integer q
    double power_sum(const Vec& u, double q) const {
        int k = static_cast<int>(q);
        if (k != q || k > 16) return mass.dot(u.cwiseAbs().array().pow(q).matrix());
        double s = 0.0;
        for (int i = 0; i < u.size(); ++i) {
            double a = std::abs(u(i)), p = 1.0;
            for (int r = 0; r < k; ++r) p *= a;
            s += mass(i) * p;
        }
        return s;
    }
    double nodal_lq(const Vec& u, double q) const { return std::pow(power_sum(u, q), 1.0 / q); }
    double lq(const Vec& c, double q) const { return nodal_lq(nodal(c), q); }
    double nodal_l2(const Vec& u) const { return std::sqrt(mass.dot(u.cwiseAbs2())); }
};

inline Vec lumped_mass(const SpMat& M) {
    Vec m = Vec::Zero(M.rows());
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it) m(it.row()) += it.value();
    return m;
}

// basis for the pencil (K, diag(mass))
inline GalerkinBasis make_basis(const SpMat& K, const Vec& mass, int N, double eps, const EigenOptions& opt = {}) {
    require(N >= 1 && N <= K.rows(), Errc::invalid_argument, "basis size out of range");
    require(mass.size() == K.rows() && mass.minCoeff() > 0, Errc::quadrature_mismatch, "nodal weights do not match the operator");
    GalerkinBasis b;
    b.mass = mass;
    SpMat D(K.rows(), K.cols());
    D.reserve(Eigen::VectorXi::Ones(K.cols()));
    for (int i = 0; i < K.rows(); ++i) D.insert(i, i) = b.mass(i);
    EigenResult r = solve_generalized(K, D, N, opt);
    b.W = r.vectors;
    b.lambda = r.values.cwiseMax(0.0);
    b.eps = eps;
    return b;
}

inline GalerkinBasis make_basis(const SpMat& K, const SpMat& M, int N, double eps, const EigenOptions& opt = {}) {
    return make_basis(K, lumped_mass(M), N, eps, opt);
}

// every eigenpair of (K, diag(mass)) by a symmetric dense solve
inline GalerkinBasis full_basis(const SpMat& K, const Vec& mass, double eps) {
    require(mass.size() == K.rows() && mass.minCoeff() > 0, Errc::quadrature_mismatch, "nodal weights do not match the operator");
    Vec s = mass.cwiseSqrt().cwiseInverse();
    Mat S = s.asDiagonal() * Mat(K) * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
    require(es.info() == Eigen::Success, Errc::eigensolver_failure, "dense symmetric solve failed");
    GalerkinBasis b;
    b.mass = mass;
    b.W = s.asDiagonal() * es.eigenvectors();
    b.lambda = es.eigenvalues().cwiseMax(0.0);
    b.eps = eps;
    return b;
}

// random coefficient vector with spectral decay (1 + lambda)^{-s/2}, scaled to |.|_H = amplitude
inline Vec random_coefficients(const GalerkinBasis& b, std::mt19937_64& rng, double amplitude, double s) {
    std::normal_distribution<double> nd;
    Vec c(b.N());
    for (int j = 0; j < b.N(); ++j) c(j) = nd(rng) / std::pow(1.0 + b.lambda(j), 0.5 * s);
    double n = b.h1(c);
    return n > 0 ? Vec(c * (amplitude / n)) : c;
}

} // namespace thinlab

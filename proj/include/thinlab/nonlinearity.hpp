#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "galerkin.hpp"

namespace thinlab {

// f(s) = sum_k a_k s^k
class ScalarNonlinearity {
public:
    static ScalarNonlinearity polynomial(std::vector<double> a, std::string name = "polynomial") {
        while (a.size() > 1 && a.back() == 0.0) a.pop_back();
        require(!a.empty(), Errc::config, "polynomial needs coefficients");
        ScalarNonlinearity n;
        n.name_ = std::move(name);
        n.a_ = std::move(a);
        n.finish();
        return n;
    }
    static ScalarNonlinearity linear(double slope) { return polynomial({0.0, slope}, "linear"); }
    // kappa (s - s^3)
    static ScalarNonlinearity cubic_bistable(double kappa = 1.0) {
        return polynomial({0.0, kappa, 0.0, -kappa}, "cubic-bistable");
    }

    double operator()(double s) const {
        double v = 0.0;
        for (size_t k = a_.size(); k-- > 0;) v = v * s + a_[k];
        return v;
    }
    double d1(double s) const {
        double v = 0.0;
        for (size_t k = a_.size(); k-- > 1;) v = v * s + k * a_[k];
        return v;
    }
    // antiderivative with F(0) = 0
    double F(double s) const {
        double v = 0.0;
        for (size_t k = a_.size(); k-- > 0;) v = v * s + a_[k] / (k + 1);
        return v * s;
    }

    const std::string& name() const { return name_; }
    const std::vector<double>& coefficients() const { return a_; }
    int degree() const { return static_cast<int>(a_.size()) - 1; }
    double C() const { return C_; }
    double beta() const { return beta_; }
    double delta0() const { return delta0_; }
    bool dissipative() const { return delta0_ > 0; }
    bool is_linear() const { return degree() <= 1; }

private:
    void finish() {
        int d = degree();
        beta_ = std::max(0, d - 1);
        // |s|^j <= 1 + |s|^beta for j <= beta
        C_ = 0.0;
        for (int k = 1; k <= d; ++k) C_ += k * std::abs(a_[k]);
        if (C_ == 0.0) C_ = 1.0;
        if (d >= 3 && d % 2 == 1 && a_[d] < 0) delta0_ = 0.5;
        else if (d == 1 && a_[1] < 0) delta0_ = -a_[1];
        else delta0_ = 0.0;
    }

    std::string name_;
    std::vector<double> a_;
    double C_ = 0.0, beta_ = 0.0, delta0_ = 0.0;
};

struct GrowthReport {
    bool growth_ok = false;
    bool dissipation_ok = false;
    bool antiderivative_ok = false;
    double s_star = std::numeric_limits<double>::infinity();
    double worst_growth_ratio = 0.0;
    double worst_F_error = 0.0;
};

// grid checks on |s| <= 1e3
inline GrowthReport verify_growth(const ScalarNonlinearity& f, int grid = 20001) {
    GrowthReport r;
    const double smax = 1e3;
    std::vector<double> s(grid);
    for (int i = 0; i < grid; ++i) s[i] = -smax + 2 * smax * i / (grid - 1);
    r.growth_ok = true;
    for (double x : s) {
        double ratio = std::abs(f.d1(x)) / (f.C() * (1 + std::pow(std::abs(x), f.beta())));
        r.worst_growth_ratio = std::max(r.worst_growth_ratio, ratio);
    }
    r.growth_ok = r.worst_growth_ratio <= 1.0;

    // s* = smallest grid |s| beyond which f(s)/s <= -delta0/2 throughout
    if (f.dissipative()) {
        double last_bad = 0.0;
        for (double x : s)
            if (x != 0.0 && f(x) / x > -0.5 * f.delta0()) last_bad = std::max(last_bad, std::abs(x));
        r.s_star = last_bad;
        r.dissipation_ok = last_bad < smax;
    }

    r.antiderivative_ok = true;
    for (double x : s) {
        double h = 1e-5 * std::max(1.0, std::abs(x));
        double cd = (f.F(x + h) - f.F(x - h)) / (2 * h);
        double err = std::abs(cd - f(x)) / std::max(1.0, std::abs(f(x)));
        r.worst_F_error = std::max(r.worst_F_error, err);
    }
    r.antiderivative_ok = r.worst_F_error <= 1e-8;
    return r;
}

// nodal f(u)
inline Vec apply_pointwise(const ScalarNonlinearity& f, const Vec& u) {
    Vec v(u.size());
    for (int i = 0; i < u.size(); ++i) v(i) = f(u(i));
    return v;
}

// P_N f(u) for u = W c
inline Vec nemitski_apply(const ScalarNonlinearity& f, const GalerkinBasis& b, const Vec& c) {
    require(c.size() == b.N(), Errc::quadrature_mismatch, "coefficient vector does not match the basis");
    return b.project(apply_pointwise(f, b.nodal(c)));
}

// |f^(u)|_{L^2} <= Chat (1 + |u|_H^{beta+1}) and |F^(u)|_{L^1} <= Chat (1 + |u|_H^{beta+2})
struct NemitskiBounds {
    double Chat = 0.0;
};

inline double nemitski_l2(const ScalarNonlinearity& f, const GalerkinBasis& b, const Vec& c) {
    return b.nodal_l2(apply_pointwise(f, b.nodal(c)));
}

inline double F_l1(const ScalarNonlinearity& f, const GalerkinBasis& b, const Vec& c) {
    Vec u = b.nodal(c);
    double s = 0.0;
    for (int i = 0; i < u.size(); ++i) s += b.mass(i) * std::abs(f.F(u(i)));
    return s;
}

inline NemitskiBounds estimate_Chat(const ScalarNonlinearity& f, const GalerkinBasis& b, int probes = 200,
                                    unsigned seed = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> la(-3, 2), sd(0.5, 2.5);
    NemitskiBounds nb;
    for (int p = 0; p < probes; ++p) {
        Vec c = random_coefficients(b, rng, std::pow(10.0, la(rng)), sd(rng));
        double n = b.h1(c);
        nb.Chat = std::max(nb.Chat, nemitski_l2(f, b, c) / (1 + std::pow(n, f.beta() + 1)));
        nb.Chat = std::max(nb.Chat, F_l1(f, b, c) / (1 + std::pow(n, f.beta() + 2)));
    }
    nb.Chat *= 1.25;
    return nb;
}

inline bool growth_and_bounds(const ScalarNonlinearity& f, const GalerkinBasis& b, const NemitskiBounds& nb,
                              const Vec& c) {
    double n = b.h1(c);
    return nemitski_l2(f, b, c) <= nb.Chat * (1 + std::pow(n, f.beta() + 1)) &&
           F_l1(f, b, c) <= nb.Chat * (1 + std::pow(n, f.beta() + 2));
}

// Probe set for interpolation constants: constants, single modes and
// random band-limited combinations.
inline std::vector<Vec> probe_set(const GalerkinBasis& b, int random_probes, unsigned seed) {
    std::vector<Vec> out;
    for (int j = 0; j < b.N(); ++j) out.push_back(Vec::Unit(b.N(), j));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> sd(0.0, 3.0);
    for (int p = 0; p < random_probes; ++p) out.push_back(random_coefficients(b, rng, 1.0, sd(rng)));
    return out;
}

inline double gn_ratio(const GalerkinBasis& b, const Vec& c, double q, double theta) {
    double n2 = b.l2(c);
    if (n2 == 0.0) return 0.0;
    return b.lq(c, q) / (std::pow(b.h1(c), theta) * std::pow(n2, 1 - theta));
}

// C1 = 1.25 max over probes of |u|_q / (|u|_H^theta |u|_2^{1-theta})
inline double gagliardo_constant(double q, double theta, const GalerkinBasis& b, int probes = 200, unsigned seed = 7) {
    require(q > 2 && theta > 1 - 2 / q && theta < 1, Errc::invalid_argument, "need q > 2 and 1 - 2/q < theta < 1");
    double m = 0.0;
    for (auto& c : probe_set(b, probes, seed)) m = std::max(m, gn_ratio(b, c, q, theta));
    return 1.25 * m;
}

// |u|_q <= C1 theta rho^{1-theta} |u|_H + C1 (1-theta) rho^{-theta} |u|_2
inline bool splitting_holds(const GalerkinBasis& b, const Vec& c, double q, double theta, double C1, double rho) {
    double lhs = b.lq(c, q);
    double rhs = C1 * theta * std::pow(rho, 1 - theta) * b.h1(c) + C1 * (1 - theta) * std::pow(rho, -theta) * b.l2(c);
    return lhs <= rhs * (1 + 1e-12);
}

struct CutoffOptions {
    double q = 6.0;
    double theta = 0.7;
    double margin = 1.5;
    int probes = 200;
    unsigned seed = 7;
};

// bounded set B: an H^1 ball plus explicit points (e.g. attractor samples)
struct BoundedSet {
    double h1_radius = 1.0;
    std::vector<std::pair<const GalerkinBasis*, Vec>> points;
};

struct CutoffOperator {
    ScalarNonlinearity base = ScalarNonlinearity::linear(0.0);
    double q = 6.0, theta = 0.7, rho = 0.0, M = 0.0, K = 0.0, C1 = 0.0, L = 0.0, l = 0.0;
    double margin = 1.5;
    double volume = 1.0;

    double lo() const { return std::pow(M, q); }
    double hi() const { return std::pow(2 * M, q); }

    // C^1 plateau: 1 below M^q, 0 above (2M)^q, cubic Hermite between
    double phi(double t) const {
        if (t <= lo()) return 1.0;
        if (t >= hi()) return 0.0;
        double s = (t - lo()) / (hi() - lo());
        return 1 - 3 * s * s + 2 * s * s * s;
    }
    double dphi(double t) const {
        if (t <= lo() || t >= hi()) return 0.0;
        double s = (t - lo()) / (hi() - lo());
        return (-6 * s + 6 * s * s) / (hi() - lo());
    }
    double dphi_max() const { return 1.5 / (hi() - lo()); }

    double h(const GalerkinBasis& b, const Vec& c) const { return phi(b.power_sum(b.nodal(c), q)); }

    Vec fhat(const GalerkinBasis& b, const Vec& c) const { return nemitski_apply(base, b, c); }

    Vec g(const GalerkinBasis& b, const Vec& c) const {
        require(c.size() == b.N(), Errc::quadrature_mismatch, "coefficient vector does not match the basis");
        Vec u = b.nodal(c);
        double t = b.power_sum(u, q);
        double hv = phi(t);
        if (hv == 0.0) return Vec::Zero(b.N());
        return hv * b.project(apply_pointwise(base, u));
    }

    // Dg(c) v by the Leibniz rule
    Vec Dg(const GalerkinBasis& b, const Vec& c, const Vec& v) const {
        Vec u = b.nodal(c), w = b.nodal(v);
        double t = b.power_sum(u, q);
        double hv = phi(t), dh = dphi(t);
        if (hv == 0.0 && dh == 0.0) return Vec::Zero(b.N());
        Vec fp(u.size()), fu(u.size());
        double dt = 0.0;
        for (int i = 0; i < u.size(); ++i) {
            fp(i) = base.d1(u(i)) * w(i);
            fu(i) = base(u(i));
            dt += b.mass(i) * q * std::pow(std::abs(u(i)), q - 2) * u(i) * w(i);
        }
        return b.project(hv * fp + dh * dt * fu);
    }

    Vec Dg_fd(const GalerkinBasis& b, const Vec& c, const Vec& v, double step = 1e-6) const {
        return (g(b, c + step * v) - g(b, c)) / step;
    }

    // Jacobian in coefficient space: W^T diag(m h f'(u)) W plus the rank-one cut-off term
    Mat jacobian(const GalerkinBasis& b, const Vec& c) const {
        Vec u = b.nodal(c);
        double t = b.power_sum(u, q);
        double hv = phi(t), dh = dphi(t);
        if (hv == 0.0 && dh == 0.0) return Mat::Zero(b.N(), b.N());
        Vec d(u.size()), fu(u.size()), dt(u.size());
        for (int i = 0; i < u.size(); ++i) {
            d(i) = b.mass(i) * hv * base.d1(u(i));
            fu(i) = b.mass(i) * base(u(i));
            dt(i) = b.mass(i) * q * std::pow(std::abs(u(i)), q - 2) * u(i);
        }
        Mat J = b.W.transpose() * d.asDiagonal() * b.W;
        if (dh != 0.0) J += dh * (b.W.transpose() * fu) * (b.W.transpose() * dt).transpose();
        return J;
    }
};

namespace detail {

// |w|_p <= |Omega|^{1/p - 1/q} |w|_q for p <= q
inline double holder_scale(double volume, double p, double q) { return std::pow(volume, 1 / p - 1 / q); }

// sup over |w|_q = t of |f'(w)|_{L^r}, r = 2q/(q-2), and of |f(w)|_{L^2}
inline std::pair<double, double> polynomial_bounds(const ScalarNonlinearity& f, double volume, double q, double t) {
    const auto& a = f.coefficients();
    double r = 2 * q / (q - 2);
    double dfb = 0.0, fb = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        if (a[k] == 0.0) continue;
        // |w^k|_2 = |w|_{2k}^k
        if (k == 0) fb += std::abs(a[0]) * std::sqrt(volume);
        else fb += std::abs(a[k]) * std::pow(t * holder_scale(volume, 2.0 * k, q), k);
        if (k >= 1) {
            // |w^{k-1}|_r = |w|_{r(k-1)}^{k-1}
            if (k == 1) dfb += std::abs(a[1]) * std::pow(volume, 1 / r);
            else dfb += k * std::abs(a[k]) * std::pow(t * holder_scale(volume, r * (k - 1), q), k - 1);
        }
    }
    return {dfb, fb};
}

} // namespace detail

// Lipschitz constant of g from L^q to L^2 via Hoelder bounds on |w|_q <= 2M:
// |Dg(w)| <= |f'(w)|_{L^r} + sup|phi'| q |w|_q^{q-1} |f(w)|_{L^2}
inline double lipschitz_K(const CutoffOperator& op, int grid = 400) {
    const auto& a = op.base.coefficients();
    double r = 2 * op.q / (op.q - 2);
    for (size_t k = 2; k < a.size(); ++k)
        if (a[k] != 0.0) require(r * (k - 1) <= op.q + 1e-12 && 2.0 * k <= op.q + 1e-12, Errc::hypothesis_violation, "q too small for the growth of f");
    double K = 0.0;
    for (int i = 0; i <= grid; ++i) {
        double t = 2 * op.M * i / grid;
        auto [dfb, fb] = detail::polynomial_bounds(op.base, op.volume, op.q, t);
        K = std::max(K, dfb + op.dphi_max() * op.q * std::pow(t, op.q - 1) * fb);
    }
    return K;
}

// Construct g = h f^ with split constants (L, l).  C1 and the L^q size of B
// are maximised over all supplied discrete spaces.
inline CutoffOperator build_cutoff(const ScalarNonlinearity& f, double l, const BoundedSet& B,
                                   const std::vector<const GalerkinBasis*>& spaces, const CutoffOptions& o = {}) {
    require(l > 0, Errc::invalid_argument, "l must be positive");
    require(!spaces.empty(), Errc::invalid_argument, "no discrete space supplied");
    CutoffOperator op;
    op.base = f;
    op.q = o.q;
    op.theta = o.theta;
    op.margin = o.margin;
    op.l = l;
    require(op.q > 2 && op.q >= 2 * (f.beta() + 1), Errc::hypothesis_violation, "need q > 2 and q >= 2(beta + 1)");
    require(op.theta > 1 - 2 / op.q && op.theta < 1, Errc::invalid_argument, "need 1 - 2/q < theta < 1");

    double ratio = 0.0; // sup |u|_q / |u|_H
    op.volume = spaces.front()->volume();
    for (auto* b : spaces) {
        op.C1 = std::max(op.C1, gagliardo_constant(op.q, op.theta, *b, o.probes, o.seed));
        for (auto& c : probe_set(*b, o.probes, o.seed + 1)) ratio = std::max(ratio, b->lq(c, op.q) / b->h1(c));
    }
    double sizeB = B.h1_radius * ratio;
    for (auto& [b, c] : B.points) sizeB = std::max(sizeB, b->lq(c, op.q));
    op.M = op.margin * sizeB;
    require(op.M > 0, Errc::invalid_argument, "bounded set is trivial");
    op.K = lipschitz_K(op);
    // C1 K theta rho^{1-theta} = l
    op.rho = std::pow(l / (op.C1 * op.K * op.theta), 1 / (1 - op.theta));
    op.L = op.C1 * op.K * (1 - op.theta) * std::pow(op.rho, -op.theta);
    return op;
}

// Linear f is globally Lipschitz from L^2 to L^2: no cut-off, L = |f'|, l free.
inline CutoffOperator linear_operator(const ScalarNonlinearity& f, double l) {
    require(f.is_linear(), Errc::hypothesis_violation, "only linear f is globally Lipschitz");
    require(l > 0, Errc::invalid_argument, "l must be positive");
    require(f.coefficients().empty() || f.coefficients()[0] == 0.0, Errc::invalid_argument, "need f(0) = 0");
    CutoffOperator op;
    op.base = f;
    op.M = std::numeric_limits<double>::infinity();
    op.K = f.degree() >= 1 ? std::abs(f.coefficients()[1]) : 0.0;
    op.L = op.K;
    op.l = l;
    op.C1 = 1.0;
    return op;
}

struct CutoffVerification {
    int pairs = 0;
    int lipschitz_pass = 0;     // |g(u)-g(v)| <= L|u-v|_2 + l|u-v|_H
    int derivative_pass = 0;    // |Dg(u)v| <= L|v|_2 + l|v|_H, Dg by forward differences
    int splitting_pass = 0;     // splitting inequality over probes and rho values
    int splitting_total = 0;
    int boundedness_pass = 0;   // |g(u)| <= |f^(u)| inside 2M and 0 outside
    double sup_g = 0.0;
    int agree_pass = 0;         // g = f^ on points of B
    int agree_total = 0;
    double worst_lipschitz_ratio = 0.0;
    double worst_derivative_ratio = 0.0;

    bool all() const {
        return lipschitz_pass == pairs && derivative_pass == pairs && splitting_pass == splitting_total &&
               boundedness_pass == pairs && agree_pass == agree_total && std::isfinite(sup_g);
    }
};

// Random pairs mix amplitudes well inside U, near its edge and far outside,
// with both small and large separations.
inline CutoffVerification verify_cutoff(const CutoffOperator& op, const GalerkinBasis& b, double B_radius, int pairs = 1000,
                                        int agree_points = 100, unsigned seed = 11) {
    CutoffVerification v;
    v.pairs = pairs;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> sd(0.3, 2.5), U01(0.0, 1.0);
    // amplitude scale at which |u|_q reaches M
    double ratio = 0.0;
    for (auto& c : probe_set(b, 50, seed)) ratio = std::max(ratio, b.lq(c, op.q) / b.h1(c));
    double edge = op.M / ratio;
    for (int p = 0; p < pairs; ++p) {
        double amp = edge * std::pow(10.0, -2 + 3 * U01(rng));
        Vec u = random_coefficients(b, rng, amp, sd(rng));
        double sep = amp * std::pow(10.0, -4 + 4 * U01(rng));
        Vec d = random_coefficients(b, rng, sep, sd(rng));
        Vec w = u + d;
        double lhs = (op.g(b, u) - op.g(b, w)).norm();
        double rhs = op.L * d.norm() + op.l * b.h1(d);
        v.worst_lipschitz_ratio = std::max(v.worst_lipschitz_ratio, lhs / rhs);
        v.lipschitz_pass += lhs <= rhs * (1 + 1e-9);

        Vec dir = random_coefficients(b, rng, 1.0, sd(rng));
        double dl = op.Dg_fd(b, u, dir).norm();
        double dr = op.L * dir.norm() + op.l * b.h1(dir);
        v.worst_derivative_ratio = std::max(v.worst_derivative_ratio, dl / dr);
        v.derivative_pass += dl <= dr * (1 + 1e-6);

        Vec gu = op.g(b, u);
        v.sup_g = std::max(v.sup_g, gu.norm());
        double uq = b.lq(u, op.q);
        bool bounded = uq > 2 * op.M ? gu.norm() == 0.0 : gu.norm() <= op.fhat(b, u).norm() * (1 + 1e-12);
        v.boundedness_pass += bounded;
    }
    for (auto& c : probe_set(b, 100, seed + 3))
        for (double rho : {0.01, 0.1, 1.0, 10.0}) {
            ++v.splitting_total;
            v.splitting_pass += splitting_holds(b, c, op.q, op.theta, op.C1, rho);
        }
    for (int p = 0; p < agree_points; ++p) {
        Vec u = random_coefficients(b, rng, B_radius * U01(rng), sd(rng));
        ++v.agree_total;
        v.agree_pass += (op.g(b, u) - op.fhat(b, u)).norm() == 0.0;
    }
    return v;
}

// V0(u) = 1/2 a(u,u) - int F(u), nodal quadrature
inline double liapunov_V0(const ScalarNonlinearity& f, const GalerkinBasis& b, const Vec& c) {
    Vec u = b.nodal(c);
    double s = 0.0;
    for (int i = 0; i < u.size(); ++i) s += b.mass(i) * f.F(u(i));
    return 0.5 * b.lambda.dot(c.cwiseAbs2()) - s;
}

} // namespace thinlab

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "galerkin.hpp"
#include "gap_analysis.hpp"
#include "nonlinearity.hpp"
#include "squeeze2d.hpp"

namespace thinlab {

namespace detail {

// (e^x - 1) / x
inline double etd_phi1(double x) {
    if (std::abs(x) < 1e-5) return 1 + x / 2 + x * x / 6;
    return std::expm1(x) / x;
}

// int_0^1 tau e^{x tau} dtau
inline double etd_psi(double x) {
    if (std::abs(x) < 0.1) {
        double term = 1.0, s = 0.0;
        for (int n = 0; n < 14; ++n) {
            s += term / (n + 2);
            term *= x / (n + 1);
        }
        return s;
    }
    return (x * std::exp(x) - std::expm1(x)) / (x * x);
}

} // namespace detail

struct SystemOptions {
    double tail_tol = 1e-12;
    double dt_max = 0.01;
    double dt_factor = 0.1; // dt <= dt_factor / lambda_N
};

// Galerkin reduction on N modes split at nu.  Immutable once built; the
// cut-off is shared between systems of an epsilon sweep.
struct GalerkinSystem {
    GalerkinBasis basis;
    int nu = 0;
    double zeta = 0.0, mu = 0.0;
    double L = 0.0, l = 0.0;
    double c1 = 0.0, c2 = 0.0; // C_{nu,1}, C_{nu,2} of the reference spectrum
    double T = 0.0, dt = 0.0;
    double tail_tol = 1e-12;
    std::shared_ptr<const CutoffOperator> cutoff; // null: g == 0

    int N() const { return basis.N(); }
    int steps() const { return static_cast<int>(std::lround(T / dt)); }
    double time(int k) const { return -T + k * dt; }
    double lambda_nu() const { return basis.lambda(nu - 1); }
    double lambda_next() const { return basis.lambda(nu); }

    Vec P1(const Vec& c) const { return c.head(nu); }
    Vec P2(const Vec& c) const { return c.tail(N() - nu); }
    Vec E(const Vec& xi) const {
        Vec c = Vec::Zero(N());
        c.head(nu) = xi;
        return c;
    }
    Vec g(const Vec& c) const { return cutoff ? cutoff->g(basis, c) : Vec::Zero(N()); }
    Mat Dg(const Vec& c) const { return cutoff ? cutoff->jacobian(basis, c) : Mat::Zero(N(), N()); }
    // L|u|_{L^2} + l|u|_eps
    double norm(const Vec& c) const { return L * basis.l2(c) + l * basis.h1(c); }
};

inline GalerkinSystem make_system(const GalerkinBasis& b, int nu, double zeta, double mu, double L, double l,
                                  std::shared_ptr<const CutoffOperator> cutoff, const SystemOptions& o = {}) {
    require(nu >= 1 && nu < b.N(), Errc::invalid_argument, "need 1 <= nu < N");
    require(L >= 0 && l >= 0, Errc::invalid_argument, "L and l must be nonnegative");
    require(zeta <= mu, Errc::invalid_argument, "need zeta <= mu");
    GalerkinSystem s;
    s.basis = b;
    s.nu = nu;
    s.zeta = zeta;
    s.mu = mu;
    s.L = L;
    s.l = l;
    s.cutoff = std::move(cutoff);
    s.tail_tol = o.tail_tol;
    require(s.lambda_nu() < zeta && mu < s.lambda_next(), Errc::no_admissible_nu,
            "weights do not lie strictly between lambda_nu and lambda_{nu+1} of this system");
    s.c1 = c_nu_1(s.lambda_nu(), s.lambda_next());
    s.c2 = c_nu_2(s.lambda_nu(), s.lambda_next());
    // the horizon must also serve the larger weight mu used for derivatives
    s.T = 1.05 * std::log(1.0 / o.tail_tol) / (s.lambda_next() - mu);
    double dt = std::min(o.dt_max, o.dt_factor / std::max(1.0, b.lambda(b.N() - 1)));
    int n = std::max(1, static_cast<int>(std::ceil(s.T / dt)));
    s.dt = s.T / n;
    return s;
}

// zeta and mu from the reference selection (the endpoints of I_nu), the
// eigenvalue blocks from b
inline GalerkinSystem make_system(const GalerkinBasis& b, const NuSelection& sel,
                                  std::shared_ptr<const CutoffOperator> cutoff, const SystemOptions& o = {}) {
    auto [zeta, mu] = zeta_mu_in_interval(sel);
    GalerkinSystem s = make_system(b, sel.nu, zeta, mu, sel.L, sel.l, std::move(cutoff), o);
    s.c1 = sel.c1;
    s.c2 = sel.c2;
    return s;
}

struct HistoryFn {
    double T = 0.0, dt = 0.0;
    double weight = 0.0;
    Mat Y; // N x (steps + 1), column k at t = -T + k dt

    int steps() const { return static_cast<int>(Y.cols()) - 1; }
    double time(int k) const { return -T + k * dt; }
    Vec at(int k) const { return Y.col(k); }
    Vec now() const { return Y.col(Y.cols() - 1); }
};

inline HistoryFn zero_history(const GalerkinSystem& s, double weight) {
    HistoryFn y;
    y.T = s.T;
    y.dt = s.dt;
    y.weight = weight;
    y.Y = Mat::Zero(s.N(), s.steps() + 1);
    return y;
}

inline double weighted_l2(const HistoryFn& y, double w) {
    double m = 0.0;
    for (int k = 0; k <= y.steps(); ++k) m = std::max(m, std::exp(w * y.time(k)) * y.Y.col(k).norm());
    return m;
}

inline double weighted_eps(const GalerkinSystem& s, const HistoryFn& y, double w) {
    double m = 0.0;
    for (int k = 0; k <= y.steps(); ++k) m = std::max(m, std::exp(w * y.time(k)) * s.basis.h1(y.Y.col(k)));
    return m;
}

// sup_t e^{wt} (L|y(t)|_{L^2} + l|y(t)|_eps)
inline double weighted_norm(const GalerkinSystem& s, const HistoryFn& y, double w) {
    double m = 0.0;
    for (int k = 0; k <= y.steps(); ++k) m = std::max(m, std::exp(w * y.time(k)) * s.norm(y.Y.col(k)));
    return m;
}

struct DecayReport {
    int checked = 0;
    int passed = 0;
    double worst[4] = {0, 0, 0, 0}; // lhs / rhs for the four estimates
    bool all() const { return checked == passed; }
};

// The four semigroup estimates on the two blocks, sampled at random (u, t).
inline DecayReport decay_bounds_check(const GalerkinSystem& s, int samples = 100, unsigned seed = 21) {
    DecayReport r;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const Vec& lam = s.basis.lambda;
    const double ln = s.lambda_nu(), lm = s.lambda_next();
    auto check = [&](int which, double lhs, double rhs) {
        ++r.checked;
        double ratio = rhs > 0 ? lhs / rhs : (lhs > 0 ? std::numeric_limits<double>::infinity() : 0.0);
        r.worst[which] = std::max(r.worst[which], ratio);
        r.passed += lhs <= rhs * (1 + 1e-12) + 1e-300;
    };
    for (int k = 0; k < samples; ++k) {
        Vec u = Vec::Zero(s.N());
        for (int j = 0; j < s.N(); ++j) u(j) = nd(rng);
        Vec u1 = u, u2 = u;
        u1.tail(s.N() - s.nu).setZero();
        u2.head(s.nu).setZero();
        // t <= 0 on the low block, t > 0 on the high block
        double tb = -2.0 * ud(rng) / std::max(1.0, ln);
        double tf = k == 0 ? 1.0 / lm : std::pow(10.0, -3 + 3 * ud(rng)) / lm;
        Vec e1 = u1, e2 = u2;
        for (int j = 0; j < s.N(); ++j) {
            e1(j) *= std::exp(-lam(j) * tb);
            e2(j) *= std::exp(-lam(j) * tf);
        }
        check(0, e1.norm(), std::exp(-ln * tb) * u1.norm());
        check(1, e2.norm(), std::exp(-lm * tf) * u2.norm());
        check(2, s.basis.h1(e1), std::sqrt(ln + 1) * std::exp(-ln * tb) * u1.norm());
        check(3, s.basis.h1(e2), (std::sqrt(lm + 1) + C_half / std::sqrt(tf)) * std::exp(-lm * tf) * u2.norm());
    }
    return r;
}

inline void check_tail(const GalerkinSystem& s, double T, double w) {
    require(s.lambda_nu() < w && w < s.lambda_next(), Errc::invalid_argument, "weight outside (lambda_nu, lambda_{nu+1})");
    require(std::exp(-(s.lambda_next() - w) * T) < s.tail_tol, Errc::tail_truncation_too_coarse,
            "history horizon too short for the requested weight");
}

// Exact convolution of the piecewise-linear interpolant of y with the
// exponential kernels: the low block integrated backward from 0, the high
// block forward from -T.
inline HistoryFn apply_K(const GalerkinSystem& s, const HistoryFn& y, double w) {
    require(y.Y.rows() == s.N(), Errc::invalid_argument, "history has the wrong number of modes");
    check_tail(s, y.T, w);
    const int n = y.steps();
    const double dt = y.dt;
    HistoryFn z = y;
    z.weight = w;
    z.Y.setZero();
    for (int j = 0; j < s.N(); ++j) {
        double x = s.basis.lambda(j) * dt;
        if (j < s.nu) {
            double e = std::exp(x), b = dt * detail::etd_psi(x), a = dt * detail::etd_phi1(x) - b;
            for (int k = n - 1; k >= 0; --k) z.Y(j, k) = e * z.Y(j, k + 1) - (a * y.Y(j, k) + b * y.Y(j, k + 1));
        } else {
            double e = std::exp(-x), b = dt * detail::etd_psi(-x), a = dt * detail::etd_phi1(-x) - b;
            for (int k = 0; k < n; ++k) z.Y(j, k + 1) = e * z.Y(j, k) + a * y.Y(j, k + 1) + b * y.Y(j, k);
        }
    }
    return z;
}

// e^{-A_1 t} E xi on the history grid
inline HistoryFn linear_flow(const GalerkinSystem& s, const Vec& xi, double w) {
    require(xi.size() == s.nu, Errc::invalid_argument, "xi must have nu components");
    require(xi.allFinite(), Errc::invalid_argument, "xi must be finite");
    HistoryFn y = zero_history(s, w);
    for (int k = 0; k <= y.steps(); ++k)
        for (int j = 0; j < s.nu; ++j) y.Y(j, k) = std::exp(-s.basis.lambda(j) * y.time(k)) * xi(j);
    return y;
}

inline HistoryFn apply_g(const GalerkinSystem& s, const HistoryFn& y) {
    HistoryFn gy = y;
    if (!s.cutoff) {
        gy.Y.setZero();
        return gy;
    }
    for (int k = 0; k <= y.steps(); ++k) gy.Y.col(k) = s.g(y.Y.col(k));
    return gy;
}

// Gamma(xi, y) = e^{-A_1 t} E xi + K(g o y)
inline HistoryFn apply_Gamma(const GalerkinSystem& s, const Vec& xi, const HistoryFn& y) {
    HistoryFn r = apply_K(s, apply_g(s, y), y.weight);
    r.Y += linear_flow(s, xi, y.weight).Y;
    return r;
}

struct PicardOptions {
    double tol = 1e-10;
    int min_iter = 5;
    int max_iter = 200;
    double violation = 0.6;
    int patience = 3;
    double noise = 1e-14; // relative floor below which differences are roundoff
};

struct PhiResult {
    HistoryFn phi;
    int iterations = 0;
    std::vector<double> diffs;   // successive differences in the weighted norm
    std::vector<double> factors; // ratios of consecutive differences above the floor
    double max_factor = 0.0;
};

namespace detail {

template <class Step>
PhiResult picard(const GalerkinSystem& s, HistoryFn y, double w, Step step, const PicardOptions& o) {
    PhiResult r;
    int bad = 0;
    for (int it = 1; it <= o.max_iter; ++it) {
        HistoryFn next = step(y);
        double d = weighted_norm(s, HistoryFn{next.T, next.dt, w, next.Y - y.Y}, w);
        double floor = o.noise * (1.0 + weighted_norm(s, next, w));
        if (!r.diffs.empty() && r.diffs.back() > 1e3 * floor) {
            double f = d / r.diffs.back();
            r.factors.push_back(f);
            r.max_factor = std::max(r.max_factor, f);
            bad = f > o.violation ? bad + 1 : 0;
            require(bad < o.patience, Errc::contraction_violated,
                    "Picard factor above " + std::to_string(o.violation) + " for " + std::to_string(o.patience) +
                        " consecutive iterations");
        }
        r.diffs.push_back(d);
        y = std::move(next);
        r.iterations = it;
        // an exact fixed point (g == 0) stops at once; otherwise run at least min_iter sweeps
        if (d == 0.0 || (d < o.tol && it >= o.min_iter)) break;
        require(std::isfinite(d), Errc::contraction_violated, "Picard iteration diverged");
    }
    r.phi = std::move(y);
    return r;
}

} // namespace detail

// phi(xi) = Gamma(xi, phi(xi)) at weight zeta, from the linear flow
inline PhiResult solve_phi(const GalerkinSystem& s, const Vec& xi, const PicardOptions& o = {}) {
    HistoryFn y0 = linear_flow(s, xi, s.zeta);
    return detail::picard(s, y0, s.zeta, [&](const HistoryFn& y) { return apply_Gamma(s, xi, y); }, o);
}

inline Vec chart_Lambda(const GalerkinSystem& s, const Vec& xi, const PicardOptions& o = {}) {
    return solve_phi(s, xi, o).phi.now();
}

// Jacobians of g along a solved history
inline std::vector<Mat> history_jacobians(const GalerkinSystem& s, const HistoryFn& phi) {
    std::vector<Mat> J(phi.steps() + 1);
    for (int k = 0; k <= phi.steps(); ++k) J[k] = s.Dg(phi.Y.col(k));
    return J;
}

// D phi(xi) xi' as the fixed point of z = Xi(xi', Dg(phi) z) at weight mu
inline HistoryFn solve_Dphi(const GalerkinSystem& s, const std::vector<Mat>& J, const Vec& dxi, const PicardOptions& o = {}) {
    HistoryFn lin = linear_flow(s, dxi, s.mu);
    PicardOptions po = o;
    po.min_iter = 1;
    po.violation = std::numeric_limits<double>::infinity();
    auto step = [&](const HistoryFn& z) {
        HistoryFn v = z;
        for (int k = 0; k <= z.steps(); ++k) v.Y.col(k) = J[k] * z.Y.col(k);
        HistoryFn r = apply_K(s, v, s.mu);
        r.Y += lin.Y;
        return r;
    };
    return detail::picard(s, lin, s.mu, step, po).phi;
}

inline Vec chart_DLambda(const GalerkinSystem& s, const HistoryFn& phi, const Vec& dxi, const PicardOptions& o = {}) {
    return solve_Dphi(s, history_jacobians(s, phi), dxi, o).now();
}

inline Mat chart_DLambda(const GalerkinSystem& s, const HistoryFn& phi, const PicardOptions& o = {}) {
    auto J = history_jacobians(s, phi);
    Mat D(s.N(), s.nu);
    for (int j = 0; j < s.nu; ++j) D.col(j) = solve_Dphi(s, J, Vec::Unit(s.nu, j), o).now();
    return D;
}

// v(xi) = -Lambda_1 xi + P_1 g(Lambda(xi))
inline Vec reduced_field(const GalerkinSystem& s, const Vec& Lam) {
    Vec xi = s.P1(Lam);
    return -s.basis.lambda.head(s.nu).cwiseProduct(xi) + s.P1(s.g(Lam));
}

inline Mat reduced_jacobian(const GalerkinSystem& s, const Vec& Lam, const Mat& DLam) {
    Mat Dv = s.Dg(Lam).topRows(s.nu) * DLam;
    Dv.diagonal() -= s.basis.lambda.head(s.nu);
    return Dv;
}

struct ChartPoint {
    Vec xi, Lambda, v;
    Mat DLambda, Dv;
    int iterations = 0;
    double max_factor = 0.0;
    int measured = 0; // factors above the noise floor
};

inline ChartPoint chart_point(const GalerkinSystem& s, const Vec& xi, bool derivatives = true, const PicardOptions& o = {}) {
    ChartPoint p;
    p.xi = xi;
    PhiResult r = solve_phi(s, xi, o);
    p.Lambda = r.phi.now();
    p.v = reduced_field(s, p.Lambda);
    p.iterations = r.iterations;
    p.max_factor = r.max_factor;
    p.measured = static_cast<int>(r.factors.size());
    if (derivatives) {
        p.DLambda = chart_DLambda(s, r.phi, o);
        p.Dv = reduced_jacobian(s, p.Lambda, p.DLambda);
    }
    return p;
}

// uniform box [-R, R]^nu with n points per axis
inline std::vector<Vec> box_grid(int nu, double R, int n) {
    require(nu >= 1 && n >= 1 && R >= 0, Errc::invalid_argument, "bad grid");
    std::vector<Vec> pts;
    std::vector<int> idx(nu, 0);
    while (true) {
        Vec x(nu);
        for (int j = 0; j < nu; ++j) x(j) = n == 1 ? 0.0 : -R + 2 * R * idx[j] / (n - 1.0);
        pts.push_back(x);
        int j = 0;
        while (j < nu && ++idx[j] == n) idx[j++] = 0;
        if (j == nu) break;
    }
    return pts;
}

// half-width R with every projected sample inside [-R/2, R/2]^nu
inline double box_radius(const std::vector<Vec>& samples, int nu, double floor = 0.1) {
    double m = 0.0;
    for (auto& c : samples) m = std::max(m, c.head(nu).cwiseAbs().maxCoeff());
    return std::max(2 * m, floor);
}

struct ManifoldChart {
    double eps = 0.0;
    int nu = 0;
    std::vector<ChartPoint> points;

    double identity_error() const {
        double m = 0.0;
        for (auto& p : points) m = std::max(m, (p.Lambda.head(nu) - p.xi).cwiseAbs().maxCoeff());
        return m;
    }
    double max_factor() const {
        double m = 0.0;
        for (auto& p : points) m = std::max(m, p.max_factor);
        return m;
    }
};

inline ManifoldChart build_chart(const GalerkinSystem& s, const std::vector<Vec>& grid, bool derivatives = true,
                                 const PicardOptions& o = {}) {
    ManifoldChart c;
    c.eps = s.basis.eps;
    c.nu = s.nu;
    c.points.reserve(grid.size());
    for (auto& xi : grid) c.points.push_back(chart_point(s, xi, derivatives, o));
    return c;
}

struct FdReport {
    double worst_DLambda = 0.0; // relative, per column
    double worst_Dv = 0.0;      // absolute over the Jacobian, scaled by 1 + |Dv|
};

// central differences of Lambda and v against the analytic derivatives
inline FdReport derivative_check(const GalerkinSystem& s, const ChartPoint& p, double step = 1e-4,
                                 const PicardOptions& o = {}) {
    FdReport r;
    PicardOptions po = o;
    po.tol = std::min(o.tol, 1e-12);
    for (int j = 0; j < s.nu; ++j) {
        Vec e = Vec::Unit(s.nu, j) * step;
        Vec Lp = chart_Lambda(s, p.xi + e, po), Lm = chart_Lambda(s, p.xi - e, po);
        Vec fd = (Lp - Lm) / (2 * step);
        Vec an = p.DLambda.col(j);
        r.worst_DLambda = std::max(r.worst_DLambda, (fd - an).norm() / std::max(an.norm(), 1e-300));
        Vec dv = (reduced_field(s, Lp) - reduced_field(s, Lm)) / (2 * step);
        r.worst_Dv = std::max(r.worst_Dv, (dv - p.Dv.col(j)).norm() / (1 + p.Dv.col(j).norm()));
    }
    return r;
}

struct KernelCheck {
    int histories = 0;
    int l2_pass = 0;    // |K y|_{zeta,L2} <= bracket |y|_{zeta,L2}
    int eps_pass = 0;   // |K y|_{zeta,eps} <= bracket_eps |y|_{zeta,L2}
    int half_pass = 0;  // ||K y||_{zeta,eps} <= 1/2 |y|_{zeta,L2}
    int contraction_pass = 0; // ||Gamma(xi,y) - Gamma(xi,w)|| <= 1/2 ||y - w||
    double worst_l2 = 0.0, worst_eps = 0.0, worst_half = 0.0, worst_contraction = 0.0;
    bool all() const {
        return l2_pass == histories && eps_pass == histories && half_pass == histories && contraction_pass == histories;
    }
};

namespace detail {

// smooth random history with e^{-w t} growth toward the past
inline HistoryFn random_history(const GalerkinSystem& s, double w, double amplitude, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    HistoryFn y = zero_history(s, w);
    Vec a(s.N()), b(s.N());
    for (int j = 0; j < s.N(); ++j) {
        a(j) = nd(rng) / std::sqrt(1 + s.basis.lambda(j));
        b(j) = nd(rng) / std::sqrt(1 + s.basis.lambda(j));
    }
    double om = 1 + 20 * ud(rng), decay = ud(rng);
    for (int k = 0; k <= y.steps(); ++k) {
        double t = y.time(k);
        y.Y.col(k) = std::exp(-w * decay * t) * (a * std::cos(om * t) + b * std::sin(om * t));
    }
    double n = weighted_eps(s, y, w);
    if (n > 0) y.Y *= amplitude / n;
    return y;
}

} // namespace detail

// Kernel and contraction bounds on random histories.  The sup of the
// interpolant can exceed the grid sup by e^{w dt}; that factor is allowed.
inline KernelCheck kernel_bounds_check(const GalerkinSystem& s, int histories = 100, unsigned seed = 31) {
    KernelCheck r;
    r.histories = histories;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const double w = s.zeta, slack = std::exp(w * s.dt) * (1 + 1e-12);
    const double br2 = bracket_L2(s.lambda_nu(), s.lambda_next(), w);
    const double bre = bracket_eps(s.lambda_nu(), s.lambda_next(), w);
    double edge = s.cutoff ? s.cutoff->M : 1.0;
    for (int i = 0; i < histories; ++i) {
        HistoryFn y = detail::random_history(s, w, edge * std::pow(10.0, -1 + 1.5 * ud(rng)), rng);
        double ny = weighted_l2(y, w);
        HistoryFn ky = apply_K(s, y, w);
        double a = weighted_l2(ky, w) / (br2 * ny), b = weighted_eps(s, ky, w) / (bre * ny),
               c = weighted_norm(s, ky, w) / (0.5 * ny);
        r.worst_l2 = std::max(r.worst_l2, a);
        r.worst_eps = std::max(r.worst_eps, b);
        r.worst_half = std::max(r.worst_half, c);
        r.l2_pass += a <= slack;
        r.eps_pass += b <= slack;
        r.half_pass += c <= slack;

        HistoryFn z = detail::random_history(s, w, edge * std::pow(10.0, -3 + 3 * ud(rng)), rng);
        z.Y += y.Y;
        Vec xi = y.now().head(s.nu);
        double lhs = weighted_norm(s, HistoryFn{y.T, y.dt, w, apply_Gamma(s, xi, y).Y - apply_Gamma(s, xi, z).Y}, w);
        double rhs = 0.5 * weighted_norm(s, HistoryFn{y.T, y.dt, w, y.Y - z.Y}, w);
        double d = rhs > 0 ? lhs / rhs : 0.0;
        r.worst_contraction = std::max(r.worst_contraction, d);
        r.contraction_pass += d <= slack;
    }
    return r;
}

// tail of the high block beyond N: the decay estimates bound its effect by
// e^{-lambda_{N+1} t}, reported through the largest retained eigenvalue
inline double truncation_decay(const GalerkinSystem& s, double t) { return std::exp(-s.basis.lambda(s.N() - 1) * t); }

// Galerkin bases of one squeezed domain for a list of epsilons together with
// the graph limit on the same x-nodes.  Nodal weights are the trapezoid
// weights of the tensor cells, whose column sums are the graph weights, so
// the lift is an isometry in the nodal inner products.
struct SqueezedFamily {
    RectUnionDomain domain;
    Triangulation mesh;
    GraphLimit limit;
    SpMat K0;
    GalerkinBasis graph;
    Vec weights; // 2-D nodal weights
    std::vector<double> eps;
    std::vector<AnisotropicOperator> ops;
    std::vector<GalerkinBasis> bases;

    Vec lift_coefficients(const Vec& c0) const { return limit.lift(graph.nodal(c0)); }

    // |W_e c - lift(W_0 c0)|_eps; i < 0 compares two graph vectors in |.|_{H^1}
    double distance(int i, const Vec& c, const Vec& c0) const {
        if (i < 0) return graph.h1(c - c0);
        Vec d = bases[i].nodal(c) - lift_coefficients(c0);
        const auto& op = ops[i];
        double a = d.dot(op.Kx * d) + d.dot(op.Ky * d) / (op.eps * op.eps) + d.dot(weights.cwiseProduct(d));
        return std::sqrt(std::max(0.0, a));
    }
};

// flip each epsilon mode to a nonnegative overlap with the lifted graph mode
inline void align_to_graph(GalerkinBasis& b, const SqueezedFamily& fam) {
    for (int j = 0; j < std::min(b.N(), fam.graph.N()); ++j) {
        double o = b.W.col(j).dot(fam.weights.cwiseProduct(fam.lift_coefficients(Vec::Unit(fam.graph.N(), j))));
        if (o < 0) b.W.col(j) *= -1.0;
    }
}

inline SqueezedFamily squeezed_family(const RectUnionDomain& d, const std::vector<double>& eps, double h, int N,
                                      const EigenOptions& opt = {}) {
    require(!eps.empty(), Errc::invalid_argument, "empty epsilon list");
    for (size_t i = 0; i < eps.size(); ++i) {
        require(eps[i] > 0, Errc::invalid_argument, "epsilon must be positive");
        require(i == 0 || eps[i] < eps[i - 1], Errc::invalid_argument, "epsilons must be strictly decreasing");
    }
    SqueezedFamily fam;
    fam.domain = d;
    fam.mesh = triangulate(d, h);
    fam.limit = graph_limit(d, fam.mesh);
    auto [K0, M0] = assemble_graph(fam.limit.graph, fam.limit.mesh);
    fam.K0 = K0;
    fam.graph = make_basis(K0, M0, N, 0.0, opt);
    fam.weights = trapezoid_weights(fam.mesh);
    fam.eps = eps;
    for (double e : eps) {
        fam.ops.push_back(assemble_anisotropic(fam.mesh, e));
        GalerkinBasis b = make_basis(fam.ops.back().A(), fam.weights, N, e, opt);
        align_to_graph(b, fam);
        fam.bases.push_back(std::move(b));
    }
    return fam;
}

struct ManifoldSetup {
    ScalarNonlinearity f = ScalarNonlinearity::cubic_bistable(1e-3);
    double l = 0.1;
    double L = 0.0; // lower bound on L; the cut-off value wins when larger
    double B_radius = 1.0;
    int N = 6;
    double h = 1.0 / 16;
    int nu = 0; // 0 selects the smallest admissible nu
    CutoffOptions cutoff;
    SystemOptions system;
    PicardOptions picard;
};

struct SweepSystems {
    SqueezedFamily family;
    std::shared_ptr<const CutoffOperator> cut;
    NuSelection selection;
    GalerkinSystem graph;
    std::vector<GalerkinSystem> systems;
};

// One cut-off for the whole sweep (constants maximised over every space),
// nu selected on the graph spectrum and required to agree for each epsilon.
inline SweepSystems build_sweep(const RectUnionDomain& d, const std::vector<double>& eps, const ManifoldSetup& st) {
    SweepSystems sw;
    sw.family = squeezed_family(d, eps, st.h, st.N);
    std::vector<const GalerkinBasis*> spaces{&sw.family.graph};
    for (auto& b : sw.family.bases) spaces.push_back(&b);
    BoundedSet B;
    B.h1_radius = st.B_radius;
    sw.cut = std::make_shared<CutoffOperator>(build_cutoff(st.f, st.l, B, spaces, st.cutoff));
    const double L = std::max(sw.cut->L, st.L), l = sw.cut->l;
    if (st.nu > 0) {
        sw.selection = make_selection(sw.family.graph.lambda, st.nu, L, l);
        require(admissible(sw.selection), Errc::no_admissible_nu, "requested nu violates L C1 < 1/4 or l C2 < 1/4");
    } else {
        sw.selection = select_nu(sw.family.graph.lambda, L, l);
    }
    for (auto& b : sw.family.bases) {
        int nu_e = st.nu > 0 ? st.nu : select_nu(b.lambda, L, l).nu;
        require(nu_e == sw.selection.nu, Errc::nu_mismatch,
                "epsilon = " + std::to_string(b.eps) + " selects nu = " + std::to_string(nu_e) + ", graph selects " +
                    std::to_string(sw.selection.nu));
    }
    sw.graph = make_system(sw.family.graph, sw.selection, sw.cut, st.system);
    for (auto& b : sw.family.bases) sw.systems.push_back(make_system(b, sw.selection, sw.cut, st.system));
    return sw;
}

struct ConvergenceRow {
    double eps = 0.0;
    double dLambda = 0.0, dDLambda = 0.0, dv = 0.0, dDv = 0.0;
};

struct ConvergenceTable {
    int nu = 0;
    std::vector<ConvergenceRow> rows; // sweep order, then the graph limit against itself
    ManifoldChart graph;
    std::vector<ManifoldChart> charts;

    // each column nonincreasing as epsilon decreases, up to noise
    bool monotone(double noise = 1e-8) const {
        for (size_t i = 1; i < rows.size(); ++i) {
            const auto &a = rows[i - 1], &b = rows[i];
            if (b.dLambda > a.dLambda + noise || b.dDLambda > a.dDLambda + noise || b.dv > a.dv + noise ||
                b.dDv > a.dDv + noise)
                return false;
        }
        return true;
    }
};

inline ConvergenceRow compare_charts(const SqueezedFamily& fam, int i, const ManifoldChart& ce, const ManifoldChart& c0) {
    require(ce.points.size() == c0.points.size(), Errc::invalid_argument, "charts on different grids");
    ConvergenceRow r;
    r.eps = i < 0 ? 0.0 : fam.eps[i];
    for (size_t k = 0; k < ce.points.size(); ++k) {
        const auto &p = ce.points[k], &q = c0.points[k];
        r.dLambda = std::max(r.dLambda, fam.distance(i, p.Lambda, q.Lambda));
        double dd = 0.0;
        for (int j = 0; j < ce.nu; ++j) dd += fam.distance(i, p.DLambda.col(j), q.DLambda.col(j));
        r.dDLambda = std::max(r.dDLambda, dd);
        r.dv = std::max(r.dv, (p.v - q.v).norm());
        double dj = 0.0;
        for (int j = 0; j < ce.nu; ++j) dj += (p.Dv.col(j) - q.Dv.col(j)).norm();
        r.dDv = std::max(r.dDv, dj);
    }
    return r;
}

inline ConvergenceTable epsilon_compare(const SweepSystems& sw, const std::vector<Vec>& grid, const PicardOptions& o = {}) {
    ConvergenceTable t;
    t.nu = sw.selection.nu;
    t.graph = build_chart(sw.graph, grid, true, o);
    for (size_t i = 0; i < sw.systems.size(); ++i) {
        t.charts.push_back(build_chart(sw.systems[i], grid, true, o));
        t.rows.push_back(compare_charts(sw.family, static_cast<int>(i), t.charts.back(), t.graph));
    }
    t.rows.push_back(compare_charts(sw.family, -1, t.graph, t.graph));
    return t;
}

inline ConvergenceTable epsilon_compare(const RectUnionDomain& d, const std::vector<double>& eps, const std::vector<Vec>& grid,
                                        const ManifoldSetup& st = {}) {
    return epsilon_compare(build_sweep(d, eps, st), grid, st.picard);
}

// W = V0 o Lambda_0 and its gradient DLambda_0^T (Lambda c - f^(c))
struct LevelValue {
    double W = 0.0;
    Vec grad;
};

inline LevelValue level_function(const GalerkinSystem& s0, const ScalarNonlinearity& f, const Vec& xi, bool gradient,
                                 const PicardOptions& o = {}) {
    LevelValue r;
    PhiResult ph = solve_phi(s0, xi, o);
    Vec c = ph.phi.now();
    r.W = liapunov_V0(f, s0.basis, c);
    if (gradient) {
        Vec dV = s0.basis.lambda.cwiseProduct(c) - nemitski_apply(f, s0.basis, c);
        r.grad = chart_DLambda(s0, ph.phi, o).transpose() * dV;
    }
    return r;
}

struct NeighborhoodReport {
    double M0 = 0.0;
    double W_origin = 0.0;
    bool origin_inside = false;
    std::vector<Vec> level_points;         // xi on {W = M0}
    std::vector<std::vector<double>> flux; // [system][point] grad W . v
    double max_flux = -std::numeric_limits<double>::infinity();
    double max_level_lq = 0.0;             // largest |Lambda_0(xi)|_q on the level set
    bool inside_U = true;                  // level set mapped into |u|_q < M
};

// V = {W < M0} found along rays from the origin; the flux of each reduced
// field through {W = M0} must be strictly negative.
inline NeighborhoodReport invariant_neighborhood(const GalerkinSystem& s0, const ScalarNonlinearity& f, double M0,
                                                 const std::vector<const GalerkinSystem*>& fields, int rays = 8,
                                                 unsigned seed = 41, const PicardOptions& o = {}) {
    NeighborhoodReport r;
    r.M0 = M0;
    const int nu = s0.nu;
    r.W_origin = level_function(s0, f, Vec::Zero(nu), false, o).W;
    r.origin_inside = r.W_origin < M0;
    require(r.origin_inside, Errc::invalid_argument, "M0 must exceed W at the origin");
    std::vector<Vec> dirs;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (int k = 0; k < rays; ++k) {
        Vec d(nu);
        if (nu == 1) d(0) = k % 2 ? -1.0 : 1.0;
        else if (nu == 2) d << std::cos(2 * M_PI * k / rays), std::sin(2 * M_PI * k / rays);
        else for (int j = 0; j < nu; ++j) d(j) = nd(rng);
        dirs.push_back(d.normalized());
    }
    for (auto& d : dirs) {
        auto W = [&](double t) { return level_function(s0, f, t * d, false, o).W - M0; };
        double a = 0.0, fa = r.W_origin - M0, b = 0.05, fb = W(b);
        while (fb < 0) {
            a = b;
            fa = fb;
            b *= 1.5;
            require(b < 1e4, Errc::invalid_argument, "level set not reached along a ray");
            fb = W(b);
        }
        // Illinois false position
        int side = 0;
        for (int it = 0; it < 100 && b - a > 1e-12 * b; ++it) {
            double c = (a * fb - b * fa) / (fb - fa), fc = W(c);
            if (std::abs(fc) < 1e-13 * (1 + std::abs(M0))) {
                a = b = c;
                break;
            }
            if (fc < 0) {
                a = c;
                fa = fc;
                if (side == -1) fb /= 2;
                side = -1;
            } else {
                b = c;
                fb = fc;
                if (side == 1) fa /= 2;
                side = 1;
            }
        }
        r.level_points.push_back(0.5 * (a + b) * d);
    }
    r.flux.assign(fields.size(), {});
    std::string bad;
    for (auto& xi : r.level_points) {
        LevelValue lv = level_function(s0, f, xi, true, o);
        Vec L0 = chart_Lambda(s0, xi, o);
        if (s0.cutoff) {
            double lq = s0.basis.lq(L0, s0.cutoff->q);
            r.max_level_lq = std::max(r.max_level_lq, lq);
            r.inside_U = r.inside_U && lq < s0.cutoff->M;
        }
        for (size_t i = 0; i < fields.size(); ++i) {
            Vec v = reduced_field(*fields[i], chart_Lambda(*fields[i], xi, o));
            double fl = lv.grad.dot(v);
            r.flux[i].push_back(fl);
            r.max_flux = std::max(r.max_flux, fl);
            if (!(fl < 0)) {
                bad += " [";
                for (int j = 0; j < nu; ++j) bad += (j ? ", " : "") + std::to_string(xi(j));
                bad += "]";
            }
        }
    }
    require(bad.empty(), Errc::flux_sign_violation, "nonnegative flux at" + bad);
    return r;
}

} // namespace thinlab

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace thinlab {

// sup_{s>0} s^{1/2} e^{-s}
inline const double C_half = 1.0 / std::sqrt(2.0 * M_E);
// C_half times int_0^inf s^{-1/2} e^{-s} ds
inline const double C_half_prime = std::sqrt(M_PI) / std::sqrt(2.0 * M_E);

struct GapReport {
    Eigen::VectorXd lambda;
    std::vector<int> nu;         // 1-based index of each ratio
    std::vector<double> ratio;   // (lambda_{nu+1} - lambda_nu) / lambda_nu^{1/2}
    int tail_start = 0;          // first nu of the tail window
    double running_max = 0.0;    // max ratio over the tail window
    double trend_slope = 0.0;    // least-squares slope of the ratio over the tail
    std::vector<int> candidates; // nu with a positive gap, largest ratio first
    double c1_estimate = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double zero_floor(const Eigen::VectorXd& v) {
    return 1e-10 * std::max(1.0, v.cwiseAbs().maxCoeff());
}

inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    if (n < 2) return 0.0;
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0 ? sxy / sxx : 0.0;
}

} // namespace detail

// Ratios for every nu with lambda_nu > 0.  The limsup is undecidable from a
// finite window, so the report carries the tail max and its trend.
inline GapReport gap_ratios(const Eigen::VectorXd& lambda) {
    const int n = static_cast<int>(lambda.size());
    require(n >= 3, Errc::invalid_argument, "gap ratios need at least three eigenvalues");
    GapReport r;
    r.lambda = lambda;
    const double floor = detail::zero_floor(lambda);
    for (int nu = 1; nu < n; ++nu) {
        double l = lambda(nu - 1);
        if (l <= floor) continue;
        r.nu.push_back(nu);
        r.ratio.push_back(std::max(0.0, lambda(nu) - l) / std::sqrt(l));
    }
    r.tail_start = (n + 1) / 2;
    std::vector<double> tx, ty;
    for (size_t i = 0; i < r.nu.size(); ++i) {
        if (r.nu[i] < r.tail_start) continue;
        r.running_max = std::max(r.running_max, r.ratio[i]);
        tx.push_back(r.nu[i]);
        ty.push_back(r.ratio[i]);
    }
    r.trend_slope = detail::ls_slope(tx, ty);

    std::vector<size_t> idx;
    for (size_t i = 0; i < r.nu.size(); ++i)
        if (lambda(r.nu[i]) - lambda(r.nu[i] - 1) > floor) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return r.ratio[a] > r.ratio[b]; });
    for (size_t i : idx) r.candidates.push_back(r.nu[i]);
    // along the subsequence realising the limsup, lambda^{1/2}/gap -> 1/limsup
    if (r.running_max > 0) r.c1_estimate = 1.0 / r.running_max;
    return r;
}

struct Myp0Verdict {
    double growth_tail_max = 0.0; // max of lambda_nu / nu^2 over the tail
    double growth_exponent = 0.0; // log-log slope of lambda_nu / nu^2 over the tail
    bool growth_holds = false;    // limsup lambda_nu / nu^2 > 0, judged by a non-decaying tail
    bool upper_bound_holds = false;
    int first_violation = 0;      // nu where lambda_nu > beta^2 nu^2, 0 if none
    bool applies = false;
};

// Both hypotheses of the quadratic-growth route to the gap condition on the
// computed window.  A tail of lambda/nu^2 decaying like nu^{-a} with a >= 1/4
// is read as a vanishing limsup.
inline Myp0Verdict myp0_diagnostic(const Eigen::VectorXd& lambda, double beta) {
    const int n = static_cast<int>(lambda.size());
    require(n >= 3, Errc::invalid_argument, "diagnostic needs at least three eigenvalues");
    require(beta > 0, Errc::invalid_argument, "beta must be positive");
    Myp0Verdict v;
    const double floor = detail::zero_floor(lambda);
    std::vector<double> lx, ly;
    for (int nu = (n + 1) / 2; nu <= n; ++nu) {
        double g = lambda(nu - 1) / (static_cast<double>(nu) * nu);
        v.growth_tail_max = std::max(v.growth_tail_max, g);
        if (lambda(nu - 1) > floor) {
            lx.push_back(std::log(nu));
            ly.push_back(std::log(g));
        }
    }
    v.growth_exponent = lx.size() >= 2 ? detail::ls_slope(lx, ly) : -std::numeric_limits<double>::infinity();
    v.growth_holds = v.growth_tail_max > 0 && v.growth_exponent > -0.25;
    v.upper_bound_holds = true;
    for (int nu = 1; nu <= n; ++nu)
        if (lambda(nu - 1) > beta * beta * nu * nu * (1 + 1e-12)) {
            v.upper_bound_holds = false;
            v.first_violation = nu;
            break;
        }
    v.applies = v.growth_holds && v.upper_bound_holds;
    return v;
}

// sup over zeta in I_nu of 1/(zeta - a) + 1/(b - zeta) is below c_nu_1
inline double bracket_L2(double lam_nu, double lam_next, double zeta) {
    return 1.0 / (zeta - lam_nu) + 1.0 / (lam_next - zeta);
}

inline double bracket_eps(double lam_nu, double lam_next, double zeta) {
    return std::sqrt(lam_nu + 1) / (zeta - lam_nu) + std::sqrt(lam_next + 1) / (lam_next - zeta) +
           C_half_prime / std::sqrt(lam_next - zeta);
}

inline double c_nu_1(double lam_nu, double lam_next) { return 6.0 / (lam_next - lam_nu); }

inline double c_nu_2(double lam_nu, double lam_next) {
    double d = lam_next - lam_nu;
    return 3.0 * std::sqrt(lam_nu + 1) / d + 3.0 * std::sqrt(lam_next + 1) / d + std::sqrt(3.0) * C_half_prime / std::sqrt(d);
}

struct NuSelection {
    int nu = 0; // 1-based
    double lambda_nu = 0.0, lambda_next = 0.0, delta = 0.0;
    double eta = 0.0;
    double I_lo = 0.0, I_hi = 0.0;
    double c1 = 0.0, c2 = 0.0;
    double L = 0.0, l = 0.0;
};

inline NuSelection make_selection(const Eigen::VectorXd& lambda, int nu, double L, double l) {
    require(nu >= 1 && nu < lambda.size(), Errc::invalid_argument, "nu outside the computed window");
    NuSelection s;
    s.nu = nu;
    s.lambda_nu = lambda(nu - 1);
    s.lambda_next = lambda(nu);
    s.delta = s.lambda_next - s.lambda_nu;
    require(s.delta > 0, Errc::no_admissible_nu, "no gap at the requested nu");
    s.eta = s.delta / 5.0;
    s.I_lo = s.lambda_nu + 2 * s.eta;
    s.I_hi = s.lambda_nu + 3 * s.eta;
    s.c1 = c_nu_1(s.lambda_nu, s.lambda_next);
    s.c2 = c_nu_2(s.lambda_nu, s.lambda_next);
    s.L = L;
    s.l = l;
    return s;
}

inline bool admissible(const NuSelection& s) { return s.L * s.c1 < 0.25 && s.l * s.c2 < 0.25; }

// smallest candidate nu with L C_{nu,1} < 1/4 and l C_{nu,2} < 1/4
inline NuSelection select_nu(const Eigen::VectorXd& lambda, double L, double l) {
    require(L > 0 && l > 0, Errc::invalid_argument, "L and l must be positive");
    GapReport rep = gap_ratios(lambda);
    std::vector<int> c = rep.candidates;
    std::sort(c.begin(), c.end());
    for (int nu : c) {
        NuSelection s = make_selection(lambda, nu, L, l);
        if (admissible(s)) return s;
    }
    fail(Errc::no_admissible_nu, "no computed nu satisfies the admissibility bounds; compute more eigenvalues or shrink l");
}

// endpoints of I_nu
inline std::pair<double, double> zeta_mu_in_interval(const NuSelection& s) {
    require(s.I_hi > s.I_lo, Errc::invalid_argument, "empty interval");
    return {s.I_lo, s.I_hi};
}

struct GapRow {
    int nu = 0;
    double lambda = 0.0, delta = 0.0, ratio = 0.0, c1 = 0.0, c2 = 0.0;
    bool admissible = false;
};

inline std::vector<GapRow> gap_table(const Eigen::VectorXd& lambda, double L, double l) {
    GapReport rep = gap_ratios(lambda);
    std::vector<GapRow> rows;
    for (size_t i = 0; i < rep.nu.size(); ++i) {
        GapRow r;
        r.nu = rep.nu[i];
        r.lambda = lambda(r.nu - 1);
        r.delta = lambda(r.nu) - r.lambda;
        r.ratio = rep.ratio[i];
        if (r.delta > 0) {
            r.c1 = c_nu_1(r.lambda, lambda(r.nu));
            r.c2 = c_nu_2(r.lambda, lambda(r.nu));
            r.admissible = L * r.c1 < 0.25 && l * r.c2 < 0.25;
        } else {
            r.c1 = r.c2 = std::numeric_limits<double>::infinity();
        }
        rows.push_back(r);
    }
    return rows;
}

} // namespace thinlab

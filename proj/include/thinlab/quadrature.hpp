#pragma once

#include <array>
#include <cmath>
#include <utility>
#include <vector>

namespace thinlab {

// 2-point Gauss rule on the reference cell [0, 1]
inline constexpr std::array<double, 2> gauss2_nodes{0.21132486540518713, 0.78867513459481287};
inline constexpr std::array<double, 2> gauss2_weights{0.5, 0.5};

// n-point Gauss-Legendre rule on [-1, 1] by Newton on P_n
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(n), w(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) { p1 = z; p0 = 1.0; }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

// composite Gauss integral of f on [a, b] with m panels
template <class F>
double integrate(F&& f, double a, double b, int panels = 64, int order = 8) {
    static thread_local std::vector<double> gx, gw;
    static thread_local int cached = 0;
    if (cached != order) {
        auto r = gauss_legendre(order);
        gx = r.first;
        gw = r.second;
        cached = order;
    }
    double h = (b - a) / panels, s = 0.0;
    for (int p = 0; p < panels; ++p) {
        double c = a + (p + 0.5) * h;
        for (int i = 0; i < order; ++i) s += gw[i] * f(c + 0.5 * h * gx[i]);
    }
    return 0.5 * h * s;
}

} // namespace thinlab

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "manifold.hpp"

namespace thinlab {

// right-hand side G(c) of c' = -Lambda c + G(c) in coefficient space
using Field = std::function<Vec(const Vec&)>;

inline Field fhat_field(const GalerkinBasis& b, const ScalarNonlinearity& f) {
    const GalerkinBasis* pb = &b;
    return [pb, f](const Vec& c) { return nemitski_apply(f, *pb, c); };
}

inline Field g_field(const GalerkinSystem& s) {
    const GalerkinSystem* ps = &s;
    return [ps](const Vec& c) { return ps->g(c); };
}

inline Field zero_field(int N) {
    return [N](const Vec&) { return Vec::Zero(N); };
}

struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> c;
};

struct TrajectorySet {
    double eps = 0.0;
    std::string scheme = "ETD1";
    double dt = 0.0;
    std::vector<Vec> initial;
    std::vector<Trajectory> members;
};

struct IntegrateOptions {
    int stride = 1;         // record every stride steps (and the final state)
    double blowup = 1e9;
};

// Exponential Euler: c+ = e^{-Lambda dt} c + dt phi1(-Lambda dt) G(c)
inline Trajectory integrate(const GalerkinBasis& b, const Field& G, const Vec& c0, double T, double dt,
                            const IntegrateOptions& o = {}) {
    require(c0.size() == b.N(), Errc::invalid_argument, "initial state has the wrong number of modes");
    require(T >= 0 && dt > 0, Errc::invalid_argument, "need T >= 0 and dt > 0");
    const int n = static_cast<int>(std::ceil(T / dt - 1e-9));
    const double h = n > 0 ? T / n : dt;
    Vec E(b.N()), P(b.N());
    for (int j = 0; j < b.N(); ++j) {
        double x = b.lambda(j) * h;
        E(j) = std::exp(-x);
        P(j) = h * detail::etd_phi1(-x);
    }
    Trajectory tr;
    Vec c = c0;
    tr.t.push_back(0.0);
    tr.c.push_back(c);
    for (int k = 1; k <= n; ++k) {
        c = E.cwiseProduct(c) + P.cwiseProduct(G(c));
        if (!c.allFinite() || c.norm() > o.blowup)
            fail(Errc::blow_up, "state norm exceeded " + std::to_string(o.blowup) + " at t = " + std::to_string(k * h));
        if (k % o.stride == 0 || k == n) {
            tr.t.push_back(k * h);
            tr.c.push_back(c);
        }
    }
    return tr;
}

inline Vec flow(const GalerkinBasis& b, const Field& G, const Vec& c0, double T, double dt) {
    IntegrateOptions o;
    o.stride = std::numeric_limits<int>::max();
    return integrate(b, G, c0, T, dt, o).c.back();
}

enum class Which { fhat, g };

inline Trajectory integrate(const GalerkinSystem& s, const Vec& c0, double T, double dt, Which which,
                            const IntegrateOptions& o = {}) {
    require(which == Which::g || s.cutoff, Errc::invalid_argument, "f^ needs a nonlinearity");
    Field G = which == Which::g ? g_field(s) : fhat_field(s.basis, s.cutoff->base);
    return integrate(s.basis, G, c0, T, dt, o);
}

inline TrajectorySet integrate_ensemble(const GalerkinBasis& b, const Field& G, const std::vector<Vec>& initial, double T,
                                        double dt, const IntegrateOptions& o = {}) {
    TrajectorySet ts;
    ts.eps = b.eps;
    ts.dt = dt;
    ts.initial = initial;
    for (auto& c0 : initial) ts.members.push_back(integrate(b, G, c0, T, dt, o));
    return ts;
}

// band-limited random fields with |.|_H amplitudes spread over (0.2, 1] radius
inline std::vector<Vec> random_ensemble(const GalerkinBasis& b, int count, double radius, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.2, 1.0);
    std::vector<Vec> out;
    for (int i = 0; i < count; ++i) out.push_back(random_coefficients(b, rng, radius * ud(rng), 1.0));
    return out;
}

// limsup |u|_{L^2} from f(s)s <= -delta0 s^2 + c: |u|^2 <= c |Omega| / delta0
inline double absorbing_l2_radius(const ScalarNonlinearity& f, double volume) {
    require(f.dissipative(), Errc::hypothesis_violation, "f is not dissipative");
    double d0 = f.delta0(), c = 0.0;
    double span = 10.0 * (1.0 + f.C());
    for (int i = 0; i <= 200000; ++i) {
        double s = -span + 2 * span * i / 200000.0;
        c = std::max(c, f(s) * s + d0 * s * s);
    }
    return std::sqrt(c * volume / d0);
}

struct AttractorSample {
    double eps = 0.0;
    std::vector<Vec> points;
    std::vector<int> member;     // ensemble index of each point
    double near_invariance = 0.0; // max over checked points of dist(flow(p, stride / 2), sample)
};

struct SampleOptions {
    double T0 = 20.0, T1 = 10.0;
    double stride = 1.0; // time between snapshots
    double dt = 1e-3;
    int invariance_checks = 20;
};

inline double min_distance(const GalerkinBasis& b, const Vec& c, const std::vector<Vec>& set) {
    double m = std::numeric_limits<double>::infinity();
    for (auto& p : set) m = std::min(m, b.h1(c - p));
    return m;
}

// Snapshots on [T0, T0 + T1] of every ensemble member, merged in ensemble order.
inline AttractorSample sample_attractor(const GalerkinBasis& b, const Field& G, const std::vector<Vec>& ensemble,
                                        const SampleOptions& o = {}) {
    require(o.T0 >= 0 && o.T1 >= 0 && o.stride > 0 && o.dt > 0, Errc::invalid_argument, "bad sampling times");
    AttractorSample a;
    a.eps = b.eps;
    IntegrateOptions io;
    io.stride = std::max(1, static_cast<int>(std::lround(o.stride / o.dt)));
    for (size_t i = 0; i < ensemble.size(); ++i) {
        Vec c = flow(b, G, ensemble[i], o.T0, o.dt);
        Trajectory tr = integrate(b, G, c, o.T1, o.dt, io);
        for (auto& p : tr.c) {
            a.points.push_back(p);
            a.member.push_back(static_cast<int>(i));
        }
    }
    if (!a.points.empty() && o.invariance_checks > 0) {
        // half a stride lands between snapshots, so the check is not trivially exact
        const double half = 0.5 * io.stride * o.dt;
        size_t step = std::max<size_t>(1, a.points.size() / o.invariance_checks);
        for (size_t k = 0; k < a.points.size(); k += step)
            a.near_invariance = std::max(a.near_invariance, min_distance(b, flow(b, G, a.points[k], half, o.dt), a.points));
    }
    return a;
}

// max over a in A of min over b in B of |a - b|, both in the same basis
inline double semidistance(const AttractorSample& A, const AttractorSample& B, const GalerkinBasis& b) {
    require(!A.points.empty() && !B.points.empty(), Errc::empty_sample, "semidistance of an empty sample");
    double m = 0.0;
    for (auto& p : A.points) m = std::max(m, min_distance(b, p, B.points));
    return m;
}

// A in the epsilon basis i of the family, B a graph sample lifted y-constant;
// |a - lift b|_eps^2 = a^T G a - 2 a^T q_b + s_b with G, q_b, s_b formed once
inline double semidistance(const AttractorSample& A, const AttractorSample& B, const SqueezedFamily& fam, int i) {
    require(!A.points.empty() && !B.points.empty(), Errc::empty_sample, "semidistance of an empty sample");
    require(i >= 0 && i < static_cast<int>(fam.bases.size()), Errc::invalid_argument, "epsilon index out of range");
    const auto& be = fam.bases[i];
    const auto& op = fam.ops[i];
    SpMat S = op.A();
    for (int v = 0; v < S.rows(); ++v) S.coeffRef(v, v) += fam.weights(v);
    Mat G = be.W.transpose() * (S * be.W);
    std::vector<Vec> q;
    std::vector<double> sb;
    for (auto& p : B.points) {
        Vec lb = fam.lift_coefficients(p);
        Vec Sl = S * lb;
        q.push_back(be.W.transpose() * Sl);
        sb.push_back(lb.dot(Sl));
    }
    double m = 0.0;
    for (auto& a : A.points) {
        double aa = a.dot(G * a), best = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < q.size(); ++k) best = std::min(best, aa - 2 * a.dot(q[k]) + sb[k]);
        m = std::max(m, std::sqrt(std::max(0.0, best)));
    }
    return m;
}

// graph states pushed into the epsilon basis i through the lift
inline Vec lift_to_basis(const SqueezedFamily& fam, int i, const Vec& c0) {
    return fam.bases[i].project(fam.lift_coefficients(c0));
}

struct LinearFlowRow {
    double eps = 0.0;
    double difference = 0.0; // |e^{-t A_eps} lift u0 - lift e^{-t A_0} u0|_eps
};

// u0 is a 2-D nodal vector that must be y-constant
inline std::vector<LinearFlowRow> linear_flow_compare(const RectUnionDomain& d, const std::vector<double>& eps, const Vec& u0,
                                                      double t0, double h) {
    require(t0 > 0, Errc::invalid_argument, "t0 must be positive");
    Triangulation t = triangulate(d, h);
    GraphLimit gl = graph_limit(d, t);
    require(u0.size() == t.vertex_count(), Errc::invalid_argument, "u0 must be a nodal vector on the mesh");
    Vec g = Vec::Zero(gl.mesh.n_dofs);
    for (int v = 0; v < t.vertex_count(); ++v) g(gl.lift_dof[v]) = u0(v);
    double scale = std::max(1.0, u0.cwiseAbs().maxCoeff());
    require((gl.lift(g) - u0).cwiseAbs().maxCoeff() <= 1e-12 * scale, Errc::invalid_argument,
            "u0 depends on y; linear flows are compared on the graph space only");
    auto [K0, M0] = assemble_graph(gl.graph, gl.mesh);
    GalerkinBasis b0 = full_basis(K0, lumped_mass(M0), 0.0);
    Vec c0 = b0.project(g);
    Vec lifted0 = gl.lift(b0.nodal((-b0.lambda * t0).array().exp().matrix().cwiseProduct(c0)));
    Vec w = trapezoid_weights(t);
    std::vector<LinearFlowRow> rows;
    for (double e : eps) {
        AnisotropicOperator op = assemble_anisotropic(t, e);
        GalerkinBasis be = full_basis(op.A(), w, e);
        Vec ce = be.project(u0);
        Vec diff = be.nodal((-be.lambda * t0).array().exp().matrix().cwiseProduct(ce)) - lifted0;
        double a = diff.dot(op.Kx * diff) + diff.dot(op.Ky * diff) / (e * e) + diff.dot(w.cwiseProduct(diff));
        rows.push_back({e, std::sqrt(std::max(0.0, a))});
    }
    return rows;
}

inline std::vector<double> liapunov_trace(const GalerkinBasis& b, const ScalarNonlinearity& f, const Trajectory& tr) {
    std::vector<double> v;
    for (auto& c : tr.c) v.push_back(liapunov_V0(f, b, c));
    return v;
}

// largest increase of V0 between consecutive recorded states
inline double liapunov_max_increase(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (size_t k = 1; k < v.size(); ++k) m = std::max(m, v[k] - v[k - 1]);
    return m;
}

struct InvarianceReport {
    int trajectories = 0;
    double max_distance = 0.0; // sup_t |u(t) - Lambda(P1 u(t))|_eps
};

// g-semiflow from chart points stays on the chart
inline InvarianceReport invariance_check(const GalerkinSystem& s, const std::vector<Vec>& xi0, double T = 5.0,
                                         double dt = 1e-3, double sample_every = 1.0, const PicardOptions& po = {}) {
    InvarianceReport r;
    IntegrateOptions io;
    io.stride = std::max(1, static_cast<int>(std::lround(sample_every / dt)));
    Field G = g_field(s);
    for (auto& xi : xi0) {
        Trajectory tr = integrate(s.basis, G, chart_Lambda(s, xi, po), T, dt, io);
        for (auto& c : tr.c) r.max_distance = std::max(r.max_distance, s.basis.h1(c - chart_Lambda(s, s.P1(c), po)));
        ++r.trajectories;
    }
    return r;
}

// |P1 u(t) - xi(t)| for the full g-flow from Lambda(xi0) against the reduced
// equation xi' = v(xi) integrated by classical Runge-Kutta
inline double tangency_check(const GalerkinSystem& s, const Vec& xi0, double T = 1.0, double dt_full = 1e-3,
                             double dt_reduced = 0.02, const PicardOptions& po = {}) {
    int n = std::max(1, static_cast<int>(std::lround(T / dt_reduced)));
    double h = T / n;
    IntegrateOptions io;
    io.stride = std::max(1, static_cast<int>(std::lround(h / dt_full)));
    Trajectory full = integrate(s.basis, g_field(s), chart_Lambda(s, xi0, po), T, h / io.stride, io);
    auto v = [&](const Vec& xi) { return reduced_field(s, chart_Lambda(s, xi, po)); };
    Vec xi = xi0;
    double m = 0.0;
    for (int k = 1; k <= n; ++k) {
        Vec k1 = v(xi), k2 = v(xi + 0.5 * h * k1), k3 = v(xi + 0.5 * h * k2), k4 = v(xi + h * k3);
        xi += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        m = std::max(m, (s.P1(full.c[k]) - xi).norm());
    }
    return m;
}

} // namespace thinlab

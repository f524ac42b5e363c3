#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "eigensolver.hpp"
#include "graph_domain.hpp"
#include "quadrature.hpp"

namespace thinlab {

struct Mesh1D {
    std::vector<std::vector<double>> nodes; // per edge, increasing
    std::vector<std::vector<int>> dof;      // per edge, global index of each node
    int n_dofs = 0;
    double h = 0.0;
};

struct MeshOptions {
    double h = 1.0 / 64;
    double grading = 1.15;
    // extra x positions every edge mesh must contain (2-D alignment)
    std::vector<double> breakpoints;
};

namespace detail {

// nodes on [a, b]: uniform pieces between breakpoints, geometric grading
// toward an end where the weight vanishes
inline std::vector<double> edge_nodes(const EdgeSpec& e, const MeshOptions& o) {
    std::vector<double> br{e.a, e.b};
    for (double x : o.breakpoints)
        if (x > e.a && x < e.b) br.push_back(x);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());

    bool grade_left = false, grade_right = false;
    if (e.weight.kind() != WeightFn::Kind::piecewise_constant) {
        grade_left = e.weight(e.a) <= 0.0;
        grade_right = e.weight(e.b) <= 0.0;
    }
    auto graded = [&](double len) {
        std::vector<double> cells;
        double hmin = std::min(o.h * o.h, 1e-2 * o.h), s = hmin, used = 0.0;
        while (s < o.h && used + s < 0.5 * len) {
            cells.push_back(s);
            used += s;
            s *= o.grading;
        }
        return cells;
    };

    std::vector<double> x{br.front()};
    for (size_t i = 0; i + 1 < br.size(); ++i) {
        double lo = br[i], hi = br[i + 1];
        std::vector<double> left, right;
        if (grade_left && i == 0) left = graded(hi - lo);
        if (grade_right && i + 2 == br.size()) right = graded(hi - lo);
        double ul = lo, ur = hi;
        for (double c : left) ul += c;
        for (double c : right) ur -= c;
        double cur = lo;
        for (double c : left) { cur += c; x.push_back(cur); }
        int m = std::max(1, static_cast<int>(std::ceil((ur - ul) / o.h - 1e-9)));
        for (int k = 1; k <= m; ++k) x.push_back(k == m && right.empty() ? hi : ul + (ur - ul) * k / m);
        double rc = ur;
        for (auto it = right.rbegin(); it != right.rend(); ++it) {
            rc += *it;
            x.push_back(std::next(it) == right.rend() ? hi : rc);
        }
    }
    return x;
}

} // namespace detail

inline Mesh1D make_mesh(const MetricGraph& g, const MeshOptions& o) {
    Mesh1D m;
    m.h = o.h;
    int r = g.edge_count();
    m.nodes.resize(r);
    m.dof.resize(r);
    // endpoint identification through join groups
    detail::UnionFind uf(2 * r);
    for (auto& j : g.joins) {
        int first = -1;
        auto add = [&](int key) { if (first < 0) first = key; else uf.unite(first, key); };
        for (int k : j.sigma_plus) add(2 * k + 1);
        for (int k : j.sigma_minus) add(2 * k);
    }
    std::map<int, int> end_dof;
    int next = 0;
    for (int k = 0; k < r; ++k) {
        m.nodes[k] = detail::edge_nodes(g.edges[k], o);
        int nk = static_cast<int>(m.nodes[k].size());
        m.dof[k].resize(nk);
        for (int i = 0; i < nk; ++i) {
            if (i == 0 || i == nk - 1) {
                int root = uf.find(2 * k + (i == 0 ? 0 : 1));
                auto it = end_dof.find(root);
                if (it == end_dof.end()) it = end_dof.emplace(root, next++).first;
                m.dof[k][i] = it->second;
            } else {
                m.dof[k][i] = next++;
            }
        }
    }
    m.n_dofs = next;
    return m;
}

// mesh of a single edge with no identifications
inline Mesh1D make_edge_mesh(const EdgeSpec& e, const MeshOptions& o) {
    MetricGraph g;
    EdgeSpec c = e;
    c.id = 0;
    g.edges.push_back(c);
    return make_mesh(g, o);
}

// P1 stiffness int p u'v' and mass int p u v with 2-point Gauss per cell.
// With a potential Q the pair becomes (int u'v' + Q u v, int u v).
inline std::pair<SpMat, SpMat> assemble_edge(const EdgeSpec& e, const std::vector<double>& x,
                                             const std::function<double(double)>* potential = nullptr) {
    int n = static_cast<int>(x.size());
    std::vector<Eigen::Triplet<double>> tk, tm;
    tk.reserve(4 * n);
    tm.reserve(4 * n);
    for (int c = 0; c + 1 < n; ++c) {
        double h = x[c + 1] - x[c];
        double ke[2][2] = {{0, 0}, {0, 0}}, me[2][2] = {{0, 0}, {0, 0}};
        for (int q = 0; q < 2; ++q) {
            double t = gauss2_nodes[q], w = gauss2_weights[q] * h;
            double xq = x[c] + t * h;
            double N[2] = {1 - t, t}, dN[2] = {-1 / h, 1 / h};
            double pk, pm, pot = 0.0;
            if (potential) {
                pk = pm = 1.0;
                pot = (*potential)(xq);
            } else {
                pk = pm = e.weight(xq);
                if (!(pk > 0)) fail(Errc::singular_weight, "weight not positive at a quadrature point");
            }
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    ke[i][j] += w * (pk * dN[i] * dN[j] + pot * N[i] * N[j]);
                    me[i][j] += w * pm * N[i] * N[j];
                }
        }
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                tk.emplace_back(c + i, c + j, ke[i][j]);
                tm.emplace_back(c + i, c + j, me[i][j]);
            }
    }
    SpMat K(n, n), M(n, n);
    K.setFromTriplets(tk.begin(), tk.end());
    M.setFromTriplets(tm.begin(), tm.end());
    return {K, M};
}

inline std::pair<SpMat, SpMat> assemble_graph(const MetricGraph& g, const Mesh1D& mesh) {
    std::vector<Eigen::Triplet<double>> tk, tm;
    for (int k = 0; k < g.edge_count(); ++k) {
        auto [Ke, Me] = assemble_edge(g.edges[k], mesh.nodes[k]);
        const auto& d = mesh.dof[k];
        for (int c = 0; c < Ke.outerSize(); ++c)
            for (SpMat::InnerIterator it(Ke, c); it; ++it) tk.emplace_back(d[it.row()], d[it.col()], it.value());
        for (int c = 0; c < Me.outerSize(); ++c)
            for (SpMat::InnerIterator it(Me, c); it; ++it) tm.emplace_back(d[it.row()], d[it.col()], it.value());
    }
    SpMat K(mesh.n_dofs, mesh.n_dofs), M(mesh.n_dofs, mesh.n_dofs);
    K.setFromTriplets(tk.begin(), tk.end());
    M.setFromTriplets(tm.begin(), tm.end());
    return {K, M};
}

struct SpectralData {
    Vec values;
    Mat vectors; // M-orthonormal columns
    SpMat K, M;
    std::string method;

    int size() const { return static_cast<int>(values.size()); }
};

struct GraphSpectrum {
    MetricGraph graph;
    Mesh1D mesh;
    SpectralData data;

    // nodal values of eigenvector j on edge k
    Vec edge_vector(int j, int k) const {
        const auto& d = mesh.dof[k];
        Vec v(d.size());
        for (size_t i = 0; i < d.size(); ++i) v(i) = data.vectors(d[i], j);
        return v;
    }
};

inline SpectralData solve_pencil(SpMat K, SpMat M, int n, const EigenOptions& opt = {}) {
    EigenResult r = solve_generalized(K, M, n, opt);
    SpectralData s;
    s.values = r.values;
    s.vectors = r.vectors;
    s.K = std::move(K);
    s.M = std::move(M);
    s.method = r.method;
    return s;
}

inline GraphSpectrum solve_graph_spectrum(const MetricGraph& g, int n, const Mesh1D& mesh, const EigenOptions& opt = {}) {
    auto [K, M] = assemble_graph(g, mesh);
    GraphSpectrum gs;
    gs.graph = g;
    gs.mesh = mesh;
    gs.data = solve_pencil(K, M, std::min(n, mesh.n_dofs), opt);
    return gs;
}

inline GraphSpectrum solve_graph_spectrum(const MetricGraph& g, int n, const MeshOptions& mo, const EigenOptions& opt = {}) {
    return solve_graph_spectrum(g, n, make_mesh(g, mo), opt);
}

inline GraphSpectrum solve_edge_spectrum(const EdgeSpec& e, int n, const MeshOptions& mo, const EigenOptions& opt = {}) {
    MetricGraph g;
    EdgeSpec c = e;
    c.id = 0;
    g.edges.push_back(c);
    return solve_graph_spectrum(g, n, mo, opt);
}

// Flux balance at every join for eigenpair j.  The flux p u' at an edge end
// is read off the edge's own residual (K_k - lambda M_k) u, which is the
// discrete boundary term of the variational form.
struct KirchhoffReport {
    std::vector<double> residual;       // |sum_{sigma+} p u' - sum_{sigma-} p u'| per join
    std::vector<double> one_sided;      // same from one-sided difference quotients
    std::vector<double> flux_scale;     // sum of |fluxes| per join
};

inline KirchhoffReport kirchhoff_residuals(const GraphSpectrum& gs, int j) {
    KirchhoffReport rep;
    double lam = gs.data.values(j);
    for (auto& jg : gs.graph.joins) {
        double bal = 0.0, bal1 = 0.0, scale = 0.0;
        auto flux = [&](int k, bool right_end) {
            const auto& x = gs.mesh.nodes[k];
            Vec u = gs.edge_vector(j, k);
            auto [Ke, Me] = assemble_edge(gs.graph.edges[k], x);
            Vec r = Ke * u - lam * (Me * u);
            int n = static_cast<int>(x.size());
            double consistent = right_end ? r(n - 1) : -r(0);
            double xq, du;
            if (right_end) {
                double h = x[n - 1] - x[n - 2];
                xq = x[n - 2] + gauss2_nodes[1] * h;
                du = (u(n - 1) - u(n - 2)) / h;
            } else {
                double h = x[1] - x[0];
                xq = x[0] + gauss2_nodes[0] * h;
                du = (u(1) - u(0)) / h;
            }
            return std::pair<double, double>{consistent, gs.graph.edges[k].weight(xq) * du};
        };
        for (int k : jg.sigma_plus) {
            auto [f, f1] = flux(k, true);
            bal += f;
            bal1 += f1;
            scale += std::abs(f);
        }
        for (int k : jg.sigma_minus) {
            auto [f, f1] = flux(k, false);
            bal -= f;
            bal1 -= f1;
            scale += std::abs(f);
        }
        rep.residual.push_back(std::abs(bal));
        rep.one_sided.push_back(std::abs(bal1));
        rep.flux_scale.push_back(scale);
    }
    return rep;
}

// number of eigenvalues <= tau
inline int counting(const Vec& values, double tau) {
    int c = 0;
    for (int i = 0; i < values.size(); ++i) c += values(i) <= tau;
    return c;
}

struct DirectSum {
    std::vector<Vec> per_edge;   // lowest n eigenvalues of each (a_k, b_k)
    Vec values;                  // merged ascending multiset, first n
    std::vector<int> origin;     // edge of each merged value
    double valid_below = 0.0;    // counts are complete for tau below this

    int count(double tau) const { return counting(values, tau); }
};

inline DirectSum direct_sum_spectrum(const MetricGraph& g, int n, const Mesh1D& mesh, const EigenOptions& opt = {}) {
    DirectSum ds;
    std::vector<std::pair<double, int>> all;
    ds.valid_below = std::numeric_limits<double>::infinity();
    for (int k = 0; k < g.edge_count(); ++k) {
        EdgeSpec e = g.edges[k];
        e.id = 0;
        MetricGraph single;
        single.edges.push_back(e);
        Mesh1D m1;
        m1.h = mesh.h;
        m1.nodes = {mesh.nodes[k]};
        int nk = static_cast<int>(mesh.nodes[k].size());
        m1.dof = {std::vector<int>(nk)};
        for (int i = 0; i < nk; ++i) m1.dof[0][i] = i;
        m1.n_dofs = nk;
        auto [K, M] = assemble_graph(single, m1);
        int want = std::min(n, nk);
        EigenResult r = solve_generalized(K, M, want, opt);
        ds.per_edge.push_back(r.values);
        for (int i = 0; i < r.values.size(); ++i) all.emplace_back(r.values(i), k);
        if (want < nk) ds.valid_below = std::min(ds.valid_below, r.values(want - 1));
    }
    std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first < b.first; });
    int m = std::min<int>(n, static_cast<int>(all.size()));
    ds.values.resize(m);
    for (int i = 0; i < m; ++i) {
        ds.values(i) = all[i].first;
        ds.origin.push_back(all[i].second);
    }
    if (m < static_cast<int>(all.size())) ds.valid_below = std::min(ds.valid_below, all[m].first);
    return ds;
}

inline DirectSum direct_sum_spectrum(const MetricGraph& g, int n, const MeshOptions& mo, const EigenOptions& opt = {}) {
    return direct_sum_spectrum(g, n, make_mesh(g, mo), opt);
}

// sum over edges of per-edge counts
inline int counting_sum(const DirectSum& ds, double tau) {
    int c = 0;
    for (auto& v : ds.per_edge) c += counting(v, tau);
    return c;
}

// P1 a-priori tolerance for eigenvalue comparisons
inline double eigen_tolerance(double h, double lambda) {
    return std::max(1e-8, 5.0 * h * h * std::abs(lambda));
}

// gamma_k = (alpha/beta) pi^2 / l^2
inline double edge_lower_bound(const EdgeSpec& e) {
    require(e.c_case.kind != CCase::Kind::unclassified, Errc::unclassifiable, "edge is not classified");
    double l = e.length();
    return (e.c_case.alpha / e.c_case.beta) * M_PI * M_PI / (l * l);
}

struct SchrodingerReport {
    Vec q_values; // lambda^q_1..n (Neumann, weight q)
    Vec Q_values; // mu^Q_1..n-1 (Dirichlet, potential Q)
    std::function<double(double)> Q;
    bool verdict = false;
    std::vector<double> slack_first;  // lambda^q_nu - mu^Q_{nu-1} + tol
    std::vector<double> slack_second; // mu^Q_{nu-1} - pi^2 (nu-1)^2
};

// Q = 3/4 q'^2/q^2 - 1/2 q''/q
inline std::function<double(double)> schrodinger_potential(const WeightFn& q) {
    return [q](double x) {
        double v = q(x), d1 = q.d1(x), d2 = q.d2(x);
        return 0.75 * d1 * d1 / (v * v) - 0.5 * d2 / v;
    };
}

// Weighted Neumann problem for q on (0,1) against the Dirichlet problem
// -w'' + Q w = mu w, checking lambda^q_nu >= mu^Q_{nu-1} >= pi^2 (nu-1)^2.
// The first relation is an identity in the continuum, so it is checked
// within the P1 tolerance.
inline SchrodingerReport schrodinger_oracle(const WeightFn& q, int n, double h, double rel_floor = 0.0,
                                            const EigenOptions& opt = {}) {
    require(q.a() == 0.0 && q.b() == 1.0, Errc::invalid_argument, "oracle works on (0,1)");
    bool degenerate = q.kind() == WeightFn::Kind::piecewise_constant && q.values().size() == 1;
    int grid = 10000;
    for (int i = 1; i <= grid; ++i) {
        double x = static_cast<double>(i) / grid;
        require(q(x) > 0 && q.d1(x) >= 0 && q.d2(x) <= 0, Errc::hypothesis_violation,
                "q must be positive, nondecreasing and concave on (0,1]");
    }
    require(degenerate || q(0.0) == 0.0, Errc::hypothesis_violation, "q(0) must vanish");
    require(q.inverse_integrable(), Errc::hypothesis_violation, "1/q must be integrable");

    EdgeSpec e;
    e.a = 0.0;
    e.b = 1.0;
    e.weight = q;
    MeshOptions mo;
    mo.h = h;
    GraphSpectrum gs = solve_edge_spectrum(e, n, mo, opt);

    SchrodingerReport rep;
    rep.q_values = gs.data.values;
    rep.Q = degenerate ? std::function<double(double)>([](double) { return 0.0; }) : schrodinger_potential(q);

    const auto& x = gs.mesh.nodes[0];
    auto [K, M] = assemble_edge(e, x, &rep.Q);
    int nn = static_cast<int>(x.size());
    // Dirichlet: drop both end nodes
    SpMat Ki = K.block(1, 1, nn - 2, nn - 2), Mi = M.block(1, 1, nn - 2, nn - 2);
    EigenResult r = solve_generalized(Ki, Mi, n - 1, opt);
    rep.Q_values = r.values;

    rep.verdict = true;
    for (int nu = 2; nu <= n; ++nu) {
        double lq = rep.q_values(nu - 1), mq = rep.Q_values(nu - 2);
        double ref = M_PI * M_PI * (nu - 1) * (nu - 1);
        double s1 = lq - mq + eigen_tolerance(h, lq);
        double s2 = mq - ref * (1.0 - rel_floor);
        rep.slack_first.push_back(s1);
        rep.slack_second.push_back(s2);
        if (s1 < 0 || s2 < 0) rep.verdict = false;
    }
    return rep;
}

} // namespace thinlab

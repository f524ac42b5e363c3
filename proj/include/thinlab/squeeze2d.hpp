#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "graph_spectra.hpp"

namespace thinlab {

struct Triangulation {
    std::vector<std::array<double, 2>> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<bool> boundary;
    double h = 0.0;
    // tensor grid the mesh lives on
    std::vector<double> xs, ys;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
};

namespace detail {

inline std::vector<double> refine_breaks(std::vector<double> br, double h) {
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    std::vector<double> out{br.front()};
    for (size_t i = 0; i + 1 < br.size(); ++i) {
        double lo = br[i], hi = br[i + 1];
        int m = std::max(1, static_cast<int>(std::ceil((hi - lo) / h - 1e-9)));
        for (int k = 1; k <= m; ++k) out.push_back(k == m ? hi : lo + (hi - lo) * k / m);
    }
    return out;
}

inline bool inside(const RectUnionDomain& d, double x, double y) {
    for (auto& r : d.rectangles)
        if (r.x_lo < x && x < r.x_hi && r.y_lo < y && y < r.y_hi) return true;
    return false;
}

} // namespace detail

// Structured mesh on the tensor grid spanned by all rectangle faces, each
// active cell split along its rising diagonal.
inline Triangulation triangulate(const RectUnionDomain& domain, double h) {
    require(h > 0, Errc::invalid_argument, "mesh size must be positive");
    validate(domain);
    const auto& R = domain.rectangles;
    for (size_t i = 0; i < R.size(); ++i)
        for (size_t j = i + 1; j < R.size(); ++j) {
            double ox = std::min(R[i].x_hi, R[j].x_hi) - std::max(R[i].x_lo, R[j].x_lo);
            double oy = std::min(R[i].y_hi, R[j].y_hi) - std::max(R[i].y_lo, R[j].y_lo);
            if (ox > 0 && oy > 0) fail(Errc::nonconforming_input, "rectangles overlap");
        }
    std::vector<double> bx, by;
    for (auto& r : R) {
        bx.insert(bx.end(), {r.x_lo, r.x_hi});
        by.insert(by.end(), {r.y_lo, r.y_hi});
    }
    Triangulation t;
    t.h = h;
    t.xs = detail::refine_breaks(bx, h);
    t.ys = detail::refine_breaks(by, h);
    int nx = static_cast<int>(t.xs.size()), ny = static_cast<int>(t.ys.size());

    std::vector<char> active((nx - 1) * (ny - 1));
    for (int i = 0; i + 1 < nx; ++i)
        for (int j = 0; j + 1 < ny; ++j)
            active[i * (ny - 1) + j] = detail::inside(domain, 0.5 * (t.xs[i] + t.xs[i + 1]), 0.5 * (t.ys[j] + t.ys[j + 1]));

    std::vector<int> id(nx * ny, -1);
    auto vid = [&](int i, int j) {
        int& v = id[i * ny + j];
        if (v < 0) {
            v = t.vertex_count();
            t.vertices.push_back({t.xs[i], t.ys[j]});
        }
        return v;
    };
    // vertices in lexicographic (x, y) order
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            bool used = false;
            for (int di = -1; di <= 0; ++di)
                for (int dj = -1; dj <= 0; ++dj) {
                    int ci = i + di, cj = j + dj;
                    if (ci >= 0 && cj >= 0 && ci + 1 < nx && cj + 1 < ny && active[ci * (ny - 1) + cj]) used = true;
                }
            if (used) vid(i, j);
        }
    for (int i = 0; i + 1 < nx; ++i)
        for (int j = 0; j + 1 < ny; ++j) {
            if (!active[i * (ny - 1) + j]) continue;
            int v00 = id[i * ny + j], v10 = id[(i + 1) * ny + j], v11 = id[(i + 1) * ny + j + 1], v01 = id[i * ny + j + 1];
            t.triangles.push_back({v00, v10, v11});
            t.triangles.push_back({v00, v11, v01});
        }
    // a vertex is interior iff all four surrounding cells are active
    t.boundary.assign(t.vertex_count(), false);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            if (id[i * ny + j] < 0) continue;
            bool interior = i > 0 && j > 0 && i + 1 < nx && j + 1 < ny;
            for (int di = -1; interior && di <= 0; ++di)
                for (int dj = -1; dj <= 0; ++dj)
                    if (!active[(i + di) * (ny - 1) + j + dj]) interior = false;
            t.boundary[id[i * ny + j]] = !interior;
        }
    return t;
}

struct AnisotropicOperator {
    double eps = 1.0;
    SpMat Kx, Ky, M;

    SpMat A() const { return Kx + (1.0 / (eps * eps)) * Ky; }
};

inline AnisotropicOperator assemble_anisotropic(const Triangulation& t, double eps) {
    require(eps > 0, Errc::invalid_argument, "epsilon must be positive");
    std::vector<Eigen::Triplet<double>> tx, ty, tm;
    for (auto& tri : t.triangles) {
        const auto &p0 = t.vertices[tri[0]], &p1 = t.vertices[tri[1]], &p2 = t.vertices[tri[2]];
        double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        require(det > 0, Errc::nonconforming_input, "triangle not positively oriented");
        double area = 0.5 * det;
        // gradients of barycentric coordinates
        double gx[3] = {(p1[1] - p2[1]) / det, (p2[1] - p0[1]) / det, (p0[1] - p1[1]) / det};
        double gy[3] = {(p2[0] - p1[0]) / det, (p0[0] - p2[0]) / det, (p1[0] - p0[0]) / det};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                tx.emplace_back(tri[a], tri[b], area * gx[a] * gx[b]);
                ty.emplace_back(tri[a], tri[b], area * gy[a] * gy[b]);
                tm.emplace_back(tri[a], tri[b], area / 12.0 * (a == b ? 2.0 : 1.0));
            }
    }
    int n = t.vertex_count();
    AnisotropicOperator op;
    op.eps = eps;
    op.Kx.resize(n, n);
    op.Ky.resize(n, n);
    op.M.resize(n, n);
    op.Kx.setFromTriplets(tx.begin(), tx.end());
    op.Ky.setFromTriplets(ty.begin(), ty.end());
    op.M.setFromTriplets(tm.begin(), tm.end());
    return op;
}

struct SqueezedSpectrum {
    Triangulation mesh;
    AnisotropicOperator op;
    SpectralData data;
};

inline SqueezedSpectrum solve_squeezed_spectrum(const Triangulation& t, double eps, int n, const EigenOptions& opt = {}) {
    SqueezedSpectrum s;
    s.mesh = t;
    s.op = assemble_anisotropic(t, eps);
    s.data = solve_pencil(s.op.A(), s.op.M, std::min(n, t.vertex_count()), opt);
    return s;
}

inline SqueezedSpectrum solve_squeezed_spectrum(const RectUnionDomain& d, double eps, int n, double h,
                                                const EigenOptions& opt = {}) {
    return solve_squeezed_spectrum(triangulate(d, h), eps, n, opt);
}

// Trapezoid weights of the tensor cells (area/4 per corner).  Triangles come
// in cell pairs (v00, v10, v11), (v00, v11, v01).
inline Vec trapezoid_weights(const Triangulation& t) {
    require(t.triangle_count() % 2 == 0, Errc::nonconforming_input, "triangles are not paired into cells");
    Vec w = Vec::Zero(t.vertex_count());
    for (int k = 0; k < t.triangle_count(); k += 2) {
        const auto &a = t.triangles[k], &b = t.triangles[k + 1];
        double area = (t.vertices[a[1]][0] - t.vertices[a[0]][0]) * (t.vertices[a[2]][1] - t.vertices[a[1]][1]);
        for (int v : {a[0], a[1], a[2], b[2]}) w(v) += 0.25 * area;
    }
    return w;
}

// (u^T (Kx + eps^-2 Ky) u + u^T M u)^{1/2}
inline double epsilon_norm(const Vec& u, const AnisotropicOperator& op) {
    double a = u.dot(op.Kx * u) + u.dot(op.Ky * u) / (op.eps * op.eps);
    return std::sqrt(std::max(0.0, a + u.dot(op.M * u)));
}

// Graph limit on the x-nodes of the triangulation, so that graph functions
// lift exactly into the P1 space.
struct GraphLimit {
    MetricGraph graph;
    Mesh1D mesh;
    // lift[v] = graph dof carrying the value at 2-D vertex v
    std::vector<int> lift_dof;

    Vec lift(const Vec& g) const {
        Vec u(lift_dof.size());
        for (size_t v = 0; v < lift_dof.size(); ++v) u(v) = g(lift_dof[v]);
        return u;
    }
};

inline GraphLimit graph_limit(const RectUnionDomain& d, const Triangulation& t) {
    GraphLimit gl;
    gl.graph = build_from_rectangles(d);
    MeshOptions mo;
    mo.h = std::numeric_limits<double>::max();
    mo.breakpoints = t.xs;
    gl.mesh = make_mesh(gl.graph, mo);
    gl.lift_dof.assign(t.vertex_count(), -1);
    for (int v = 0; v < t.vertex_count(); ++v) {
        double x = t.vertices[v][0], y = t.vertices[v][1];
        for (int k = 0; k < gl.graph.edge_count() && gl.lift_dof[v] < 0; ++k) {
            const auto& e = gl.graph.edges[k];
            if (x < e.a || x > e.b || y < e.y_lo || y > e.y_hi) continue;
            const auto& xn = gl.mesh.nodes[k];
            auto it = std::lower_bound(xn.begin(), xn.end(), x);
            require(it != xn.end() && *it == x, Errc::nonconforming_input, "graph mesh misses a grid line");
            gl.lift_dof[v] = gl.mesh.dof[k][it - xn.begin()];
        }
        require(gl.lift_dof[v] >= 0, Errc::nonconforming_input, "vertex not covered by any strip");
    }
    return gl;
}

inline GraphSpectrum solve_graph_limit(const GraphLimit& gl, int n, const EigenOptions& opt = {}) {
    return solve_graph_spectrum(gl.graph, n, gl.mesh, opt);
}

// beta = (gamma'/gamma)^{1/2} pi / delta from an input rectangle I x J and
// the bounding box I' x J'; the rectangle maximising delta^2 gamma is used
inline double upper_bound_beta(const RectUnionDomain& d) {
    validate(d);
    double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
    for (auto& r : d.rectangles) {
        ylo = std::min(ylo, r.y_lo);
        yhi = std::max(yhi, r.y_hi);
    }
    double best = 0.0, gamma = 0.0, delta = 0.0;
    for (auto& r : d.rectangles) {
        double dl = r.x_hi - r.x_lo, gm = r.y_hi - r.y_lo;
        if (dl * dl * gm > best) {
            best = dl * dl * gm;
            gamma = gm;
            delta = dl;
        }
    }
    return std::sqrt((yhi - ylo) / gamma) * M_PI / delta;
}

struct AlignmentResult {
    double value = 0.0;
    int multiplicity = 1; // > 1 means a subspace distance was used
};

// Distance in |.|_eps between w_{eps,j} and the lifted limit eigenspace of
// lambda_{0,j}.  Simple eigenvalues use the signed single vector.
inline AlignmentResult subspace_alignment(const SqueezedSpectrum& sq, const GraphLimit& gl, const GraphSpectrum& g0,
                                          int j, double tol) {
    require(j < g0.data.size(), Errc::invalid_argument, "eigenvalue index out of range");
    int lo = j, hi = j;
    const Vec& lam = g0.data.values;
    while (lo > 0 && std::abs(lam(lo - 1) - lam(j)) < tol) --lo;
    while (hi + 1 < lam.size() && std::abs(lam(hi + 1) - lam(j)) < tol) ++hi;
    Vec w = sq.data.vectors.col(j);
    AlignmentResult r;
    r.multiplicity = hi - lo + 1;
    if (r.multiplicity == 1) {
        Vec l = gl.lift(g0.data.vectors.col(j));
        r.value = std::min(epsilon_norm(w - l, sq.op), epsilon_norm(w + l, sq.op));
        return r;
    }
    // M-orthogonal projection of w onto the lifted eigenspace
    Mat B(w.size(), r.multiplicity);
    for (int i = lo; i <= hi; ++i) B.col(i - lo) = gl.lift(g0.data.vectors.col(i));
    Mat G = B.transpose() * (sq.op.M * B);
    Vec c = G.ldlt().solve(B.transpose() * (sq.op.M * w));
    r.value = epsilon_norm(w - B * c, sq.op);
    return r;
}

inline double eigenvector_alignment(const SqueezedSpectrum& sq, const GraphLimit& gl, const GraphSpectrum& g0, int j) {
    const Vec& lam = g0.data.values;
    require(j < lam.size(), Errc::invalid_argument, "eigenvalue index out of range");
    double tol = eigen_tolerance(sq.mesh.h, lam(j)) + 1e-6 * std::abs(lam(j));
    bool degenerate = (j + 1 < lam.size() && std::abs(lam(j + 1) - lam(j)) < tol) ||
                      (j > 0 && std::abs(lam(j) - lam(j - 1)) < tol);
    require(!degenerate, Errc::degenerate_eigenvalue, "limit eigenvalue is not simple");
    return subspace_alignment(sq, gl, g0, j, tol).value;
}

// 0-based j
inline double eigenvector_alignment(const RectUnionDomain& d, double eps, int j, double h, const EigenOptions& opt = {}) {
    Triangulation t = triangulate(d, h);
    GraphLimit gl = graph_limit(d, t);
    GraphSpectrum g0 = solve_graph_limit(gl, j + 2, opt);
    SqueezedSpectrum sq = solve_squeezed_spectrum(t, eps, j + 1, opt);
    return eigenvector_alignment(sq, gl, g0, j);
}

struct SweepRow {
    double eps = 0.0;
    int j = 0; // 1-based
    double lambda_eps = 0.0, lambda_0 = 0.0, gap = 0.0;
    double alignment = std::numeric_limits<double>::quiet_NaN();
    int multiplicity = 1;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    Vec lambda_0;
    double h = 0.0;

    // gap of eigenvalue j (1-based) along the sweep order
    std::vector<double> gaps(int j) const {
        std::vector<double> g;
        for (auto& r : rows)
            if (r.j == j) g.push_back(r.gap);
        return g;
    }
};

// Each row compares lambda_{eps,j} with the graph limit on the same x-nodes.
// Alignment uses the lifted limit eigenspace when lambda_{0,j} is multiple.
inline SweepTable convergence_sweep(const RectUnionDomain& d, const std::vector<double>& eps, int jmax, double h,
                                    const EigenOptions& opt = {}) {
    Triangulation t = triangulate(d, h);
    GraphLimit gl = graph_limit(d, t);
    GraphSpectrum g0 = solve_graph_limit(gl, jmax + 1, opt);
    SweepTable tab;
    tab.h = h;
    tab.lambda_0 = g0.data.values;
    for (double e : eps) {
        SqueezedSpectrum sq = solve_squeezed_spectrum(t, e, jmax, opt);
        for (int j = 0; j < jmax; ++j) {
            SweepRow r;
            r.eps = e;
            r.j = j + 1;
            r.lambda_eps = sq.data.values(j);
            r.lambda_0 = g0.data.values(j);
            r.gap = std::abs(r.lambda_eps - r.lambda_0);
            double tol = eigen_tolerance(h, r.lambda_0) + 1e-6 * std::abs(r.lambda_0);
            auto al = subspace_alignment(sq, gl, g0, j, tol);
            r.alignment = al.value;
            r.multiplicity = al.multiplicity;
            tab.rows.push_back(r);
        }
    }
    return tab;
}

} // namespace thinlab

#include <gtest/gtest.h>

#include <optional>

#include "thinlab/dynamics.hpp"
#include "thinlab/graph_spectra.hpp"

using namespace thinlab;

namespace {

GalerkinBasis unit_edge_basis(double h, int N) {
    EdgeSpec e;
    MeshOptions mo;
    mo.h = h;
    MetricGraph g;
    g.edges.push_back(e);
    auto mesh = make_mesh(g, mo);
    auto [K, M] = assemble_graph(g, mesh);
    return make_basis(K, M, N, 0.0);
}

std::optional<Errc> code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

} // namespace

TEST(Integrate, LinearPartIsExact) {
    auto b = unit_edge_basis(1.0 / 32, 8);
    Vec c0 = Vec::Ones(8);
    auto tr = integrate(b, zero_field(8), c0, 0.5, 1e-2);
    ASSERT_EQ(tr.c.size(), 51u);
    Vec ref = (-0.5 * b.lambda).array().exp().matrix().cwiseProduct(c0);
    EXPECT_NEAR((tr.c.back() - ref).norm(), 0.0, 1e-13);
    EXPECT_NEAR(tr.t.back(), 0.5, 1e-14);
}

TEST(Integrate, FirstOrderInDt) {
    auto b = unit_edge_basis(1.0 / 32, 6);
    auto f = ScalarNonlinearity::cubic_bistable();
    auto G = fhat_field(b, f);
    Vec c0 = 0.3 * Vec::Unit(6, 0) + 0.2 * Vec::Unit(6, 1);
    Vec fine = flow(b, G, c0, 1.0, 1e-5);
    double e1 = (flow(b, G, c0, 1.0, 1e-2) - fine).norm();
    double e2 = (flow(b, G, c0, 1.0, 5e-3) - fine).norm();
    EXPECT_NEAR(e1 / e2, 2.0, 0.2);
}

TEST(Integrate, SemiflowProperty) {
    auto b = unit_edge_basis(1.0 / 32, 6);
    auto G = fhat_field(b, ScalarNonlinearity::cubic_bistable());
    Vec c0 = 0.5 * Vec::Unit(6, 1) - 0.1 * Vec::Unit(6, 0);
    Vec a = flow(b, G, c0, 0.7, 1e-3);
    Vec ab = flow(b, G, flow(b, G, c0, 0.3, 1e-3), 0.4, 1e-3);
    EXPECT_NEAR((a - ab).norm(), 0.0, 1e-12);
}

TEST(Integrate, BlowUpIsReported) {
    auto b = unit_edge_basis(1.0 / 32, 4);
    auto f = ScalarNonlinearity::polynomial({0.0, 1.0, 0.0, 1.0});
    EXPECT_EQ(code_of([&] { integrate(b, fhat_field(b, f), 3 * Vec::Unit(4, 0), 10.0, 1e-3); }), Errc::blow_up);
    EXPECT_EQ(code_of([&] { absorbing_l2_radius(f, 1.0); }), Errc::hypothesis_violation);
}

TEST(Dissipation, TrajectoriesEnterTheAbsorbingBall) {
    auto b = unit_edge_basis(1.0 / 32, 8);
    auto f = ScalarNonlinearity::cubic_bistable();
    double R = absorbing_l2_radius(f, b.volume());
    EXPECT_GT(R, 1.0); // the constants +-1 sit inside
    auto G = fhat_field(b, f);
    // |u(t)|^2 <= e^{-2 delta0 t} |u0|^2 + (1 - e^{-2 delta0 t}) R^2
    for (auto& c0 : random_ensemble(b, 10, 20.0, 3)) {
        auto tr = integrate(b, G, c0, 10.0, 1e-3, {1000});
        for (size_t k = 1; k < tr.c.size(); ++k) {
            double e = std::exp(-2 * f.delta0() * tr.t[k]);
            double env = std::sqrt(e * c0.squaredNorm() + (1 - e) * R * R);
            EXPECT_LE(b.l2(tr.c[k]), env * 1.01) << tr.t[k];
        }
        EXPECT_LE(b.l2(tr.c.back()), R * 1.01);
    }
}

TEST(Liapunov, NonincreasingAlongTrajectories) {
    auto b = unit_edge_basis(1.0 / 32, 8);
    auto f = ScalarNonlinearity::cubic_bistable();
    auto G = fhat_field(b, f);
    for (auto& c0 : random_ensemble(b, 10, 3.0, 5)) {
        auto tr = integrate(b, G, c0, 5.0, 1e-3, {10});
        auto v = liapunov_trace(b, f, tr);
        EXPECT_LE(liapunov_max_increase(v), 1e-6);
        EXPECT_LE(v.back(), v.front());
    }
}

TEST(Attractor, SampleAndSemidistance) {
    auto b = unit_edge_basis(1.0 / 32, 6);
    auto G = fhat_field(b, ScalarNonlinearity::cubic_bistable());
    SampleOptions so;
    so.T0 = 10;
    so.T1 = 2;
    so.dt = 1e-2;
    auto A = sample_attractor(b, G, random_ensemble(b, 6, 2.0, 7), so);
    EXPECT_EQ(A.points.size(), 6u * 3u);
    EXPECT_EQ(semidistance(A, A, b), 0.0);
    EXPECT_LT(A.near_invariance, 0.1);
    // samples stay in the Galerkin span
    for (auto& p : A.points) EXPECT_LT(b.h1(b.project(b.nodal(p)) - p), 1e-12);
    AttractorSample empty;
    EXPECT_EQ(code_of([&] { semidistance(A, empty, b); }), Errc::empty_sample);
}

TEST(Attractor, CrossRepresentationDistanceMatchesDirect) {
    RectUnionDomain d{{{0, 1, 0, 1}, {1, 2, 0, 0.5}}};
    auto fam = squeezed_family(d, {0.2, 0.1}, 1.0 / 8, 6);
    std::mt19937_64 rng(11);
    AttractorSample A, B;
    for (int k = 0; k < 4; ++k) {
        A.points.push_back(random_coefficients(fam.bases[1], rng, 1.0, 1.0));
        B.points.push_back(random_coefficients(fam.graph, rng, 1.0, 1.0));
    }
    double direct = 0.0;
    for (auto& a : A.points) {
        double best = 1e300;
        for (auto& c : B.points) best = std::min(best, fam.distance(1, a, c));
        direct = std::max(direct, best);
    }
    EXPECT_NEAR(semidistance(A, B, fam, 1), direct, 1e-10 * (1 + direct));
    // lifting a graph state gives nearly the same epsilon state at small epsilon
    Vec c0 = fam.graph.project(Vec::Ones(fam.graph.nodes()));
    Vec ce = lift_to_basis(fam, 1, c0);
    EXPECT_LT(fam.distance(1, ce, c0), 1e-10);
}

TEST(LinearFlow, UnitSquareAndLShape) {
    auto y_constant = [](const RectUnionDomain& d, double h, auto fn) {
        auto t = triangulate(d, h);
        Vec u(t.vertex_count());
        for (int v = 0; v < t.vertex_count(); ++v) u(v) = fn(t.vertices[v][0]);
        return u;
    };
    auto profile = [](double x) { return std::cos(M_PI * x) + 0.3 * x; };
    RectUnionDomain sq{{{0, 1, 0, 1}}};
    auto rows = linear_flow_compare(sq, {0.4, 0.1}, y_constant(sq, 0.125, profile), 0.1, 0.125);
    for (auto& r : rows) EXPECT_LT(r.difference, 1e-10) << r.eps;

    RectUnionDomain L{{{0, 1, 0, 1}, {1, 2, 0, 0.5}}};
    rows = linear_flow_compare(L, {0.2, 0.1, 0.05}, y_constant(L, 0.125, profile), 0.1, 0.125);
    EXPECT_GT(rows[0].difference, rows[1].difference);
    EXPECT_GT(rows[1].difference, rows[2].difference);

    // y-dependent initial data is outside the comparison
    auto t = triangulate(sq, 0.125);
    Vec bad(t.vertex_count());
    for (int v = 0; v < t.vertex_count(); ++v) bad(v) = t.vertices[v][1];
    EXPECT_EQ(code_of([&] { linear_flow_compare(sq, {0.1}, bad, 0.1, 0.125); }), Errc::invalid_argument);
}

TEST(Chart, InvariantAndTangent) {
    auto b = unit_edge_basis(1.0 / 32, 8);
    BoundedSet B;
    B.h1_radius = 1.0;
    auto op = std::make_shared<CutoffOperator>(build_cutoff(ScalarNonlinearity::cubic_bistable(1e-3), 0.1, B, {&b}));
    auto s = make_system(b, select_nu(b.lambda, op->L, 0.1), op);
    std::vector<Vec> xi;
    for (auto& p : box_grid(2, 1.0, 2)) xi.push_back(p);
    auto inv = invariance_check(s, xi, 5.0, 1e-3);
    EXPECT_EQ(inv.trajectories, static_cast<int>(xi.size()));
    EXPECT_LE(inv.max_distance, 1e-6);
    Vec x0(2);
    x0 << 0.8, 0.3;
    EXPECT_LE(tangency_check(s, x0, 1.0), 1e-5);
}

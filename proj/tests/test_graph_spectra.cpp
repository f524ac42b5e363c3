#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "thinlab/graph_spectra.hpp"

using namespace thinlab;

namespace {

const double pi2 = M_PI * M_PI;

EdgeSpec unit_edge(double c = 1.0) {
    EdgeSpec e;
    e.weight = WeightFn::constant(0, 1, c);
    return e;
}

MetricGraph two_unit_edges() {
    MetricGraph g;
    EdgeSpec e0, e1;
    e0.id = 0;
    e0.a = 0;
    e0.b = 1;
    e0.weight = WeightFn::constant(0, 1, 1);
    e1.id = 1;
    e1.a = 1;
    e1.b = 2;
    e1.weight = WeightFn::constant(1, 2, 1);
    g.edges = {e0, e1};
    g.joins = {JoinGroup{1.0, 0.0, 1.0, {0}, {1}}};
    return g;
}

MeshOptions mesh(double h) {
    MeshOptions m;
    m.h = h;
    return m;
}

} // namespace

TEST(AssembleEdge, UnitWeightStencil) {
    EdgeSpec e = unit_edge();
    std::vector<double> x;
    for (int i = 0; i <= 8; ++i) x.push_back(i / 8.0);
    auto [K, M] = assemble_edge(e, x);
    double h = 1.0 / 8;
    EXPECT_NEAR(K.coeff(3, 3), 2 / h, 1e-12);
    EXPECT_NEAR(K.coeff(3, 4), -1 / h, 1e-12);
    EXPECT_NEAR(K.coeff(0, 0), 1 / h, 1e-12);
    EXPECT_NEAR(M.coeff(3, 3), 4 * h / 6, 1e-14);
    EXPECT_NEAR(M.coeff(3, 4), h / 6, 1e-14);
    EXPECT_NEAR((Mat(K) - Mat(K).transpose()).norm(), 0.0, 1e-14);

    auto [K3, M3] = assemble_edge(unit_edge(3.0), x);
    EXPECT_NEAR((Mat(K3) - 3 * Mat(K)).norm(), 0.0, 1e-12);
    EXPECT_NEAR((Mat(M3) - 3 * Mat(M)).norm(), 0.0, 1e-12);
}

TEST(AssembleEdge, SqrtWeightMassMatchesReferenceQuadrature) {
    EdgeSpec e;
    e.weight = WeightFn::power(0, 1, 1, 0.5);
    MeshOptions mo = mesh(1.0 / 16);
    auto m = make_edge_mesh(e, mo);
    const auto& x = m.nodes[0];
    auto [K, M] = assemble_edge(e, x);
    // cells away from the origin: phi_i phi_j has curvature 1/h^2, so entries are O(h^3) accurate
    for (size_t c = x.size() / 2; c + 1 < x.size(); ++c) {
        double a = x[c], b = x[c + 1], h = b - a;
        double ref = integrate([&](double t) { return std::sqrt(t) * (b - t) / h * (t - a) / h; }, a, b, 8, 10);
        EXPECT_NEAR(M.coeff(c, c + 1), ref, 0.05 * std::pow(h, 3));
    }
    EXPECT_NEAR(Mat(M).sum(), 2.0 / 3.0, 1e-6);
}

TEST(EdgeSpectrum, UnitEdgeOracle) {
    auto t0 = std::chrono::steady_clock::now();
    auto s = solve_edge_spectrum(unit_edge(), 6, mesh(1.0 / 512));
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (int nu = 1; nu <= 6; ++nu) {
        double ref = pi2 * (nu - 1) * (nu - 1);
        EXPECT_NEAR(s.data.values(nu - 1), ref, nu == 1 ? 1e-9 : 5e-3 * ref);
    }
    EXPECT_LT(secs, 1.0);
}

TEST(EdgeSpectrum, ScaleInvariantInWeight) {
    auto a = solve_edge_spectrum(unit_edge(1.0), 5, mesh(1.0 / 64));
    auto b = solve_edge_spectrum(unit_edge(7.5), 5, mesh(1.0 / 64));
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(a.data.values(i), b.data.values(i), 1e-9 * (1 + a.data.values(i)));
}

TEST(EdgeSpectrum, SpectralDataInvariants) {
    auto s = solve_edge_spectrum(unit_edge(), 8, mesh(1.0 / 100));
    const auto& d = s.data;
    Mat G = d.vectors.transpose() * d.M * d.vectors;
    EXPECT_NEAR((G - Mat::Identity(8, 8)).norm(), 0.0, 1e-8);
    double kn = Mat(d.K).cwiseAbs().colwise().sum().maxCoeff();
    for (int j = 0; j < 8; ++j) {
        Vec r = d.K * d.vectors.col(j) - d.values(j) * (d.M * d.vectors.col(j));
        EXPECT_LE(r.norm(), 1e-8 * kn);
        if (j > 0) EXPECT_GE(d.values(j), d.values(j - 1));
    }
    EXPECT_NEAR(d.values(0), 0.0, 1e-9);
}

TEST(EdgeSpectrum, SqrtWeightAgainstFineReference) {
    EdgeSpec e;
    e.weight = WeightFn::power(0, 1, 1, 0.5);
    auto fine = solve_edge_spectrum(e, 3, mesh(1.0 / 8192));
    auto coarse = solve_edge_spectrum(e, 3, mesh(1.0 / 256));
    for (int nu = 1; nu <= 3; ++nu) {
        double f = fine.data.values(nu - 1);
        EXPECT_GE(f, pi2 * (nu - 1) * (nu - 1));
        EXPECT_NEAR(coarse.data.values(nu - 1), f, 5.0 / (256.0 * 256.0) * f + 1e-8);
    }
    EXPECT_EQ(fine.data.method, "shift-invert subspace");
}

TEST(EdgeSpectrum, SparseAndDenseAgree) {
    EdgeSpec e;
    e.weight = WeightFn::power(0, 1, 1, 0.5);
    EigenOptions dense, sparse;
    sparse.dense_limit = 0;
    auto a = solve_edge_spectrum(e, 6, mesh(1.0 / 300), dense);
    auto b = solve_edge_spectrum(e, 6, mesh(1.0 / 300), sparse);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(a.data.values(i), b.data.values(i), 1e-9 * (1 + a.data.values(i)));
}

TEST(GraphSpectrum, SingleEdgeEqualsEdgeSpectrum) {
    MetricGraph g = single_edge_graph(WeightFn::constant(0, 1, 1));
    auto a = solve_graph_spectrum(g, 5, mesh(1.0 / 128));
    auto b = solve_edge_spectrum(unit_edge(), 5, mesh(1.0 / 128));
    EXPECT_NEAR((a.data.values - b.data.values).norm(), 0.0, 1e-10);
}

TEST(GraphSpectrum, TwoUnitEdgesGiveIntervalOfLengthTwo) {
    auto s = solve_graph_spectrum(two_unit_edges(), 6, mesh(1.0 / 512));
    for (int nu = 1; nu <= 6; ++nu) {
        double ref = pi2 * (nu - 1) * (nu - 1) / 4;
        EXPECT_NEAR(s.data.values(nu - 1), ref, nu == 1 ? 1e-9 : 5e-3 * ref);
    }
    for (int j = 0; j < 5; ++j) {
        auto rep = kirchhoff_residuals(s, j);
        ASSERT_EQ(rep.residual.size(), 1u);
        EXPECT_LT(rep.residual[0], 1e-6);
    }
}

TEST(GraphSpectrum, ForkKirchhoffAndInterlacing) {
    auto g = build_from_rectangles({{{0, 1, 0, 1}, {0, 1, 2, 3}, {1, 2, 0, 3}}});
    double h = 1.0 / 128;
    auto mesh1 = make_mesh(g, mesh(h));
    auto s = solve_graph_spectrum(g, 20, mesh1);
    auto ds = direct_sum_spectrum(g, 20, mesh1);
    for (int nu = 0; nu < 20; ++nu)
        EXPECT_GE(s.data.values(nu), ds.values(nu) - 5 * h * h * s.data.values(nu) - 1e-10);
    for (int j = 0; j < 5; ++j) EXPECT_LT(kirchhoff_residuals(s, j).residual[0], 1e-6);
    // fine-mesh self consistency
    auto fine = solve_graph_spectrum(g, 8, mesh(h / 4));
    for (int nu = 0; nu < 8; ++nu)
        EXPECT_NEAR(s.data.values(nu), fine.data.values(nu), eigen_tolerance(h, fine.data.values(nu)));
}

TEST(DirectSum, CountingMerge) {
    auto g = two_unit_edges();
    auto ds = direct_sum_spectrum(g, 10, mesh(1.0 / 256));
    EXPECT_EQ(counting(ds.per_edge[0], 50.0), 3);
    EXPECT_EQ(ds.count(50.0), 6);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.0, ds.valid_below);
    for (int i = 0; i < 100; ++i) {
        double tau = U(rng);
        EXPECT_EQ(ds.count(tau), counting_sum(ds, tau));
    }
}

TEST(DirectSum, PermutationStable) {
    auto g = build_from_rectangles({{{0, 1, 0, 1}, {1, 2, 0, 2}}});
    auto a = direct_sum_spectrum(g, 10, mesh(1.0 / 64));
    std::swap(g.edges[0], g.edges[1]);
    g.edges[0].id = 0;
    g.edges[1].id = 1;
    g.joins.clear();
    auto b = direct_sum_spectrum(g, 10, mesh(1.0 / 64));
    EXPECT_NEAR((a.values - b.values).norm(), 0.0, 1e-9);
}

TEST(LowerBound, EdgeGamma) {
    EdgeSpec e = classify_condition_C(unit_edge(2.0));
    EXPECT_NEAR(edge_lower_bound(e), pi2, 1e-12);
    EdgeSpec l2;
    l2.a = 0;
    l2.b = 2;
    l2.weight = WeightFn::constant(0, 2, 1);
    EXPECT_NEAR(edge_lower_bound(classify_condition_C(l2)), pi2 / 4, 1e-12);
    EdgeSpec sq;
    sq.weight = WeightFn::power(0, 1, 1, 0.5);
    sq = classify_condition_C(sq);
    EXPECT_NEAR(edge_lower_bound(sq), pi2, 1e-9);
    auto s = solve_edge_spectrum(sq, 8, mesh(1.0 / 1024));
    for (int nu = 1; nu <= 8; ++nu)
        EXPECT_GE(s.data.values(nu - 1), edge_lower_bound(sq) * (nu - 1) * (nu - 1) - 1e-8);
    EdgeSpec raw = unit_edge();
    EXPECT_THROW(edge_lower_bound(raw), Error);
}

TEST(LowerBound, DirectSumBound) {
    auto g = classify_all(build_from_rectangles({{{0, 1, 0, 1}, {0, 1, 2, 3}, {1, 2, 0, 3}}}));
    double gam = 1e300;
    for (auto& e : g.edges) gam = std::min(gam, edge_lower_bound(e));
    auto ds = direct_sum_spectrum(g, 30, mesh(1.0 / 128));
    int r = g.edge_count();
    for (int nu = 1; r * (nu - 1) + 1 <= ds.values.size(); ++nu)
        EXPECT_GE(ds.values(r * (nu - 1)), gam * (nu - 1) * (nu - 1) - 1e-9);
}

TEST(LowerBound, MeshConvergenceIsSecondOrder) {
    auto g = build_from_rectangles({{{0, 1, 0, 1}, {1, 2, 0, 2}}});
    auto a = solve_graph_spectrum(g, 10, mesh(1.0 / 32));
    auto b = solve_graph_spectrum(g, 10, mesh(1.0 / 64));
    auto c = solve_graph_spectrum(g, 10, mesh(1.0 / 128));
    for (int j = 1; j < 10; ++j) {
        double d1 = a.data.values(j) - b.data.values(j), d2 = b.data.values(j) - c.data.values(j);
        EXPECT_GT(d1 / d2, 3.5);
        EXPECT_LT(d1 / d2, 4.5);
    }
}

TEST(Schrodinger, ConstantWeightIsDirichletLaplacian) {
    auto rep = schrodinger_oracle(WeightFn::constant(0, 1, 1), 5, 1.0 / 512);
    for (int nu = 1; nu <= 4; ++nu) EXPECT_NEAR(rep.Q_values(nu - 1), pi2 * nu * nu, 5e-3 * pi2 * nu * nu);
    EXPECT_TRUE(rep.verdict);
}

TEST(Schrodinger, SqrtPotentialAndChain) {
    WeightFn q = WeightFn::power(0, 1, 1, 0.5);
    auto Q = schrodinger_potential(q);
    for (double x : {1e-3, 0.1, 0.37, 0.9, 1.0}) EXPECT_NEAR(Q(x), 5.0 / (16 * x * x), 1e-10 * (5.0 / (16 * x * x)));
    auto rep = schrodinger_oracle(q, 5, 1.0 / 2048);
    EXPECT_TRUE(rep.verdict);
    EXPECT_THROW(schrodinger_oracle(WeightFn::power(0, 1, 1, 1.5), 3, 1.0 / 64), Error);
}

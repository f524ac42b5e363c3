#include <gtest/gtest.h>

#include <optional>

#include "thinlab/graph_spectra.hpp"
#include "thinlab/manifold.hpp"

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

struct EdgeSystem {
    GalerkinBasis b;
    std::shared_ptr<const CutoffOperator> op;
    GalerkinSystem s;
};

EdgeSystem bistable_system(double kappa = 1e-3, int N = 8) {
    EdgeSystem e;
    e.b = unit_edge_basis(1.0 / 32, N);
    BoundedSet B;
    B.h1_radius = 1.0;
    e.op = std::make_shared<CutoffOperator>(build_cutoff(ScalarNonlinearity::cubic_bistable(kappa), 0.1, B, {&e.b}));
    e.s = make_system(e.b, select_nu(e.b.lambda, e.op->L, 0.1), e.op);
    return e;
}

EdgeSystem linear_system(double a, double l = 1e-3, int nu = 2) {
    EdgeSystem e;
    e.b = unit_edge_basis(1.0 / 32, 8);
    e.op = std::make_shared<CutoffOperator>(linear_operator(ScalarNonlinearity::linear(a), l));
    auto sel = make_selection(e.b.lambda, nu, e.op->L, l);
    e.s = make_system(e.b, sel, e.op);
    return e;
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

TEST(Etd, WeightsMatchQuadrature) {
    for (double x : {-3.0, -0.5, -0.05, -1e-7, 0.0, 1e-7, 0.05, 0.5, 3.0}) {
        double p1 = 0, ps = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            double t = (i + 0.5) / n;
            p1 += std::exp(x * t) / n;
            ps += t * std::exp(x * t) / n;
        }
        EXPECT_NEAR(detail::etd_phi1(x), p1, 1e-8) << x;
        EXPECT_NEAR(detail::etd_psi(x), ps, 1e-8) << x;
    }
}

TEST(System, Invariants) {
    auto e = bistable_system();
    const auto& s = e.s;
    EXPECT_EQ(s.nu, 2);
    EXPECT_LT(s.lambda_nu(), s.zeta);
    EXPECT_LT(s.mu, s.lambda_next());
    EXPECT_LE(s.zeta, s.mu);
    EXPECT_LT(std::exp(-(s.lambda_next() - s.mu) * s.T), s.tail_tol);
    EXPECT_NEAR(s.steps() * s.dt, s.T, 1e-9 * s.T);
    Vec xi(2);
    xi << 0.4, -0.2;
    EXPECT_EQ((s.P1(s.E(xi)) - xi).norm(), 0.0);
    EXPECT_EQ(s.P2(s.E(xi)).norm(), 0.0);
    EXPECT_EQ(code_of([&] { make_system(e.b, 2, 5.0, 30.0, 0.1, 0.1, e.op); }), Errc::no_admissible_nu);
    EXPECT_EQ(code_of([&] { make_system(e.b, 2, 30.0, 20.0, 0.1, 0.1, e.op); }), Errc::invalid_argument);
}

TEST(System, DecayBounds) {
    auto e = bistable_system();
    auto r = decay_bounds_check(e.s);
    EXPECT_EQ(r.checked, 400);
    EXPECT_TRUE(r.all());
}

TEST(Kernel, ZeroAndClosedForms) {
    auto e = linear_system(-1.0);
    const auto& s = e.s;
    HistoryFn y = zero_history(s, s.zeta);
    EXPECT_EQ(apply_K(s, y, s.zeta).Y.norm(), 0.0);

    // y = unit in one mode for all t <= 0
    for (int j : {0, 1, 4}) {
        HistoryFn u = zero_history(s, s.zeta);
        u.Y.row(j).setOnes();
        HistoryFn z = apply_K(s, u, s.zeta);
        double lam = s.basis.lambda(j);
        for (int k = u.steps() / 2; k <= u.steps(); k += 97) {
            double t = u.time(k), ref;
            if (j < s.nu) {
                // -int_t^0 e^{lam (s - t)} ds
                ref = lam > 0 ? -std::expm1(-lam * t) / lam : t;
            } else {
                // int_{-T}^t e^{-lam (t - s)} ds, the truncation is below tail_tol
                ref = -std::expm1(-lam * (t + s.T)) / lam;
            }
            EXPECT_NEAR(z.Y(j, k), ref, 1e-9 * (1 + std::abs(ref))) << j << " " << t;
            for (int i = 0; i < s.N(); ++i)
                if (i != j) EXPECT_EQ(z.Y(i, k), 0.0);
        }
    }

    // exponential history e^{-zeta t} on a high mode
    HistoryFn u = zero_history(s, s.zeta);
    const int j = 3;
    double lam = s.basis.lambda(j);
    for (int k = 0; k <= u.steps(); ++k) u.Y(j, k) = std::exp(-s.zeta * u.time(k));
    HistoryFn z = apply_K(s, u, s.zeta);
    for (int k = u.steps() / 2; k <= u.steps(); k += 131) {
        double t = u.time(k);
        double ref = std::exp(-s.zeta * t) / (lam - s.zeta);
        EXPECT_NEAR(z.Y(j, k) / ref, 1.0, 1e-4) << t;
    }

    HistoryFn short_h = zero_history(s, s.zeta);
    short_h.T = 0.1;
    EXPECT_EQ(code_of([&] { apply_K(s, short_h, s.zeta); }), Errc::tail_truncation_too_coarse);
}

TEST(Kernel, BoundsOnRandomHistories) {
    auto e = bistable_system();
    auto r = kernel_bounds_check(e.s, 100);
    EXPECT_EQ(r.histories, 100);
    EXPECT_TRUE(r.all()) << r.worst_l2 << " " << r.worst_eps << " " << r.worst_half << " " << r.worst_contraction;
    EXPECT_LE(r.worst_half, 0.5);
    EXPECT_LE(r.worst_contraction, 0.5);
}

TEST(Kernel, GammaWithoutNonlinearity) {
    auto e = bistable_system();
    GalerkinSystem s = e.s;
    s.cutoff.reset();
    Vec xi(2);
    xi << 0.3, 0.1;
    HistoryFn y = linear_flow(s, xi, s.zeta);
    HistoryFn r = apply_Gamma(s, xi, y);
    EXPECT_NEAR((r.Y - y.Y).norm(), 0.0, 1e-14);
}

TEST(Picard, LinearPartOnly) {
    auto e = bistable_system();
    GalerkinSystem s = e.s;
    s.cutoff.reset();
    Vec xi(2);
    xi << 0.7, -0.4;
    auto r = solve_phi(s, xi);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_NEAR((r.phi.now() - s.E(xi)).norm(), 0.0, 1e-15);
    auto p = chart_point(s, xi);
    EXPECT_NEAR((p.DLambda - Mat::Identity(s.N(), 2)).norm(), 0.0, 1e-14);
    Vec ref = -s.basis.lambda.head(2).cwiseProduct(xi);
    EXPECT_NEAR((p.v - ref).norm(), 0.0, 1e-14);
}

TEST(Picard, BistableChart) {
    auto e = bistable_system();
    const auto& s = e.s;
    auto grid = box_grid(2, 1.5, 3);
    auto chart = build_chart(s, grid);
    EXPECT_LE(chart.identity_error(), 1e-12);
    EXPECT_LE(chart.max_factor(), 0.55);
    for (auto& p : chart.points) {
        // g(0) = 0, so the origin is fixed after one sweep
        EXPECT_GE(p.iterations, p.xi.norm() > 0 ? 5 : 1);
        EXPECT_TRUE(p.Lambda.allFinite());
    }
    // Lipschitz in the system norm with constant at most 1 / (1 - 1/2)
    for (size_t a = 0; a < chart.points.size(); ++a)
        for (size_t b = a + 1; b < chart.points.size(); ++b) {
            const auto &p = chart.points[a], &q = chart.points[b];
            Vec d = p.Lambda - q.Lambda;
            double dxi = s.basis.h1(s.E(p.xi - q.xi));
            EXPECT_LE(s.basis.h1(d), 2.0 * dxi + 1e-12);
        }
}

TEST(Picard, ContractionViolatedForStrongNonlinearity) {
    auto b = unit_edge_basis(1.0 / 32, 8);
    BoundedSet B;
    B.h1_radius = 1.0;
    auto op = std::make_shared<CutoffOperator>(build_cutoff(ScalarNonlinearity::cubic_bistable(1e3), 0.1, B, {&b}));
    // the weights of a nominal system, the nonlinearity far outside the admissible range
    auto sel = make_selection(b.lambda, 2, 0.01, 0.01);
    auto s = make_system(b, sel, op);
    Vec xi(2);
    xi << 2.0, 1.0;
    EXPECT_EQ(code_of([&] { solve_phi(s, xi); }), Errc::contraction_violated);
}

TEST(Picard, DerivativesMatchDifferences) {
    auto e = bistable_system();
    for (auto& xi : box_grid(2, 1.0, 2)) {
        auto p = chart_point(e.s, xi);
        auto fd = derivative_check(e.s, p);
        EXPECT_LE(fd.worst_DLambda, 1e-4);
        EXPECT_LE(fd.worst_Dv, 1e-4);
    }
}

TEST(ReducedField, LinearNonlinearityIsFlat) {
    auto e = linear_system(-1.0);
    const auto& s = e.s;
    Vec xi(2);
    xi << 0.5, -0.25;
    auto p = chart_point(s, xi);
    EXPECT_NEAR((p.Lambda - s.E(xi)).norm(), 0.0, 1e-12);
    Vec ref = -(s.basis.lambda.head(2).array() + 1.0).matrix().cwiseProduct(xi);
    EXPECT_NEAR((p.v - ref).norm(), 0.0, 1e-12);
}

TEST(ReducedField, ConstantEquilibrium) {
    auto e = bistable_system();
    Vec one = e.b.project(Vec::Ones(e.b.nodes()));
    auto p = chart_point(e.s, one.head(2), false);
    EXPECT_NEAR((p.Lambda - one).norm(), 0.0, 1e-10);
    EXPECT_NEAR(p.v.norm(), 0.0, 1e-10);
}

TEST(Sweep, UnitSquareSeparatesExactly) {
    RectUnionDomain d{{{0, 1, 0, 1}}};
    auto t = epsilon_compare(d, {0.4, 0.2, 0.1, 0.05}, box_grid(2, 1.5, 3));
    EXPECT_EQ(t.nu, 2);
    ASSERT_EQ(t.rows.size(), 5u);
    EXPECT_TRUE(t.monotone());
    for (auto& r : t.rows) {
        EXPECT_LE(r.dLambda, 1e-6);
        EXPECT_LE(r.dv, 1e-6);
    }
    EXPECT_EQ(t.rows.back().dLambda, 0.0);
    EXPECT_LE(t.graph.max_factor(), 0.55);
}

TEST(Sweep, LShapeConverges) {
    RectUnionDomain d{{{0, 1, 0, 1}, {1, 2, 0, 0.5}}};
    auto t = epsilon_compare(d, {0.2, 0.1, 0.05, 0.025}, box_grid(3, 1.0, 2));
    EXPECT_EQ(t.nu, 3);
    EXPECT_TRUE(t.monotone());
    // roughly halves with epsilon
    for (size_t i = 1; i + 1 < t.rows.size(); ++i) EXPECT_LT(t.rows[i].dLambda, 0.8 * t.rows[i - 1].dLambda);
}

TEST(Sweep, NuMismatchIsReported) {
    RectUnionDomain d{{{0, 1, 0, 1}, {1, 2, 0, 0.5}}};
    EXPECT_EQ(code_of([&] { build_sweep(d, {0.4, 0.2}, ManifoldSetup{}); }), Errc::nu_mismatch);
}

TEST(Sweep, FamilyValidatesEpsilons) {
    RectUnionDomain d{{{0, 1, 0, 1}}};
    EXPECT_EQ(code_of([&] { squeezed_family(d, {0.1, 0.2}, 0.25, 4); }), Errc::invalid_argument);
    EXPECT_EQ(code_of([&] { squeezed_family(d, {0.1, -0.2}, 0.25, 4); }), Errc::invalid_argument);
}

TEST(Neighborhood, LinearFluxIsMinusGradientSquared) {
    auto e = linear_system(-1.0);
    auto f = ScalarNonlinearity::linear(-1.0);
    auto r = invariant_neighborhood(e.s, f, 0.5, {&e.s}, 8);
    ASSERT_EQ(r.level_points.size(), 8u);
    for (size_t k = 0; k < r.level_points.size(); ++k) {
        Vec xi = r.level_points[k];
        Vec grad = (e.s.basis.lambda.head(2).array() + 1.0).matrix().cwiseProduct(xi);
        EXPECT_NEAR(r.flux[0][k], -grad.squaredNorm(), 1e-9 * grad.squaredNorm());
        EXPECT_NEAR(liapunov_V0(f, e.b, e.s.E(xi)), 0.5, 1e-9);
    }
    EXPECT_LT(r.max_flux, 0.0);
}

TEST(Neighborhood, BistableFluxIsNegative) {
    auto e = bistable_system();
    auto r = invariant_neighborhood(e.s, e.op->base, 5e-5, {&e.s}, 8);
    EXPECT_TRUE(r.origin_inside);
    EXPECT_LT(r.max_flux, 0.0);
    EXPECT_TRUE(r.inside_U);
}

TEST(Neighborhood, PositiveFluxIsReported) {
    auto e = linear_system(-1.0);
    auto grow = linear_system(5.0);
    EXPECT_EQ(code_of([&] { invariant_neighborhood(e.s, ScalarNonlinearity::linear(-1.0), 0.5, {&grow.s}, 8); }),
              Errc::flux_sign_violation);
}

// One line per acceptance criterion; exit status counts the failures.
#include <chrono>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include "thinlab/dynamics.hpp"
#include "thinlab/gap_analysis.hpp"
#include "thinlab/graph_spectra.hpp"
#include "thinlab/manifold.hpp"
#include "thinlab/squeeze2d.hpp"

using namespace thinlab;

namespace {

const double pi2 = M_PI * M_PI;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MeshOptions mesh(double h) {
    MeshOptions m;
    m.h = h;
    return m;
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

RectUnionDomain unit_square_domain() { return {{{0, 1, 0, 1}}}; }
RectUnionDomain fork_domain() { return {{{0, 1, 0, 1}, {0, 1, 2, 3}, {1, 2, 0, 3}}}; }
RectUnionDomain lshape_domain() { return {{{0, 1, 0, 1}, {1, 2, 0, 0.5}}}; }
RectUnionDomain dumbbell_domain() { return {{{0, 2, 0, 1}, {2, 3, 0, 0.1}, {3, 5, 0, 1}}}; }

GalerkinBasis unit_edge_basis(double h, int N) {
    MetricGraph g;
    g.edges.push_back(EdgeSpec{});
    auto m = make_mesh(g, mesh(h));
    auto [K, M] = assemble_graph(g, m);
    return make_basis(K, M, N, 0.0);
}

// bistable system on the unit edge with (nu, L, l) chosen by select_nu
struct EdgeSystem {
    GalerkinBasis b;
    std::shared_ptr<const CutoffOperator> op;
    GalerkinSystem s;
};

std::unique_ptr<EdgeSystem> bistable_system() {
    auto e = std::make_unique<EdgeSystem>();
    e->b = unit_edge_basis(1.0 / 32, 8);
    BoundedSet B;
    B.h1_radius = 1.0;
    e->op = std::make_shared<CutoffOperator>(build_cutoff(ScalarNonlinearity::cubic_bistable(1e-3), 0.1, B, {&e->b}));
    e->s = make_system(e->b, select_nu(e->b.lambda, e->op->L, 0.1), e->op);
    return e;
}

Verdict edge_spectrum() {
    auto t0 = std::chrono::steady_clock::now();
    auto s = solve_edge_spectrum(EdgeSpec{}, 6, mesh(1.0 / 512));
    double secs = seconds_since(t0), worst = 0.0;
    for (int nu = 2; nu <= 6; ++nu) {
        double ref = pi2 * (nu - 1) * (nu - 1);
        worst = std::max(worst, std::abs(s.data.values(nu - 1) - ref) / ref);
    }
    bool zero = std::abs(s.data.values(0)) < 1e-8;
    return {zero && worst <= 5e-3 && secs < 1.0,
            fmt("max rel err %.2e (<= 5e-3), lambda_1 %.1e, %.3f s (< 1 s)", worst, s.data.values(0), secs)};
}

Verdict graph_coupling() {
    auto s = solve_graph_spectrum(two_unit_edges(), 6, mesh(1.0 / 512));
    double worst = 0.0, kirch = 0.0;
    for (int nu = 2; nu <= 6; ++nu) {
        double ref = pi2 * (nu - 1) * (nu - 1) / 4;
        worst = std::max(worst, std::abs(s.data.values(nu - 1) - ref) / ref);
    }
    for (int j = 0; j < 5; ++j)
        for (double r : kirchhoff_residuals(s, j).residual) kirch = std::max(kirch, r);
    bool zero = std::abs(s.data.values(0)) < 1e-8;
    return {zero && worst <= 5e-3 && kirch < 1e-6,
            fmt("max rel err %.2e (<= 5e-3), Kirchhoff residual %.2e (< 1e-6)", worst, kirch)};
}

Verdict interlacing() {
    auto g = build_from_rectangles(fork_domain());
    double h = 1.0 / 128;
    auto m = make_mesh(g, mesh(h));
    auto s = solve_graph_spectrum(g, 20, m);
    auto ds = direct_sum_spectrum(g, 20, m);
    double worst = -1e300;
    for (int nu = 0; nu < 20; ++nu) {
        double lam = s.data.values(nu);
        worst = std::max(worst, ds.values(nu) - 5 * h * h * lam - lam);
    }
    return {worst <= 1e-10, fmt("max(lambda_sum - 5h^2 lambda - lambda_graph) = %.2e (<= 0), nu <= 20", worst)};
}

Verdict counting_merge() {
    std::vector<MetricGraph> graphs{two_unit_edges(), build_from_rectangles(unit_square_domain()),
                                    build_from_rectangles(fork_domain()), build_from_rectangles(lshape_domain()),
                                    build_from_rectangles(dumbbell_domain())};
    std::mt19937 rng(11);
    int checked = 0, bad = 0;
    for (auto& g : graphs) {
        auto ds = direct_sum_spectrum(g, 12, mesh(1.0 / 256));
        std::uniform_real_distribution<double> U(0.0, ds.valid_below);
        for (int i = 0; i < 100; ++i, ++checked) {
            double tau = U(rng);
            if (ds.count(tau) != counting_sum(ds, tau)) ++bad;
        }
    }
    return {bad == 0, fmt("%d mismatches in %d thresholds over %zu graphs (0)", bad, checked, graphs.size())};
}

Verdict appendix_chain() {
    WeightFn q = WeightFn::power(0, 1, 1, 0.5);
    auto Q = schrodinger_potential(q);
    double worst_Q = 0.0;
    for (int i = 1; i <= 1000; ++i) {
        double x = i / 1000.0, ref = 5.0 / (16 * x * x);
        worst_Q = std::max(worst_Q, std::abs(Q(x) - ref) / ref);
    }
    auto rep = schrodinger_oracle(q, 8, 1.0 / 2048);
    double tol = eigen_tolerance(1.0 / 2048, rep.q_values(7));
    double worst_first = -1e300, worst_second = -1e300;
    for (int nu = 2; nu <= 8; ++nu) {
        double lq = rep.q_values(nu - 1), mq = rep.Q_values(nu - 2), floor = pi2 * (nu - 1) * (nu - 1) * (1 - 1e-3);
        worst_first = std::max(worst_first, mq - lq);
        worst_second = std::max(worst_second, floor - mq);
    }
    bool pass = worst_Q <= 1e-10 && worst_first <= tol && worst_second <= 0.0;
    return {pass, fmt("mu - lambda %.2e (<= FEM tol %.2e), floor - mu %.2e (<= 0), Q rel err %.1e (<= 1e-10)",
                      worst_first, tol, worst_second, worst_Q)};
}

Verdict gap_condition() {
    auto s = solve_edge_spectrum(EdgeSpec{}, 50, mesh(1.0 / 512));
    double tail = gap_ratios(s.data.values).running_max;
    Eigen::VectorXd ladder(50);
    for (int nu = 1; nu <= 50; ++nu) ladder(nu - 1) = nu;
    double bad = gap_ratios(ladder).running_max;
    double rel = std::abs(tail / (2 * M_PI) - 1);
    return {rel <= 0.05 && bad < 0.5, fmt("tail max %.4f, %.2f%% from 2pi (<= 5%%); ladder tail max %.4f (< 0.5)", tail,
                                          100 * rel, bad)};
}

Verdict squeeze_sweep() {
    auto t0 = std::chrono::steady_clock::now();
    auto tab = convergence_sweep(unit_square_domain(), {1.0, 0.5, 0.25, 0.1}, 8, 1.0 / 64);
    double secs = seconds_since(t0);
    double lambda09 = tab.lambda_0(8), worst = 0.0;
    int compared = 0;
    for (auto& r : tab.rows)
        if (pi2 / (r.eps * r.eps) > lambda09) {
            worst = std::max(worst, std::abs(r.lambda_eps - r.lambda_0) / eigen_tolerance(tab.h, r.lambda_0));
            ++compared;
        }
    bool monotone = true;
    for (int j = 1; j <= 8; ++j) {
        auto g = tab.gaps(j);
        for (size_t i = 1; i < g.size(); ++i) monotone = monotone && g[i] <= g[i - 1] + 1e-8;
    }
    return {compared > 0 && worst <= 1.0 && monotone && secs < 60.0,
            fmt("%d separated rows, max |diff|/tol %.2e (<= 1), gaps %s, %.1f s (< 60 s)", compared, worst,
                monotone ? "nonincreasing" : "NOT monotone", secs)};
}

Verdict cutoff_estimates() {
    auto b = unit_edge_basis(1.0 / 64, 12);
    BoundedSet B;
    B.h1_radius = 1.5;
    auto op = build_cutoff(ScalarNonlinearity::cubic_bistable(), 0.01, B, {&b});
    auto v = verify_cutoff(op, b, B.h1_radius, 1000, 100);
    return {v.all() && v.pairs == 1000 && v.agree_total == 100,
            fmt("Lipschitz %d/%d, derivative %d/%d, splitting %d/%d, bounded %d/%d, g = f^ %d/%d", v.lipschitz_pass,
                v.pairs, v.derivative_pass, v.pairs, v.splitting_pass, v.splitting_total, v.boundedness_pass, v.pairs,
                v.agree_pass, v.agree_total)};
}

Verdict contraction() {
    auto e = bistable_system();
    auto chart = build_chart(e->s, box_grid(e->s.nu, 1.5, 3), false);
    int few = 0;
    for (auto& p : chart.points)
        if (p.xi.norm() > 0 && p.iterations < 5) ++few;
    auto k = kernel_bounds_check(e->s, 100);
    bool pass = chart.max_factor() <= 0.55 && few == 0 && k.histories == 100 && k.all();
    return {pass, fmt("max factor %.2e (<= 0.55), %d points under 5 iterations, kernel bounds %d/%d/%d/%d of %d "
                      "(worst half %.3f, contraction %.3f)",
                      chart.max_factor(), few, k.l2_pass, k.eps_pass, k.half_pass, k.contraction_pass, k.histories,
                      k.worst_half, k.worst_contraction)};
}

Verdict chart_identity() {
    auto e = bistable_system();
    PicardOptions po;
    auto grid = box_grid(e->s.nu, 1.5, 5);
    auto chart = build_chart(e->s, grid, true, po);
    double worst_fd = 0.0;
    for (auto& p : chart.points) {
        if (p.xi.cwiseAbs().maxCoeff() >= 1.5 - 1e-12) continue; // interior only
        worst_fd = std::max(worst_fd, derivative_check(e->s, p).worst_DLambda);
    }
    double id = chart.identity_error();
    return {id <= 10 * po.tol && worst_fd <= 1e-4,
            fmt("|P1 Lambda - xi| %.2e (<= %.0e), DLambda vs differences %.2e (<= 1e-4)", id, 10 * po.tol, worst_fd)};
}

Verdict invariance() {
    auto e = bistable_system();
    auto grid = box_grid(e->s.nu, 1.0, 5);
    grid.resize(20);
    auto inv = invariance_check(e->s, grid, 5.0, 1e-3);
    double tang = 0.0;
    for (size_t i = 0; i < grid.size(); i += 4) tang = std::max(tang, tangency_check(e->s, grid[i], 1.0));
    return {inv.trajectories == 20 && inv.max_distance <= 1e-6 && tang <= 1e-5,
            fmt("%d trajectories, max dist %.2e (<= 1e-6); |P1 u - xi| %.2e (<= 1e-5)", inv.trajectories,
                inv.max_distance, tang)};
}

Verdict c1_trend() {
    auto t = epsilon_compare(unit_square_domain(), {0.4, 0.2, 0.1, 0.05}, box_grid(2, 1.5, 3));
    std::string cols;
    for (auto& r : t.rows) cols += fmt(" %.1e", std::max({r.dLambda, r.dDLambda, r.dv, r.dDv}));
    return {t.monotone(1e-8), fmt("columns %s (noise 1e-8), max per row:%s", t.monotone(1e-8) ? "nonincreasing" : "NOT monotone",
                                  cols.c_str())};
}

// bistable dumbbell, matched initial data lifted from the graph ensemble
Verdict semicontinuity() {
    std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
    auto fam = squeezed_family(dumbbell_domain(), eps, 1.0 / 16, 12);
    auto f = ScalarNonlinearity::cubic_bistable(1.0);
    auto ens = random_ensemble(fam.graph, 32, 2.0, 17);
    SampleOptions so;
    so.T0 = 20;
    so.T1 = 5;
    so.dt = 1e-2;
    auto A0 = sample_attractor(fam.graph, fhat_field(fam.graph, f), ens, so);
    std::vector<double> d;
    for (size_t i = 0; i < eps.size(); ++i) {
        std::vector<Vec> ic;
        for (auto& c : ens) ic.push_back(lift_to_basis(fam, static_cast<int>(i), c));
        auto Ae = sample_attractor(fam.bases[i], fhat_field(fam.bases[i], f), ic, so);
        d.push_back(semidistance(Ae, A0, fam, static_cast<int>(i)));
    }
    bool monotone = true;
    for (size_t i = 1; i < d.size(); ++i) monotone = monotone && d[i] <= d[i - 1] + 1e-8;
    return {monotone, fmt("semidistance %.4f %.4f %.4f %.4f for eps 0.4 0.2 0.1 0.05 (nonincreasing)", d[0], d[1], d[2], d[3])};
}

Verdict liapunov() {
    auto fam = squeezed_family(dumbbell_domain(), {0.1}, 1.0 / 16, 12);
    const auto& b = fam.graph;
    auto f = ScalarNonlinearity::cubic_bistable(1.0);
    auto G = fhat_field(b, f);
    double worst = -1e300;
    int n = 0;
    for (auto& c0 : random_ensemble(b, 50, 2.0, 23)) {
        auto tr = integrate(b, G, c0, 10.0, 1e-2);
        worst = std::max(worst, liapunov_max_increase(liapunov_trace(b, f, tr)));
        ++n;
    }
    return {n == 50 && worst <= 1e-6, fmt("%d trajectories, max per-step increase %.2e (<= 1e-6)", n, worst)};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Verdict()> run;
    };
    const Criterion all[] = {
        {"edge spectrum oracle", edge_spectrum},
        {"graph coupling oracle", graph_coupling},
        {"interlacing", interlacing},
        {"counting merge", counting_merge},
        {"Schrodinger chain", appendix_chain},
        {"gap condition", gap_condition},
        {"squeeze sweep", squeeze_sweep},
        {"cut-off estimates", cutoff_estimates},
        {"contraction", contraction},
        {"chart identity", chart_identity},
        {"invariance", invariance},
        {"C1 convergence trend", c1_trend},
        {"upper semicontinuity trend", semicontinuity},
        {"Liapunov monotonicity", liapunov},
    };
    int failed = 0, k = 0;
    for (auto& c : all) {
        ++k;
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s [%2d] %s: %s\n", v.pass ? "PASS" : "FAIL", k, c.name, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", k - failed, k);
    return failed == 0 ? 0 : 1;
}

#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dynamics.hpp"
#include "gap_analysis.hpp"
#include "graph_spectra.hpp"
#include "io.hpp"
#include "squeeze2d.hpp"

namespace thinlab::cli {

struct RunConfig {
    std::string domain;
    json nonlinearity = {{"name", "cubic-bistable"}, {"kappa", 1e-3}};
    std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
    double mesh = 1.0 / 16;
    int eigenvalues = 8;   // spectrum, squeeze and gap windows
    int modes = 6;         // Galerkin basis size
    std::optional<double> L; // absent: from the cut-off
    double l = 0.1;
    int nu = 0;            // 0: smallest admissible
    double B_radius = 1.0;
    double box = 1.5;      // chart grid half-width
    int grid = 3;          // chart grid points per axis
    double T = 10.0, T0 = 20.0, T1 = 5.0, dt = 1e-2, t0 = 0.1;
    int ensemble = 16;
    double radius = 2.0;   // ensemble amplitude in |.|_H
    int pairs = 1000;      // cut-off verification pairs
    unsigned seed = 1;
    bool dump_mesh = false;
    std::string out = "out";
};

inline json to_json(const RunConfig& c) {
    json j = {{"domain", c.domain},   {"nonlinearity", c.nonlinearity}, {"eps", c.eps},
              {"mesh", c.mesh},       {"eigenvalues", c.eigenvalues},   {"modes", c.modes},
              {"l", c.l},             {"nu", c.nu},                     {"B_radius", c.B_radius},
              {"box", c.box},         {"grid", c.grid},                 {"T", c.T},
              {"T0", c.T0},           {"T1", c.T1},                     {"dt", c.dt},
              {"t0", c.t0},           {"ensemble", c.ensemble},         {"radius", c.radius},
              {"pairs", c.pairs},     {"seed", c.seed},                 {"dump_mesh", c.dump_mesh},
              {"out", c.out}};
    j["L"] = c.L ? json(*c.L) : json("auto");
    return j;
}

inline void validate(const RunConfig& c) {
    auto need = [](bool ok, const std::string& m) { require(ok, Errc::config, m); };
    need(!c.domain.empty(), "no domain file given");
    need(!c.eps.empty(), "eps list is empty");
    for (size_t i = 0; i < c.eps.size(); ++i) {
        need(c.eps[i] > 0, "eps must be positive");
        need(i == 0 || c.eps[i] < c.eps[i - 1], "eps must be strictly decreasing");
    }
    need(c.mesh > 0, "mesh must be positive");
    need(c.eigenvalues >= 1, "eigenvalues must be at least 1");
    need(c.modes >= 2, "modes must be at least 2");
    need(!c.L || *c.L > 0, "L must be positive");
    need(c.l > 0, "l must be positive");
    need(c.nu >= 0, "nu must be nonnegative");
    need(c.B_radius > 0 && c.box > 0 && c.radius > 0, "radii must be positive");
    need(c.grid >= 1 && c.ensemble >= 1 && c.pairs >= 1, "counts must be positive");
    need(c.T >= 0 && c.T0 >= 0 && c.T1 >= 0 && c.dt > 0 && c.t0 > 0, "horizons must be nonnegative and dt, t0 positive");
}

inline RunConfig from_json(const json& j) {
    require(j.is_object(), Errc::config, "config must be a JSON object");
    RunConfig c;
    try {
        for (auto& [k, v] : j.items()) {
            if (k == "domain") c.domain = v.get<std::string>();
            else if (k == "nonlinearity") c.nonlinearity = v;
            else if (k == "eps") c.eps = v.get<std::vector<double>>();
            else if (k == "mesh") c.mesh = v.get<double>();
            else if (k == "eigenvalues") c.eigenvalues = v.get<int>();
            else if (k == "modes") c.modes = v.get<int>();
            else if (k == "L") c.L = v.is_string() ? std::nullopt : std::optional<double>(v.get<double>());
            else if (k == "l") c.l = v.get<double>();
            else if (k == "nu") c.nu = v.get<int>();
            else if (k == "B_radius") c.B_radius = v.get<double>();
            else if (k == "box") c.box = v.get<double>();
            else if (k == "grid") c.grid = v.get<int>();
            else if (k == "T") c.T = v.get<double>();
            else if (k == "T0") c.T0 = v.get<double>();
            else if (k == "T1") c.T1 = v.get<double>();
            else if (k == "dt") c.dt = v.get<double>();
            else if (k == "t0") c.t0 = v.get<double>();
            else if (k == "ensemble") c.ensemble = v.get<int>();
            else if (k == "radius") c.radius = v.get<double>();
            else if (k == "pairs") c.pairs = v.get<int>();
            else if (k == "seed") c.seed = v.get<unsigned>();
            else if (k == "dump_mesh") c.dump_mesh = v.get<bool>();
            else if (k == "out") c.out = v.get<std::string>();
            else fail(Errc::config, "unknown config key \"" + k + "\"");
        }
    } catch (const json::exception& e) {
        fail(Errc::config, std::string("config: ") + e.what());
    }
    return c;
}

// Files are staged in memory and written together; a failed write removes
// whatever this run already wrote.
class Outputs {
public:
    void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }
    void add(const std::string& name, const CsvWriter& w) { add(name, w.str()); }
    void add(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }

    std::vector<std::string> commit(const std::string& dir) const {
        namespace fs = std::filesystem;
        std::vector<std::string> written;
        try {
            for (auto& [name, content] : files_) {
                fs::path p = fs::path(dir) / name;
                fs::create_directories(p.parent_path());
                std::ofstream f(p, std::ios::binary);
                require(bool(f), Errc::config, "cannot write " + p.string());
                written.push_back(p.string());
                f << content;
                f.close();
                require(!f.fail(), Errc::config, "write failed for " + p.string());
            }
        } catch (...) {
            std::error_code ec;
            for (auto& w : written) fs::remove(w, ec);
            throw;
        }
        return written;
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

struct LoadedDomain {
    std::optional<RectUnionDomain> rects;
    MetricGraph graph;
};

inline LoadedDomain load_domain(const std::string& path) {
    require(std::filesystem::exists(path), Errc::config, "domain file not found: " + path);
    json j = read_json_file(path);
    LoadedDomain d;
    if (j.contains("rectangles")) {
        d.rects = domain_from_json(j);
        d.graph = build_from_rectangles(*d.rects);
    } else {
        d.graph = graph_from_json(j);
    }
    return d;
}

inline const RectUnionDomain& need_rects(const LoadedDomain& d) {
    require(d.rects.has_value(), Errc::config, "this command needs a rectangle domain");
    return *d.rects;
}

inline std::string tag(double eps) { return fmt_num(eps); }

inline json selection_json(const NuSelection& s, double M, double rho) {
    auto [zeta, mu] = zeta_mu_in_interval(s);
    return {{"nu", s.nu},        {"zeta", zeta},   {"mu", mu},  {"eta", s.eta}, {"C_nu_1", s.c1},
            {"C_nu_2", s.c2},    {"L", s.L},       {"l", s.l},  {"M", M},       {"rho", rho},
            {"lambda_nu", s.lambda_nu}, {"lambda_next", s.lambda_next}};
}

inline json cmd_spectrum(const RunConfig& c, Outputs& out) {
    auto dom = load_domain(c.domain);
    MeshOptions mo;
    mo.h = c.mesh;
    Mesh1D mesh = make_mesh(dom.graph, mo);
    GraphSpectrum gs = solve_graph_spectrum(dom.graph, c.eigenvalues, mesh);
    DirectSum ds = direct_sum_spectrum(dom.graph, c.eigenvalues, mesh);

    CsvWriter spec({"index", "eigenvalue", "vector_file"});
    CsvWriter kir({"index", "join", "residual", "flux_scale"});
    double worst = 0.0;
    for (int j = 0; j < gs.data.size(); ++j) {
        char name[64];
        std::snprintf(name, sizeof name, "vectors/mode_%03d.csv", j + 1);
        spec.row({std::to_string(j + 1), fmt_num(gs.data.values(j)), name});
        CsvWriter vec({"edge", "x", "value"});
        for (int k = 0; k < dom.graph.edge_count(); ++k)
            for (size_t i = 0; i < gs.mesh.nodes[k].size(); ++i)
                vec.row({std::to_string(k), fmt_num(gs.mesh.nodes[k][i]), fmt_num(gs.data.vectors(gs.mesh.dof[k][i], j))});
        out.add(name, vec);
        KirchhoffReport kr = kirchhoff_residuals(gs, j);
        for (size_t q = 0; q < kr.residual.size(); ++q) {
            kir.row({std::to_string(j + 1), std::to_string(q), fmt_num(kr.residual[q]), fmt_num(kr.flux_scale[q])});
            worst = std::max(worst, kr.residual[q]);
        }
    }
    CsvWriter edge({"edge", "index", "eigenvalue"});
    for (size_t k = 0; k < ds.per_edge.size(); ++k)
        for (int i = 0; i < ds.per_edge[k].size(); ++i)
            edge.row({std::to_string(k), std::to_string(i + 1), fmt_num(ds.per_edge[k](i))});
    CsvWriter sum({"index", "eigenvalue", "edge"});
    for (int i = 0; i < ds.values.size(); ++i)
        sum.row({std::to_string(i + 1), fmt_num(ds.values(i)), std::to_string(ds.origin[i])});
    out.add("spectrum.csv", spec);
    out.add("edge_spectra.csv", edge);
    out.add("direct_sum.csv", sum);
    out.add("kirchhoff.csv", kir);
    out.add("graph.json", graph_to_json(dom.graph));
    std::vector<double> vals(gs.data.values.data(), gs.data.values.data() + gs.data.size());
    return {{"eigenvalues", vals}, {"max_kirchhoff_residual", worst}, {"edges", dom.graph.edge_count()},
            {"dofs", mesh.n_dofs}, {"method", gs.data.method}};
}

inline json cmd_squeeze(const RunConfig& c, Outputs& out) {
    auto dom = load_domain(c.domain);
    const auto& d = need_rects(dom);
    SweepTable t = convergence_sweep(d, c.eps, c.eigenvalues, c.mesh);
    CsvWriter w({"epsilon", "j", "lambda_eps", "lambda_0", "gap", "alignment"});
    for (auto& r : t.rows)
        w.row({fmt_num(r.eps), std::to_string(r.j), fmt_num(r.lambda_eps), fmt_num(r.lambda_0), fmt_num(r.gap),
               fmt_num(r.alignment)});
    out.add("sweep.csv", w);
    if (c.dump_mesh) {
        Triangulation tr = triangulate(d, c.mesh);
        std::string v, f;
        for (auto& p : tr.vertices) v += fmt_num(p[0]) + " " + fmt_num(p[1]) + "\n";
        for (auto& q : tr.triangles) f += std::to_string(q[0]) + " " + std::to_string(q[1]) + " " + std::to_string(q[2]) + "\n";
        out.add("mesh_vertices.txt", v);
        out.add("mesh_triangles.txt", f);
    }
    std::vector<double> l0(t.lambda_0.data(), t.lambda_0.data() + t.lambda_0.size());
    return {{"lambda_0", l0}, {"rows", t.rows.size()}};
}

inline GalerkinBasis graph_basis(const LoadedDomain& dom, const RunConfig& c, int N) {
    MeshOptions mo;
    mo.h = c.mesh;
    auto [K, M] = assemble_graph(dom.graph, make_mesh(dom.graph, mo));
    return make_basis(K, M, N, 0.0);
}

inline json cmd_gap(const RunConfig& c, Outputs& out) {
    auto dom = load_domain(c.domain);
    MeshOptions mo;
    mo.h = c.mesh;
    GraphSpectrum gs = solve_graph_spectrum(dom.graph, c.eigenvalues, mo);
    const Vec& lam = gs.data.values;
    GapReport rep = gap_ratios(lam);
    double L, M = std::numeric_limits<double>::quiet_NaN(), rho = M;
    if (c.L) {
        L = *c.L;
    } else {
        GalerkinBasis b = graph_basis(dom, c, std::min(c.modes, static_cast<int>(lam.size())));
        BoundedSet B;
        B.h1_radius = c.B_radius;
        CutoffOperator op = build_cutoff(nonlinearity_from_json(c.nonlinearity), c.l, B, {&b});
        L = op.L;
        M = op.M;
        rho = op.rho;
    }
    CsvWriter w({"nu", "lambda", "delta", "ratio", "c_nu_1", "c_nu_2", "admissible"});
    for (auto& r : gap_table(lam, L, c.l))
        w.row({std::to_string(r.nu), fmt_num(r.lambda), fmt_num(r.delta), fmt_num(r.ratio), fmt_num(r.c1), fmt_num(r.c2),
               r.admissible ? "1" : "0"});
    out.add("gap.csv", w);
    json s = {{"tail_max", rep.running_max},
              {"tail_start", rep.tail_start},
              {"trend_slope", rep.trend_slope},
              {"C1_estimate", std::isfinite(rep.c1_estimate) ? json(rep.c1_estimate) : json(nullptr)},
              {"L", L},
              {"l", c.l}};
    try {
        NuSelection sel = c.nu > 0 ? make_selection(lam, c.nu, L, c.l) : select_nu(lam, L, c.l);
        s["selected"] = selection_json(sel, M, rho);
        s["selected"]["admissible"] = admissible(sel);
    } catch (const Error& e) {
        if (e.code() != Errc::no_admissible_nu) throw;
        s["selected"] = nullptr;
    }
    return s;
}

inline ManifoldSetup setup_from(const RunConfig& c) {
    ManifoldSetup st;
    st.f = nonlinearity_from_json(c.nonlinearity);
    st.l = c.l;
    st.L = c.L.value_or(0.0);
    st.B_radius = c.B_radius;
    st.N = c.modes;
    st.h = c.mesh;
    st.nu = c.nu;
    return st;
}

inline json cutoff_json(const CutoffOperator& op) {
    return {{"q", op.q}, {"theta", op.theta}, {"rho", op.rho}, {"M", op.M}, {"K", op.K},
            {"C1", op.C1}, {"L", op.L}, {"l", op.l}, {"margin", op.margin}};
}

inline json cmd_cutoff(const RunConfig& c, Outputs& out) {
    auto dom = load_domain(c.domain);
    auto f = nonlinearity_from_json(c.nonlinearity);
    BoundedSet B;
    B.h1_radius = c.B_radius;
    std::vector<GalerkinBasis> spaces;
    if (dom.rects) {
        auto fam = squeezed_family(*dom.rects, c.eps, c.mesh, c.modes);
        spaces.push_back(fam.graph);
        for (auto& b : fam.bases) spaces.push_back(b);
    } else {
        spaces.push_back(graph_basis(dom, c, c.modes));
    }
    std::vector<const GalerkinBasis*> ptr;
    for (auto& b : spaces) ptr.push_back(&b);
    CutoffOperator op = build_cutoff(f, c.l, B, ptr);
    json j = cutoff_json(op);
    json ver = json::array();
    bool all = true;
    for (auto& b : spaces) {
        auto v = verify_cutoff(op, b, c.B_radius, c.pairs, 100, c.seed);
        auto rate = [](int p, int n) { return n > 0 ? static_cast<double>(p) / n : 1.0; };
        ver.push_back({{"epsilon", b.eps},
                       {"lipschitz", rate(v.lipschitz_pass, v.pairs)},
                       {"derivative", rate(v.derivative_pass, v.pairs)},
                       {"splitting", rate(v.splitting_pass, v.splitting_total)},
                       {"boundedness", rate(v.boundedness_pass, v.pairs)},
                       {"agree", rate(v.agree_pass, v.agree_total)},
                       {"worst_lipschitz_ratio", v.worst_lipschitz_ratio},
                       {"worst_derivative_ratio", v.worst_derivative_ratio}});
        all = all && v.all();
    }
    j["verification"] = ver;
    j["all_pass"] = all;
    out.add("cutoff.json", j);
    return j;
}

inline CsvWriter chart_csv(const ManifoldChart& ch, int N) {
    std::vector<std::string> h;
    for (int j = 0; j < ch.nu; ++j) h.push_back("xi_" + std::to_string(j + 1));
    for (int j = 0; j < N; ++j) h.push_back("Lambda_" + std::to_string(j + 1));
    for (int j = 0; j < ch.nu; ++j) h.push_back("v_" + std::to_string(j + 1));
    h.push_back("iterations");
    h.push_back("max_factor");
    CsvWriter w(h);
    for (auto& p : ch.points) {
        std::vector<std::string> r;
        for (int j = 0; j < ch.nu; ++j) r.push_back(fmt_num(p.xi(j)));
        for (int j = 0; j < N; ++j) r.push_back(fmt_num(p.Lambda(j)));
        for (int j = 0; j < ch.nu; ++j) r.push_back(fmt_num(p.v(j)));
        r.push_back(std::to_string(p.iterations));
        r.push_back(fmt_num(p.max_factor));
        w.row(r);
    }
    return w;
}

inline json cmd_manifold(const RunConfig& c, Outputs& out) {
    auto dom = load_domain(c.domain);
    const auto& d = need_rects(dom);
    ManifoldSetup st = setup_from(c);
    SweepSystems sw = build_sweep(d, c.eps, st);
    auto grid = box_grid(sw.selection.nu, c.box, c.grid);
    ConvergenceTable t = epsilon_compare(sw, grid, st.picard);
    out.add("chart_graph.csv", chart_csv(t.graph, c.modes));
    for (size_t i = 0; i < t.charts.size(); ++i) out.add("chart_eps_" + tag(c.eps[i]) + ".csv", chart_csv(t.charts[i], c.modes));
    CsvWriter w({"epsilon", "dLambda_max", "dDLambda_max", "dv_max", "dDv_max"});
    for (auto& r : t.rows) w.row(std::vector<double>{r.eps, r.dLambda, r.dDLambda, r.dv, r.dDv});
    out.add("convergence.csv", w);
    double id = t.graph.identity_error(), mf = t.graph.max_factor();
    json systems = json::array();
    auto sys_json = [](const GalerkinSystem& s) {
        return json{{"epsilon", s.basis.eps}, {"T", s.T}, {"dt", s.dt}, {"lambda_nu", s.lambda_nu()}, {"lambda_next", s.lambda_next()}};
    };
    systems.push_back(sys_json(sw.graph));
    for (size_t i = 0; i < t.charts.size(); ++i) {
        id = std::max(id, t.charts[i].identity_error());
        mf = std::max(mf, t.charts[i].max_factor());
        systems.push_back(sys_json(sw.systems[i]));
    }
    json s = {{"constants", selection_json(sw.selection, sw.cut->M, sw.cut->rho)},
              {"cutoff", cutoff_json(*sw.cut)},
              {"systems", systems},
              {"grid_points", grid.size()},
              {"identity_error", id},
              {"max_contraction_factor", mf},
              {"monotone", t.monotone()}};
    return s;
}

struct AttractorRun {
    SqueezedFamily fam;
    ScalarNonlinearity f = ScalarNonlinearity::linear(0.0);
    std::vector<Vec> ensemble;
    AttractorSample graph;
    std::vector<AttractorSample> eps;
};

// graph ensemble and matched epsilon ensembles (projected lifts)
inline AttractorRun run_attractors(const RectUnionDomain& d, const RunConfig& c) {
    AttractorRun r;
    r.fam = squeezed_family(d, c.eps, c.mesh, c.modes);
    r.f = nonlinearity_from_json(c.nonlinearity);
    r.ensemble = random_ensemble(r.fam.graph, c.ensemble, c.radius, c.seed);
    SampleOptions so;
    so.T0 = c.T0;
    so.T1 = c.T1;
    so.dt = c.dt;
    r.graph = sample_attractor(r.fam.graph, fhat_field(r.fam.graph, r.f), r.ensemble, so);
    for (size_t i = 0; i < c.eps.size(); ++i) {
        std::vector<Vec> ic;
        for (auto& e : r.ensemble) ic.push_back(lift_to_basis(r.fam, static_cast<int>(i), e));
        r.eps.push_back(sample_attractor(r.fam.bases[i], fhat_field(r.fam.bases[i], r.f), ic, so));
    }
    return r;
}

inline CsvWriter sample_csv(const AttractorSample& a, int N) {
    std::vector<std::string> h{"member"};
    for (int j = 0; j < N; ++j) h.push_back("c_" + std::to_string(j + 1));
    CsvWriter w(h);
    for (size_t k = 0; k < a.points.size(); ++k) {
        std::vector<std::string> r{std::to_string(a.member[k])};
        for (int j = 0; j < N; ++j) r.push_back(fmt_num(a.points[k](j)));
        w.row(r);
    }
    return w;
}

inline json cmd_simulate(const RunConfig& c, Outputs& out) {
    auto dom = load_domain(c.domain);
    const auto& d = need_rects(dom);
    AttractorRun run = run_attractors(d, c);
    const auto& b = run.fam.graph;
    Field G = fhat_field(b, run.f);
    IntegrateOptions io;
    io.stride = std::max(1, static_cast<int>(std::lround(0.1 / c.dt)));
    std::vector<std::string> h{"t"};
    for (int j = 0; j < c.modes; ++j) h.push_back("c_" + std::to_string(j + 1));
    CsvWriter traj(h), lia({"member", "t", "V0"});
    double worst = -std::numeric_limits<double>::infinity();
    for (size_t m = 0; m < run.ensemble.size(); ++m) {
        Trajectory tr = integrate(b, G, run.ensemble[m], c.T, c.dt, io);
        auto v = liapunov_trace(b, run.f, tr);
        worst = std::max(worst, liapunov_max_increase(v));
        for (size_t k = 0; k < tr.c.size(); ++k) {
            lia.row({std::to_string(m), fmt_num(tr.t[k]), fmt_num(v[k])});
            if (m == 0) {
                std::vector<double> r{tr.t[k]};
                for (int j = 0; j < c.modes; ++j) r.push_back(tr.c[k](j));
                traj.row(r);
            }
        }
    }
    out.add("trajectory_graph.csv", traj);
    out.add("liapunov.csv", lia);
    out.add("attractor_graph.csv", sample_csv(run.graph, c.modes));
    json near = json::array();
    near.push_back({{"epsilon", 0.0}, {"near_invariance", run.graph.near_invariance}});
    for (size_t i = 0; i < run.eps.size(); ++i) {
        out.add("attractor_eps_" + tag(c.eps[i]) + ".csv", sample_csv(run.eps[i], c.modes));
        near.push_back({{"epsilon", c.eps[i]}, {"near_invariance", run.eps[i].near_invariance}});
    }
    json s = {{"samples", run.graph.points.size()}, {"near_invariance", near}, {"liapunov_max_increase", worst}};
    if (run.f.dissipative()) s["absorbing_l2_radius"] = absorbing_l2_radius(run.f, b.volume());
    return s;
}

inline json cmd_compare(const RunConfig& c, Outputs& out) {
    auto dom = load_domain(c.domain);
    const auto& d = need_rects(dom);
    AttractorRun run = run_attractors(d, c);
    CsvWriter w({"epsilon", "semidistance"});
    std::vector<double> sd;
    for (size_t i = 0; i < run.eps.size(); ++i) {
        sd.push_back(semidistance(run.eps[i], run.graph, run.fam, static_cast<int>(i)));
        w.row(std::vector<double>{c.eps[i], sd.back()});
    }
    out.add("semidistance.csv", w);

    // linear flows from a y-constant profile
    Triangulation t = triangulate(d, c.mesh);
    double x0 = d.x_min(), x1 = d.x_max();
    Vec u0(t.vertex_count());
    for (int v = 0; v < t.vertex_count(); ++v) u0(v) = std::cos(M_PI * (t.vertices[v][0] - x0) / (x1 - x0));
    CsvWriter lf({"epsilon", "t0", "difference"});
    for (auto& r : linear_flow_compare(d, c.eps, u0, c.t0, c.mesh)) lf.row(std::vector<double>{r.eps, c.t0, r.difference});
    out.add("linear_flow.csv", lf);
    bool mono = true;
    for (size_t i = 1; i < sd.size(); ++i) mono = mono && sd[i] <= sd[i - 1] + 1e-8;
    return {{"semidistance", sd}, {"monotone", mono}, {"samples", run.graph.points.size()}};
}

using Command = json (*)(const RunConfig&, Outputs&);

inline int run(int argc, char** argv, std::ostream& log = std::cerr) {
    CLI::App app{"Thin-domain spectra, inertial manifolds and attractor comparison"};
    app.require_subcommand(1);
    const std::vector<std::pair<std::string, Command>> commands{
        {"spectrum", cmd_spectrum}, {"squeeze", cmd_squeeze},   {"gap", cmd_gap},        {"cutoff", cmd_cutoff},
        {"manifold", cmd_manifold}, {"simulate", cmd_simulate}, {"compare", cmd_compare}};
    struct Flags {
        std::string config, domain, out, eps;
        double mesh = 0, L = 0, l = 0;
        unsigned seed = 0;
        int nu = -1;
    } fl;
    std::vector<CLI::App*> subs;
    std::vector<std::vector<CLI::Option*>> opts;
    for (auto& [name, fn] : commands) {
        auto* s = app.add_subcommand(name);
        std::vector<CLI::Option*> o;
        o.push_back(s->add_option("--config", fl.config, "JSON config file"));
        o.push_back(s->add_option("--domain", fl.domain, "domain JSON (rectangles or edges)"));
        o.push_back(s->add_option("--eps", fl.eps, "comma separated, strictly decreasing"));
        o.push_back(s->add_option("--mesh", fl.mesh, "mesh size h"));
        o.push_back(s->add_option("--seed", fl.seed, "RNG seed"));
        o.push_back(s->add_option("--out", fl.out, "output directory"));
        o.push_back(s->add_option("--nu", fl.nu, "split index, 0 for automatic"));
        o.push_back(s->add_option("--L", fl.L, "Lipschitz constant L"));
        o.push_back(s->add_option("--l", fl.l, "Lipschitz constant l"));
        subs.push_back(s);
        opts.push_back(o);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, log, log);
        return code == 0 ? 0 : 2;
    }
    size_t which = 0;
    while (!subs[which]->parsed()) ++which;
    const auto& o = opts[which];
    try {
        RunConfig c = fl.config.empty() ? RunConfig{} : from_json(read_json_file(fl.config));
        if (o[1]->count()) c.domain = fl.domain;
        if (o[2]->count()) {
            c.eps.clear();
            std::stringstream ss(fl.eps);
            std::string item;
            while (std::getline(ss, item, ',')) {
                try {
                    c.eps.push_back(std::stod(item));
                } catch (const std::exception&) {
                    fail(Errc::config, "bad eps entry \"" + item + "\"");
                }
            }
        }
        if (o[3]->count()) c.mesh = fl.mesh;
        if (o[4]->count()) c.seed = fl.seed;
        if (o[5]->count()) c.out = fl.out;
        if (o[6]->count()) c.nu = fl.nu;
        if (o[7]->count()) c.L = fl.L;
        if (o[8]->count()) c.l = fl.l;
        validate(c);
        Outputs out;
        json result = commands[which].second(c, out);
        json summary = {{"command", commands[which].first}, {"config", to_json(c)}, {"result", result}};
        out.add("summary.json", summary);
        out.commit(c.out);
        log << commands[which].first << ": wrote " << c.out << "/summary.json\n";
        return 0;
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace thinlab::cli

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "weight.hpp"

namespace thinlab {

struct Rect {
    double x_lo, x_hi, y_lo, y_hi;
};

struct RectUnionDomain {
    std::vector<Rect> rectangles;

    double x_min() const {
        double v = std::numeric_limits<double>::infinity();
        for (auto& r : rectangles) v = std::min(v, r.x_lo);
        return v;
    }
    double x_max() const {
        double v = -std::numeric_limits<double>::infinity();
        for (auto& r : rectangles) v = std::max(v, r.x_hi);
        return v;
    }

    // vertical section of the closed union at x as merged y-intervals
    std::vector<std::pair<double, double>> section(double x) const {
        std::vector<std::pair<double, double>> iv;
        for (auto& r : rectangles)
            if (r.x_lo <= x && x <= r.x_hi) iv.emplace_back(r.y_lo, r.y_hi);
        std::sort(iv.begin(), iv.end());
        std::vector<std::pair<double, double>> out;
        for (auto& p : iv) {
            if (!out.empty() && p.first <= out.back().second) out.back().second = std::max(out.back().second, p.second);
            else out.push_back(p);
        }
        return out;
    }

    double section_measure(double x) const {
        double s = 0.0;
        for (auto& p : section(x)) s += p.second - p.first;
        return s;
    }
};

namespace detail {

inline bool rects_adjacent(const Rect& a, const Rect& b) {
    double ox = std::min(a.x_hi, b.x_hi) - std::max(a.x_lo, b.x_lo);
    double oy = std::min(a.y_hi, b.y_hi) - std::max(a.y_lo, b.y_lo);
    return ox >= 0 && oy >= 0 && (ox > 0 || oy > 0);
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) { return parent[i] == i ? i : parent[i] = find(parent[i]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
    int components() {
        int c = 0;
        for (int i = 0; i < static_cast<int>(parent.size()); ++i) c += find(i) == i;
        return c;
    }
};

} // namespace detail

inline void validate(const RectUnionDomain& d) {
    require(!d.rectangles.empty(), Errc::invalid_argument, "domain has no rectangles");
    for (auto& r : d.rectangles)
        require(r.x_lo < r.x_hi && r.y_lo < r.y_hi, Errc::invalid_argument, "degenerate rectangle");
    int n = static_cast<int>(d.rectangles.size());
    detail::UnionFind uf(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (detail::rects_adjacent(d.rectangles[i], d.rectangles[j])) uf.unite(i, j);
    require(uf.components() == 1, Errc::disconnected_domain, "rectangle union has more than one component");
}

struct CCase {
    enum class Kind { unclassified, bounded, vanishing_left, vanishing_right };
    Kind kind = Kind::unclassified;
    double alpha = 0.0, beta = 0.0;
    std::optional<WeightFn> q; // majorant for the vanishing cases
};

struct EdgeSpec {
    int id = 0;
    double a = 0.0, b = 1.0;
    WeightFn weight = WeightFn::constant(0.0, 1.0, 1.0);
    CCase c_case;
    // vertical extent of the strip when the edge comes from rectangles
    double y_lo = std::numeric_limits<double>::quiet_NaN();
    double y_hi = std::numeric_limits<double>::quiet_NaN();

    double length() const { return b - a; }
};

struct JoinGroup {
    double c = 0.0;
    double beta = 0.0, gamma = 0.0;
    std::vector<int> sigma_plus;  // edges with b_k = c
    std::vector<int> sigma_minus; // edges with a_k = c
};

struct MetricGraph {
    std::vector<EdgeSpec> edges;
    std::vector<JoinGroup> joins;

    int edge_count() const { return static_cast<int>(edges.size()); }
};

inline void validate(const MetricGraph& g) {
    int r = g.edge_count();
    require(r > 0, Errc::invalid_argument, "graph has no edges");
    for (int k = 0; k < r; ++k) {
        require(g.edges[k].id == k, Errc::invalid_argument, "edge ids must be 0..r-1 in order");
        require(g.edges[k].a < g.edges[k].b, Errc::invalid_argument, "edge with a >= b");
    }
    std::vector<int> left_used(r, 0), right_used(r, 0);
    detail::UnionFind uf(r);
    for (auto& j : g.joins) {
        require(!j.sigma_plus.empty() || !j.sigma_minus.empty(), Errc::invalid_argument, "empty join");
        require(j.beta < j.gamma, Errc::non_nice_decomposition, "degenerate join span");
        int first = -1;
        for (int k : j.sigma_plus) {
            require(k >= 0 && k < r && g.edges[k].b == j.c, Errc::invalid_argument, "sigma+ edge does not end at c");
            require(right_used[k]++ == 0, Errc::invalid_argument, "edge endpoint in two joins");
            if (first < 0) first = k; else uf.unite(first, k);
        }
        for (int k : j.sigma_minus) {
            require(k >= 0 && k < r && g.edges[k].a == j.c, Errc::invalid_argument, "sigma- edge does not start at c");
            require(left_used[k]++ == 0, Errc::invalid_argument, "edge endpoint in two joins");
            if (first < 0) first = k; else uf.unite(first, k);
        }
    }
    require(uf.components() == 1, Errc::disconnected_domain, "graph incidence structure is not connected");
}

// Nice decomposition of a rectangle union by an x-sweep.
// Strips are merged across a breakpoint only when the section is unchanged and
// nothing else touches the breakpoint there; every other contact becomes a join.
inline MetricGraph build_from_rectangles(const RectUnionDomain& domain) {
    validate(domain);
    std::vector<double> xs;
    for (auto& r : domain.rectangles) { xs.push_back(r.x_lo); xs.push_back(r.x_hi); }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    int slabs = static_cast<int>(xs.size()) - 1;

    struct Piece { int slab; double lo, hi; std::vector<int> left, right; int next = -1, prev = -1; };
    std::vector<Piece> pieces;
    std::vector<std::vector<int>> by_slab(slabs);
    for (int s = 0; s < slabs; ++s) {
        std::vector<std::pair<double, double>> iv;
        for (auto& r : domain.rectangles)
            if (r.x_lo <= xs[s] && r.x_hi >= xs[s + 1]) iv.emplace_back(r.y_lo, r.y_hi);
        std::sort(iv.begin(), iv.end());
        std::vector<std::pair<double, double>> merged;
        for (auto& p : iv) {
            if (!merged.empty() && p.first <= merged.back().second)
                merged.back().second = std::max(merged.back().second, p.second);
            else merged.push_back(p);
        }
        for (auto& m : merged) {
            by_slab[s].push_back(static_cast<int>(pieces.size()));
            pieces.push_back({s, m.first, m.second, {}, {}});
        }
    }

    for (int s = 0; s + 1 < slabs; ++s)
        for (int i : by_slab[s])
            for (int j : by_slab[s + 1]) {
                double ov = std::min(pieces[i].hi, pieces[j].hi) - std::max(pieces[i].lo, pieces[j].lo);
                if (ov > 0) {
                    pieces[i].right.push_back(j);
                    pieces[j].left.push_back(i);
                } else if (ov == 0) {
                    fail(Errc::non_nice_decomposition,
                         "strips touch in a single point at x = " + std::to_string(xs[s + 1]));
                }
            }

    for (int i = 0; i < static_cast<int>(pieces.size()); ++i) {
        auto& p = pieces[i];
        if (p.right.size() != 1) continue;
        auto& q = pieces[p.right[0]];
        if (q.left.size() == 1 && q.lo == p.lo && q.hi == p.hi) {
            p.next = p.right[0];
            q.prev = i;
        }
    }

    MetricGraph g;
    std::vector<int> piece_edge(pieces.size(), -1);
    std::vector<std::pair<std::pair<double, double>, std::vector<int>>> chains;
    for (int i = 0; i < static_cast<int>(pieces.size()); ++i) {
        if (pieces[i].prev >= 0) continue;
        std::vector<int> chain;
        for (int k = i; k >= 0; k = pieces[k].next) chain.push_back(k);
        chains.push_back({{xs[pieces[i].slab], pieces[i].lo}, chain});
    }
    std::sort(chains.begin(), chains.end(), [](auto& u, auto& v) { return u.first < v.first; });
    for (auto& [key, chain] : chains) {
        EdgeSpec e;
        e.id = static_cast<int>(g.edges.size());
        e.a = xs[pieces[chain.front()].slab];
        e.b = xs[pieces[chain.back()].slab + 1];
        e.y_lo = pieces[chain.front()].lo;
        e.y_hi = pieces[chain.front()].hi;
        e.weight = WeightFn::constant(e.a, e.b, e.y_hi - e.y_lo);
        for (int k : chain) piece_edge[k] = e.id;
        g.edges.push_back(e);
    }

    // joins: connected components of the end segments at each breakpoint
    for (int s = 1; s < slabs; ++s) {
        double c = xs[s];
        struct Seg { double lo, hi; int edge; bool plus; };
        std::vector<Seg> segs;
        for (auto& e : g.edges) {
            if (e.b == c) segs.push_back({e.y_lo, e.y_hi, e.id, true});
            if (e.a == c) segs.push_back({e.y_lo, e.y_hi, e.id, false});
        }
        std::sort(segs.begin(), segs.end(), [](const Seg& u, const Seg& v) {
            return u.lo != v.lo ? u.lo < v.lo : u.edge < v.edge;
        });
        size_t i = 0;
        while (i < segs.size()) {
            JoinGroup j;
            j.c = c;
            j.beta = segs[i].lo;
            j.gamma = segs[i].hi;
            size_t k = i;
            while (k < segs.size() && segs[k].lo <= j.gamma) {
                j.gamma = std::max(j.gamma, segs[k].hi);
                (segs[k].plus ? j.sigma_plus : j.sigma_minus).push_back(segs[k].edge);
                ++k;
            }
            i = k;
            if (j.sigma_plus.empty() || j.sigma_minus.empty()) continue; // free end
            std::sort(j.sigma_plus.begin(), j.sigma_plus.end());
            std::sort(j.sigma_minus.begin(), j.sigma_minus.end());
            g.joins.push_back(j);
        }
    }
    validate(g);
    return g;
}

// Condition (C): bounded weights, or weights comparable to a concave
// nondecreasing majorant vanishing at one end with 1/q integrable.
inline EdgeSpec classify_condition_C(EdgeSpec edge, int grid = 10000) {
    const WeightFn& p = edge.weight;
    CCase cc;
    auto unclassifiable = [&](const std::string& why) {
        fail(Errc::unclassifiable, "edge " + std::to_string(edge.id) + ": " + why);
    };
    if (!p.inverse_integrable()) unclassifiable("1/p is not integrable");
    if (p.kind() == WeightFn::Kind::power) {
        double s = p.exponent();
        if (s >= 1.0) unclassifiable("power weight with exponent >= 1");
        auto side = p.side();
        WeightFn q = WeightFn::power(edge.a, edge.b, 1.0, s, side);
        double alpha = std::numeric_limits<double>::infinity(), beta = 0.0;
        double h = (edge.b - edge.a) / grid;
        for (int i = 1; i <= grid; ++i) {
            double x = side == WeightFn::Side::left ? edge.a + i * h : edge.b - i * h;
            double sgn = side == WeightFn::Side::left ? 1.0 : -1.0;
            if (sgn * q.d1(x) < 0) unclassifiable("majorant not monotone");
            if (q.d2(x) > 0) unclassifiable("majorant not concave");
            double r = p(x) / q(x);
            alpha = std::min(alpha, r);
            beta = std::max(beta, r);
        }
        double qend = q(side == WeightFn::Side::left ? edge.a : edge.b);
        if (qend != 0.0) unclassifiable("majorant does not vanish");
        cc.kind = side == WeightFn::Side::left ? CCase::Kind::vanishing_left : CCase::Kind::vanishing_right;
        cc.alpha = alpha;
        cc.beta = beta;
        cc.q = q;
    } else {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int i = 0; i <= grid; ++i) {
            double x = edge.a + (edge.b - edge.a) * i / grid;
            double v = p(x);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (p.kind() == WeightFn::Kind::piecewise_constant || p.kind() == WeightFn::Kind::sampled) {
            lo = p.min_value();
            hi = p.max_value();
        }
        if (!(lo > 0)) unclassifiable("weight not bounded away from zero");
        cc.kind = CCase::Kind::bounded;
        cc.alpha = lo;
        cc.beta = hi;
    }
    edge.c_case = cc;
    return edge;
}

inline MetricGraph classify_all(MetricGraph g) {
    for (auto& e : g.edges) e = classify_condition_C(e);
    return g;
}

// (int_x^x' 1/p)^{1/2}
inline double continuity_modulus(const EdgeSpec& edge, double x, double xp) {
    require(edge.a <= x && x < xp && xp <= edge.b, Errc::invalid_argument, "continuity_modulus needs a <= x < x' <= b");
    return std::sqrt(edge.weight.inverse_integral(x, xp));
}

// single-edge graph with an arbitrary weight
inline MetricGraph single_edge_graph(const WeightFn& w) {
    MetricGraph g;
    EdgeSpec e;
    e.id = 0;
    e.a = w.a();
    e.b = w.b();
    e.weight = w;
    g.edges.push_back(e);
    return g;
}

} // namespace thinlab

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graph_domain.hpp"
#include "nonlinearity.hpp"

namespace thinlab {

using json = nlohmann::json;

// shortest round-trip decimal so repeated runs write identical bytes
inline std::string fmt_num(double v) {
    char buf[40];
    for (int p = 15; p <= 17; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

// comma separated, header row, LF line endings
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    CsvWriter& row(const std::vector<std::string>& cells) {
        require(cells.size() == header_.size(), Errc::invalid_argument, "csv row width differs from header");
        rows_.push_back(cells);
        return *this;
    }
    CsvWriter& row(const std::vector<double>& cells) {
        std::vector<std::string> s;
        for (double v : cells) s.push_back(fmt_num(v));
        return row(s);
    }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& c) {
            for (size_t i = 0; i < c.size(); ++i) out += (i ? "," : "") + c[i];
            out += '\n';
        };
        line(header_);
        for (auto& r : rows_) line(r);
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        require(bool(f), Errc::config, "cannot write " + path);
        f << str();
    }

    size_t size() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline json read_json_file(const std::string& path) {
    std::ifstream f(path);
    require(bool(f), Errc::config, "cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        fail(Errc::config, path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream f(path, std::ios::binary);
    require(bool(f), Errc::config, "cannot write " + path);
    f << j.dump(2) << '\n';
}

inline RectUnionDomain domain_from_json(const json& j) {
    require(j.is_object() && j.contains("rectangles") && j["rectangles"].is_array(), Errc::config,
            "domain needs a \"rectangles\" array");
    RectUnionDomain d;
    for (auto& r : j["rectangles"]) {
        require(r.is_array() && r.size() == 4, Errc::config, "each rectangle is [x_lo, x_hi, y_lo, y_hi]");
        for (auto& v : r) require(v.is_number(), Errc::config, "rectangle entries must be numbers");
        d.rectangles.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()});
    }
    validate(d);
    return d;
}

inline json domain_to_json(const RectUnionDomain& d) {
    json r = json::array();
    for (auto& x : d.rectangles) r.push_back({x.x_lo, x.x_hi, x.y_lo, x.y_hi});
    return {{"rectangles", r}};
}

inline json weight_to_json(const WeightFn& w) {
    switch (w.kind()) {
    case WeightFn::Kind::piecewise_constant:
        return {{"kind", "piecewise_constant"}, {"breaks", w.breaks()}, {"values", w.values()}};
    case WeightFn::Kind::sampled:
        return {{"kind", "sampled"}, {"grid", w.breaks()}, {"values", w.values()}};
    case WeightFn::Kind::power:
        return {{"kind", "power"},
                {"a", w.a()},
                {"b", w.b()},
                {"coef", w.coefficient()},
                {"s", w.exponent()},
                {"side", w.side() == WeightFn::Side::left ? "left" : "right"}};
    case WeightFn::Kind::affine:
        return {{"kind", "affine"}, {"a", w.a()}, {"b", w.b()}, {"c0", w.coefficient()}, {"c1", w.slope()}};
    }
    return {};
}

inline WeightFn weight_from_json(const json& j, double a, double b) {
    if (j.is_number()) return WeightFn::constant(a, b, j.get<double>());
    require(j.is_object() && j.contains("kind"), Errc::config, "weight needs a \"kind\"");
    std::string k = j["kind"];
    try {
        if (k == "constant") return WeightFn::constant(a, b, j.at("value").get<double>());
        if (k == "piecewise_constant")
            return WeightFn::piecewise_constant(j.at("breaks").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
        if (k == "sampled")
            return WeightFn::sampled(j.at("grid").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
        if (k == "power")
            return WeightFn::power(a, b, j.at("coef").get<double>(), j.at("s").get<double>(),
                                   j.value("side", std::string("left")) == "right" ? WeightFn::Side::right : WeightFn::Side::left);
        if (k == "affine") return WeightFn::affine(a, b, j.at("c0").get<double>(), j.at("c1").get<double>());
    } catch (const json::exception& e) {
        fail(Errc::config, std::string("weight: ") + e.what());
    }
    fail(Errc::config, "unknown weight kind " + k);
}

inline json graph_to_json(const MetricGraph& g) {
    json edges = json::array(), joins = json::array();
    for (auto& e : g.edges) {
        json je = {{"id", e.id}, {"a", e.a}, {"b", e.b}, {"weight", weight_to_json(e.weight)}};
        if (!std::isnan(e.y_lo)) {
            je["y_lo"] = e.y_lo;
            je["y_hi"] = e.y_hi;
        }
        edges.push_back(je);
    }
    for (auto& j : g.joins)
        joins.push_back({{"c", j.c}, {"beta", j.beta}, {"gamma", j.gamma}, {"sigma_plus", j.sigma_plus}, {"sigma_minus", j.sigma_minus}});
    return {{"edges", edges}, {"joins", joins}};
}

inline MetricGraph graph_from_json(const json& j) {
    require(j.is_object() && j.contains("edges") && j["edges"].is_array(), Errc::config, "graph needs an \"edges\" array");
    MetricGraph g;
    try {
        for (auto& je : j["edges"]) {
            EdgeSpec e;
            e.id = static_cast<int>(g.edges.size());
            e.a = je.at("a").get<double>();
            e.b = je.at("b").get<double>();
            e.weight = je.contains("weight") ? weight_from_json(je["weight"], e.a, e.b) : WeightFn::constant(e.a, e.b, 1.0);
            if (je.contains("y_lo")) {
                e.y_lo = je["y_lo"].get<double>();
                e.y_hi = je["y_hi"].get<double>();
            }
            g.edges.push_back(e);
        }
        if (j.contains("joins"))
            for (auto& jj : j["joins"]) {
                JoinGroup grp;
                grp.c = jj.at("c").get<double>();
                grp.beta = jj.value("beta", 0.0);
                grp.gamma = jj.value("gamma", 1.0);
                grp.sigma_plus = jj.value("sigma_plus", std::vector<int>{});
                grp.sigma_minus = jj.value("sigma_minus", std::vector<int>{});
                g.joins.push_back(grp);
            }
    } catch (const json::exception& e) {
        fail(Errc::config, std::string("graph: ") + e.what());
    }
    validate(g);
    return g;
}

// {"name": "cubic-bistable", "kappa": k} | {"name": "linear", "a": a} |
// {"name": "polynomial", "coefficients": [a0, a1, ...]}
inline ScalarNonlinearity nonlinearity_from_json(const json& j) {
    require(j.is_object() && j.contains("name"), Errc::config, "nonlinearity needs a \"name\"");
    std::string n = j["name"];
    try {
        if (n == "cubic-bistable") return ScalarNonlinearity::cubic_bistable(j.value("kappa", 1.0));
        if (n == "linear") return ScalarNonlinearity::linear(j.at("a").get<double>());
        if (n == "polynomial") return ScalarNonlinearity::polynomial(j.at("coefficients").get<std::vector<double>>());
    } catch (const json::exception& e) {
        fail(Errc::config, std::string("nonlinearity: ") + e.what());
    }
    fail(Errc::config, "unknown nonlinearity " + n);
}

inline json nonlinearity_to_json(const ScalarNonlinearity& f) {
    return {{"name", f.name()}, {"coefficients", f.coefficients()}};
}

} // namespace thinlab

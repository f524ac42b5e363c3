#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace thinlab {

// Positive coefficient p on an interval (a, b).
// Closed forms carry exact derivatives and exact integrals of 1/p.
class WeightFn {
public:
    enum class Kind { piecewise_constant, power, affine, sampled };
    enum class Side { left, right };

    static WeightFn constant(double a, double b, double c) {
        return piecewise_constant({a, b}, {c});
    }

    // breaks has values.size() + 1 entries
    static WeightFn piecewise_constant(std::vector<double> breaks, std::vector<double> values) {
        require(breaks.size() == values.size() + 1 && !values.empty(), Errc::invalid_argument,
                "piecewise weight needs one more breakpoint than values");
        for (size_t i = 0; i + 1 < breaks.size(); ++i)
            require(breaks[i] < breaks[i + 1], Errc::invalid_argument, "breakpoints must increase");
        WeightFn w;
        w.kind_ = Kind::piecewise_constant;
        w.a_ = breaks.front();
        w.b_ = breaks.back();
        w.grid_ = std::move(breaks);
        w.vals_ = std::move(values);
        return w;
    }

    // coef * (x - a)^s  (side left)  or  coef * (b - x)^s  (side right)
    static WeightFn power(double a, double b, double coef, double s, Side side = Side::left) {
        require(a < b && coef > 0 && s > 0, Errc::invalid_argument, "bad power weight");
        WeightFn w;
        w.kind_ = Kind::power;
        w.a_ = a;
        w.b_ = b;
        w.c0_ = coef;
        w.s_ = s;
        w.side_ = side;
        return w;
    }

    // c0 + c1 x
    static WeightFn affine(double a, double b, double c0, double c1) {
        require(a < b, Errc::invalid_argument, "bad affine weight");
        WeightFn w;
        w.kind_ = Kind::affine;
        w.a_ = a;
        w.b_ = b;
        w.c0_ = c0;
        w.c1_ = c1;
        return w;
    }

    // piecewise linear interpolation of samples
    static WeightFn sampled(std::vector<double> grid, std::vector<double> values) {
        require(grid.size() == values.size() && grid.size() >= 2, Errc::invalid_argument,
                "sampled weight needs matching grid and values");
        for (size_t i = 0; i + 1 < grid.size(); ++i)
            require(grid[i] < grid[i + 1], Errc::invalid_argument, "grid must increase");
        WeightFn w;
        w.kind_ = Kind::sampled;
        w.a_ = grid.front();
        w.b_ = grid.back();
        w.grid_ = std::move(grid);
        w.vals_ = std::move(values);
        return w;
    }

    Kind kind() const { return kind_; }
    double a() const { return a_; }
    double b() const { return b_; }
    Side side() const { return side_; }
    double exponent() const { return s_; }
    double coefficient() const { return c0_; }
    double slope() const { return c1_; }
    const std::vector<double>& breaks() const { return grid_; }
    const std::vector<double>& values() const { return vals_; }

    bool is_closed_form() const { return kind_ == Kind::power || kind_ == Kind::affine; }

    double operator()(double x) const {
        switch (kind_) {
        case Kind::piecewise_constant: {
            auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
            long i = static_cast<long>(it - grid_.begin()) - 1;
            i = std::clamp<long>(i, 0, static_cast<long>(vals_.size()) - 1);
            return vals_[i];
        }
        case Kind::power: {
            double d = side_ == Side::left ? x - a_ : b_ - x;
            return c0_ * std::pow(std::max(d, 0.0), s_);
        }
        case Kind::affine:
            return c0_ + c1_ * x;
        case Kind::sampled: {
            auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
            long i = static_cast<long>(it - grid_.begin()) - 1;
            i = std::clamp<long>(i, 0, static_cast<long>(grid_.size()) - 2);
            double t = (x - grid_[i]) / (grid_[i + 1] - grid_[i]);
            return (1 - t) * vals_[i] + t * vals_[i + 1];
        }
        }
        return 0.0;
    }

    // first and second derivatives; zero inside constant pieces
    double d1(double x) const {
        switch (kind_) {
        case Kind::power: {
            double d = side_ == Side::left ? x - a_ : b_ - x;
            double v = c0_ * s_ * std::pow(d, s_ - 1.0);
            return side_ == Side::left ? v : -v;
        }
        case Kind::affine: return c1_;
        case Kind::sampled: {
            auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
            long i = static_cast<long>(it - grid_.begin()) - 1;
            i = std::clamp<long>(i, 0, static_cast<long>(grid_.size()) - 2);
            return (vals_[i + 1] - vals_[i]) / (grid_[i + 1] - grid_[i]);
        }
        default: return 0.0;
        }
    }

    double d2(double x) const {
        if (kind_ != Kind::power) return 0.0;
        double d = side_ == Side::left ? x - a_ : b_ - x;
        return c0_ * s_ * (s_ - 1.0) * std::pow(d, s_ - 2.0);
    }

    double min_value(int samples = 10000) const {
        double m = std::numeric_limits<double>::infinity();
        if (kind_ == Kind::piecewise_constant || kind_ == Kind::sampled) {
            for (double v : vals_) m = std::min(m, v);
            return m;
        }
        for (int i = 0; i <= samples; ++i) m = std::min(m, (*this)(a_ + (b_ - a_) * i / samples));
        return m;
    }

    double max_value(int samples = 10000) const {
        double m = -std::numeric_limits<double>::infinity();
        if (kind_ == Kind::piecewise_constant || kind_ == Kind::sampled) {
            for (double v : vals_) m = std::max(m, v);
            return m;
        }
        for (int i = 0; i <= samples; ++i) m = std::max(m, (*this)(a_ + (b_ - a_) * i / samples));
        return m;
    }

    // exact integral of 1/p over [x0, x1]; throws QuadratureFailure when divergent
    double inverse_integral(double x0, double x1) const {
        require(a_ <= x0 && x0 <= x1 && x1 <= b_ + 1e-14, Errc::invalid_argument,
                "inverse_integral limits outside the weight interval");
        if (x0 == x1) return 0.0;
        switch (kind_) {
        case Kind::piecewise_constant: {
            double s = 0.0;
            for (size_t i = 0; i < vals_.size(); ++i) {
                double lo = std::max(x0, grid_[i]), hi = std::min(x1, grid_[i + 1]);
                if (hi > lo) {
                    require(vals_[i] > 0, Errc::quadrature_failure, "1/p not integrable");
                    s += (hi - lo) / vals_[i];
                }
            }
            return s;
        }
        case Kind::power: {
            double d0 = side_ == Side::left ? x0 - a_ : b_ - x1;
            double d1v = side_ == Side::left ? x1 - a_ : b_ - x0;
            if (d0 <= 0 && s_ >= 1.0) fail(Errc::quadrature_failure, "1/p not integrable");
            if (s_ == 1.0) return (std::log(d1v) - std::log(d0)) / c0_;
            return (std::pow(d1v, 1 - s_) - std::pow(std::max(d0, 0.0), 1 - s_)) / ((1 - s_) * c0_);
        }
        case Kind::affine: {
            double p0 = (*this)(x0), p1 = (*this)(x1);
            if (p0 <= 0 || p1 <= 0) fail(Errc::quadrature_failure, "1/p not integrable");
            if (c1_ == 0.0) return (x1 - x0) / c0_;
            return std::log(p1 / p0) / c1_;
        }
        case Kind::sampled: {
            double s = 0.0;
            for (size_t i = 0; i + 1 < grid_.size(); ++i) {
                double lo = std::max(x0, grid_[i]), hi = std::min(x1, grid_[i + 1]);
                if (hi <= lo) continue;
                double pl = (*this)(lo), ph = (*this)(hi);
                if (pl <= 0 || ph <= 0) fail(Errc::quadrature_failure, "1/p not integrable");
                if (std::abs(ph - pl) < 1e-14 * std::max(pl, ph)) s += (hi - lo) / pl;
                else s += (hi - lo) * std::log(ph / pl) / (ph - pl);
            }
            return s;
        }
        }
        return 0.0;
    }

    bool inverse_integrable() const {
        try {
            double v = inverse_integral(a_, b_);
            return std::isfinite(v);
        } catch (const Error&) {
            return false;
        }
    }

    WeightFn scaled(double c) const {
        WeightFn w = *this;
        if (kind_ == Kind::power) w.c0_ *= c;
        else if (kind_ == Kind::affine) { w.c0_ *= c; w.c1_ *= c; }
        else for (double& v : w.vals_) v *= c;
        return w;
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind_) {
        case Kind::piecewise_constant:
            if (vals_.size() == 1) os << "constant(" << vals_[0] << ")";
            else os << "piecewise_constant";
            break;
        case Kind::power:
            os << "power(" << c0_ << "," << s_ << "," << (side_ == Side::left ? "left" : "right") << ")";
            break;
        case Kind::affine: os << "affine(" << c0_ << "," << c1_ << ")"; break;
        case Kind::sampled: os << "sampled"; break;
        }
        return os.str();
    }

private:
    Kind kind_ = Kind::piecewise_constant;
    double a_ = 0, b_ = 1;
    double c0_ = 1, c1_ = 0, s_ = 1;
    Side side_ = Side::left;
    std::vector<double> grid_, vals_;
};

} // namespace thinlab

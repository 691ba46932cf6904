#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"
#include "diffeo/reduce.hpp"

namespace diffeo {

double flow_displacement(const VectorField1D& X, double t, double x) {
    // Lie series t X + t^2/2 X'X + ..., exact in relative terms for slow fields.
    const Jet j = X.jet(x, 3);
    const double v = j[0], d1 = j[1], d2 = j[2], d3 = j[3];
    const double g[4] = {v, d1 * v, (d2 * v + d1 * d1) * v, v * (d3 * v * v + 4 * v * d1 * d2 + d1 * d1 * d1)};
    double term = t, sum = 0;
    for (int k = 0; k < 4; ++k) {
        sum += term * g[k];
        term *= t / (k + 2);
    }
    // Truncation is below 1e-16 relative when every rate scale is below 1e-4.
    const double rate = std::max({std::abs(t * d1), std::sqrt(std::abs(t * t * d2 * v)),
                                  std::cbrt(std::abs(t * t * t * d3 * v * v))});
    if (rate < 1e-4) return sum;
    return flow(X, t, x, 0).value() - x;
}

double cutoff_norm(int k) {
    check_order(k);
    static const std::array<double, kMaxOrder + 1> table = [] {
        std::array<double, kMaxOrder + 1> m{};
        const FieldExpr chi = fx::step(1.0, 0.5);
        for (int i = 0; i <= 4000; ++i) {
            Jet c = chi->eval(0.5 + 0.5 * i / 4000, kMaxOrder);
            for (int o = 0; o <= kMaxOrder; ++o) m[o] = std::max(m[o], std::abs(c[o]));
        }
        for (int o = 1; o <= kMaxOrder; ++o) m[o] = std::max(m[o], m[o - 1]);
        return m;
    }();
    return table[k];
}

namespace {

double dir(Side s) { return s == Side::left ? 1.0 : -1.0; }
double endpoint(Side s) { return s == Side::left ? 0.0 : 1.0; }

double norm_on(const VectorField1D& Y, int r, const std::vector<double>& nodes) {
    double m = 0;
    for (double x : nodes) {
        Jet j = Y.jet(x, r);
        for (int k = 0; k <= r; ++k) m = std::max(m, std::abs(j[k]));
    }
    return m;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i <= n; ++i) v.push_back(a + (b - a) * i / n);
    return v;
}

void check_iti_endpoint(const Diffeo1D& f, Side side, int r) {
    const double e = endpoint(side);
    Jet j = f.jet(e, r);
    double defect = std::abs(j[0] - e);
    if (r >= 1) defect = std::max(defect, std::abs(j[1] - 1));
    for (int k = 2; k <= r; ++k) defect = std::max(defect, std::abs(j[k]));
    if (defect > 1e-9) throw config_error("f is not ITI at " + std::to_string(e));
}

}  // namespace

RegularityPoint regularity_point_search(const VectorField1D& X, const Diffeo1D& f, int r, double delta,
                                        double x_max, const RegularityOptions& opt, const CandidateTest& extra) {
    check_order(r);
    if (!(delta > 0 && delta < 1)) throw config_error("regularity_point_search: delta must lie in (0,1)");
    if (!(opt.ratio > 0 && opt.ratio < 1)) throw config_error("regularity_point_search: ratio must lie in (0,1)");
    check_iti_endpoint(f, opt.side, r);
    const double e = endpoint(opt.side), s = dir(opt.side);
    RegularityPoint best;
    best.norm_margin = best.value_margin = -std::numeric_limits<double>::infinity();
    int n = 0;
    for (double dist = x_max; dist >= opt.floor; dist *= opt.ratio) {
        ++n;
        const double x0 = e + s * dist;
        const double xv = X(x0);
        if (xv == 0) break;
        const double d = std::max(flow_displacement(X, 1, x0), flow_displacement(X, -1, x0));
        if (!(d > 0)) continue;
        const double p2 = flow_displacement(X, 2, x0), m2 = flow_displacement(X, -2, x0);
        const double lo = x0 + std::min(p2, m2), hi = x0 + std::max(p2, m2);
        const double norm = norm_on(X, r, linspace(lo, hi, 4));
        RegularityPoint c{x0, d, norm, (1 - delta) * std::log(d) - std::log(norm),
                          std::log(std::abs(xv)) - std::log(0.5 * d), n};
        if (std::min(c.norm_margin, c.value_margin) > std::min(best.norm_margin, best.value_margin)) best = c;
        const bool regular = c.norm_margin >= 0 && c.value_margin >= 0;
        if ((regular || !opt.require_regularity) && (!extra || extra(x0, d))) return c;
    }
    throw numeric_error("regularity_point_search: no candidate above " + std::to_string(opt.floor) +
                        " (best margins " + std::to_string(best.norm_margin) + ", " +
                        std::to_string(best.value_margin) + " at x0 = " + std::to_string(best.x0) + ")");
}

namespace {

struct Built {
    VectorField1D Y;
    std::vector<double> a;
    double property4 = 0, property5 = 0;
};

// Y = X up to x0, then a0 + chi(|x - x0|/b) * sum_{i=1}^r a_i/i! (x - x0)^i.
Built build_interpolant(const VectorField1D& X, double x0, double b, double W, int r, Side side) {
    const double s = dir(side);
    Built out;
    Jet j = X.jet(x0, r);
    std::vector<double> c(r + 1, 0.0);
    double fact = 1;
    for (int i = 0; i <= r; ++i) {
        if (i > 0) fact *= i;
        out.a.push_back(j[i]);
        if (i > 0) c[i] = j[i] / fact;
    }
    FieldExpr tail = fx::constant(j[0]);
    if (x0 + s * 0.5 * b != x0) tail = tail + fx::step(x0 + s * b, x0 + s * 0.5 * b) * fx::polynomial(c, x0);
    std::vector<ZeroSpec> zeros;
    for (const auto& z : X.zeros()) {
        if (side == Side::left ? z.hi <= x0 : z.lo >= x0) zeros.push_back(z);
    }
    FieldExpr e = side == Side::left ? fx::piecewise({x0}, {X.expr(), tail}) : fx::piecewise({x0}, {tail, X.expr()});
    out.Y = VectorField1D(X.domain(), e, zeros);

    // Property 4 on [f^{-+1}(x0), x0 + W] (mirrored on the right side), property 5 on [x0, x0 + W].
    const double back = std::min(flow_displacement(X, 1, x0), flow_displacement(X, -1, x0));
    const double fwd = std::max(flow_displacement(X, 1, x0), flow_displacement(X, -1, x0));
    const double inner = x0 + (side == Side::left ? back : fwd);
    std::vector<double> nodes = linspace(inner, x0, 8);
    const auto near = linspace(x0, x0 + s * std::min(b, W), 200);
    const auto far = linspace(x0, x0 + s * W, 200);
    nodes.insert(nodes.end(), near.begin(), near.end());
    nodes.insert(nodes.end(), far.begin(), far.end());
    out.property4 = norm_on(out.Y, r, nodes);
    double m = std::numeric_limits<double>::infinity();
    for (double x : near) m = std::min(m, out.Y(x) * (j[0] > 0 ? 1 : -1));
    for (double x : far) m = std::min(m, out.Y(x) * (j[0] > 0 ? 1 : -1));
    out.property5 = m;
    return out;
}

}  // namespace

ItiInterpolation interpolate_ITI(const VectorField1D& X, const Diffeo1D& f, double eta, int r,
                                 const ItiOptions& opt) {
    check_order(r);
    if (r < 1) throw config_error("interpolate_ITI: r must be at least 1");
    if (!(eta > 0)) throw config_error("interpolate_ITI: eta must be positive");
    const double delta = opt.delta > 0 ? opt.delta : 1.0 / (2 * r + 2);
    if (!(delta < 1.0 / (2 * r + 1))) throw config_error("interpolate_ITI: delta must be below 1/(2r+1)");
    const double Mr = cutoff_norm(r);
    const bool strict = opt.rule == SmallnessRule::inequalities;
    const double W = strict ? eta : opt.window;
    if (opt.x_max + W >= 1) throw config_error("interpolate_ITI: scan start leaves no room for the window");

    CandidateTest test;
    if (strict) {
        test = [&](double, double d) {
            const double c1 = std::pow(d, delta);
            const double c2 = std::pow(d, 1 - delta) + r * std::pow(2.0, r) * Mr * std::pow(d, 1 - (2 * r + 1) * delta);
            const double c3 = std::pow(d, 1 - delta) * std::expm1(std::pow(d, 2 * delta));
            return c1 < eta && c2 < eta && 0.5 * d > c3;
        };
    } else {
        test = [&](double x0, double) {
            Built b = build_interpolant(X, x0, opt.window, W, r, opt.side);
            return b.property4 <= eta && b.property5 > 0;
        };
    }
    RegularityOptions ro;
    ro.side = opt.side;
    ro.require_regularity = strict;
    ItiInterpolation out;
    out.point = regularity_point_search(X, f, r, delta, opt.x_max, ro, test);
    out.x0 = out.point.x0;
    out.delta = delta;
    out.displacement = out.point.displacement;
    out.b = strict ? std::pow(out.displacement, 2 * delta) : opt.window;
    Built b = build_interpolant(X, out.x0, out.b, W, r, opt.side);
    out.Y = b.Y;
    out.a = b.a;
    out.property4 = b.property4;
    out.property5 = b.property5;
    if (!(out.property5 > 0)) {
        throw invariant_error("interpolate_ITI: Y vanishes next to x0; the smallness conditions were not met");
    }
    if (out.property4 > eta) {
        throw invariant_error("interpolate_ITI: ||Y||_r = " + std::to_string(out.property4) + " exceeds eta");
    }
    return out;
}

VectorField1D borel_smooth(const VectorField1D& Y, double x0, double alpha, int r, Side side) {
    check_order(r);
    if (!(alpha > 0)) throw config_error("borel_smooth: alpha must be positive");
    const double s = dir(side);
    const double lo = std::nextafter(x0, -INFINITY), hi = std::nextafter(x0, INFINITY);
    const Jet L = Y.jet(lo, kMaxOrder), R = Y.jet(hi, kMaxOrder);
    const double Mr = cutoff_norm(r);
    std::vector<FieldExpr> terms;
    double fact = 1;
    for (int i = 1; i <= kMaxOrder; ++i) {
        fact *= i;
        if (i <= r) continue;
        // Jump to remove on the modified side, as a coefficient of (x - x0)^i.
        const double a = side == Side::left ? L[i] - R[i] : R[i] - L[i];
        if (a == 0) continue;
        const double b = 0.5 * std::min(alpha / (std::abs(a) * std::pow(2.0, r) * Mr), alpha);
        if (x0 + s * 0.5 * b == x0) continue;
        std::vector<double> c(i + 1, 0.0);
        c[i] = a / fact;
        terms.push_back(fx::step(x0 + s * b, x0 + s * 0.5 * b) * fx::polynomial(c, x0));
    }
    if (terms.empty()) return Y;
    FieldExpr z = Y.expr() + fx::sum(terms);
    FieldExpr e = side == Side::left ? fx::piecewise({x0}, {Y.expr(), z}) : fx::piecewise({x0}, {z, Y.expr()});
    return VectorField1D(Y.domain(), e, Y.zeros(), Y.smoothness());
}

}  // namespace diffeo

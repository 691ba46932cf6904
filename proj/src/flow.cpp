#include "diffeo/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffeo/errors.hpp"
#include "diffeo/numerics.hpp"

namespace diffeo {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

using State = std::array<double, kMaxOrder + 1>;

struct Rhs {
    const VectorField1D& X;
    double x0;
    int r;

    State operator()(const State& y) const {
        Jet J(x0, r);
        for (int k = 0; k <= r; ++k) J[k] = y[k];
        // Trial stages may overshoot an interval end; the field is only defined inside.
        double at = y[0];
        if (!X.domain().is_circle()) at = std::clamp(at, X.domain().a, X.domain().b);
        Jet v = jet_apply(X.jet(at, r).coeffs(), J);
        State out{};
        for (int k = 0; k <= r; ++k) out[k] = v[k];
        return out;
    }
};

State axpy(const State& y, double h, std::initializer_list<std::pair<double, const State*>> terms, int r) {
    State out = y;
    for (const auto& [c, k] : terms) {
        for (int i = 0; i <= r; ++i) out[i] += h * c * (*k)[i];
    }
    return out;
}

}  // namespace

Jet flow(const VectorField1D& X, double t, double x, int r, const FlowOptions& opt) {
    check_order(r);
    const Domain& dom = X.domain();
    if (!dom.contains(x)) throw numeric_error("flow: start point " + std::to_string(x) + " outside domain");
    State y{};
    y[0] = x;
    if (r >= 1) y[1] = 1.0;
    if (t == 0.0) {
        Jet J(x, r);
        for (int k = 0; k <= r; ++k) J[k] = y[k];
        return J;
    }
    Rhs f{X, x, r};
    const double dir = t > 0 ? 1.0 : -1.0;
    const double T = std::abs(t);
    double s = 0.0;
    State k1 = f(y);
    double speed = std::abs(k1[0]);
    double h = std::min(T, speed > 0 ? 0.05 / speed : T);
    h = std::max(h, 1e-6 * T);
    long steps = 0;
    while (s < T) {
        if (++steps > opt.max_steps) throw numeric_error("flow: step budget exhausted");
        bool last = false;
        if (s + h >= T) {
            h = T - s;
            last = true;
        }
        if (!last && h < opt.min_step * std::max(1.0, T)) throw numeric_error("flow: step-size underflow");
        const double hs = dir * h;
        State k2 = f(axpy(y, hs, {{a21, &k1}}, r));
        State k3 = f(axpy(y, hs, {{a31, &k1}, {a32, &k2}}, r));
        State k4 = f(axpy(y, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, r));
        State k5 = f(axpy(y, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, r));
        State k6 = f(axpy(y, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, r));
        State y5 = axpy(y, hs, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, r);
        State k7 = f(y5);
        double err = 0;
        for (int i = 0; i <= r; ++i) {
            const double e = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = opt.tol * (1.0 + std::max(std::abs(y[i]), std::abs(y5[i])));
            err = std::max(err, std::abs(e) / sc);
        }
        if (!std::isfinite(err)) {
            h *= 0.25;
            continue;
        }
        if (err <= 1.0) {
            s = last ? T : s + h;
            y = y5;
            k1 = k7;
            if (!dom.contains(y[0], 1e-10)) {
                throw numeric_error("flow: trajectory left the domain at " + std::to_string(y[0]));
            }
        }
        const double fac = err == 0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= err <= 1.0 ? fac : std::min(fac, 1.0);
    }
    if (!dom.is_circle()) y[0] = std::clamp(y[0], dom.a, dom.b);
    Jet J(x, r);
    for (int k = 0; k <= r; ++k) J[k] = y[k];
    return J;
}

double flow_point(const VectorField1D& X, double t, double x) { return flow(X, t, x, 0).value(); }

double transit_time(const VectorField1D& X, double p, double q) {
    if (p == q) return 0.0;
    const double lo = std::min(p, q), hi = std::max(p, q);
    // Zero detection: declared zeros first, then a sign scan.
    for (const auto& z : X.zeros()) {
        if (z.hi >= lo && z.lo <= hi) {
            throw numeric_error("transit_time: field vanishes on [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
        }
    }
    const int scan = 64;
    const double v0 = X(lo);
    for (int i = 0; i <= scan; ++i) {
        const double v = X(lo + (hi - lo) * i / scan);
        if (std::abs(v) < 1e-300 || (v > 0) != (v0 > 0)) {
            throw numeric_error("transit_time: field vanishes on [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
        }
    }
    std::vector<double> cuts = {lo};
    for (double b : X.breakpoints()) {
        if (X.domain().is_circle()) {
            for (double k = std::floor(lo); k <= std::floor(hi); k += 1) {
                if (b + k > lo && b + k < hi) cuts.push_back(b + k);
            }
        } else if (b > lo && b < hi) {
            cuts.push_back(b);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(hi);
    double total = 0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
        total += integrate([&](double x) { return 1.0 / X(x); }, cuts[i], cuts[i + 1], 1e-13);
    }
    return p < q ? total : -total;
}

Jet orbit_jet(const VectorField1D& X, double x, double base, int r) {
    Jet J(base, r);
    J[0] = x;
    const Jet Xj = X.jet(x, r);
    for (int k = 1; k <= r; ++k) {
        Jet v = jet_apply(Xj.coeffs(), J);
        J[k] = v[k - 1];
    }
    return J;
}

}  // namespace diffeo

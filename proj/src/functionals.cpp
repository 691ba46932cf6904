#include "diffeo/functionals.hpp"

#include <algorithm>
#include <cmath>

#include "diffeo/errors.hpp"
#include "diffeo/numerics.hpp"

namespace diffeo {

namespace {

std::pair<double, double> span_of(const Domain& d) {
    if (d.is_circle()) return {0.0, 1.0};
    return {d.a, d.b};
}

}  // namespace

double var_log_derivative(const Diffeo1D& f) {
    const auto [a, b] = span_of(f.domain());
    auto u = [&](double x) {
        Jet j = f.jet(x, 2);
        return j[2] / j[1];
    };
    const int scan = 256;
    std::vector<double> xs;
    for (int i = 0; i <= scan; ++i) xs.push_back(a + (b - a) * i / scan);
    for (double v : f.breakpoints()) {
        if (v > a && v < b) xs.push_back(v);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::vector<double> cuts = {a};
    double prev = u(xs[0]);
    for (size_t i = 1; i < xs.size(); ++i) {
        const double cur = u(xs[i]);
        if ((prev < 0 && cur > 0) || (prev > 0 && cur < 0)) cuts.push_back(bisect_root(u, xs[i - 1], xs[i], 1e-15));
        if (cur == 0) cuts.push_back(xs[i]);
        prev = cur;
    }
    for (double v : f.breakpoints()) {
        if (v > a && v < b) cuts.push_back(v);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    QuadOptions opt;
    opt.abs_tol = 1e-15;
    opt.rel_tol = 1e-13;
    double total = 0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
        total += integrate_gk([&](double x) { return std::abs(u(x)); }, cuts[i], cuts[i + 1], opt).value;
    }
    return total;
}

AsymptoticVariation asymptotic_variation(const Diffeo1D& f, int n_max) {
    if (n_max < 1) throw config_error("asymptotic_variation: n_max must be >= 1");
    AsymptoticVariation out;
    for (int n = 1; n <= n_max; ++n) out.a.push_back(var_log_derivative(dm::power(f, n)) / n);
    out.estimate = *std::min_element(out.a.begin(), out.a.end());
    if (n_max >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int n = 1; n <= n_max; ++n) {
            sx += n;
            sy += out.a[n - 1];
            sxx += double(n) * n;
            sxy += n * out.a[n - 1];
        }
        out.slope = (n_max * sxy - sx * sy) / (n_max * sxx - sx * sx);
    }
    return out;
}

RotationNumber rotation_number(const Diffeo1D& f, int iterations) {
    if (!f.domain().is_circle()) throw config_error("rotation_number: circle diffeomorphism required");
    if (iterations < 1) throw config_error("rotation_number: iterations must be >= 1");
    double x = 0.0;
    for (int i = 0; i < iterations; ++i) x = f(x);
    const double x0 = x;
    for (int i = 0; i < iterations; ++i) x = f(x);
    RotationNumber out;
    out.estimate = (x - x0) / iterations;
    const double tol = 0.5 / iterations;
    // Continued-fraction convergents of the estimate.
    long p0 = 1, q0 = 0, p1 = static_cast<long>(std::floor(out.estimate)), q1 = 1;
    double rem = out.estimate - std::floor(out.estimate);
    for (int it = 0; it < 64; ++it) {
        if (std::abs(out.estimate - static_cast<double>(p1) / q1) < tol) {
            out.rational = true;
            out.p = p1;
            out.q = q1;
            break;
        }
        if (rem < 1e-15 || q1 > iterations) break;
        const double inv = 1.0 / rem;
        const long ai = static_cast<long>(std::floor(inv));
        rem = inv - ai;
        const long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    return out;
}

double schwarzian(const Diffeo1D& f, double x) {
    Jet j = f.jet(x, 3);
    const double u = j[2] / j[1];
    return j[3] / j[1] - 1.5 * u * u;
}

namespace {

// Off-diagonal cocycle near the diagonal from a jet at the midpoint m with
// x = m + h, y = m - h. The leading h^2 terms of Df(x)Df(y)(2h)^2 - (f(x)-f(y))^2
// cancel exactly in coefficient space, which avoids the O(eps/|x-y|^3)
// round-off of the direct formula.
double cocycle_series(const Diffeo1D& f, double x, double y) {
    constexpr int r = 6;
    const double m = 0.5 * (x + y), h = 0.5 * (x - y);
    auto t = taylor_coeffs(f.jet(m, r));  // t[k] = D^k f(m)/k!
    // A(h) = Df(m+h), B(h) = Df(m-h): coefficient of h^k is (k+1) t[k+1] (+/-).
    std::array<double, r> A{}, B{};
    for (int k = 0; k < r; ++k) {
        A[k] = (k + 1) * t[k + 1];
        B[k] = (k % 2 == 0 ? 1 : -1) * A[k];
    }
    // F(h) = f(m+h) - f(m-h) = 2 sum_{k odd} t[k] h^k.
    std::array<double, r + 1> F{};
    for (int k = 1; k <= r; k += 2) F[k] = 2 * t[k];
    // N(h) = 4 h^2 A B - F^2, kept through h^(r+1).
    std::array<double, r + 2> N{};
    for (int i = 0; i < r; ++i)
        for (int j = 0; i + j + 2 <= r + 1 && j < r; ++j) N[i + j + 2] += 4 * A[i] * B[j];
    for (int i = 1; i <= r; ++i)
        for (int j = 1; i + j <= r + 1 && j <= r; ++j) N[i + j] -= F[i] * F[j];
    double num = 0, fs = 0;
    for (int k = r + 1; k >= 4; --k) num = num * h + N[k];
    num *= h * h * h * h;
    for (int k = r; k >= 1; --k) fs = fs * h + F[k];
    fs *= h;
    return num / (fs * fs * 4 * h * h);
}

}  // namespace

double liouville_cocycle(const Diffeo1D& f, double x, double y, double tube) {
    const double d = std::abs(x - y);
    if (d < tube) return schwarzian(f, 0.5 * (x + y)) / 6.0;
    if (d < 5e-3) return cocycle_series(f, x, y);
    Jet fx = f.jet(x, 1), fy = f.jet(y, 1);
    const double df = fx[0] - fy[0], dx = x - y;
    return fx[1] * fy[1] / (df * df) - 1.0 / (dx * dx);
}

LiouvilleLength liouville_length(const Diffeo1D& f, double rel_tol) {
    const auto [a, b] = span_of(f.domain());
    const double w = b - a;
    LiouvilleLength out;
    QuadOptions inner_opt;
    inner_opt.abs_tol = 1e-10;
    inner_opt.rel_tol = rel_tol;
    inner_opt.max_intervals = 400;
    double inner_err = 0;
    bool inner_ok = true;
    // Symmetric kernel: integrate over y < x with x = y + d.
    auto inner = [&](double d) {
        QuadResult r = integrate_gk([&](double y) { return std::abs(liouville_cocycle(f, y + d, y)); }, a, b - d,
                                    inner_opt);
        inner_err = std::max(inner_err, r.error);
        inner_ok = inner_ok && r.converged;
        return r.value;
    };
    QuadOptions outer_opt;
    outer_opt.abs_tol = 1e-9;
    outer_opt.rel_tol = rel_tol;
    outer_opt.max_intervals = 400;
    QuadResult r = integrate_gk(inner, 0.0, w, outer_opt);
    out.value = 2 * r.value;
    out.error = 2 * (r.error + w * inner_err);
    out.converged = r.converged && inner_ok;
    return out;
}

}  // namespace diffeo

#include "diffeo/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "diffeo/errors.hpp"

namespace diffeo {

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double fv[15];
    fv[7] = f(c);
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kXgk[i]);
        fv[14 - i] = f(c + h * kXgk[i]);
    }
    double k = kWgk[7] * fv[7];
    double g = kWg[3] * fv[7];
    double kabs = std::abs(k);
    for (int i = 0; i < 7; ++i) {
        const double pair = fv[i] + fv[14 - i];
        k += kWgk[i] * pair;
        kabs += kWgk[i] * (std::abs(fv[i]) + std::abs(fv[14 - i]));
        if (i % 2 == 1) g += kWg[i / 2] * pair;
    }
    const double mean = 0.5 * k;
    double asc = kWgk[7] * std::abs(fv[7] - mean);
    for (int i = 0; i < 7; ++i) asc += kWgk[i] * (std::abs(fv[i] - mean) + std::abs(fv[14 - i] - mean));
    double err = std::abs((k - g) * h);
    asc *= std::abs(h);
    if (asc != 0 && err != 0) err = asc * std::min(1.0, std::pow(200 * err / asc, 1.5));
    const double floor = 50 * std::numeric_limits<double>::epsilon() * kabs * std::abs(h);
    if (floor > std::numeric_limits<double>::min() / (50 * std::numeric_limits<double>::epsilon())) {
        err = std::max(err, floor);
    }
    return {a, b, k * h, err};
}

}  // namespace

QuadResult integrate_gk(const std::function<double(double)>& f, double a, double b, const QuadOptions& opt) {
    QuadResult res;
    if (a == b) return res;
    std::priority_queue<Segment> heap;
    Segment s = gk15(f, a, b);
    heap.push(s);
    double total = s.value, err = s.error;
    res.intervals = 1;
    while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
        if (res.intervals >= opt.max_intervals) {
            res.converged = false;
            break;
        }
        Segment worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            res.converged = worst.error <= opt.abs_tol;
            break;
        }
        heap.pop();
        Segment l = gk15(f, worst.a, mid), r = gk15(f, mid, worst.b);
        total += l.value + r.value - worst.value;
        err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        ++res.intervals;
    }
    // Re-sum to drop accumulated update round-off.
    total = 0;
    err = 0;
    while (!heap.empty()) {
        total += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    if (!std::isfinite(total)) throw numeric_error("quadrature produced a non-finite value");
    res.value = total;
    res.error = err;
    return res;
}

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 double* error_estimate) {
    QuadOptions opt;
    opt.rel_tol = rel_tol;
    QuadResult r = integrate_gk(f, a, b, opt);
    if (error_estimate) *error_estimate = r.error;
    return r.value;
}

double solve_increasing(const std::function<double(double)>& F,
                        const std::function<double(double)>& dF, double target, double lo,
                        double hi, double xtol) {
    double flo = F(lo) - target;
    double fhi = F(hi) - target;
    if (flo > 0 || fhi < 0) {
        const double slack = 1e-12 * (1 + std::abs(target));
        if (flo > 0 && flo < slack) return lo;
        if (fhi < 0 && -fhi < slack) return hi;
        throw numeric_error("root solve: target " + std::to_string(target) +
                            " outside the image of the bracket");
    }
    double y = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double v = F(y) - target;
        if (v == 0) return y;
        if (v < 0) lo = y; else hi = y;
        double d = dF(y);
        double next = (d > 0) ? y - v / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - y) <= xtol * std::max(1.0, std::abs(y))) return next;
        if (hi - lo <= xtol * std::max(1.0, std::abs(y))) return next;
        y = next;
    }
    return y;
}

double bisect_root(const std::function<double(double)>& g, double lo, double hi, double xtol,
                   int max_iter) {
    double glo = g(lo);
    double ghi = g(hi);
    if (glo == 0) return lo;
    if (ghi == 0) return hi;
    if ((glo > 0) == (ghi > 0)) throw numeric_error("bisection: no sign change on bracket");
    for (int it = 0; it < max_iter && hi - lo > xtol; ++it) {
        double mid = 0.5 * (lo + hi);
        double gm = g(mid);
        if (gm == 0) return mid;
        if ((gm > 0) == (glo > 0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace diffeo

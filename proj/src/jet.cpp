#include "diffeo/jet.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "diffeo/errors.hpp"

namespace diffeo {

namespace {

// One integer partition of n: mult[i] copies of part i (1-based).
struct Partition {
    int k = 0;        // number of parts
    double coef = 0;  // n! / prod(m_i! (i!)^m_i)
    std::array<int, kMaxOrder + 1> mult{};
};

double factorial(int n) {
    double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

void enumerate(int n, int remaining, int max_part, Partition& cur, std::vector<Partition>& out) {
    if (remaining == 0) {
        Partition p = cur;
        double denom = 1;
        for (int i = 1; i <= n; ++i) {
            denom *= factorial(p.mult[i]) * std::pow(factorial(i), p.mult[i]);
        }
        p.coef = factorial(n) / denom;
        out.push_back(p);
        return;
    }
    for (int part = std::min(max_part, remaining); part >= 1; --part) {
        cur.mult[part] += 1;
        cur.k += 1;
        enumerate(n, remaining - part, part, cur, out);
        cur.mult[part] -= 1;
        cur.k -= 1;
    }
}

using PartitionTable = std::array<std::vector<Partition>, kMaxOrder + 1>;

const PartitionTable& partitions() {
    static const PartitionTable table = [] {
        PartitionTable t;
        for (int n = 1; n <= kMaxOrder; ++n) {
            Partition cur;
            enumerate(n, n, n, cur, t[n]);
        }
        return t;
    }();
    return table;
}

double partition_product(const Partition& p, const Jet& inner, int n) {
    double prod = 1;
    for (int i = 1; i <= n; ++i) {
        for (int m = 0; m < p.mult[i]; ++m) prod *= inner[i];
    }
    return prod;
}

void check_same(const Jet& a, const Jet& b, const char* op) {
    if (a.order() != b.order()) {
        throw config_error(std::string(op) + ": jet orders differ (" + std::to_string(a.order()) +
                           " vs " + std::to_string(b.order()) + ")");
    }
    if (std::abs(a.base_point() - b.base_point()) > kBasePointTol) {
        throw config_error(std::string(op) + ": base points differ (" +
                           std::to_string(a.base_point()) + " vs " +
                           std::to_string(b.base_point()) + ")");
    }
}

}  // namespace

void throw_bad_order(int r) {
    throw config_error("jet order " + std::to_string(r) + " outside [0, " + std::to_string(kMaxOrder) + "]");
}

Jet::Jet(double base_point, int order) : base_(base_point), order_(order) { check_order(order); }

Jet Jet::constant(double base_point, int order, double value) {
    Jet j(base_point, order);
    j.c_[0] = value;
    return j;
}

Jet Jet::identity(double base_point, int order) {
    Jet j(base_point, order);
    j.c_[0] = base_point;
    if (order >= 1) j.c_[1] = 1.0;
    return j;
}

Jet Jet::truncated(int r) const {
    Jet j(base_, std::min(r, order_));
    for (int k = 0; k <= j.order_; ++k) j.c_[k] = c_[k];
    return j;
}

Jet Jet::rebased(double base_point) const {
    Jet j = *this;
    j.base_ = base_point;
    return j;
}

bool Jet::all_finite() const {
    for (int k = 0; k <= order_; ++k) {
        if (!std::isfinite(c_[k])) return false;
    }
    return true;
}

Jet jet_add(const Jet& a, const Jet& b) {
    check_same(a, b, "jet_add");
    Jet out(a.base_point(), a.order());
    for (int k = 0; k <= a.order(); ++k) out[k] = a[k] + b[k];
    return out;
}

Jet jet_sub(const Jet& a, const Jet& b) {
    check_same(a, b, "jet_sub");
    Jet out(a.base_point(), a.order());
    for (int k = 0; k <= a.order(); ++k) out[k] = a[k] - b[k];
    return out;
}

Jet jet_scale(const Jet& a, double s) {
    Jet out(a.base_point(), a.order());
    for (int k = 0; k <= a.order(); ++k) out[k] = s * a[k];
    return out;
}

Jet jet_shift(const Jet& a, double s) {
    Jet out = a;
    out[0] += s;
    return out;
}

Jet jet_mul(const Jet& a, const Jet& b) {
    check_same(a, b, "jet_mul");
    Jet out(a.base_point(), a.order());
    for (int n = 0; n <= a.order(); ++n) {
        double binom = 1;
        double s = 0;
        for (int k = 0; k <= n; ++k) {
            s += binom * a[k] * b[n - k];
            binom = binom * (n - k) / (k + 1);
        }
        out[n] = s;
    }
    return out;
}

Jet jet_apply(std::span<const double> d, const Jet& inner) {
    const int r = inner.order();
    Jet out(inner.base_point(), r);
    out[0] = d[0];
    const auto& table = partitions();
    for (int n = 1; n <= r; ++n) {
        double s = 0;
        for (const auto& p : table[n]) s += p.coef * d[p.k] * partition_product(p, inner, n);
        out[n] = s;
    }
    return out;
}

Jet jet_compose(const Jet& outer, const Jet& inner) {
    if (outer.order() < inner.order()) {
        throw config_error("jet_compose: outer order below inner order");
    }
    if (std::abs(outer.base_point() - inner.value()) > kBasePointTol) {
        throw config_error("jet_compose: outer base point " + std::to_string(outer.base_point()) +
                           " does not match inner value " + std::to_string(inner.value()));
    }
    return jet_apply(outer.coeffs(), inner);
}

Jet jet_invert(const Jet& a) {
    const int r = a.order();
    if (r >= 1 && a[1] == 0.0) throw numeric_error("jet_invert: vanishing first derivative");
    Jet g(a.value(), r);
    g[0] = a.base_point();
    if (r == 0) return g;
    g[1] = 1.0 / a[1];
    const auto& table = partitions();
    // (g o a)^(n) = 0 for n >= 2; isolate the k = n term g^(n) a1^n.
    for (int n = 2; n <= r; ++n) {
        double s = 0;
        for (const auto& p : table[n]) {
            if (p.k == n) continue;
            s += p.coef * g[p.k] * partition_product(p, a, n);
        }
        g[n] = -s / std::pow(a[1], n);
    }
    return g;
}

Jet jet_reciprocal(const Jet& a) {
    if (a.value() == 0.0) throw numeric_error("jet_reciprocal: value zero at base point");
    const int r = a.order();
    Jet b(a.base_point(), r);
    b[0] = 1.0 / a[0];
    // Leibniz: sum_k C(n,k) a_k b_{n-k} = 0 for n >= 1.
    for (int n = 1; n <= r; ++n) {
        double binom = 1;
        double s = 0;
        for (int k = 1; k <= n; ++k) {
            binom = binom * (n - k + 1) / k;
            s += binom * a[k] * b[n - k];
        }
        b[n] = -s / a[0];
    }
    return b;
}

Jet jet_div(const Jet& a, const Jet& b) { return jet_mul(a, jet_reciprocal(b)); }

Jet jet_exp(const Jet& a) {
    std::array<double, kMaxOrder + 1> d;
    d.fill(std::exp(a.value()));
    return jet_apply(d, a);
}

Jet jet_log(const Jet& a) {
    if (a.value() <= 0.0) throw numeric_error("jet_log: non-positive argument");
    std::array<double, kMaxOrder + 1> d{};
    d[0] = std::log(a.value());
    double inv = 1.0 / a.value();
    double p = inv;
    for (int k = 1; k <= a.order(); ++k) {
        d[k] = ((k % 2 == 1) ? 1.0 : -1.0) * factorial(k - 1) * p;
        p *= inv;
    }
    return jet_apply(d, a);
}

Jet jet_sin(const Jet& a) {
    std::array<double, kMaxOrder + 1> d{};
    const double s = std::sin(a.value()), c = std::cos(a.value());
    const double cyc[4] = {s, c, -s, -c};
    for (int k = 0; k <= a.order(); ++k) d[k] = cyc[k % 4];
    return jet_apply(d, a);
}

Jet jet_cos(const Jet& a) {
    std::array<double, kMaxOrder + 1> d{};
    const double s = std::sin(a.value()), c = std::cos(a.value());
    const double cyc[4] = {c, -s, -c, s};
    for (int k = 0; k <= a.order(); ++k) d[k] = cyc[k % 4];
    return jet_apply(d, a);
}

Jet jet_derivative(const Jet& a) {
    if (a.order() == 0) throw config_error("jet_derivative: order 0 jet");
    Jet out(a.base_point(), a.order() - 1);
    for (int k = 0; k < a.order(); ++k) out[k] = a[k + 1];
    return out;
}

std::array<double, kMaxOrder + 1> taylor_coeffs(const Jet& a) {
    std::array<double, kMaxOrder + 1> t{};
    double f = 1;
    for (int k = 0; k <= a.order(); ++k) {
        if (k > 0) f *= k;
        t[k] = a[k] / f;
    }
    return t;
}

double max_abs_diff(const Jet& a, const Jet& b) {
    const int r = std::min(a.order(), b.order());
    double m = 0;
    for (int k = 0; k <= r; ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace diffeo

#pragma once

#include <array>
#include <span>

namespace diffeo {

#ifndef DIFFEO_MAX_ORDER
#define DIFFEO_MAX_ORDER 8
#endif

/// Highest derivative order any jet can carry.
inline constexpr int kMaxOrder = DIFFEO_MAX_ORDER;

/// Absolute tolerance when matching base points of two jets.
inline constexpr double kBasePointTol = 1e-9;

/// Truncated Taylor data at a point. coeffs[k] is the k-th derivative,
/// not divided by k!.
class Jet {
public:
    Jet() = default;
    Jet(double base_point, int order);

    static Jet constant(double base_point, int order, double value);
    /// Jet of x -> x at base_point.
    static Jet identity(double base_point, int order);

    double base_point() const { return base_; }
    int order() const { return order_; }
    double value() const { return c_[0]; }

    double operator[](int k) const { return c_[k]; }
    double& operator[](int k) { return c_[k]; }

    std::span<const double> coeffs() const { return {c_.data(), static_cast<size_t>(order_) + 1}; }

    /// Same jet with orders above r dropped.
    Jet truncated(int r) const;
    Jet rebased(double base_point) const;
    bool all_finite() const;

private:
    double base_ = 0.0;
    int order_ = 0;
    std::array<double, kMaxOrder + 1> c_{};
};

[[noreturn]] void throw_bad_order(int r);
inline void check_order(int r) {
    if (r < 0 || r > kMaxOrder) throw_bad_order(r);
}

Jet jet_add(const Jet& a, const Jet& b);
Jet jet_sub(const Jet& a, const Jet& b);
Jet jet_scale(const Jet& a, double s);
Jet jet_shift(const Jet& a, double s);
Jet jet_mul(const Jet& a, const Jet& b);
Jet jet_compose(const Jet& outer, const Jet& inner);
Jet jet_invert(const Jet& a);
Jet jet_reciprocal(const Jet& a);
Jet jet_div(const Jet& a, const Jet& b);

/// Compose a scalar function, given by its derivatives d[0..r] at inner.value(),
/// with the jet `inner`.
Jet jet_apply(std::span<const double> d, const Jet& inner);
Jet jet_exp(const Jet& a);
Jet jet_log(const Jet& a);
Jet jet_sin(const Jet& a);
Jet jet_cos(const Jet& a);
/// Derivative jet: order drops by one.
Jet jet_derivative(const Jet& a);

/// Monomial coefficients c_k / k!.
std::array<double, kMaxOrder + 1> taylor_coeffs(const Jet& a);

double max_abs_diff(const Jet& a, const Jet& b);

inline Jet operator+(const Jet& a, const Jet& b) { return jet_add(a, b); }
inline Jet operator-(const Jet& a, const Jet& b) { return jet_sub(a, b); }
inline Jet operator*(const Jet& a, const Jet& b) { return jet_mul(a, b); }
inline Jet operator*(double s, const Jet& a) { return jet_scale(a, s); }

}  // namespace diffeo

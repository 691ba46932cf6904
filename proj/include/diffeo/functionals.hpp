#pragma once

#include <vector>

#include "diffeo/expr.hpp"

namespace diffeo {

/// Total variation of log Df over the domain, computed as the integral of |D^2 f / Df|.
/// The integrand is split at sign changes of D^2 f so each piece is smooth.
double var_log_derivative(const Diffeo1D& f);

struct AsymptoticVariation {
    std::vector<double> a;   // a[n-1] = Var(log Df^n)/n
    double estimate = 0;     // min over n, an upper bound for the limit
    double slope = 0;        // least-squares slope of a_n against n
};

AsymptoticVariation asymptotic_variation(const Diffeo1D& f, int n_max);

struct RotationNumber {
    double estimate = 0;
    bool rational = false;
    long p = 0;
    long q = 1;
    double value() const { return rational ? static_cast<double>(p) / q : estimate; }
};

/// Birkhoff estimate (F^n(x) - x)/n after a burn-in of n iterates, rounded to
/// the first continued-fraction convergent within 1/(2n).
RotationNumber rotation_number(const Diffeo1D& f, int iterations);

/// Df(x)Df(y)/(f(x)-f(y))^2 - 1/(x-y)^2, with the diagonal limit Sf/6 used on |x-y| < tube.
double liouville_cocycle(const Diffeo1D& f, double x, double y, double tube = 1e-4);

/// Schwarzian derivative D^3f/Df - 3/2 (D^2f/Df)^2.
double schwarzian(const Diffeo1D& f, double x);

struct LiouvilleLength {
    double value = 0;
    double error = 0;
    bool converged = true;
};

/// L^1 norm of the Liouville cocycle over the square domain^2.
LiouvilleLength liouville_length(const Diffeo1D& f, double rel_tol = 1e-8);

}  // namespace diffeo

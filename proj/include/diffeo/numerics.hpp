#pragma once

#include <functional>

namespace diffeo {

struct QuadOptions {
    double abs_tol = 1e-14;
    double rel_tol = 1e-13;
    int max_intervals = 4000;
};

struct QuadResult {
    double value = 0;
    double error = 0;
    int intervals = 0;
    bool converged = true;
};

/// Globally adaptive Gauss-Kronrod 7/15 quadrature on [a,b]: the interval with
/// the largest error estimate is bisected until the total error meets the
/// tolerance or the interval budget runs out.
QuadResult integrate_gk(const std::function<double(double)>& f, double a, double b,
                        const QuadOptions& opt = {});

/// Value-only form with a relative tolerance and an absolute floor.
double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-13,
                 double* error_estimate = nullptr);

/// Solve F(y) = target for increasing F with derivative dF, bracketed by [lo, hi].
/// Safeguarded Newton; throws numeric_error when the bracket does not contain the target.
double solve_increasing(const std::function<double(double)>& F,
                        const std::function<double(double)>& dF, double target, double lo,
                        double hi, double xtol = 1e-15);

/// Bisection for a sign change of g on [lo, hi]; g(lo) and g(hi) must differ in sign.
double bisect_root(const std::function<double(double)>& g, double lo, double hi,
                   double xtol = 1e-15, int max_iter = 200);

}  // namespace diffeo

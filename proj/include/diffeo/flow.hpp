#pragma once

#include "diffeo/expr.hpp"

namespace diffeo {

struct FlowOptions {
    double tol = 1e-12;      // per-step error tolerance
    double min_step = 1e-13; // relative to |t|; smaller steps count as underflow
    long max_steps = 5'000'000;
};

/// Jet at x of the time-t map of X. The base trajectory and its spatial
/// derivatives are integrated together as a jet-valued ODE dJ/dt = X o J
/// with an embedded Dormand-Prince 5(4) scheme.
Jet flow(const VectorField1D& X, double t, double x, int r, const FlowOptions& opt = {});

/// Value-only convenience wrapper.
double flow_point(const VectorField1D& X, double t, double x);

/// Time for the flow of X to carry p to q: the integral of 1/X from p to q.
/// Throws numeric_error when X vanishes on the closed interval between p and q.
double transit_time(const VectorField1D& X, double p, double q);

/// Jet in t of t -> flow(X, t - base, x) at t = base, from psi' = X(psi).
Jet orbit_jet(const VectorField1D& X, double x, double base, int r);

}  // namespace diffeo

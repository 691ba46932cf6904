#pragma once

#include <optional>

#include "diffeo/expr.hpp"
#include "diffeo/grid.hpp"

namespace diffeo {

/// Transit-time offset tau_f(x0, x1) - tau_g(phi0(x0), phi1(x1)) between two
/// boundary germs phi0 (near 0) and phi1 (near 1).
double sigma_offset(const VectorField1D& f_field, const VectorField1D& g_field, const Diffeo1D& phi0,
                    const Diffeo1D& phi1, double x0, double x1);

/// Lazy conjugator: x is pushed by f^k into the germ region [0, max(b, f(b))],
/// mapped by phi0, then pulled back by g^{-k}. k is capped at max_iter.
Diffeo1D orbit_conjugator(const Diffeo1D& f, const Diffeo1D& g, const Diffeo1D& phi0, double base_point,
                          int max_iter = 10000);

/// Map used in place of a conjugator on one side of `limit`.
struct GermPiece {
    double limit = 0;
    Diffeo1D map;
};

/// Conjugator between two flows, x -> flow(Y, transit_time(X, p, x), q). It pushes X
/// to Y, so it conjugates every time-t map of X to that of Y. Optional germs replace
/// it for x <= lo.limit and x >= hi.limit.
Diffeo1D flow_conjugator(const VectorField1D& X, const VectorField1D& Y, double p, double q,
                         std::optional<GermPiece> lo = {}, std::optional<GermPiece> hi = {});

struct ConjugacyOptions {
    int order = 2;
    double germ_tol = 1e-9;
    int germ_nodes = 64;
    int max_iter = 10000;
    GridSpec grid{0.05, 0.95, 257, true, false, 257};
};

struct ConjugacyWitness {
    Diffeo1D phi;
    double sigma = 0;          // filled by callers that know a germ at 1
    double residual_c0 = 0;    // sup |phi(f(x)) - g(phi(x))|
    double residual_cr = 0;    // same, over derivative orders 0..order
    int order = 0;
    double germ_residual = 0;  // sup |phi0(f(x)) - g(phi0(x))| on [0, b]
    GridSpec grid;
    int grid_size = 0;
};

json to_json(const ConjugacyWitness& w);

/// Build phi with phi o f = g o phi from a germ phi0 conjugating f to g near 0.
ConjugacyWitness synthesize_conjugacy(const Diffeo1D& f, const Diffeo1D& g, const Diffeo1D& phi0,
                                      double base_point, const ConjugacyOptions& opt = {});

}  // namespace diffeo

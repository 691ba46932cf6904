#pragma once

#include <ostream>
#include <vector>

#include "diffeo/expr.hpp"
#include "diffeo/grid.hpp"

namespace diffeo {

struct MatherSample {
    double p = 0, q = 0;
    std::vector<double> t_nodes;
    std::vector<double> values;
    double translation_fit = 0;     // mean of M(t) - t
    double max_deviation = 0;       // max |M(t) - t - translation_fit|
    double commutation_defect = 0;  // max |M(t+1) - M(t) - 1| over sampled pairs

    void write_csv(std::ostream& os) const;
};

json to_json(const MatherSample& m);

/// n equally spaced nodes on [a, b], endpoints included.
std::vector<double> mather_nodes(int n = 64, double a = 0.0, double b = 1.0);

/// M(t) = transit_time(Y_right, q, flow(X_left, t, p)).
double mather_value(const VectorField1D& X_left, const VectorField1D& Y_right, double p, double q, double t);

MatherSample mather_map(const VectorField1D& X_left, const VectorField1D& Y_right, double p, double q,
                        const std::vector<double>& t_nodes = mather_nodes(), Exec exec = Exec::serial);

struct Triviality {
    bool trivial = false;
    double deviation = 0;
};

Triviality is_trivial(const MatherSample& m, double tol);

/// Generating field of g that agrees with X near one endpoint: X on the germ side
/// of `limit`, extended elsewhere by g-invariance, X_g = (g^n)^* X.
VectorField1D generating_field(const Diffeo1D& g, const VectorField1D& X, bool left, double limit,
                               int max_iter = 10000);

struct WindowPerturbation {
    Diffeo1D phi;  // diffeomorphism of the time window [alpha - 1, alpha]
    double alpha = 0;
};

struct FragmatData {
    VectorField1D X;  // f is the time-1 map of X
    double p = 0.5;
};

struct PerturbedMap {
    Diffeo1D g;               // f o h_1 o ... o h_l
    VectorField1D X_left;     // generating field of g at 0
    VectorField1D Y_right;    // generating field of g at 1
    double support_lo = 0, support_hi = 0;
};

/// g = f o h_1 o ... o h_l with h_i = psi phi_i psi^{-1}, psi(t) = flow(X, t, p).
PerturbedMap perturb_in_windows(const FragmatData& data, const std::vector<WindowPerturbation>& perts);

struct FragmatReport {
    std::vector<double> s_nodes;
    std::vector<double> lhs;  // M_g^{-1}(s)
    std::vector<double> rhs;  // M_f^{-1}(Phi^{-1}(s)), Phi = phi_1 ... phi_l extended 1-periodically
    double tau = 0;           // fitted translation
    double mismatch = 0;      // max |lhs - rhs - tau|
};

json to_json(const FragmatReport& r);

/// Both sides of M_g R_tau = Phi M_f on a grid, compared modulo a fitted translation.
FragmatReport fragmat_compose_check(const FragmatData& data, const std::vector<WindowPerturbation>& perts,
                                    const std::vector<double>& s_nodes = mather_nodes(),
                                    Exec exec = Exec::serial);

}  // namespace diffeo

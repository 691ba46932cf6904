#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "diffeo/expr.hpp"
#include "diffeo/grid.hpp"

namespace diffeo {

// ---------------------------------------------------------------- flattening

/// phi_lambda: homothety of ratio lambda on [0, 1/(4 lambda)] and near 1, maps
/// [1/(2 lambda), 1 - 1/(2 lambda)] affinely onto [1/2 - 1/(4 lambda), 1/2 + 1/(4 lambda)],
/// with a monotone quintic derivative profile in between.
Diffeo1D flatten_map(double lambda);

struct FlattenResult {
    VectorField1D Y;
    Diffeo1D phi;  // pushes X to Y; homothety of ratio lambda near both ends
    double lambda = 0;
    double u = 0;
    double eta = 0;
    int r = 0;
    double transit_match_residual = 0;
    double y_norm = 0;           // ||Y||_r on the verification grid
    double homothety_defect = 0; // jet mismatch of phi against x -> lambda x near the ends
    std::vector<std::pair<double, double>> sweep;  // (lambda, ||Y||_r) per attempted ratio
};

json to_json(const FlattenResult& f);

struct FlattenOptions {
    double lambda_max = 1 << 20;
    int grid_nodes = 2049;
};

/// Conjugate X (zeros exactly at 0 and 1, DX = 0 there) to a field with ||Y||_r < eta.
/// lambda = 0 runs the sweep 2, 4, 8, ...; a given lambda is used as is.
FlattenResult flatten_field(const VectorField1D& X, double eta, int r, double lambda = 0,
                            const FlattenOptions& opt = {});

/// Largest eta such that ||Y||_r < eta implies d_r(time-1 map, id) < epsilon on a
/// validation family of fields, found by bisection and halved.
double calibrate_eta(double epsilon, int r);

// ---------------------------------------------------------------- ITI points

/// Displacement flow(X, t, x) - x, accurate in relative terms when it is tiny.
double flow_displacement(const VectorField1D& X, double t, double x);

enum class Side { left, right };

struct RegularityPoint {
    double x0 = 0;
    double displacement = 0;  // f^{+-1}(x0) - x0 in absolute value
    double norm = 0;          // ||X|| on [f^{-+2}(x0), f^{+-2}(x0)]
    double norm_margin = 0;   // log(d^{1-delta} / norm)
    double value_margin = 0;  // log(|X(x0)| / (d / 2))
    int candidates = 0;
};

struct RegularityOptions {
    double ratio = 0.9;      // geometric step between candidates
    double floor = 1e-12;    // smallest distance to the endpoint tried
    Side side = Side::left;  // ITI endpoint 0 or 1
    bool require_regularity = true;  // false: only `extra` decides, margins are still reported
};

using CandidateTest = std::function<bool(double x0, double displacement)>;

/// First candidate, moving geometrically toward the endpoint from x_max, that
/// satisfies both regularity inequalities and `extra` when given.
/// The scan also stops as soon as X underflows at the candidate.
RegularityPoint regularity_point_search(const VectorField1D& X, const Diffeo1D& f, int r, double delta,
                                        double x_max, const RegularityOptions& opt = {},
                                        const CandidateTest& extra = {});

enum class SmallnessRule {
    inequalities,  // the three smallness inequalities on d = |f(x0) - x0|
    measured,      // properties 4 and 5 checked directly, window width set by the caller
};

struct ItiOptions {
    double delta = 0;  // 0 selects 1/(2r+2)
    SmallnessRule rule = SmallnessRule::inequalities;
    double window = 0.125;  // measured rule: interpolation width b
    double x_max = 0.25;    // distance from the endpoint where the scan starts
    Side side = Side::left;
};

struct ItiInterpolation {
    double x0 = 0;
    VectorField1D Y;
    double delta = 0;
    double displacement = 0;
    double b = 0;             // interpolation width
    double property4 = 0;     // ||Y|| on [f^{-+1}(x0), x0 + eta]
    double property5 = 0;     // min |Y| on [x0, x0 + eta]
    std::vector<double> a;    // D^i X(x0), i = 0..r
    RegularityPoint point;
};

/// Replace X beyond a regularity point x0 by its order-r Taylor polynomial cut off
/// to the constant X(x0). With side = right the roles of 0 and 1 are exchanged.
ItiInterpolation interpolate_ITI(const VectorField1D& X, const Diffeo1D& f, double eta, int r,
                                 const ItiOptions& opt = {});

/// Add sum_{i > r} a_i/i! y^i chi(y/b_i), y = x - x0 (or x0 - x on the right side),
/// removing the jumps a_i of D^i Y at x0. Orders stop at the jet capacity.
VectorField1D borel_smooth(const VectorField1D& Y, double x0, double alpha, int r, Side side = Side::left);

/// C^k norm of the cut-off chi (1 on [0, 1/2], 0 on [1, oo)).
double cutoff_norm(int k);

// ---------------------------------------------------------------- reduction

struct BoundaryTag {
    enum class Kind { identity, homothety, power_of_f };
    double point = 0;
    Kind kind = Kind::identity;
    double value = 0;   // ratio or power
    double defect = 0;  // jet mismatch found when the tag was verified
};

std::string tag_name(BoundaryTag::Kind k);

struct ReductionStep {
    Diffeo1D conjugator;
    Diffeo1D conjugate;
    double dr_to_isometry = 0;
    int r = 0;
    double residual = 0;  // sup |phi(f(x)) - g(phi(x))| against the previous step
    std::vector<BoundaryTag> boundary_tags;
    std::vector<double> offsets;  // transit offsets sigma, tau driven to integers
};

struct ReductionTrace {
    std::vector<ReductionStep> steps;
    double target_epsilon = 0;
    double eta = 0;
    std::vector<double> subdivision;
    std::vector<char> block_types;  // 'A' or 'B' per block

    void write_svg(std::ostream& os) const;
};

json to_json(const ReductionTrace& t);

struct FlowData {
    VectorField1D X;  // f is its time-1 map
    /// Declared ITI fixed points; detection from the jets of X is used when absent.
    std::optional<std::vector<double>> iti;
};

struct ReduceOptions {
    double eta = 0;  // 0 calibrates from epsilon
    GridSpec grid{0.0, 1.0, 257, true, false, 257};
    int max_retries = 6;
};

/// Reduce the time-1 map of X on [0,1], ITI at 0 and 1 with no interior ITI zero.
ReductionStep reduce_no_interior_ITI(const FlowData& data, double epsilon, int r, const ReduceOptions& opt = {});

/// Conjugate f close to the identity: subdivision at ITI points, per-block reduction
/// and gluing of the conjugators.
ReductionTrace reduce_interval(const FlowData& data, double epsilon, int r, const ReduceOptions& opt = {});

/// Zeros of X classified as ITI when the jets of X vanish to the jet capacity.
std::vector<double> detect_iti(const VectorField1D& X, double tol = 1e-9);

// ---------------------------------------------------------------- rational rotation

struct RationalData {
    VectorField1D X;                // f = psi o R_{p/q} o flow(X, 1) o psi^{-1}
    Diffeo1D psi;                   // empty means the identity
    bool iti = false;               // f^q has an ITI fixed point
};

struct NormalizedRational {
    Diffeo1D normalized;   // conjugate of f
    Diffeo1D conjugator;
    Diffeo1D root;         // case 1: q-th root of f^q; case 2: seed germ psi
    Diffeo1D h;            // normalized = h o R_{p/q}
    double root_residual = 0;        // |h^q - id| (case 1)
    double commutation_residual = 0; // |root R - R root| (case 1)
    double conjugacy_residual = 0;   // |phi f phi^{-1} - normalized|
    double jet_mismatch = 0;         // case 2: max jet jump at the q breakpoints
    double support_defect = 0;       // case 2: max |h - id| off its support interval
};

json to_json(const NormalizedRational& n);

NormalizedRational normalize_rational(const Diffeo1D& f, int p, int q, const RationalData& data, int r = 3);

}  // namespace diffeo

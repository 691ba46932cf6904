#pragma once

#include <optional>
#include <string>
#include <vector>

#include "diffeo/expr.hpp"
#include "diffeo/grid.hpp"

namespace diffeo {

// ---------------------------------------------------------------- commutator curvature

struct Curvature {
    double analytic = 0;           // 2 (DX Y - DY X)(x)
    double finite_difference = 0;  // second t-derivative of [phi^t_X, phi^t_Y](x) at t = 0
    double error = 0;
};

/// Compares the second derivative of t -> [phi^t_X, phi^t_Y](x) at t = 0 with its
/// closed form. The difference quotient uses t in {+-h, +-2h} and is of order h^2.
Curvature commutator_curvature(const VectorField1D& X, const VectorField1D& Y, double x, double h = 1e-3);

// ---------------------------------------------------------------- words

/// Generator index and exponent (+1 or -1 in certificates; any nonzero power in records).
struct Letter {
    int gen = 0;
    long power = 1;
};

using Word = std::vector<Letter>;

/// Sum of |power| over the letters.
long word_length(const Word& w);
/// Reversed word with negated powers.
Word inverse_word(const Word& w);
/// Value at x of the composition w[0] o w[1] o ... (the last letter acts first).
/// Powers of flow generators are evaluated as a single flow.
double evaluate_word(const Word& w, const std::vector<Diffeo1D>& gens, const std::vector<Diffeo1D>& inverses,
                     double x);

json to_json(const Word& w);

// ---------------------------------------------------------------- interval certificates

struct Segment {
    double lo = 0, hi = 0;
    double length() const { return hi - lo; }
};

struct CertifiedWord {
    std::string target;  // label of the commutator
    int n = 0;
    Word letters;
    long claimed_length = 0;
    double residual_c0 = 0;
    bool length_check = false;
};

struct WordCertificate {
    std::vector<std::string> labels;     // h, h', F, F'
    std::vector<Diffeo1D> generators;
    std::vector<Diffeo1D> inverses;      // explicit inverses of the generators
    std::vector<CertifiedWord> words;
    std::vector<Diffeo1D> targets;       // [g_n, g'_n]
    Segment I, J, J_prime;
    double p = 0;               // attracting point of h
    double h_strength = 0;      // rate of the contraction field
    double h_prime_speed = 0;   // plateau speed of the displacement field
    double tolerance = 0;
    double disjointness_gap = 0;  // min over n < N of h^{n+1}(J') lo - h^n(J') hi, in the direction of p
    bool ok = false;
};

json to_json(const WordCertificate& c);

struct CertificateOptions {
    double tolerance = 1e-6;
    int grid_nodes = 257;
    Exec exec = Exec::serial;
};

/// Words of length 14n + 14 expressing each [g_n, g'_n] over S = {h, h', F, F'}.
/// The pairs must be supported in J, with closure(J) inside I and p in I beyond J.
WordCertificate build_interval_certificate(const std::vector<std::pair<Diffeo1D, Diffeo1D>>& pairs, Segment J,
                                           Segment I, double p, const CertificateOptions& opt = {});

/// Contraction toward p used by the certificate: time-1 map of rate (p - x) on a plateau.
VectorField1D contraction_field(Segment I, Segment J_prime, double p, double* strength = nullptr,
                                const Domain& d = Domain::unit());

/// For each n = 1..n_max, half of the largest d_r(g, id) over a calibration family on J'
/// such that d_r(h^n g h^{-n}, id) < 1/n.
std::vector<double> epsilon_schedule(Segment J_prime, const Diffeo1D& h, int n_max, int r = 3);

// ---------------------------------------------------------------- decompositions

/// f = flow(X_1, t_1) o ... o flow(X_k, t_k); empty means the identity.
struct FlowProduct {
    std::vector<VectorField1D> fields;
    std::vector<double> times;  // empty means all 1
    Domain domain = Domain::unit();

    Diffeo1D map() const;
    int size() const { return static_cast<int>(fields.size()); }
};

struct DecompositionRecord {
    double eta = 0;
    int C = 0;
    std::vector<std::string> labels;
    std::vector<Diffeo1D> generating_set;
    std::vector<Diffeo1D> inverses;
    std::vector<double> generator_distance;  // d_r(s, id) per generator
    Word word;
    long recorded_A_upper = 0;
    int r = 3;
    std::optional<Diffeo1D> target;
    double residual = 0;  // sup |word - target| on the check grid, when a target is known
};

json to_json(const DecompositionRecord& d);

/// Bound on the number of flows: 16 on the circle, 14 on the line.
int default_C0(const Domain& d);

/// Doubling n until every flow(X_i, t_i / n) is eta-close to id; word (s_1)^n ... (s_k)^n.
DecompositionRecord flow_root_decomposition(const FlowProduct& f, double eta, int C0, int r = 3);

/// Residual of a record's word against its target on an evenly spaced grid.
double record_residual(const DecompositionRecord& d, int nodes = 33);

// Upper-bound algebra on records; eta must agree.
DecompositionRecord record_product(const DecompositionRecord& f, const DecompositionRecord& g);
DecompositionRecord record_power(const DecompositionRecord& f, int n);
DecompositionRecord record_conjugate(const DecompositionRecord& f, const DecompositionRecord& h);

struct ReportRow {
    int n = 0;
    long A_upper = 0;
    double ratio = 0;
};

struct DilationRow {
    int n = 0;
    long power = 0;        // 2^n
    long word_length = 0;  // 2n + 1
    double ratio = 0;
    double residual = 0;
};

struct DistortionReport {
    double eta = 0;
    int C = 0;
    std::vector<ReportRow> rows;
    std::vector<DilationRow> dilation;  // present when a conjugator of f to f^2 is given
    std::string note;
};

json to_json(const DistortionReport& r);

/// A-upper(f^n)/n from one flow-root decomposition of f and the power rule. With a
/// conjugator a such that a f a^{-1} = f^2, also verifies f^{2^n} = a^n f a^{-n}.
DistortionReport distortion_report(const FlowProduct& f, const std::vector<int>& n_list, double eta,
                                   const std::optional<Diffeo1D>& square_conjugator = std::nullopt, int r = 3);

}  // namespace diffeo

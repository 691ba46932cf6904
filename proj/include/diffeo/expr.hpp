#pragma once

// Expression trees for vector fields and diffeomorphisms of [a,b] or the circle.

#include <memory>
#include <string>
#include <vector>

#include "diffeo/jet.hpp"
#include "json.hpp"

namespace diffeo {

using json = nlohmann::json;

struct Domain {
    enum class Kind { interval, circle };
    Kind kind = Kind::interval;
    double a = 0.0;
    double b = 1.0;

    static Domain unit() { return {}; }
    static Domain interval(double a, double b) { return {Kind::interval, a, b}; }
    static Domain circle() { return {Kind::circle, 0.0, 1.0}; }
    bool is_circle() const { return kind == Kind::circle; }
    bool contains(double x, double slack = 1e-12) const;
    bool operator==(const Domain&) const = default;
};

/// Declared zero of a field: a point (lo == hi) or a closed interval.
struct ZeroSpec {
    double lo = 0.0;
    double hi = 0.0;
};

class FieldNode;
class DiffeoNode;
using FieldExpr = std::shared_ptr<const FieldNode>;
using DiffeoExpr = std::shared_ptr<const DiffeoNode>;

class VectorField1D {
public:
    VectorField1D() = default;
    VectorField1D(Domain domain, FieldExpr expr, std::vector<ZeroSpec> zeros = {},
                  int smoothness = -1);

    const Domain& domain() const { return domain_; }
    const FieldExpr& expr() const { return expr_; }
    const std::vector<ZeroSpec>& zeros() const { return zeros_; }
    /// -1 means C-infinity.
    int smoothness() const { return smoothness_; }
    VectorField1D with_zeros(std::vector<ZeroSpec> z) const;

    Jet jet(double x, int r) const;
    double operator()(double x) const;
    std::vector<double> breakpoints() const;

private:
    Domain domain_;
    FieldExpr expr_;
    std::vector<ZeroSpec> zeros_;
    int smoothness_ = -1;
};

class Diffeo1D {
public:
    Diffeo1D() = default;
    Diffeo1D(Domain domain, DiffeoExpr expr) : domain_(domain), expr_(std::move(expr)) {}

    const Domain& domain() const { return domain_; }
    const DiffeoExpr& expr() const { return expr_; }

    Jet jet(double x, int r) const;
    double operator()(double x) const;
    std::vector<double> breakpoints() const;

private:
    Domain domain_;
    DiffeoExpr expr_;
};

class FieldNode {
public:
    virtual ~FieldNode() = default;
    /// Jet of the field at x, derivatives in x.
    virtual Jet eval(double x, int r) const = 0;
    virtual std::string kind() const = 0;
    virtual json params() const { return json::object(); }
    virtual json children_json() const { return json::array(); }
    virtual void collect_breakpoints(std::vector<double>&) const {}
};

class DiffeoNode {
public:
    virtual ~DiffeoNode() = default;
    virtual Jet eval(double x, int r) const = 0;
    /// Closed-form inverse node when one is known, else null.
    virtual DiffeoExpr inverse_node() const { return nullptr; }
    virtual std::string kind() const = 0;
    virtual json params() const { return json::object(); }
    virtual json children_json() const { return json::array(); }
    virtual void collect_breakpoints(std::vector<double>&) const {}
};

/// Canonical smooth step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t).
double canonical_step(double t);
/// Derivatives of the canonical step at t, orders 0..r.
Jet canonical_step_jet(double t, int r);

// Field expression builders.
namespace fx {
FieldExpr constant(double c);
/// sum_k coeffs[k] (x - center)^k
FieldExpr polynomial(std::vector<double> coeffs, double center = 0.0);
/// Smooth transition from 0 at x = a to 1 at x = b (decreasing when b < a).
FieldExpr step(double a, double b);
/// 0 outside (a,d), 1 on [b,c], monotone in between.
FieldExpr bump(double a, double b, double c, double d);
/// exp(-1/(x-a)) for x > a when side > 0, exp(-1/(a-x)) for x < a when side < 0.
FieldExpr flat(double a, int side);
FieldExpr exp(FieldExpr child);
/// c0 + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x), k >= 1.
FieldExpr fourier(double c0, std::vector<double> a, std::vector<double> b);
FieldExpr sum(std::vector<FieldExpr> terms);
FieldExpr product(std::vector<FieldExpr> factors);
FieldExpr scale(double c, FieldExpr child);
/// (phi_* X)(y) = s X((y - o)/s) for phi(x) = s x + o.
FieldExpr affine_pushforward(double slope, double offset, FieldExpr child);
/// (phi_* X)(y) = (Dphi X)(phi^{-1}(y)).
FieldExpr pushforward(Diffeo1D phi, FieldExpr child);
/// Piece i is used on [bp[i-1], bp[i]].
FieldExpr piecewise(std::vector<double> breakpoints, std::vector<FieldExpr> pieces);
}  // namespace fx

FieldExpr operator+(FieldExpr a, FieldExpr b);
FieldExpr operator-(FieldExpr a, FieldExpr b);
FieldExpr operator*(FieldExpr a, FieldExpr b);
FieldExpr operator*(double c, FieldExpr a);

// Diffeomorphism builders.
namespace dm {
Diffeo1D identity(Domain d = Domain::unit());
Diffeo1D flow(const VectorField1D& X, double t);
Diffeo1D affine(double slope, double offset, Domain d = Domain::unit());
Diffeo1D homothety(double center, double ratio, Domain d = Domain::unit());
Diffeo1D moebius(double a, double b, double c, double d, Domain dom = Domain::unit());
Diffeo1D rotation(double angle);
Diffeo1D polynomial(std::vector<double> coeffs, double center, Domain d = Domain::unit());
/// compose({f, g, h}) = f o g o h.
Diffeo1D compose(std::vector<Diffeo1D> parts);
/// Inverse with closed-form simplification for flows, affine maps and inverses.
Diffeo1D inverse(const Diffeo1D& f);
/// f^n, n may be negative; flows become a single flow of time n t.
Diffeo1D power(const Diffeo1D& f, int n);
Diffeo1D glue(std::vector<double> breakpoints, std::vector<Diffeo1D> pieces);
/// psi o phi o psi^{-1} with psi(t) = flow(X, t, p); phi acts on an interval of times
/// and the result is the identity outside psi(phi.domain()).
Diffeo1D time_conjugate(const VectorField1D& X, double p, const Diffeo1D& phi);
/// psi o (c .) o psi^{-1}, psi(t) = flow(X, t, p); conjugates flow(X, 1) to flow(X, c).
Diffeo1D time_dilation(const VectorField1D& X, double p, double c);
Diffeo1D from_node(Domain d, DiffeoExpr node);
}  // namespace dm

/// If f is a single flow map, its field and time.
bool as_flow(const Diffeo1D& f, VectorField1D* X, double* t);

/// Max jet mismatch (orders 0..order) between adjacent pieces at the breakpoints
/// of a top-level glue (maps) or piecewise (fields) node; 0 for other nodes.
double glue_mismatch(const Diffeo1D& f, int order);
double glue_mismatch(const VectorField1D& X, int order);

struct CheckReport {
    bool ok = true;
    double worst = 0;
    std::string message;
};

/// |X| < 1e-12 on declared zeros and X != 0 elsewhere on the nodes.
CheckReport check_zero_set(const VectorField1D& X, const std::vector<double>& nodes);
/// Df > 0 on the nodes; endpoints fixed (interval) or F(x+1) = F(x)+1 (circle).
CheckReport check_diffeo(const Diffeo1D& f, const std::vector<double>& nodes, double tol = 1e-10);

/// Commutator f g f^{-1} g^{-1}.
Diffeo1D commutator(const Diffeo1D& f, const Diffeo1D& g);

// Serialization: node = {kind, params, children}.
json to_json(const VectorField1D& X);
json to_json(const Diffeo1D& f);
json expr_to_json(const FieldExpr& e);
json expr_to_json(const DiffeoExpr& e);
json domain_to_json(const Domain& d);
Domain domain_from_json(const json& j);
VectorField1D field_from_json(const json& j);
Diffeo1D diffeo_from_json(const json& j);
FieldExpr field_expr_from_json(const json& j);
DiffeoExpr diffeo_expr_from_json(const json& j, const Domain& d);

/// Stable 64-bit FNV-1a hash of the canonical JSON dump.
std::uint64_t expr_hash(const json& j);

}  // namespace diffeo

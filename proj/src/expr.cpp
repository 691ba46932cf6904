#include "diffeo/expr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"
#include "diffeo/numerics.hpp"

namespace diffeo {

bool Domain::contains(double x, double slack) const {
    if (is_circle()) return std::isfinite(x);
    return x >= a - slack && x <= b + slack;
}

namespace {

double frac_part(double x) { return x - std::floor(x); }

// Jet of exp(-1/t) for t > 0 (zero jet once the value underflows).
Jet flat_jet(double t, int r) {
    if (t <= 0 || std::exp(-1.0 / t) == 0.0) return Jet(t, r);
    Jet id = Jet::identity(t, r);
    return jet_exp(jet_scale(jet_reciprocal(id), -1.0));
}

// Derivatives of sum_k c_k u^k at u, orders 0..r.
Jet poly_jet(const std::vector<double>& c, double center, double x, int r) {
    Jet out(x, r);
    const double u = x - center;
    for (int j = 0; j <= r; ++j) {
        double s = 0;
        for (int k = static_cast<int>(c.size()) - 1; k >= j; --k) {
            double ff = 1;
            for (int m = k - j + 1; m <= k; ++m) ff *= m;
            s = s * u + c[k] * ff;
        }
        // Horner above accumulates c_k k!/(k-j)! u^(k-j) for k from top down to j.
        out[j] = s;
    }
    return out;
}

// Newton-bisection inverse of an increasing map given by jets.
double inverse_value(const DiffeoNode& f, const Domain& d, double x) {
    auto F = [&](double y) { return f.eval(y, 0).value(); };
    auto dF = [&](double y) { return f.eval(y, 1)[1]; };
    double lo, hi;
    if (d.is_circle()) {
        lo = x - 1;
        hi = x + 1;
        for (int i = 0; i < 60 && F(lo) > x; ++i) lo -= 1;
        for (int i = 0; i < 60 && F(hi) < x; ++i) hi += 1;
    } else {
        lo = d.a;
        hi = d.b;
    }
    return solve_increasing(F, dF, x, lo, hi);
}

// ---------------------------------------------------------------- fields

class ConstantField final : public FieldNode {
public:
    explicit ConstantField(double c) : c_(c) {}
    Jet eval(double x, int r) const override { return Jet::constant(x, r, c_); }
    std::string kind() const override { return "constant"; }
    json params() const override { return {{"value", c_}}; }

private:
    double c_;
};

class PolynomialField final : public FieldNode {
public:
    PolynomialField(std::vector<double> c, double center) : c_(std::move(c)), center_(center) {}
    Jet eval(double x, int r) const override { return poly_jet(c_, center_, x, r); }
    std::string kind() const override { return "polynomial"; }
    json params() const override { return {{"coeffs", c_}, {"center", center_}}; }

private:
    std::vector<double> c_;
    double center_;
};

class StepField final : public FieldNode {
public:
    StepField(double a, double b) : a_(a), b_(b) {
        if (a == b) throw config_error("step: endpoints coincide");
    }
    Jet eval(double x, int r) const override {
        const double w = b_ - a_;
        Jet s = canonical_step_jet((x - a_) / w, r);
        Jet out(x, r);
        double scale = 1;
        for (int k = 0; k <= r; ++k) {
            out[k] = s[k] * scale;
            scale /= w;
        }
        return out;
    }
    std::string kind() const override { return "step"; }
    json params() const override { return {{"a", a_}, {"b", b_}}; }
    void collect_breakpoints(std::vector<double>& bp) const override {
        bp.push_back(a_);
        bp.push_back(b_);
    }

private:
    double a_, b_;
};

class BumpField final : public FieldNode {
public:
    BumpField(double a, double b, double c, double d) : a_(a), b_(b), c_(c), d_(d) {
        if (!(a < b && b <= c && c < d)) throw config_error("bump: need a < b <= c < d");
    }
    Jet eval(double x, int r) const override {
        return StepField(a_, b_).eval(x, r) * StepField(d_, c_).eval(x, r);
    }
    std::string kind() const override { return "bump"; }
    json params() const override { return {{"a", a_}, {"b", b_}, {"c", c_}, {"d", d_}}; }
    void collect_breakpoints(std::vector<double>& bp) const override {
        for (double v : {a_, b_, c_, d_}) bp.push_back(v);
    }

private:
    double a_, b_, c_, d_;
};

class FlatField final : public FieldNode {
public:
    FlatField(double a, int side) : a_(a), side_(side >= 0 ? 1 : -1) {}
    Jet eval(double x, int r) const override {
        Jet j = flat_jet(side_ * (x - a_), r);
        Jet out(x, r);
        double sign = 1;
        for (int k = 0; k <= r; ++k) {
            out[k] = sign * j[k];
            sign *= side_;
        }
        return out;
    }
    std::string kind() const override { return "flat"; }
    json params() const override { return {{"a", a_}, {"side", side_}}; }
    void collect_breakpoints(std::vector<double>& bp) const override { bp.push_back(a_); }

private:
    double a_;
    int side_;
};

class ExpField final : public FieldNode {
public:
    explicit ExpField(FieldExpr c) : c_(std::move(c)) {}
    Jet eval(double x, int r) const override { return jet_exp(c_->eval(x, r)); }
    std::string kind() const override { return "exp"; }
    json children_json() const override { return json::array({expr_to_json(c_)}); }
    void collect_breakpoints(std::vector<double>& bp) const override { c_->collect_breakpoints(bp); }

private:
    FieldExpr c_;
};

class FourierField final : public FieldNode {
public:
    FourierField(double c0, std::vector<double> a, std::vector<double> b)
        : c0_(c0), a_(std::move(a)), b_(std::move(b)) {}
    Jet eval(double x, int r) const override {
        Jet out = Jet::constant(x, r, c0_);
        const size_t n = std::max(a_.size(), b_.size());
        for (size_t k = 1; k <= n; ++k) {
            const double w = 2 * std::numbers::pi * static_cast<double>(k);
            const double ak = k <= a_.size() ? a_[k - 1] : 0.0;
            const double bk = k <= b_.size() ? b_[k - 1] : 0.0;
            const double c = std::cos(w * x), s = std::sin(w * x);
            // d^j/dx^j of ak cos + bk sin cycles through four phases.
            const double cyc[4] = {ak * c + bk * s, w * (-ak * s + bk * c), w * w * (-ak * c - bk * s),
                                   w * w * w * (ak * s - bk * c)};
            double wp = 1;
            for (int j = 0; j <= r; ++j) {
                out[j] += cyc[j % 4] * wp;
                if (j % 4 == 3) wp *= w * w * w * w;
            }
        }
        return out;
    }
    std::string kind() const override { return "fourier"; }
    json params() const override { return {{"c0", c0_}, {"a", a_}, {"b", b_}}; }

private:
    double c0_;
    std::vector<double> a_, b_;
};

class SumField final : public FieldNode {
public:
    explicit SumField(std::vector<FieldExpr> t) : t_(std::move(t)) {}
    Jet eval(double x, int r) const override {
        Jet out(x, r);
        for (const auto& t : t_) out = out + t->eval(x, r);
        return out;
    }
    std::string kind() const override { return "sum"; }
    json children_json() const override {
        json c = json::array();
        for (const auto& t : t_) c.push_back(expr_to_json(t));
        return c;
    }
    void collect_breakpoints(std::vector<double>& bp) const override {
        for (const auto& t : t_) t->collect_breakpoints(bp);
    }

private:
    std::vector<FieldExpr> t_;
};

class ProductField final : public FieldNode {
public:
    explicit ProductField(std::vector<FieldExpr> t) : t_(std::move(t)) {}
    Jet eval(double x, int r) const override {
        Jet out = Jet::constant(x, r, 1.0);
        for (const auto& t : t_) out = out * t->eval(x, r);
        return out;
    }
    std::string kind() const override { return "product"; }
    json children_json() const override {
        json c = json::array();
        for (const auto& t : t_) c.push_back(expr_to_json(t));
        return c;
    }
    void collect_breakpoints(std::vector<double>& bp) const override {
        for (const auto& t : t_) t->collect_breakpoints(bp);
    }

private:
    std::vector<FieldExpr> t_;
};

class ScaleField final : public FieldNode {
public:
    ScaleField(double c, FieldExpr e) : c_(c), e_(std::move(e)) {}
    Jet eval(double x, int r) const override { return jet_scale(e_->eval(x, r), c_); }
    std::string kind() const override { return "scale"; }
    json params() const override { return {{"c", c_}}; }
    json children_json() const override { return json::array({expr_to_json(e_)}); }
    void collect_breakpoints(std::vector<double>& bp) const override { e_->collect_breakpoints(bp); }

private:
    double c_;
    FieldExpr e_;
};

class AffinePushforwardField final : public FieldNode {
public:
    AffinePushforwardField(double s, double o, FieldExpr e) : s_(s), o_(o), e_(std::move(e)) {
        if (!(s > 0)) throw config_error("affine_pushforward: slope must be positive");
    }
    Jet eval(double y, int r) const override {
        Jet j = e_->eval((y - o_) / s_, r);
        Jet out(y, r);
        double f = s_;
        for (int k = 0; k <= r; ++k) {
            out[k] = f * j[k];
            f /= s_;
        }
        return out;
    }
    std::string kind() const override { return "affine_pushforward"; }
    json params() const override { return {{"slope", s_}, {"offset", o_}}; }
    json children_json() const override { return json::array({expr_to_json(e_)}); }
    void collect_breakpoints(std::vector<double>& bp) const override {
        std::vector<double> inner;
        e_->collect_breakpoints(inner);
        for (double v : inner) bp.push_back(s_ * v + o_);
    }

private:
    double s_, o_;
    FieldExpr e_;
};

class PushforwardField final : public FieldNode {
public:
    PushforwardField(Diffeo1D phi, FieldExpr e) : phi_(std::move(phi)), e_(std::move(e)) {}
    Jet eval(double y, int r) const override {
        if (r + 1 > kMaxOrder) throw config_error("pushforward: order exceeds jet capacity");
        const double x = inverse_value(*phi_.expr(), phi_.domain(), y);
        Jet pj = phi_.expr()->eval(x, r + 1);
        Jet w = jet_derivative(pj) * e_->eval(x, r);
        Jet inv = jet_invert(pj.truncated(r)).rebased(y);
        Jet out = jet_apply(w.coeffs(), inv);
        return out;
    }
    std::string kind() const override { return "pushforward"; }
    json params() const override { return {{"domain", domain_to_json(phi_.domain())}}; }
    json children_json() const override {
        return json::array({expr_to_json(phi_.expr()), expr_to_json(e_)});
    }
    void collect_breakpoints(std::vector<double>& bp) const override {
        std::vector<double> inner;
        e_->collect_breakpoints(inner);
        phi_.expr()->collect_breakpoints(inner);
        for (double v : inner) {
            if (phi_.domain().contains(v)) bp.push_back(phi_(v));
        }
    }

private:
    Diffeo1D phi_;
    FieldExpr e_;
};

size_t piece_index(const std::vector<double>& bp, double x) {
    return static_cast<size_t>(std::upper_bound(bp.begin(), bp.end(), x) - bp.begin());
}

class PiecewiseField final : public FieldNode {
public:
    PiecewiseField(std::vector<double> bp, std::vector<FieldExpr> p) : bp_(std::move(bp)), p_(std::move(p)) {
        if (p_.size() != bp_.size() + 1) throw config_error("piecewise: need one more piece than breakpoints");
        if (!std::is_sorted(bp_.begin(), bp_.end())) throw config_error("piecewise: breakpoints unsorted");
    }
    Jet eval(double x, int r) const override { return p_[piece_index(bp_, x)]->eval(x, r); }
    std::string kind() const override { return "piecewise"; }
    json params() const override { return {{"breakpoints", bp_}}; }
    json children_json() const override {
        json c = json::array();
        for (const auto& t : p_) c.push_back(expr_to_json(t));
        return c;
    }
    void collect_breakpoints(std::vector<double>& bp) const override {
        bp.insert(bp.end(), bp_.begin(), bp_.end());
        for (const auto& t : p_) t->collect_breakpoints(bp);
    }
    const std::vector<double>& breakpoints() const { return bp_; }
    const std::vector<FieldExpr>& pieces() const { return p_; }

private:
    std::vector<double> bp_;
    std::vector<FieldExpr> p_;
};

// ---------------------------------------------------------------- maps

class IdentityMap final : public DiffeoNode {
public:
    Jet eval(double x, int r) const override { return Jet::identity(x, r); }
    std::string kind() const override { return "identity"; }
};

class FlowMap final : public DiffeoNode {
public:
    FlowMap(VectorField1D X, double t) : X_(std::move(X)), t_(t) {}
    Jet eval(double x, int r) const override { return flow(X_, t_, x, r); }
    std::string kind() const override { return "flow"; }
    json params() const override {
        json z = json::array();
        for (const auto& s : X_.zeros()) z.push_back(json::array({s.lo, s.hi}));
        json p = {{"t", t_}, {"zeros", z}};
        if (X_.smoothness() >= 0) p["smoothness"] = X_.smoothness();
        return p;
    }
    json children_json() const override { return json::array({expr_to_json(X_.expr())}); }
    void collect_breakpoints(std::vector<double>& bp) const override {
        X_.expr()->collect_breakpoints(bp);
    }
    const VectorField1D& field() const { return X_; }
    double time() const { return t_; }

private:
    VectorField1D X_;
    double t_;
};

class TimeConjugateMap final : public DiffeoNode {
public:
    TimeConjugateMap(VectorField1D X, double p, Diffeo1D phi) : X_(std::move(X)), p_(p), phi_(std::move(phi)) {
        if (phi_.domain().is_circle()) throw config_error("time_conjugate: phi must act on an interval of times");
        const double u = flow(X_, phi_.domain().a, p_, 0).value();
        const double v = flow(X_, phi_.domain().b, p_, 0).value();
        lo_ = std::min(u, v);
        hi_ = std::max(u, v);
    }
    Jet eval(double x, int r) const override {
        if (x <= lo_ || x >= hi_) return Jet::identity(x, r);
        const double s = transit_time(X_, p_, x);
        Jet psi_inv = jet_invert(orbit_jet(X_, x, s, r));
        Jet mid = jet_apply(phi_.jet(s, r).coeffs(), psi_inv);
        const double s2 = mid.value();
        const double y = s2 == s ? x : flow(X_, s2 - s, x, 0).value();
        return jet_apply(orbit_jet(X_, y, s2, r).coeffs(), mid);
    }
    DiffeoExpr inverse_node() const override {
        return std::make_shared<TimeConjugateMap>(X_, p_, dm::inverse(phi_));
    }
    std::string kind() const override { return "time_conjugate"; }
    json params() const override {
        json z = json::array();
        for (const auto& q : X_.zeros()) z.push_back(json::array({q.lo, q.hi}));
        json out = {{"p", p_}, {"zeros", z}, {"window", domain_to_json(phi_.domain())}};
        if (X_.smoothness() >= 0) out["smoothness"] = X_.smoothness();
        return out;
    }
    json children_json() const override {
        return json::array({expr_to_json(X_.expr()), expr_to_json(phi_.expr())});
    }

private:
    VectorField1D X_;
    double p_;
    Diffeo1D phi_;
    double lo_ = 0, hi_ = 0;
};

// psi o (c .) o psi^{-1} with psi(t) = flow(X, t, p): conjugates the time-1 map of X to its time-c map.
class TimeDilationMap final : public DiffeoNode {
public:
    TimeDilationMap(VectorField1D X, double p, double c) : X_(std::move(X)), p_(p), c_(c) {
        if (!(c > 0)) throw config_error("time_dilation: factor must be positive");
        if (X_(p_) == 0) throw config_error("time_dilation: base point is a zero of X");
    }
    Jet eval(double x, int r) const override {
        if (X_(x) == 0) {
            if (r > 0) throw numeric_error("time_dilation: derivatives at a zero of X are not available");
            return Jet::identity(x, 0);
        }
        const double s = transit_time(X_, p_, x);
        Jet time = jet_scale(jet_invert(orbit_jet(X_, x, s, r)), c_);
        const double y = c_ == 1 ? x : flow(X_, (c_ - 1) * s, x, 0).value();
        return jet_apply(orbit_jet(X_, y, c_ * s, r).coeffs(), time);
    }
    DiffeoExpr inverse_node() const override { return std::make_shared<TimeDilationMap>(X_, p_, 1 / c_); }
    std::string kind() const override { return "time_dilation"; }
    json params() const override {
        json z = json::array();
        for (const auto& q : X_.zeros()) z.push_back(json::array({q.lo, q.hi}));
        return {{"p", p_}, {"c", c_}, {"zeros", z}};
    }
    json children_json() const override { return json::array({expr_to_json(X_.expr())}); }

private:
    VectorField1D X_;
    double p_, c_;
};

class AffineMap final : public DiffeoNode {
public:
    AffineMap(double s, double o) : s_(s), o_(o) {
        if (!(s > 0)) throw config_error("affine: slope must be positive");
    }
    Jet eval(double x, int r) const override {
        Jet j(x, r);
        j[0] = s_ * x + o_;
        if (r >= 1) j[1] = s_;
        return j;
    }
    std::string kind() const override { return "affine"; }
    json params() const override { return {{"slope", s_}, {"offset", o_}}; }
    double slope() const { return s_; }
    double offset() const { return o_; }

private:
    double s_, o_;
};

class HomothetyMap final : public DiffeoNode {
public:
    HomothetyMap(double c, double k) : c_(c), k_(k) {
        if (!(k > 0)) throw config_error("homothety: ratio must be positive");
    }
    Jet eval(double x, int r) const override {
        Jet j(x, r);
        j[0] = c_ + k_ * (x - c_);
        if (r >= 1) j[1] = k_;
        return j;
    }
    std::string kind() const override { return "homothety"; }
    json params() const override { return {{"center", c_}, {"ratio", k_}}; }
    double center() const { return c_; }
    double ratio() const { return k_; }

private:
    double c_, k_;
};

class MoebiusMap final : public DiffeoNode {
public:
    MoebiusMap(double a, double b, double c, double d) : a_(a), b_(b), c_(c), d_(d) {
        if (!(a * d - b * c > 0)) throw config_error("moebius: need ad - bc > 0");
    }
    Jet eval(double x, int r) const override {
        Jet j(x, r);
        const double den = c_ * x + d_;
        if (den == 0) throw numeric_error("moebius: pole in domain");
        j[0] = (a_ * x + b_) / den;
        const double det = a_ * d_ - b_ * c_;
        double term = det / (den * den);  // k = 1
        for (int k = 1; k <= r; ++k) {
            j[k] = term;
            term *= -static_cast<double>(k + 1) * c_ / den;
        }
        return j;
    }
    std::string kind() const override { return "moebius"; }
    json params() const override { return {{"a", a_}, {"b", b_}, {"c", c_}, {"d", d_}}; }

private:
    double a_, b_, c_, d_;
};

class RotationMap final : public DiffeoNode {
public:
    explicit RotationMap(double a) : a_(a) {}
    Jet eval(double x, int r) const override {
        Jet j = Jet::identity(x, r);
        j[0] += a_;
        return j;
    }
    std::string kind() const override { return "rotation"; }
    json params() const override { return {{"angle", a_}}; }

private:
    double a_;
};

class PolynomialMap final : public DiffeoNode {
public:
    PolynomialMap(std::vector<double> c, double center) : c_(std::move(c)), center_(center) {}
    Jet eval(double x, int r) const override { return poly_jet(c_, center_, x, r); }
    std::string kind() const override { return "polynomial"; }
    json params() const override { return {{"coeffs", c_}, {"center", center_}}; }

private:
    std::vector<double> c_;
    double center_;
};

class ComposeMap final : public DiffeoNode {
public:
    explicit ComposeMap(std::vector<DiffeoExpr> p) : p_(std::move(p)) {}
    Jet eval(double x, int r) const override {
        if (p_.empty()) return Jet::identity(x, r);
        Jet j = p_.back()->eval(x, r);
        for (size_t i = p_.size() - 1; i-- > 0;) j = jet_apply(p_[i]->eval(j.value(), r).coeffs(), j);
        return j;
    }
    std::string kind() const override { return "compose"; }
    json children_json() const override {
        json c = json::array();
        for (const auto& t : p_) c.push_back(expr_to_json(t));
        return c;
    }
    void collect_breakpoints(std::vector<double>&) const override {}
    const std::vector<DiffeoExpr>& parts() const { return p_; }

private:
    std::vector<DiffeoExpr> p_;
};

class InverseMap final : public DiffeoNode {
public:
    InverseMap(DiffeoExpr c, Domain d) : c_(std::move(c)), d_(d) {}
    Jet eval(double x, int r) const override {
        const double y = inverse_value(*c_, d_, x);
        return jet_invert(c_->eval(y, r)).rebased(x);
    }
    std::string kind() const override { return "inverse"; }
    json children_json() const override { return json::array({expr_to_json(c_)}); }
    const DiffeoExpr& child() const { return c_; }

private:
    DiffeoExpr c_;
    Domain d_;
};

class PowerMap final : public DiffeoNode {
public:
    // child already inverted when the exponent is negative; n stores the sign for output.
    PowerMap(DiffeoExpr step, DiffeoExpr original, int n)
        : step_(std::move(step)), orig_(std::move(original)), n_(n) {}
    Jet eval(double x, int r) const override {
        Jet j = Jet::identity(x, r);
        for (int i = 0; i < std::abs(n_); ++i) j = jet_apply(step_->eval(j.value(), r).coeffs(), j);
        return j;
    }
    std::string kind() const override { return "power"; }
    json params() const override { return {{"n", n_}}; }
    json children_json() const override { return json::array({expr_to_json(orig_)}); }

private:
    DiffeoExpr step_, orig_;
    int n_;
};

class GlueMap final : public DiffeoNode {
public:
    GlueMap(std::vector<double> bp, std::vector<DiffeoExpr> p) : bp_(std::move(bp)), p_(std::move(p)) {
        if (p_.size() != bp_.size() + 1) throw config_error("glue: need one more piece than breakpoints");
        if (!std::is_sorted(bp_.begin(), bp_.end())) throw config_error("glue: breakpoints unsorted");
    }
    Jet eval(double x, int r) const override { return p_[piece_index(bp_, x)]->eval(x, r); }
    std::string kind() const override { return "glue"; }
    json params() const override { return {{"breakpoints", bp_}}; }
    json children_json() const override {
        json c = json::array();
        for (const auto& t : p_) c.push_back(expr_to_json(t));
        return c;
    }
    void collect_breakpoints(std::vector<double>& bp) const override {
        bp.insert(bp.end(), bp_.begin(), bp_.end());
    }
    const std::vector<double>& breakpoints() const { return bp_; }
    const std::vector<DiffeoExpr>& pieces() const { return p_; }

private:
    std::vector<double> bp_;
    std::vector<DiffeoExpr> p_;
};

}  // namespace

// ---------------------------------------------------------------- public

double canonical_step(double t) { return canonical_step_jet(t, 0).value(); }

Jet canonical_step_jet(double t, int r) {
    if (t <= 0) return Jet(t, r);
    if (t >= 1) return Jet::constant(t, r, 1.0);
    Jet s0 = flat_jet(t, r);
    Jet s1 = flat_jet(1 - t, r);
    for (int k = 1; k <= r; k += 2) s1[k] = -s1[k];  // chain rule for 1 - t
    s1 = s1.rebased(t);
    return jet_div(s0, s0 + s1);
}

VectorField1D::VectorField1D(Domain domain, FieldExpr expr, std::vector<ZeroSpec> zeros, int smoothness)
    : domain_(domain), expr_(std::move(expr)), zeros_(std::move(zeros)), smoothness_(smoothness) {
    if (!expr_) throw config_error("vector field without expression");
}

VectorField1D VectorField1D::with_zeros(std::vector<ZeroSpec> z) const {
    VectorField1D c = *this;
    c.zeros_ = std::move(z);
    return c;
}

Jet VectorField1D::jet(double x, int r) const {
    check_order(r);
    if (domain_.is_circle()) return expr_->eval(frac_part(x), r).rebased(x);
    return expr_->eval(x, r);
}

double VectorField1D::operator()(double x) const { return jet(x, 0).value(); }

namespace {
std::vector<double> tidy_breakpoints(std::vector<double> bp, const Domain& d) {
    std::vector<double> out;
    for (double v : bp) {
        if (d.is_circle()) v = frac_part(v);
        if (v >= d.a && v <= d.b) out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}
}  // namespace

std::vector<double> VectorField1D::breakpoints() const {
    std::vector<double> bp;
    expr_->collect_breakpoints(bp);
    return tidy_breakpoints(std::move(bp), domain_);
}

Jet Diffeo1D::jet(double x, int r) const {
    check_order(r);
    if (!expr_) throw config_error("diffeomorphism without expression");
    return expr_->eval(x, r);
}

double Diffeo1D::operator()(double x) const { return jet(x, 0).value(); }

std::vector<double> Diffeo1D::breakpoints() const {
    std::vector<double> bp;
    expr_->collect_breakpoints(bp);
    return tidy_breakpoints(std::move(bp), domain_);
}

namespace fx {
FieldExpr constant(double c) { return std::make_shared<ConstantField>(c); }
FieldExpr polynomial(std::vector<double> coeffs, double center) {
    return std::make_shared<PolynomialField>(std::move(coeffs), center);
}
FieldExpr step(double a, double b) { return std::make_shared<StepField>(a, b); }
FieldExpr bump(double a, double b, double c, double d) { return std::make_shared<BumpField>(a, b, c, d); }
FieldExpr flat(double a, int side) { return std::make_shared<FlatField>(a, side); }
FieldExpr exp(FieldExpr child) { return std::make_shared<ExpField>(std::move(child)); }
FieldExpr fourier(double c0, std::vector<double> a, std::vector<double> b) {
    return std::make_shared<FourierField>(c0, std::move(a), std::move(b));
}
FieldExpr sum(std::vector<FieldExpr> terms) { return std::make_shared<SumField>(std::move(terms)); }
FieldExpr product(std::vector<FieldExpr> factors) {
    return std::make_shared<ProductField>(std::move(factors));
}
FieldExpr scale(double c, FieldExpr child) { return std::make_shared<ScaleField>(c, std::move(child)); }
FieldExpr affine_pushforward(double slope, double offset, FieldExpr child) {
    return std::make_shared<AffinePushforwardField>(slope, offset, std::move(child));
}
FieldExpr pushforward(Diffeo1D phi, FieldExpr child) {
    return std::make_shared<PushforwardField>(std::move(phi), std::move(child));
}
FieldExpr piecewise(std::vector<double> breakpoints, std::vector<FieldExpr> pieces) {
    return std::make_shared<PiecewiseField>(std::move(breakpoints), std::move(pieces));
}
}  // namespace fx

FieldExpr operator+(FieldExpr a, FieldExpr b) { return fx::sum({std::move(a), std::move(b)}); }
FieldExpr operator-(FieldExpr a, FieldExpr b) {
    return fx::sum({std::move(a), fx::scale(-1.0, std::move(b))});
}
FieldExpr operator*(FieldExpr a, FieldExpr b) { return fx::product({std::move(a), std::move(b)}); }
FieldExpr operator*(double c, FieldExpr a) { return fx::scale(c, std::move(a)); }

namespace dm {
Diffeo1D identity(Domain d) { return {d, std::make_shared<IdentityMap>()}; }
Diffeo1D flow(const VectorField1D& X, double t) { return {X.domain(), std::make_shared<FlowMap>(X, t)}; }
Diffeo1D affine(double slope, double offset, Domain d) {
    return {d, std::make_shared<AffineMap>(slope, offset)};
}
Diffeo1D homothety(double center, double ratio, Domain d) {
    return {d, std::make_shared<HomothetyMap>(center, ratio)};
}
Diffeo1D moebius(double a, double b, double c, double d, Domain dom) {
    return {dom, std::make_shared<MoebiusMap>(a, b, c, d)};
}
Diffeo1D rotation(double angle) { return {Domain::circle(), std::make_shared<RotationMap>(angle)}; }
Diffeo1D polynomial(std::vector<double> coeffs, double center, Domain d) {
    return {d, std::make_shared<PolynomialMap>(std::move(coeffs), center)};
}
Diffeo1D compose(std::vector<Diffeo1D> parts) {
    if (parts.empty()) return identity();
    if (parts.size() == 1) return parts[0];
    std::vector<DiffeoExpr> e;
    for (const auto& p : parts) {
        if (!(p.domain() == parts[0].domain())) throw config_error("compose: domains differ");
        e.push_back(p.expr());
    }
    return {parts[0].domain(), std::make_shared<ComposeMap>(std::move(e))};
}
Diffeo1D inverse(const Diffeo1D& f) {
    const DiffeoNode* n = f.expr().get();
    if (dynamic_cast<const IdentityMap*>(n)) return f;
    if (auto e = n->inverse_node()) return {f.domain(), e};
    if (auto* fl = dynamic_cast<const FlowMap*>(n)) return flow(fl->field(), -fl->time());
    if (auto* af = dynamic_cast<const AffineMap*>(n)) {
        return affine(1.0 / af->slope(), -af->offset() / af->slope(), f.domain());
    }
    if (auto* h = dynamic_cast<const HomothetyMap*>(n)) return homothety(h->center(), 1.0 / h->ratio(), f.domain());
    if (auto* rot = dynamic_cast<const RotationMap*>(n)) return rotation(-rot->params()["angle"].get<double>());
    if (auto* inv = dynamic_cast<const InverseMap*>(n)) return {f.domain(), inv->child()};
    if (auto* c = dynamic_cast<const ComposeMap*>(n)) {
        std::vector<Diffeo1D> parts;
        for (auto it = c->parts().rbegin(); it != c->parts().rend(); ++it) {
            parts.push_back(inverse(Diffeo1D(f.domain(), *it)));
        }
        return compose(std::move(parts));
    }
    return {f.domain(), std::make_shared<InverseMap>(f.expr(), f.domain())};
}
Diffeo1D power(const Diffeo1D& f, int n) {
    if (n == 0) return identity(f.domain());
    if (n == 1) return f;
    if (auto* fl = dynamic_cast<const FlowMap*>(f.expr().get())) return flow(fl->field(), n * fl->time());
    DiffeoExpr step = n > 0 ? f.expr() : inverse(f).expr();
    return {f.domain(), std::make_shared<PowerMap>(step, f.expr(), n)};
}
Diffeo1D glue(std::vector<double> breakpoints, std::vector<Diffeo1D> pieces) {
    if (pieces.empty()) throw config_error("glue: no pieces");
    std::vector<DiffeoExpr> e;
    for (const auto& p : pieces) e.push_back(p.expr());
    return {pieces[0].domain(), std::make_shared<GlueMap>(std::move(breakpoints), std::move(e))};
}
Diffeo1D from_node(Domain d, DiffeoExpr node) { return {d, std::move(node)}; }
Diffeo1D time_conjugate(const VectorField1D& X, double p, const Diffeo1D& phi) {
    return {X.domain(), std::make_shared<TimeConjugateMap>(X, p, phi)};
}
Diffeo1D time_dilation(const VectorField1D& X, double p, double c) {
    return {X.domain(), std::make_shared<TimeDilationMap>(X, p, c)};
}
}  // namespace dm

bool as_flow(const Diffeo1D& f, VectorField1D* X, double* t) {
    auto* fl = dynamic_cast<const FlowMap*>(f.expr().get());
    if (!fl) return false;
    if (X) *X = fl->field();
    if (t) *t = fl->time();
    return true;
}

double glue_mismatch(const Diffeo1D& f, int order) {
    auto* g = dynamic_cast<const GlueMap*>(f.expr().get());
    if (!g) return 0.0;
    double m = 0;
    for (size_t i = 0; i < g->breakpoints().size(); ++i) {
        const double x = g->breakpoints()[i];
        m = std::max(m, max_abs_diff(g->pieces()[i]->eval(x, order), g->pieces()[i + 1]->eval(x, order)));
    }
    return m;
}

double glue_mismatch(const VectorField1D& X, int order) {
    auto* p = dynamic_cast<const PiecewiseField*>(X.expr().get());
    if (!p) return 0.0;
    double m = 0;
    for (size_t i = 0; i < p->breakpoints().size(); ++i) {
        const double x = p->breakpoints()[i];
        m = std::max(m, max_abs_diff(p->pieces()[i]->eval(x, order), p->pieces()[i + 1]->eval(x, order)));
    }
    return m;
}

CheckReport check_zero_set(const VectorField1D& X, const std::vector<double>& nodes) {
    CheckReport rep;
    for (double x : nodes) {
        bool declared = false;
        for (const auto& z : X.zeros()) declared = declared || (x >= z.lo && x <= z.hi);
        const double v = std::abs(X(x));
        if (declared && v >= 1e-12) {
            rep.ok = false;
            rep.worst = std::max(rep.worst, v);
            rep.message = "field nonzero on declared zero at x = " + std::to_string(x);
        } else if (!declared && v == 0.0) {
            rep.ok = false;
            rep.message = "undeclared zero at x = " + std::to_string(x);
        }
    }
    return rep;
}

CheckReport check_diffeo(const Diffeo1D& f, const std::vector<double>& nodes, double tol) {
    CheckReport rep;
    for (double x : nodes) {
        Jet j = f.jet(x, 1);
        if (!(j[1] > 0)) {
            rep.ok = false;
            rep.message = "derivative not positive at x = " + std::to_string(x);
            return rep;
        }
        if (f.domain().is_circle()) {
            Jet k = f.jet(x + 1, 1);
            const double e = std::max(std::abs(k[0] - j[0] - 1), std::abs(k[1] - j[1]));
            rep.worst = std::max(rep.worst, e);
        }
    }
    if (!f.domain().is_circle()) {
        const Domain& d = f.domain();
        rep.worst = std::max(std::abs(f(d.a) - d.a), std::abs(f(d.b) - d.b));
    }
    if (rep.worst > tol) {
        rep.ok = false;
        rep.message = f.domain().is_circle() ? "lift is not degree one" : "endpoints not fixed";
    }
    return rep;
}

Diffeo1D commutator(const Diffeo1D& f, const Diffeo1D& g) {
    return dm::compose({f, g, dm::inverse(f), dm::inverse(g)});
}

// ---------------------------------------------------------------- json

json expr_to_json(const FieldExpr& e) {
    return {{"kind", e->kind()}, {"params", e->params()}, {"children", e->children_json()}};
}

json expr_to_json(const DiffeoExpr& e) {
    return {{"kind", e->kind()}, {"params", e->params()}, {"children", e->children_json()}};
}

json domain_to_json(const Domain& d) {
    if (d.is_circle()) return {{"type", "circle"}};
    return {{"type", "interval"}, {"a", d.a}, {"b", d.b}};
}

Domain domain_from_json(const json& j) {
    if (j.is_null()) return Domain::unit();
    const std::string type = j.value("type", "interval");
    if (type == "circle") return Domain::circle();
    if (type != "interval") throw schema_error("unknown domain type '" + type + "'");
    return Domain::interval(j.value("a", 0.0), j.value("b", 1.0));
}

json to_json(const VectorField1D& X) {
    json z = json::array();
    for (const auto& s : X.zeros()) z.push_back(json::array({s.lo, s.hi}));
    json j = {{"type", "field"}, {"domain", domain_to_json(X.domain())}, {"zeros", z}, {"expr", expr_to_json(X.expr())}};
    if (X.smoothness() >= 0) j["smoothness"] = X.smoothness();
    return j;
}

json to_json(const Diffeo1D& f) {
    return {{"type", "diffeo"}, {"domain", domain_to_json(f.domain())}, {"expr", expr_to_json(f.expr())}};
}

namespace {

const json& need(const json& j, const char* key, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key)) throw schema_error(ctx + ": missing '" + key + "'");
    return j.at(key);
}

double num(const json& p, const char* key, const std::string& ctx) {
    const json& v = need(p, key, ctx);
    if (!v.is_number()) throw schema_error(ctx + ": '" + key + "' must be a number");
    return v.get<double>();
}

std::vector<double> nums(const json& p, const char* key, const std::string& ctx) {
    const json& v = need(p, key, ctx);
    if (!v.is_array()) throw schema_error(ctx + ": '" + key + "' must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw schema_error(ctx + ": '" + key + "' must hold numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<ZeroSpec> zeros_from_json(const json& j) {
    std::vector<ZeroSpec> z;
    if (j.is_null()) return z;
    for (const auto& e : j) {
        if (e.is_number()) z.push_back({e.get<double>(), e.get<double>()});
        else if (e.is_array() && e.size() == 2) z.push_back({e[0].get<double>(), e[1].get<double>()});
        else throw schema_error("zero set entries must be numbers or [lo, hi] pairs");
    }
    return z;
}

json children_of(const json& j) {
    if (!j.contains("children")) return json::array();
    const json& c = j.at("children");
    if (!c.is_array()) throw schema_error("'children' must be an array");
    return c;
}

}  // namespace

FieldExpr field_expr_from_json(const json& j) {
    const std::string kind = need(j, "kind", "field node").get<std::string>();
    const json p = j.value("params", json::object());
    const json ch = children_of(j);
    const std::string ctx = "field node '" + kind + "'";
    auto child = [&](size_t i) {
        if (i >= ch.size()) throw schema_error(ctx + ": missing child " + std::to_string(i));
        return field_expr_from_json(ch[i]);
    };
    auto all_children = [&] {
        std::vector<FieldExpr> v;
        for (const auto& c : ch) v.push_back(field_expr_from_json(c));
        return v;
    };
    if (kind == "constant") return fx::constant(num(p, "value", ctx));
    if (kind == "polynomial") return fx::polynomial(nums(p, "coeffs", ctx), p.value("center", 0.0));
    if (kind == "step") return fx::step(num(p, "a", ctx), num(p, "b", ctx));
    if (kind == "bump") return fx::bump(num(p, "a", ctx), num(p, "b", ctx), num(p, "c", ctx), num(p, "d", ctx));
    if (kind == "flat") return fx::flat(num(p, "a", ctx), static_cast<int>(p.value("side", 1)));
    if (kind == "exp") return fx::exp(child(0));
    if (kind == "fourier") {
        return fx::fourier(p.value("c0", 0.0), p.contains("a") ? nums(p, "a", ctx) : std::vector<double>{},
                           p.contains("b") ? nums(p, "b", ctx) : std::vector<double>{});
    }
    if (kind == "sum") return fx::sum(all_children());
    if (kind == "product") return fx::product(all_children());
    if (kind == "scale") return fx::scale(num(p, "c", ctx), child(0));
    if (kind == "affine_pushforward") {
        return fx::affine_pushforward(num(p, "slope", ctx), num(p, "offset", ctx), child(0));
    }
    if (kind == "pushforward") {
        if (ch.size() != 2) throw schema_error(ctx + ": needs [diffeo, field] children");
        const Domain d = domain_from_json(p.value("domain", json()));
        return fx::pushforward(Diffeo1D(d, diffeo_expr_from_json(ch[0], d)), field_expr_from_json(ch[1]));
    }
    if (kind == "piecewise") return fx::piecewise(nums(p, "breakpoints", ctx), all_children());
    throw schema_error("unknown field kind '" + kind + "'");
}

DiffeoExpr rational_node_from_json(const std::string& kind, const json& params, const json& children,
                                   const Domain& d);
DiffeoExpr conjugacy_node_from_json(const std::string& kind, const json& params, const json& children,
                                    const Domain& d);

DiffeoExpr diffeo_expr_from_json(const json& j, const Domain& d) {
    const std::string kind = need(j, "kind", "diffeo node").get<std::string>();
    const json p = j.value("params", json::object());
    const json ch = children_of(j);
    const std::string ctx = "diffeo node '" + kind + "'";
    auto child = [&](size_t i) {
        if (i >= ch.size()) throw schema_error(ctx + ": missing child " + std::to_string(i));
        return diffeo_expr_from_json(ch[i], d);
    };
    auto all_children = [&] {
        std::vector<DiffeoExpr> v;
        for (const auto& c : ch) v.push_back(diffeo_expr_from_json(c, d));
        return v;
    };
    if (kind == "identity") return std::make_shared<IdentityMap>();
    if (kind == "flow") {
        if (ch.size() != 1) throw schema_error(ctx + ": needs one field child");
        VectorField1D X(d, field_expr_from_json(ch[0]), zeros_from_json(p.value("zeros", json())),
                        p.value("smoothness", -1));
        return std::make_shared<FlowMap>(X, num(p, "t", ctx));
    }
    if (kind == "affine") return std::make_shared<AffineMap>(num(p, "slope", ctx), num(p, "offset", ctx));
    if (kind == "homothety") return std::make_shared<HomothetyMap>(num(p, "center", ctx), num(p, "ratio", ctx));
    if (kind == "moebius") {
        return std::make_shared<MoebiusMap>(num(p, "a", ctx), num(p, "b", ctx), num(p, "c", ctx), num(p, "d", ctx));
    }
    if (kind == "rotation") return std::make_shared<RotationMap>(num(p, "angle", ctx));
    if (kind == "polynomial") return std::make_shared<PolynomialMap>(nums(p, "coeffs", ctx), p.value("center", 0.0));
    if (kind == "compose") return std::make_shared<ComposeMap>(all_children());
    if (kind == "inverse") return std::make_shared<InverseMap>(child(0), d);
    if (kind == "power") {
        const int n = static_cast<int>(num(p, "n", ctx));
        return dm::power(Diffeo1D(d, child(0)), n).expr();
    }
    if (kind == "glue") return std::make_shared<GlueMap>(nums(p, "breakpoints", ctx), all_children());
    if (kind == "time_conjugate") {
        if (ch.size() != 2) throw schema_error(ctx + ": needs [field, phi] children");
        VectorField1D X(d, field_expr_from_json(ch[0]), zeros_from_json(p.value("zeros", json())),
                        p.value("smoothness", -1));
        const Domain w = domain_from_json(need(p, "window", ctx));
        return std::make_shared<TimeConjugateMap>(X, num(p, "p", ctx), Diffeo1D(w, diffeo_expr_from_json(ch[1], w)));
    }
    if (kind == "time_dilation") {
        if (ch.size() != 1) throw schema_error(ctx + ": needs a field child");
        VectorField1D X(d, field_expr_from_json(ch[0]), zeros_from_json(p.value("zeros", json())));
        return std::make_shared<TimeDilationMap>(X, num(p, "p", ctx), num(p, "c", ctx));
    }
    if (kind == "orbit_conjugacy" || kind == "flow_conjugacy") return conjugacy_node_from_json(kind, p, ch, d);
    if (kind == "rotation_average" || kind == "seed_blend" || kind == "periodic_glue") {
        return rational_node_from_json(kind, p, ch, d);
    }
    throw schema_error("unknown diffeo kind '" + kind + "'");
}

VectorField1D field_from_json(const json& j) {
    return VectorField1D(domain_from_json(j.value("domain", json())), field_expr_from_json(need(j, "expr", "field")),
                         zeros_from_json(j.value("zeros", json())), j.value("smoothness", -1));
}

Diffeo1D diffeo_from_json(const json& j) {
    const Domain d = domain_from_json(j.value("domain", json()));
    return Diffeo1D(d, diffeo_expr_from_json(need(j, "expr", "diffeo"), d));
}

std::uint64_t expr_hash(const json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace diffeo

#include "diffeo/conjugacy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"

namespace diffeo {

double sigma_offset(const VectorField1D& f_field, const VectorField1D& g_field, const Diffeo1D& phi0,
                    const Diffeo1D& phi1, double x0, double x1) {
    return transit_time(f_field, x0, x1) - transit_time(g_field, phi0(x0), phi1(x1));
}

namespace {

// Jet of h^k at x, k may be negative; flows collapse to a single integration.
Jet iterate_jet(const Diffeo1D& h, int k, double x, int r) {
    if (k == 0) return Jet::identity(x, r);
    VectorField1D X;
    double t = 0;
    if (as_flow(h, &X, &t)) return flow(X, k * t, x, r);
    const Diffeo1D step = k > 0 ? h : dm::inverse(h);
    Jet J = Jet::identity(x, r);
    for (int i = 0; i < std::abs(k); ++i) J = jet_apply(step.jet(J.value(), r).coeffs(), J);
    return J;
}

class OrbitConjugator final : public DiffeoNode {
public:
    OrbitConjugator(Diffeo1D f, Diffeo1D g, Diffeo1D phi0, double base, int max_iter)
        : f_(std::move(f)), g_(std::move(g)), phi0_(std::move(phi0)), base_(base), max_iter_(max_iter) {
        const double fb = f_(base_);
        if (fb == base_) throw numeric_error("orbit_conjugator: base point is fixed by f");
        upper_ = std::max(base_, fb);
        toward_zero_ = fb < base_ ? 1 : -1;  // exponent of f that moves points toward 0
        toward_step_ = toward_zero_ > 0 ? f_ : dm::inverse(f_);
    }

    Jet eval(double x, int r) const override {
        int k = 0;
        double y = x;
        while (y > upper_) {
            if (++k > max_iter_) {
                throw numeric_error("orbit_conjugator: orbit of " + std::to_string(x) + " did not reach the germ region within " +
                                    std::to_string(max_iter_) + " iterations");
            }
            y = toward_step_(y);
        }
        const int e = toward_zero_ * k;
        Jet to_germ = iterate_jet(f_, e, x, r);
        Jet mid = jet_apply(phi0_.jet(to_germ.value(), r).coeffs(), to_germ);
        return jet_apply(iterate_jet(g_, -e, mid.value(), r).coeffs(), mid);
    }
    std::string kind() const override { return "orbit_conjugacy"; }
    json params() const override { return {{"base_point", base_}, {"max_iter", max_iter_}}; }
    json children_json() const override {
        return json::array({expr_to_json(f_.expr()), expr_to_json(g_.expr()), expr_to_json(phi0_.expr())});
    }

private:
    Diffeo1D f_, g_, phi0_, toward_step_;
    double base_, upper_;
    int toward_zero_;
    int max_iter_;
};

class FlowConjugator final : public DiffeoNode {
public:
    FlowConjugator(VectorField1D X, VectorField1D Y, double p, double q, std::optional<GermPiece> lo,
                   std::optional<GermPiece> hi)
        : X_(std::move(X)), Y_(std::move(Y)), p_(p), q_(q), lo_(std::move(lo)), hi_(std::move(hi)) {}

    Jet eval(double x, int r) const override {
        if (lo_ && x <= lo_->limit) return lo_->map.jet(x, r);
        if (hi_ && x >= hi_->limit) return hi_->map.jet(x, r);
        const double s = transit_time(X_, p_, x);
        Jet time = jet_invert(orbit_jet(X_, x, s, r));
        double y = flow(Y_, s, q_, 0).value();
        // Newton polish on transit_time(Y, q, y) = s; quadrature is sharper than long integrations.
        if (y != q_) y -= (transit_time(Y_, q_, y) - s) * Y_(y);
        return jet_apply(orbit_jet(Y_, y, s, r).coeffs(), time);
    }
    DiffeoExpr inverse_node() const override {
        auto flip = [](const std::optional<GermPiece>& g) -> std::optional<GermPiece> {
            if (!g) return std::nullopt;
            return GermPiece{g->map(g->limit), dm::inverse(g->map)};
        };
        return std::make_shared<FlowConjugator>(Y_, X_, q_, p_, flip(lo_), flip(hi_));
    }
    std::string kind() const override { return "flow_conjugacy"; }
    json params() const override {
        json j = {{"p", p_}, {"q", q_}, {"X", to_json(X_)}, {"Y", to_json(Y_)}};
        if (lo_) j["lo_limit"] = lo_->limit;
        if (hi_) j["hi_limit"] = hi_->limit;
        return j;
    }
    json children_json() const override {
        json c = json::array();
        if (lo_) c.push_back(expr_to_json(lo_->map.expr()));
        if (hi_) c.push_back(expr_to_json(hi_->map.expr()));
        return c;
    }
    void collect_breakpoints(std::vector<double>& bp) const override {
        if (lo_) bp.push_back(lo_->limit);
        if (hi_) bp.push_back(hi_->limit);
    }

private:
    VectorField1D X_, Y_;
    double p_, q_;
    std::optional<GermPiece> lo_, hi_;
};

DiffeoExpr flow_conjugacy_from_json(const json& params, const json& children, const Domain& d) {
    for (const char* k : {"p", "q", "X", "Y"}) {
        if (!params.contains(k)) throw schema_error(std::string("flow_conjugacy: missing '") + k + "'");
    }
    size_t next = 0;
    auto germ = [&](const char* key) -> std::optional<GermPiece> {
        if (!params.contains(key)) return std::nullopt;
        if (!children.is_array() || next >= children.size()) throw schema_error("flow_conjugacy: missing germ child");
        return GermPiece{params.at(key).get<double>(), Diffeo1D(d, diffeo_expr_from_json(children[next++], d))};
    };
    auto lo = germ("lo_limit");
    auto hi = germ("hi_limit");
    return std::make_shared<FlowConjugator>(field_from_json(params.at("X")), field_from_json(params.at("Y")),
                                            params.at("p").get<double>(), params.at("q").get<double>(), lo, hi);
}

}  // namespace

Diffeo1D flow_conjugator(const VectorField1D& X, const VectorField1D& Y, double p, double q,
                         std::optional<GermPiece> lo, std::optional<GermPiece> hi) {
    if (X(p) == 0 || Y(q) == 0) throw config_error("flow_conjugator: base points must not be zeros");
    return dm::from_node(X.domain(), std::make_shared<FlowConjugator>(X, Y, p, q, std::move(lo), std::move(hi)));
}

DiffeoExpr conjugacy_node_from_json(const std::string& kind, const json& params, const json& children,
                                    const Domain& d) {
    if (kind == "flow_conjugacy") return flow_conjugacy_from_json(params, children, d);
    if (!children.is_array() || children.size() != 3) {
        throw schema_error("orbit_conjugacy: needs [f, g, phi0] children");
    }
    if (!params.contains("base_point")) throw schema_error("orbit_conjugacy: missing 'base_point'");
    Diffeo1D f(d, diffeo_expr_from_json(children[0], d));
    Diffeo1D g(d, diffeo_expr_from_json(children[1], d));
    Diffeo1D p(d, diffeo_expr_from_json(children[2], d));
    return std::make_shared<OrbitConjugator>(f, g, p, params.at("base_point").get<double>(),
                                             params.value("max_iter", 10000));
}

Diffeo1D orbit_conjugator(const Diffeo1D& f, const Diffeo1D& g, const Diffeo1D& phi0, double base_point,
                          int max_iter) {
    return dm::from_node(f.domain(), std::make_shared<OrbitConjugator>(f, g, phi0, base_point, max_iter));
}

json to_json(const ConjugacyWitness& w) {
    return {{"sigma", w.sigma},           {"residual_c0", w.residual_c0}, {"residual_cr", w.residual_cr},
            {"order", w.order},           {"germ_residual", w.germ_residual},
            {"grid_size", w.grid_size},   {"grid", to_json(w.grid)}};
}

ConjugacyWitness synthesize_conjugacy(const Diffeo1D& f, const Diffeo1D& g, const Diffeo1D& phi0,
                                      double base_point, const ConjugacyOptions& opt) {
    ConjugacyWitness w;
    w.order = opt.order;
    w.grid = opt.grid;
    const double upper = std::max(base_point, f(base_point));
    double germ = 0;
    for (int i = 0; i <= opt.germ_nodes; ++i) {
        const double x = upper * i / opt.germ_nodes;
        germ = std::max(germ, std::abs(phi0(f(x)) - g(phi0(x))));
    }
    w.germ_residual = germ;
    if (germ >= opt.germ_tol) {
        throw numeric_error("synthesize_conjugacy: germ residual " + std::to_string(germ) + " exceeds tolerance");
    }
    w.phi = orbit_conjugator(f, g, phi0, base_point, opt.max_iter);
    auto nodes = grid_nodes(opt.grid);
    w.grid_size = static_cast<int>(nodes.size());
    const int r = opt.order;
    double c0 = 0, cr = 0;
    for (double x : nodes) {
        Jet fx = f.jet(x, r);
        Jet lhs = jet_apply(w.phi.jet(fx.value(), r).coeffs(), fx);
        Jet px = w.phi.jet(x, r);
        Jet rhs = jet_apply(g.jet(px.value(), r).coeffs(), px);
        c0 = std::max(c0, std::abs(lhs[0] - rhs[0]));
        cr = std::max(cr, max_abs_diff(lhs, rhs));
    }
    w.residual_c0 = c0;
    w.residual_cr = cr;
    return w;
}

}  // namespace diffeo

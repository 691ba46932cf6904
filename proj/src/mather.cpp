#include "diffeo/mather.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"

namespace diffeo {

std::vector<double> mather_nodes(int n, double a, double b) {
    if (n < 2) throw config_error("mather: at least 2 t-nodes required");
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = a + (b - a) * i / (n - 1);
    return t;
}

MatherSample mather_map(const VectorField1D& X_left, const VectorField1D& Y_right, double p, double q,
                        const std::vector<double>& t_nodes, Exec exec) {
    if (t_nodes.empty()) throw config_error("mather_map: no t-nodes");
    MatherSample m;
    m.p = p;
    m.q = q;
    m.t_nodes = t_nodes;
    auto jets = sample([&](double t) { return Jet::constant(t, 0, mather_value(X_left, Y_right, p, q, t)); },
                       t_nodes, exec);
    double sum = 0;
    for (size_t i = 0; i < t_nodes.size(); ++i) {
        m.values.push_back(jets[i].value());
        sum += m.values[i] - t_nodes[i];
    }
    m.translation_fit = sum / t_nodes.size();
    for (size_t i = 0; i < t_nodes.size(); ++i) {
        m.max_deviation = std::max(m.max_deviation, std::abs(m.values[i] - t_nodes[i] - m.translation_fit));
        for (size_t j = i + 1; j < t_nodes.size(); ++j) {
            if (std::abs(t_nodes[j] - t_nodes[i] - 1.0) < 1e-12) {
                m.commutation_defect = std::max(m.commutation_defect, std::abs(m.values[j] - m.values[i] - 1.0));
            }
        }
    }
    return m;
}

void MatherSample::write_csv(std::ostream& os) const {
    os << "t,M\n";
    char buf[80];
    for (size_t i = 0; i < t_nodes.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t_nodes[i], values[i]);
        os << buf;
    }
}

json to_json(const MatherSample& m) {
    return {{"p", m.p},
            {"q", m.q},
            {"t_nodes", m.t_nodes.size()},
            {"t_range", json::array({m.t_nodes.front(), m.t_nodes.back()})},
            {"translation_fit", m.translation_fit},
            {"max_deviation", m.max_deviation},
            {"commutation_defect", m.commutation_defect}};
}

Triviality is_trivial(const MatherSample& m, double tol) { return {m.max_deviation < tol, m.max_deviation}; }

namespace {

class GeneratingField final : public FieldNode {
public:
    GeneratingField(Diffeo1D g, VectorField1D X, bool left, double limit, int max_iter)
        : g_(std::move(g)), X_(std::move(X)), left_(left), limit_(limit), max_iter_(max_iter) {
        const bool moves_right = X_(limit_) > 0;
        // Step toward the germ endpoint.
        step_ = (moves_right == left_) ? dm::inverse(g_) : g_;
    }
    Jet eval(double x, int r) const override {
        if (in_germ(x)) return X_.jet(x, r);
        if (r + 1 > kMaxOrder) throw config_error("generating_field: order exceeds jet capacity");
        Jet K = Jet::identity(x, r + 1);
        int n = 0;
        while (!in_germ(K.value())) {
            if (++n > max_iter_) {
                throw numeric_error("generating_field: orbit of " + std::to_string(x) +
                                    " did not reach the germ region");
            }
            K = jet_apply(step_.jet(K.value(), r + 1).coeffs(), K);
        }
        Jet num = jet_apply(X_.jet(K.value(), r).coeffs(), K.truncated(r));
        return jet_div(num, jet_derivative(K));
    }
    // Flow and transit time transported through the germ region, where the field is X.
    double flow_point(double t, double x) const {
        int n = 0;
        double y = x, z = 0;
        while (true) {
            if (in_germ(y) && in_germ(z = ::diffeo::flow(X_, t, y, 0).value())) break;
            if (++n > max_iter_) throw numeric_error("generating_field: flow orbit did not reach the germ region");
            y = step_(y);
        }
        const Diffeo1D back = dm::inverse(step_);
        for (int i = 0; i < n; ++i) z = back(z);
        return z;
    }
    double transit(double a, double b) const {
        for (int n = 0; !in_germ(a) || !in_germ(b); ++n) {
            if (n > max_iter_) throw numeric_error("generating_field: transit orbit did not reach the germ region");
            a = step_(a);
            b = step_(b);
        }
        return transit_time(X_, a, b);
    }
    std::string kind() const override { return "generating_field"; }
    json params() const override { return {{"left", left_}, {"limit", limit_}}; }
    json children_json() const override { return json::array({expr_to_json(g_.expr()), expr_to_json(X_.expr())}); }

private:
    bool in_germ(double x) const { return left_ ? x <= limit_ : x >= limit_; }

    Diffeo1D g_, step_;
    VectorField1D X_;
    bool left_;
    double limit_;
    int max_iter_;
};

// 1-periodic extension of a window map phi on [alpha - 1, alpha].
double periodic(const Diffeo1D& phi, double alpha, double s) {
    const double k = std::floor(s - (alpha - 1));
    return phi(s - k) + k;
}

void check_windows(const std::vector<WindowPerturbation>& perts) {
    for (size_t i = 0; i < perts.size(); ++i) {
        const auto& w = perts[i];
        const std::string id = "perturbation " + std::to_string(i + 1);
        if (i == 0 && w.alpha > 0) throw config_error(id + ": first window must satisfy alpha <= 0");
        if (i > 0 && !(w.alpha < perts[i - 1].alpha - 1)) {
            throw config_error(id + ": windows must satisfy alpha_{i+1} < alpha_i - 1");
        }
        const Domain& d = w.phi.domain();
        if (d.is_circle() || std::abs(d.a - (w.alpha - 1)) > 1e-12 || std::abs(d.b - w.alpha) > 1e-12) {
            throw config_error(id + ": phi must act on the window [alpha - 1, alpha]");
        }
        for (double e : {d.a, d.b}) {
            Jet j = w.phi.jet(e, 3);
            const double defect =
                std::max({std::abs(j[0] - e), std::abs(j[1] - 1), std::abs(j[2]), std::abs(j[3])});
            if (defect > 1e-9) throw invariant_error(id + ": phi is not the identity at the window ends");
        }
    }
}

}  // namespace

double mather_value(const VectorField1D& X_left, const VectorField1D& Y_right, double p, double q, double t) {
    auto* gx = dynamic_cast<const GeneratingField*>(X_left.expr().get());
    auto* gy = dynamic_cast<const GeneratingField*>(Y_right.expr().get());
    const double z = gx ? gx->flow_point(t, p) : flow(X_left, t, p, 0).value();
    return gy ? gy->transit(q, z) : transit_time(Y_right, q, z);
}

VectorField1D generating_field(const Diffeo1D& g, const VectorField1D& X, bool left, double limit, int max_iter) {
    return VectorField1D(X.domain(), std::make_shared<GeneratingField>(g, X, left, limit, max_iter), X.zeros(),
                         X.smoothness());
}

PerturbedMap perturb_in_windows(const FragmatData& data, const std::vector<WindowPerturbation>& perts) {
    check_windows(perts);
    PerturbedMap out;
    std::vector<Diffeo1D> parts = {dm::flow(data.X, 1.0)};
    if (perts.empty()) {
        out.g = parts[0];
        out.X_left = out.Y_right = data.X;
        out.support_lo = out.support_hi = data.p;
        return out;
    }
    out.support_lo = 1e300;
    out.support_hi = -1e300;
    for (const auto& w : perts) {
        parts.push_back(dm::time_conjugate(data.X, data.p, w.phi));
        for (double t : {w.alpha - 1, w.alpha}) {
            const double x = flow(data.X, t, data.p, 0).value();
            out.support_lo = std::min(out.support_lo, x);
            out.support_hi = std::max(out.support_hi, x);
        }
    }
    out.g = dm::compose(parts);
    out.X_left = generating_field(out.g, data.X, true, out.support_lo);
    out.Y_right = generating_field(out.g, data.X, false, out.support_hi);
    return out;
}

json to_json(const FragmatReport& r) {
    return {{"s_nodes", r.s_nodes.size()},
            {"s_range", json::array({r.s_nodes.front(), r.s_nodes.back()})},
            {"tau", r.tau},
            {"mismatch", r.mismatch}};
}

FragmatReport fragmat_compose_check(const FragmatData& data, const std::vector<WindowPerturbation>& perts,
                                    const std::vector<double>& s_nodes, Exec exec) {
    PerturbedMap pm = perturb_in_windows(data, perts);
    std::vector<Diffeo1D> inverses;
    for (const auto& w : perts) inverses.push_back(dm::inverse(w.phi));
    FragmatReport rep;
    rep.s_nodes = s_nodes;
    // M_g^{-1}(s) - tau = M_f^{-1}(Phi^{-1}(s)), the inverted form of M_g R_tau = Phi M_f.
    auto lhs = sample(
        [&](double s) { return Jet::constant(s, 0, mather_value(pm.Y_right, pm.X_left, data.p, data.p, s)); },
        s_nodes, exec);
    auto rhs = sample(
        [&](double s) {
            double u = s;
            for (size_t i = 0; i < perts.size(); ++i) u = periodic(inverses[i], perts[i].alpha, u);
            return Jet::constant(s, 0, mather_value(data.X, data.X, data.p, data.p, u));
        },
        s_nodes, exec);
    double sum = 0;
    for (size_t i = 0; i < s_nodes.size(); ++i) {
        rep.lhs.push_back(lhs[i].value());
        rep.rhs.push_back(rhs[i].value());
        sum += rep.lhs[i] - rep.rhs[i];
    }
    rep.tau = sum / s_nodes.size();
    for (size_t i = 0; i < s_nodes.size(); ++i) {
        rep.mismatch = std::max(rep.mismatch, std::abs(rep.lhs[i] - rep.rhs[i] - rep.tau));
    }
    return rep;
}

}  // namespace diffeo

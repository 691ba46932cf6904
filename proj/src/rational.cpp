#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "diffeo/errors.hpp"
#include "diffeo/functionals.hpp"
#include "diffeo/reduce.hpp"

namespace diffeo {

namespace {

// (1/q) sum_{k<q} (h^k - k p/q): conjugates a lift with h^q = id + p to x -> x + p/q.
class RotationAverage final : public DiffeoNode {
public:
    RotationAverage(Diffeo1D h, int p, int q) : h_(std::move(h)), p_(p), q_(q) {}
    Jet eval(double x, int r) const override {
        Jet J = Jet::identity(x, r);
        Jet sum = Jet::constant(x, r, 0.0);
        for (int k = 0; k < q_; ++k) {
            sum = sum + jet_shift(J, -static_cast<double>(k) * p_ / q_);
            J = jet_apply(h_.jet(J.value(), r).coeffs(), J);
        }
        return jet_scale(sum, 1.0 / q_);
    }
    std::string kind() const override { return "rotation_average"; }
    json params() const override { return {{"p", p_}, {"q", q_}}; }
    json children_json() const override { return json::array({expr_to_json(h_.expr())}); }

private:
    Diffeo1D h_;
    int p_, q_;
};

// x + S(x) (g(x) - x), S rising from 0 at a to 1 at b.
class SeedBlend final : public DiffeoNode {
public:
    SeedBlend(Diffeo1D g, double a, double b) : g_(std::move(g)), a_(a), b_(b) {}
    Jet eval(double x, int r) const override {
        const Jet S = fx::step(a_, b_)->eval(x, r);
        const Jet id = Jet::identity(x, r);
        return id + S * (g_.jet(x, r) - id);
    }
    std::string kind() const override { return "seed_blend"; }
    json params() const override { return {{"a", a_}, {"b", b_}}; }
    json children_json() const override { return json::array({expr_to_json(g_.expr())}); }

private:
    Diffeo1D g_;
    double a_, b_;
};

// Glue on [0,1) extended to a lift by F(x + n) = F(x) + n.
class PeriodicGlue final : public DiffeoNode {
public:
    PeriodicGlue(std::vector<double> bp, std::vector<Diffeo1D> pieces) : bp_(std::move(bp)), p_(std::move(pieces)) {
        if (p_.size() != bp_.size() + 1) throw config_error("periodic_glue: need one more piece than breakpoints");
    }
    Jet eval(double x, int r) const override {
        const double n = std::floor(x);
        const double y = x - n;
        const size_t i = std::upper_bound(bp_.begin(), bp_.end(), y) - bp_.begin();
        return jet_shift(p_[i].jet(y, r).rebased(x), n);
    }
    std::string kind() const override { return "periodic_glue"; }
    json params() const override { return {{"breakpoints", bp_}}; }
    json children_json() const override {
        json c = json::array();
        for (const auto& p : p_) c.push_back(expr_to_json(p.expr()));
        return c;
    }
    void collect_breakpoints(std::vector<double>& bp) const override {
        bp.insert(bp.end(), bp_.begin(), bp_.end());
    }
    const std::vector<Diffeo1D>& pieces() const { return p_; }

private:
    std::vector<double> bp_;
    std::vector<Diffeo1D> p_;
};

std::vector<double> circle_nodes(int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back((i + 0.5) / n);
    return v;
}

double sup_diff(const Diffeo1D& a, const Diffeo1D& b, const std::vector<double>& nodes) {
    double m = 0;
    for (double x : nodes) m = std::max(m, std::abs(a(x) - b(x)));
    return m;
}

int inverse_mod(int p, int q) {
    for (int u = 1; u < q; ++u) {
        if ((static_cast<long>(u) * p) % q == 1 % q) return u;
    }
    return 1;
}

}  // namespace

DiffeoExpr rational_node_from_json(const std::string& kind, const json& params, const json& children, const Domain& d) {
    auto child = [&](size_t i) {
        if (!children.is_array() || i >= children.size()) throw schema_error(kind + ": missing child");
        return Diffeo1D(d, diffeo_expr_from_json(children[i], d));
    };
    if (kind == "rotation_average") {
        return std::make_shared<RotationAverage>(child(0), params.at("p").get<int>(), params.at("q").get<int>());
    }
    if (kind == "seed_blend") {
        return std::make_shared<SeedBlend>(child(0), params.at("a").get<double>(), params.at("b").get<double>());
    }
    std::vector<Diffeo1D> pieces;
    for (size_t i = 0; i < children.size(); ++i) pieces.push_back(child(i));
    return std::make_shared<PeriodicGlue>(params.at("breakpoints").get<std::vector<double>>(), pieces);
}

json to_json(const NormalizedRational& n) {
    return {{"root_residual", n.root_residual},
            {"commutation_residual", n.commutation_residual},
            {"conjugacy_residual", n.conjugacy_residual},
            {"jet_mismatch", n.jet_mismatch},
            {"support_defect", n.support_defect},
            {"conjugator", to_json(n.conjugator)}};
}

NormalizedRational normalize_rational(const Diffeo1D& f, int p, int q, const RationalData& data, int r) {
    check_order(r);
    if (!f.domain().is_circle()) throw config_error("normalize_rational: f must be a circle map");
    if (q < 1 || std::gcd(p, q) != 1) throw config_error("normalize_rational: p/q must be in lowest terms");
    const double rho = p / static_cast<double>(q);
    const RotationNumber rn = rotation_number(f, 4000);
    if (std::abs(rn.value() - rho - std::round(rn.value() - rho)) > 1e-3) {
        throw config_error("normalize_rational: rotation number " + std::to_string(rn.value()) + " is not " +
                           std::to_string(p) + "/" + std::to_string(q));
    }
    const Diffeo1D R = dm::rotation(rho);
    const Diffeo1D Rinv = dm::rotation(-rho);
    const auto nodes = circle_nodes(256);
    NormalizedRational out;

    if (!data.iti) {
        // Root g = psi flow(X, 1) psi^{-1}, well defined when X commutes with R.
        for (double x : nodes) {
            if (std::abs(data.X(x + 1.0 / q) - data.X(x)) > 1e-12) {
                throw config_error("normalize_rational: the generating field must commute with R_{p/q}");
            }
        }
        const bool has_psi = static_cast<bool>(data.psi.expr());
        const Diffeo1D F = dm::flow(data.X, 1.0);
        const Diffeo1D g = has_psi ? dm::compose({data.psi, F, dm::inverse(data.psi)}) : F;
        const Diffeo1D h = dm::compose({f, dm::inverse(g)});
        Diffeo1D hq = h;
        for (int k = 1; k < q; ++k) hq = dm::compose({h, hq});
        double root = 0;
        for (double x : nodes) root = std::max(root, std::abs(hq(x) - x - p));
        out.root_residual = root;
        if (root > 1e-7) throw numeric_error("normalize_rational: |h^q - id| = " + std::to_string(root));
        const Diffeo1D phi = q == 1 ? dm::identity(Domain::circle())
                                    : dm::from_node(Domain::circle(), std::make_shared<RotationAverage>(h, p, q));
        const Diffeo1D phinv = dm::inverse(phi);
        out.conjugator = phi;
        out.root = g;
        out.h = dm::compose({phi, g, phinv});
        out.normalized = dm::compose({phi, f, phinv});
        out.commutation_residual = sup_diff(dm::compose({out.h, R}), dm::compose({R, out.h}), nodes);
        out.conjugacy_residual = sup_diff(out.normalized, dm::compose({R, out.h}), nodes);
        return out;
    }

    // f^q ITI at 0 and the orbit of 0 is the orbit of R.
    Diffeo1D fq = f;
    for (int k = 1; k < q; ++k) fq = dm::compose({f, fq});
    const Jet jq = fq.jet(0.0, r);
    double iti = std::abs(jq[0] - std::round(jq[0]));
    if (r >= 1) iti = std::max(iti, std::abs(jq[1] - 1));
    for (int k = 2; k <= r; ++k) iti = std::max(iti, std::abs(jq[k]));
    if (iti > 1e-9) throw config_error("normalize_rational: f^q is not ITI at 0");
    for (int k = 0; k < q; ++k) {
        const double x = static_cast<double>(k) / q, y = f(x) - x - rho;
        if (std::abs(y - std::round(y)) > 1e-9) throw config_error("normalize_rational: orbit of 0 is not that of R");
    }

    // Seed on I = [0, 1/q]: identity near 0, f^u R^{-1/q} near 1/q.
    const int u = inverse_mod(((p % q) + q) % q, q);
    const double Q = 1.0 / q;
    const Diffeo1D fu = dm::power(f, u);
    const double shift_u = std::round(fu(0.0) - Q);
    const Diffeo1D g = dm::compose({dm::affine(1, -shift_u, Domain::circle()), fu, dm::rotation(-Q)});
    const Diffeo1D psi = dm::from_node(Domain::circle(), std::make_shared<SeedBlend>(g, 0.25 * Q, 0.75 * Q));
    for (int i = 0; i <= 256; ++i) {
        if (psi.jet(Q * i / 256, 1)[1] <= 0) throw numeric_error("normalize_rational: seed is not monotone");
    }

    // phi = f^k psi R^{-k} on R^k(I).
    std::vector<double> bp;
    std::vector<Diffeo1D> pieces;
    for (int j = 0; j < q; ++j) {
        if (j > 0) bp.push_back(j * Q);
        const int k = static_cast<int>((static_cast<long>(j) * u) % q);
        const Diffeo1D fk = dm::power(f, k);
        const double m = std::round(fk(0.0) - j * Q);
        pieces.push_back(dm::compose({dm::affine(1, -m, Domain::circle()), fk, psi, dm::rotation(-j * Q)}));
    }
    const auto glue = std::make_shared<PeriodicGlue>(bp, pieces);
    const Diffeo1D phi = dm::from_node(Domain::circle(), glue);
    double mismatch = 0;
    for (int j = 0; j < q; ++j) {
        const double x = (j + 1) * Q;
        const Jet left = pieces[j].jet(x, r);
        const Jet right = j + 1 < q ? pieces[j + 1].jet(x, r) : jet_shift(pieces[0].jet(0.0, r), 1.0).rebased(x);
        mismatch = std::max(mismatch, max_abs_diff(left, right));
    }
    out.jet_mismatch = mismatch;
    if (mismatch > 1e-7) throw numeric_error("normalize_rational: jet mismatch " + std::to_string(mismatch));

    const Diffeo1D phinv = dm::inverse(phi);
    out.conjugator = phinv;
    out.root = psi;
    out.normalized = dm::compose({phinv, f, phi});
    out.h = dm::compose({out.normalized, Rinv});
    out.conjugacy_residual = sup_diff(dm::compose({phi, out.normalized}), dm::compose({f, phi}), nodes);
    double support = 0;
    for (int i = 0; i <= 256; ++i) {
        const double x = Q + (1 - Q) * i / 256;
        support = std::max(support, std::abs(out.h(x) - x));
    }
    out.support_defect = support;
    return out;
}

}  // namespace diffeo

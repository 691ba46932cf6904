#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "diffeo/conjugacy.hpp"
#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"
#include "diffeo/numerics.hpp"
#include "diffeo/reduce.hpp"

namespace diffeo {

namespace {

struct PolyPiece {
    double center;
    std::vector<double> c;
};

// x -> 1 - p(1 - x), written around the mirrored center.
PolyPiece mirrored(const PolyPiece& p) {
    PolyPiece m{1.0 - p.center, p.c};
    m.c[0] = 1.0 - p.c[0];
    for (size_t k = 1; k < m.c.size(); ++k) m.c[k] = (k % 2 == 1 ? 1.0 : -1.0) * p.c[k];
    return m;
}

// u + rho0 (X0 - u) + rho1 (X1 - u), X0 and X1 the homothetic images of X at 0 and 1.
FieldExpr flattened(const FieldExpr& X, double lambda, double u) {
    FieldExpr X0 = fx::affine_pushforward(lambda, 0.0, X);
    FieldExpr X1 = fx::affine_pushforward(lambda, 1.0 - lambda, X);
    FieldExpr c = fx::constant(u);
    return c + fx::step(0.25, 0.125) * (X0 - c) + fx::step(0.75, 0.875) * (X1 - c);
}

void check_flatten_input(const VectorField1D& X) {
    if (X.domain() != Domain::unit()) throw config_error("flatten_field: X must live on [0,1]");
    for (double e : {0.0, 1.0}) {
        Jet j = X.jet(e, 1);
        if (std::abs(j[0]) > 1e-14 || std::abs(j[1]) > 1e-12) {
            throw config_error("flatten_field: X must vanish with zero derivative at 0 and 1");
        }
    }
    const double s = X(0.5);
    for (int i = 1; i < 512; ++i) {
        const double v = X(i / 512.0);
        if (v == 0 || (v > 0) != (s > 0)) throw config_error("flatten_field: X vanishes inside (0,1)");
    }
}

struct Attempt {
    FieldExpr Y;
    double u = 0, residual = 0, norm = 0;
};

Attempt attempt(const VectorField1D& Xp, double lambda, int r, const std::vector<double>& nodes) {
    const Diffeo1D phi = flatten_map(lambda);
    double sup = 0;
    auto probe = [&](double x) { sup = std::max(sup, phi.jet(x, 1)[1] * Xp(x)); };
    for (double x : nodes) probe(x);
    for (int i = 1; i < 64; ++i) {
        probe(i / (64 * lambda));
        probe(1 - i / (64 * lambda));
    }
    const double x0 = 1.0 / (8 * lambda);
    const double tx = transit_time(Xp, x0, 1 - x0);
    auto F = [&](double u) {
        VectorField1D Y(Domain::unit(), flattened(Xp.expr(), lambda, u));
        return transit_time(Y, 0.125, 0.875) - tx;
    };
    for (int k = 0; F(sup) > 0; ++k, sup *= 2) {
        if (k == 8) {
            throw numeric_error("flatten_field: no bracket for u at lambda = " + std::to_string(lambda) +
                                " (lambda too small)");
        }
    }
    double lo = sup;
    for (int k = 0; F(lo) <= 0; ++k) {
        if (k > 200) throw numeric_error("flatten_field: transit equality has no lower bracket");
        lo *= 0.5;
    }
    Attempt a;
    a.u = bisect_root(F, lo, sup, 1e-17 * sup, 300);
    a.residual = std::abs(F(a.u));
    a.Y = flattened(Xp.expr(), lambda, a.u);
    a.norm = field_cr_norm(VectorField1D(Domain::unit(), a.Y), r, nodes);
    return a;
}

}  // namespace

Diffeo1D flatten_map(double lambda) {
    if (!(lambda > 1)) throw config_error("flatten_map: lambda must exceed 1");
    const double kappa = 1.0 / (2 * lambda - 2);
    const double x1 = 1.0 / (4 * lambda);  // transition band [x1, 2 x1]
    // Dphi = kappa + (lambda - kappa) S with S a plateau followed by a quintic drop;
    // the band average of Dphi must be lambda - 1.
    const double m = (lambda - 1 - kappa) / (lambda - kappa);
    const double a = m >= 0.5 ? 2 * m - 1 : 0.0;
    const double c = m >= 0.5 ? 1.0 : 2 * m;
    const double xa = x1 + a * x1, xc = x1 + c * x1, w = xc - xa;
    const double d = lambda - kappa;
    const PolyPiece head{0.0, {0.0, lambda}};
    const PolyPiece drop{xa,
                         {lambda * xa, lambda, 0.0, 0.0, -2.5 * d / std::pow(w, 3), 3 * d / std::pow(w, 4),
                          -d / std::pow(w, 5)}};
    const PolyPiece mid{0.5, {0.5, kappa}};
    std::vector<PolyPiece> pieces = {head, drop, mid, mirrored(drop), mirrored(head)};
    std::vector<Diffeo1D> maps;
    for (const auto& p : pieces) maps.push_back(dm::polynomial(p.c, p.center));
    return dm::glue({xa, xc, 1 - xc, 1 - xa}, maps);
}

FlattenResult flatten_field(const VectorField1D& X, double eta, int r, double lambda, const FlattenOptions& opt) {
    check_order(r);
    if (!(eta > 0)) throw config_error("flatten_field: eta must be positive");
    check_flatten_input(X);
    const double s = X(0.5) > 0 ? 1.0 : -1.0;
    const VectorField1D Xp = s > 0 ? X : VectorField1D(X.domain(), fx::scale(-1.0, X.expr()), X.zeros());
    const auto nodes = grid_nodes(GridSpec{0.0, 1.0, opt.grid_nodes, true, false, opt.grid_nodes},
                                  {0.125, 0.25, 0.75, 0.875});

    FlattenResult out;
    out.eta = eta;
    out.r = r;
    Attempt best;
    if (lambda > 0) {
        best = attempt(Xp, lambda, r, nodes);
        out.sweep.push_back({lambda, best.norm});
        if (best.norm >= eta) {
            throw numeric_error("flatten_field: lambda = " + std::to_string(lambda) +
                                " is below lambda_X (||Y||_r = " + std::to_string(best.norm) + ")");
        }
    } else {
        for (lambda = 2;; lambda *= 2) {
            if (lambda > opt.lambda_max) {
                throw numeric_error("flatten_field: no lambda up to " + std::to_string(opt.lambda_max) +
                                    " reaches ||Y||_r < eta");
            }
            try {
                best = attempt(Xp, lambda, r, nodes);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::numeric) throw;
                out.sweep.push_back({lambda, INFINITY});
                continue;
            }
            out.sweep.push_back({lambda, best.norm});
            if (best.norm < eta) break;
        }
    }
    out.lambda = lambda;
    out.u = s * best.u;
    out.transit_match_residual = best.residual;
    out.y_norm = best.norm;
    out.Y = VectorField1D(Domain::unit(), s > 0 ? best.Y : fx::scale(-1.0, best.Y), {{0, 0}, {1, 1}});

    const double p = 1.0 / (8 * lambda);
    const Diffeo1D h0 = dm::homothety(0.0, lambda), h1 = dm::homothety(1.0, lambda);
    out.phi = flow_conjugator(X, out.Y, p, lambda * p, GermPiece{p, h0}, GermPiece{1 - p, h1});
    const Diffeo1D bare = flow_conjugator(X, out.Y, p, lambda * p);
    for (auto [x, h] : {std::pair{0.75 * p, h0}, std::pair{1 - 0.75 * p, h1}}) {
        out.homothety_defect = std::max(out.homothety_defect, max_abs_diff(bare.jet(x, r), h.jet(x, r)));
    }
    return out;
}

json to_json(const FlattenResult& f) {
    json sweep = json::array();
    for (auto [l, n] : f.sweep) sweep.push_back({{"lambda", l}, {"norm", std::isfinite(n) ? json(n) : json()}});
    return {{"lambda", f.lambda},
            {"u", f.u},
            {"eta", f.eta},
            {"r", f.r},
            {"y_norm", f.y_norm},
            {"transit_match_residual", f.transit_match_residual},
            {"homothety_defect", f.homothety_defect},
            {"sweep", sweep}};
}

double calibrate_eta(double epsilon, int r) {
    check_order(r);
    if (!(epsilon > 0)) throw config_error("calibrate_eta: epsilon must be positive");
    static std::mutex mu;
    static std::map<std::pair<double, int>, double> cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        if (auto it = cache.find({epsilon, r}); it != cache.end()) return it->second;
    }
    const GridSpec grid{0.0, 1.0, 129, true, false, 129};
    const auto nodes = grid_nodes(grid);
    std::vector<FieldExpr> family = {
        fx::polynomial({0, 1, -1}),
        fx::polynomial({0, 0, 1, -2, 1}),
        fx::polynomial({0, 0.5, -1.5, 1}),
        fx::bump(0.1, 0.3, 0.7, 0.9),
    };
    std::vector<VectorField1D> unit;
    for (const auto& e : family) {
        VectorField1D V(Domain::unit(), e, {{0, 0}, {1, 1}});
        unit.push_back(VectorField1D(Domain::unit(), fx::scale(1.0 / field_cr_norm(V, r, nodes), e), V.zeros()));
    }
    auto passes = [&](double eta) {
        for (const auto& V : unit) {
            VectorField1D W(Domain::unit(), fx::scale(eta, V.expr()), V.zeros());
            if (cr_distance_to_id(dm::flow(W, 1.0), r, grid).value >= epsilon) return false;
        }
        return true;
    };
    double lo = 0, hi = epsilon;
    while (passes(hi)) {
        lo = hi;
        hi *= 2;
    }
    for (int it = 0; it < 30 && hi - lo > 1e-3 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (passes(mid) ? lo : hi) = mid;
    }
    const double eta = 0.5 * lo;
    std::lock_guard<std::mutex> lock(mu);
    cache[{epsilon, r}] = eta;
    return eta;
}

}  // namespace diffeo

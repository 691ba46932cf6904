#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "diffeo/conjugacy.hpp"
#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"
#include "diffeo/numerics.hpp"
#include "diffeo/reduce.hpp"

namespace diffeo {

std::string tag_name(BoundaryTag::Kind k) {
    switch (k) {
        case BoundaryTag::Kind::identity: return "identity";
        case BoundaryTag::Kind::homothety: return "homothety";
        case BoundaryTag::Kind::power_of_f: return "power_of_f";
    }
    return "unknown";
}

std::vector<double> detect_iti(const VectorField1D& X, double tol) {
    std::vector<double> pts = {X.domain().a, X.domain().b};
    for (const auto& z : X.zeros()) {
        if (z.lo == z.hi) pts.push_back(z.lo);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::vector<double> out;
    for (double z : pts) {
        Jet j = X.jet(z, kMaxOrder);
        bool flat = true;
        for (int k = 0; k <= kMaxOrder; ++k) flat = flat && std::abs(j[k]) <= tol;
        if (flat) out.push_back(z);
    }
    return out;
}

namespace {

constexpr double kIntegerTol = 1e-6;
constexpr double kSigmaAgreement = 1e-7;

double norm_of(const FieldExpr& e, int r, int n = 2048) {
    std::vector<double> nodes;
    for (int i = 0; i <= n; ++i) nodes.push_back(static_cast<double>(i) / n);
    return field_cr_norm(VectorField1D(Domain::unit(), e), r, nodes);
}

double sup_residual(const Diffeo1D& phi, const Diffeo1D& f, const Diffeo1D& g, const std::vector<double>& nodes) {
    double m = 0;
    for (double x : nodes) m = std::max(m, std::abs(phi(f(x)) - g(phi(x))));
    return m;
}

double jet_defect(const Diffeo1D& a, const Diffeo1D& b, double x, int r) {
    return max_abs_diff(a.jet(x, r), b.jet(x, r));
}

/// u in [0,1) with sigma(u) an integer, the first one crossed as u moves away from 0.
double integer_continuation(const std::function<double(double)>& sigma, double* value) {
    const double s0 = sigma(0);
    if (std::abs(s0 - std::round(s0)) < 1e-10) {
        *value = s0;
        return 0;
    }
    double hi = 0.5, sh = sigma(hi);
    for (int k = 0; std::abs(sh - s0) < 1e-12 || std::floor(sh) == std::floor(s0); ++k) {
        if (k > 50) throw numeric_error("u-continuation: sigma does not cross an integer for u < 1");
        hi = 0.5 * (1 + hi);
        sh = sigma(hi);
    }
    const double target = sh < s0 ? std::floor(s0) : std::ceil(s0);
    const double u = bisect_root([&](double v) { return sigma(v) - target; }, 0, hi, 1e-16, 200);
    *value = sigma(u);
    return u;
}

// ------------------------------------------------------------ flatten chains

struct Chain {
    FieldExpr Y;
    Diffeo1D phi;
    double lambda = 0;
    double residual = 0;
    double homothety_defect = 0;
};

/// Flatten X on each [z_i, z_{i+1}] with a common ratio, glued at the interior zeros.
Chain flatten_chain(const VectorField1D& X, const std::vector<double>& zeros, double eta, int r, double lambda_min) {
    const size_t n = zeros.size() - 1;
    std::vector<VectorField1D> unit;
    std::vector<double> etas;
    for (size_t i = 0; i < n; ++i) {
        const double a = zeros[i], L = zeros[i + 1] - a;
        unit.emplace_back(Domain::unit(), fx::affine_pushforward(1 / L, -a / L, X.expr()), std::vector<ZeroSpec>{{0, 0}, {1, 1}});
        etas.push_back(eta * std::pow(L, r - 1));
    }
    FlattenOptions fo;
    fo.grid_nodes = 1025;
    std::vector<FlattenResult> res(n);
    double lambda = lambda_min;
    for (size_t i = 0; i < n; ++i) {
        res[i] = flatten_field(unit[i], etas[i], r, 0, fo);
        lambda = std::max(lambda, res[i].lambda);
    }
    Chain c;
    c.lambda = lambda;
    std::vector<FieldExpr> pieces;
    std::vector<Diffeo1D> maps;
    for (size_t i = 0; i < n; ++i) {
        if (res[i].lambda != lambda) res[i] = flatten_field(unit[i], etas[i], r, lambda, fo);
        const double a = zeros[i], L = zeros[i + 1] - a;
        pieces.push_back(fx::affine_pushforward(L, a, res[i].Y.expr()));
        maps.push_back(dm::compose({dm::affine(L, a), res[i].phi, dm::affine(1 / L, -a / L)}));
        c.residual = std::max(c.residual, res[i].transit_match_residual);
        c.homothety_defect = std::max(c.homothety_defect, res[i].homothety_defect);
    }
    std::vector<double> inner(zeros.begin() + 1, zeros.end() - 1);
    c.Y = n == 1 ? pieces[0] : fx::piecewise(inner, pieces);
    c.phi = n == 1 ? maps[0] : dm::glue(inner, maps);
    return c;
}

std::vector<double> declared_points(const VectorField1D& X, double lo, double hi) {
    std::vector<double> out;
    for (const auto& z : X.zeros()) {
        if (z.lo != z.hi) throw config_error("reduce: zero intervals are not supported");
        if (z.lo > lo && z.lo < hi) out.push_back(z.lo);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<ZeroSpec> point_zeros(const std::vector<double>& pts) {
    std::vector<ZeroSpec> z;
    for (double p : pts) z.push_back({p, p});
    return z;
}

std::vector<double> iti_points(const FlowData& data) {
    std::vector<double> v = data.iti ? *data.iti : detect_iti(data.X);
    std::sort(v.begin(), v.end());
    return v;
}

// ------------------------------------------------------------ ITI blocks

struct Built {
    VectorField1D Xt;
    Diffeo1D phi;
    std::vector<BoundaryTag> tags;
    std::vector<double> offsets;
    double sigma_agreement = 0;
};

/// eta / 3 min(1, 1 / ||rho||_r, 1 / (2 ||chi||_r)).
double reduced_eta(double eta, const FieldExpr& chi, const FieldExpr& rho, int r) {
    return eta / 3 * std::min({1.0, 1 / norm_of(rho, r), 1 / (2 * norm_of(chi, r))});
}

Built build_case1(const VectorField1D& X, const Diffeo1D& f, double eta, int r) {
    const FieldExpr chi = fx::step(0.375, 0.625);
    const FieldExpr rho = fx::bump(0.25, 0.3125, 0.6875, 0.75);
    const double eta1 = reduced_eta(eta, chi, rho, r);
    ItiOptions lo;
    lo.rule = SmallnessRule::measured;
    lo.window = 0.1;
    lo.x_max = 0.125;
    ItiOptions hi = lo;
    hi.side = Side::right;
    const ItiInterpolation left = interpolate_ITI(X, f, eta1, r, lo);
    const ItiInterpolation right = interpolate_ITI(X, f, eta1, r, hi);
    const double x0 = left.x0, x1 = right.x0;
    const double a0 = left.a[0], a1 = right.a[0];
    if ((a0 > 0) != (a1 > 0)) throw config_error("reduce_no_interior_ITI: X changes sign without a declared zero");
    const double m = (a0 > 0 ? 1 : -1) * std::min(std::abs(a0), std::abs(a1));

    auto field = [&](double u) {
        FieldExpr mid = fx::constant(a0) + (a1 - a0) * chi - (u * m) * rho;
        return VectorField1D(Domain::unit(), fx::piecewise({0.25, 0.75}, {left.Y.expr(), mid, right.Y.expr()}),
                             {{0, 0}, {1, 1}});
    };
    const double tx = transit_time(X, x0, x1);
    double sigma = 0;
    const double u = integer_continuation([&](double v) { return tx - transit_time(field(v), x0, x1); }, &sigma);

    Built b;
    b.Xt = field(u);
    const double n = std::round(sigma);
    const Diffeo1D fn = dm::flow(X, n);
    const double hi_lim = std::max(x1, flow(X, -n, x1, 0).value());
    b.phi = flow_conjugator(X, b.Xt, x0, x0, GermPiece{x0, dm::identity()}, GermPiece{hi_lim, fn});
    b.offsets = {sigma};

    const double a = flow(X, -0.5, x0, 0).value(), c = flow(X, 0.5, x1, 0).value();
    const double sigma2 = transit_time(X, a, c) - transit_time(b.Xt, a, c);
    b.sigma_agreement = std::abs(sigma2 - sigma);

    const Diffeo1D bare = flow_conjugator(X, b.Xt, x0, x0);
    b.tags.push_back({0.0, BoundaryTag::Kind::identity, 0, jet_defect(bare, dm::identity(), a, r)});
    b.tags.push_back(
        {1.0, BoundaryTag::Kind::power_of_f, n, jet_defect(bare, fn, flow(X, 0.5, hi_lim, 0).value(), r)});
    return b;
}

Built build_case2(const VectorField1D& X, const Diffeo1D& f, double eta, int r, const std::vector<double>& zeros) {
    const double c = zeros.front(), d = zeros.back();
    // Bridges are at least half of [0, c] (resp. [d, 1]) wide.
    auto side_eta = [&](double w) {
        return reduced_eta(eta, fx::step(0.25 * w, 0.375 * w), fx::bump(0, 0.025 * w, 0.2 * w, 0.225 * w), r);
    };
    const double etaL = side_eta(c), etaR = side_eta(1 - d);
    ItiOptions lo;
    lo.rule = SmallnessRule::measured;
    lo.window = 0.25 * c;
    lo.x_max = std::min(0.125, 0.25 * c);
    ItiOptions hi = lo;
    hi.side = Side::right;
    hi.window = 0.25 * (1 - d);
    hi.x_max = std::min(0.125, 0.25 * (1 - d));
    const ItiInterpolation left = interpolate_ITI(X, f, etaL, r, lo);
    const ItiInterpolation right = interpolate_ITI(X, f, etaR, r, hi);
    const double x0 = left.x0, x1 = right.x0, a0 = left.a[0], b0 = right.a[0];
    const double s1 = x0 + lo.window, L = c - s1;
    const double e1 = x1 - hi.window, Lr = e1 - d;
    const FieldExpr chiL = fx::step(s1 + 0.5 * L, s1 + 0.75 * L);
    const FieldExpr rhoL = fx::bump(s1 + 0.05 * L, s1 + 0.1 * L, s1 + 0.4 * L, s1 + 0.45 * L);
    const FieldExpr chiR = fx::step(d + 0.5 * Lr, d + 0.25 * Lr);
    const FieldExpr rhoR = fx::bump(d + 0.55 * Lr, d + 0.6 * Lr, d + 0.9 * Lr, d + 0.95 * Lr);

    std::vector<double> nodesL, nodesR;
    for (int i = 0; i <= 512; ++i) {
        nodesL.push_back(x0 + (c - x0) * i / 512);
        nodesR.push_back(d + (x1 - d) * i / 512);
    }
    auto sides = [&](double lambda, double u, double v) {
        const FieldExpr Gc = fx::affine_pushforward(lambda, c * (1 - lambda), X.expr());
        const FieldExpr Gd = fx::affine_pushforward(lambda, d * (1 - lambda), X.expr());
        return std::pair{left.Y.expr() + chiL * (Gc - fx::constant(a0)) - (u * a0) * rhoL,
                         right.Y.expr() + chiR * (Gd - fx::constant(b0)) - (v * b0) * rhoR};
    };

    // Smallest common ratio for which the bridges to the homothety germs are small.
    double lambda = 0;
    Chain mid;
    for (double trial = 2;; trial *= 2) {
        if (trial > (1 << 20)) throw numeric_error("reduce_no_interior_ITI: no ratio makes the bridges small");
        if (zeros.size() > 1) {
            mid = flatten_chain(X, zeros, eta / 3, r, trial);
            trial = mid.lambda;
        }
        auto [l, rr] = sides(trial, 0, 0);
        const double nl = field_cr_norm(VectorField1D(Domain::unit(), l), r, nodesL);
        const double nr = field_cr_norm(VectorField1D(Domain::unit(), rr), r, nodesR);
        if (std::max(nl, nr) < eta / 2) {
            lambda = trial;
            break;
        }
    }

    const double Hp = c - 0.1 * L, p = c - 0.1 * L / lambda;
    const double Hq = d + 0.1 * Lr, q = d + 0.1 * Lr / lambda;
    std::vector<double> zall = {0.0};
    zall.insert(zall.end(), zeros.begin(), zeros.end());
    zall.push_back(1.0);
    auto field = [&](double u, double v) {
        auto [l, rr] = sides(lambda, u, v);
        std::vector<FieldExpr> pieces = {l};
        std::vector<double> bp = {c};
        if (zeros.size() > 1) {
            pieces.push_back(mid.Y);
            bp.push_back(d);
        }
        pieces.push_back(rr);
        return VectorField1D(Domain::unit(), fx::piecewise(bp, pieces), point_zeros(zall));
    };
    const double tl = transit_time(X, p, x0), tr = transit_time(X, q, x1);
    double sigma = 0, tau = 0;
    const double u = integer_continuation([&](double w) { return tl - transit_time(field(w, 0), Hp, x0); }, &sigma);
    const double v = integer_continuation([&](double w) { return tr - transit_time(field(u, w), Hq, x1); }, &tau);

    Built b;
    b.Xt = field(u, v);
    const double ns = std::round(sigma), nt = std::round(tau);
    const Diffeo1D fs = dm::flow(X, ns), ft = dm::flow(X, nt);
    const Diffeo1D hc = dm::homothety(c, lambda), hd = dm::homothety(d, lambda);
    const double lo_lim = std::min(x0, flow(X, -ns, x0, 0).value());
    const double hi_lim = std::max(x1, flow(X, -nt, x1, 0).value());
    const Diffeo1D phiL = flow_conjugator(X, b.Xt, p, Hp, GermPiece{lo_lim, fs}, GermPiece{p, hc});
    const Diffeo1D phiR = flow_conjugator(X, b.Xt, q, Hq, GermPiece{q, hd}, GermPiece{hi_lim, ft});
    b.phi = zeros.size() > 1 ? dm::glue({c, d}, {phiL, mid.phi, phiR}) : dm::glue({c}, {phiL, phiR});
    b.offsets = {sigma, tau};

    // Second base-point pair for each offset, inside the regions where the fields agree.
    const double p2 = c - 0.05 * L / lambda, Hp2 = c - 0.05 * L;
    const double a = flow(X, -0.5, x0, 0).value();
    const double sigma2 = transit_time(X, p2, a) - transit_time(b.Xt, Hp2, a);
    const double q2 = d + 0.05 * Lr / lambda, Hq2 = d + 0.05 * Lr;
    const double e = flow(X, 0.5, x1, 0).value();
    const double tau2 = transit_time(X, q2, e) - transit_time(b.Xt, Hq2, e);
    b.sigma_agreement = std::max(std::abs(sigma2 - sigma), std::abs(tau2 - tau));

    const Diffeo1D bareL = flow_conjugator(X, b.Xt, p, Hp), bareR = flow_conjugator(X, b.Xt, q, Hq);
    b.tags.push_back(
        {0.0, BoundaryTag::Kind::power_of_f, ns, jet_defect(bareL, fs, flow(X, -0.5, lo_lim, 0).value(), r)});
    b.tags.push_back({c, BoundaryTag::Kind::homothety, lambda, jet_defect(bareL, hc, 0.5 * (p + c), r)});
    if (zeros.size() > 1) b.tags.push_back({d, BoundaryTag::Kind::homothety, lambda, mid.homothety_defect});
    b.tags.push_back({d, BoundaryTag::Kind::homothety, lambda, jet_defect(bareR, hd, 0.5 * (q + d), r)});
    b.tags.push_back(
        {1.0, BoundaryTag::Kind::power_of_f, nt, jet_defect(bareR, ft, flow(X, 0.5, hi_lim, 0).value(), r)});
    return b;
}

double eta_for(double epsilon, int r, const ReduceOptions& opt) {
    return opt.eta > 0 ? opt.eta : calibrate_eta(epsilon, r);
}

}  // namespace

ReductionStep reduce_no_interior_ITI(const FlowData& data, double epsilon, int r, const ReduceOptions& opt) {
    check_order(r);
    const VectorField1D& X = data.X;
    if (X.domain() != Domain::unit()) throw config_error("reduce_no_interior_ITI: X must live on [0,1]");
    if (!(epsilon > 0)) throw config_error("reduce_no_interior_ITI: epsilon must be positive");
    const auto iti = iti_points(data);
    if (iti.size() != 2 || iti.front() != 0.0 || iti.back() != 1.0) {
        throw config_error("reduce_no_interior_ITI: f must be ITI at 0 and 1 and nowhere inside");
    }
    const auto zeros = declared_points(X, 0, 1);
    const Diffeo1D f = dm::flow(X, 1);
    const double eta = eta_for(epsilon, r, opt);
    double scaled = eta;
    const auto nodes = grid_nodes(opt.grid);

    std::string last = "no attempt";
    for (int attempt = 0; attempt <= opt.max_retries; ++attempt, scaled *= 0.5) {
        try {
            Built b = zeros.empty() ? build_case1(X, f, scaled, r) : build_case2(X, f, scaled, r, zeros);
            for (double s : b.offsets) {
                if (std::abs(s - std::round(s)) > kIntegerTol) throw numeric_error("offset is not an integer");
            }
            if (b.sigma_agreement > kSigmaAgreement) {
                throw numeric_error("transit offsets disagree between base points by " +
                                    std::to_string(b.sigma_agreement));
            }
            ReductionStep s;
            s.r = r;
            s.conjugator = b.phi;
            s.conjugate = dm::flow(b.Xt, 1);
            s.boundary_tags = b.tags;
            s.offsets = b.offsets;
            s.residual = sup_residual(s.conjugator, f, s.conjugate, nodes);
            s.dr_to_isometry = cr_distance_to_id(s.conjugate, r, opt.grid).value;
            if (s.residual > 1e-6) throw numeric_error("conjugacy residual " + std::to_string(s.residual));
            if (s.dr_to_isometry >= epsilon) {
                throw numeric_error("d_r = " + std::to_string(s.dr_to_isometry) + " not below epsilon");
            }
            return s;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::config || e.kind() == ErrorKind::schema) throw;
            last = e.what();
        }
    }
    throw numeric_error("reduce_no_interior_ITI: gave up after " + std::to_string(opt.max_retries) +
                        " retries (" + last + ")");
}

ReductionTrace reduce_interval(const FlowData& data, double epsilon, int r, const ReduceOptions& opt) {
    check_order(r);
    const VectorField1D& X = data.X;
    if (X.domain() != Domain::unit()) throw config_error("reduce_interval: X must live on [0,1]");
    if (!(epsilon > 0)) throw config_error("reduce_interval: epsilon must be positive");
    if (std::abs(X(0)) > 1e-14 || std::abs(X(1)) > 1e-14) throw config_error("reduce_interval: X must vanish at 0 and 1");
    const Diffeo1D f = dm::flow(X, 1);
    const auto nodes = grid_nodes(opt.grid);

    ReductionTrace t;
    t.target_epsilon = epsilon;
    t.eta = eta_for(epsilon, r, opt);
    ReductionStep s0;
    s0.r = r;
    s0.conjugator = dm::identity();
    s0.conjugate = f;
    s0.dr_to_isometry = cr_distance_to_id(f, r, opt.grid).value;
    t.steps.push_back(s0);
    t.subdivision = {0.0, 1.0};
    if (s0.dr_to_isometry < epsilon) {
        t.block_types = {'A'};
        return t;
    }

    const auto iti = iti_points(data);
    const bool iti0 = std::find(iti.begin(), iti.end(), 0.0) != iti.end();
    const bool iti1 = std::find(iti.begin(), iti.end(), 1.0) != iti.end();
    ReductionStep s1;
    s1.r = r;

    if (iti.empty()) {
        // No ITI point: flatten between consecutive zeros with a common ratio.
        std::vector<double> z = {0.0};
        for (double p : declared_points(X, 0, 1)) z.push_back(p);
        z.push_back(1.0);
        Chain c = flatten_chain(X, z, t.eta, r, 0);
        s1.conjugator = c.phi;
        s1.conjugate = dm::flow(VectorField1D(Domain::unit(), c.Y, point_zeros(z)), 1);
        for (double p : z) s1.boundary_tags.push_back({p, BoundaryTag::Kind::homothety, c.lambda, c.homothety_defect});
        s1.offsets = {c.residual};
        t.block_types = {'B'};
    } else {
        if (!iti0 || !iti1) throw config_error("reduce_interval: ITI and non-ITI boundary points in one input");
        t.subdivision = iti;
        const size_t n = iti.size() - 1;
        std::vector<FieldExpr> fields(n);
        std::vector<Diffeo1D> maps(n);
        std::vector<std::vector<BoundaryTag>> tags(n);
        std::vector<std::vector<double>> offsets(n);
        t.block_types.assign(n, 'A');
        std::vector<std::exception_ptr> errors(n);
        GridSpec g = opt.grid;
        g.refine = false;
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < static_cast<long>(n); ++i) {
            try {
                const double a = iti[i], L = iti[i + 1] - a;
                GridSpec gi = g;
                gi.a = a;
                gi.b = a + L;
                fields[i] = X.expr();
                maps[i] = dm::identity();
                if (cr_distance_to_id(f, r, gi).value < epsilon) continue;
                t.block_types[i] = 'B';
                std::vector<double> z;
                for (double p : declared_points(X, a, a + L)) z.push_back((p - a) / L);
                VectorField1D U(Domain::unit(), fx::affine_pushforward(1 / L, -a / L, X.expr()),
                                point_zeros([&] {
                                    auto v = z;
                                    v.insert(v.begin(), 0.0);
                                    v.push_back(1.0);
                                    return v;
                                }()));
                ReduceOptions sub = opt;
                if (opt.eta > 0) sub.eta = opt.eta * std::pow(L, r - 1);
                ReductionStep st = reduce_no_interior_ITI({U, std::vector<double>{0.0, 1.0}},
                                                          epsilon * std::pow(L, r - 1), r, sub);
                VectorField1D Xt;
                double time = 0;
                as_flow(st.conjugate, &Xt, &time);
                fields[i] = fx::affine_pushforward(L, a, Xt.expr());
                maps[i] = L == 1 ? st.conjugator
                                 : dm::compose({dm::affine(L, a), st.conjugator, dm::affine(1 / L, -a / L)});
                for (auto tag : st.boundary_tags) {
                    tag.point = a + L * tag.point;
                    tags[i].push_back(tag);
                }
                offsets[i] = st.offsets;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
        std::vector<double> inner(iti.begin() + 1, iti.end() - 1);
        s1.conjugator = n == 1 ? maps[0] : dm::glue(inner, maps);
        s1.conjugate = dm::flow(VectorField1D(Domain::unit(), n == 1 ? fields[0] : fx::piecewise(inner, fields),
                                              X.zeros()),
                                1);
        for (size_t i = 0; i < n; ++i) {
            if (t.block_types[i] == 'A') {
                s1.boundary_tags.push_back({iti[i], BoundaryTag::Kind::identity, 0, 0});
                s1.boundary_tags.push_back({iti[i + 1], BoundaryTag::Kind::identity, 0, 0});
            }
            s1.boundary_tags.insert(s1.boundary_tags.end(), tags[i].begin(), tags[i].end());
            s1.offsets.insert(s1.offsets.end(), offsets[i].begin(), offsets[i].end());
        }
    }
    s1.residual = sup_residual(s1.conjugator, f, s1.conjugate, nodes);
    s1.dr_to_isometry = cr_distance_to_id(s1.conjugate, r, opt.grid).value;
    if (!(s1.dr_to_isometry < s0.dr_to_isometry)) {
        throw invariant_error("reduce_interval: d_r did not decrease");
    }
    if (s1.residual > 1e-6) throw invariant_error("reduce_interval: conjugacy residual " + std::to_string(s1.residual));
    t.steps.push_back(s1);
    return t;
}

json to_json(const ReductionTrace& t) {
    json steps = json::array();
    for (const auto& s : t.steps) {
        json tags = json::array();
        for (const auto& g : s.boundary_tags) {
            tags.push_back({{"point", g.point}, {"kind", tag_name(g.kind)}, {"value", g.value}, {"defect", g.defect}});
        }
        steps.push_back({{"dr", s.dr_to_isometry},
                         {"r", s.r},
                         {"residual", s.residual},
                         {"boundary_tags", tags},
                         {"offsets", s.offsets}});
    }
    std::string types(t.block_types.begin(), t.block_types.end());
    return {{"target_epsilon", t.target_epsilon},
            {"eta", t.eta},
            {"subdivision", t.subdivision},
            {"block_types", types},
            {"steps", steps}};
}

void ReductionTrace::write_svg(std::ostream& os) const {
    const double W = 400, H = 240, pad = 40;
    std::vector<double> ys;
    for (const auto& s : steps) ys.push_back(std::log10(std::max(s.dr_to_isometry, 1e-300)));
    ys.push_back(std::log10(target_epsilon));
    const double lo = *std::min_element(ys.begin(), ys.end()) - 0.5;
    const double hi = *std::max_element(ys.begin(), ys.end()) + 0.5;
    auto X = [&](size_t i) { return pad + (W - 2 * pad) * (steps.size() > 1 ? double(i) / (steps.size() - 1) : 0.5); };
    auto Y = [&](double v) { return H - pad - (H - 2 * pad) * (v - lo) / (hi - lo); };
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"12\">log10 d_r versus step</text>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << Y(ys.back()) << "\" x2=\"" << W - pad << "\" y2=\"" << Y(ys.back())
       << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"black\" points=\"";
    for (size_t i = 0; i < steps.size(); ++i) os << X(i) << "," << Y(ys[i]) << " ";
    os << "\"/>\n";
    for (size_t i = 0; i < steps.size(); ++i) {
        os << "<circle cx=\"" << X(i) << "\" cy=\"" << Y(ys[i]) << "\" r=\"3\"/>\n";
    }
    os << "</svg>\n";
}

}  // namespace diffeo

#include "diffeo/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <string>

#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"

namespace diffeo {

Curvature commutator_curvature(const VectorField1D& X, const VectorField1D& Y, double x, double h) {
    if (!(h > 0)) throw config_error("commutator_curvature: h must be positive");
    const Jet jx = X.jet(x, 1), jy = Y.jet(x, 1);
    auto c = [&](double t) {
        double y = flow(Y, -t, x, 0).value();
        y = flow(X, -t, y, 0).value();
        y = flow(Y, t, y, 0).value();
        return flow(X, t, y, 0).value();
    };
    Curvature out;
    out.analytic = 2 * (jx[1] * jy[0] - jy[1] * jx[0]);
    out.finite_difference = ((c(2 * h) - x) + (c(-2 * h) - x) - (c(h) - x) - (c(-h) - x)) / (3 * h * h);
    out.error = std::abs(out.finite_difference - out.analytic);
    return out;
}

// ---------------------------------------------------------------- words

long word_length(const Word& w) {
    long n = 0;
    for (const auto& l : w) n += std::labs(l.power);
    return n;
}

Word inverse_word(const Word& w) {
    Word out(w.rbegin(), w.rend());
    for (auto& l : out) l.power = -l.power;
    return out;
}

double evaluate_word(const Word& w, const std::vector<Diffeo1D>& gens, const std::vector<Diffeo1D>& inverses,
                     double x) {
    for (auto it = w.rbegin(); it != w.rend(); ++it) {
        if (it->gen < 0 || it->gen >= static_cast<int>(gens.size())) {
            throw config_error("evaluate_word: generator index " + std::to_string(it->gen) + " out of range");
        }
        const Diffeo1D& g = it->power > 0 ? gens[it->gen] : inverses[it->gen];
        VectorField1D X;
        double t = 0;
        if (std::labs(it->power) > 1 && as_flow(g, &X, &t)) {
            x = flow(X, std::labs(it->power) * t, x, 0).value();
            continue;
        }
        for (long k = 0; k < std::labs(it->power); ++k) x = g(x);
    }
    return x;
}

json to_json(const Word& w) {
    json a = json::array();
    for (const auto& l : w) a.push_back(json::array({l.gen, l.power}));
    return a;
}

namespace {

// Appends, merging with the last letter when generator and sign agree.
void append(Word& w, Letter l) {
    if (l.power == 0) return;
    if (!w.empty() && w.back().gen == l.gen && (w.back().power > 0) == (l.power > 0)) {
        w.back().power += l.power;
    } else {
        w.push_back(l);
    }
}

void append(Word& w, const Word& tail) {
    for (const auto& l : tail) append(w, l);
}

// Unit letters only, as certificates count them one by one.
void push_units(Word& w, int gen, long power) {
    for (long k = 0; k < std::labs(power); ++k) w.push_back({gen, power > 0 ? 1 : -1});
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
    return v;
}

json segment_json(Segment s) { return json::array({s.lo, s.hi}); }

}  // namespace

// ---------------------------------------------------------------- interval certificates

VectorField1D contraction_field(Segment I, Segment Jp, double p, double* strength, const Domain& d) {
    const double lo = std::min(Jp.lo, p), hi = std::max(Jp.hi, p);
    const double delta = 0.5 * std::min(lo - I.lo, I.hi - hi);
    if (!(delta > 0)) throw config_error("contraction_field: J' and p must lie inside I");
    const double far = std::max(std::abs(p - Jp.lo), std::abs(p - Jp.hi));
    const double near = std::min(std::abs(p - Jp.lo), std::abs(p - Jp.hi));
    // Linear on the plateau: h(x) = p - (p - x) e^{-k}; the far end of J' lands halfway past the near end.
    const double k = std::log(far / near) + std::log(2.0);
    if (strength) *strength = k;
    const FieldExpr e = fx::polynomial({k * p, -k}) * fx::bump(I.lo, I.lo + delta, I.hi - delta, I.hi);
    return VectorField1D(d, e, {{d.a, I.lo}, {p, p}, {I.hi, d.b}});
}

WordCertificate build_interval_certificate(const std::vector<std::pair<Diffeo1D, Diffeo1D>>& pairs, Segment J,
                                           Segment I, double p, const CertificateOptions& opt) {
    if (pairs.empty()) throw config_error("build_interval_certificate: no pairs");
    if (!(I.lo < J.lo && J.lo < J.hi && J.hi < I.hi)) {
        throw config_error("build_interval_certificate: closure of J must lie inside I");
    }
    if (!(p > I.lo && p < I.hi) || (p >= J.lo && p <= J.hi)) {
        throw config_error("build_interval_certificate: p must lie in I outside J");
    }
    const Domain dom = pairs[0].first.domain();
    if (dom.is_circle() || I.lo < dom.a || I.hi > dom.b) {
        throw config_error("build_interval_certificate: I must lie in the interval domain of the pairs");
    }
    const int N = static_cast<int>(pairs.size());
    const double s = p > J.hi ? 1.0 : -1.0;
    const double L = J.length();
    const double room = s > 0 ? p - J.hi : J.lo - p;
    const double back = s > 0 ? J.lo - I.lo : I.hi - J.hi;
    const double m = std::min({0.1 * L, 0.25 * back, room / 8});

    WordCertificate c;
    c.I = I;
    c.J = J;
    c.p = p;
    c.tolerance = opt.tolerance;
    // J' leaves room for h' to push J past itself on the side facing p.
    c.J_prime = s > 0 ? Segment{J.lo - m, J.hi + L + 2 * m} : Segment{J.lo - L - 2 * m, J.hi + m};
    if (s > 0 ? c.J_prime.hi >= p - m : c.J_prime.lo <= p + m) {
        throw config_error("build_interval_certificate: J too large inside I for the displacement h'");
    }
    const Segment& Jp = c.J_prime;
    const double v = L + 0.5 * m;
    c.h_prime_speed = s * v;
    const FieldExpr plateau = s > 0 ? fx::bump(Jp.lo, J.lo, J.hi + L + m, Jp.hi) : fx::bump(Jp.lo, J.lo - L - m, J.hi, Jp.hi);
    const VectorField1D Yp(dom, fx::scale(s * v, plateau), {{dom.a, Jp.lo}, {Jp.hi, dom.b}});
    const VectorField1D Xh = contraction_field(I, Jp, p, &c.h_strength, dom);

    const auto nodes = linspace(I.lo, I.hi, opt.grid_nodes);
    for (int n = 0; n < N; ++n) {
        for (const Diffeo1D* g : {&pairs[n].first, &pairs[n].second}) {
            for (double x : nodes) {
                if ((x <= J.lo || x >= J.hi) && std::abs((*g)(x) - x) > 1e-14) {
                    throw config_error("build_interval_certificate: pair " + std::to_string(n) +
                                       " is not supported in J");
                }
            }
        }
    }

    // h^n(J') pairwise disjoint: consecutive images are ordered toward p.
    c.disjointness_gap = INFINITY;
    for (int n = 0; n < N; ++n) {
        const double a0 = flow(Xh, n, Jp.lo, 0).value(), b0 = flow(Xh, n, Jp.hi, 0).value();
        const double a1 = flow(Xh, n + 1, Jp.lo, 0).value(), b1 = flow(Xh, n + 1, Jp.hi, 0).value();
        c.disjointness_gap = std::min(c.disjointness_gap, s > 0 ? a1 - b0 : a0 - b1);
    }
    const double moved = s > 0 ? flow(Yp, 1, J.lo, 0).value() - J.hi : J.lo - flow(Yp, 1, J.hi, 0).value();
    if (!(c.disjointness_gap > 0) || !(moved > 0)) {
        throw numeric_error("build_interval_certificate: disjointness construction failed");
    }

    const Diffeo1D h = dm::flow(Xh, 1), hp = dm::flow(Yp, 1);
    std::vector<Diffeo1D> F, Finv, G, Ginv;
    for (int n = 0; n < N; ++n) {
        const Diffeo1D up = dm::flow(Xh, n), down = dm::flow(Xh, -n);
        // The conjugate is the identity outside h^n(J'); gluing avoids flowing every point back by h^{-n}.
        const double u = flow(Xh, n, Jp.lo, 0).value(), v = flow(Xh, n, Jp.hi, 0).value();
        const auto local = [&](const Diffeo1D& g) {
            const Diffeo1D id = dm::identity(dom);
            return dm::glue({std::min(u, v), std::max(u, v)}, {id, dm::compose({up, g, down}), id});
        };
        F.push_back(local(pairs[n].first));
        Finv.push_back(local(dm::inverse(pairs[n].first)));
        G.push_back(local(pairs[n].second));
        Ginv.push_back(local(dm::inverse(pairs[n].second)));
    }
    c.labels = {"h", "h'", "F", "F'"};
    c.generators = {h, hp, dm::compose(F), dm::compose(G)};
    c.inverses = {dm::flow(Xh, -1), dm::flow(Yp, -1), dm::compose(Finv), dm::compose(Ginv)};

    enum { kH = 0, kHp = 1, kF = 2, kFp = 3 };
    for (int n = 0; n < N; ++n) {
        Word hpn;  // h'_n = h^n h' h^{-n}
        push_units(hpn, kH, n);
        hpn.push_back({kHp, 1});
        push_units(hpn, kH, -n);
        const Word hpn_inv = inverse_word(hpn);
        Word w;
        push_units(w, kH, -n);
        // A = F h'_n F^{-1} h'_n^{-1}
        w.push_back({kF, 1});
        w.insert(w.end(), hpn.begin(), hpn.end());
        w.push_back({kF, -1});
        w.insert(w.end(), hpn_inv.begin(), hpn_inv.end());
        // B = F' h'_n F'^{-1} h'_n^{-1}
        w.push_back({kFp, 1});
        w.insert(w.end(), hpn.begin(), hpn.end());
        w.push_back({kFp, -1});
        w.insert(w.end(), hpn_inv.begin(), hpn_inv.end());
        // C = F^{-1} F'^{-1} h'_n F' F h'_n^{-1}
        w.push_back({kF, -1});
        w.push_back({kFp, -1});
        w.insert(w.end(), hpn.begin(), hpn.end());
        w.push_back({kFp, 1});
        w.push_back({kF, 1});
        w.insert(w.end(), hpn_inv.begin(), hpn_inv.end());
        push_units(w, kH, n);

        CertifiedWord cw;
        cw.target = "[g_" + std::to_string(n) + ", g'_" + std::to_string(n) + "]";
        cw.n = n;
        cw.claimed_length = 14L * n + 14;
        cw.length_check = static_cast<long>(w.size()) == cw.claimed_length && word_length(w) == cw.claimed_length;
        cw.letters = std::move(w);
        c.words.push_back(std::move(cw));
        c.targets.push_back(commutator(pairs[n].first, pairs[n].second));
    }

    std::vector<std::exception_ptr> errors(N);
#pragma omp parallel for schedule(dynamic) if (opt.exec == Exec::parallel)
    for (int n = 0; n < N; ++n) {
        try {
            double res = 0;
            for (double x : nodes) {
                res = std::max(res, std::abs(evaluate_word(c.words[n].letters, c.generators, c.inverses, x) -
                                             c.targets[n](x)));
            }
            c.words[n].residual_c0 = res;
        } catch (...) {
            errors[n] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    c.ok = true;
    for (const auto& w : c.words) c.ok = c.ok && w.length_check && w.residual_c0 < opt.tolerance;
    return c;
}

json to_json(const WordCertificate& c) {
    json gens = json::array();
    for (size_t i = 0; i < c.generators.size(); ++i) {
        gens.push_back({{"label", c.labels[i]}, {"map", to_json(c.generators[i])}});
    }
    json words = json::array();
    for (const auto& w : c.words) {
        words.push_back({{"target", w.target},
                         {"n", w.n},
                         {"letters", to_json(w.letters)},
                         {"claimed_length", w.claimed_length},
                         {"letter_count", word_length(w.letters)},
                         {"residual_c0", w.residual_c0},
                         {"length_check", w.length_check}});
    }
    return {{"I", segment_json(c.I)},
            {"J", segment_json(c.J)},
            {"J_prime", segment_json(c.J_prime)},
            {"p", c.p},
            {"h_strength", c.h_strength},
            {"h_prime_speed", c.h_prime_speed},
            {"disjointness_gap", c.disjointness_gap},
            {"tolerance", c.tolerance},
            {"generators", gens},
            {"words", words},
            {"ok", c.ok}};
}

std::vector<double> epsilon_schedule(Segment Jp, const Diffeo1D& h, int n_max, int r) {
    check_order(r);
    if (n_max < 1) throw config_error("epsilon_schedule: n_max must be at least 1");
    const double L = Jp.length();
    const FieldExpr base = fx::bump(Jp.lo, Jp.lo + 0.25 * L, Jp.hi - 0.25 * L, Jp.hi);
    const std::vector<FieldExpr> family = {base, fx::polynomial({0, 4 / L}, 0.5 * (Jp.lo + Jp.hi)) * base};
    const GridSpec on_j{Jp.lo, Jp.hi, 65, true, false, 65};
    std::vector<double> out;
    for (int n = 1; n <= n_max; ++n) {
        const Diffeo1D hn = dm::power(h, n), hn_inv = dm::power(h, -n);
        const double u = hn(Jp.lo), w = hn(Jp.hi);
        const GridSpec on_image{std::min(u, w), std::max(u, w), 65, true, false, 65};
        const double bound = 1.0 / n;
        double eps = INFINITY;
        for (const auto& e : family) {
            auto g = [&](double c) {
                return dm::flow(VectorField1D(h.domain(), fx::scale(c, e), {{h.domain().a, Jp.lo}, {Jp.hi, h.domain().b}}), 1);
            };
            auto conj = [&](double c) {
                return cr_distance_to_id(dm::compose({hn, g(c), hn_inv}), r, on_image).value;
            };
            double lo = 0, hi = 1;
            while (conj(hi) < bound) {
                lo = hi;
                hi *= 2;
                if (hi > 1e6) break;
            }
            for (int it = 0; it < 50; ++it) {
                const double mid = 0.5 * (lo + hi);
                (conj(mid) < bound ? lo : hi) = mid;
            }
            eps = std::min(eps, cr_distance_to_id(g(lo), r, on_j).value);
        }
        out.push_back(0.5 * eps);
    }
    return out;
}

// ---------------------------------------------------------------- decompositions

Diffeo1D FlowProduct::map() const {
    if (fields.empty()) return dm::identity(domain);
    std::vector<Diffeo1D> parts;
    for (size_t i = 0; i < fields.size(); ++i) parts.push_back(dm::flow(fields[i], times.empty() ? 1.0 : times[i]));
    return dm::compose(parts);
}

int default_C0(const Domain& d) { return d.is_circle() ? 16 : 14; }

namespace {

GridSpec check_grid(const Domain& d, int nodes) {
    if (d.is_circle()) return GridSpec{0.0, 1.0, nodes, true, false, nodes};
    return GridSpec{d.a, d.b, nodes, true, false, nodes};
}

void check_eta(const DecompositionRecord& f, const DecompositionRecord& g) {
    if (std::abs(f.eta - g.eta) > 1e-15 * std::max(f.eta, g.eta)) {
        throw config_error("certificate algebra: records use different eta");
    }
}

// Union of generating sets, identical generators (same serialized expression) shared.
struct Merged {
    DecompositionRecord rec;
    std::vector<int> map_f, map_g;
};

Merged merge(const DecompositionRecord& f, const DecompositionRecord& g) {
    Merged m;
    m.rec.eta = f.eta;
    m.rec.r = std::max(f.r, g.r);
    m.rec.C = 2 * std::max(f.C, g.C);
    std::map<std::uint64_t, int> seen;
    auto add = [&](const DecompositionRecord& d, std::vector<int>& map) {
        for (size_t i = 0; i < d.generating_set.size(); ++i) {
            const auto key = expr_hash(to_json(d.generating_set[i]));
            auto it = seen.find(key);
            if (it == seen.end()) {
                it = seen.emplace(key, static_cast<int>(m.rec.generating_set.size())).first;
                m.rec.generating_set.push_back(d.generating_set[i]);
                m.rec.inverses.push_back(d.inverses[i]);
                m.rec.labels.push_back(d.labels[i]);
                m.rec.generator_distance.push_back(d.generator_distance[i]);
            }
            map.push_back(it->second);
        }
    };
    add(f, m.map_f);
    add(g, m.map_g);
    return m;
}

Word remap(const Word& w, const std::vector<int>& map) {
    Word out;
    for (const auto& l : w) append(out, Letter{map[l.gen], l.power});
    return out;
}

}  // namespace

double record_residual(const DecompositionRecord& d, int nodes) {
    if (!d.target) return 0;
    const Domain dom = d.target->domain();
    const GridSpec g = check_grid(dom, nodes);
    double res = 0;
    for (double x : grid_nodes(g)) {
        res = std::max(res, std::abs(evaluate_word(d.word, d.generating_set, d.inverses, x) - (*d.target)(x)));
    }
    return res;
}

DecompositionRecord flow_root_decomposition(const FlowProduct& f, double eta, int C0, int r) {
    check_order(r);
    if (!(eta > 0)) throw config_error("flow_root_decomposition: eta must be positive");
    if (f.size() > C0) {
        throw config_error("flow_root_decomposition: " + std::to_string(f.size()) + " flows exceed C0 = " +
                           std::to_string(C0));
    }
    if (!f.times.empty() && f.times.size() != f.fields.size()) {
        throw config_error("flow_root_decomposition: times and fields differ in length");
    }
    DecompositionRecord d;
    d.eta = eta;
    d.C = C0;
    d.r = r;
    d.target = f.map();
    const GridSpec grid = check_grid(f.domain, 65);
    long n = 1;
    for (;; n *= 2) {
        if (n > (1L << 24)) throw numeric_error("flow_root_decomposition: no root is eta-close to id");
        d.generating_set.clear();
        d.inverses.clear();
        d.generator_distance.clear();
        bool small = true;
        for (int i = 0; i < f.size(); ++i) {
            const double t = (f.times.empty() ? 1.0 : f.times[i]) / static_cast<double>(n);
            d.generating_set.push_back(dm::flow(f.fields[i], t));
            d.inverses.push_back(dm::flow(f.fields[i], -t));
            d.generator_distance.push_back(cr_distance_to_id(d.generating_set.back(), r, grid).value);
            small = small && d.generator_distance.back() < eta;
        }
        if (small) break;
    }
    d.labels.clear();
    for (int i = 0; i < f.size(); ++i) {
        d.labels.push_back("phi_" + std::to_string(i + 1) + "^(1/" + std::to_string(n) + ")");
        d.word.push_back({i, n});
    }
    d.recorded_A_upper = f.size() * n;
    d.residual = record_residual(d);
    return d;
}

DecompositionRecord record_product(const DecompositionRecord& f, const DecompositionRecord& g) {
    check_eta(f, g);
    Merged m = merge(f, g);
    m.rec.word = remap(f.word, m.map_f);
    append(m.rec.word, remap(g.word, m.map_g));
    m.rec.recorded_A_upper = f.recorded_A_upper + g.recorded_A_upper;
    if (f.target && g.target) m.rec.target = dm::compose({*f.target, *g.target});
    return m.rec;
}

DecompositionRecord record_power(const DecompositionRecord& f, int n) {
    if (n < 0) throw config_error("record_power: n must be non-negative");
    DecompositionRecord d = f;
    d.word.clear();
    for (int k = 0; k < n; ++k) append(d.word, f.word);
    d.recorded_A_upper = n * f.recorded_A_upper;
    if (f.target) d.target = dm::power(*f.target, n);
    return d;
}

DecompositionRecord record_conjugate(const DecompositionRecord& f, const DecompositionRecord& h) {
    check_eta(f, h);
    Merged m = merge(h, f);
    const Word wh = remap(h.word, m.map_f);
    m.rec.word = wh;
    append(m.rec.word, remap(f.word, m.map_g));
    append(m.rec.word, inverse_word(wh));
    m.rec.recorded_A_upper = f.recorded_A_upper + 2 * h.recorded_A_upper;
    if (f.target && h.target) m.rec.target = dm::compose({*h.target, *f.target, dm::inverse(*h.target)});
    return m.rec;
}

json to_json(const DecompositionRecord& d) {
    json gens = json::array();
    for (size_t i = 0; i < d.generating_set.size(); ++i) {
        gens.push_back({{"label", d.labels[i]}, {"distance_to_id", d.generator_distance[i]},
                        {"map", to_json(d.generating_set[i])}});
    }
    return {{"eta", d.eta},
            {"C", d.C},
            {"r", d.r},
            {"generating_set", gens},
            {"word", to_json(d.word)},
            {"word_length", word_length(d.word)},
            {"recorded_A_upper", d.recorded_A_upper},
            {"residual", d.residual}};
}

DistortionReport distortion_report(const FlowProduct& f, const std::vector<int>& n_list, double eta,
                                   const std::optional<Diffeo1D>& square_conjugator, int r) {
    DistortionReport rep;
    rep.eta = eta;
    const DecompositionRecord base = flow_root_decomposition(f, eta, default_C0(f.domain), r);
    rep.C = base.C;
    rep.note =
        "A values are upper bounds from explicit words over one generating set; the infimum defining A is not "
        "computed, so a small ratio is evidence only";
    for (int n : n_list) {
        if (n < 1) throw config_error("distortion_report: powers must be positive");
        const long A = n * base.recorded_A_upper;
        rep.rows.push_back({n, A, static_cast<double>(A) / n});
    }
    if (square_conjugator) {
        const Diffeo1D& a = *square_conjugator;
        const Diffeo1D b = f.map();
        const std::vector<Diffeo1D> gens = {a, b}, inv = {dm::inverse(a), dm::inverse(b)};
        const GridSpec g = check_grid(f.domain, 17);
        for (int n : n_list) {
            if (n > 20) throw config_error("distortion_report: dilation rows need n <= 20");
            Word w;
            push_units(w, 0, n);
            w.push_back({1, 1});
            push_units(w, 0, -n);
            const long power = 1L << n;
            const Diffeo1D target = dm::power(b, static_cast<int>(power));
            double res = 0;
            for (double x : grid_nodes(g)) res = std::max(res, std::abs(evaluate_word(w, gens, inv, x) - target(x)));
            rep.dilation.push_back({n, power, word_length(w), static_cast<double>(word_length(w)) / power, res});
        }
    }
    return rep;
}

json to_json(const DistortionReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back({{"n", row.n}, {"A_upper", row.A_upper}, {"ratio", row.ratio}});
    json out = {{"eta", r.eta}, {"C", r.C}, {"rows", rows}, {"note", r.note}};
    if (!r.dilation.empty()) {
        json d = json::array();
        for (const auto& row : r.dilation) {
            d.push_back({{"n", row.n}, {"power", row.power}, {"word_length", row.word_length},
                         {"ratio", row.ratio}, {"residual", row.residual}});
        }
        out["dilation"] = d;
    }
    return out;
}

}  // namespace diffeo

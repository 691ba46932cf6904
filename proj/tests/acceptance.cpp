// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "diffeo/conjugacy.hpp"
#include "diffeo/distortion.hpp"
#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"
#include "diffeo/functionals.hpp"
#include "diffeo/grid.hpp"
#include "diffeo/mather.hpp"
#include "diffeo/reduce.hpp"
#include "scene.hpp"

using namespace diffeo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

// Accumulates named measurements and their verdicts.
class Checks {
public:
    void bound(const std::string& what, double value, double limit) {
        if (!(value < limit)) ok_ = false;
        add(what + "=" + fmt(value) + (value < limit ? "<" : "!<") + fmt(limit));
    }
    void require(const std::string& what, bool cond) {
        if (!cond) {
            ok_ = false;
            add(what + " failed");
        }
    }
    void note(const std::string& s) { add(s); }
    Outcome outcome() const { return {ok_, detail_}; }

private:
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }
    void add(const std::string& s) { detail_ += (detail_.empty() ? "" : ", ") + s; }
    bool ok_ = true;
    std::string detail_;
};

VectorField1D unit_field(FieldExpr e, std::vector<ZeroSpec> z = {{0, 0}, {1, 1}}) {
    return VectorField1D(Domain::unit(), std::move(e), std::move(z));
}

VectorField1D quartic() { return unit_field(fx::polynomial({0, 0, 1}) * fx::polynomial({0, 0, 1}, 1.0)); }

VectorField1D interior_quartic() {
    return unit_field(
        fx::scale(16.0, fx::polynomial({0, 0, 1}) * fx::polynomial({0, 0, 1}, 0.5) * fx::polynomial({0, 0, 1}, 1.0)),
        {{0, 0}, {0.5, 0.5}, {1, 1}});
}

VectorField1D base_field() { return unit_field(fx::polynomial({0, 1, -1}) * fx::polynomial({1.0, 0.4, -0.3})); }

Diffeo1D moebius_ratio(double a) { return dm::moebius(a, 0, a - 1, 1); }

std::vector<double> interior(int n) {
    std::vector<double> x;
    for (int i = 0; i <= n; ++i) x.push_back(0.05 + 0.9 * i / n);
    return x;
}

// ------------------------------------------------------------------ criteria

Outcome curvature() {
    Checks c;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1, 1), pt(0.05, 0.95);
    auto random_field = [&] {
        const double a = 0.05 * (1 + u(rng)), d = 1 - 0.05 * (1 + u(rng));
        const double c0 = 0.3 * u(rng), c1 = 0.3 * u(rng), c2 = 0.3 * u(rng);
        return unit_field(fx::polynomial({c0, c1, c2}) * fx::bump(a, a + 0.4, d - 0.4, d), {{0, a}, {d, 1}});
    };
    double worst = 0, s1 = 0, s2 = 0;
    for (int i = 0; i < 20; ++i) {
        const VectorField1D X = random_field(), Y = random_field();
        for (int k = 0; k < 10; ++k) {
            const double x = pt(rng);
            const Curvature a = commutator_curvature(X, Y, x, 1e-3);
            const Curvature b = commutator_curvature(X, Y, x, 5e-4);
            // Independent closed form from the field jets.
            const Jet jx = X.jet(x, 1), jy = Y.jet(x, 1);
            const double closed = 2 * (jx[1] * jy[0] - jy[1] * jx[0]);
            worst = std::max({worst, a.error, std::abs(a.finite_difference - closed)});
            s1 += a.error * a.error;
            s2 += b.error * b.error;
        }
    }
    c.bound("max_err", worst, 1e-4);
    const double ratio = std::sqrt(s1 / s2);
    c.note("rms_ratio=" + std::to_string(ratio));
    c.require("ratio in [3.5,4.5]", ratio >= 3.5 && ratio <= 4.5);
    return c.outcome();
}

Outcome transit() {
    Checks c;
    const VectorField1D X = unit_field(fx::polynomial({0, 1, -1}));
    const double e = std::exp(1.0);
    c.bound("|tau-1|", std::abs(transit_time(X, 0.5, e / (1 + e)) - 1), 1e-8);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const double a = u(rng), b = u(rng), d = u(rng);
        worst = std::max(worst, std::abs(transit_time(X, a, b) + transit_time(X, b, d) - transit_time(X, a, d)));
    }
    c.bound("additivity", worst, 1e-9);
    return c.outcome();
}

Outcome conjugacy() {
    Checks c;
    const VectorField1D X = base_field();
    double c0 = 0, sigma_gap = 0;
    // Affine conjugators onto [0, s].
    for (double s : {0.5, 1.5, 2.0, 3.0, 4.0}) {
        const Domain D = Domain::interval(0, s);
        const VectorField1D Y(D, fx::affine_pushforward(s, 0.0, X.expr()), {{0, 0}, {s, s}});
        const Diffeo1D phi = dm::affine(s, 0.0, D);
        const ConjugacyWitness w = synthesize_conjugacy(dm::flow(X, 1.0), dm::flow(Y, 1.0), phi, 0.1);
        for (double x : interior(60)) c0 = std::max(c0, std::abs(w.phi(x) - s * x));
        const Diffeo1D phi1 = dm::compose({dm::flow(Y, 0.25), phi});
        sigma_gap = std::max(sigma_gap, std::abs(sigma_offset(X, Y, phi, phi1, 0.1, 0.9) -
                                                 sigma_offset(X, Y, phi, phi1, 0.15, 0.8)));
    }
    // Time-t maps of x(1-x), in closed form as Moebius maps of ratio e^t.
    const VectorField1D Z = unit_field(fx::polynomial({0, 1, -1}));
    double closed_form = 0;
    for (double t : {-1.0, -0.4, 0.3, 0.8, 1.5}) {
        const Diffeo1D phi = moebius_ratio(std::exp(t));
        for (double x : {0.1, 0.5, 0.9}) closed_form = std::max(closed_form, std::abs(phi(x) - flow(Z, t, x, 0).value()));
        const VectorField1D Y = unit_field(fx::pushforward(phi, X.expr()));
        const ConjugacyWitness w = synthesize_conjugacy(dm::flow(X, 1.0), dm::flow(Y, 1.0), phi, 0.1);
        for (double x : interior(60)) c0 = std::max(c0, std::abs(w.phi(x) - phi(x)));
        const Diffeo1D phi1 = dm::compose({phi, dm::flow(X, t / 2)});
        sigma_gap = std::max(sigma_gap, std::abs(sigma_offset(X, Y, phi, phi1, 0.1, 0.9) -
                                                 sigma_offset(X, Y, phi, phi1, 0.15, 0.8)));
    }
    c.bound("flow_closed_form", closed_form, 1e-9);
    c.bound("c0_error", c0, 1e-7);
    c.bound("sigma_gap", sigma_gap, 1e-7);
    return c.outcome();
}

Outcome flattening() {
    Checks c;
    const VectorField1D X = quartic();
    const FlattenResult fr = flatten_field(X, 0.1, 2);
    c.bound("y_norm", fr.y_norm, 0.1);
    double norm = 0;
    for (int i = 0; i <= 4000; ++i) {
        const Jet j = fr.Y.jet(i / 4000.0, 2);
        for (int k = 0; k <= 2; ++k) norm = std::max(norm, std::abs(j[k]));
    }
    c.bound("y_norm_grid", norm, 0.1);
    const double x0 = 1 / (8 * fr.lambda), p = 0.5 * x0;
    double defect = 0;
    for (auto [x, e] : {std::pair{p, 0.0}, std::pair{1 - p, 1.0}}) {
        const Jet j = fr.phi.jet(x, 3);
        defect = std::max({defect, std::abs(j[0] - (e + fr.lambda * (x - e))), std::abs(j[1] - fr.lambda),
                           std::abs(j[2]), std::abs(j[3])});
    }
    c.bound("homothety_jets", defect, 1e-9);
    c.bound("transit_residual", fr.transit_match_residual, 1e-8);
    const double tx = transit_time(X, x0, 1 - x0), ty = transit_time(fr.Y, fr.lambda * x0, 1 - fr.lambda * x0);
    c.bound("transit_rel", std::abs(tx - ty) / tx, 1e-8);
    return c.outcome();
}

Outcome reduction() {
    Checks c;
    const double eps = 0.05;
    const int r = 2;
    for (const auto& [name, X] : {std::pair{"quartic", quartic()}, std::pair{"interior", interior_quartic()}}) {
        const ReductionTrace t = reduce_interval({X, {}}, eps, r);
        const ReductionStep& s = t.steps.back();
        const double d = cr_distance_to_id(s.conjugate, r, GridSpec{0, 1, 257, true, false, 257}).value;
        c.bound(std::string(name) + ".d2", d, eps);
        double tag = 0, jets = 0, offs = 0;
        for (const auto& g : s.boundary_tags) {
            tag = std::max(tag, g.defect);
            if (g.kind != BoundaryTag::Kind::homothety) continue;
            const double x = g.point + (g.point < 1 ? 1e-6 : -1e-6);
            jets = std::max(jets, std::abs(s.conjugator.jet(x, r)[1] - g.value) / g.value);
        }
        for (double o : s.offsets) offs = std::max(offs, std::abs(o - std::round(o)));
        c.require(std::string(name) + ".tags", s.boundary_tags.size() == X.zeros().size());
        c.bound(std::string(name) + ".tag_defect", tag, 1e-6);
        c.bound(std::string(name) + ".tag_jets", jets, 1e-6);
        c.bound(std::string(name) + ".offset", offs, 1e-6);
    }
    return c.outcome();
}

WindowPerturbation window(double alpha, double amount) {
    const VectorField1D B(Domain::interval(alpha - 1, alpha), fx::bump(alpha - 0.9, alpha - 0.6, alpha - 0.4, alpha - 0.1));
    return {dm::flow(B, amount), alpha};
}

Outcome mather() {
    Checks c;
    double single = 0;
    for (const VectorField1D& X : {base_field(), quartic(), unit_field(fx::polynomial({0, 1, -1}))}) {
        single = std::max(single, mather_map(X, X, 0.5, 0.5).max_deviation);
        single = std::max(single, mather_map(X, X, 0.3, 0.7).max_deviation);
    }
    c.bound("single_dev", single, 1e-8);
    const PerturbedMap pm = perturb_in_windows({base_field(), 0.5}, {window(0.0, 0.3)});
    const double dev = mather_map(pm.X_left, pm.Y_right, 0.5, 0.5).max_deviation;
    c.note("perturbed_dev=" + std::to_string(dev));
    c.require("perturbed_dev>0.01", dev > 0.01);
    const FragmatData d{base_field(), 0.5};
    const double m = std::max(fragmat_compose_check(d, {window(0.0, 0.3)}).mismatch,
                              fragmat_compose_check(d, {window(-0.2, 0.3), window(-1.7, -0.4)}).mismatch);
    c.bound("composition_mismatch", m, 1e-6);
    return c.outcome();
}

template <class F>
bool raises_config(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind() == ErrorKind::config;
    }
    return false;
}

Outcome certificates() {
    Checks c;
    std::vector<std::pair<Diffeo1D, Diffeo1D>> pairs;
    for (int n = 0; n < 5; ++n) {
        const double e = 0.02 / (n + 1);
        const std::vector<ZeroSpec> z = {{0, 0.1}, {0.2, 1}};
        const VectorField1D A = unit_field(fx::scale(e, fx::bump(0.1, 0.12, 0.15, 0.2)), z);
        const VectorField1D B = unit_field(fx::scale(e, fx::polynomial({0, 10}, 0.1) * fx::bump(0.1, 0.14, 0.18, 0.2)), z);
        pairs.push_back({dm::flow(A, 1), dm::flow(B, 1)});
    }
    const WordCertificate cert = build_interval_certificate(pairs, {0.1, 0.2}, {0.05, 0.95}, 0.8);
    double res = 0;
    bool lengths = cert.words.size() == 5;
    for (int n = 0; n < static_cast<int>(cert.words.size()); ++n) {
        const CertifiedWord& w = cert.words[n];
        res = std::max(res, w.residual_c0);
        lengths = lengths && w.length_check && word_length(w.letters) == 14L * n + 14 && w.claimed_length == 14L * n + 14;
        // Independent residual against the commutator of the pair.
        const Diffeo1D target = commutator(pairs[n].first, pairs[n].second);
        for (int i = 0; i <= 40; ++i) {
            const double x = 0.05 + 0.9 * i / 40;
            res = std::max(res, std::abs(evaluate_word(w.letters, cert.generators, cert.inverses, x) - target(x)));
        }
    }
    c.bound("residual", res, 1e-6);
    c.require("lengths 14n+14", lengths);
    c.require("certificate ok", cert.ok);

    FlowProduct line, circle;
    circle.domain = Domain::circle();
    for (int k = 0; k < 15; ++k) {
        line.fields.push_back(unit_field(fx::scale(0.002 * (k + 1), fx::polynomial({0, 0, 1}) * fx::polynomial({0, 0, 1}, 1.0))));
    }
    for (int k = 0; k < 17; ++k) {
        circle.fields.push_back(VectorField1D(Domain::circle(), fx::fourier(0.001 * (k + 1), {0.0005}, {0.0005})));
    }
    const bool too_many = raises_config([&] { flow_root_decomposition(line, 0.1, default_C0(line.domain)); }) &&
                          raises_config([&] { flow_root_decomposition(circle, 0.1, default_C0(circle.domain)); });
    line.fields.pop_back();
    circle.fields.pop_back();
    const DecompositionRecord dl = flow_root_decomposition(line, 0.1, default_C0(line.domain));
    const DecompositionRecord dc = flow_root_decomposition(circle, 0.1, default_C0(circle.domain));
    c.note("|S| line=" + std::to_string(dl.generating_set.size()) + " circle=" + std::to_string(dc.generating_set.size()));
    c.require("|S|<=14 line", dl.generating_set.size() <= 14 && default_C0(line.domain) == 14);
    c.require("|S|<=16 circle", dc.generating_set.size() <= 16 && default_C0(circle.domain) == 16);
    c.require("C0 exceeded raises", too_many);
    c.bound("root_residual", std::max({dl.residual, dc.residual, record_residual(dl, 33), record_residual(dc, 33)}), 1e-6);
    return c.outcome();
}

Diffeo1D random_diffeo(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.4, 0.4), ua(0.6, 1.7);
    const double c = u(rng), d = u(rng);
    return dm::compose({moebius_ratio(ua(rng)), dm::polynomial({0, 1 + c, -c + d, -2 * d, d}, 0.0)});
}

Outcome lengths() {
    Checks c;
    std::mt19937_64 rng(31);
    double excess = -1;
    for (int i = 0; i < 50; ++i) {
        const Diffeo1D f = random_diffeo(rng), g = random_diffeo(rng);
        excess = std::max(excess, var_log_derivative(dm::compose({f, g})) - var_log_derivative(f) - var_log_derivative(g));
    }
    c.bound("var_excess", excess, 1e-9);
    double vinf = 0;
    for (double a : {1.5, 2.0, 3.0}) {
        vinf = std::max(vinf, std::abs(asymptotic_variation(moebius_ratio(a), 6).estimate - 2 * std::log(a)));
    }
    c.bound("vinf_moebius", vinf, 1e-6);
    c.bound("liouville_moebius", liouville_length(moebius_ratio(2.0)).value, 1e-8);
    bool triangle = true;
    for (int i = 0; i < 20; ++i) {
        const Diffeo1D f = random_diffeo(rng), g = random_diffeo(rng);
        const auto lf = liouville_length(f), lg = liouville_length(g), lfg = liouville_length(dm::compose({f, g}));
        triangle = triangle && lfg.value <= lf.value + lg.value + lf.error + lg.error + lfg.error;
    }
    c.require("liouville triangle", triangle);
    return c.outcome();
}

std::map<std::string, std::string> json_outputs(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.path().extension() != ".json") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), dir).string()] = ss.str();
    }
    return out;
}

Outcome determinism() {
    Checks c;
    std::vector<fs::path> scenes;
    for (const auto& e : fs::directory_iterator(SCENE_DIR)) {
        if (e.is_regular_file() && e.path().extension() == ".json") scenes.push_back(e.path());
    }
    std::sort(scenes.begin(), scenes.end());
    const fs::path root = fs::temp_directory_path() / "diffeo_acceptance";
    fs::remove_all(root);
    std::ostringstream log;
    int status = 0;
    for (const char* run : {"a", "b"}) {
        for (const auto& s : scenes) {
            cli::RunFlags flags;
            flags.out_dir = (root / run / s.stem()).string();
            fs::create_directories(flags.out_dir);
            status |= cli::run_scene_file(s.string(), flags, log);
        }
    }
    const auto a = json_outputs(root / "a"), b = json_outputs(root / "b");
    c.note(std::to_string(scenes.size()) + " scenes, " + std::to_string(a.size()) + " reports");
    c.require("all scenes exit 0", status == 0);
    c.require("reports present", !a.empty());
    c.require("byte-identical", a == b);
    fs::remove_all(root);
    return c.outcome();
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"curvature", 30, curvature},      {"transit_time", 5, transit},     {"conjugacy", 60, conjugacy},
        {"flattening", 120, flattening},   {"reduce_interval", 600, reduction}, {"mather", 120, mather},
        {"certificates", 120, certificates}, {"length_functionals", 180, lengths}, {"determinism", 60, determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& k = criteria[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = k.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= k.budget_s) {
            o.ok = false;
            o.detail += ", over time budget";
        }
        failed += !o.ok;
        std::printf("%s %zu %s (%.1f s): %s\n", o.ok ? "PASS" : "FAIL", i + 1, k.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "diffeo/distortion.hpp"
#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"
#include "diffeo/grid.hpp"
#include "doctest.h"

using namespace diffeo;

namespace {

template <class F>
std::optional<ErrorKind> error_kind(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

VectorField1D field(FieldExpr e, std::vector<ZeroSpec> zeros = {{0, 0}, {1, 1}}) {
    return VectorField1D(Domain::unit(), std::move(e), std::move(zeros));
}

// Pairs supported in [o, o + 0.1], shrinking with n.
std::vector<std::pair<Diffeo1D, Diffeo1D>> local_pairs(int N, double o = 0.1) {
    std::vector<std::pair<Diffeo1D, Diffeo1D>> pairs;
    for (int n = 0; n < N; ++n) {
        const double e = 0.02 / (n + 1);
        const std::vector<ZeroSpec> z = {{0, o}, {o + 0.1, 1}};
        const VectorField1D A = field(fx::scale(e, fx::bump(o, o + 0.02, o + 0.05, o + 0.1)), z);
        const VectorField1D B = field(fx::scale(e, fx::polynomial({0, 10}, o) * fx::bump(o, o + 0.04, o + 0.08, o + 0.1)), z);
        pairs.push_back({dm::flow(A, 1), dm::flow(B, 1)});
    }
    return pairs;
}

const WordCertificate& five_pair_certificate() {
    static const WordCertificate c = build_interval_certificate(local_pairs(5), {0.1, 0.2}, {0.05, 0.95}, 0.8);
    return c;
}

double sup_diff(const Diffeo1D& f, const Diffeo1D& g, int nodes) {
    double m = 0;
    for (int i = 0; i <= nodes; ++i) {
        const double x = static_cast<double>(i) / nodes;
        m = std::max(m, std::abs(f(x) - g(x)));
    }
    return m;
}

DecompositionRecord record_of(double scale, double eta = 0.01) {
    FlowProduct p;
    p.fields = {field(fx::scale(scale, fx::polynomial({0, 0, 1}) * fx::polynomial({0, 0, 1}, 1.0)))};
    return flow_root_decomposition(p, eta, 14);
}

}  // namespace

TEST_CASE("commutator curvature vanishes for disjointly supported fields") {
    const VectorField1D X = field(fx::bump(0.1, 0.2, 0.3, 0.4), {{0, 0.1}, {0.4, 1}});
    const VectorField1D Y = field(fx::bump(0.5, 0.6, 0.7, 0.8), {{0, 0.5}, {0.8, 1}});
    for (double x : {0.15, 0.45, 0.65}) {
        const Curvature c = commutator_curvature(X, Y, x);
        CHECK(c.analytic == 0);
        CHECK(std::abs(c.finite_difference) < 1e-7);
    }
}

TEST_CASE("commutator curvature of two cubics") {
    // X = x(1-x)^2, Y = x^2(1-x); 2(X'Y - Y'X) at 1/2 is -1/8.
    const VectorField1D X = field(fx::polynomial({0, 1, -2, 1}));
    const VectorField1D Y = field(fx::polynomial({0, 0, 1, -1}));
    const Curvature c = commutator_curvature(X, Y, 0.5);
    CHECK(c.analytic == doctest::Approx(-0.125).epsilon(1e-14));
    CHECK(std::abs(c.finite_difference - c.analytic) < 1e-6);
    CHECK(c.error == doctest::Approx(std::abs(c.finite_difference - c.analytic)));
}

TEST_CASE("commutator curvature is antisymmetric and second order in h") {
    const VectorField1D X = field(fx::polynomial({0, 1, -1}));
    const VectorField1D Y = field(fx::polynomial({0, 0, 1, -1}) * fx::polynomial({1, 2}));
    for (double x : {0.2, 0.37, 0.81}) {
        const Curvature a = commutator_curvature(X, Y, x), b = commutator_curvature(Y, X, x);
        CHECK(a.analytic == doctest::Approx(-b.analytic));
        CHECK(a.finite_difference == doctest::Approx(-b.finite_difference).epsilon(1e-5));
        const double e1 = commutator_curvature(X, Y, x, 2e-3).error, e2 = commutator_curvature(X, Y, x, 1e-3).error;
        CHECK(e1 / e2 > 3.0);
        CHECK(e1 / e2 < 5.0);
    }
}

TEST_CASE("word helpers") {
    const Word w = {{0, 1}, {1, -2}, {2, 3}};
    CHECK(word_length(w) == 6);
    const Word v = inverse_word(w);
    REQUIRE(v.size() == 3);
    CHECK(v[0].gen == 2);
    CHECK(v[0].power == -3);
    CHECK(v[2].power == -1);
    const std::vector<Diffeo1D> gens = {dm::affine(2, 0.1, Domain::interval(-100, 100)), dm::affine(1, 0.5, Domain::interval(-100, 100)),
                                        dm::affine(0.5, 0, Domain::interval(-100, 100))};
    std::vector<Diffeo1D> inv;
    for (const auto& g : gens) inv.push_back(dm::inverse(g));
    // w = a b^{-2} c^3: x -> x/8 -> x/8 - 1 -> x/4 - 2 + 0.1
    CHECK(evaluate_word(w, gens, inv, 8.0) == doctest::Approx(0.1));
    CHECK(evaluate_word(v, gens, inv, evaluate_word(w, gens, inv, 0.3)) == doctest::Approx(0.3));
    CHECK(error_kind([&] { evaluate_word({{5, 1}}, gens, inv, 0.0); }) == ErrorKind::config);
    CHECK(to_json(w) == json::parse("[[0,1],[1,-2],[2,3]]"));
}

TEST_CASE("a single pair gives a word of length 14") {
    const WordCertificate c = build_interval_certificate(local_pairs(1), {0.1, 0.2}, {0.05, 0.95}, 0.8);
    REQUIRE(c.words.size() == 1);
    CHECK(c.words[0].letters.size() == 14);
    CHECK(c.words[0].length_check);
    CHECK(c.words[0].residual_c0 < 1e-6);
    CHECK(c.ok);
    CHECK(c.labels == std::vector<std::string>{"h", "h'", "F", "F'"});
}

TEST_CASE("five pairs: lengths 14n+14 and small residuals") {
    const WordCertificate& c = five_pair_certificate();
    REQUIRE(c.words.size() == 5);
    for (int n = 0; n < 5; ++n) {
        CAPTURE(n);
        CHECK(c.words[n].n == n);
        CHECK(static_cast<long>(c.words[n].letters.size()) == 14L * n + 14);
        CHECK(word_length(c.words[n].letters) == 14L * n + 14);
        CHECK(c.words[n].residual_c0 < 1e-6);
        for (const auto& l : c.words[n].letters) CHECK(std::labs(l.power) == 1);
    }
    CHECK(c.disjointness_gap > 0);
    CHECK(c.ok);
    CHECK(c.J_prime.lo <= c.J.lo);
    CHECK(c.J_prime.hi >= c.J.hi);
}

TEST_CASE("certificate words agree with commutators off the check grid") {
    const WordCertificate& c = five_pair_certificate();
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int n : {0, 2, 4}) {
        for (int i = 0; i < 20; ++i) {
            const double x = u(rng);
            CHECK(std::abs(evaluate_word(c.words[n].letters, c.generators, c.inverses, x) - c.targets[n](x)) < 1e-6);
        }
    }
    const json j = to_json(c);
    CHECK(j.contains("words"));
    CHECK(j["words"].size() == 5);
}

TEST_CASE("certificate geometry is validated") {
    const auto pairs = local_pairs(2);
    CHECK(error_kind([&] { build_interval_certificate(pairs, {0.1, 0.2}, {0.05, 0.95}, 0.15); }) ==
          ErrorKind::config);
    CHECK(error_kind([&] { build_interval_certificate(pairs, {0.1, 0.2}, {0.12, 0.95}, 0.8); }) ==
          ErrorKind::config);
    CHECK(error_kind([&] { build_interval_certificate({}, {0.1, 0.2}, {0.05, 0.95}, 0.8); }) == ErrorKind::config);
    // Pairs not supported in J.
    CHECK(error_kind([&] { build_interval_certificate(pairs, {0.3, 0.4}, {0.05, 0.95}, 0.8); }) ==
          ErrorKind::config);
}

TEST_CASE("certificate mirrors when p lies below J") {
    const auto pairs = local_pairs(2, 0.8);
    const WordCertificate c = build_interval_certificate(pairs, {0.8, 0.9}, {0.05, 0.95}, 0.2);
    for (const auto& w : c.words) CHECK(w.residual_c0 < 1e-6);
    CHECK(c.ok);
}

TEST_CASE("epsilon schedule") {
    SUBCASE("identity conjugator gives one half") {
        const auto e = epsilon_schedule({0.2, 0.4}, dm::identity(), 1);
        REQUIRE(e.size() == 1);
        CHECK(e[0] == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("contracting conjugator: decreasing, and the bound holds when measured directly") {
        const WordCertificate& c = five_pair_certificate();
        const Segment Jp = c.J_prime;
        const Diffeo1D& h = c.generators[0];
        const auto e = epsilon_schedule(Jp, h, 2);
        REQUIRE(e.size() == 2);
        CHECK(e[0] > 0);
        CHECK(e[1] < e[0]);
        const double L = Jp.length();
        const FieldExpr bump = fx::bump(Jp.lo, Jp.lo + 0.25 * L, Jp.hi - 0.25 * L, Jp.hi);
        const auto gc = [&](double c) {
            return dm::flow(VectorField1D(Domain::unit(), fx::scale(c, bump), {{0, Jp.lo}, {Jp.hi, 1}}), 1);
        };
        for (int n = 1; n <= 2; ++n) {
            const GridSpec on_j{Jp.lo, Jp.hi, 129, true, false, 129};
            double lo = 0, hi = 1;
            for (int it = 0; it < 40; ++it) {
                const double mid = 0.5 * (lo + hi);
                (cr_distance_to_id(gc(mid), 3, on_j).value < e[n - 1] ? lo : hi) = mid;
            }
            const Diffeo1D g = gc(lo);
            const Diffeo1D conj = dm::compose({dm::power(h, n), g, dm::power(h, -n)});
            const double u = dm::power(h, n)(Jp.lo), w = dm::power(h, n)(Jp.hi);
            CHECK(cr_distance_to_id(conj, 3, GridSpec{u, w, 129, true, false, 129}).value < 1.0 / n);
        }
    }
    CHECK(error_kind([] { epsilon_schedule({0.2, 0.4}, dm::identity(), 0); }) == ErrorKind::config);
}

TEST_CASE("flow-root decomposition of a single flow") {
    FlowProduct p;
    p.fields = {field(fx::polynomial({0, 0, 1, -2, 1}) * fx::polynomial({0.2, 0.3}))};
    const DecompositionRecord d = flow_root_decomposition(p, 0.01, default_C0(p.domain));
    CHECK(d.residual < 1e-8);
    REQUIRE(d.word.size() == 1);
    CHECK(d.recorded_A_upper == word_length(d.word));
    for (double g : d.generator_distance) CHECK(g < 0.01);
    // The next coarser root is not eta-close.
    const Diffeo1D coarser = dm::flow(p.fields[0], 2.0 / d.word[0].power);
    CHECK(cr_distance_to_id(coarser, 3, GridSpec{0, 1, 65, true, false, 65}).value >= 0.01);
    CHECK(to_json(d).contains("recorded_A_upper"));
}

TEST_CASE("flow-root decomposition of a product") {
    FlowProduct p;
    p.fields = {field(fx::polynomial({0, 1, -1})), field(fx::bump(0.2, 0.3, 0.5, 0.6), {{0, 0.2}, {0.6, 1}})};
    p.times = {0.5, 1.0};
    const DecompositionRecord d = flow_root_decomposition(p, 0.05, 14);
    CHECK(d.residual < 1e-8);
    CHECK(d.word.size() == 2);
    CHECK(d.word[0].power == d.word[1].power);
    CHECK(record_residual(d, 65) < 1e-8);
}

TEST_CASE("flow-root decomposition respects C0") {
    FlowProduct p;
    for (int i = 0; i < 3; ++i) p.fields.push_back(field(fx::polynomial({0, 1, -1})));
    CHECK(error_kind([&] { flow_root_decomposition(p, 0.1, 2); }) == ErrorKind::config);
    CHECK(error_kind([&] { flow_root_decomposition(p, 0.0, 14); }) == ErrorKind::config);
    CHECK(default_C0(Domain::circle()) == 16);
    CHECK(default_C0(Domain::unit()) == 14);
}

TEST_CASE("identity has A equal to zero") {
    const DecompositionRecord d = flow_root_decomposition(FlowProduct{}, 0.1, 14);
    CHECK(d.recorded_A_upper == 0);
    CHECK(d.residual == 0);
}

TEST_CASE("record algebra") {
    const DecompositionRecord f = record_of(1.0), g = record_of(3.0);
    SUBCASE("product") {
        const DecompositionRecord p = record_product(f, g);
        CHECK(p.recorded_A_upper == f.recorded_A_upper + g.recorded_A_upper);
        CHECK(p.C == 2 * std::max(f.C, g.C));
        CHECK(p.generating_set.size() == 2);
        CHECK(p.residual < 1e-8);
        // Same generator twice is deduplicated.
        CHECK(record_product(f, f).generating_set.size() == 1);
    }
    SUBCASE("power") {
        const DecompositionRecord p = record_power(f, 3);
        CHECK(p.recorded_A_upper == 3 * f.recorded_A_upper);
        CHECK(p.residual < 1e-8);
        REQUIRE(p.target);
        CHECK(sup_diff(*p.target, dm::power(*f.target, 3), 32) < 1e-12);
    }
    SUBCASE("conjugate") {
        const DecompositionRecord c = record_conjugate(f, g);
        CHECK(c.recorded_A_upper == f.recorded_A_upper + 2 * g.recorded_A_upper);
        CHECK(c.residual < 1e-8);
    }
    SUBCASE("eta must agree") {
        CHECK(error_kind([&] { record_product(f, record_of(1.0, 0.02)); }) == ErrorKind::config);
    }
}

TEST_CASE("distortion report") {
    const VectorField1D X = field(fx::polynomial({0, 0, 1, -2, 1}));
    FlowProduct b;
    b.fields = {X};
    SUBCASE("ratios are constant under the power rule") {
        const DistortionReport r = distortion_report(b, {1, 2, 5}, 0.05);
        REQUIRE(r.rows.size() == 3);
        for (const auto& row : r.rows) CHECK(row.ratio == doctest::Approx(r.rows[0].ratio));
        CHECK(!r.note.empty());
        CHECK(r.dilation.empty());
    }
    SUBCASE("identity") {
        const DistortionReport r = distortion_report(FlowProduct{}, {1, 4}, 0.05);
        for (const auto& row : r.rows) CHECK(row.A_upper == 0);
    }
    SUBCASE("dilation words a^n b a^-n = b^(2^n)") {
        const DistortionReport r = distortion_report(b, {1, 2, 3, 4}, 0.05, dm::time_dilation(X, 0.5, 2.0));
        REQUIRE(r.dilation.size() == 4);
        for (const auto& row : r.dilation) {
            CAPTURE(row.n);
            CHECK(row.power == (1L << row.n));
            CHECK(row.word_length == 2 * row.n + 1);
            CHECK(row.ratio == doctest::Approx(static_cast<double>(2 * row.n + 1) / (1L << row.n)));
            CHECK(row.residual < 1e-8);
        }
        const json j = to_json(r);
        CHECK(j["dilation"].size() == 4);
    }
    CHECK(error_kind([&] { distortion_report(b, {0}, 0.05); }) == ErrorKind::config);
}

TEST_CASE("time dilation conjugates the flow to its square") {
    const VectorField1D X = field(fx::polynomial({0, 0, 1, -2, 1}));
    const Diffeo1D a = dm::time_dilation(X, 0.5, 2.0), b = dm::flow(X, 1);
    const Diffeo1D lhs = dm::compose({a, b, dm::inverse(a)});
    CHECK(sup_diff(lhs, dm::flow(X, 2), 64) < 1e-9);
    CHECK(a(0) == 0);
    CHECK(a(1) == 1);
    CHECK(sup_diff(dm::compose({a, dm::inverse(a)}), dm::identity(), 64) < 1e-10);
}

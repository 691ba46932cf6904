#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "diffeo/errors.hpp"
#include "diffeo/flow.hpp"
#include "diffeo/grid.hpp"
#include "diffeo/reduce.hpp"
#include "doctest.h"

using namespace diffeo;

namespace {

VectorField1D quartic() {
    return VectorField1D(Domain::unit(), fx::polynomial({0, 0, 1}) * fx::polynomial({0, 0, 1}, 1.0), {{0, 0}, {1, 1}});
}

VectorField1D interior_quartic() {
    return VectorField1D(
        Domain::unit(),
        fx::scale(16.0, fx::polynomial({0, 0, 1}) * fx::polynomial({0, 0, 1}, 0.5) * fx::polynomial({0, 0, 1}, 1.0)),
        {{0, 0}, {0.5, 0.5}, {1, 1}});
}

// exp(-c/x) exp(-c/(1-x)).
FieldExpr flat_pair(double c) {
    const FieldExpr l = fx::scale(1 / c, fx::affine_pushforward(c, 0, fx::flat(0, 1)));
    const FieldExpr r = fx::scale(1 / c, fx::affine_pushforward(c, 1 - c, fx::flat(1, -1)));
    return l * r;
}

// Flat at both ends, a bump in the middle; ITI at 0 and 1 only.
VectorField1D iti_field() {
    return VectorField1D(Domain::unit(), 1e-3 * flat_pair(0.01) + 0.2 * fx::bump(0.3, 0.4, 0.6, 0.7),
                         {{0, 0}, {1, 1}});
}

// Same ends with a parabolic zero at 1/2.
VectorField1D iti_field_interior() {
    const FieldExpr e = fx::polynomial({0, 0, 4}, 0.5) * (1e-4 * flat_pair(0.01) + 0.2 * fx::bump(0.3, 0.4, 0.6, 0.7));
    return VectorField1D(Domain::unit(), e, {{0, 0}, {0.5, 0.5}, {1, 1}});
}

VectorField1D exp_flat() {
    return VectorField1D(Domain::unit(), fx::flat(0, 1) * fx::flat(1, -1), {{0, 0}, {1, 1}});
}

double cr_norm(const VectorField1D& Y, int r, double a, double b, int n) {
    double m = 0;
    for (int i = 0; i <= n; ++i) {
        const Jet j = Y.jet(a + (b - a) * i / n, r);
        for (int k = 0; k <= r; ++k) m = std::max(m, std::abs(j[k]));
    }
    return m;
}

double conj_residual(const Diffeo1D& phi, const Diffeo1D& f, const Diffeo1D& g, int n) {
    double m = 0;
    for (int i = 1; i < n; ++i) {
        const double x = static_cast<double>(i) / n;
        m = std::max(m, std::abs(phi(f(x)) - g(phi(x))));
    }
    return m;
}

template <class F>
std::optional<ErrorKind> error_kind(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------- flattening

TEST_CASE("flatten_map is a homothety near both ends") {
    const double lambda = 64;
    const Diffeo1D phi = flatten_map(lambda);
    const Jet j = phi.jet(1e-3, 3);
    CHECK(j[0] == doctest::Approx(lambda * 1e-3).epsilon(1e-15));
    CHECK(j[1] == lambda);
    CHECK(j[2] == 0);
    CHECK(j[3] == 0);
    const Jet k = phi.jet(1 - 1e-3, 3);
    CHECK(k[0] == doctest::Approx(1 - lambda * 1e-3).epsilon(1e-15));
    CHECK(k[1] == lambda);
    CHECK(phi(0.5) == doctest::Approx(0.5));
    CHECK(phi.jet(0.5, 1)[1] == doctest::Approx(1 / (2 * lambda - 2)));
    for (int i = 0; i <= 1000; ++i) CHECK(phi.jet(i / 1000.0, 1)[1] > 0);
    // Order-3 jets are of size lambda (4 lambda)^2 at the junctions.
    CHECK(glue_mismatch(phi, 3) < 1e-9 * lambda * std::pow(4 * lambda, 3));
}

TEST_CASE("flatten_map rejects ratios not above one") {
    CHECK(error_kind([&] { flatten_map(1.0); }) == ErrorKind::config);
}

TEST_CASE("flattening x^2(1-x)^2 reaches eta") {
    const VectorField1D X = quartic();
    const FlattenResult fr = flatten_field(X, 0.1, 2);
    CHECK(std::isfinite(fr.lambda));
    CHECK(fr.lambda > 1);
    CHECK(fr.y_norm < 0.1);
    CHECK(cr_norm(fr.Y, 2, 0, 1, 4000) < 0.1);
    CHECK(fr.transit_match_residual < 1e-8);
    // Sweep runs 2, 4, 8, ... and stops at the first success.
    for (size_t i = 0; i < fr.sweep.size(); ++i) CHECK(fr.sweep[i].first == std::pow(2.0, i + 1));
    CHECK(fr.sweep.back().second < 0.1);
    for (size_t i = 0; i + 1 < fr.sweep.size(); ++i) CHECK_FALSE(fr.sweep[i].second < 0.1);

    // Transit equality with x0 = 1/(8 lambda).
    const double x0 = 1 / (8 * fr.lambda);
    const double tx = transit_time(X, x0, 1 - x0);
    const double ty = transit_time(fr.Y, fr.lambda * x0, 1 - fr.lambda * x0);
    CHECK(std::abs(tx - ty) < 1e-8 * tx);

    // Homothety jets near both ends.
    const double p = 0.5 * x0;
    for (auto [x, c] : {std::pair{p, 0.0}, std::pair{1 - p, 1.0}}) {
        const Jet j = fr.phi.jet(x, 2);
        CHECK(j[0] == doctest::Approx(c + fr.lambda * (x - c)).epsilon(1e-14));
        CHECK(j[1] == doctest::Approx(fr.lambda).epsilon(1e-14));
        CHECK(std::abs(j[2]) < 1e-9);
    }
    CHECK(fr.homothety_defect < 1e-6);
    CHECK(conj_residual(fr.phi, dm::flow(X, 1), dm::flow(fr.Y, 1), 64) < 1e-7);
}

TEST_CASE("transit time of the flattened family is monotone in u") {
    const VectorField1D X = quartic();
    const FlattenResult fr = flatten_field(X, 0.1, 2);
    const double lambda = fr.lambda;
    auto Y = [&](double u) {
        const FieldExpr c = fx::constant(u);
        return VectorField1D(Domain::unit(),
                             c + fx::step(0.25, 0.125) * (fx::affine_pushforward(lambda, 0, X.expr()) - c) +
                                 fx::step(0.75, 0.875) * (fx::affine_pushforward(lambda, 1 - lambda, X.expr()) - c));
    };
    const double x0 = 1 / (8 * lambda);
    const double tx = transit_time(X, x0, 1 - x0);
    CHECK(transit_time(Y(0.5 * fr.u), 0.125, 0.875) > tx);
    CHECK(transit_time(Y(2 * fr.u), 0.125, 0.875) < tx);
    // At u = sup X_lambda the Y-integral is at most the X-integral.
    const Diffeo1D phi = flatten_map(lambda);
    double sup = 0;
    for (int i = 0; i <= 20000; ++i) {
        const double x = i / 20000.0;
        sup = std::max(sup, phi.jet(x, 1)[1] * X(x));
    }
    CHECK(transit_time(Y(sup), 0.125, 0.875) <= tx);
    // As u -> 0 the middle block dominates: u T(u) decreases to 1/2.
    double prev = INFINITY;
    for (double u : {1e-4, 1e-6, 1e-8, 1e-10}) {
        const double v = u * transit_time(Y(u), 0.125, 0.875);
        CHECK(v > 0.5);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(prev < 0.52);
}

TEST_CASE("a fixed lambda below lambda_X is reported") {
    CHECK(error_kind([&] { flatten_field(quartic(), 1e-3, 2, 2.0); }) == ErrorKind::numeric);
}

TEST_CASE("flatten_field input validation") {
    const VectorField1D moving(Domain::unit(), fx::polynomial({0, 1, -1}), {{0, 0}, {1, 1}});
    CHECK(error_kind([&] { flatten_field(moving, 0.1, 2); }) == ErrorKind::config);
    CHECK(error_kind([&] { flatten_field(interior_quartic(), 0.1, 2); }) == ErrorKind::config);
    CHECK(error_kind([&] { flatten_field(quartic(), 0.0, 2); }) == ErrorKind::config);
}

TEST_CASE("negative fields flatten with the sign kept") {
    const VectorField1D X(Domain::unit(), fx::scale(-1.0, quartic().expr()), {{0, 0}, {1, 1}});
    const FlattenResult fr = flatten_field(X, 0.1, 2);
    CHECK(fr.u < 0);
    CHECK(fr.Y(0.5) < 0);
    CHECK(fr.y_norm < 0.1);
}

TEST_CASE("calibrated eta keeps time-1 maps epsilon-close") {
    const double eps = 0.05;
    const double eta = calibrate_eta(eps, 2);
    CHECK(eta > 0);
    CHECK(eta < eps);
    CHECK(calibrate_eta(eps, 2) == eta);
    CHECK(calibrate_eta(0.1, 2) >= eta);
    const GridSpec grid{0.0, 1.0, 129, true, false, 129};
    const FieldExpr e = fx::polynomial({0, 1, -1}) * fx::polynomial({1, 0.5});
    const VectorField1D V(Domain::unit(), e, {{0, 0}, {1, 1}});
    const double n = cr_norm(V, 2, 0, 1, 4000);
    const VectorField1D W(Domain::unit(), fx::scale(0.99 * eta / n, e), V.zeros());
    CHECK(cr_distance_to_id(dm::flow(W, 1.0), 2, grid).value < eps);
}

// ---------------------------------------------------------------- ITI points

TEST_CASE("flow displacement matches the flow") {
    const VectorField1D X(Domain::unit(), fx::polynomial({0, 1, -1}), {{0, 0}, {1, 1}});
    for (double t : {-1.0, 0.5, 2.0}) {
        for (double x : {0.2, 0.5, 0.9}) {
            CHECK(flow_displacement(X, t, x) == doctest::Approx(flow(X, t, x, 0).value() - x).epsilon(1e-10));
        }
    }
    const VectorField1D F = iti_field();
    for (double x : {2e-3, 5e-3}) {
        const double d = flow_displacement(F, 1, x);
        CHECK(d > 0);
        CHECK(d == doctest::Approx(flow(F, 1, x, 0).value() - x).epsilon(1e-6));
    }
    // Far inside the flat region the difference underflows, the series does not.
    CHECK(flow(F, 1, 2e-4, 0).value() - 2e-4 == 0);
    CHECK(flow_displacement(F, 1, 2e-4) == doctest::Approx(F(2e-4)).epsilon(1e-6));
}

TEST_CASE("cut-off norms are increasing in the order") {
    const FieldExpr chi = fx::step(1.0, 0.5);
    for (int k = 0; k <= 3; ++k) {
        double m = 0;
        for (int i = 0; i <= 2000; ++i) {
            const Jet j = chi->eval(0.5 + 0.5 * i / 2000, k);
            for (int o = 0; o <= k; ++o) m = std::max(m, std::abs(j[o]));
        }
        CHECK(cutoff_norm(k) >= m * (1 - 1e-9));
        CHECK(cutoff_norm(k) <= m * 1.01);
    }
    CHECK(cutoff_norm(0) == doctest::Approx(1.0));
    for (int k = 1; k <= kMaxOrder; ++k) CHECK(cutoff_norm(k) >= cutoff_norm(k - 1));
}

TEST_CASE("regularity points near a flat zero") {
    const VectorField1D X = exp_flat();
    const Diffeo1D f = dm::flow(X, 1);
    for (Side side : {Side::left, Side::right}) {
        RegularityOptions o;
        o.side = side;
        const RegularityPoint p = regularity_point_search(X, f, 2, 0.1, 0.25, o);
        CHECK(p.norm_margin >= 0);
        CHECK(p.value_margin >= 0);
        CHECK(p.norm <= std::pow(p.displacement, 0.9));
        CHECK(std::abs(X(p.x0)) >= 0.5 * p.displacement);
        CHECK(p.displacement == doctest::Approx(std::abs(X(p.x0))).epsilon(1e-6));
        CHECK(std::min(p.x0, 1 - p.x0) < 0.25);
    }
    const RegularityPoint a = regularity_point_search(X, f, 2, 0.1, 0.25);
    const RegularityPoint b = regularity_point_search(X, f, 2, 0.05, 0.25);
    CHECK(b.x0 <= a.x0);
    CHECK(b.norm <= std::pow(b.displacement, 0.95));
    CHECK(std::pow(b.displacement, 0.95) <= std::pow(b.displacement, 0.9));
}

TEST_CASE("regularity search failures") {
    const VectorField1D X = exp_flat();
    const Diffeo1D f = dm::flow(X, 1);
    CHECK(error_kind([&] { regularity_point_search(X, f, 2, 1.5, 0.25); }) == ErrorKind::config);
    RegularityOptions o;
    o.floor = 0.1;
    CHECK(error_kind([&] { regularity_point_search(X, f, 2, 0.1, 0.25, o); }) == ErrorKind::numeric);
    const VectorField1D Q(Domain::unit(), fx::polynomial({0, 1, -1}), {{0, 0}, {1, 1}});
    CHECK(error_kind([&] { regularity_point_search(Q, dm::flow(Q, 1), 2, 0.1, 0.25); }) == ErrorKind::config);
}

TEST_CASE("ITI interpolation with the displayed smallness conditions") {
    const VectorField1D X = exp_flat();
    const Diffeo1D f = dm::flow(X, 1);
    const double eta = 0.5;
    const int r = 1;
    const ItiInterpolation L = interpolate_ITI(X, f, eta, r);
    CHECK(L.delta < 1.0 / (2 * r + 1));
    CHECK(L.b == doctest::Approx(std::pow(L.displacement, 2 * L.delta)));
    const double d = L.displacement;
    CHECK(std::pow(d, L.delta) < eta);
    CHECK(L.property4 <= eta);
    CHECK(L.property5 > 0);
    CHECK(cr_norm(L.Y, r, L.x0 - d, L.x0 + eta, 2000) <= eta);
    for (int i = 0; i <= 200; ++i) CHECK(L.Y(L.x0 + eta * i / 200) > 0);
    // Constant beyond the interpolation width.
    for (double x : {L.x0 + L.b, L.x0 + eta, 0.9, 0.999}) CHECK(L.Y(x) == X(L.x0));
    // Left of x0 the field is untouched.
    for (double x : {0.5 * L.x0, 0.9 * L.x0}) CHECK(L.Y(x) == X(x));
}

TEST_CASE("ITI interpolation, measured rule, both sides") {
    const VectorField1D X = iti_field();
    const Diffeo1D f = dm::flow(X, 1);
    const int r = 1;
    const double eta = 1e-3;
    for (Side side : {Side::left, Side::right}) {
        ItiOptions o;
        o.rule = SmallnessRule::measured;
        o.window = 0.1;
        o.x_max = 0.125;
        o.side = side;
        const ItiInterpolation L = interpolate_ITI(X, f, eta, r, o);
        const double s = side == Side::left ? 1 : -1;
        CHECK(L.b == 0.1);
        CHECK(L.property4 <= eta);
        CHECK(cr_norm(L.Y, r, L.x0, L.x0 + s * 0.1, 2000) <= eta);
        CHECK(L.a[0] == X(L.x0));
        for (int i = 0; i <= 200; ++i) CHECK(L.Y(L.x0 + s * 0.1 * i / 200) > 0);
        for (double t : {0.1, 0.3, 0.6}) CHECK(L.Y(L.x0 + s * t) == L.a[0]);
        // Jets continuous at x0 to order r.
        const Jet lo = L.Y.jet(std::nextafter(L.x0, -1.0), r), hi = L.Y.jet(std::nextafter(L.x0, 2.0), r);
        for (int k = 0; k <= r; ++k) CHECK(std::abs(lo[k] - hi[k]) <= 1e-9 * (std::abs(lo[k]) + 1e-30) + 1e-20);
    }
}

TEST_CASE("interpolate_ITI argument checks") {
    const VectorField1D X = exp_flat();
    const Diffeo1D f = dm::flow(X, 1);
    CHECK(error_kind([&] { interpolate_ITI(X, f, 0.0, 1); }) == ErrorKind::config);
    CHECK(error_kind([&] { interpolate_ITI(X, f, 0.5, 0); }) == ErrorKind::config);
    ItiOptions o;
    o.delta = 0.4;
    CHECK(error_kind([&] { interpolate_ITI(X, f, 0.5, 1, o); }) == ErrorKind::config);
}

// ---------------------------------------------------------------- Borel smoothing

TEST_CASE("Borel smoothing without jumps returns the field") {
    const VectorField1D Y(Domain::unit(), fx::polynomial({0.3, 0.2, -0.1, 0.05}));
    const VectorField1D Z = borel_smooth(Y, 0.5, 0.1, 2);
    CHECK(Z.expr() == Y.expr());
    for (int i = 0; i <= 10; ++i) CHECK(Z(i / 10.0) == Y(i / 10.0));
}

TEST_CASE("Borel smoothing of a single jump") {
    const int r = 2;
    const double x0 = 0.5, alpha = 0.05, a = 3.0;
    std::vector<double> c(r + 2, 0.0);
    c[0] = 1;
    c[r + 1] = a / 6;
    const VectorField1D Y(Domain::unit(), fx::piecewise({x0}, {fx::constant(1), fx::polynomial(c, x0)}));
    const VectorField1D Z = borel_smooth(Y, x0, alpha, r);
    double diff = 0;
    for (int i = 0; i <= 4000; ++i) {
        const double x = x0 + alpha * i / 4000;
        const Jet z = Z.jet(x, r), y = Y.jet(x, r);
        for (int k = 0; k <= r; ++k) diff = std::max(diff, std::abs(z[k] - y[k]));
    }
    CHECK(diff > 0);
    CHECK(diff < alpha);
    for (double x : {0.0, 0.2, 0.4999, x0 + alpha, 0.7, 1.0}) CHECK(Z(x) == Y(x));
    const Jet lo = Z.jet(std::nextafter(x0, 0.0), r + 1), hi = Z.jet(std::nextafter(x0, 1.0), r + 1);
    CHECK(std::abs(lo[r + 1] - hi[r + 1]) < 1e-9);
    CHECK(error_kind([&] { borel_smooth(Y, x0, 0.0, r); }) == ErrorKind::config);
}

TEST_CASE("Borel smoothing on the right side modifies the left") {
    const int r = 1;
    const double x0 = 0.5, alpha = 0.05;
    const VectorField1D Y(Domain::unit(), fx::piecewise({x0}, {fx::polynomial({1, 0, 2}, x0), fx::constant(1)}));
    const VectorField1D Z = borel_smooth(Y, x0, alpha, r, Side::right);
    for (double x : {0.5, 0.6, 1.0, x0 - alpha, 0.2}) CHECK(Z(x) == Y(x));
    CHECK(Z(x0 - 1e-4) != Y(x0 - 1e-4));
    const Jet lo = Z.jet(std::nextafter(x0, 0.0), 2), hi = Z.jet(std::nextafter(x0, 1.0), 2);
    CHECK(std::abs(lo[2] - hi[2]) < 1e-9);
}

// ---------------------------------------------------------------- reduction

TEST_CASE("ITI detection") {
    CHECK(detect_iti(iti_field()) == std::vector<double>{0, 1});
    CHECK(detect_iti(quartic()).empty());
    CHECK(detect_iti(iti_field_interior()) == std::vector<double>{0, 1});
}

TEST_CASE("reduction without interior zeros lands on an integer offset") {
    const VectorField1D X = iti_field();
    const Diffeo1D f = dm::flow(X, 1);
    const double eps = 0.5;
    const int r = 1;
    const ReductionStep s = reduce_no_interior_ITI({X, {}}, eps, r);
    REQUIRE(s.offsets.size() == 1);
    const double sigma = s.offsets[0];
    CHECK(std::abs(sigma - std::round(sigma)) < 1e-6);
    CHECK(s.dr_to_isometry < eps);
    CHECK(cr_distance_to_id(s.conjugate, r, GridSpec{0, 1, 257, true, false, 257}).value < eps);
    CHECK(s.residual < 1e-6);
    CHECK(conj_residual(s.conjugator, f, s.conjugate, 128) < 1e-6);
    REQUIRE(s.boundary_tags.size() == 2);
    CHECK(s.boundary_tags[0].kind == BoundaryTag::Kind::identity);
    CHECK(s.boundary_tags[1].kind == BoundaryTag::Kind::power_of_f);
    CHECK(s.boundary_tags[1].value == std::round(sigma));
    for (const auto& t : s.boundary_tags) CHECK(t.defect < 1e-6);

    // Conjugator against f^sigma past the orbit segment of length |sigma| near 1.
    const Diffeo1D fn = dm::flow(X, std::round(sigma));
    for (double t : {std::abs(sigma) + 100, std::abs(sigma) + 1000}) {
        const double x = flow(X, t, 0.9, 0).value();
        CHECK(max_abs_diff(s.conjugator.jet(x, r), fn.jet(x, r)) < 1e-6);
    }
    for (double t : {0.0, 100.0, 300.0}) {
        const double x = flow(X, -t, 0.1, 0).value();
        CHECK(max_abs_diff(s.conjugator.jet(x, r), Jet::identity(x, r)) < 1e-6);
    }
}

TEST_CASE("reduction across an interior parabolic zero") {
    const VectorField1D X = iti_field_interior();
    const Diffeo1D f = dm::flow(X, 1);
    const double eps = 0.5;
    const int r = 1;
    const ReductionStep s = reduce_no_interior_ITI({X, std::vector<double>{0, 1}}, eps, r);
    REQUIRE(s.offsets.size() == 2);
    for (double o : s.offsets) CHECK(std::abs(o - std::round(o)) < 1e-6);
    CHECK(s.dr_to_isometry < eps);
    CHECK(conj_residual(s.conjugator, f, s.conjugate, 128) < 1e-6);
    int homotheties = 0, powers = 0;
    for (const auto& t : s.boundary_tags) {
        CHECK(t.defect < 1e-6);
        if (t.kind == BoundaryTag::Kind::homothety) {
            ++homotheties;
            CHECK(t.point == 0.5);
            CHECK(t.value > 1);
        }
        if (t.kind == BoundaryTag::Kind::power_of_f) ++powers;
    }
    CHECK(homotheties == 2);
    CHECK(powers == 2);
    const Diffeo1D fs = dm::flow(X, std::round(s.offsets[0])), ft = dm::flow(X, std::round(s.offsets[1]));
    for (double t : {0.0, 200.0}) {
        const double x = flow(X, -t, 0.05, 0).value(), y = flow(X, t, 0.95, 0).value();
        CHECK(max_abs_diff(s.conjugator.jet(x, r), fs.jet(x, r)) < 1e-6);
        CHECK(max_abs_diff(s.conjugator.jet(y, r), ft.jet(y, r)) < 1e-6);
    }
    // Fixed point 1/2 is preserved.
    CHECK(s.conjugator(0.5) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("reduce_no_interior_ITI input checks") {
    CHECK(error_kind([&] { reduce_no_interior_ITI({quartic(), {}}, 0.05, 2); }) == ErrorKind::config);
    CHECK(error_kind([&] { reduce_no_interior_ITI({iti_field(), std::vector<double>{0, 0.5, 1}}, 0.5, 1); }) == ErrorKind::config);
}

TEST_CASE("maps already close to the identity take one step") {
    const VectorField1D X(Domain::unit(), fx::scale(1e-4, fx::polynomial({0, 1, -1})), {{0, 0}, {1, 1}});
    const ReductionTrace t = reduce_interval({X, {}}, 0.05, 2);
    REQUIRE(t.steps.size() == 1);
    CHECK(t.steps[0].dr_to_isometry < 0.05);
    CHECK(t.block_types == std::vector<char>{'A'});
    for (double x : {0.1, 0.5, 0.9}) CHECK(t.steps[0].conjugator(x) == x);
}

TEST_CASE("nowhere-ITI reduction with common ratio tags") {
    const double eps = 0.05;
    const int r = 2;
    for (const VectorField1D& X : {quartic(), interior_quartic()}) {
        const Diffeo1D f = dm::flow(X, 1);
        const ReductionTrace t = reduce_interval({X, {}}, eps, r);
        REQUIRE(t.steps.size() == 2);
        CHECK(t.target_epsilon == eps);
        CHECK(t.steps[1].dr_to_isometry < t.steps[0].dr_to_isometry);
        CHECK(t.steps[1].dr_to_isometry < eps);
        CHECK(cr_distance_to_id(t.steps[1].conjugate, r, GridSpec{0, 1, 257, true, false, 257}).value < eps);
        CHECK(t.steps[1].residual < 1e-6);
        CHECK(conj_residual(t.steps[1].conjugator, f, t.steps[1].conjugate, 128) < 1e-6);
        CHECK(glue_mismatch(t.steps[1].conjugator, r) < 1e-7);
        double ratio = 0;
        for (const auto& g : t.steps[1].boundary_tags) {
            CHECK(g.kind == BoundaryTag::Kind::homothety);
            CHECK(g.defect < 1e-6);
            if (ratio == 0) ratio = g.value;
            CHECK(g.value == ratio);
        }
        CHECK(t.steps[1].boundary_tags.size() == X.zeros().size());
        // Homothety jets at each zero.
        for (const auto& z : X.zeros()) {
            const double x = z.lo + (z.lo < 1 ? 1e-6 : -1e-6);
            const Jet j = t.steps[1].conjugator.jet(x, r);
            CHECK(j[1] == doctest::Approx(ratio).epsilon(1e-6));
        }
    }
}

TEST_CASE("ITI subdivision, blocks and trace output") {
    const double eps = 0.5;
    const int r = 1;
    const VectorField1D X = iti_field();
    const Diffeo1D f = dm::flow(X, 1);
    const ReductionTrace t = reduce_interval({X, {}}, eps, r);
    REQUIRE(t.steps.size() == 2);
    CHECK(t.subdivision == std::vector<double>{0, 1});
    CHECK(t.block_types == std::vector<char>{'B'});
    CHECK(t.steps[1].dr_to_isometry < eps);
    CHECK(t.steps[1].dr_to_isometry < t.steps[0].dr_to_isometry);
    CHECK(conj_residual(t.steps[1].conjugator, f, t.steps[1].conjugate, 128) < 1e-6);

    const json j = to_json(t);
    CHECK(j.at("steps").size() == 2);
    CHECK(j.at("target_epsilon") == eps);
    CHECK(j.at("steps")[1].at("boundary_tags").size() == 2);
    CHECK(j.at("steps")[1].at("boundary_tags")[1].at("kind") == "power_of_f");
    CHECK(j.dump() == to_json(t).dump());

    std::ostringstream os;
    t.write_svg(os);
    const std::string svg = os.str();
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("mixed ITI and non-ITI boundary points are rejected") {
    const FieldExpr e = fx::polynomial({0, 0, 1}, 1.0) * flat_pair(0.05);
    const VectorField1D X(Domain::unit(), fx::scale(1e-3, e) + fx::polynomial({0, 0, 1}, 1.0) * fx::bump(0.3, 0.4, 0.6, 0.7),
                          {{0, 0}, {1, 1}});
    CHECK(error_kind([&] { reduce_interval({X, std::vector<double>{0}}, 0.5, 1); }) == ErrorKind::config);
}

// ---------------------------------------------------------------- rational rotation

TEST_CASE("rational rotation: a root commuting with the rotation") {
    const Domain C = Domain::circle();
    const VectorField1D X(C, fx::fourier(0.05, {0, -0.05}, {}));
    const Diffeo1D psi = dm::flow(VectorField1D(C, fx::fourier(0, {0.1}, {0.05})), 0.3);
    const Diffeo1D f = dm::compose({psi, dm::rotation(0.5), dm::flow(X, 1), dm::inverse(psi)});
    const NormalizedRational n = normalize_rational(f, 1, 2, {X, psi, false});
    CHECK(n.root_residual < 1e-7);
    CHECK(n.commutation_residual < 1e-7);
    CHECK(n.conjugacy_residual < 1e-7);
    const Diffeo1D R = dm::rotation(0.5);
    for (int i = 0; i < 16; ++i) {
        const double x = (i + 0.25) / 16;
        CHECK(n.normalized(n.conjugator(x)) == doctest::Approx(n.conjugator(f(x))).epsilon(1e-7));
        CHECK(n.normalized(x) == doctest::Approx(R(n.h(x))).epsilon(1e-7));
        CHECK(n.h(R(x)) == doctest::Approx(R(n.h(x))).epsilon(1e-7));
    }
}

TEST_CASE("rational rotation: the rotation itself") {
    const Domain C = Domain::circle();
    const NormalizedRational n = normalize_rational(dm::rotation(0.5), 1, 2, {VectorField1D(C, fx::constant(0)), {}, false});
    CHECK(n.normalized(0.3) == doctest::Approx(0.8));
    CHECK(n.conjugator(0.3) == doctest::Approx(0.3));
}

TEST_CASE("rational rotation: ITI power supported on one arc") {
    const Domain C = Domain::circle();
    for (auto [p, q] : {std::pair{1, 2}, std::pair{2, 3}}) {
        std::vector<FieldExpr> terms;
        for (int k = 0; k < q; ++k) {
            const double a = static_cast<double>(k) / q, w = 1.0 / q;
            terms.push_back((0.05 + 0.03 * k) * fx::bump(a + 0.1 * w, a + 0.3 * w, a + 0.7 * w, a + 0.9 * w));
        }
        const VectorField1D Z(C, fx::sum(terms));
        const Diffeo1D f = dm::compose({dm::rotation(static_cast<double>(p) / q), dm::flow(Z, 1)});
        const NormalizedRational n = normalize_rational(f, p, q, {Z, {}, true});
        CHECK(n.jet_mismatch < 1e-7);
        CHECK(n.support_defect < 1e-9);
        CHECK(n.conjugacy_residual < 1e-9);
        const double rho = static_cast<double>(p) / q;
        for (int i = 0; i <= 16; ++i) {
            // normalized = R on the complement of R^{-1}[0, 1/q].
            const double y = 1.0 / q + (1 - 1.0 / q) * i / 16;
            CHECK(std::abs(n.normalized(y - rho) - y) < 1e-9);
            const double x = (i + 0.5) / 17;
            CHECK(std::abs(n.conjugator(f(x)) - n.normalized(n.conjugator(x))) < 1e-9);
        }
    }
}

TEST_CASE("rational rotation input checks") {
    const Domain C = Domain::circle();
    const VectorField1D zero(C, fx::constant(0));
    CHECK(error_kind([&] { normalize_rational(dm::rotation(0.5), 2, 4, {zero, {}, false}); }) == ErrorKind::config);
    CHECK(error_kind([&] { normalize_rational(dm::rotation(0.25), 1, 2, {zero, {}, false}); }) == ErrorKind::config);
    const VectorField1D X(C, fx::fourier(0.05, {0.05}, {}));
    CHECK(error_kind([&] { normalize_rational(dm::compose({dm::rotation(0.5), dm::flow(X, 1)}), 1, 2, {X, {}, false}); }) == ErrorKind::config);
}

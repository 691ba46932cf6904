// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <vector>

#include "diffeo/distortion.hpp"
#include "diffeo/grid.hpp"
#include "diffeo/mather.hpp"

using namespace diffeo;

namespace {

VectorField1D logistic() { return VectorField1D(Domain::unit(), fx::polynomial({0, 1, -1}), {{0, 0}, {1, 1}}); }

std::vector<double> nodes(int n) {
    std::vector<double> x;
    for (int i = 0; i < n; ++i) x.push_back((i + 0.5) / n);
    return x;
}

Exec exec_of(const benchmark::State& s) { return s.range(1) ? Exec::parallel : Exec::serial; }

void BM_SampleFlowJets(benchmark::State& state) {
    const Diffeo1D f = dm::flow(logistic(), 1.0);
    const auto x = nodes(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(sample_diffeo(f, x, 3, exec_of(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleFlowJets)->ArgsProduct({{256, 1024}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_CrDistance(benchmark::State& state) {
    const Diffeo1D f = dm::flow(logistic(), 0.1);
    const int n = static_cast<int>(state.range(0));
    const GridSpec g{0, 1, n, true, false, n};
    for (auto _ : state) benchmark::DoNotOptimize(cr_distance_to_id(f, 2, g, exec_of(state)));
}
BENCHMARK(BM_CrDistance)->ArgsProduct({{512}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_MatherMap(benchmark::State& state) {
    const VectorField1D X = logistic();
    const auto t = mather_nodes(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(mather_map(X, X, 0.3, 0.6, t, exec_of(state)));
}
BENCHMARK(BM_MatherMap)->ArgsProduct({{128}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_Certificate(benchmark::State& state) {
    std::vector<std::pair<Diffeo1D, Diffeo1D>> pairs;
    for (int n = 0; n < 3; ++n) {
        const double e = 0.02 / (n + 1);
        const std::vector<ZeroSpec> z = {{0, 0.1}, {0.2, 1}};
        pairs.push_back({dm::flow(VectorField1D(Domain::unit(), fx::scale(e, fx::bump(0.1, 0.12, 0.15, 0.2)), z), 1),
                         dm::flow(VectorField1D(Domain::unit(),
                                                fx::scale(e, fx::polynomial({0, 10}, 0.1) * fx::bump(0.1, 0.14, 0.18, 0.2)),
                                                z),
                                  1)});
    }
    CertificateOptions opt;
    opt.grid_nodes = static_cast<int>(state.range(0));
    opt.exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(build_interval_certificate(pairs, {0.1, 0.2}, {0.05, 0.95}, 0.8, opt));
}
BENCHMARK(BM_Certificate)->ArgsProduct({{65}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

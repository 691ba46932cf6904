#include "diffeo/grid.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <cstdio>
#include <ostream>

#include "diffeo/errors.hpp"

namespace diffeo {

json to_json(const GridSpec& g) {
    return {{"a", g.a}, {"b", g.b}, {"nodes", g.nodes}, {"include_breakpoints", g.include_breakpoints},
            {"refine", g.refine}, {"max_nodes", g.max_nodes}};
}

GridSpec grid_from_json(const json& j) {
    GridSpec g;
    if (j.is_null()) return g;
    g.a = j.value("a", g.a);
    g.b = j.value("b", g.b);
    g.nodes = j.value("nodes", g.nodes);
    g.include_breakpoints = j.value("include_breakpoints", g.include_breakpoints);
    g.refine = j.value("refine", g.refine);
    g.max_nodes = j.value("max_nodes", g.max_nodes);
    if (g.nodes < 2 || !(g.a < g.b)) throw schema_error("grid: need at least 2 nodes and a < b");
    return g;
}

std::vector<double> grid_nodes(const GridSpec& g, const std::vector<double>& breakpoints) {
    if (g.nodes < 2) throw config_error("grid: at least 2 nodes required");
    std::vector<double> x(g.nodes);
    for (int i = 0; i < g.nodes; ++i) x[i] = g.a + (g.b - g.a) * i / (g.nodes - 1);
    if (g.include_breakpoints) {
        for (double b : breakpoints) {
            if (b > g.a && b < g.b) x.push_back(b);
        }
    }
    std::sort(x.begin(), x.end());
    x.erase(std::unique(x.begin(), x.end()), x.end());
    return x;
}

void GridFunction::write_csv(std::ostream& os) const {
    const int r = jets.empty() ? 0 : jets.front().order();
    os << "node,value";
    for (int k = 1; k <= r; ++k) os << ",D" << k;
    os << '\n';
    char buf[64];
    for (size_t i = 0; i < nodes.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", nodes[i]);
        os << buf;
        for (int k = 0; k <= r; ++k) {
            std::snprintf(buf, sizeof buf, ",%.17g", jets[i][k]);
            os << buf;
        }
        os << '\n';
    }
}

std::vector<Jet> sample_serial(const JetKernel& k, const std::vector<double>& nodes) {
    std::vector<Jet> out;
    out.reserve(nodes.size());
    for (double x : nodes) out.push_back(k(x));
    return out;
}

std::vector<Jet> sample_parallel(const JetKernel& k, const std::vector<double>& nodes) {
    std::vector<Jet> out(nodes.size());
    std::exception_ptr err;
    const long n = static_cast<long>(nodes.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (long i = 0; i < n; ++i) {
        try {
            out[i] = k(nodes[i]);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

std::vector<Jet> sample(const JetKernel& k, const std::vector<double>& nodes, Exec exec) {
    return exec == Exec::parallel ? sample_parallel(k, nodes) : sample_serial(k, nodes);
}

double max_over_serial(const std::function<double(double)>& k, const std::vector<double>& nodes) {
    double m = 0;
    for (double x : nodes) m = std::max(m, k(x));
    return m;
}

double max_over_parallel(const std::function<double(double)>& k, const std::vector<double>& nodes) {
    std::vector<double> v(nodes.size());
    std::exception_ptr err;
    const long n = static_cast<long>(nodes.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (long i = 0; i < n; ++i) {
        try {
            v[i] = k(nodes[i]);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    // Reduce in node order so the result does not depend on the thread count.
    double m = 0;
    for (double x : v) m = std::max(m, x);
    return m;
}

double max_over(const std::function<double(double)>& k, const std::vector<double>& nodes, Exec exec) {
    return exec == Exec::parallel ? max_over_parallel(k, nodes) : max_over_serial(k, nodes);
}

GridFunction sample_diffeo(const Diffeo1D& f, const std::vector<double>& nodes, int r, Exec exec) {
    GridFunction g;
    g.nodes = nodes;
    g.jets = sample([&](double x) { return f.jet(x, r); }, nodes, exec);
    g.source_hash = expr_hash(to_json(f));
    return g;
}

GridFunction sample_field(const VectorField1D& X, const std::vector<double>& nodes, int r, Exec exec) {
    GridFunction g;
    g.nodes = nodes;
    g.jets = sample([&](double x) { return X.jet(x, r); }, nodes, exec);
    g.source_hash = expr_hash(to_json(X));
    return g;
}

namespace {

struct LevelMax {
    double value = 0, at = 0;
    int order = 0;
};

LevelMax level_distance(const Diffeo1D& f, const Diffeo1D* g, int r, const std::vector<double>& nodes, Exec exec) {
    auto fj = sample([&](double x) { return f.jet(x, r); }, nodes, exec);
    std::vector<Jet> gj;
    if (g) gj = sample([&](double x) { return g->jet(x, r); }, nodes, exec);
    LevelMax m;
    for (size_t i = 0; i < nodes.size(); ++i) {
        Jet other = g ? gj[i] : Jet::identity(nodes[i], r);
        for (int k = 0; k <= r; ++k) {
            const double d = std::abs(fj[i][k] - other[k]);
            if (d > m.value) m = {d, nodes[i], k};
        }
    }
    return m;
}

CrDistance refine_distance(const Diffeo1D& f, const Diffeo1D* g, int r, const GridSpec& grid, Exec exec) {
    if (g && !(f.domain() == g->domain())) throw config_error("cr_distance: domains differ");
    std::vector<double> bp = f.breakpoints();
    if (g) {
        auto gb = g->breakpoints();
        bp.insert(bp.end(), gb.begin(), gb.end());
    }
    GridSpec spec = grid;
    CrDistance out;
    LevelMax m = level_distance(f, g, r, grid_nodes(spec, bp), exec);
    out.history.push_back(m.value);
    while (spec.refine) {
        if (2 * spec.nodes - 1 > spec.max_nodes) {
            out.converged = false;
            break;
        }
        spec.nodes = 2 * spec.nodes - 1;
        LevelMax next = level_distance(f, g, r, grid_nodes(spec, bp), exec);
        out.history.push_back(next.value);
        const double prev = m.value;
        m = next;
        if (std::abs(next.value - prev) <= 0.01 * std::max(next.value, prev) || next.value == 0) break;
    }
    out.value = m.value;
    out.at = m.at;
    out.order_at = m.order;
    out.nodes = spec.nodes;
    return out;
}

}  // namespace

CrDistance cr_distance(const Diffeo1D& f, const Diffeo1D& g, int r, const GridSpec& grid, Exec exec) {
    return refine_distance(f, &g, r, grid, exec);
}

CrDistance cr_distance_to_id(const Diffeo1D& f, int r, const GridSpec& grid, Exec exec) {
    return refine_distance(f, nullptr, r, grid, exec);
}

double field_cr_norm(const VectorField1D& X, int r, const std::vector<double>& nodes, Exec exec) {
    auto jets = sample([&](double x) { return X.jet(x, r); }, nodes, exec);
    double m = 0;
    for (const auto& j : jets) {
        for (int k = 0; k <= r; ++k) m = std::max(m, std::abs(j[k]));
    }
    return m;
}

}  // namespace diffeo

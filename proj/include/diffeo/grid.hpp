#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "diffeo/expr.hpp"

namespace diffeo {

enum class Exec { serial, parallel };

struct GridSpec {
    double a = 0.0;
    double b = 1.0;
    int nodes = 512;
    bool include_breakpoints = true;
    /// Double the node count until successive distances differ by < 1%.
    bool refine = true;
    int max_nodes = 8192;
};

json to_json(const GridSpec& g);
GridSpec grid_from_json(const json& j);

/// Uniform nodes on [a,b] plus the breakpoints lying inside it, sorted.
std::vector<double> grid_nodes(const GridSpec& g, const std::vector<double>& breakpoints = {});

struct GridFunction {
    std::vector<double> nodes;
    std::vector<Jet> jets;
    std::uint64_t source_hash = 0;

    /// CSV with header node,value,D1..Dr and LF line endings.
    void write_csv(std::ostream& os) const;
};

using JetKernel = std::function<Jet(double)>;

/// Evaluate a jet-valued kernel at every node, one node at a time.
std::vector<Jet> sample_serial(const JetKernel& k, const std::vector<double>& nodes);
/// Same result as sample_serial, nodes distributed over OpenMP threads.
std::vector<Jet> sample_parallel(const JetKernel& k, const std::vector<double>& nodes);
std::vector<Jet> sample(const JetKernel& k, const std::vector<double>& nodes, Exec exec);

/// Max over nodes of a scalar kernel; serial and OpenMP variants.
double max_over_serial(const std::function<double(double)>& k, const std::vector<double>& nodes);
double max_over_parallel(const std::function<double(double)>& k, const std::vector<double>& nodes);
double max_over(const std::function<double(double)>& k, const std::vector<double>& nodes, Exec exec);

GridFunction sample_diffeo(const Diffeo1D& f, const std::vector<double>& nodes, int r, Exec exec = Exec::serial);
GridFunction sample_field(const VectorField1D& X, const std::vector<double>& nodes, int r,
                          Exec exec = Exec::serial);

struct CrDistance {
    double value = 0;
    double at = 0;        // node where the max is attained
    int order_at = 0;     // derivative order attaining it
    int nodes = 0;        // final node count
    bool converged = true;
    std::vector<double> history;  // value per refinement level
};

/// max over grid nodes and orders 0..r of |D^k f - D^k g|.
CrDistance cr_distance(const Diffeo1D& f, const Diffeo1D& g, int r, const GridSpec& grid = {},
                       Exec exec = Exec::serial);

/// Same metric between f and the identity.
CrDistance cr_distance_to_id(const Diffeo1D& f, int r, const GridSpec& grid = {}, Exec exec = Exec::serial);

/// C^r sup norm of a field on a grid: max over nodes and orders 0..r of |D^k X|.
double field_cr_norm(const VectorField1D& X, int r, const std::vector<double>& nodes, Exec exec = Exec::serial);

}  // namespace diffeo

#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "diffeo/errors.hpp"
#include "diffeo/expr.hpp"

namespace diffeo::cli {

inline constexpr int kSceneVersion = 1;

struct Task {
    std::string id;       // output file stem
    std::string command;  // canonical command name
    json objects;         // role -> object name, list of names, or list of name pairs
    json parameters;
    json expect;          // report key -> {"lt" | "le" | "gt" | "ge" | "eq", "tol"}
};

struct Scene {
    int version = kSceneVersion;
    json objects;  // name -> serialized field/diffeo or derived-object spec
    std::vector<Task> tasks;
};

struct RunFlags {
    std::string out_dir = ".";
    std::optional<int> order;
    std::optional<double> tol;
    bool svg = false;
    bool parallel = false;
    std::optional<std::string> only;  // run only tasks of this command
};

struct Artifacts {
    json report;
    std::string csv;  // empty when the command has no grid output
    std::string svg;  // empty unless requested and available
    std::vector<std::string> failures;  // failed expectations and module checks
};

/// Canonical name of a command or alias ("var_log_derivative" -> "var"); empty if unknown.
std::string canonical_command(const std::string& name);
const std::vector<std::string>& command_names();

/// Structural parsing; throws schema_error.
Scene parse_scene(const json& j);
Scene load_scene(const std::string& path);
/// One-task scene from role bindings; list roles collect repeated bindings, pairs pair them up.
Scene scene_from_flags(const std::string& command, const std::vector<std::pair<std::string, json>>& objects,
                       const json& parameters);

using Object = std::variant<VectorField1D, Diffeo1D>;

/// Resolves named objects on demand, including derived objects that refer to others.
class ObjectTable {
public:
    explicit ObjectTable(json defs);
    const Object& get(const std::string& name);
    const VectorField1D& field(const std::string& name);
    const Diffeo1D& diffeo(const std::string& name);
    bool defined(const std::string& name) const { return defs_.contains(name); }

private:
    json defs_;
    std::map<std::string, Object> cache_;
    std::vector<std::string> stack_;
};

/// Checks commands, object references and parameter types of every task; throws schema_error.
void validate_scene(const Scene& s, ObjectTable& objects);

/// Runs one task and evaluates its expectations. Failed checks are listed in the
/// artifacts; errors raised by the computation propagate as diffeo::Error.
Artifacts run_task(const Scene& s, std::size_t index, ObjectTable& objects, const RunFlags& flags);

/// Loads, validates and runs a scene, writing artifacts under flags.out_dir.
/// Returns 0, 2 (schema), 3 (numeric) or 4 (invariant); messages go to err.
int run_scene_file(const std::string& path, const RunFlags& flags, std::ostream& err);
int run_scene(const Scene& s, const RunFlags& flags, std::ostream& err);

/// Exit code for an error kind.
int exit_code(ErrorKind k);

}  // namespace diffeo::cli

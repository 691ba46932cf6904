#include "scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "diffeo/conjugacy.hpp"
#include "diffeo/distortion.hpp"
#include "diffeo/functionals.hpp"
#include "diffeo/grid.hpp"
#include "diffeo/mather.hpp"
#include "diffeo/reduce.hpp"
#include "svg.hpp"

namespace diffeo::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- signatures

namespace {

enum class PType { number, integer, boolean, numbers, integers, segment };
enum class OType { field, diffeo, any, fields, pairs };
enum class Flag { none, order, tol };

struct ParamSpec {
    std::string name;
    PType type;
    bool required = false;
    json def = nullptr;  // null with required == false: absent unless given
    Flag flag = Flag::none;
};

struct ObjectSpec {
    std::string role;
    OType type;
    bool required = true;
};

struct Signature {
    std::string name;
    std::vector<ObjectSpec> objects;
    std::vector<ParamSpec> params;
};

const std::vector<Signature>& signatures() {
    static const std::vector<Signature> s = {
        {"eval",
         {{"f", OType::any}},
         {{"nodes", PType::integer, false, 33}, {"a", PType::number}, {"b", PType::number},
          {"order", PType::integer, false, 2, Flag::order}}},
        {"var", {{"f", OType::diffeo}}, {}},
        {"asymvar", {{"f", OType::diffeo}}, {{"n_max", PType::integer, false, 8}}},
        {"liouville", {{"f", OType::diffeo}}, {{"rel_tol", PType::number, false, 1e-8, Flag::tol}}},
        {"mather",
         {{"X_left", OType::field}, {"Y_right", OType::field}},
         {{"p", PType::number, true}, {"q", PType::number, true}, {"nodes", PType::integer, false, 64},
          {"t_lo", PType::number, false, 0.0}, {"t_hi", PType::number, false, 1.0},
          {"trivial_tol", PType::number, false, 1e-8, Flag::tol}}},
        {"conjugate",
         {{"f", OType::diffeo}, {"g", OType::diffeo}, {"phi0", OType::diffeo}},
         {{"base_point", PType::number, true}, {"order", PType::integer, false, 2, Flag::order},
          {"germ_tol", PType::number, false, 1e-9}, {"nodes", PType::integer, false, 257},
          {"a", PType::number, false, 0.05}, {"b", PType::number, false, 0.95}}},
        {"flatten",
         {{"X", OType::field}},
         {{"eta", PType::number, true}, {"r", PType::integer, false, 2, Flag::order},
          {"lambda", PType::number, false, 0.0}}},
        {"reduce",
         {{"X", OType::field}},
         {{"epsilon", PType::number, true}, {"r", PType::integer, false, 2, Flag::order}, {"iti", PType::numbers},
          {"eta", PType::number, false, 0.0}, {"nodes", PType::integer, false, 257}}},
        {"certify",
         {{"pairs", OType::pairs}},
         {{"J", PType::segment, true}, {"I", PType::segment, true}, {"p", PType::number, true},
          {"grid_nodes", PType::integer, false, 257}, {"tolerance", PType::number, false, 1e-6, Flag::tol}}},
        {"report",
         {{"fields", OType::fields}, {"conjugator", OType::diffeo, false}},
         {{"eta", PType::number, true}, {"n", PType::integers, true}, {"times", PType::numbers},
          {"r", PType::integer, false, 3, Flag::order}}},
    };
    return s;
}

const Signature& signature(const std::string& command) {
    for (const auto& s : signatures()) {
        if (s.name == command) return s;
    }
    throw schema_error("unknown command '" + command + "'");
}

bool is_number(const json& v) { return v.is_number(); }
bool is_integer(const json& v) { return v.is_number_integer(); }

bool type_ok(PType t, const json& v) {
    switch (t) {
        case PType::number: return is_number(v);
        case PType::integer: return is_integer(v);
        case PType::boolean: return v.is_boolean();
        case PType::numbers: return v.is_array() && std::all_of(v.begin(), v.end(), is_number);
        case PType::integers: return v.is_array() && !v.empty() && std::all_of(v.begin(), v.end(), is_integer);
        case PType::segment:
            return v.is_array() && v.size() == 2 && is_number(v[0]) && is_number(v[1]) &&
                   v[0].get<double>() < v[1].get<double>();
    }
    return false;
}

std::string type_name(PType t) {
    switch (t) {
        case PType::number: return "a number";
        case PType::integer: return "an integer";
        case PType::boolean: return "a boolean";
        case PType::numbers: return "a list of numbers";
        case PType::integers: return "a non-empty list of integers";
        case PType::segment: return "an interval [lo, hi] with lo < hi";
    }
    return "";
}

std::string where(const Scene& s, std::size_t i) {
    return "task " + std::to_string(i) + " (" + s.tasks[i].id + ")";
}

// Parameters with flags and defaults applied, in signature order.
json resolve_parameters(const Task& t, const Signature& sig, const RunFlags& flags) {
    json out = json::object();
    for (const auto& p : sig.params) {
        if (t.parameters.contains(p.name)) {
            out[p.name] = t.parameters[p.name];
        } else if (p.flag == Flag::order && flags.order) {
            out[p.name] = *flags.order;
        } else if (p.flag == Flag::tol && flags.tol) {
            out[p.name] = *flags.tol;
        } else if (!p.def.is_null()) {
            out[p.name] = p.def;
        }
    }
    return out;
}

const char* const kDerived[] = {"flow", "inverse", "compose", "power", "time_dilation", "commutator"};

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& s : signatures()) n.push_back(s.name);
        return n;
    }();
    return names;
}

std::string canonical_command(const std::string& name) {
    static const std::map<std::string, std::string> aliases = {
        {"var_log_derivative", "var"},   {"asymptotic_variation", "asymvar"}, {"liouville_length", "liouville"},
        {"mather_map", "mather"},        {"synthesize_conjugacy", "conjugate"}, {"flatten_field", "flatten"},
        {"reduce_interval", "reduce"},   {"build_interval_certificate", "certify"},
        {"distortion_report", "report"},
    };
    if (auto it = aliases.find(name); it != aliases.end()) return it->second;
    for (const auto& n : command_names()) {
        if (n == name) return n;
    }
    return "";
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::config:
        case ErrorKind::schema: return 2;
        case ErrorKind::numeric: return 3;
        case ErrorKind::invariant: return 4;
    }
    return 3;
}

// ---------------------------------------------------------------- parsing

Scene parse_scene(const json& j) {
    if (!j.is_object()) throw schema_error("scene must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (k != "version" && k != "objects" && k != "tasks") throw schema_error("unknown scene key '" + k + "'");
    }
    if (!j.contains("version") || !j["version"].is_number_integer()) {
        throw schema_error("scene needs an integer 'version'");
    }
    Scene s;
    s.version = j["version"].get<int>();
    if (s.version != kSceneVersion) {
        throw schema_error("unsupported scene version " + std::to_string(s.version) + " (expected " +
                           std::to_string(kSceneVersion) + ")");
    }
    s.objects = j.value("objects", json::object());
    if (!s.objects.is_object()) throw schema_error("'objects' must map names to definitions");
    if (!j.contains("tasks") || !j["tasks"].is_array()) throw schema_error("scene needs a 'tasks' array");
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < j["tasks"].size(); ++i) {
        const json& t = j["tasks"][i];
        const std::string at = "task " + std::to_string(i);
        if (!t.is_object()) throw schema_error(at + " must be an object");
        for (const auto& [k, v] : t.items()) {
            if (k != "id" && k != "command" && k != "objects" && k != "parameters" && k != "expect") {
                throw schema_error(at + ": unknown key '" + k + "'");
            }
        }
        if (!t.contains("command") || !t["command"].is_string()) throw schema_error(at + " needs a 'command' string");
        Task task;
        task.command = canonical_command(t["command"].get<std::string>());
        if (task.command.empty()) {
            throw schema_error(at + ": unknown command '" + t["command"].get<std::string>() + "'");
        }
        if (t.contains("id")) {
            if (!t["id"].is_string()) throw schema_error(at + ": 'id' must be a string");
            task.id = t["id"].get<std::string>();
            const bool safe = !task.id.empty() && std::all_of(task.id.begin(), task.id.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
            });
            if (!safe || task.id[0] == '.') throw schema_error(at + ": id '" + task.id + "' is not a safe file stem");
        } else {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%02zu", i);
            task.id = std::string(buf) + "_" + task.command;
        }
        if (std::find(ids.begin(), ids.end(), task.id) != ids.end()) {
            throw schema_error(at + ": duplicate id '" + task.id + "'");
        }
        ids.push_back(task.id);
        task.objects = t.value("objects", json::object());
        task.parameters = t.value("parameters", json::object());
        task.expect = t.value("expect", json::object());
        if (!task.objects.is_object() || !task.parameters.is_object() || !task.expect.is_object()) {
            throw schema_error(at + ": 'objects', 'parameters' and 'expect' must be objects");
        }
        s.tasks.push_back(std::move(task));
    }
    return s;
}

Scene scene_from_flags(const std::string& command, const std::vector<std::pair<std::string, json>>& objects,
                       const json& parameters) {
    const std::string cmd = canonical_command(command);
    if (cmd.empty()) throw schema_error("unknown command '" + command + "'");
    const Signature& sig = signature(cmd);
    json defs = json::object(), roles = json::object();
    std::map<std::string, int> count;
    for (const auto& [role, def] : objects) {
        auto it = std::find_if(sig.objects.begin(), sig.objects.end(), [&](const ObjectSpec& o) { return o.role == role; });
        if (it == sig.objects.end()) throw schema_error("unknown object role '" + role + "' for " + cmd);
        const int k = count[role]++;
        const std::string name = role + "_" + std::to_string(k);
        defs[name] = def;
        if (it->type == OType::fields) {
            roles[role].push_back(name);
        } else if (it->type == OType::pairs) {
            if (k % 2 == 0) {
                roles[role].push_back(json::array({name}));
            } else {
                roles[role].back().push_back(name);
            }
        } else {
            if (k > 0) throw schema_error("object role '" + role + "' given more than once");
            roles[role] = name;
        }
    }
    if (roles.contains("pairs") && roles["pairs"].back().size() != 2) {
        throw schema_error("role 'pairs' needs an even number of objects");
    }
    return parse_scene({{"version", kSceneVersion},
                        {"objects", defs},
                        {"tasks", json::array({{{"id", cmd}, {"command", cmd}, {"objects", roles}, {"parameters", parameters}}})}});
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw schema_error("cannot read scene file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw schema_error("scene file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_scene(j);
}

// ---------------------------------------------------------------- objects

ObjectTable::ObjectTable(json defs) : defs_(std::move(defs)) {}

const Object& ObjectTable::get(const std::string& name) {
    if (auto it = cache_.find(name); it != cache_.end()) return it->second;
    if (!defs_.contains(name)) throw schema_error("undefined object '" + name + "'");
    if (std::find(stack_.begin(), stack_.end(), name) != stack_.end()) {
        throw schema_error("object '" + name + "' refers to itself");
    }
    stack_.push_back(name);
    struct Pop {
        std::vector<std::string>& s;
        ~Pop() { s.pop_back(); }
    } pop{stack_};

    const json& d = defs_[name];
    const std::string at = "object '" + name + "'";
    if (!d.is_object() || !d.contains("type") || !d["type"].is_string()) throw schema_error(at + " needs a 'type'");
    const std::string type = d["type"].get<std::string>();
    auto ref = [&](const char* key) -> std::string {
        if (!d.contains(key) || !d[key].is_string()) throw schema_error(at + ": '" + key + "' must name an object");
        return d[key].get<std::string>();
    };
    auto number = [&](const char* key, std::optional<double> def = std::nullopt) -> double {
        if (!d.contains(key)) {
            if (def) return *def;
            throw schema_error(at + ": missing number '" + key + "'");
        }
        if (!d[key].is_number()) throw schema_error(at + ": '" + key + "' must be a number");
        return d[key].get<double>();
    };
    auto refs = [&]() {
        if (!d.contains("of") || !d["of"].is_array() || d["of"].empty()) {
            throw schema_error(at + ": 'of' must be a non-empty list of object names");
        }
        std::vector<Diffeo1D> maps;
        for (const auto& r : d["of"]) {
            if (!r.is_string()) throw schema_error(at + ": 'of' must list object names");
            maps.push_back(diffeo(r.get<std::string>()));
        }
        return maps;
    };

    Object obj = Diffeo1D{};
    try {
        if (type == "field") {
            obj = field_from_json(d);
        } else if (type == "diffeo") {
            obj = diffeo_from_json(d);
        } else if (type == "flow") {
            obj = dm::flow(field(ref("field")), number("t", 1.0));
        } else if (type == "time_dilation") {
            obj = dm::time_dilation(field(ref("field")), number("p"), number("c"));
        } else if (type == "inverse") {
            obj = dm::inverse(diffeo(ref("of")));
        } else if (type == "compose") {
            obj = dm::compose(refs());
        } else if (type == "commutator") {
            const auto m = refs();
            if (m.size() != 2) throw schema_error(at + ": a commutator needs two maps");
            obj = commutator(m[0], m[1]);
        } else if (type == "power") {
            if (!d.contains("n") || !d["n"].is_number_integer()) throw schema_error(at + ": 'n' must be an integer");
            obj = dm::power(diffeo(ref("of")), d["n"].get<int>());
        } else {
            std::string known = "field, diffeo";
            for (const char* k : kDerived) known += std::string(", ") + k;
            throw schema_error(at + ": unknown type '" + type + "' (known: " + known + ")");
        }
    } catch (const Error& e) {
        const std::string m = e.what();
        if (m.rfind("object '", 0) == 0 || m.rfind("undefined object", 0) == 0) throw;
        throw Error(e.kind() == ErrorKind::numeric ? ErrorKind::numeric : ErrorKind::schema, at + ": " + m);
    } catch (const json::exception& e) {
        throw schema_error(at + ": " + e.what());
    }
    return cache_.emplace(name, std::move(obj)).first->second;
}

const VectorField1D& ObjectTable::field(const std::string& name) {
    const Object& o = get(name);
    if (const auto* X = std::get_if<VectorField1D>(&o)) return *X;
    throw schema_error("object '" + name + "' is a diffeomorphism where a field is expected");
}

const Diffeo1D& ObjectTable::diffeo(const std::string& name) {
    const Object& o = get(name);
    if (const auto* f = std::get_if<Diffeo1D>(&o)) return *f;
    throw schema_error("object '" + name + "' is a field where a diffeomorphism is expected");
}

// ---------------------------------------------------------------- validation

namespace {

void check_object_ref(const json& v, const ObjectSpec& spec, ObjectTable& objects, const std::string& at) {
    auto name = [&](const json& n) -> std::string {
        if (!n.is_string()) throw schema_error(at + ": role '" + spec.role + "' must name objects");
        return n.get<std::string>();
    };
    auto one = [&](const json& n, bool want_field) {
        const std::string s = name(n);
        if (!objects.defined(s)) throw schema_error(at + ": undefined object '" + s + "'");
        try {
            if (want_field) {
                objects.field(s);
            } else {
                objects.diffeo(s);
            }
        } catch (const Error& e) {
            throw Error(e.kind() == ErrorKind::numeric ? ErrorKind::numeric : ErrorKind::schema,
                        at + ": " + e.what());
        }
    };
    switch (spec.type) {
        case OType::field: one(v, true); break;
        case OType::diffeo: one(v, false); break;
        case OType::any: {
            const std::string s = name(v);
            if (!objects.defined(s)) throw schema_error(at + ": undefined object '" + s + "'");
            objects.get(s);
            break;
        }
        case OType::fields:
            if (!v.is_array() || v.empty()) throw schema_error(at + ": role '" + spec.role + "' must list fields");
            for (const auto& n : v) one(n, true);
            break;
        case OType::pairs:
            if (!v.is_array() || v.empty()) throw schema_error(at + ": role '" + spec.role + "' must list pairs");
            for (const auto& p : v) {
                if (!p.is_array() || p.size() != 2) {
                    throw schema_error(at + ": role '" + spec.role + "' entries must be [name, name]");
                }
                one(p[0], false);
                one(p[1], false);
            }
            break;
    }
}

}  // namespace

void validate_scene(const Scene& s, ObjectTable& objects) {
    for (std::size_t i = 0; i < s.tasks.size(); ++i) {
        const Task& t = s.tasks[i];
        const std::string at = where(s, i);
        const Signature& sig = signature(t.command);
        for (const auto& [role, v] : t.objects.items()) {
            const bool known = std::any_of(sig.objects.begin(), sig.objects.end(),
                                           [&, r = role](const ObjectSpec& o) { return o.role == r; });
            if (!known) throw schema_error(at + ": unknown object role '" + role + "' for " + t.command);
        }
        for (const auto& spec : sig.objects) {
            if (!t.objects.contains(spec.role)) {
                if (spec.required) throw schema_error(at + ": missing object role '" + spec.role + "'");
                continue;
            }
            check_object_ref(t.objects[spec.role], spec, objects, at);
        }
        for (const auto& [key, v] : t.parameters.items()) {
            auto it = std::find_if(sig.params.begin(), sig.params.end(),
                                   [&, k = key](const ParamSpec& p) { return p.name == k; });
            if (it == sig.params.end()) throw schema_error(at + ": unknown parameter '" + key + "' for " + t.command);
            if (!type_ok(it->type, v)) {
                throw schema_error(at + ": parameter '" + key + "' must be " + type_name(it->type));
            }
        }
        for (const auto& p : sig.params) {
            if (p.required && !t.parameters.contains(p.name)) {
                throw schema_error(at + ": missing parameter '" + p.name + "'");
            }
        }
        for (const auto& [key, v] : t.expect.items()) {
            if (!v.is_object() || v.empty()) throw schema_error(at + ": expectation '" + key + "' must be an object");
            for (const auto& [op, b] : v.items()) {
                const bool cmp = op == "lt" || op == "le" || op == "gt" || op == "ge";
                if (cmp && !b.is_number()) throw schema_error(at + ": '" + key + "." + op + "' must be a number");
                if (op == "eq" && !(b.is_number() || b.is_boolean() || b.is_string())) {
                    throw schema_error(at + ": '" + key + ".eq' must be a scalar");
                }
                if (op == "tol" && !b.is_number()) throw schema_error(at + ": '" + key + ".tol' must be a number");
                if (!cmp && op != "eq" && op != "tol") {
                    throw schema_error(at + ": unknown comparison '" + op + "' in expectation '" + key + "'");
                }
            }
        }
    }
}

// ---------------------------------------------------------------- commands

namespace {

struct Context {
    const Task& task;
    const json& params;
    ObjectTable& objects;
    Exec exec;
    bool svg;
    Artifacts out;

    double num(const char* k) const { return params.at(k).get<double>(); }
    int integer(const char* k) const { return params.at(k).get<int>(); }
    std::string ref(const char* role) const { return task.objects.at(role).get<std::string>(); }
};

std::vector<double> vec(const json& j) { return j.get<std::vector<double>>(); }

void check_positive_int(int v, const char* name, int lo = 1) {
    if (v < lo) throw config_error(std::string("parameter '") + name + "' must be at least " + std::to_string(lo));
}

std::string csv_line(std::initializer_list<double> v) {
    std::string s;
    char buf[40];
    bool first = true;
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        s += (first ? "" : ",") + std::string(buf);
        first = false;
    }
    return s + "\n";
}

json cmd_eval(Context& c) {
    const Object& o = c.objects.get(c.ref("f"));
    const Domain d = std::visit([](const auto& v) { return v.domain(); }, o);
    const double a = c.params.contains("a") ? c.num("a") : (d.is_circle() ? 0.0 : d.a);
    const double b = c.params.contains("b") ? c.num("b") : (d.is_circle() ? 1.0 : d.b);
    const int n = c.integer("nodes"), r = c.integer("order");
    check_positive_int(n, "nodes", 2);
    check_order(r);
    if (!(a < b)) throw config_error("eval: need a < b");
    std::vector<double> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back(a + (b - a) * i / (n - 1));
    const bool is_field = std::holds_alternative<VectorField1D>(o);
    const GridFunction g = is_field ? sample_field(std::get<VectorField1D>(o), nodes, r, c.exec)
                                    : sample_diffeo(std::get<Diffeo1D>(o), nodes, r, c.exec);
    json jets = json::array();
    for (const auto& j : g.jets) jets.push_back(std::vector<double>(j.coeffs().begin(), j.coeffs().end()));
    std::ostringstream csv;
    g.write_csv(csv);
    c.out.csv = csv.str();
    if (c.svg) {
        Series s{is_field ? "X(x)" : "f(x)", g.nodes, {}};
        for (const auto& j : g.jets) s.y.push_back(j[0]);
        c.out.svg = line_plot({c.task.id, "x", is_field ? "X" : "f"}, {s});
    }
    return {{"kind", is_field ? "field" : "diffeo"},
            {"grid", {{"a", a}, {"b", b}, {"nodes", n}}},
            {"order", r},
            {"source_hash", g.source_hash},
            {"x", g.nodes},
            {"jets", jets}};
}

json cmd_var(Context& c) { return {{"value", var_log_derivative(c.objects.diffeo(c.ref("f")))}}; }

json cmd_asymvar(Context& c) {
    const int n = c.integer("n_max");
    check_positive_int(n, "n_max");
    const AsymptoticVariation v = asymptotic_variation(c.objects.diffeo(c.ref("f")), n);
    std::string csv = "n,a_n\n";
    std::vector<double> ns;
    for (std::size_t i = 0; i < v.a.size(); ++i) {
        csv += csv_line({double(i + 1), v.a[i]});
        ns.push_back(double(i + 1));
    }
    c.out.csv = csv;
    if (c.svg) c.out.svg = line_plot({c.task.id, "n", "Var(log Df^n)/n"}, {{"a_n", ns, v.a, true}});
    return {{"a", v.a}, {"estimate", v.estimate}, {"slope", v.slope}, {"n_max", n}};
}

json cmd_liouville(Context& c) {
    const LiouvilleLength L = liouville_length(c.objects.diffeo(c.ref("f")), c.num("rel_tol"));
    if (!L.converged) {
        throw numeric_error("liouville: quadrature did not converge (estimate " + std::to_string(L.value) +
                            ", error " + std::to_string(L.error) + ")");
    }
    return {{"value", L.value}, {"error", L.error}, {"converged", L.converged}};
}

json cmd_mather(Context& c) {
    const int n = c.integer("nodes");
    check_positive_int(n, "nodes", 2);
    const MatherSample m = mather_map(c.objects.field(c.ref("X_left")), c.objects.field(c.ref("Y_right")), c.num("p"),
                                      c.num("q"), mather_nodes(n, c.num("t_lo"), c.num("t_hi")), c.exec);
    const Triviality t = is_trivial(m, c.num("trivial_tol"));
    std::ostringstream csv;
    m.write_csv(csv);
    c.out.csv = csv.str();
    if (c.svg) {
        Series s{"M(t) - t", m.t_nodes, {}};
        for (std::size_t i = 0; i < m.values.size(); ++i) s.y.push_back(m.values[i] - m.t_nodes[i]);
        c.out.svg = line_plot({c.task.id, "t", "M(t) - t"}, {s});
    }
    json j = to_json(m);
    j["trivial"] = t.trivial;
    j["M"] = m.values;
    return j;
}

json cmd_conjugate(Context& c) {
    ConjugacyOptions opt;
    opt.order = c.integer("order");
    opt.germ_tol = c.num("germ_tol");
    const int n = c.integer("nodes");
    check_positive_int(n, "nodes", 2);
    opt.grid = GridSpec{c.num("a"), c.num("b"), n, true, false, n};
    const Diffeo1D& f = c.objects.diffeo(c.ref("f"));
    const Diffeo1D& g = c.objects.diffeo(c.ref("g"));
    const ConjugacyWitness w = synthesize_conjugacy(f, g, c.objects.diffeo(c.ref("phi0")), c.num("base_point"), opt);
    if (c.svg) {
        Series s{"phi(x)", {}, {}};
        for (int i = 0; i < 129; ++i) {
            const double x = opt.grid.a + (opt.grid.b - opt.grid.a) * i / 128;
            s.x.push_back(x);
            s.y.push_back(w.phi(x));
        }
        c.out.svg = line_plot({c.task.id, "x", "phi"}, {s});
    }
    return to_json(w);
}

json cmd_flatten(Context& c) {
    const FlattenResult f = flatten_field(c.objects.field(c.ref("X")), c.num("eta"), c.integer("r"), c.num("lambda"));
    std::string csv = "lambda,norm\n";
    Series s{"||Y||_r", {}, {}, true};
    for (const auto& [l, v] : f.sweep) {
        csv += csv_line({l, v});
        s.x.push_back(std::log2(l));
        s.y.push_back(v);
    }
    c.out.csv = csv;
    if (c.svg) {
        Series eta{"eta", {s.x.front(), s.x.back()}, {f.eta, f.eta}};
        c.out.svg = line_plot({c.task.id, "log2 lambda", "||Y||_r", true}, {s, eta});
    }
    return to_json(f);
}

json cmd_reduce(Context& c) {
    FlowData data{c.objects.field(c.ref("X")), std::nullopt};
    if (c.params.contains("iti")) data.iti = vec(c.params["iti"]);
    ReduceOptions opt;
    opt.eta = c.num("eta");
    const int n = c.integer("nodes");
    check_positive_int(n, "nodes", 2);
    opt.grid = GridSpec{0.0, 1.0, n, true, false, n};
    const ReductionTrace t = reduce_interval(data, c.num("epsilon"), c.integer("r"), opt);
    std::string csv = "step,d_r\n";
    for (std::size_t i = 0; i < t.steps.size(); ++i) csv += csv_line({double(i), t.steps[i].dr_to_isometry});
    c.out.csv = csv;
    if (c.svg) {
        std::ostringstream os;
        t.write_svg(os);
        c.out.svg = os.str();
    }
    json j = to_json(t);
    j["final_dr"] = t.steps.empty() ? 0.0 : t.steps.back().dr_to_isometry;
    return j;
}

json cmd_certify(Context& c) {
    std::vector<std::pair<Diffeo1D, Diffeo1D>> pairs;
    for (const auto& p : c.task.objects.at("pairs")) {
        pairs.push_back({c.objects.diffeo(p[0].get<std::string>()), c.objects.diffeo(p[1].get<std::string>())});
    }
    const auto J = vec(c.params["J"]), I = vec(c.params["I"]);
    CertificateOptions opt;
    opt.tolerance = c.num("tolerance");
    opt.grid_nodes = c.integer("grid_nodes");
    check_positive_int(opt.grid_nodes, "grid_nodes", 2);
    opt.exec = c.exec;
    const WordCertificate w = build_interval_certificate(pairs, {J[0], J[1]}, {I[0], I[1]}, c.num("p"), opt);
    std::string csv = "n,letters,residual\n";
    Series s{"residual", {}, {}, true};
    for (const auto& cw : w.words) {
        csv += csv_line({double(cw.n), double(cw.letters.size()), cw.residual_c0});
        s.x.push_back(cw.n);
        s.y.push_back(cw.residual_c0);
        if (!cw.length_check) c.out.failures.push_back("word " + std::to_string(cw.n) + " has the wrong length");
        if (!(cw.residual_c0 < opt.tolerance)) {
            c.out.failures.push_back("word " + std::to_string(cw.n) + " residual " + std::to_string(cw.residual_c0) +
                                     " exceeds the tolerance");
        }
    }
    c.out.csv = csv;
    if (c.svg) c.out.svg = line_plot({c.task.id, "n", "C0 residual", true}, {s});
    return to_json(w);
}

json cmd_report(Context& c) {
    FlowProduct f;
    for (const auto& n : c.task.objects.at("fields")) f.fields.push_back(c.objects.field(n.get<std::string>()));
    f.domain = f.fields.front().domain();
    if (c.params.contains("times")) f.times = vec(c.params["times"]);
    std::optional<Diffeo1D> a;
    if (c.task.objects.contains("conjugator")) a = c.objects.diffeo(c.ref("conjugator"));
    const DistortionReport r =
        distortion_report(f, c.params["n"].get<std::vector<int>>(), c.num("eta"), a, c.integer("r"));
    std::string csv = "n,A_upper,ratio\n";
    Series s{"A/n", {}, {}, true};
    for (const auto& row : r.rows) {
        csv += csv_line({double(row.n), double(row.A_upper), row.ratio});
        s.x.push_back(row.n);
        s.y.push_back(row.ratio);
    }
    c.out.csv = csv;
    if (c.svg) {
        std::vector<Series> all = {s};
        if (!r.dilation.empty()) {
            Series d{"(2n+1)/2^n", {}, {}, true};
            for (const auto& row : r.dilation) {
                d.x.push_back(row.n);
                d.y.push_back(row.ratio);
            }
            all.push_back(d);
        }
        c.out.svg = line_plot({c.task.id, "n", "word length / n", true}, all);
    }
    return to_json(r);
}

const std::map<std::string, std::function<json(Context&)>>& handlers() {
    static const std::map<std::string, std::function<json(Context&)>> h = {
        {"eval", cmd_eval},         {"var", cmd_var},         {"asymvar", cmd_asymvar},
        {"liouville", cmd_liouville}, {"mather", cmd_mather},   {"conjugate", cmd_conjugate},
        {"flatten", cmd_flatten},   {"reduce", cmd_reduce},   {"certify", cmd_certify},
        {"report", cmd_report},
    };
    return h;
}

json lookup(const json& result, const std::string& key) {
    try {
        if (!key.empty() && key[0] == '/') return result.at(json::json_pointer(key));
        return result.at(key);
    } catch (const json::exception&) {
        throw schema_error("expectation refers to missing report entry '" + key + "'");
    }
}

json evaluate_expectations(const json& result, const json& expect, std::vector<std::string>& failures) {
    json checks = json::array();
    for (const auto& [key, spec] : expect.items()) {
        const json v = lookup(result, key);
        for (const auto& [op, bound] : spec.items()) {
            if (op == "tol") continue;
            bool pass = false;
            if (op == "eq" && !bound.is_number()) {
                pass = v == bound;
            } else {
                if (!v.is_number()) throw schema_error("expectation '" + key + "' compares a non-numeric entry");
                const double x = v.get<double>(), b = bound.get<double>();
                if (op == "lt") pass = x < b;
                if (op == "le") pass = x <= b;
                if (op == "gt") pass = x > b;
                if (op == "ge") pass = x >= b;
                if (op == "eq") pass = std::abs(x - b) <= spec.value("tol", 0.0);
            }
            checks.push_back({{"key", key}, {"op", op}, {"bound", bound}, {"value", v}, {"pass", pass}});
            if (!pass) failures.push_back("expectation " + key + " " + op + " " + bound.dump() + " failed (value " +
                                          v.dump() + ")");
        }
    }
    return checks;
}

bool write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
    return static_cast<bool>(out);
}

}  // namespace

Artifacts run_task(const Scene& s, std::size_t index, ObjectTable& objects, const RunFlags& flags) {
    const Task& t = s.tasks.at(index);
    const Signature& sig = signature(t.command);
    const json params = resolve_parameters(t, sig, flags);
    Context c{t, params, objects, flags.parallel ? Exec::parallel : Exec::serial, flags.svg, {}};
    json result = handlers().at(t.command)(c);
    Artifacts out = std::move(c.out);
    json report;
    report["task"] = t.id;
    report["index"] = index;
    report["command"] = t.command;
    report["scene_version"] = s.version;
    report["objects"] = t.objects;
    report["config"] = {{"parameters", params},
                        {"exec", flags.parallel ? "parallel" : "serial"},
                        {"order_flag", flags.order ? json(*flags.order) : json(nullptr)},
                        {"tol_flag", flags.tol ? json(*flags.tol) : json(nullptr)}};
    report["result"] = std::move(result);
    report["checks"] = evaluate_expectations(report["result"], t.expect, out.failures);
    report["ok"] = out.failures.empty();
    out.report = std::move(report);
    return out;
}

int run_scene(const Scene& s, const RunFlags& flags, std::ostream& err) {
    ObjectTable objects(s.objects);
    std::size_t index = 0;
    try {
        validate_scene(s, objects);
        std::error_code ec;
        fs::create_directories(flags.out_dir, ec);
        if (ec || !fs::is_directory(flags.out_dir)) {
            throw config_error("cannot create output directory '" + flags.out_dir + "'");
        }
        for (index = 0; index < s.tasks.size(); ++index) {
            const Task& t = s.tasks[index];
            if (flags.only && t.command != *flags.only) continue;
            Artifacts a;
            try {
                a = run_task(s, index, objects, flags);
            } catch (const Error& e) {
                err << "error: " << where(s, index) << ": " << e.what() << "\n";
                return exit_code(e.kind());
            } catch (const std::exception& e) {
                err << "error: " << where(s, index) << ": numeric failure: " << e.what() << "\n";
                return 3;
            }
            const fs::path base = fs::path(flags.out_dir) / t.id;
            bool ok = write_file(base.string() + ".json", a.report.dump(2) + "\n");
            if (!a.csv.empty()) ok = ok && write_file(base.string() + ".csv", a.csv);
            if (flags.svg && !a.svg.empty()) ok = ok && write_file(base.string() + ".svg", a.svg);
            if (!ok) throw config_error("cannot write artifacts for " + where(s, index));
            if (!a.failures.empty()) {
                for (const auto& f : a.failures) err << "invariant: " << where(s, index) << ": " << f << "\n";
                return 4;
            }
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    }
    return 0;
}

int run_scene_file(const std::string& path, const RunFlags& flags, std::ostream& err) {
    try {
        return run_scene(load_scene(path), flags, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    }
}

}  // namespace diffeo::cli

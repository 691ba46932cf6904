#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scene.hpp"

using namespace diffeo;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw schema_error("cannot read '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw schema_error("'" + path + "' is not valid JSON: " + e.what());
    }
}

std::pair<std::string, std::string> split_binding(const std::string& s, const char* flag) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw schema_error(std::string(flag) + " expects key=value, got '" + s + "'");
    }
    return {s.substr(0, eq), s.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical toolkit for one-dimensional diffeomorphisms: scene runner and module entry points"};
    app.require_subcommand(1);

    std::string scene_path;
    cli::RunFlags flags;
    int order = -1;
    double tol = -1;
    std::vector<std::string> object_bindings, param_bindings;

    app.add_option("--scene", scene_path, "Scene file (JSON)");
    app.add_option("--out", flags.out_dir, "Output directory")->capture_default_str();
    app.add_option("--order", order, "Default derivative order r for tasks that take one")->check(CLI::Range(0, 6));
    app.add_option("--tol", tol, "Default tolerance for tasks that take one")->check(CLI::PositiveNumber);
    app.add_flag("--svg", flags.svg, "Write <task>.svg plots");
    app.add_flag("--parallel", flags.parallel, "Use the OpenMP kernels");
    app.add_option("--object", object_bindings, "Piecemeal use: role=path to a field or diffeo JSON file");
    app.add_option("--param", param_bindings, "Piecemeal use: name=JSON value");

    auto* run = app.add_subcommand("run", "Run every task of a scene");
    run->fallthrough();
    std::vector<CLI::App*> commands;
    for (const auto& name : cli::command_names()) {
        auto* sub = app.add_subcommand(name, "Run the '" + name + "' tasks of a scene, or one task from flags");
        sub->fallthrough();
        commands.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (order >= 0) flags.order = order;
    if (tol > 0) flags.tol = tol;

    try {
        if (run->parsed()) {
            if (scene_path.empty()) throw schema_error("run needs --scene");
            return cli::run_scene_file(scene_path, flags, std::cerr);
        }
        CLI::App* sub = nullptr;
        for (auto* c : commands) {
            if (c->parsed()) sub = c;
        }
        const std::string command = sub->get_name();
        if (!scene_path.empty()) {
            if (!object_bindings.empty() || !param_bindings.empty()) {
                throw schema_error("--object and --param cannot be combined with --scene");
            }
            flags.only = command;
            return cli::run_scene_file(scene_path, flags, std::cerr);
        }
        std::vector<std::pair<std::string, json>> objects;
        for (const auto& b : object_bindings) {
            auto [role, path] = split_binding(b, "--object");
            objects.push_back({role, read_json_file(path)});
        }
        json params = json::object();
        for (const auto& b : param_bindings) {
            auto [key, text] = split_binding(b, "--param");
            try {
                params[key] = json::parse(text);
            } catch (const json::parse_error&) {
                throw schema_error("--param " + key + ": '" + text + "' is not a JSON value");
            }
        }
        return cli::run_scene(cli::scene_from_flags(command, objects, params), flags, std::cerr);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_code(e.kind());
    }
}

// stochorder: classify boundaries, certify order preservation, compare
// generators and simulate models described by JSON model files.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stochorder/model_file.hpp"
#include "stochorder/pipelines.hpp"

namespace {

using namespace stochorder;

constexpr int exit_input_error = 2;

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelFileError(path + ": cannot write");
    out << text;
}

void emit_report(const PipelineResult& result, const std::string& path) {
    auto report = result.report;
    report["verdict"] = to_string(result.verdict);
    report["reason"] = result.reason;
    report["exit_code"] = exit_code(result.verdict);
    write_text(path, report.dump(2) + "\n");
}

int model_dim(const ModelFile& model) {
    return model.kind == ModelKind::diffusion_md ? model.field->dim : 1;
}

std::optional<OrderSpec> order_option(const std::string& name, const ModelFile& model) {
    if (name.empty()) return std::nullopt;
    return order_from_name(name, model_dim(model));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Verify stochastic monotonicity and order propagation for Markov models"};
    app.require_subcommand(1);

    std::string model_path;
    std::string out_path;
    std::string order_name;

    auto* classify = app.add_subcommand("classify", "Classify the endpoints of a 1-D diffusion");
    classify->add_option("model", model_path, "model file (.json)")->required();
    classify->add_option("--out", out_path, "write the JSON report here instead of stdout");

    std::string curves_path;
    auto* check = app.add_subcommand("check", "Certify that the semigroup preserves the order cone");
    check->add_option("model", model_path, "model file (.json)")->required();
    check->add_option("--order", order_name, "override the model's order");
    check->add_option("--out", out_path, "write the JSON report here instead of stdout");
    check->add_option("--emit-curves", curves_path, "write a t,quantity,value CSV of cone margins over t");

    std::string lower_path;
    std::string upper_path;
    auto* compare = app.add_subcommand("compare", "Check e^{tA1} f <= e^{tA} f <= e^{tA2} f on the order cone");
    compare->add_option("model1", lower_path, "lower model")->required();
    compare->add_option("model", model_path, "middle model")->required();
    compare->add_option("model2", upper_path, "upper model")->required();
    compare->add_option("--order", order_name, "override the middle model's order");
    compare->add_option("--out", out_path, "write the JSON report here instead of stdout");

    std::optional<double> sim_t;
    std::optional<std::size_t> sim_paths;
    std::optional<std::uint64_t> sim_seed;
    std::string csv_path;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo statistics against the matrix semigroup");
    simulate->add_option("model", model_path, "model file (.json)")->required();
    simulate->add_option("--t", sim_t, "time horizon (default: last numeric.times entry)");
    simulate->add_option("--paths", sim_paths, "number of paths");
    simulate->add_option("--seed", sim_seed, "random seed");
    simulate->add_option("--out", out_path, "write the JSON summary to this file");
    simulate->add_option("--csv", csv_path, "write the CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_input_error;
    }

    try {
        if (classify->parsed()) {
            auto result = run_classify(load_model_file(model_path));
            emit_report(result, out_path);
            return exit_code(result.verdict);
        }
        if (check->parsed()) {
            auto model = load_model_file(model_path);
            CheckSettings settings;
            settings.order = order_option(order_name, model);
            settings.curves = !curves_path.empty();
            auto result = run_check(model, settings);
            emit_report(result, out_path);
            if (settings.curves) write_text(curves_path, curves_csv(result.curves));
            return exit_code(result.verdict);
        }
        if (compare->parsed()) {
            auto lower = load_model_file(lower_path);
            auto middle = load_model_file(model_path);
            auto upper = load_model_file(upper_path);
            auto result = run_compare(lower, middle, upper, order_option(order_name, middle));
            emit_report(result, out_path);
            return exit_code(result.verdict);
        }
        if (simulate->parsed()) {
            auto model = load_model_file(model_path);
            SimulateSettings settings{sim_t, sim_paths, sim_seed};
            if (settings.paths && *settings.paths == 0) throw ModelFileError("--paths must be positive");
            auto result = run_simulate(model, settings);
            write_text(csv_path, curves_csv(result.curves));
            if (!out_path.empty()) emit_report(result, out_path);
            return 0;
        }
    } catch (const ModelFileError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(Verdict::inconclusive);
    }
    return exit_input_error;
}

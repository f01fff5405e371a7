#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vturnpike/cli.hpp"
#include "vturnpike/errors.hpp"

using namespace vturnpike;

int main(int argc, char** argv) {
    CLI::App app{"Velocity turnpike analysis for translation-symmetric optimal control problems"};
    app.require_subcommand(1);

    std::string scenario;
    std::string method_name = "direct";
    std::string out;
    cli::Options opts;

    const auto add_common = [&](CLI::App* sub, bool with_method, bool with_out, const char* out_help) {
        sub->add_option("--scenario", scenario, "Scenario file (JSON)")->required();
        if (with_method) {
            sub->add_option("--method", method_name, "direct, indirect or analytic")
                ->check(CLI::IsMember({"direct", "indirect", "analytic"}));
        }
        if (with_out) sub->add_option("--out", out, out_help)->required();
        sub->add_flag("--quiet", opts.quiet, "Suppress progress output");
    };

    CLI::App* solve = app.add_subcommand("solve", "Solve one horizon and write the trajectory CSV");
    add_common(solve, true, true, "Output CSV path");
    CLI::App* sweep = app.add_subcommand("sweep", "Solve every horizon of ocp.T_sweep");
    add_common(sweep, true, true, "Output directory");
    CLI::App* steady = app.add_subcommand("steady", "Report the optimal velocity steady state");
    add_common(steady, false, false, nullptr);
    CLI::App* turnpike = app.add_subcommand("turnpike", "Turnpike measures, dissipativity and bounds");
    add_common(turnpike, true, true, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kValidation;
    }

    cli::Method method;
    try {
        method = cli::parse_method(method_name);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kValidation;
    }

    if (*solve) return cli::cmd_solve(scenario, method, out, opts, std::cout, std::cerr);
    if (*sweep) return cli::cmd_sweep(scenario, method, out, opts, std::cout, std::cerr);
    if (*steady) return cli::cmd_steady(scenario, opts, std::cout, std::cerr);
    return cli::cmd_turnpike(scenario, method, out, opts, std::cout, std::cerr);
}

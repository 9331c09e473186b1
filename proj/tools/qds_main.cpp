#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qds/commands.hpp"
#include "qds/config.hpp"
#include "qds/errors.hpp"

namespace {

void write_output(const qds::config::RunConfig& config, const std::string& text) {
    if (config.output.path) {
        std::ofstream out(*config.output.path, std::ios::binary);
        if (!out) throw qds::ValidationError("cannot open for writing: " + *config.output.path);
        out << text;
        if (!out) throw qds::ValidationError("write failed: " + *config.output.path);
        return;
    }
    std::cout << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Three-party signing over a lossy optical link: parameter tables, link sweeps, "
                 "protocol sessions and attack simulations"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file")->required();
    std::uint64_t seed = 0;
    auto* seed_flag = app.add_option("--seed", seed, "seed for stochastic commands");
    std::string format;
    auto* format_flag = app.add_option("--format", format, "output format: json or csv");
    std::string out_path;
    auto* out_flag = app.add_option("--out", out_path, "write the report here instead of stdout");
    std::string transport = "inproc";
    app.add_option("--transport", transport, "session transport: inproc or socket");

    auto* params_cmd = app.add_subcommand("params", "derived security parameters and rates");

    auto* sweep_cmd = app.add_subcommand("sweep", "rate and length across a link-loss range");
    qds::commands::SweepOptions sweep_options;
    sweep_cmd->add_option("--variable", sweep_options.variable,
                          "swept quantity: fiber_loss_db or distance_km");
    sweep_cmd->add_option("--from", sweep_options.from, "range start")->required();
    sweep_cmd->add_option("--to", sweep_options.to, "range end")->required();
    sweep_cmd->add_option("--step", sweep_options.step, "range step");
    sweep_cmd->add_option("--loss-per-km", sweep_options.loss_per_km,
                          "fiber attenuation used to convert distance to loss");

    auto* run_cmd = app.add_subcommand("run", "execute a signing session");
    qds::commands::RunOptions run_options;
    run_cmd->add_option("--stage", run_options.stage, "both, dist or msg");
    std::string store_path;
    auto* store_flag = run_cmd->add_option("--store", store_path, "key-material file");
    std::string transcript_path;
    auto* transcript_flag =
        run_cmd->add_option("--transcript", transcript_path, "write the frame transcript here");

    auto* simulate_cmd = app.add_subcommand("simulate", "attack suites against the bounds");
    qds::commands::SimulateOptions simulate_options;
    std::vector<double> flip_grid;
    auto* grid_flag = simulate_cmd->add_option("--flip-grid", flip_grid,
                                               "per-origin flip rates for the repudiation sweep");
    double s_a_override = 0.0;
    auto* s_a_flag = simulate_cmd->add_option("--s-a", s_a_override, "authentication threshold");
    double s_v_override = 0.0;
    auto* s_v_flag = simulate_cmd->add_option("--s-v", s_v_override, "verification threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        auto config = qds::config::load_config(config_path);
        if (seed_flag->count() > 0) config.simulation.seed = seed;
        if (format_flag->count() > 0) config.output.format = format;
        if (out_flag->count() > 0) config.output.path = out_path;

        qds::commands::CommandResult result;
        if (params_cmd->parsed()) {
            result = qds::commands::cmd_params(config);
        } else if (sweep_cmd->parsed()) {
            result = qds::commands::cmd_sweep(config, sweep_options);
        } else if (run_cmd->parsed()) {
            run_options.transport = transport;
            if (store_flag->count() > 0) run_options.store_path = store_path;
            if (transcript_flag->count() > 0) run_options.transcript_path = transcript_path;
            result = qds::commands::cmd_run(config, run_options);
        } else {
            if (grid_flag->count() > 0) simulate_options.flip_grid = flip_grid;
            if (s_a_flag->count() > 0) simulate_options.s_a_override = s_a_override;
            if (s_v_flag->count() > 0) simulate_options.s_v_override = s_v_override;
            result = qds::commands::cmd_simulate(config, simulate_options);
        }
        write_output(config, result.output);
        return result.exit_code;
    } catch (const qds::ValidationError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    } catch (const qds::ProtocolError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}

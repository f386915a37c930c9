// amisim: batch front end for the aggregator-based AMI simulator.

#include "amisim/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

int main(int argc, char** argv)
{
    namespace cli = amisim::cli;

    CLI::App app{"Aggregator-based AMI simulator"};
    app.require_subcommand(1);

    cli::SimulateOptions sim;
    std::uint64_t seed_override = 0;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario and write run artifacts");
    simulate->add_option("--scenario", sim.scenario, "Scenario (.scn) file")->required();
    simulate->add_option("--out", sim.out_dir, "Output directory")->required();
    auto* seed_opt = simulate->add_option("--seed-override", seed_override, "Replace the scenario seed");
    simulate->add_flag("--event-log", sim.event_log, "Also write events.log");

    cli::AuditOptions audit;
    std::string audit_scenario;
    auto* audit_cmd = app.add_subcommand("audit", "Check a report log for identifying content");
    audit_cmd->add_option("--reports", audit.reports, "reports.log to audit")->required();
    auto* audit_scn_opt =
        audit_cmd->add_option("--scenario", audit_scenario, "Scenario defining the known serials");

    cli::StatsOptions stats;
    auto* stats_cmd = app.add_subcommand("stats", "Data reduction summary for a run directory");
    stats_cmd->add_option("--run", stats.run_dir, "Directory written by simulate")->required();
    stats_cmd->add_flag("--bytes", stats.bytes, "Count serialized bytes instead of scalar values");

    cli::PassthruOptions pass;
    std::string action;
    amisim::SimTime at = 0;
    auto* pass_cmd = app.add_subcommand("passthru", "Billing read or connection command via pass-thru");
    pass_cmd->add_option("--run", pass.run_dir, "Directory written by simulate")->required();
    pass_cmd->add_option("--action", action, "read | connect | disconnect")
        ->required()
        ->check(CLI::IsMember({"read", "connect", "disconnect"}));
    pass_cmd->add_option("--aggregator", pass.aggregator_id, "Aggregator id")->required();
    pass_cmd->add_option("--serial", pass.serial, "Meter serial")->required();
    auto* at_opt = pass_cmd->add_option("--at", at, "Command issue time in simulated seconds");

    cli::AmbiguityOptions amb;
    auto* amb_cmd = app.add_subcommand("ambiguity", "Reconstruction ambiguity of the latest reports");
    amb_cmd->add_option("--run", amb.run_dir, "Directory written by simulate")->required();
    amb_cmd->add_option("--trials", amb.trials, "Monte Carlo trials");
    amb_cmd->add_option("--seed", amb.seed, "Sampler seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kExitUsage;
    }

    if (simulate->parsed()) {
        if (*seed_opt) {
            sim.seed_override = seed_override;
        }
        return cli::cmd_simulate(sim, std::cout, std::cerr);
    }
    if (audit_cmd->parsed()) {
        if (*audit_scn_opt) {
            audit.scenario = audit_scenario;
        }
        return cli::cmd_audit(audit, std::cout, std::cerr);
    }
    if (stats_cmd->parsed()) {
        return cli::cmd_stats(stats, std::cout, std::cerr);
    }
    if (pass_cmd->parsed()) {
        static const std::map<std::string, cli::PassthruAction> actions{
            {"read", cli::PassthruAction::Read},
            {"connect", cli::PassthruAction::Connect},
            {"disconnect", cli::PassthruAction::Disconnect}};
        pass.action = actions.at(action);
        if (*at_opt) {
            pass.at = at;
        }
        return cli::cmd_passthru(pass, std::cout, std::cerr);
    }
    if (amb_cmd->parsed()) {
        return cli::cmd_ambiguity(amb, std::cout, std::cerr);
    }
    return cli::kExitUsage;
}

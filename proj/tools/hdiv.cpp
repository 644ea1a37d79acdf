// hdiv: Monte Carlo tables, single-dataset fits and simulated data export.
#include <hdiv/hdiv.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace hdiv;

int run_simulate(const std::string& config_path, const std::string& output_override)
{
    ScenarioConfig cfg = parse_config(io::read_file(config_path));
    if (!output_override.empty()) cfg.output_path = output_override;
    const ResultTable table = run_scenario(cfg, effective_parallelism(cfg.parallelism));
    for (const auto& f : table.failures) {
        std::fprintf(stderr, "warning: replication %d, %s excluded: %s\n", f.replication, f.method.c_str(),
                     f.message.c_str());
    }
    emit_table(table.rows, cfg.format, cfg.output_path);
    return 0;
}

int run_tables(const std::string& preset, std::optional<int> n_sims, const std::string& format,
               const std::string& output, int threads)
{
    std::vector<ResultRow> rows;
    for (const auto& cfg : preset_scenarios(preset, n_sims)) {
        std::fprintf(stderr, "running %s (%d replications)\n", cfg.id.c_str(), cfg.sim.n_sims);
        const ResultTable table = run_scenario(cfg, effective_parallelism(threads));
        for (const auto& f : table.failures) {
            std::fprintf(stderr, "warning: %s replication %d, %s excluded: %s\n", cfg.id.c_str(), f.replication,
                         f.method.c_str(), f.message.c_str());
        }
        rows.insert(rows.end(), table.rows.begin(), table.rows.end());
    }
    emit_table(rows, format, output);
    return 0;
}

int run_fit(const std::string& data_path, const std::string& method_name, std::optional<double> gamma,
            const CvSpec& cv, const std::string& output)
{
    const Dataset data = io::read_dataset_csv(data_path);
    if (data.n() < cv.n_folds) {
        throw Error(ErrorKind::Data, "too few observations: n = " + std::to_string(data.n()) + " < " +
                                         std::to_string(cv.n_folds) + " folds");
    }
    std::string name = method_name;
    if (gamma) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "(%.17g)", *gamma);
        name += buf;
    }
    const SimConfig defaults;
    const MethodSpec method = parse_method(name, defaults.gamma2, defaults.gamma1);
    const TwoStageFit fit = run_two_stage(data, method, cv);

    const DiagnosticsReport diag =
        diagnose(fit.d_hat, fit.beta_hat, fit.support_beta, fit.d_hat, fit.support_beta, fit.initial_beta,
                 std::nullopt, /*plug_in=*/true);
    std::string text = io::fit_report_csv(fit);
    text += io::commented("method = " + method.label(), "sigma_eps_hat = " + io::format_exact(fit.sigma_eps_hat) +
                                                            "\nlambda_stage2 = " + io::format_exact(fit.lambda_stage2));
    text += io::commented("diagnostics (plug-in: computed from estimated D and beta, not the truth)", diag.to_text());
    for (const auto& line : fit.report) text += "# warning: " + line + '\n';

    if (output.empty() || output == "-") {
        std::fputs(text.c_str(), stdout);
    } else {
        io::write_file(output, text);
    }
    return 0;
}

int run_generate(const SimConfig& sim, std::uint64_t seed, const std::string& output)
{
    sim.validate();
    const Dataset data = simulate(sim, seed);
    const std::string text = io::dataset_to_csv(data);
    if (output.empty() || output == "-") {
        std::fputs(text.c_str(), stdout);
    } else {
        io::write_file(output, text);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"hdiv: penalized two-stage least squares for high-dimensional IV models"};
    app.require_subcommand(1);

    std::string config_path;
    std::string sim_output;
    auto* simulate_cmd = app.add_subcommand("simulate", "run a Monte Carlo scenario from a config file");
    simulate_cmd->add_option("--config", config_path, "scenario config (key = value lines)")->required();
    simulate_cmd->add_option("--output", sim_output, "override the config's output path ('-' for stdout)");

    std::string preset;
    std::optional<int> preset_sims;
    std::string table_format = "csv";
    std::string table_output;
    int table_threads = 1;
    auto* tables_cmd = app.add_subcommand("tables", "run a preset group of scenarios");
    tables_cmd->add_option("--preset", preset, "table1|table2|table3|table4|table5")->required();
    tables_cmd->add_option("--n-sims", preset_sims, "override the replication count");
    tables_cmd->add_option("--format", table_format, "csv|markdown");
    tables_cmd->add_option("--output", table_output, "output path (default stdout)");
    tables_cmd->add_option("--threads", table_threads, "worker threads (HDIV_THREADS overrides)");

    std::string data_path;
    std::string method_name;
    std::optional<double> fit_gamma;
    CvSpec fit_cv;
    std::string fit_output;
    auto* fit_cmd = app.add_subcommand("fit", "fit one dataset (CSV: y,x1..xp,z1..zq)");
    fit_cmd->add_option("--data", data_path, "dataset CSV")->required();
    fit_cmd->add_option("--method", method_name, "OLS|LASSO|BRIDGE|ADALASSO")->required();
    fit_cmd->add_option("--gamma", fit_gamma, "second-stage bridge exponent in (0,1)");
    fit_cmd->add_option("--folds", fit_cv.n_folds, "cross-validation folds");
    fit_cmd->add_option("--cv-seed", fit_cv.seed, "fold assignment seed");
    fit_cmd->add_option("--output", fit_output, "report path (default stdout)");

    SimConfig gen_sim;
    std::uint64_t gen_seed = gen_sim.base_seed + 1;
    std::string gen_output;
    auto* gen_cmd = app.add_subcommand("generate", "write one simulated dataset as CSV");
    gen_cmd->add_option("--n", gen_sim.n, "observations");
    gen_cmd->add_option("--p-x", gen_sim.p_x, "endogenous regressors");
    gen_cmd->add_option("--p-z", gen_sim.p_z, "instruments");
    gen_cmd->add_option("--k-x", gen_sim.k_x, "relevant regressors");
    gen_cmd->add_option("--seed", gen_seed, "replication seed");
    gen_cmd->add_option("--output", gen_output, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*simulate_cmd) return run_simulate(config_path, sim_output);
        if (*tables_cmd) return run_tables(preset, preset_sims, table_format, table_output, table_threads);
        if (*fit_cmd) {
            if (fit_gamma && method_name != "BRIDGE" && method_name != "bridge") {
                throw Error(ErrorKind::Config, "--gamma applies to BRIDGE only");
            }
            return run_fit(data_path, method_name, fit_gamma, fit_cv, fit_output);
        }
        if (*gen_cmd) return run_generate(gen_sim, gen_seed, gen_output);
    } catch (const Error& e) {
        std::fprintf(stderr, "error[%s]: %s\n", to_string(e.kind()), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error[internal]: %s\n", e.what());
        return 3;
    }
    return 0;
}

#pragma once
#include <hdiv/dgp.hpp>
#include <hdiv/io.hpp>
#include <hdiv/metrics.hpp>
#include <hdiv/two_stage.hpp>
#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>

namespace hdiv {

/// Stage-1 penalty for every method of a scenario; Auto follows the method defaults.
enum class Stage1Override { Auto, Bridge, Lasso, Ols };

struct ScenarioConfig
{
    std::string id = "scenario";
    SimConfig sim;
    std::vector<MethodSpec> methods;
    CvSpec cv;
    std::string output_path;
    std::string format = "csv";
    int parallelism = 1;

    void validate() const
    {
        sim.validate();
        cv.validate();
        if (methods.empty()) throw Error(ErrorKind::Config, "scenario '" + id + "' lists no methods");
        for (const auto& m : methods) {
            for (const StageChoice* s : {&m.stage1, &m.stage2}) {
                if (s->kind == PenaltyKind::Bridge && !(s->gamma > 0.0 && s->gamma < 1.0)) {
                    throw Error(ErrorKind::Config, "bridge gamma must lie in (0,1)");
                }
            }
        }
        if (parallelism < 1) throw Error(ErrorKind::Config, "parallelism must be >= 1");
        if (format != "csv" && format != "markdown") throw Error(ErrorKind::Config, "format must be csv or markdown");
    }
};

/**
 * Method descriptor text: OLS, LASSO, ADALASSO, BRIDGE (uses default_gamma2)
 * or BRIDGE(g). Stage 1 follows the method unless overridden.
 */
inline MethodSpec parse_method(std::string text, double default_gamma2, double gamma1,
                               Stage1Override stage1 = Stage1Override::Auto)
{
    text.erase(std::remove_if(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }), text.end());
    std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::toupper(c); });
    MethodSpec m;
    if (text == "OLS") {
        m = MethodSpec::ols();
    } else if (text == "LASSO") {
        m = MethodSpec::lasso();
    } else if (text == "ADALASSO" || text == "ADAPTIVELASSO") {
        m = MethodSpec::adaptive_lasso(gamma1);
    } else if (text == "BRIDGE") {
        m = MethodSpec::bridge(default_gamma2, gamma1);
    } else if (text.rfind("BRIDGE(", 0) == 0 && text.back() == ')') {
        const auto g = io::parse_double(std::string_view(text).substr(7, text.size() - 8));
        if (!g || !(*g > 0.0 && *g < 1.0)) throw Error(ErrorKind::Config, "bad bridge exponent in '" + text + "'");
        m = MethodSpec::bridge(*g, gamma1);
    } else {
        throw Error(ErrorKind::Config, "unknown method '" + text + "' (OLS, LASSO, BRIDGE(g), ADALASSO)");
    }
    switch (stage1) {
        case Stage1Override::Auto: break;
        case Stage1Override::Bridge: m.stage1 = StageChoice{PenaltyKind::Bridge, gamma1, {}, {}}; break;
        case Stage1Override::Lasso: m.stage1 = StageChoice{PenaltyKind::Lasso, 0.5, {}, {}}; break;
        case Stage1Override::Ols: m.stage1 = StageChoice{PenaltyKind::Ols, 0.5, {}, {}}; break;
    }
    return m;
}

/**
 * Flat `key = value` config, `#` comments. Keys mirror SimConfig and CvSpec,
 * plus: scenario, methods (comma list), stage1 (auto|bridge|lasso|ols),
 * stage1_lambda / stage2_lambda (fixed lambda, skips CV), output, format,
 * parallelism.
 */
inline ScenarioConfig parse_config(const std::string& text)
{
    ScenarioConfig cfg;
    std::string methods_text = "OLS, LASSO, BRIDGE";
    std::string stage1_text = "auto";
    std::optional<double> stage1_lambda;
    std::optional<double> stage2_lambda;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        if (eq == std::string::npos) throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        auto num = [&]() {
            const auto v = io::parse_double(value);
            if (!v) throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": '" + key + "' needs a number");
            return *v;
        };
        auto count = [&]() {
            const double v = num();
            if (v != std::floor(v) || v < 0) {
                throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": '" + key + "' needs a nonnegative integer");
            }
            return static_cast<long long>(v);
        };

        auto& s = cfg.sim;
        if (key == "scenario") cfg.id = value;
        else if (key == "n") s.n = count();
        else if (key == "p_x") s.p_x = count();
        else if (key == "p_z") s.p_z = count();
        else if (key == "k_x") s.k_x = count();
        else if (key == "rho") s.rho = num();
        else if (key == "sigma_u") s.sigma_u = num();
        else if (key == "sigma_v") s.sigma_v = num();
        else if (key == "sigma_uv_high") s.sigma_uv_high = num();
        else if (key == "sigma_uv_low") s.sigma_uv_low = num();
        else if (key == "gamma1") s.gamma1 = num();
        else if (key == "gamma2") s.gamma2 = num();
        else if (key == "coef_low") s.coef_low = num();
        else if (key == "coef_high") s.coef_high = num();
        else if (key == "alpha_noise_sd") s.alpha_noise_sd = num();
        else if (key == "n_sims") s.n_sims = static_cast<int>(count());
        else if (key == "base_seed") s.base_seed = static_cast<std::uint64_t>(count());
        else if (key == "cv_folds") cfg.cv.n_folds = static_cast<int>(count());
        else if (key == "cv_grid_size") cfg.cv.grid_size = static_cast<int>(count());
        else if (key == "cv_grid_min_ratio") cfg.cv.grid_min_ratio = num();
        else if (key == "methods") methods_text = value;
        else if (key == "stage1") stage1_text = value;
        else if (key == "stage1_lambda") stage1_lambda = num();
        else if (key == "stage2_lambda") stage2_lambda = num();
        else if (key == "output") cfg.output_path = value;
        else if (key == "format") cfg.format = value;
        else if (key == "parallelism") cfg.parallelism = static_cast<int>(count());
        else throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }

    Stage1Override stage1 = Stage1Override::Auto;
    if (stage1_text == "bridge") stage1 = Stage1Override::Bridge;
    else if (stage1_text == "lasso") stage1 = Stage1Override::Lasso;
    else if (stage1_text == "ols") stage1 = Stage1Override::Ols;
    else if (stage1_text != "auto") throw Error(ErrorKind::Config, "stage1 must be auto, bridge, lasso or ols");

    // split on commas outside parentheses
    std::string cur;
    int depth = 0;
    auto flush = [&]() {
        if (cur.find_first_not_of(" \t") != std::string::npos) {
            cfg.methods.push_back(parse_method(cur, cfg.sim.gamma2, cfg.sim.gamma1, stage1));
        }
        cur.clear();
    };
    for (char c : methods_text) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) flush();
        else cur += c;
    }
    flush();
    for (auto& m : cfg.methods) {
        if (stage1_lambda && m.stage1.kind != PenaltyKind::Ols) m.stage1.fixed_lambda = stage1_lambda;
        if (stage2_lambda && m.stage2.kind != PenaltyKind::Ols) m.stage2.fixed_lambda = stage2_lambda;
    }
    cfg.validate();
    return cfg;
}

struct ResultRow
{
    std::string scenario;
    std::string method;
    double gamma = std::numeric_limits<double>::quiet_NaN(); // second-stage bridge exponent
    double mean_rmse = 0.0;
    double median_rmse = 0.0;
    double mean_selected = 0.0;
    double p_contains = 0.0;
    double p_equals = 0.0;
    int n_completed = 0;
};

struct ReplicationFailure
{
    int replication = 0;
    std::string method;
    std::string message;
};

struct ResultTable
{
    std::vector<ResultRow> rows;
    std::vector<ReplicationFailure> failures;
    /// Per method, per completed replication, in replication order.
    std::vector<std::vector<ReplicationScore>> scores;
};

/// HDIV_THREADS, when set to a positive integer, replaces the configured worker count.
inline int effective_parallelism(int configured)
{
    if (const char* env = std::getenv("HDIV_THREADS")) {
        const auto v = io::parse_double(env);
        if (v && *v >= 1.0 && *v == std::floor(*v)) return static_cast<int>(*v);
    }
    return configured;
}

/// Runs body(i) for i in [0, count) on `workers` threads. Order of execution is unspecified.
inline void parallel_for(int count, int workers, const std::function<void(int)>& body)
{
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    const std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

/// Outcome of one replication: a score or a failure message per method.
struct ReplicationOutcome
{
    std::vector<std::optional<ReplicationScore>> scores;
    std::vector<std::string> errors;
};

/// Replication r (1-based) of a scenario; seed = base_seed + r drives truth, sample and folds.
inline ReplicationOutcome run_replication(const ScenarioConfig& cfg, int r)
{
    const std::uint64_t seed = cfg.sim.base_seed + static_cast<std::uint64_t>(r);
    ReplicationOutcome out;
    out.scores.resize(cfg.methods.size());
    out.errors.resize(cfg.methods.size());

    Dataset data;
    try {
        data = simulate(cfg.sim, seed);
    } catch (const Error& e) {
        for (auto& msg : out.errors) msg = std::string("data generation: ") + e.what();
        return out;
    }
    CvSpec cv = cfg.cv;
    cv.seed = seed;

    std::vector<std::pair<StageChoice, std::optional<FirstStageFit>>> cache;
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        const auto& method = cfg.methods[m];
        try {
            auto it = std::find_if(cache.begin(), cache.end(), [&](const auto& e) { return e.first == method.stage1; });
            if (it == cache.end()) {
                cache.emplace_back(method.stage1, fit_first_stage(data.Z, data.X, method.stage1, cv));
                it = std::prev(cache.end());
            }
            const TwoStageFit fit = run_two_stage(data, method, cv, &*it->second);
            out.scores[m] = score_replication(fit, *data.truth);
        } catch (const Error& e) {
            out.errors[m] = e.what();
        }
    }
    return out;
}

/**
 * Monte Carlo over replications 1..n_sims. Replications run on a worker
 * pool and are reduced in replication order, so the table does not depend
 * on the worker count. Failed (replication, method) pairs are excluded from
 * aggregates and listed in failures.
 */
inline ResultTable run_scenario(const ScenarioConfig& cfg, int workers = 1)
{
    cfg.validate();
    if (cfg.sim.k_x > cfg.sim.p_z) {
        throw Error(ErrorKind::Config, "insufficient instruments: k_x exceeds p_z");
    }
    const int n = cfg.sim.n_sims;
    std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(n));
    parallel_for(n, workers, [&](int i) { outcomes[static_cast<std::size_t>(i)] = run_replication(cfg, i + 1); });

    ResultTable table;
    table.scores.resize(cfg.methods.size());
    for (int i = 0; i < n; ++i) {
        const auto& o = outcomes[static_cast<std::size_t>(i)];
        for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
            if (o.scores[m]) {
                table.scores[m].push_back(*o.scores[m]);
            } else {
                table.failures.push_back({i + 1, cfg.methods[m].label(), o.errors[m]});
            }
        }
    }
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        const auto& method = cfg.methods[m];
        ResultRow row;
        row.scenario = cfg.id;
        row.method = to_string(method.stage2.kind);
        if (method.stage2.kind == PenaltyKind::Bridge) row.gamma = method.stage2.gamma;
        row.n_completed = static_cast<int>(table.scores[m].size());
        if (!table.scores[m].empty()) {
            const auto s = aggregate(table.scores[m]);
            row.mean_rmse = s.mean_rmse;
            row.median_rmse = s.median_rmse;
            row.mean_selected = s.mean_selected;
            row.p_contains = s.p_contains;
            row.p_equals = s.p_equals;
        } else {
            row.mean_rmse = row.median_rmse = row.mean_selected = row.p_contains = row.p_equals =
                std::numeric_limits<double>::quiet_NaN();
        }
        table.rows.push_back(row);
    }
    return table;
}

inline const char* table_csv_header()
{
    return "scenario,method,gamma,mean_rmse,median_rmse,mean_selected,p_contains,p_equals,n_completed";
}

inline std::string table_to_csv(const std::vector<ResultRow>& rows)
{
    std::string out = std::string(table_csv_header()) + '\n';
    for (const auto& r : rows) {
        out += r.scenario + ',' + r.method + ',' + io::format_fixed(r.gamma) + ',' + io::format_fixed(r.mean_rmse) + ',' +
               io::format_fixed(r.median_rmse) + ',' + io::format_fixed(r.mean_selected) + ',' +
               io::format_fixed(r.p_contains) + ',' + io::format_fixed(r.p_equals) + ',' + std::to_string(r.n_completed) +
               '\n';
    }
    return out;
}

inline std::vector<ResultRow> parse_table_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != table_csv_header()) throw Error(ErrorKind::Data, "result table: bad header");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = io::split(line);
        if (c.size() != 9) throw Error(ErrorKind::Data, "result table: expected 9 cells in '" + line + "'");
        auto num = [&](const std::string& s) {
            if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
            const auto v = io::parse_double(s);
            if (!v) throw Error(ErrorKind::Data, "result table: non-numeric cell '" + s + "'");
            return *v;
        };
        ResultRow r;
        r.scenario = c[0];
        r.method = c[1];
        r.gamma = num(c[2]);
        r.mean_rmse = num(c[3]);
        r.median_rmse = num(c[4]);
        r.mean_selected = num(c[5]);
        r.p_contains = num(c[6]);
        r.p_equals = num(c[7]);
        r.n_completed = static_cast<int>(num(c[8]));
        rows.push_back(r);
    }
    return rows;
}

/// Two markdown tables: RMSE / model size, then selection probabilities.
inline std::string table_to_markdown(const std::vector<ResultRow>& rows)
{
    auto label = [](const ResultRow& r) {
        return std::isnan(r.gamma) ? r.method : r.method + " (γ=" + io::format_fixed(r.gamma, 2) + ")";
    };
    std::string out = "| Scenario | Method | Mean RMSE | Median RMSE | # Variables |\n|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        out += "| " + r.scenario + " | " + label(r) + " | " + io::format_fixed(r.mean_rmse) + " | " +
               io::format_fixed(r.median_rmse) + " | " + io::format_fixed(r.mean_selected, 2) + " |\n";
    }
    out += "\n| Scenario | Method | Pr(True ⊆ Ŝ) | Pr(Ŝ = True) | Completed |\n|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        out += "| " + r.scenario + " | " + label(r) + " | " + io::format_fixed(r.p_contains, 2) + " | " +
               io::format_fixed(r.p_equals, 2) + " | " + std::to_string(r.n_completed) + " |\n";
    }
    return out;
}

/// Writes the table to path ("-" or empty means stdout).
inline void emit_table(const std::vector<ResultRow>& rows, const std::string& format, const std::string& path)
{
    std::string text;
    if (format == "csv") text = table_to_csv(rows);
    else if (format == "markdown") text = table_to_markdown(rows);
    else throw Error(ErrorKind::Config, "unknown table format '" + format + "'");
    if (path.empty() || path == "-") {
        std::fputs(text.c_str(), stdout);
        std::fflush(stdout);
    } else {
        io::write_file(path, text);
    }
}

/**
 * Preset scenario groups.
 * table1/table2: n in {30,60,120}, p_x = p_z = 30, k = 6; OLS, LASSO, BRIDGE(0.2, 0.5, 0.8); 200 sims.
 * table3: n = 60, BRIDGE over 13 exponents; 100 sims.
 * table4/table5: n = 1000, p_z = 100, p_x in {100, 500, 1000}; OLS, LASSO, BRIDGE(0.5); 200 sims.
 */
inline std::vector<ScenarioConfig> preset_scenarios(const std::string& name, std::optional<int> n_sims = {})
{
    std::vector<ScenarioConfig> out;
    auto base = [&](const std::string& id, Index n, Index p_x, Index p_z, int sims) {
        ScenarioConfig c;
        c.id = id;
        c.sim.n = n;
        c.sim.p_x = p_x;
        c.sim.p_z = p_z;
        c.sim.k_x = 6;
        c.sim.n_sims = n_sims.value_or(sims);
        return c;
    };
    if (name == "table1" || name == "table2") {
        for (Index n : {30, 60, 120}) {
            auto c = base(name + "_n" + std::to_string(n), n, 30, 30, 200);
            c.methods = {MethodSpec::ols(), MethodSpec::lasso(), MethodSpec::bridge(0.2), MethodSpec::bridge(0.5),
                         MethodSpec::bridge(0.8)};
            out.push_back(c);
        }
    } else if (name == "table3") {
        auto c = base("table3_n60", 60, 30, 30, 100);
        for (double g : {0.01, 0.10, 0.20, 0.25, 0.30, 0.40, 0.50, 0.60, 0.70, 0.75, 0.80, 0.90, 0.99}) {
            c.methods.push_back(MethodSpec::bridge(g));
        }
        out.push_back(c);
    } else if (name == "table4" || name == "table5") {
        for (Index p_x : {100, 500, 1000}) {
            auto c = base(name + "_px" + std::to_string(p_x), 1000, p_x, 100, 200);
            c.methods = {MethodSpec::ols(), MethodSpec::lasso(), MethodSpec::bridge(0.5)};
            out.push_back(c);
        }
    } else {
        throw Error(ErrorKind::Config, "unknown preset '" + name + "' (table1..table5)");
    }
    return out;
}

} // namespace hdiv

#pragma once

// Command-line front end: fit, simulate, expected.
// Exit codes: 0 success, 1 input or usage error, 2 a model failed.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "triplemark/core.hpp"
#include "triplemark/inference.hpp"
#include "triplemark/simulation.hpp"

namespace triplemark::cli {

inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kModelFailure = 2;

namespace detail {

inline std::vector<ModelId> parse_models(const std::string& spec, bool include_mt_in_all) {
    std::string lower;
    for (char c : spec) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "all") {
        std::vector<ModelId> all{ModelId::tbm1, ModelId::tbm2, ModelId::llm1, ModelId::llm2, ModelId::mtb};
        if (include_mt_in_all) all.push_back(ModelId::mt);
        return all;
    }
    std::vector<ModelId> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto id = parse_model_id(item);
        if (!id) throw CLI::ValidationError("--model", "unknown model id '" + item + "' (valid: tbm1, tbm2, llm1, llm2, mtb, mt, all)");
        out.push_back(*id);
    }
    if (out.empty()) throw CLI::ValidationError("--model", "no model given");
    return out;
}

template <std::size_t K>
std::array<double, K> parse_vector(const std::string& s, const std::string& flag) {
    std::array<double, K> out{};
    std::stringstream ss(s);
    std::string item;
    std::size_t n = 0;
    while (std::getline(ss, item, ',')) {
        if (n >= K) throw CLI::ValidationError(flag, "expected " + std::to_string(K) + " values");
        try {
            std::size_t used = 0;
            out[n++] = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "not a number '" + item + "'");
        }
    }
    if (n != K) throw CLI::ValidationError(flag, "expected " + std::to_string(K) + " values");
    return out;
}

inline std::string valid_scenario_ids() {
    std::string s;
    for (const auto& sc : sim::builtin_scenarios()) s += (s.empty() ? "" : ", ") + sc.id;
    return s;
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Population size estimation for triple-record capture data"};
    app.require_subcommand(1);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit models to a 7-cell table");
    std::string data_path, model_spec = "all", log_fact = "exact";
    bool as_json = false, echo = false;
    double ci_level = 0.95;
    fit_cmd->add_option("--data", data_path, "CSV with header cell,count")->required();
    fit_cmd->add_option("--model", model_spec, "Model id, comma list, or all");
    fit_cmd->add_flag("--json", as_json, "Structured JSON report");
    fit_cmd->add_option("--ci-level", ci_level, "Confidence level for the interval");
    fit_cmd->add_option("--log-factorial", log_fact, "exact (log-gamma) or stirling");
    fit_cmd->add_flag("--echo", echo, "Print the parsed table as CSV and exit");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Run a replicated simulation study");
    std::string scenario_spec, sim_models = "all", out_path;
    std::int64_t replicates = 500;
    std::uint64_t seed = 20190001;
    unsigned threads = 0;
    std::vector<std::int64_t> sizes;
    sim_cmd->add_option("--scenario", scenario_spec, "P1..P10, comma list, all, or a scenario file")->required();
    sim_cmd->add_option("--models", sim_models, "Model list or all");
    sim_cmd->add_option("--replicates", replicates, "Replicates per scenario")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", seed, "Master seed");
    sim_cmd->add_option("--out", out_path, "Write CSV here instead of stdout");
    sim_cmd->add_option("--threads", threads, "Worker threads (default TRIPLEMARK_THREADS or hardware)");
    sim_cmd->add_option("--N", sizes, "Population sizes for the built-in scenarios (default 400,1000)")->delimiter(',');

    // expected
    auto* exp_cmd = app.add_subcommand("expected", "Expected number of captured individuals");
    std::string exp_scenario, p_spec, alpha_spec;
    std::vector<std::int64_t> exp_sizes;
    exp_cmd->add_option("--scenario", exp_scenario, "P1..P10 or all");
    exp_cmd->add_option("--p", p_spec, "p1,p2,p3");
    exp_cmd->add_option("--alpha", alpha_spec, "a1,a2,a3,a4");
    exp_cmd->add_option("--N", exp_sizes, "Population size(s)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }

    try {
        if (*fit_cmd) {
            const auto table = read_table_csv(data_path);
            if (echo) {
                render_table_csv(out, table);
                return kOk;
            }
            if (table.total() < 1) throw InputError("no observed captures");
            const auto models = detail::parse_models(model_spec, false);
            FitOptions fo;
            fo.ci_level = ci_level;
            const auto lf = parse_log_factorial(log_fact);
            if (!lf) throw CLI::ValidationError("--log-factorial", "expected exact or stirling");
            fo.log_factorial = *lf;
            normal_critical_value(ci_level);
            const auto rep = compare(table, models, fo);
            if (as_json) out << to_json(rep).dump(2) << '\n';
            else out << render_text(rep);
            if (!rep.all_succeeded()) {
                for (const auto& o : rep.outcomes)
                    if (!o.ok()) err << "model " << to_string(o.model) << " failed: " << o.error << '\n';
                return kModelFailure;
            }
            return kOk;
        }

        if (*sim_cmd) {
            const auto models = detail::parse_models(sim_models, false);
            if (sizes.empty()) sizes = {400, 1000};
            std::vector<sim::Scenario> scenarios;
            std::string upper = scenario_spec;
            for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            if (upper == "ALL") {
                for (auto n : sizes)
                    for (const auto& s : sim::builtin_scenarios(n)) scenarios.push_back(s);
            } else if (upper.size() >= 2 && upper[0] == 'P' && std::isdigit(static_cast<unsigned char>(upper[1]))) {
                std::stringstream ss(scenario_spec);
                std::string id;
                std::vector<std::string> ids;
                while (std::getline(ss, id, ',')) ids.push_back(id);
                for (auto n : sizes)
                    for (const auto& i : ids) {
                        const auto s = sim::builtin_scenario(i, n);
                        if (!s)
                            throw CLI::ValidationError("--scenario", "unknown scenario '" + i +
                                                                         "' (valid: " + detail::valid_scenario_ids() + ", all, or a file)");
                        scenarios.push_back(*s);
                    }
            } else {
                std::ifstream probe(scenario_spec);
                if (!probe)
                    throw CLI::ValidationError("--scenario", "unknown scenario '" + scenario_spec + "' (valid: " +
                                                                 detail::valid_scenario_ids() + ", all, or a file)");
                scenarios = sim::read_scenarios(scenario_spec);
            }
            sim::StudyOptions so;
            so.replicates = replicates;
            so.master_seed = seed;
            so.threads = threads;
            const auto rows = sim::run_study(scenarios, models, so);
            if (out_path.empty()) {
                sim::write_summary_csv(out, rows);
            } else {
                std::ofstream f(out_path);
                if (!f) throw InputError("cannot write " + out_path);
                sim::write_summary_csv(f, rows);
            }
            return kOk;
        }

        if (*exp_cmd) {
            if (exp_sizes.empty()) exp_sizes = {400, 1000};
            std::vector<sim::Scenario> scenarios;
            if (!exp_scenario.empty()) {
                if (!p_spec.empty() || !alpha_spec.empty())
                    throw CLI::ValidationError("--scenario", "give either --scenario or --p/--alpha");
                std::string upper = exp_scenario;
                for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                for (auto n : exp_sizes) {
                    if (upper == "ALL") {
                        for (const auto& s : sim::builtin_scenarios(n)) scenarios.push_back(s);
                    } else {
                        const auto s = sim::builtin_scenario(exp_scenario, n);
                        if (!s)
                            throw CLI::ValidationError("--scenario", "unknown scenario '" + exp_scenario +
                                                                         "' (valid: " + detail::valid_scenario_ids() + ", all)");
                        scenarios.push_back(*s);
                    }
                }
            } else {
                if (p_spec.empty()) throw CLI::ValidationError("--p", "required without --scenario");
                sim::Scenario s;
                s.id = "custom";
                s.p = detail::parse_vector<3>(p_spec, "--p");
                if (!alpha_spec.empty()) s.alpha = detail::parse_vector<4>(alpha_spec, "--alpha");
                s.generator = s.alpha[2] == 0.0 ? ModelId::tbm1 : ModelId::tbm2;
                for (auto n : exp_sizes) {
                    s.n = n;
                    scenarios.push_back(s);
                }
            }
            out << "scenario,N,p,alpha,expected_x0,rounded\n";
            for (const auto& s : scenarios) {
                const double e = sim::expected_x0(s);
                out << s.id << ',' << s.n << ',' << s.p[0] << ';' << s.p[1] << ';' << s.p[2] << ',' << s.alpha[0]
                    << ';' << s.alpha[1] << ';' << s.alpha[2] << ';' << s.alpha[3] << ',' << std::fixed
                    << std::setprecision(4) << e << ',' << std::llround(e) << '\n'
                    << std::defaultfloat;
            }
            return kOk;
        }
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}

}  // namespace triplemark::cli

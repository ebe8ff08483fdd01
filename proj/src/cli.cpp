#include "qfc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qfc/errors.hpp"
#include "qfc/harness.hpp"
#include "qfc/numfmt.hpp"

namespace qfc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("missing file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct CommonOpts {
    std::string out_dir = ".";
    std::string format = "csv";
    std::uint64_t seed = 1;
};

int tool_train_kb(const CommonOpts& common, const std::string& scenario) {
    harness::TrainConfig cfg;
    cfg.seed = common.seed;
    cfg.scenario = scenario;
    const auto art = harness::train_kb_pipeline(cfg);

    const auto sc = harness::default_scenario(scenario);
    const std::string prov = "# config_hash=" + sc.config_hash() +
                             " seed=" + std::to_string(common.seed) +
                             " version=" + harness::kVersion + "\n";
    write_file(fs::path(common.out_dir) / "teaching_signal.csv", prov + art.ts.to_csv());
    for (int l = 0; l < 3; ++l)
        write_file(fs::path(common.out_dir) / ("kb_link" + std::to_string(l + 1) + ".json"),
                   fuzzy::save_kb(art.kbs.per_link[static_cast<size_t>(l)]));
    write_file(fs::path(common.out_dir) / "kb_single.json", fuzzy::save_kb(art.kbs.pooled));

    std::cout << "teaching signal: " << art.ts.size() << " iterations, J = "
              << format_double(art.ts.cost) << "\n";
    for (int l = 0; l < 3; ++l) {
        const auto& r = art.link_rmse[static_cast<size_t>(l)];
        std::cout << "kb_link" << (l + 1) << " rmse: kp=" << format_double(r[0])
                  << " kd=" << format_double(r[1]) << " ki=" << format_double(r[2]) << "\n";
    }
    const auto& r = art.pooled_rmse;
    std::cout << "kb_single rmse: kp=" << format_double(r[0]) << " kd=" << format_double(r[1])
              << " ki=" << format_double(r[2]) << "\n";
    return 0;
}

harness::ScenarioConfig build_scenario(const std::string& config_path,
                                       const std::string& scenario_name,
                                       const std::string& system_name,
                                       const std::string& kb_dir, std::uint64_t seed,
                                       bool seed_given) {
    harness::ScenarioConfig sc;
    if (!config_path.empty()) {
        sc = harness::scenario_from_json(read_file(config_path));
        if (seed_given) sc.seed = seed;
        return sc;
    } else {
        sc = harness::default_scenario(scenario_name);
        const auto sys = harness::system_from_name(system_name);
        sc.topology = sys.topology;
        sc.correlation = sys.correlation;
        if (sys.topology == harness::Topology::SingleFc) {
            sc.kb_paths = {(fs::path(kb_dir) / "kb_single.json").string()};
        } else {
            sc.kb_paths.clear();
            for (int l = 1; l <= 3; ++l)
                sc.kb_paths.push_back(
                    (fs::path(kb_dir) / ("kb_link" + std::to_string(l) + ".json")).string());
        }
    }
    sc.seed = seed;
    return sc;
}

int tool_run(const CommonOpts& common, const std::string& config_path,
             const std::string& scenario_name, const std::string& system_name,
             const std::string& kb_dir, const std::string& qfi_trace_path,
             bool seed_given) {
    const auto sc = build_scenario(config_path, scenario_name, system_name, kb_dir,
                                   common.seed, seed_given);
    sc.validate();
    std::vector<fuzzy::KnowledgeBase> kbs;
    for (const auto& p : sc.kb_paths) {
        if (!fs::exists(p)) throw ConfigError("missing KB file: " + p);
        kbs.push_back(fuzzy::load_kb(read_file(p)));
    }
    harness::QfiTrace trace;
    const auto rec = harness::run_scenario(
        sc, kbs, qfi_trace_path.empty() ? nullptr : &trace);

    const fs::path base = fs::path(common.out_dir) / ("run_" + sc.name + ".");
    if (common.format == "json")
        write_file(base.string() + "json", rec.to_json());
    else
        write_file(base.string() + "csv", rec.to_csv());
    if (!qfi_trace_path.empty()) write_file(qfi_trace_path, trace.to_csv());

    std::cout << "run " << sc.name << ": " << (rec.complete ? "completed" : "ABORTED")
              << ", final error deg = [" << format_double(rec.metrics.final_error_deg[0])
              << ", " << format_double(rec.metrics.final_error_deg[1]) << ", "
              << format_double(rec.metrics.final_error_deg[2]) << "]\n";
    return rec.complete ? 0 : 2;
}

int tool_compare(const CommonOpts& common, const std::string& scenarios_arg,
                 const std::string& systems_arg, const std::string& kb_dir) {
    const auto lib = harness::load_kb_library(kb_dir);
    std::vector<harness::ScenarioConfig> scenarios;
    for (const auto& name : scenarios_arg.empty() ? harness::default_scenario_names()
                                                  : split_list(scenarios_arg)) {
        auto sc = harness::default_scenario(name);
        sc.seed = common.seed;
        scenarios.push_back(std::move(sc));
    }
    std::vector<harness::SystemSpec> systems;
    for (const auto& name : systems_arg.empty() ? harness::default_system_names()
                                                : split_list(systems_arg))
        systems.push_back(harness::system_from_name(name));

    const auto table = harness::run_comparison(scenarios, systems, lib);
    const fs::path base = fs::path(common.out_dir) / "comparison.";
    if (common.format == "json")
        write_file(base.string() + "json", table.to_json());
    else
        write_file(base.string() + "csv", table.to_csv());
    std::cout << table.to_csv();
    return 0;
}

int tool_qga_select(const CommonOpts& common, const std::string& scenarios_arg,
                    const std::string& kb_dir, int population, int generations) {
    const auto lib = harness::load_kb_library(kb_dir);
    std::vector<harness::ScenarioConfig> scenarios;
    const auto names = scenarios_arg.empty()
                           ? std::vector<std::string>{"standard", "forced-displacement"}
                           : split_list(scenarios_arg);
    for (const auto& name : names) {
        auto sc = harness::default_scenario(name);
        sc.seed = common.seed;
        scenarios.push_back(std::move(sc));
    }

    sco::GaConfig ga;
    ga.population = population;
    ga.generations = generations;
    ga.seed = common.seed;
    const auto cost = [&](const qfi::CorrelationSpec& spec) {
        return harness::suite_cost(spec, scenarios, lib);
    };
    const auto result = qfi::qga_select_correlation(
        {qfi::CorrelationType::Spatial, qfi::CorrelationType::SpatioTemporal,
         qfi::CorrelationType::Temporal},
        cost, ga, 0.5, 2.0, 20);  // same lag as the catalog qfc systems

    json j;
    j["best"] = {{"type", qfi::to_string(result.best.type)},
                 {"lag", result.best.lag},
                 {"scaling",
                  {{"kp", result.best.scaling_kp},
                   {"kd", result.best.scaling_kd},
                   {"ki", result.best.scaling_ki}}}};
    j["table"] = json::array();
    std::ostringstream csv;
    csv << "type,cost,scaling_kp,scaling_kd,scaling_ki,unstable\n";
    for (const auto& e : result.table) {
        j["table"].push_back({{"type", qfi::to_string(e.type)},
                              {"cost", e.best_cost},
                              {"scaling",
                               {{"kp", e.best_spec.scaling_kp},
                                {"kd", e.best_spec.scaling_kd},
                                {"ki", e.best_spec.scaling_ki}}},
                              {"unstable", e.unstable}});
        csv << qfi::to_string(e.type) << ',' << format_double(e.best_cost) << ','
            << format_double(e.best_spec.scaling_kp) << ','
            << format_double(e.best_spec.scaling_kd) << ','
            << format_double(e.best_spec.scaling_ki) << ',' << (e.unstable ? 1 : 0) << "\n";
    }
    std::string suite_blob;
    for (const auto& sc : scenarios) suite_blob += sc.canonical_json();
    const std::string suite_hash = hex64(fnv1a64(suite_blob));
    j["provenance"] = {{"config_hash", suite_hash},
                       {"seed", common.seed},
                       {"version", harness::kVersion}};
    write_file(fs::path(common.out_dir) / "qga_selection.json", j.dump(2) + "\n");
    write_file(fs::path(common.out_dir) / "qga_table.csv",
               "# config_hash=" + suite_hash + " seed=" + std::to_string(common.seed) +
                   " version=" + harness::kVersion + "\n" + csv.str());
    std::cout << "selected correlation: " << qfi::to_string(result.best.type) << "\n"
              << csv.str();
    return 0;
}

int tool_surface(const CommonOpts& common, const std::string& kb_path,
                 const std::string& channel, int resolution, std::string out_path) {
    if (!fs::exists(kb_path)) throw ConfigError("missing KB file: " + kb_path);
    const auto kb = fuzzy::load_kb(read_file(kb_path));
    const auto grid = harness::emit_fuzzy_surface(kb, channel, resolution);
    if (out_path.empty())
        out_path = (fs::path(common.out_dir) / ("surface_" + channel + ".csv")).string();
    write_file(out_path, grid);
    std::cout << "surface written: " << out_path << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Self-organizing fuzzy PID gain scheduling lab for a 3-link manipulator"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--out-dir", common.out_dir, "Output directory")->capture_default_str();
    auto* seed_opt =
        app.add_option("--seed", common.seed, "Master random seed")->capture_default_str();
    app.add_option("--format", common.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();

    auto* train = app.add_subcommand("train-kb",
                                     "Teaching-signal search + knowledge-base fitting");
    std::string train_scenario = "standard";
    train->add_option("--scenario", train_scenario, "Training scenario")
        ->capture_default_str();

    auto* run = app.add_subcommand("run", "Run one scenario with one controller topology");
    std::string run_config, run_scenario = "standard", run_system = "separated";
    std::string kb_dir = ".", qfi_trace_path;
    run->add_option("--config", run_config, "Scenario config JSON (overrides --scenario)");
    run->add_option("--scenario", run_scenario, "Catalog scenario name")
        ->capture_default_str();
    run->add_option("--system", run_system, "Controller system name")->capture_default_str();
    run->add_option("--kb-dir", kb_dir, "Directory with trained KB files")
        ->capture_default_str();
    run->add_option("--qfi-trace", qfi_trace_path, "Write the QFI diagnostics stream here");

    auto* compare = app.add_subcommand("compare", "Scenario x system comparison matrix");
    std::string cmp_scenarios, cmp_systems, cmp_kb_dir = ".";
    compare->add_option("--scenarios", cmp_scenarios,
                        "Comma-separated scenario names (default: full catalog)");
    compare->add_option("--systems", cmp_systems,
                        "Comma-separated system names (default: all five)");
    compare->add_option("--kb-dir", cmp_kb_dir, "Directory with trained KB files")
        ->capture_default_str();

    auto* qga = app.add_subcommand("qga-select",
                                   "Pick the best correlation type + scaling factors");
    std::string qga_scenarios, qga_kb_dir = ".";
    int qga_pop = 128, qga_gens = 6;
    qga->add_option("--scenarios", qga_scenarios, "Scenario suite (default: standard,forced-displacement)");
    qga->add_option("--kb-dir", qga_kb_dir, "Directory with trained KB files")
        ->capture_default_str();
    qga->add_option("--population", qga_pop, "GA population")->capture_default_str();
    qga->add_option("--generations", qga_gens, "GA generations")->capture_default_str();

    auto* surface = app.add_subcommand("surface", "Emit a gain surface grid from a KB");
    std::string surf_kb, surf_channel = "kp", surf_out;
    int surf_res = 50;
    surface->add_option("--kb", surf_kb, "Knowledge base JSON file")->required();
    surface->add_option("--channel", surf_channel, "Gain channel")
        ->check(CLI::IsMember({"kp", "kd", "ki"}))
        ->capture_default_str();
    surface->add_option("--resolution", surf_res, "Grid resolution")->capture_default_str();
    surface->add_option("--out", surf_out, "Output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (train->parsed()) return tool_train_kb(common, train_scenario);
        if (run->parsed())
            return tool_run(common, run_config, run_scenario, run_system, kb_dir,
                            qfi_trace_path, seed_opt->count() > 0);
        if (compare->parsed()) return tool_compare(common, cmp_scenarios, cmp_systems, cmp_kb_dir);
        if (qga->parsed())
            return tool_qga_select(common, qga_scenarios, qga_kb_dir, qga_pop, qga_gens);
        if (surface->parsed())
            return tool_surface(common, surf_kb, surf_channel, surf_res, surf_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace qfc::cli

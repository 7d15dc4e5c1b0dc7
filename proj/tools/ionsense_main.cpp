#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ionsense/errors.hpp"
#include "ionsense/force_pipeline.hpp"
#include "ionsense/image_sim.hpp"
#include "ionsense/ionf_io.hpp"
#include "ionsense/reports.hpp"
#include "ionsense/reproduce.hpp"
#include "ionsense/run_config.hpp"

namespace fs = std::filesystem;
using namespace ionsense;

namespace {

fs::path g_exe_dir;

/// Accepts either a path to a JSON file or a bare profile name, which is
/// looked up in $IONSENSE_CONFIG_DIR and in configs/ next to the binary.
fs::path resolve_config(const std::string& name) {
    std::vector<fs::path> candidates;
    candidates.emplace_back(name);
    if (fs::path(name).extension() != ".json") candidates.emplace_back(name + ".json");
    if (const char* env = std::getenv("IONSENSE_CONFIG_DIR")) {
        candidates.push_back(fs::path(env) / name);
        candidates.push_back(fs::path(env) / (name + ".json"));
    }
    for (const char* up : {"..", "../..", "../../.."}) {
        candidates.push_back(g_exe_dir / up / "configs" / (name + ".json"));
    }
    for (const auto& c : candidates) {
        std::error_code ec;
        if (fs::is_regular_file(c, ec)) return c;
    }
    throw InvalidInput("config \"" + name + "\" not found (pass a file path, set IONSENSE_CONFIG_DIR, "
                       "or use a profile from configs/)");
}

RunConfig load_config(const std::string& name) {
    const fs::path path = resolve_config(name);
    try {
        return load_run_config(path);
    } catch (const IoError& e) {
        throw InvalidInput(e.what()); // unreadable config is a usage error, not a data error
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("short write to " + path.string());
}

void cmd_simulate(const std::string& config_name, const std::string& out_dir, std::uint64_t seed,
                  int threads, bool noiseless) {
    const RunConfig cfg = load_config(config_name);
    const Scene scene = cfg.scene();
    const FrameSeries series =
        simulate_chopped_series(scene, cfg.camera, cfg.drift, cfg.chop, seed, threads, noiseless);
    write_series(out_dir, series, run_config_to_json(cfg));
    std::cout << "wrote " << series.frames.size() << " frames ("
              << (noiseless ? "noiseless" : "sampled") << ", seed " << seed << ", "
              << scene.expected_photons << " expected photons/frame) to " << out_dir << "\n";
}

void cmd_analyze(const std::string& series_dir, const std::string& out_path,
                 const std::string& config_name, int threads) {
    const FrameSeries series = read_series(series_dir);

    RunConfig cfg;
    if (!config_name.empty()) {
        cfg = load_config(config_name);
    } else {
        const std::string embedded = read_series_config(series_dir);
        if (!embedded.empty()) cfg = parse_run_config(embedded);
    }

    AnalysisOptions options;
    options.fit.weighted = cfg.analysis.weighted_fit;
    options.fit.fit_rotation = cfg.analysis.fit_rotation;
    options.threads = threads;
    if (series.base_scene.optics.defocus_offset_nm != 0.0) {
        DefocusCalibration calib;
        calib.waist_w0_nm = series.base_scene.geometry.waist_w0_nm;
        calib.rayleigh_range_nm = series.base_scene.geometry.rayleigh_range_nm;
        calib.operating_offset_nm = series.base_scene.optics.defocus_offset_nm;
        options.defocus = calib;
    }

    const SpringConstants springs = spring_constants(cfg.ion, cfg.trap);
    const AnalysisReport report = analyze_series(series, springs, options);

    std::cout << format_analysis_report(report);
    const fs::path out = out_path.empty() ? fs::path(series_dir) / "analysis.json" : fs::path(out_path);
    write_text(out, analysis_report_to_json(report) + "\n");
    std::cout << "report written to " << out.string() << "\n";
}

void cmd_reproduce(const std::string& case_name, const std::string& config_name,
                   const std::string& out_path) {
    const RunConfig cfg = load_config(config_name);
    const ReproTable table = run_reproduction(case_name, cfg);
    std::cout << format_repro_table(table);
    if (!out_path.empty()) write_text(out_path, repro_table_to_json(table) + "\n");
}

} // namespace

int main(int argc, char** argv) {
    std::error_code ec;
    g_exe_dir = fs::weakly_canonical(fs::path(argv[0]), ec).parent_path();
    if (ec) g_exe_dir = fs::current_path();

    CLI::App app{"single-ion imaging force sensor: simulation, fitting, and analysis"};
    app.require_subcommand(1);

    std::string config_name = "reference_apparatus";
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out;
    bool noiseless = false;

    CLI::App* sim = app.add_subcommand("simulate", "render a force-chopped frame series to disk");
    sim->add_option("--config", config_name, "config file path or profile name")
        ->capture_default_str();
    sim->add_option("--out", out, "output series directory")->required();
    sim->add_option("--seed", seed, "master random seed")->capture_default_str();
    sim->add_option("--threads", threads, "worker threads")->capture_default_str();
    sim->add_flag("--noiseless", noiseless, "store expectations instead of sampled counts");
    sim->callback([&] { cmd_simulate(config_name, out, seed, threads, noiseless); });

    std::string series_dir;
    std::string analyze_config; // empty: use the config embedded in the series
    CLI::App* ana = app.add_subcommand("analyze", "fit a series and reduce it to forces");
    ana->add_option("series", series_dir, "series directory produced by simulate")->required();
    ana->add_option("--out", out, "report path (default: <series>/analysis.json)");
    ana->add_option("--config", analyze_config, "override the config embedded in the series");
    ana->add_option("--threads", threads, "worker threads")->capture_default_str();
    ana->callback([&] { cmd_analyze(series_dir, out, analyze_config, threads); });

    std::string case_name;
    CLI::App* rep = app.add_subcommand("reproduce", "recompute a published result chain");
    rep->add_option("--case", case_name, "case name; an unknown name lists the choices")->required();
    rep->add_option("--config", config_name, "config file path or profile name")
        ->capture_default_str();
    rep->add_option("--out", out, "also write the table as JSON to this path");
    rep->callback([&] { cmd_reproduce(case_name, config_name, out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

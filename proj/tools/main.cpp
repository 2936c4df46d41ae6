// borrowsim command-line front end.
#include "borrowsim/plotdata.hpp"
#include "borrowsim/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace borrowsim;

namespace {

void print_preset(const CaseStudyPreset& p) {
    const auto& s = p.source;
    std::printf("name:        %s\n", p.name.c_str());
    std::printf("description: %s\n", p.description.c_str());
    std::printf("endpoint:    %s (%s)\n", std::string(to_string(p.endpoint)).c_str(), std::string(to_string(s.scale)).c_str());
    std::printf("source:      estimate %.6g, SE %.6g, arms %d/%d\n", s.estimate, s.std_err, s.n_control, s.n_treatment);
    const auto aux = [](const char* name, const std::optional<double>& v) {
        if (v) std::printf("  %-20s %.6g\n", name, *v);
    };
    aux("patient_sd", s.aux.patient_sd);
    aux("control_rate", s.aux.control_rate);
    aux("treatment_rate", s.aux.treatment_rate);
    aux("control_event_rate", s.aux.control_event_rate);
    aux("treatment_event_rate", s.aux.treatment_event_rate);
    aux("dispersion", s.aux.dispersion);
    aux("followup_dt", p.followup_dt);
    if (p.source_counts)
        std::printf("  counts               %d/%d control, %d/%d treatment\n", p.source_counts->y_control,
                    p.source_counts->n_control, p.source_counts->y_treatment, p.source_counts->n_treatment);
    std::printf("decision:    theta0 %.6g, %s is effective, rho %.6g\n", p.decision.theta0,
                std::string(to_string(p.decision.direction)).c_str(), p.decision.rho);
    std::printf("drift keywords: consistent 0, partially_consistent %.6g, null %.6g\n",
                resolve_drift(DriftKeyword::PartiallyConsistent, p), resolve_drift(DriftKeyword::Null, p));
    std::printf("sample sizes per arm (drift range at Hellinger 0.9):\n");
    for (int n : p.sample_sizes) {
        const double se = expected_target_se(p, {}, n);
        const std::optional<double> pt =
            p.source_counts ? std::optional<double>(static_cast<double>(p.source_counts->y_treatment) / p.source_counts->n_treatment)
                            : std::nullopt;
        const auto r = drift_range(s, se, p.decision, pt);
        std::printf("  %5d  target SE %.5g  drift [%.5g, %.5g]\n", n, se, r.lo, r.hi);
    }
    for (const auto& note : p.notes) std::printf("note: %s\n", note.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Operating characteristics of Bayesian borrowing methods by simulation"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    std::string config_path, out_dir, results_path, view_name, metric, plot_out, preset_file, preset_name;
    unsigned jobs = 0;
    bool resume = false, quiet = false;

    auto* run = app.add_subcommand("run", "Run every scenario of a study config");
    run->add_option("config", config_path, "Study config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--jobs,-j", jobs, "Worker count (default: $BORROWSIM_JOBS or all cores)")->check(CLI::Range(1, 1024));
    run->add_option("--out,-o", out_dir, "Output directory (overrides the config)");
    run->add_flag("--resume", resume, "Keep cells completed by an earlier run of the same config");
    run->add_flag("--quiet,-q", quiet, "No progress output");

    auto* plot = app.add_subcommand("plot", "Emit a plot-ready table from results.csv");
    plot->add_option("results", results_path, "results.csv of a run")->required()->check(CLI::ExistingFile);
    plot->add_option("--view", view_name, "forest_by_success|metric_vs_tie|metric_vs_drift|metric_vs_ess")->required();
    plot->add_option("--metric", metric, "success_prob|mse|bias|precision|coverage|ess_moment|ess_precision|ess_elir");
    plot->add_option("--out,-o", plot_out, "Output file (default: stdout)");

    auto* presets = app.add_subcommand("presets", "Inspect the built-in case-study presets");
    presets->add_option("--file", preset_file, "Preset file (default: the shipped presets.json)");
    presets->require_subcommand(1);
    auto* plist = presets->add_subcommand("list", "List preset names");
    auto* pshow = presets->add_subcommand("show", "Show one preset with derived quantities");
    pshow->add_option("name", preset_name, "Preset name")->required();

    auto* val = app.add_subcommand("validate", "Parse a study config and expand its grid");
    val->add_option("config", config_path, "Study config (JSON)")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run) {
            const auto cfg = load_study_config(config_path);
            RunOptions ro;
            ro.jobs = jobs;
            ro.resume = resume;
            if (!out_dir.empty()) ro.output_dir = out_dir;
            if (!quiet) ro.log = [](const std::string& s) { std::cerr << s << '\n'; };
            const auto m = run_study(cfg, ro);
            std::size_t failed = 0, unreliable = 0;
            for (const auto& c : m.cells) {
                failed += c.status == CellStatus::Failed;
                unreliable += c.status == CellStatus::Unreliable;
            }
            std::printf("%zu cells: %zu computed, %zu reused, %zu failed, %zu unreliable (%.1f s)\n", m.grid_size,
                        m.computed, m.skipped, failed, unreliable, m.wall_clock_seconds);
            return exit_code(m);
        }
        if (*plot) {
            const PlotView view = plot_view_from_string(view_name);
            std::ifstream in(results_path, std::ios::binary);
            const auto table = read_csv(in);
            const auto text = emit_plotdata(table, view, metric);
            if (plot_out.empty()) {
                std::fwrite(text.data(), 1, text.size(), stdout);
            } else {
                std::ofstream out(plot_out, std::ios::binary);
                out << text;
                if (!out) throw std::runtime_error("cannot write " + plot_out);
            }
            return 0;
        }
        if (*presets) {
            const auto all = load_presets(preset_file.empty() ? default_presets_path() : std::filesystem::path(preset_file));
            if (*plist) {
                for (const auto& p : all) std::printf("%-15s %s\n", p.name.c_str(), p.description.c_str());
            } else {
                print_preset(find_preset(all, preset_name));
            }
            return 0;
        }
        if (*val) {
            const auto cfg = load_study_config(config_path);
            const auto cells = expand_grid(cfg);
            std::printf("ok: preset %s, %zu methods, %zu cells, config hash %s\n", cfg.preset.name.c_str(),
                        cfg.methods.size(), cells.size(), fnv1a_hex(cfg.canonical).c_str());
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

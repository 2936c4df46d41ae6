#include "borrowsim/runner.hpp"

#include "borrowsim/plotdata.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace borrowsim {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view version() { return BORROWSIM_VERSION; }

std::string_view to_string(CellStatus s) {
    switch (s) {
        case CellStatus::Ok: return "ok";
        case CellStatus::Unreliable: return "unreliable";
        case CellStatus::Failed: return "failed";
    }
    return "unknown";
}

bool RunManifest::any_failed() const {
    for (const auto& c : cells)
        if (c.status == CellStatus::Failed) return true;
    return false;
}

int exit_code(const RunManifest& m) { return m.any_failed() ? 2 : 0; }

unsigned default_jobs() {
    if (const char* env = std::getenv("BORROWSIM_JOBS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

constexpr const char* kMetricCols[] = {"success_prob", "mse", "bias", "precision", "coverage",
                                       "ess_moment", "ess_precision", "ess_elir"};

void put(std::string& out, const std::string& field) {
    if (!out.empty()) out += ',';
    out += field;
}

void put_estimate(std::string& out, const std::optional<Estimate>& e) {
    put(out, e ? num(e->value) : "");
    put(out, e ? num(e->lo) : "");
    put(out, e ? num(e->hi) : "");
}

fs::path row_path(const fs::path& dir, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.csv", index);
    return dir / "rows" / buf;
}

void write_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

struct RowFile {
    CellStatus status;
    std::string row;
};

std::optional<RowFile> read_row(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string status, row;
    if (!std::getline(in, status) || !std::getline(in, row) || row.empty()) return std::nullopt;
    if (status == "ok") return RowFile{CellStatus::Ok, row};
    if (status == "unreliable") return RowFile{CellStatus::Unreliable, row};
    return std::nullopt;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_manifest(const fs::path& dir, const RunManifest& m, bool complete) {
    ojson j;
    j["config_hash"] = m.config_hash;
    j["code_version"] = m.code_version;
    j["complete"] = complete;
    j["grid_size"] = m.grid_size;
    j["computed"] = m.computed;
    j["skipped"] = m.skipped;
    j["wall_clock_seconds"] = m.wall_clock_seconds;
    long resamples = 0, failed_reps = 0;
    ojson cells = ojson::array();
    for (const auto& c : m.cells) {
        resamples += c.resamples;
        failed_reps += c.failed_replicates;
        ojson e;
        e["index"] = c.index;
        e["scenario"] = c.scenario_id;
        e["method"] = c.method;
        e["status"] = std::string(to_string(c.status));
        e["recomputed"] = c.recomputed;
        e["seconds"] = c.seconds;
        e["resamples"] = c.resamples;
        e["failed_replicates"] = c.failed_replicates;
        if (!c.message.empty()) e["message"] = c.message;
        cells.push_back(std::move(e));
    }
    j["counters"] = {{"resamples", resamples}, {"failed_replicates", failed_reps}};
    j["cells"] = std::move(cells);
    write_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace

std::string results_header() {
    std::string h = "case_study,scenario_id,n_per_arm,drift_label,drift,std_ratio,denominator_factor,theta0,theta_true,"
                    "method,method_key,params_label,estimator,n_reps,n_estimation,n_failed,unreliable";
    for (const char* m : kMetricCols) {
        h += ',';
        h += m;
        h += ',';
        h += m;
        h += "_lo,";
        h += m;
        h += "_hi";
    }
    h += ",cri_above,cri_below,resamples,mc_seed";
    return h;
}

std::string format_results_row(const StudyCell& cell, const OCRecord& rec) {
    const auto& sc = cell.scenario;
    std::string r;
    put(r, csv_field(sc.preset.name));
    put(r, csv_field(sc.id));
    put(r, std::to_string(sc.n_per_arm));
    put(r, csv_field(cell.drift_label));
    put(r, num(sc.knobs.drift));
    put(r, num(sc.knobs.std_ratio));
    put(r, num(sc.knobs.denominator_factor));
    put(r, num(sc.preset.decision.theta0));
    put(r, num(rec.theta_true));
    put(r, csv_field(method_name(cell.method)));
    put(r, csv_field(method_key(cell.method)));
    put(r, csv_field(params_label(cell.method)));
    put(r, std::string(to_string(rec.estimator)));
    put(r, std::to_string(rec.n_reps));
    put(r, std::to_string(rec.n_estimation));
    put(r, std::to_string(rec.n_failed));
    put(r, rec.unreliable ? "1" : "0");
    put_estimate(r, rec.success_prob);
    put_estimate(r, rec.mse);
    put_estimate(r, rec.bias);
    put_estimate(r, rec.precision);
    put_estimate(r, rec.coverage);
    put_estimate(r, rec.prior_ess ? std::optional(rec.prior_ess->moment) : std::nullopt);
    put_estimate(r, rec.prior_ess ? std::optional(rec.prior_ess->precision) : std::nullopt);
    put_estimate(r, rec.prior_ess ? std::optional(rec.prior_ess->elir) : std::nullopt);
    put(r, std::to_string(rec.cri_above));
    put(r, std::to_string(rec.cri_below));
    put(r, std::to_string(rec.resamples));
    put(r, std::to_string(rec.mc_seed));
    return r;
}

RunManifest run_study(const StudyConfig& config, const RunOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cells = expand_grid(config);
    const fs::path dir = opts.output_dir.value_or(config.output_dir);
    const auto log = [&](const std::string& s) {
        if (opts.log) opts.log(s);
    };

    RunManifest m;
    m.config_hash = fnv1a_hex(config.canonical);
    m.code_version = std::string(version());
    m.grid_size = cells.size();
    m.cells.resize(cells.size());

    fs::create_directories(dir);
    if (opts.resume && fs::exists(dir / "manifest.json")) {
        ojson prev;
        try {
            prev = ojson::parse(read_text(dir / "manifest.json"));
        } catch (const std::exception&) {
            throw ConfigError(dir.string() + "/manifest.json: unreadable manifest; rerun without --resume");
        }
        if (prev.value("config_hash", "") != m.config_hash || prev.value("code_version", "") != m.code_version)
            throw ConfigError(dir.string() + ": output belongs to a different config or code version; rerun without --resume");
    } else if (fs::exists(dir / "rows")) {
        fs::remove_all(dir / "rows");
    }
    fs::create_directories(dir / "rows");
    write_manifest(dir, m, false);

    std::vector<std::size_t> todo;
    for (const auto& c : cells) {
        auto& rep = m.cells[c.index];
        rep.index = c.index;
        rep.scenario_id = c.scenario.id;
        rep.method = method_key(c.method);
        if (opts.resume) {
            if (const auto row = read_row(row_path(dir, c.index))) {
                rep.status = row->status;
                ++m.skipped;
                continue;
            }
        }
        todo.push_back(c.index);
    }
    log("grid " + std::to_string(cells.size()) + " cells, " + std::to_string(m.skipped) + " already complete");

    OCOptions oc;
    oc.estimator = config.estimator;
    oc.compute_ess = config.compute_ess;
    oc.n_estimation = config.n_reps.estimation;
    oc.threads = 1;

    std::atomic<std::size_t> next{0};
    std::mutex log_mu;
    std::size_t done = 0;
    auto worker = [&] {
        for (std::size_t k = next++; k < todo.size(); k = next++) {
            const auto& cell = cells[todo[k]];
            auto& rep = m.cells[cell.index];
            rep.recomputed = true;
            const auto c0 = std::chrono::steady_clock::now();
            try {
                const OCRecord rec = estimate_oc(cell.scenario, cell.method, config.n_reps.success, oc);
                rep.status = rec.unreliable ? CellStatus::Unreliable : CellStatus::Ok;
                rep.resamples = rec.resamples;
                rep.failed_replicates = rec.n_failed;
                write_atomic(row_path(dir, cell.index),
                             std::string(to_string(rep.status)) + "\n" + format_results_row(cell, rec) + "\n");
            } catch (const std::exception& e) {
                rep.status = CellStatus::Failed;
                rep.message = e.what();
            }
            rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
            std::lock_guard lock(log_mu);
            ++done;
            char buf[64];
            std::snprintf(buf, sizeof buf, "[%zu/%zu] ", done, todo.size());
            log(buf + rep.scenario_id + " " + rep.method + " " + std::string(to_string(rep.status)) +
                (rep.message.empty() ? "" : ": " + rep.message));
        }
    };
    const unsigned jobs = std::max<unsigned>(1, std::min<std::size_t>(opts.jobs ? opts.jobs : default_jobs(), std::max<std::size_t>(todo.size(), 1)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    m.computed = todo.size();

    // Assemble the table in grid order.
    std::string table = results_header() + "\n";
    for (const auto& c : cells) {
        if (const auto row = read_row(row_path(dir, c.index))) table += row->row + "\n";
    }
    write_atomic(dir / "results.csv", table);
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(dir, m, true);
    return m;
}

}  // namespace borrowsim

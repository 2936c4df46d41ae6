#pragma once

#include "borrowsim/study.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace borrowsim {

std::string_view version();

struct RunOptions {
    unsigned jobs = 0;  // 0: $BORROWSIM_JOBS, else the hardware concurrency
    std::optional<std::filesystem::path> output_dir;
    /// Keep cells already completed by an earlier run of the same config.
    bool resume = false;
    std::function<void(const std::string&)> log;
};

enum class CellStatus { Ok, Unreliable, Failed };
std::string_view to_string(CellStatus s);

struct CellReport {
    std::size_t index = 0;
    std::string scenario_id;
    std::string method;
    CellStatus status = CellStatus::Failed;
    bool recomputed = false;
    double seconds = 0.0;
    long resamples = 0;
    int failed_replicates = 0;
    std::string message;
};

struct RunManifest {
    std::string config_hash;
    std::string code_version;
    std::size_t grid_size = 0;
    double wall_clock_seconds = 0.0;
    std::size_t computed = 0;
    std::size_t skipped = 0;
    std::vector<CellReport> cells;

    bool any_failed() const;
};

/// Worker count from $BORROWSIM_JOBS, falling back to the hardware concurrency.
unsigned default_jobs();

/// Runs every cell of the expanded grid and writes results.csv (rows in
/// grid order) and manifest.json to the output directory.
RunManifest run_study(const StudyConfig& config, const RunOptions& opts = {});

/// 0 when every cell produced a row, 2 otherwise.
int exit_code(const RunManifest& m);

std::string results_header();
std::string format_results_row(const StudyCell& cell, const OCRecord& rec);

}  // namespace borrowsim

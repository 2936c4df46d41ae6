#pragma once

#include "borrowsim/oc.hpp"
#include "borrowsim/presets.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace borrowsim {

/// Named drift, resolved against the preset: consistent is 0,
/// partially_consistent is -theta_S_hat / 2, null puts theta_T at theta0.
enum class DriftKeyword { Consistent, PartiallyConsistent, Null };

struct DriftValue {
    double value;
};
/// `count` evenly spaced drifts over drift_range at each sample size.
struct DriftAuto {
    int count;
};
using DriftSpec = std::variant<DriftKeyword, DriftValue, DriftAuto>;

struct RepCounts {
    int success = 10000;    // success probability and coverage
    int estimation = 2000;  // bias, MSE, precision, ESS
};

struct StudyConfig {
    CaseStudyPreset preset;
    std::vector<int> sample_sizes;
    std::vector<DriftSpec> drifts;
    std::vector<double> std_ratios{1.0};
    std::vector<double> denominator_factors{1.0};
    std::vector<MethodSpec> methods;  // parameter grids already expanded
    RepCounts n_reps{};
    PointEstimator estimator = PointEstimator::PosteriorMean;
    bool compute_ess = true;
    std::uint64_t seed = 20240101;
    std::filesystem::path output_dir = "out";
    /// Canonical text of the parsed config; feeds the config hash.
    std::string canonical;
};

/// Parses a study config. Unknown keys and bad values throw ConfigError
/// naming the key path. Relative paths resolve against `base_dir`.
StudyConfig parse_study_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
StudyConfig load_study_config(const std::filesystem::path& path);

/// One row of the expanded grid: a data-generating scenario and a method.
struct StudyCell {
    std::size_t index = 0;
    Scenario scenario;
    std::string drift_label;
    MethodSpec method;
};

/// Sample sizes x drifts x std ratios x denominator factors x methods, in
/// declaration order. Cells that differ only in the method share a seed and
/// therefore the replicate data.
std::vector<StudyCell> expand_grid(const StudyConfig& config);

std::string_view to_string(DriftKeyword k);
double resolve_drift(DriftKeyword k, const CaseStudyPreset& preset);

/// Stable machine key of a method and its parameters, e.g. "cpp(gamma=0.25)".
std::string method_key(const MethodSpec& spec);

/// 64-bit FNV-1a hash as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace borrowsim

#pragma once

#include "borrowsim/datagen.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace borrowsim {

/// Malformed configuration or preset data; the message names the key path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parses one preset object. Published summaries may be given as
/// {estimate, std_err}, {estimate, ci95}, {ratio, ci95} (log scale),
/// {pool: [...]} (inverse-variance pooling) or {counts: {...}}.
/// Unknown keys are rejected.
CaseStudyPreset parse_preset(const std::string& json_text);

/// Loads every preset of a preset file.
std::vector<CaseStudyPreset> load_presets(const std::filesystem::path& path);

/// Preset file used when none is given: $BORROWSIM_PRESETS, else the file
/// shipped with the build or install tree.
std::filesystem::path default_presets_path();

/// Looks a preset up by name (case-insensitive) in the default file.
CaseStudyPreset find_preset(const std::string& name);
CaseStudyPreset find_preset(const std::vector<CaseStudyPreset>& presets, const std::string& name);

/// Inverse-variance pooled estimate and SE.
struct Pooled {
    double estimate;
    double std_err;
};
Pooled inverse_variance_pool(const std::vector<Pooled>& studies);

/// SE implied by a two-sided 95% normal CI on the analysis scale.
double se_from_ci95(double lo, double hi);

}  // namespace borrowsim

#include "borrowsim/presets.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef BORROWSIM_SOURCE_DATA_DIR
#define BORROWSIM_SOURCE_DATA_DIR "data"
#endif
#ifndef BORROWSIM_INSTALL_DATA_DIR
#define BORROWSIM_INSTALL_DATA_DIR ""
#endif

namespace borrowsim {

double se_from_ci95(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("se_from_ci95: empty interval");
    return (hi - lo) / (2.0 * 1.96);
}

Pooled inverse_variance_pool(const std::vector<Pooled>& studies) {
    if (studies.empty()) throw std::invalid_argument("inverse_variance_pool: no studies");
    double w_sum = 0.0, wx = 0.0;
    for (const auto& s : studies) {
        if (!(s.std_err > 0.0)) throw std::invalid_argument("inverse_variance_pool: SE must be positive");
        const double w = 1.0 / (s.std_err * s.std_err);
        w_sum += w;
        wx += w * s.estimate;
    }
    return {wx / w_sum, 1.0 / std::sqrt(w_sum)};
}

namespace detail {

namespace {

struct ParsedSource {
    double estimate = 0.0;
    std::optional<double> std_err;
    std::optional<BinomialArmData> counts;
};

ParsedSource parse_source(const json& j, const std::string& path, bool log_scale) {
    if (!j.is_object()) fail(path, "expected an object");
    ParsedSource out;
    if (j.contains("pool")) {
        reject_unknown(j, path, {"pool"});
        const auto& arr = j.at("pool");
        if (!arr.is_array() || arr.empty()) fail(path + ".pool", "expected a non-empty array");
        std::vector<Pooled> studies;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto p = parse_source(arr[i], path + ".pool[" + std::to_string(i) + "]", log_scale);
            if (!p.std_err) fail(path + ".pool[" + std::to_string(i) + "]", "pooled studies need an SE or a CI");
            studies.push_back({p.estimate, *p.std_err});
        }
        const auto pooled = inverse_variance_pool(studies);
        out.estimate = pooled.estimate;
        out.std_err = pooled.std_err;
        return out;
    }
    if (j.contains("counts")) {
        reject_unknown(j, path, {"counts"});
        const auto& c = j.at("counts");
        const std::string cp = path + ".counts";
        reject_unknown(c, cp, {"y_control", "n_control", "y_treatment", "n_treatment"});
        BinomialArmData d{as_int(need(c, cp, "y_control"), cp + ".y_control"),
                          as_int(need(c, cp, "n_control"), cp + ".n_control"),
                          as_int(need(c, cp, "y_treatment"), cp + ".y_treatment"),
                          as_int(need(c, cp, "n_treatment"), cp + ".n_treatment")};
        try {
            d.validate();
        } catch (const std::exception& e) {
            fail(cp, e.what());
        }
        const auto s = rate_difference_summary(d);
        out.estimate = s.estimate;
        out.std_err = s.std_err;
        out.counts = d;
        return out;
    }
    reject_unknown(j, path, {"estimate", "ratio", "std_err", "ci95"});
    if (j.contains("ratio") == j.contains("estimate")) fail(path, "give exactly one of 'estimate' or 'ratio'");
    if (j.contains("ratio")) {
        if (!log_scale) fail(path + ".ratio", "a ratio is only meaningful on a log scale");
        const double r = as_number(j.at("ratio"), path + ".ratio");
        if (!(r > 0.0)) fail(path + ".ratio", "must be positive");
        out.estimate = std::log(r);
    } else {
        out.estimate = as_number(j.at("estimate"), path + ".estimate");
    }
    if (j.contains("std_err") && j.contains("ci95")) fail(path, "give at most one of 'std_err' or 'ci95'");
    if (j.contains("std_err")) out.std_err = as_number(j.at("std_err"), path + ".std_err");
    if (j.contains("ci95")) {
        const auto& ci = j.at("ci95");
        if (!ci.is_array() || ci.size() != 2) fail(path + ".ci95", "expected [lo, hi]");
        double lo = as_number(ci[0], path + ".ci95[0]");
        double hi = as_number(ci[1], path + ".ci95[1]");
        if (j.contains("ratio")) {
            if (!(lo > 0.0)) fail(path + ".ci95", "ratio bounds must be positive");
            lo = std::log(lo);
            hi = std::log(hi);
        }
        if (!(hi > lo)) fail(path + ".ci95", "expected lo < hi");
        out.std_err = se_from_ci95(lo, hi);
    }
    return out;
}

}  // namespace

CaseStudyPreset preset_from_json(const json& j, const std::string& path) {
    reject_unknown(j, path,
                   {"name", "description", "endpoint", "direction", "theta0", "rho", "n_control", "n_treatment",
                    "source", "aux", "followup_dt", "sample_sizes", "notes"});
    CaseStudyPreset p;
    p.name = as_string(need(j, path, "name"), path + ".name");
    if (j.contains("description")) p.description = as_string(j.at("description"), path + ".description");
    try {
        p.endpoint = endpoint_from_string(as_string(need(j, path, "endpoint"), path + ".endpoint"));
    } catch (const std::invalid_argument& e) {
        fail(path + ".endpoint", e.what());
    }
    const EffectScale scale = endpoint_scale(p.endpoint);
    if (j.contains("direction")) {
        try {
            p.decision.direction = direction_from_string(as_string(j.at("direction"), path + ".direction"));
        } catch (const std::invalid_argument& e) {
            fail(path + ".direction", e.what());
        }
    }
    if (j.contains("theta0")) p.decision.theta0 = as_number(j.at("theta0"), path + ".theta0");
    if (j.contains("rho")) p.decision.rho = as_number(j.at("rho"), path + ".rho");

    const auto src = parse_source(need(j, path, "source"), path + ".source", is_ratio_scale(scale));
    p.source.scale = scale;
    p.source.estimate = src.estimate;
    if (src.counts) {
        if (p.endpoint != Endpoint::BinaryRateDiff) fail(path + ".source.counts", "counts need the binary_rate_diff endpoint");
        p.source_counts = src.counts;
        p.source.n_control = src.counts->n_control;
        p.source.n_treatment = src.counts->n_treatment;
        p.source.aux.control_rate = static_cast<double>(src.counts->y_control) / src.counts->n_control;
        p.source.aux.treatment_rate = static_cast<double>(src.counts->y_treatment) / src.counts->n_treatment;
    } else {
        p.source.n_control = as_int(need(j, path, "n_control"), path + ".n_control");
        p.source.n_treatment = as_int(need(j, path, "n_treatment"), path + ".n_treatment");
    }

    bool derive_sd = false;
    if (j.contains("aux")) {
        const auto& a = j.at("aux");
        const std::string ap = path + ".aux";
        reject_unknown(a, ap, {"patient_sd", "control_rate", "control_event_rate", "dispersion"});
        if (a.contains("patient_sd")) {
            if (a.at("patient_sd").is_string()) {
                if (a.at("patient_sd").get<std::string>() != "derive") fail(ap + ".patient_sd", "expected a number or \"derive\"");
                derive_sd = true;
            } else {
                p.source.aux.patient_sd = as_number(a.at("patient_sd"), ap + ".patient_sd");
            }
        }
        if (a.contains("control_rate")) p.source.aux.control_rate = as_number(a.at("control_rate"), ap + ".control_rate");
        if (a.contains("control_event_rate"))
            p.source.aux.control_event_rate = as_number(a.at("control_event_rate"), ap + ".control_event_rate");
        if (a.contains("dispersion")) p.source.aux.dispersion = as_number(a.at("dispersion"), ap + ".dispersion");
    }
    const double arm_factor = std::sqrt(1.0 / p.source.n_control + 1.0 / p.source.n_treatment);
    if (src.std_err) {
        p.source.std_err = *src.std_err;
        if (derive_sd) p.source.aux.patient_sd = *src.std_err / arm_factor;
    } else if (p.endpoint == Endpoint::Continuous && p.source.aux.patient_sd) {
        p.source.std_err = *p.source.aux.patient_sd * arm_factor;
    } else {
        fail(path + ".source", "no standard error: give std_err or ci95");
    }
    if (derive_sd && !src.std_err) fail(path + ".aux.patient_sd", "cannot derive without a source SE");
    if (p.source.aux.control_rate && p.endpoint == Endpoint::BinaryLogOR) {
        const double pc = *p.source.aux.control_rate;
        const double o = pc / (1.0 - pc) * std::exp(p.source.estimate);
        p.source.aux.treatment_rate = o / (1.0 + o);
    }
    if (p.source.aux.control_event_rate && is_ratio_scale(scale))
        p.source.aux.treatment_event_rate = *p.source.aux.control_event_rate * std::exp(p.source.estimate);

    if (j.contains("followup_dt")) p.followup_dt = as_number(j.at("followup_dt"), path + ".followup_dt");
    const auto& ss = need(j, path, "sample_sizes");
    if (!ss.is_array()) fail(path + ".sample_sizes", "expected an array");
    for (std::size_t i = 0; i < ss.size(); ++i)
        p.sample_sizes.push_back(as_int(ss[i], path + ".sample_sizes[" + std::to_string(i) + "]"));
    if (j.contains("notes")) {
        const auto& n = j.at("notes");
        if (!n.is_array()) fail(path + ".notes", "expected an array of strings");
        for (std::size_t i = 0; i < n.size(); ++i) p.notes.push_back(as_string(n[i], path + ".notes[" + std::to_string(i) + "]"));
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return p;
}

}  // namespace detail

CaseStudyPreset parse_preset(const std::string& json_text) {
    detail::json j;
    try {
        j = detail::json::parse(json_text);
    } catch (const detail::json::parse_error& e) {
        throw ConfigError(std::string("preset: ") + e.what());
    }
    return detail::preset_from_json(j, "preset");
}

std::vector<CaseStudyPreset> load_presets(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open preset file " + path.string());
    detail::json j;
    try {
        j = detail::json::parse(in);
    } catch (const detail::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    detail::reject_unknown(j, "$", {"schema_version", "presets"});
    const int version = detail::as_int(detail::need(j, "$", "schema_version"), "$.schema_version");
    if (version != 1) detail::fail("$.schema_version", "unsupported version " + std::to_string(version));
    const auto& arr = detail::need(j, "$", "presets");
    if (!arr.is_array()) detail::fail("$.presets", "expected an array");
    std::vector<CaseStudyPreset> out;
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(detail::preset_from_json(arr[i], "$.presets[" + std::to_string(i) + "]"));
    return out;
}

std::filesystem::path default_presets_path() {
    if (const char* env = std::getenv("BORROWSIM_PRESETS"); env && *env) return env;
    const std::filesystem::path installed = std::filesystem::path(BORROWSIM_INSTALL_DATA_DIR) / "presets.json";
    if (!std::string(BORROWSIM_INSTALL_DATA_DIR).empty() && std::filesystem::exists(installed)) return installed;
    return std::filesystem::path(BORROWSIM_SOURCE_DATA_DIR) / "presets.json";
}

namespace {
std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}
}  // namespace

CaseStudyPreset find_preset(const std::vector<CaseStudyPreset>& presets, const std::string& name) {
    for (const auto& p : presets)
        if (lower(p.name) == lower(name)) return p;
    throw ConfigError("unknown preset '" + name + "'");
}

CaseStudyPreset find_preset(const std::string& name) { return find_preset(load_presets(default_presets_path()), name); }

}  // namespace borrowsim

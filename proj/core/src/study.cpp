#include "borrowsim/study.hpp"

#include "json_util.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace borrowsim {

namespace {

using ojson = nlohmann::ordered_json;
using detail::fail;

// Shortest text that reads back to the same double.
std::string shortest(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void reject_unknown(const ojson& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) fail(path + "." + key, "unknown key");
    }
}

double number(const ojson& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

// A scalar or a non-empty array of scalars.
std::vector<ojson> values_of(const ojson& v, const std::string& path) {
    if (!v.is_array()) return {v};
    if (v.empty()) fail(path, "empty list");
    return {v.begin(), v.end()};
}

template <class F>
std::vector<double> number_list(const ojson& v, const std::string& path, F check) {
    std::vector<double> out;
    const auto vals = values_of(v, path);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const std::string p = v.is_array() ? path + "[" + std::to_string(i) + "]" : path;
        const double x = number(vals[i], p);
        check(x, p);
        out.push_back(x);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Methods

using ParamSet = std::vector<std::pair<std::string, ojson>>;

MethodSpec build_method(const std::string& name, const ParamSet& params, const std::string& path) {
    const auto get = [&](const char* key, double def) {
        for (const auto& [k, v] : params)
            if (k == key) return number(v, path + "." + key);
        return def;
    };
    MethodSpec spec;
    if (name == "separate") spec = Separate{};
    else if (name == "pooling") spec = Pooling{};
    else if (name == "cpp") spec = ConditionalPP{get("gamma", 0.5)};
    else if (name == "npp") spec = NormalizedPP{get("xi_gamma", 0.5), get("sd_gamma", 0.1)};
    else if (name == "ebpp") spec = EmpiricalBayesPP{};
    else if (name == "pvalue_pp") spec = PValuePP{get("k", 1.0), get("lambda", 0.0)};
    else if (name == "ttp_diff") spec = TestThenPoolDiff{get("eta", 0.05)};
    else if (name == "ttp_equiv") spec = TestThenPoolEquiv{get("eta", 0.05), get("lambda", 0.1)};
    else if (name == "rmp") spec = RobustMixture{get("w", 0.5), get("vague_center", 0.0)};
    else if (name == "commensurate") {
        CommensuratePP c;
        for (const auto& [k, v] : params) {
            if (k == "tau") {
                if (v.is_string()) {
                    if (v.get<std::string>() != "cauchy") fail(path + ".tau", "expected a number or \"cauchy\"");
                    c.tau_prior = LogTauCauchy{};
                } else {
                    c.tau_prior = FixedTau{number(v, path + ".tau")};
                }
            }
        }
        for (const auto& [k, v] : params) {
            if (k == "cauchy_scale") {
                if (!std::holds_alternative<LogTauCauchy>(c.tau_prior)) fail(path + ".cauchy_scale", "only valid with tau = \"cauchy\"");
                std::get<LogTauCauchy>(c.tau_prior).scale = number(v, path + ".cauchy_scale");
            }
        }
        spec = c;
    } else {
        fail(path + ".method", "unknown method '" + name + "'");
    }
    try {
        validate(spec);
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    return spec;
}

std::vector<std::string_view> allowed_params(const std::string& name) {
    if (name == "cpp") return {"gamma"};
    if (name == "npp") return {"xi_gamma", "sd_gamma"};
    if (name == "pvalue_pp") return {"k", "lambda"};
    if (name == "ttp_diff") return {"eta"};
    if (name == "ttp_equiv") return {"eta", "lambda"};
    if (name == "rmp") return {"w", "vague_center"};
    if (name == "commensurate") return {"tau", "cauchy_scale"};
    return {};
}

void expand_method(const ojson& entry, const std::string& path, std::vector<MethodSpec>& out) {
    if (entry.is_string()) {
        out.push_back(build_method(entry.get<std::string>(), {}, path));
        return;
    }
    if (!entry.is_object()) fail(path, "expected a method name or object");
    const auto it = entry.find("method");
    if (it == entry.end() || !it->is_string()) fail(path + ".method", "missing method name");
    const std::string name = it->get<std::string>();
    const auto allowed = allowed_params(name);
    std::vector<std::pair<std::string, std::vector<ojson>>> axes;
    for (const auto& [key, v] : entry.items()) {
        if (key == "method") continue;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(path + "." + key, "unknown key for method '" + name + "'");
        axes.emplace_back(key, values_of(v, path + "." + key));
    }
    // Cartesian product, last parameter varying fastest.
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
        ParamSet ps;
        for (std::size_t a = 0; a < axes.size(); ++a) ps.emplace_back(axes[a].first, axes[a].second[idx[a]]);
        out.push_back(build_method(name, ps, path));
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < axes[a].second.size()) break;
            idx[a] = 0;
            if (a == 0) return;
        }
        if (axes.empty()) return;
    }
}

std::string preset_fingerprint(const CaseStudyPreset& p) {
    std::ostringstream o;
    const auto opt = [](const std::optional<double>& v) { return v ? shortest(*v) : std::string("-"); };
    o << p.name << '|' << to_string(p.endpoint) << '|' << shortest(p.source.estimate) << '|' << shortest(p.source.std_err)
      << '|' << p.source.n_control << '|' << p.source.n_treatment << '|' << opt(p.source.aux.patient_sd) << '|'
      << opt(p.source.aux.control_rate) << '|' << opt(p.source.aux.treatment_rate) << '|'
      << opt(p.source.aux.control_event_rate) << '|' << opt(p.source.aux.treatment_event_rate) << '|'
      << opt(p.source.aux.dispersion) << '|' << opt(p.followup_dt) << '|' << shortest(p.decision.theta0) << '|'
      << to_string(p.decision.direction) << '|' << shortest(p.decision.rho);
    if (p.source_counts)
        o << '|' << p.source_counts->y_control << '/' << p.source_counts->n_control << ',' << p.source_counts->y_treatment
          << '/' << p.source_counts->n_treatment;
    return o.str();
}

}  // namespace

std::string_view to_string(DriftKeyword k) {
    switch (k) {
        case DriftKeyword::Consistent: return "consistent";
        case DriftKeyword::PartiallyConsistent: return "partially_consistent";
        case DriftKeyword::Null: return "null";
    }
    return "unknown";
}

double resolve_drift(DriftKeyword k, const CaseStudyPreset& preset) {
    switch (k) {
        case DriftKeyword::Consistent: return 0.0;
        case DriftKeyword::PartiallyConsistent: return -preset.source.estimate / 2.0;
        case DriftKeyword::Null: return preset.decision.theta0 - preset.source.estimate;
    }
    throw std::logic_error("resolve_drift: unhandled keyword");
}

std::string method_key(const MethodSpec& spec) {
    const std::string name = method_name(spec);
    return std::visit(
        [&](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConditionalPP>) return name + "(gamma=" + shortest(m.gamma) + ")";
            else if constexpr (std::is_same_v<T, NormalizedPP>)
                return name + "(xi_gamma=" + shortest(m.xi_gamma) + ",sd_gamma=" + shortest(m.sd_gamma) + ")";
            else if constexpr (std::is_same_v<T, PValuePP>)
                return name + "(k=" + shortest(m.k) + ",lambda=" + shortest(m.lambda) + ")";
            else if constexpr (std::is_same_v<T, TestThenPoolDiff>) return name + "(eta=" + shortest(m.eta) + ")";
            else if constexpr (std::is_same_v<T, TestThenPoolEquiv>)
                return name + "(eta=" + shortest(m.eta) + ",lambda=" + shortest(m.lambda) + ")";
            else if constexpr (std::is_same_v<T, RobustMixture>)
                return name + "(w=" + shortest(m.w) + ",vague_center=" + shortest(m.vague_center) + ")";
            else if constexpr (std::is_same_v<T, CommensuratePP>) {
                if (const auto* f = std::get_if<FixedTau>(&m.tau_prior)) return name + "(tau=" + shortest(f->tau) + ")";
                const auto& c = std::get<LogTauCauchy>(m.tau_prior);
                return name + "(tau=cauchy,location=" + shortest(c.location) + ",scale=" + shortest(c.scale) + ")";
            } else return name;
        },
        spec);
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

StudyConfig parse_study_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("$: invalid JSON: ") + e.what());
    }
    const std::string root = "$";
    reject_unknown(j, root,
                   {"preset", "presets_file", "sample_sizes", "drifts", "std_ratios", "denominator_factors", "methods",
                    "n_reps", "estimator", "compute_ess", "seed", "output_dir"});
    StudyConfig c;

    // Preset by name (from presets_file or the default file) or inline.
    const auto pit = j.find("preset");
    if (pit == j.end()) fail(root + ".preset", "missing required key");
    if (pit->is_string()) {
        std::filesystem::path file = default_presets_path();
        if (const auto f = j.find("presets_file"); f != j.end()) {
            if (!f->is_string()) fail(root + ".presets_file", "expected a string");
            file = f->get<std::string>();
            if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
        }
        try {
            c.preset = find_preset(load_presets(file), pit->get<std::string>());
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            fail(root + ".preset", e.what());
        }
    } else if (pit->is_object()) {
        if (j.contains("presets_file")) fail(root + ".presets_file", "not allowed with an inline preset");
        c.preset = detail::preset_from_json(nlohmann::json::parse(pit->dump()), root + ".preset");
    } else {
        fail(root + ".preset", "expected a preset name or object");
    }

    if (const auto it = j.find("sample_sizes"); it != j.end()) {
        const auto vals = values_of(*it, root + ".sample_sizes");
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const std::string p = root + ".sample_sizes[" + std::to_string(i) + "]";
            if (!vals[i].is_number_integer() || vals[i].get<long>() < 2) fail(p, "expected an integer >= 2");
            c.sample_sizes.push_back(vals[i].get<int>());
        }
    } else {
        c.sample_sizes = c.preset.sample_sizes;
    }
    if (c.sample_sizes.empty()) fail(root + ".sample_sizes", "no sample sizes");

    {
        const auto it = j.find("drifts");
        if (it == j.end()) {
            c.drifts = {DriftKeyword::Consistent, DriftKeyword::PartiallyConsistent, DriftKeyword::Null};
        } else {
            const auto vals = values_of(*it, root + ".drifts");
            for (std::size_t i = 0; i < vals.size(); ++i) {
                const std::string p = root + ".drifts[" + std::to_string(i) + "]";
                const auto& v = vals[i];
                if (v.is_number()) {
                    c.drifts.push_back(DriftValue{v.get<double>()});
                } else if (v.is_string()) {
                    const auto s = v.get<std::string>();
                    if (s == "consistent") c.drifts.push_back(DriftKeyword::Consistent);
                    else if (s == "partially_consistent") c.drifts.push_back(DriftKeyword::PartiallyConsistent);
                    else if (s == "null") c.drifts.push_back(DriftKeyword::Null);
                    else fail(p, "unknown drift keyword '" + s + "' (expected consistent|partially_consistent|null)");
                } else if (v.is_object()) {
                    reject_unknown(v, p, {"auto"});
                    const auto& a = v.at("auto");
                    reject_unknown(a, p + ".auto", {"count"});
                    const auto cnt = a.find("count");
                    if (cnt == a.end() || !cnt->is_number_integer() || cnt->get<int>() < 2)
                        fail(p + ".auto.count", "expected an integer >= 2");
                    c.drifts.push_back(DriftAuto{cnt->get<int>()});
                } else {
                    fail(p, "expected a number, keyword or {\"auto\": {...}}");
                }
            }
        }
    }

    if (const auto it = j.find("std_ratios"); it != j.end())
        c.std_ratios = number_list(*it, root + ".std_ratios", [](double x, const std::string& p) {
            if (!(x > 0.0)) fail(p, "must be positive");
        });
    if (const auto it = j.find("denominator_factors"); it != j.end())
        c.denominator_factors = number_list(*it, root + ".denominator_factors", [](double x, const std::string& p) {
            if (!(x > 0.0)) fail(p, "must be positive");
        });

    {
        const auto it = j.find("methods");
        if (it == j.end() || !it->is_array() || it->empty()) fail(root + ".methods", "expected a non-empty list");
        for (std::size_t i = 0; i < it->size(); ++i)
            expand_method((*it)[i], root + ".methods[" + std::to_string(i) + "]", c.methods);
    }

    if (const auto it = j.find("n_reps"); it != j.end()) {
        const std::string p = root + ".n_reps";
        const auto check = [&](const ojson& v, const std::string& q) {
            if (!v.is_number_integer() || v.get<long>() < 100) fail(q, "expected an integer >= 100");
            return v.get<int>();
        };
        if (it->is_object()) {
            reject_unknown(*it, p, {"success", "estimation"});
            if (const auto s = it->find("success"); s != it->end()) c.n_reps.success = check(*s, p + ".success");
            if (const auto e = it->find("estimation"); e != it->end()) c.n_reps.estimation = check(*e, p + ".estimation");
        } else {
            c.n_reps.success = c.n_reps.estimation = check(*it, p);
        }
        if (c.n_reps.estimation > c.n_reps.success) fail(p + ".estimation", "must not exceed n_reps.success");
    }
    if (const auto it = j.find("estimator"); it != j.end()) {
        const auto s = it->is_string() ? it->get<std::string>() : std::string();
        if (s == "mean") c.estimator = PointEstimator::PosteriorMean;
        else if (s == "median") c.estimator = PointEstimator::PosteriorMedian;
        else fail(root + ".estimator", "expected \"mean\" or \"median\"");
    }
    if (const auto it = j.find("compute_ess"); it != j.end()) {
        if (!it->is_boolean()) fail(root + ".compute_ess", "expected a boolean");
        c.compute_ess = it->get<bool>();
    }
    if (const auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned()) fail(root + ".seed", "expected a non-negative integer");
        c.seed = it->get<std::uint64_t>();
    }
    if (const auto it = j.find("output_dir"); it != j.end()) {
        if (!it->is_string()) fail(root + ".output_dir", "expected a string");
        c.output_dir = it->get<std::string>();
        if (c.output_dir.is_relative() && !base_dir.empty()) c.output_dir = base_dir / c.output_dir;
    }

    // The output directory does not change results, so it stays out of the hash.
    ojson canon = j;
    canon.erase("output_dir");
    c.canonical = canon.dump() + "\n" + preset_fingerprint(c.preset);
    return c;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_study_config(ss.str(), path.parent_path());
}

std::vector<StudyCell> expand_grid(const StudyConfig& config) {
    if (config.sample_sizes.empty() || config.drifts.empty() || config.std_ratios.empty() ||
        config.denominator_factors.empty() || config.methods.empty())
        throw ConfigError("$: empty grid axis");
    const auto& preset = config.preset;
    std::vector<StudyCell> cells;
    for (int n : config.sample_sizes) {
        // Resolve drifts at this sample size; auto ranges depend on the target SE.
        std::vector<std::pair<std::string, double>> drifts;
        for (std::size_t d = 0; d < config.drifts.size(); ++d) {
            const auto& spec = config.drifts[d];
            if (const auto* k = std::get_if<DriftKeyword>(&spec)) {
                drifts.emplace_back(std::string(to_string(*k)), resolve_drift(*k, preset));
            } else if (const auto* v = std::get_if<DriftValue>(&spec)) {
                drifts.emplace_back(shortest(v->value), v->value);
            } else {
                const int count = std::get<DriftAuto>(spec).count;
                DriftRange range;
                try {
                    const double se = expected_target_se(preset, ScenarioKnobs{}, n);
                    const std::optional<double> pt =
                        preset.endpoint == Endpoint::BinaryRateDiff
                            ? std::optional<double>(static_cast<double>(preset.source_counts->y_treatment) /
                                                    preset.source_counts->n_treatment)
                            : std::nullopt;
                    range = drift_range(preset.source, se, preset.decision, pt);
                } catch (const std::exception& e) {
                    throw ConfigError("$.drifts[" + std::to_string(d) + "]: " + e.what());
                }
                for (int i = 0; i < count; ++i) {
                    const double x = range.lo + (range.hi - range.lo) * i / (count - 1);
                    drifts.emplace_back("auto" + std::to_string(i + 1) + "of" + std::to_string(count), x);
                }
            }
        }
        for (const auto& [label, drift] : drifts)
            for (double sr : config.std_ratios)
                for (double df : config.denominator_factors) {
                    Scenario sc;
                    sc.preset = preset;
                    sc.n_per_arm = n;
                    sc.knobs = ScenarioKnobs{drift, sr, df};
                    sc.id = preset.name + "/n=" + std::to_string(n) + "/drift=" + label + "/sr=" + shortest(sr) +
                            "/df=" + shortest(df);
                    sc.seed = derive_seed(config.seed, sc.id);
                    try {
                        (void)expected_target_se(preset, sc.knobs, n);
                        (void)true_target_effect(preset, sc.knobs);
                    } catch (const std::exception& e) {
                        throw ConfigError("$ (scenario " + sc.id + "): " + e.what());
                    }
                    for (const auto& m : config.methods) cells.push_back({cells.size(), sc, label, m});
                }
    }
    return cells;
}

}  // namespace borrowsim

#include "chickcall/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "chickcall/errors.hpp"

namespace chickcall {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!known.count(key))
            throw ConfigError("unknown config key '" + key + "' in " + where);
    }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::string pair_key(std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return a + "|" + b;
}

void parse_band(const json& j, BandpassSpec& band) {
    reject_unknown(j, {"low_hz", "high_hz"}, "band");
    maybe(j, "low_hz", band.low_hz);
    maybe(j, "high_hz", band.high_hz);
    if (!(band.low_hz > 0.0 && band.low_hz < band.high_hz))
        throw ConfigError("band: need 0 < low_hz < high_hz");
}

void parse_detection(const json& j, PipelineConfig& config) {
    reject_unknown(j,
                   {"window_len", "hop_len", "window_fn", "peak_threshold_k",
                    "median_window_s", "min_inter_onset_s", "max_call_dur_s", "offset_method",
                    "bandpass_first"},
                   "detection");
    auto& d = config.detection;
    maybe(j, "window_len", d.stft.window_len);
    maybe(j, "hop_len", d.stft.hop_len);
    if (j.contains("window_fn"))
        d.stft.window_fn = dsp::window_from_name(j.at("window_fn").get<std::string>());
    maybe(j, "peak_threshold_k", d.peak_threshold_k);
    maybe(j, "median_window_s", d.median_window_s);
    maybe(j, "min_inter_onset_s", d.min_inter_onset_s);
    maybe(j, "max_call_dur_s", d.max_call_dur_s);
    if (j.contains("offset_method"))
        d.offset_method = offset_method_from_name(j.at("offset_method").get<std::string>());
    maybe(j, "bandpass_first", config.detect_bandpass_first);
    validate_stft(d.stft);
    if (!(d.max_call_dur_s > 0.0)) throw ConfigError("detection: max_call_dur_s must be > 0");
    if (d.min_inter_onset_s < 0.0)
        throw ConfigError("detection: min_inter_onset_s must be >= 0");
}

void parse_features(const json& j, PipelineConfig& config) {
    reject_unknown(j,
                   {"frame_len", "hop_len", "window_fn", "f0_min_hz", "f0_max_hz",
                    "centroid_low_hz", "centroid_high_hz", "n_thresholds", "switch_prob",
                    "cents_per_state"},
                   "features");
    auto& f = config.features;
    maybe(j, "frame_len", f.frame_len);
    maybe(j, "hop_len", f.hop_len);
    if (j.contains("window_fn"))
        f.window_fn = dsp::window_from_name(j.at("window_fn").get<std::string>());
    maybe(j, "f0_min_hz", f.pyin.fmin_hz);
    maybe(j, "f0_max_hz", f.pyin.fmax_hz);
    maybe(j, "centroid_low_hz", f.centroid_low_hz);
    maybe(j, "centroid_high_hz", f.centroid_high_hz);
    maybe(j, "n_thresholds", f.pyin.n_thresholds);
    maybe(j, "switch_prob", f.pyin.switch_prob);
    maybe(j, "cents_per_state", f.pyin.cents_per_state);
    if (f.hop_len == 0 || f.hop_len > f.frame_len)
        throw ConfigError("features: 0 < hop_len <= frame_len required");
}

void parse_evaluation(const json& j, EvalTolerances& tol) {
    reject_unknown(j, {"onset_tol_s", "offset_base_tol_s"}, "evaluation");
    maybe(j, "onset_tol_s", tol.onset_tol_s);
    maybe(j, "offset_base_tol_s", tol.offset_base_tol_s);
    if (!(tol.onset_tol_s > 0.0) || !(tol.offset_base_tol_s > 0.0))
        throw ConfigError("evaluation: tolerances must be positive");
}

void parse_clustering(const json& j, ClusteringConfig& c) {
    reject_unknown(j,
                   {"methods", "k_min", "k_max", "seed", "fcm_fuzzifier", "dbscan",
                    "representative_percentile", "report_method", "report_k"},
                   "clustering");
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& name : j.at("methods"))
            c.methods.push_back(cluster_method_from_name(name.get<std::string>()));
        if (c.methods.empty()) throw ConfigError("clustering: methods list is empty");
    }
    maybe(j, "k_min", c.k_min);
    maybe(j, "k_max", c.k_max);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    maybe(j, "fcm_fuzzifier", c.fcm_fuzzifier);
    if (j.contains("dbscan")) {
        const auto& db = j.at("dbscan");
        reject_unknown(db, {"eps", "min_pts"}, "clustering.dbscan");
        if (!db.contains("eps") || !db.contains("min_pts"))
            throw ConfigError("clustering.dbscan: both eps and min_pts are required");
        c.dbscan_eps = db.at("eps").get<double>();
        c.dbscan_min_pts = db.at("min_pts").get<int>();
    }
    maybe(j, "representative_percentile", c.representative_percentile);
    if (j.contains("report_method"))
        c.report_method = cluster_method_from_name(j.at("report_method").get<std::string>());
    maybe(j, "report_k", c.report_k);

    if (c.k_min < 1 || c.k_max < c.k_min)
        throw ConfigError("clustering: need 1 <= k_min <= k_max");
    if (c.report_k < 1) throw ConfigError("clustering: report_k must be >= 1");
    if (!(c.fcm_fuzzifier > 1.0)) throw ConfigError("clustering: fcm_fuzzifier must be > 1");
    const bool stochastic =
        std::any_of(c.methods.begin(), c.methods.end(), [](ClusterMethod m) {
            return m == ClusterMethod::kmeans || m == ClusterMethod::gmm ||
                   m == ClusterMethod::fcm;
        });
    if (stochastic && !c.seed)
        throw ConfigError("clustering: seed is required when kmeans/gmm/fcm are enabled");
    const bool wants_dbscan = std::find(c.methods.begin(), c.methods.end(),
                                        ClusterMethod::dbscan) != c.methods.end();
    if (wants_dbscan && (!c.dbscan_eps || !c.dbscan_min_pts))
        throw ConfigError("clustering: dbscan requires explicit eps and min_pts");
}

void parse_analysis(const json& j, AnalysisConfig& a) {
    reject_unknown(j, {"r_threshold", "overrides", "bin_len_s", "session_len_s"}, "analysis");
    maybe(j, "r_threshold", a.r_threshold);
    maybe(j, "bin_len_s", a.bin_len_s);
    maybe(j, "session_len_s", a.session_len_s);
    if (j.contains("overrides")) {
        for (const auto& entry : j.at("overrides")) {
            reject_unknown(entry, {"pair", "keep"}, "analysis.overrides[]");
            const auto& pair = entry.at("pair");
            if (!pair.is_array() || pair.size() != 2)
                throw ConfigError("analysis.overrides: 'pair' must list two feature names");
            const auto fa = pair[0].get<std::string>();
            const auto fb = pair[1].get<std::string>();
            const auto keep = entry.at("keep").get<std::string>();
            if (keep != fa && keep != fb)
                throw ConfigError("analysis.overrides: 'keep' must be one of the pair");
            a.overrides[pair_key(fa, fb)] = keep;
        }
    }
    if (!(a.r_threshold > 0.0 && a.r_threshold <= 1.0))
        throw ConfigError("analysis: r_threshold must be in (0, 1]");
}

PipelineConfig from_json(const json& j) {
    reject_unknown(j,
                   {"input_dir", "annotation_csv", "metadata_csv", "output_dir", "band",
                    "detection", "features", "evaluation", "clustering", "analysis", "jobs"},
                   "config root");
    PipelineConfig config;
    if (j.contains("input_dir")) config.input_dir = j.at("input_dir").get<std::string>();
    if (j.contains("output_dir")) config.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("annotation_csv"))
        config.annotation_csv = j.at("annotation_csv").get<std::string>();
    if (j.contains("metadata_csv"))
        config.metadata_csv = j.at("metadata_csv").get<std::string>();

    if (j.contains("band")) parse_band(j.at("band"), config.band);
    if (j.contains("detection")) parse_detection(j.at("detection"), config);
    if (j.contains("features")) parse_features(j.at("features"), config);
    if (j.contains("evaluation")) parse_evaluation(j.at("evaluation"), config.evaluation);
    if (j.contains("clustering")) parse_clustering(j.at("clustering"), config.clustering);
    if (j.contains("analysis")) parse_analysis(j.at("analysis"), config.analysis);
    maybe(j, "jobs", config.jobs);
    if (config.jobs < 0) throw ConfigError("jobs must be >= 0");

    // F0 and centroid bands default from the filter band.
    if (!j.contains("features") || !j.at("features").contains("f0_min_hz"))
        config.features.pyin.fmin_hz = config.band.low_hz;
    if (!j.contains("features") || !j.at("features").contains("f0_max_hz"))
        config.features.pyin.fmax_hz = config.band.high_hz / 2.0;
    if (!j.contains("features") || !j.at("features").contains("centroid_low_hz"))
        config.features.centroid_low_hz = config.band.low_hz;
    if (!j.contains("features") || !j.at("features").contains("centroid_high_hz"))
        config.features.centroid_high_hz = config.band.high_hz;
    if (!(config.features.pyin.fmin_hz > 0.0 &&
          config.features.pyin.fmin_hz < config.features.pyin.fmax_hz))
        throw ConfigError("features: need 0 < f0_min_hz < f0_max_hz");
    return config;
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

PipelineConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return from_json(j);
}

std::string config_echo(const PipelineConfig& c) {
    json j;
    j["input_dir"] = c.input_dir.string();
    if (c.annotation_csv) j["annotation_csv"] = c.annotation_csv->string();
    if (c.metadata_csv) j["metadata_csv"] = c.metadata_csv->string();
    j["output_dir"] = c.output_dir.string();
    j["band"] = {{"low_hz", c.band.low_hz}, {"high_hz", c.band.high_hz}};
    j["detection"] = {{"window_len", c.detection.stft.window_len},
                      {"hop_len", c.detection.stft.hop_len},
                      {"window_fn", dsp::window_name(c.detection.stft.window_fn)},
                      {"peak_threshold_k", c.detection.peak_threshold_k},
                      {"median_window_s", c.detection.median_window_s},
                      {"min_inter_onset_s", c.detection.min_inter_onset_s},
                      {"max_call_dur_s", c.detection.max_call_dur_s},
                      {"offset_method", offset_method_name(c.detection.offset_method)},
                      {"bandpass_first", c.detect_bandpass_first}};
    j["features"] = {{"frame_len", c.features.frame_len},
                     {"hop_len", c.features.hop_len},
                     {"window_fn", dsp::window_name(c.features.window_fn)},
                     {"f0_min_hz", c.features.pyin.fmin_hz},
                     {"f0_max_hz", c.features.pyin.fmax_hz},
                     {"centroid_low_hz", c.features.centroid_low_hz},
                     {"centroid_high_hz", c.features.centroid_high_hz}};
    j["evaluation"] = {{"onset_tol_s", c.evaluation.onset_tol_s},
                       {"offset_base_tol_s", c.evaluation.offset_base_tol_s}};
    json methods = json::array();
    for (ClusterMethod m : c.clustering.methods) methods.push_back(cluster_method_name(m));
    j["clustering"] = {{"methods", methods},
                       {"k_min", c.clustering.k_min},
                       {"k_max", c.clustering.k_max},
                       {"fcm_fuzzifier", c.clustering.fcm_fuzzifier},
                       {"representative_percentile", c.clustering.representative_percentile},
                       {"report_method", cluster_method_name(c.clustering.report_method)},
                       {"report_k", c.clustering.report_k}};
    if (c.clustering.seed) j["clustering"]["seed"] = *c.clustering.seed;
    if (c.clustering.dbscan_eps)
        j["clustering"]["dbscan"] = {{"eps", *c.clustering.dbscan_eps},
                                     {"min_pts", *c.clustering.dbscan_min_pts}};
    json overrides = json::array();
    for (const auto& [pair, keep] : c.analysis.overrides) {
        const auto bar = pair.find('|');
        overrides.push_back({{"pair", {pair.substr(0, bar), pair.substr(bar + 1)}},
                             {"keep", keep}});
    }
    j["analysis"] = {{"r_threshold", c.analysis.r_threshold},
                     {"overrides", overrides},
                     {"bin_len_s", c.analysis.bin_len_s},
                     {"session_len_s", c.analysis.session_len_s}};
    j["jobs"] = c.jobs;
    return j.dump(2);
}

}  // namespace chickcall

#include "chickcall/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <functional>
#include <set>
#include <thread>

#include <json.hpp>
#include <openssl/evp.h>

#include "chickcall/csv.hpp"
#include "chickcall/errors.hpp"
#include "chickcall/evaluation.hpp"
#include "chickcall/log.hpp"

namespace chickcall {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

int resolve_jobs(int requested, std::size_t n_tasks) {
    int jobs = requested > 0 ? requested
                             : std::min(8u, std::max(1u, std::thread::hardware_concurrency()));
    return std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(1, n_tasks))));
}

// Index-parallel map with a shared atomic cursor; exceptions surface as
// per-index error strings so one bad file cannot sink the run.
template <typename Fn>
std::vector<std::string> parallel_indices(std::size_t n, int jobs, Fn&& fn) {
    std::vector<std::string> errors(n);
    if (n == 0) return errors;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            } catch (...) {
                errors[i] = "unknown error";
            }
        }
    };
    const int workers = resolve_jobs(jobs, n);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return errors;
}

class StageClock {
  public:
    explicit StageClock(RunReport* report) : report_(report) {}
    template <typename Fn>
    auto time(const std::string& name, Fn&& fn) {
        const auto start = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record(name, start);
        } else {
            auto out = fn();
            record(name, start);
            return out;
        }
    }

  private:
    void record(const std::string& name, std::chrono::steady_clock::time_point start) {
        if (!report_) return;
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        report_->stage_seconds.emplace_back(name, dt.count());
    }
    RunReport* report_;
};

std::vector<fs::path> list_wavs(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("input_dir is not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

void ensure_output_dir(const PipelineConfig& config) {
    if (config.output_dir.empty()) throw ConfigError("output_dir is required");
    fs::create_directories(config.output_dir);
}

// Manifest accumulation for cmd_pipeline.
struct ArtifactLog {
    struct Entry {
        std::string path;
        std::vector<std::string> columns;  // empty for JSON artifacts
    };
    std::vector<Entry> entries;

    void add(const fs::path& path, std::vector<std::string> columns = {}) {
        entries.push_back({path.string(), std::move(columns)});
    }
};

json prf_json(const PrfScores& s) {
    return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

std::string hash_inputs(const PipelineConfig& config, const std::vector<fs::path>& wavs) {
    std::string acc;
    for (const auto& p : wavs) acc += p.filename().string() + ":" + sha256_file(p) + "\n";
    if (config.annotation_csv && fs::exists(*config.annotation_csv))
        acc += "annotation:" + sha256_file(*config.annotation_csv) + "\n";
    if (config.metadata_csv && fs::exists(*config.metadata_csv))
        acc += "metadata:" + sha256_file(*config.metadata_csv) + "\n";
    return sha256_hex(acc);
}

void init_report(RunReport* report, const char* command, const PipelineConfig& config) {
    if (!report) return;
    report->command = command;
    report->version = tool_version();
    report->config_echo = config_echo(config);
}

struct DetectOutcome {
    std::vector<CallSegment> segments;
    int exit_code = kExitOk;
};

DetectOutcome run_detection(const PipelineConfig& config, RunReport* report) {
    const auto wavs = list_wavs(config.input_dir);
    if (wavs.empty()) throw ConfigError("no .wav files under " + config.input_dir.string());
    if (report) report->input_hash = hash_inputs(config, wavs);

    struct PerFile {
        std::vector<CallSegment> segments;
        std::vector<std::string> warnings;
    };
    std::vector<PerFile> results(wavs.size());
    const auto errors = parallel_indices(wavs.size(), config.jobs, [&](std::size_t i) {
        AudioClip clip = normalize_max_loudness(load_wav(wavs[i]));
        if (config.detect_bandpass_first) clip = bandpass(clip, config.band);
        results[i].segments = segment_calls(clip, config.detection, &results[i].warnings);
    });

    DetectOutcome out;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < wavs.size(); ++i) {
        if (!errors[i].empty()) {
            ++failed;
            log::warn("detect: " + wavs[i].string() + " failed: " + errors[i]);
            if (report) report->failed_files.push_back(wavs[i].string() + ": " + errors[i]);
            continue;
        }
        out.segments.insert(out.segments.end(), results[i].segments.begin(),
                            results[i].segments.end());
        if (report) {
            report->calls_per_file[wavs[i].stem().string()] = results[i].segments.size();
            for (const auto& w : results[i].warnings)
                report->dropped.push_back("detection_error: " + w);
        }
    }
    if (failed == wavs.size()) throw Error("detect: every input file failed");
    if (failed > 0) out.exit_code = kExitPartial;

    std::sort(out.segments.begin(), out.segments.end(), [](const auto& a, const auto& b) {
        return a.source_id != b.source_id ? a.source_id < b.source_id : a.onset_s < b.onset_s;
    });
    return out;
}

}  // namespace

std::string tool_version() { return "chickcall 0.1.0"; }

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash missing file: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

void RunReport::save(const std::filesystem::path& path) const {
    json j;
    j["command"] = command;
    j["version"] = version;
    j["input_hash"] = input_hash;
    j["config"] = json::parse(config_echo.empty() ? "{}" : config_echo);
    json stages = json::array();
    for (const auto& [name, seconds] : stage_seconds)
        stages.push_back({{"stage", name}, {"seconds", seconds}});
    j["stages"] = stages;
    j["calls_per_file"] = calls_per_file;
    j["dropped"] = dropped;
    j["failed_files"] = failed_files;
    j["notes"] = notes;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write run report: " + path.string());
    out << j.dump(2) << "\n";
}

void write_segments_csv(const std::filesystem::path& path,
                        const std::vector<CallSegment>& segments) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(segments.size());
    for (const auto& s : segments)
        rows.push_back({s.source_id, csv::format_time(s.onset_s), csv::format_time(s.offset_s)});
    csv::write(path, {"source_id", "onset_s", "offset_s"}, rows);
}

std::vector<CallSegment> read_segments_csv(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    csv::require_columns(table, {"source_id", "onset_s", "offset_s"}, path.string());
    const auto src = *table.column("source_id");
    const auto on = *table.column("onset_s");
    const auto off = *table.column("offset_s");
    std::vector<CallSegment> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        CallSegment s;
        s.source_id = row[src];
        s.onset_s = csv::parse_double(row[on], path.string());
        s.offset_s = csv::parse_double(row[off], path.string());
        out.push_back(s);
    }
    return out;
}

void write_features_csv(const std::filesystem::path& path,
                        const std::vector<FeatureRow>& rows) {
    std::vector<std::string> header = {"source_id", "onset_s", "offset_s"};
    for (const auto& name : CallFeatureVector::names()) header.push_back(name);
    std::vector<std::vector<std::string>> body;
    body.reserve(rows.size());
    for (const auto& row : rows) {
        std::vector<std::string> fields = {row.segment.source_id,
                                           csv::format_time(row.segment.onset_s),
                                           csv::format_time(row.segment.offset_s)};
        for (const auto& v : row.values) fields.push_back(csv::format_value(v));
        body.push_back(std::move(fields));
    }
    csv::write(path, header, body);
}

std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    std::vector<std::string> expected = {"source_id", "onset_s", "offset_s"};
    for (const auto& name : CallFeatureVector::names()) expected.push_back(name);
    csv::require_columns(table, expected, path.string());

    std::vector<FeatureRow> out;
    out.reserve(table.rows.size());
    const auto src = *table.column("source_id");
    const auto on = *table.column("onset_s");
    const auto off = *table.column("offset_s");
    std::vector<std::size_t> cols;
    for (const auto& name : CallFeatureVector::names()) cols.push_back(*table.column(name));
    for (const auto& row : table.rows) {
        FeatureRow fr;
        fr.segment.source_id = row[src];
        fr.segment.onset_s = csv::parse_double(row[on], path.string());
        fr.segment.offset_s = csv::parse_double(row[off], path.string());
        for (std::size_t c : cols)
            fr.values.push_back(csv::parse_optional(row[c], path.string()));
        out.push_back(std::move(fr));
    }
    return out;
}

std::vector<GroupLabel> read_metadata_csv(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    csv::require_columns(table, {"source_id", "chick_id", "condition"}, path.string());
    const auto src = *table.column("source_id");
    const auto chick = *table.column("chick_id");
    const auto cond = *table.column("condition");
    std::vector<GroupLabel> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) out.push_back({row[src], row[chick], row[cond]});
    return out;
}

void write_assignments_csv(const std::filesystem::path& path,
                           const std::vector<AssignmentRow>& rows) {
    std::vector<std::vector<std::string>> body;
    body.reserve(rows.size());
    for (const auto& row : rows)
        body.push_back({row.segment.source_id, csv::format_time(row.segment.onset_s),
                        csv::format_time(row.segment.offset_s), std::to_string(row.cluster)});
    csv::write(path, {"source_id", "onset_s", "offset_s", "cluster"}, body);
}

std::vector<AssignmentRow> read_assignments_csv(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    csv::require_columns(table, {"source_id", "onset_s", "offset_s", "cluster"}, path.string());
    const auto src = *table.column("source_id");
    const auto on = *table.column("onset_s");
    const auto off = *table.column("offset_s");
    const auto cl = *table.column("cluster");
    std::vector<AssignmentRow> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        AssignmentRow ar;
        ar.segment.source_id = row[src];
        ar.segment.onset_s = csv::parse_double(row[on], path.string());
        ar.segment.offset_s = csv::parse_double(row[off], path.string());
        ar.cluster = static_cast<int>(csv::parse_double(row[cl], path.string()));
        out.push_back(ar);
    }
    return out;
}

int cmd_detect(const PipelineConfig& config, RunReport* report) {
    init_report(report, "detect", config);
    ensure_output_dir(config);
    StageClock clock(report);
    const auto outcome = clock.time("detect", [&] { return run_detection(config, report); });
    write_segments_csv(config.output_dir / artifacts::kSegments, outcome.segments);
    if (report) report->save(config.output_dir / artifacts::kRunReport);
    return outcome.exit_code;
}

int cmd_evaluate(const PipelineConfig& config, RunReport* report) {
    init_report(report, "evaluate", config);
    ensure_output_dir(config);
    if (!config.annotation_csv) throw ConfigError("evaluate: annotation_csv is required");

    const auto pred = read_segments_csv(config.output_dir / artifacts::kSegments);
    const auto ref = read_segments_csv(*config.annotation_csv);

    std::set<std::string> pred_files, ref_files;
    for (const auto& s : pred) pred_files.insert(s.source_id);
    for (const auto& s : ref) ref_files.insert(s.source_id);
    std::vector<std::string> pred_only, ref_only;
    std::set_difference(pred_files.begin(), pred_files.end(), ref_files.begin(),
                        ref_files.end(), std::back_inserter(pred_only));
    std::set_difference(ref_files.begin(), ref_files.end(), pred_files.begin(),
                        pred_files.end(), std::back_inserter(ref_only));

    std::vector<CallSegment> pred_kept, ref_kept;
    for (const auto& s : pred)
        if (ref_files.count(s.source_id) && pred_files.count(s.source_id))
            pred_kept.push_back(s);
    for (const auto& s : ref)
        if (pred_files.count(s.source_id)) ref_kept.push_back(s);

    StageClock clock(report);
    const EvalReport result = clock.time(
        "evaluate", [&] { return evaluate_segments(pred_kept, ref_kept, config.evaluation); });

    json j;
    j["per_file"] = json::object();
    for (const auto& [file, scores] : result.per_file)
        j["per_file"][file] = {{"onset", prf_json(scores.onset)},
                               {"offset", prf_json(scores.offset)},
                               {"n_ref_calls", scores.n_ref_calls}};
    j["weighted"] = {{"onset", prf_json(result.weighted_onset)},
                     {"offset", prf_json(result.weighted_offset)}};
    j["excluded"] = {{"prediction_only", pred_only}, {"annotation_only", ref_only}};
    std::ofstream out(config.output_dir / artifacts::kEvalReport, std::ios::binary);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("cannot write eval report");

    csv::write(config.output_dir / artifacts::kEvalSummary,
               {"detection_type", "weighted_f1", "weighted_precision", "weighted_recall"},
               {{"onset", csv::format_value(result.weighted_onset.f1),
                 csv::format_value(result.weighted_onset.precision),
                 csv::format_value(result.weighted_onset.recall)},
                {"offset", csv::format_value(result.weighted_offset.f1),
                 csv::format_value(result.weighted_offset.precision),
                 csv::format_value(result.weighted_offset.recall)}});

    if (report) {
        for (const auto& f : pred_only)
            report->notes.push_back("excluded (prediction only): " + f);
        for (const auto& f : ref_only)
            report->notes.push_back("excluded (annotation only): " + f);
        report->save(config.output_dir / artifacts::kRunReport);
    }
    return kExitOk;
}

int cmd_extract(const PipelineConfig& config, RunReport* report) {
    init_report(report, "extract", config);
    ensure_output_dir(config);
    const auto segments = read_segments_csv(config.output_dir / artifacts::kSegments);

    std::map<std::string, std::vector<CallSegment>> by_file;
    for (const auto& s : segments) by_file[s.source_id].push_back(s);
    std::vector<std::string> files;
    for (const auto& [file, _] : by_file) files.push_back(file);

    FeatureParams params = config.features;
    std::vector<std::vector<CallFeatures>> per_file(files.size());
    std::vector<std::vector<std::string>> warnings(files.size());
    const auto errors = parallel_indices(files.size(), config.jobs, [&](std::size_t i) {
        const fs::path wav = config.input_dir / (files[i] + ".wav");
        AudioClip clip = normalize_max_loudness(load_wav(wav));
        clip = bandpass(clip, config.band);
        auto segs = by_file[files[i]];
        std::sort(segs.begin(), segs.end(),
                  [](const auto& a, const auto& b) { return a.onset_s < b.onset_s; });
        per_file[i] = extract_features(clip, segs, params, &warnings[i]);
    });

    std::vector<FeatureRow> rows;
    std::size_t failed = 0, incomplete = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!errors[i].empty()) {
            ++failed;
            log::warn("extract: " + files[i] + " failed: " + errors[i]);
            if (report) report->failed_files.push_back(files[i] + ": " + errors[i]);
            continue;
        }
        for (const auto& call : per_file[i]) {
            FeatureRow row;
            row.segment = call.segment;
            const auto values = call.features.values();
            row.values.assign(values.begin(), values.end());
            if (!call.features.complete()) ++incomplete;
            rows.push_back(std::move(row));
        }
        if (report)
            for (const auto& w : warnings[i]) report->dropped.push_back("feature_error: " + w);
    }
    if (!files.empty() && failed == files.size())
        throw Error("extract: every input file failed");

    write_features_csv(config.output_dir / artifacts::kFeatures, rows);
    if (report) {
        report->notes.push_back("rows with missing descriptors: " + std::to_string(incomplete));
        report->save(config.output_dir / artifacts::kRunReport);
    }
    return failed > 0 ? kExitPartial : kExitOk;
}

namespace {

struct ClusterInputs {
    std::vector<FeatureRow> complete_rows;
    Eigen::MatrixXd raw;
    std::vector<std::string> columns;
};

ClusterInputs load_cluster_inputs(const fs::path& features_path, RunReport* report) {
    const auto rows = read_features_csv(features_path);
    ClusterInputs in;
    in.columns.assign(CallFeatureVector::names().begin(), CallFeatureVector::names().end());
    std::size_t dropped = 0;
    for (const auto& row : rows) {
        const bool complete =
            std::all_of(row.values.begin(), row.values.end(),
                        [](const std::optional<double>& v) { return v.has_value(); });
        if (complete)
            in.complete_rows.push_back(row);
        else
            ++dropped;
    }
    if (in.complete_rows.size() < 2)
        throw Error("cluster: fewer than 2 complete feature rows");
    in.raw.resize(static_cast<Eigen::Index>(in.complete_rows.size()),
                  static_cast<Eigen::Index>(in.columns.size()));
    for (std::size_t i = 0; i < in.complete_rows.size(); ++i)
        for (std::size_t j = 0; j < in.columns.size(); ++j)
            in.raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                *in.complete_rows[i].values[j];
    if (report && dropped > 0)
        report->dropped.push_back("null_features: " + std::to_string(dropped) +
                                  " calls excluded from clustering");
    log::info("cluster: " + std::to_string(in.complete_rows.size()) + " complete rows (" +
              std::to_string(dropped) + " dropped)");
    return in;
}

std::optional<std::string> opt_str(const std::optional<double>& v) {
    if (!v) return std::nullopt;
    return csv::format_value(*v);
}

}  // namespace

int cmd_cluster(const PipelineConfig& config, RunReport* report) {
    init_report(report, "cluster", config);
    ensure_output_dir(config);
    const auto& cc = config.clustering;

    auto inputs = load_cluster_inputs(config.output_dir / artifacts::kFeatures, report);
    const auto scaled = zscore_fit_transform(inputs.raw, inputs.columns);
    if (report)
        for (const auto& c : scaled.constant_columns)
            report->notes.push_back("constant feature column: " + c);

    const int n = static_cast<int>(scaled.values.rows());
    const int k_max = std::min(cc.k_max, n - 1);
    if (k_max < cc.k_max && report)
        report->notes.push_back("k_max clamped to n-1 = " + std::to_string(k_max));

    StageClock clock(report);
    const std::uint64_t seed = cc.seed.value_or(0);

    GridSearchResult grid = clock.time("grid_search", [&] {
        std::vector<ClusterMethod> grid_methods;
        for (ClusterMethod m : cc.methods)
            if (m != ClusterMethod::dbscan) grid_methods.push_back(m);
        return grid_search(scaled.values, grid_methods, std::min(cc.k_min, k_max), k_max, seed,
                           cc.fcm_fuzzifier);
    });

    const bool wants_dbscan = std::find(cc.methods.begin(), cc.methods.end(),
                                        ClusterMethod::dbscan) != cc.methods.end();
    std::optional<ClusterModel> dbscan_model;
    if (wants_dbscan) {
        dbscan_model = fit_dbscan(scaled.values, *cc.dbscan_eps, *cc.dbscan_min_pts);
        grid.cells.push_back(validity_metrics(scaled.values, *dbscan_model));
    }

    // Validity grid CSV.
    std::vector<std::vector<std::string>> validity_rows;
    for (const auto& cell : grid.cells) {
        validity_rows.push_back({cluster_method_name(cell.method), std::to_string(cell.k),
                                 opt_str(cell.silhouette).value_or(""),
                                 opt_str(cell.chi).value_or(""),
                                 opt_str(cell.wcss).value_or(""),
                                 opt_str(cell.fpc).value_or(""),
                                 opt_str(cell.aic).value_or(""),
                                 opt_str(cell.bic).value_or("")});
    }
    csv::write(config.output_dir / artifacts::kValidity,
               {"method", "k", "silhouette", "chi", "wcss", "fpc", "aic", "bic"},
               validity_rows);

    std::vector<std::vector<std::string>> rec_rows;
    for (const auto& rec : grid.recommended)
        rec_rows.push_back(
            {cluster_method_name(rec.method), rec.metric, std::to_string(rec.k)});
    csv::write(config.output_dir / artifacts::kRecommendations, {"method", "metric", "k"},
               rec_rows);

    // Dendrogram for the HAC view.
    const bool wants_hac = std::find(cc.methods.begin(), cc.methods.end(),
                                     ClusterMethod::hac_ward) != cc.methods.end() ||
                           cc.report_method == ClusterMethod::hac_ward;
    std::optional<Dendrogram> tree;
    if (wants_hac) {
        tree = clock.time("hac_ward", [&] { return fit_hac_ward(scaled.values); });
        json dj;
        dj["n_leaves"] = tree->n_leaves;
        json merges = json::array();
        for (const auto& m : tree->merges)
            merges.push_back(
                {{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.size}});
        dj["merges"] = merges;
        std::ofstream out(config.output_dir / artifacts::kDendrogram, std::ios::binary);
        out << dj.dump(2) << "\n";
        if (!out) throw IoError("cannot write dendrogram");
    }

    // Report model: the one that writes assignments + representatives.
    ClusterModel model;
    const int report_k = std::min(cc.report_k, n);
    switch (cc.report_method) {
        case ClusterMethod::kmeans: model = fit_kmeans(scaled.values, report_k, seed); break;
        case ClusterMethod::hac_ward: model = cut(*tree, scaled.values, report_k); break;
        case ClusterMethod::gmm: model = fit_gmm(scaled.values, report_k, seed); break;
        case ClusterMethod::fcm:
            model = fit_fcm(scaled.values, report_k, cc.fcm_fuzzifier, seed);
            break;
        case ClusterMethod::dbscan:
            if (!dbscan_model) dbscan_model = fit_dbscan(scaled.values, *cc.dbscan_eps,
                                                          *cc.dbscan_min_pts);
            model = *dbscan_model;
            break;
    }

    std::vector<AssignmentRow> assignments;
    assignments.reserve(inputs.complete_rows.size());
    for (std::size_t i = 0; i < inputs.complete_rows.size(); ++i)
        assignments.push_back({inputs.complete_rows[i].segment, model.labels[i]});
    write_assignments_csv(config.output_dir / artifacts::kAssignments, assignments);

    const auto reps =
        representative_calls(scaled.values, model, cc.representative_percentile);
    std::vector<std::vector<std::string>> rep_rows;
    for (std::size_t c = 0; c < reps.size(); ++c) {
        for (std::size_t rank = 0; rank < reps[c].size(); ++rank) {
            const auto& rc = reps[c][rank];
            const auto& seg = inputs.complete_rows[static_cast<std::size_t>(rc.row)].segment;
            rep_rows.push_back({std::to_string(c), std::to_string(rank), seg.source_id,
                                csv::format_time(seg.onset_s), csv::format_time(seg.offset_s),
                                csv::format_value(rc.distance)});
        }
    }
    csv::write(config.output_dir / artifacts::kRepresentatives,
               {"cluster", "rank", "source_id", "onset_s", "offset_s", "distance"}, rep_rows);

    if (report) report->save(config.output_dir / artifacts::kRunReport);
    return kExitOk;
}

int cmd_select(const PipelineConfig& config, RunReport* report) {
    init_report(report, "select", config);
    ensure_output_dir(config);
    if (!config.metadata_csv) throw ConfigError("select: metadata_csv is required");
    if (!fs::exists(*config.metadata_csv))
        throw ConfigError("select: missing metadata file " + config.metadata_csv->string());

    auto inputs = load_cluster_inputs(config.output_dir / artifacts::kFeatures, report);
    const auto groups = read_metadata_csv(*config.metadata_csv);
    const auto assignments =
        read_assignments_csv(config.output_dir / artifacts::kAssignments);

    std::map<std::string, const GroupLabel*> meta_by_source;
    for (const auto& g : groups) meta_by_source[g.source_id] = &g;

    auto call_key = [](const CallSegment& s) {
        return s.source_id + "|" + csv::format_time(s.onset_s) + "|" +
               csv::format_time(s.offset_s);
    };
    std::map<std::string, int> cluster_by_call;
    for (const auto& a : assignments) cluster_by_call[call_key(a.segment)] = a.cluster;

    // Join condition + cluster onto the complete feature rows.
    std::vector<std::string> conditions;
    std::vector<int> clusters;
    std::set<std::string> condition_set;
    for (const auto& row : inputs.complete_rows) {
        const auto meta = meta_by_source.find(row.segment.source_id);
        if (meta == meta_by_source.end())
            throw Error("select: no metadata row for source_id " + row.segment.source_id);
        conditions.push_back(meta->second->condition);
        condition_set.insert(meta->second->condition);
        const auto cl = cluster_by_call.find(call_key(row.segment));
        clusters.push_back(cl == cluster_by_call.end() ? -1 : cl->second);
    }
    if (condition_set.size() != 2)
        throw Error("select: exactly two conditions are required for Cohen's d (got " +
                    std::to_string(condition_set.size()) + ")");
    const std::string cond_a = *condition_set.begin();
    std::vector<int> group_of_row;
    group_of_row.reserve(conditions.size());
    for (const auto& c : conditions) group_of_row.push_back(c == cond_a ? 0 : 1);

    StageClock clock(report);
    const auto correlation = clock.time("pearson", [&] {
        return pearson_matrix(inputs.raw, inputs.columns, config.analysis.r_threshold);
    });
    std::vector<std::vector<std::string>> corr_rows;
    for (Eigen::Index i = 0; i < correlation.pearson.rows(); ++i) {
        std::vector<std::string> row = {inputs.columns[static_cast<std::size_t>(i)]};
        for (Eigen::Index j = 0; j < correlation.pearson.cols(); ++j) {
            const double r = correlation.pearson(i, j);
            row.push_back(std::isnan(r) ? "" : csv::format_value(r));
        }
        corr_rows.push_back(std::move(row));
    }
    std::vector<std::string> corr_header = {"feature"};
    corr_header.insert(corr_header.end(), inputs.columns.begin(), inputs.columns.end());
    csv::write(config.output_dir / artifacts::kCorrelation, corr_header, corr_rows);

    const auto vifs =
        clock.time("vif", [&] { return vif_scores(inputs.raw, inputs.columns); });
    std::vector<std::vector<std::string>> vif_rows;
    for (const auto& v : vifs)
        vif_rows.push_back({v.feature, v.infinite ? "inf" : csv::format_value(v.vif),
                            v.flagged ? "1" : "0"});
    csv::write(config.output_dir / artifacts::kVif, {"feature", "vif", "flagged"}, vif_rows);

    const auto pruned = clock.time("prune", [&] {
        return prune_multicollinear(inputs.raw, inputs.columns, group_of_row,
                                    config.analysis.r_threshold, config.analysis.overrides);
    });
    json audit;
    audit["r_threshold"] = config.analysis.r_threshold;
    audit["retained"] = pruned.retained;
    json decisions = json::array();
    for (const auto& d : pruned.audit)
        decisions.push_back({{"feat_a", d.feat_a},
                             {"feat_b", d.feat_b},
                             {"r", d.r},
                             {"d_a", d.d_a},
                             {"d_b", d.d_b},
                             {"kept", d.kept},
                             {"dropped", d.dropped},
                             {"reason", d.reason}});
    audit["decisions"] = decisions;
    std::ofstream audit_out(config.output_dir / artifacts::kPruningAudit, std::ios::binary);
    audit_out << audit.dump(2) << "\n";
    if (!audit_out) throw IoError("cannot write pruning audit");

    // Production binning over the assignment table.
    std::vector<CallForBinning> calls;
    calls.reserve(assignments.size());
    for (const auto& a : assignments)
        calls.push_back({a.segment.source_id, a.segment.onset_s, a.cluster});
    std::size_t out_of_session = 0;
    const auto binned = bin_call_counts(calls, groups, config.analysis.bin_len_s,
                                        config.analysis.session_len_s, &out_of_session);
    std::vector<std::vector<std::string>> bin_rows;
    for (const auto& b : binned)
        bin_rows.push_back({b.condition, std::to_string(b.cluster), std::to_string(b.bin),
                            csv::format_value(b.mean), csv::format_value(b.sem),
                            std::to_string(b.n_chicks)});
    csv::write(config.output_dir / artifacts::kBinnedCounts,
               {"condition", "cluster", "bin", "mean_count", "sem_count", "n_chicks"},
               bin_rows);
    if (report && out_of_session > 0)
        report->dropped.push_back("out_of_session: " + std::to_string(out_of_session) +
                                  " calls outside the session window");

    std::vector<std::vector<std::optional<double>>> raw_rows;
    raw_rows.reserve(inputs.complete_rows.size());
    for (const auto& row : inputs.complete_rows) raw_rows.push_back(row.values);
    const auto summary = cluster_summary(raw_rows, inputs.columns, clusters, conditions);
    std::vector<std::vector<std::string>> summary_rows;
    for (const auto& s : summary)
        summary_rows.push_back({s.condition, std::to_string(s.cluster), s.feature,
                                csv::format_value(s.mean), csv::format_value(s.sd),
                                std::to_string(s.n)});
    csv::write(config.output_dir / artifacts::kClusterSummary,
               {"condition", "cluster", "feature", "mean", "sd", "n"}, summary_rows);

    if (report) report->save(config.output_dir / artifacts::kRunReport);
    return kExitOk;
}

int cmd_pipeline(const PipelineConfig& config, RunReport* report) {
    init_report(report, "pipeline", config);
    ensure_output_dir(config);

    struct Stage {
        const char* name;
        std::function<int()> run;
        bool enabled;
    };
    RunReport scratch;
    RunReport* sub = report ? report : &scratch;

    const std::vector<Stage> stages = {
        {"detect", [&] { return cmd_detect(config, sub); }, true},
        {"evaluate", [&] { return cmd_evaluate(config, sub); },
         config.annotation_csv.has_value()},
        {"extract", [&] { return cmd_extract(config, sub); }, true},
        {"cluster", [&] { return cmd_cluster(config, sub); }, true},
        {"select", [&] { return cmd_select(config, sub); }, config.metadata_csv.has_value()},
    };

    ArtifactLog artifact_log;
    auto register_artifacts = [&](const char* stage) {
        auto add_csv = [&](const char* name, std::vector<std::string> cols) {
            const fs::path p = config.output_dir / name;
            if (fs::exists(p)) artifact_log.add(p, std::move(cols));
        };
        if (std::string(stage) == "detect")
            add_csv(artifacts::kSegments, {"source_id", "onset_s", "offset_s"});
        if (std::string(stage) == "evaluate") {
            add_csv(artifacts::kEvalSummary,
                    {"detection_type", "weighted_f1", "weighted_precision", "weighted_recall"});
            artifact_log.add(config.output_dir / artifacts::kEvalReport);
        }
        if (std::string(stage) == "extract") {
            std::vector<std::string> cols = {"source_id", "onset_s", "offset_s"};
            for (const auto& n : CallFeatureVector::names()) cols.push_back(n);
            add_csv(artifacts::kFeatures, cols);
        }
        if (std::string(stage) == "cluster") {
            add_csv(artifacts::kAssignments, {"source_id", "onset_s", "offset_s", "cluster"});
            add_csv(artifacts::kValidity,
                    {"method", "k", "silhouette", "chi", "wcss", "fpc", "aic", "bic"});
            add_csv(artifacts::kRecommendations, {"method", "metric", "k"});
            add_csv(artifacts::kRepresentatives,
                    {"cluster", "rank", "source_id", "onset_s", "offset_s", "distance"});
            if (fs::exists(config.output_dir / artifacts::kDendrogram))
                artifact_log.add(config.output_dir / artifacts::kDendrogram);
        }
        if (std::string(stage) == "select") {
            add_csv(artifacts::kVif, {"feature", "vif", "flagged"});
            add_csv(artifacts::kBinnedCounts,
                    {"condition", "cluster", "bin", "mean_count", "sem_count", "n_chicks"});
            add_csv(artifacts::kClusterSummary,
                    {"condition", "cluster", "feature", "mean", "sd", "n"});
            std::vector<std::string> cols = {"feature"};
            for (const auto& n : CallFeatureVector::names()) cols.push_back(n);
            add_csv(artifacts::kCorrelation, cols);
            artifact_log.add(config.output_dir / artifacts::kPruningAudit);
        }
    };

    auto write_manifest = [&](const std::vector<std::pair<std::string, int>>& stage_codes) {
        json j;
        j["version"] = tool_version();
        j["config"] = json::parse(config_echo(config));
        if (report) j["input_hash"] = report->input_hash;
        json stages_json = json::array();
        for (const auto& [name, code] : stage_codes)
            stages_json.push_back({{"stage", name}, {"exit_code", code}});
        j["stages"] = stages_json;
        json outputs = json::array();
        for (const auto& entry : artifact_log.entries) {
            json o;
            o["path"] = entry.path;
            if (!entry.columns.empty()) o["columns"] = entry.columns;
            o["sha256"] = sha256_file(entry.path);
            outputs.push_back(o);
        }
        j["outputs"] = outputs;
        std::ofstream out(config.output_dir / artifacts::kManifest, std::ios::binary);
        out << j.dump(2) << "\n";
        if (!out) throw IoError("cannot write manifest");
    };

    std::vector<std::pair<std::string, int>> stage_codes;
    int worst = kExitOk;
    for (const auto& stage : stages) {
        if (!stage.enabled) {
            if (report) report->notes.push_back(std::string(stage.name) + ": skipped (not configured)");
            continue;
        }
        int code;
        try {
            code = stage.run();
        } catch (const ConfigError&) {
            stage_codes.emplace_back(stage.name, kExitConfig);
            write_manifest(stage_codes);
            throw;
        } catch (const Error&) {
            stage_codes.emplace_back(stage.name, kExitFailure);
            write_manifest(stage_codes);
            throw;
        }
        stage_codes.emplace_back(stage.name, code);
        register_artifacts(stage.name);
        if (code == kExitPartial) worst = kExitPartial;
        if (code == kExitFailure || code == kExitConfig) {
            write_manifest(stage_codes);
            return code;
        }
    }
    write_manifest(stage_codes);
    if (report) {
        report->command = "pipeline";
        report->save(config.output_dir / artifacts::kRunReport);
    }
    return worst;
}

}  // namespace chickcall

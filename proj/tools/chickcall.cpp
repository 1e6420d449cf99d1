// chickcall: detection, feature extraction, clustering and group analytics
// for chick vocalisation recordings. Subcommands wrap the pipeline stages;
// flags override config-file values which override built-in defaults.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chickcall/errors.hpp"
#include "chickcall/pipeline.hpp"

namespace {

using chickcall::PipelineConfig;

struct CommonFlags {
    std::string config_path;
    std::string input_dir;
    std::string output_dir;
    std::string annotation_csv;
    std::string metadata_csv;
    int jobs = -1;
    double peak_threshold_k = -1.0;
    std::string offset_method;
    double band_low = -1.0;
    double band_high = -1.0;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("-c,--config", flags.config_path, "JSON config file");
    cmd->add_option("-i,--input-dir", flags.input_dir, "directory of WAV recordings");
    cmd->add_option("-o,--output-dir", flags.output_dir, "artifact output directory");
    cmd->add_option("--annotation-csv", flags.annotation_csv,
                    "reference onsets/offsets (source_id,onset_s,offset_s)");
    cmd->add_option("--metadata-csv", flags.metadata_csv,
                    "per-recording metadata (source_id,chick_id,condition)");
    cmd->add_option("-j,--jobs", flags.jobs, "worker threads (0 = auto)");
    cmd->add_option("--peak-threshold-k", flags.peak_threshold_k,
                    "onset picker threshold multiplier");
    cmd->add_option("--offset-method", flags.offset_method,
                    "local_min | first_diff | second_diff");
    cmd->add_option("--band-low-hz", flags.band_low, "bandpass low cutoff");
    cmd->add_option("--band-high-hz", flags.band_high, "bandpass high cutoff");
    cmd->add_option("--seed", flags.seed, "clustering RNG seed");
}

PipelineConfig build_config(const CommonFlags& flags) {
    PipelineConfig config;
    if (!flags.config_path.empty()) config = chickcall::load_config(flags.config_path);
    if (!flags.input_dir.empty()) config.input_dir = flags.input_dir;
    if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
    if (!flags.annotation_csv.empty()) config.annotation_csv = flags.annotation_csv;
    if (!flags.metadata_csv.empty()) config.metadata_csv = flags.metadata_csv;
    if (flags.jobs >= 0) config.jobs = flags.jobs;
    if (flags.peak_threshold_k > 0.0) config.detection.peak_threshold_k = flags.peak_threshold_k;
    if (!flags.offset_method.empty())
        config.detection.offset_method = chickcall::offset_method_from_name(flags.offset_method);
    if (flags.band_low > 0.0) config.band.low_hz = flags.band_low;
    if (flags.band_high > 0.0) config.band.high_hz = flags.band_high;
    if (flags.seed) config.clustering.seed = flags.seed;
    if (config.input_dir.empty()) throw chickcall::ConfigError("input_dir is required");
    if (config.output_dir.empty()) throw chickcall::ConfigError("output_dir is required");
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chick vocalisation analysis toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", chickcall::tool_version());

    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const PipelineConfig&, chickcall::RunReport*);
    };
    const Sub subs[] = {
        {"detect", "detect call onsets/offsets -> segments.csv", chickcall::cmd_detect},
        {"evaluate", "score segments.csv against annotations", chickcall::cmd_evaluate},
        {"extract", "extract the 20 per-call descriptors -> features.csv",
         chickcall::cmd_extract},
        {"cluster", "grid-search clustering + validity metrics", chickcall::cmd_cluster},
        {"select", "correlation/VIF/effect-size feature selection + summaries",
         chickcall::cmd_select},
        {"pipeline", "run all stages in order with a manifest", chickcall::cmd_pipeline},
    };

    CommonFlags flags[std::size(subs)];
    for (std::size_t i = 0; i < std::size(subs); ++i)
        add_common(app.add_subcommand(subs[i].name, subs[i].help), flags[i]);

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < std::size(subs); ++i) {
        auto* cmd = app.get_subcommand(subs[i].name);
        if (!cmd->parsed()) continue;
        try {
            PipelineConfig config = build_config(flags[i]);
            chickcall::RunReport report;
            return subs[i].run(config, &report);
        } catch (const chickcall::ConfigError& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return chickcall::kExitConfig;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return chickcall::kExitFailure;
        }
    }
    return chickcall::kExitConfig;
}

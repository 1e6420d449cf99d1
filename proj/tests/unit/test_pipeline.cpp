#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "chickcall/csv.hpp"
#include "chickcall/errors.hpp"
#include "chickcall/pipeline.hpp"
#include "common/synth.hpp"

using namespace chickcall;
namespace fs = std::filesystem;

namespace {

struct TempTree {
    fs::path root;
    explicit TempTree(const std::string& name) {
        root = fs::temp_directory_path() / "chickcall_tests" / name;
        fs::remove_all(root);
        fs::create_directories(root / "wavs");
        fs::create_directories(root / "out");
    }
    fs::path wavs() const { return root / "wavs"; }
    fs::path out() const { return root / "out"; }
};

PipelineConfig base_config(const TempTree& tree) {
    PipelineConfig config;
    config.input_dir = tree.wavs();
    config.output_dir = tree.out();
    config.clustering.seed = 42;
    config.clustering.k_max = 6;
    config.jobs = 2;
    return config;
}

// Small corpora: a few chirp files plus ground-truth segments.
std::vector<CallSegment> write_corpus(const TempTree& tree, int n_files, int calls_per_file,
                                      std::uint64_t seed) {
    std::vector<CallSegment> truth;
    for (int f = 0; f < n_files; ++f) {
        const std::string id = "rec_" + std::to_string(f);
        auto corpus = synth::chirp_corpus(static_cast<std::size_t>(calls_per_file),
                                          1.2 * calls_per_file, 44100.0, seed + 100 * f,
                                          0.01, 0.6, id);
        save_wav(tree.wavs() / (id + ".wav"), corpus.clip);
        truth.insert(truth.end(), corpus.truth.begin(), corpus.truth.end());
    }
    return truth;
}

}  // namespace

TEST_CASE("cmd_detect over a directory of synthetic files") {
    TempTree tree("detect");
    write_corpus(tree, 3, 4, 7);

    RunReport report;
    const int code = cmd_detect(base_config(tree), &report);
    CHECK(code == kExitOk);
    CHECK(report.calls_per_file.size() == 3);

    const auto segments = read_segments_csv(tree.out() / artifacts::kSegments);
    CHECK(segments.size() >= 9);  // most of the 12 planted calls
    CHECK(fs::exists(tree.out() / artifacts::kRunReport));

    SUBCASE("deterministic across reruns") {
        const auto first = sha256_file(tree.out() / artifacts::kSegments);
        cmd_detect(base_config(tree), nullptr);
        CHECK(sha256_file(tree.out() / artifacts::kSegments) == first);
    }
}

TEST_CASE("cmd_detect: corrupt file is partial, empty dir is config error") {
    TempTree tree("detect_partial");
    write_corpus(tree, 2, 3, 9);
    std::ofstream(tree.wavs() / "broken.wav") << "not a wav";

    RunReport report;
    const int code = cmd_detect(base_config(tree), &report);
    CHECK(code == kExitPartial);
    REQUIRE(report.failed_files.size() == 1);
    CHECK(report.failed_files[0].find("broken") != std::string::npos);

    TempTree empty("detect_empty");
    CHECK_THROWS_AS(cmd_detect(base_config(empty), nullptr), ConfigError);
}

TEST_CASE("cmd_evaluate against annotations") {
    TempTree tree("evaluate");
    const auto truth = write_corpus(tree, 2, 4, 11);
    auto config = base_config(tree);
    REQUIRE(cmd_detect(config, nullptr) == kExitOk);

    SUBCASE("self-evaluation scores 1.0") {
        // Use the detector output itself as the annotation.
        fs::copy_file(tree.out() / artifacts::kSegments, tree.root / "ann.csv");
        config.annotation_csv = tree.root / "ann.csv";
        RunReport report;
        CHECK(cmd_evaluate(config, &report) == kExitOk);
        const auto table = csv::read(tree.out() / artifacts::kEvalSummary);
        REQUIRE(table.rows.size() == 2);
        for (const auto& row : table.rows) {
            CHECK(csv::parse_double(row[1], "f1") == doctest::Approx(1.0));
            CHECK(csv::parse_double(row[2], "precision") == doctest::Approx(1.0));
        }
    }

    SUBCASE("true annotations score well and mismatches are listed") {
        auto annotated = truth;
        annotated.push_back({0.5, 0.7, "ghost_file"});
        write_segments_csv(tree.root / "ann.csv", annotated);
        config.annotation_csv = tree.root / "ann.csv";
        RunReport report;
        CHECK(cmd_evaluate(config, &report) == kExitOk);
        const auto table = csv::read(tree.out() / artifacts::kEvalSummary);
        CHECK(csv::parse_double(table.rows[0][1], "onset f1") > 0.8);
        bool listed = false;
        for (const auto& note : report.notes)
            listed |= note.find("ghost_file") != std::string::npos;
        CHECK(listed);
    }

    SUBCASE("empty predictions score zero") {
        write_segments_csv(tree.out() / artifacts::kSegments, {});
        write_segments_csv(tree.root / "ann.csv", truth);
        config.annotation_csv = tree.root / "ann.csv";
        CHECK(cmd_evaluate(config, nullptr) == kExitOk);
        const auto table = csv::read(tree.out() / artifacts::kEvalSummary);
        // No overlapping files at all: weighted metrics default to 0.
        CHECK(csv::parse_double(table.rows[0][1], "f1") == doctest::Approx(0.0));
    }
}

TEST_CASE("full pipeline: manifest, determinism, select stage") {
    TempTree tree("pipeline");
    write_corpus(tree, 3, 5, 21);
    // Metadata: two conditions across the three recordings.
    std::ofstream(tree.root / "meta.csv")
        << "source_id,chick_id,condition\nrec_0,c0,control\nrec_1,c1,vpa\nrec_2,c2,control\n";

    auto config = base_config(tree);
    config.metadata_csv = tree.root / "meta.csv";
    config.analysis.session_len_s = 6.0;
    config.analysis.bin_len_s = 1.0;
    config.clustering.report_k = 2;
    config.clustering.k_max = 5;

    RunReport report;
    const int code = cmd_pipeline(config, &report);
    CHECK(code == kExitOk);

    for (const char* artifact :
         {artifacts::kSegments, artifacts::kFeatures, artifacts::kAssignments,
          artifacts::kValidity, artifacts::kRecommendations, artifacts::kRepresentatives,
          artifacts::kDendrogram, artifacts::kCorrelation, artifacts::kVif,
          artifacts::kPruningAudit, artifacts::kBinnedCounts, artifacts::kClusterSummary,
          artifacts::kManifest})
        CHECK(fs::exists(tree.out() / artifact));

    SUBCASE("manifest lists schemas and hashes") {
        std::ifstream in(tree.out() / artifacts::kManifest);
        std::string manifest((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
        CHECK(manifest.find("\"columns\"") != std::string::npos);
        CHECK(manifest.find("\"sha256\"") != std::string::npos);
        CHECK(manifest.find("segments.csv") != std::string::npos);
    }

    SUBCASE("rerun with the same seed is byte-identical on CSVs") {
        std::map<std::string, std::string> first;
        for (const auto& entry : fs::directory_iterator(tree.out()))
            if (entry.path().extension() == ".csv")
                first[entry.path().filename().string()] = sha256_file(entry.path());
        TempTree tree2("pipeline_rerun");
        fs::remove_all(tree2.wavs());
        fs::copy(tree.wavs(), tree2.wavs(), fs::copy_options::recursive);
        auto config2 = config;
        config2.input_dir = tree2.wavs();
        config2.output_dir = tree2.out();
        REQUIRE(cmd_pipeline(config2, nullptr) == kExitOk);
        for (const auto& [name, hash] : first)
            CHECK(sha256_file(tree2.out() / name) == hash);
    }
}

TEST_CASE("cmd_select without metadata is a config error") {
    TempTree tree("select_noconfig");
    auto config = base_config(tree);
    CHECK_THROWS_AS(cmd_select(config, nullptr), ConfigError);
    config.metadata_csv = tree.root / "nope.csv";
    CHECK_THROWS_AS(cmd_select(config, nullptr), ConfigError);
}

TEST_CASE("cli binary: detect + evaluate round trip") {
    TempTree tree("cli");
    write_corpus(tree, 2, 3, 33);
    const std::string cli = CHICKCALL_CLI_PATH;
    const std::string detect_cmd = cli + " detect -i " + tree.wavs().string() + " -o " +
                                   tree.out().string() + " -j 1 2>/dev/null";
    REQUIRE(std::system(detect_cmd.c_str()) == 0);
    CHECK(fs::exists(tree.out() / artifacts::kSegments));

    fs::copy_file(tree.out() / artifacts::kSegments, tree.root / "ann.csv");
    const std::string eval_cmd = cli + " evaluate -i " + tree.wavs().string() + " -o " +
                                 tree.out().string() + " --annotation-csv " +
                                 (tree.root / "ann.csv").string() + " 2>/dev/null";
    REQUIRE(std::system(eval_cmd.c_str()) == 0);
    CHECK(fs::exists(tree.out() / artifacts::kEvalSummary));

    // Config errors exit with code 2.
    const std::string bad = cli + " detect -o " + tree.out().string() + " 2>/dev/null";
    const int status = std::system(bad.c_str());
    CHECK(WEXITSTATUS(status) == 2);
}

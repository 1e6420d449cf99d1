#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "chickcall/config.hpp"
#include "chickcall/csv.hpp"
#include "chickcall/errors.hpp"
#include "chickcall/pipeline.hpp"

using namespace chickcall;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "chickcall_tests";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("csv round trip with quoting") {
    const auto path = temp_file("quoted.csv");
    csv::write(path, {"name", "value"},
               {{"plain", "1.5"}, {"with,comma", "2"}, {"with\"quote", "3"}});
    const auto table = csv::read(path);
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows[1][0] == "with,comma");
    CHECK(table.rows[2][0] == "with\"quote");
    CHECK(table.column("value").value() == 1);
    CHECK(!table.column("nope").has_value());
}

TEST_CASE("csv errors") {
    CHECK_THROWS_AS(csv::read(temp_file("missing.csv")), IoError);

    const auto ragged = temp_file("ragged.csv");
    std::ofstream(ragged) << "a,b\n1,2\n3\n";
    CHECK_THROWS_AS(csv::read(ragged), IoError);

    const auto ok = temp_file("ok.csv");
    std::ofstream(ok) << "a,b\n1,2\n";
    const auto table = csv::read(ok);
    CHECK_THROWS_AS(csv::require_columns(table, {"a", "missing_col"}, "test"), IoError);
}

TEST_CASE("number formatting") {
    CHECK(csv::format_time(1.2345678) == "1.234568");
    CHECK(csv::format_time(0.0) == "0.000000");
    CHECK(csv::format_value(std::optional<double>{}) == "");
    CHECK(csv::parse_optional("", "ctx") == std::nullopt);
    CHECK(*csv::parse_optional("2.5", "ctx") == 2.5);
    CHECK_THROWS_AS(csv::parse_double("abc", "ctx"), IoError);
}

TEST_CASE("segments/features/assignments round trips") {
    const std::vector<CallSegment> segments = {{0.5, 0.75, "rec_a"}, {1.0, 1.2, "rec_b"}};
    const auto spath = temp_file("segments.csv");
    write_segments_csv(spath, segments);
    const auto back = read_segments_csv(spath);
    REQUIRE(back.size() == 2);
    CHECK(back[0].source_id == "rec_a");
    CHECK(back[0].onset_s == doctest::Approx(0.5));
    CHECK(back[1].offset_s == doctest::Approx(1.2));

    FeatureRow row;
    row.segment = segments[0];
    row.values.assign(CallFeatureVector::n_features, std::optional<double>{1.25});
    row.values[7] = std::nullopt;  // one explicit null survives the trip
    const auto fpath = temp_file("features.csv");
    write_features_csv(fpath, {row});
    const auto frows = read_features_csv(fpath);
    REQUIRE(frows.size() == 1);
    CHECK(!frows[0].values[7].has_value());
    CHECK(*frows[0].values[0] == doctest::Approx(1.25));

    const auto apath = temp_file("assignments.csv");
    write_assignments_csv(apath, {{segments[0], 1}, {segments[1], -1}});
    const auto arows = read_assignments_csv(apath);
    REQUIRE(arows.size() == 2);
    CHECK(arows[0].cluster == 1);
    CHECK(arows[1].cluster == -1);
}

TEST_CASE("metadata csv") {
    const auto path = temp_file("meta.csv");
    std::ofstream(path) << "source_id,chick_id,condition\nrec_a,c01,control\nrec_b,c02,vpa\n";
    const auto groups = read_metadata_csv(path);
    REQUIRE(groups.size() == 2);
    CHECK(groups[1].chick_id == "c02");
    CHECK(groups[1].condition == "vpa");
}

TEST_CASE("config parsing") {
    SUBCASE("defaults derive the F0 band from the filter band") {
        const auto config = parse_config(R"({
            "input_dir": "in", "output_dir": "out",
            "band": {"low_hz": 2000, "high_hz": 12600},
            "clustering": {"seed": 42}
        })");
        CHECK(config.features.pyin.fmin_hz == doctest::Approx(2000.0));
        CHECK(config.features.pyin.fmax_hz == doctest::Approx(6300.0));
        CHECK(config.features.centroid_high_hz == doctest::Approx(12600.0));
        CHECK(config.detection.stft.window_len == 2048);
        CHECK(config.detection.offset_method == OffsetMethod::first_diff);
        CHECK(config.clustering.k_max == 10);
    }
    SUBCASE("unknown keys are rejected") {
        CHECK_THROWS_AS(parse_config(R"({"input_dirr": "x"})"), ConfigError);
        CHECK_THROWS_AS(
            parse_config(R"({"detection": {"window": 2048}})"), ConfigError);
    }
    SUBCASE("stochastic methods demand a seed") {
        CHECK_THROWS_AS(parse_config(R"({
            "clustering": {"methods": ["kmeans"]}
        })"),
                        ConfigError);
        // HAC-only needs no seed.
        const auto config = parse_config(R"({
            "clustering": {"methods": ["hac_ward"]}
        })");
        CHECK(!config.clustering.seed.has_value());
    }
    SUBCASE("dbscan demands explicit eps/min_pts") {
        CHECK_THROWS_AS(parse_config(R"({
            "clustering": {"methods": ["dbscan"]}
        })"),
                        ConfigError);
        const auto config = parse_config(R"({
            "clustering": {"methods": ["dbscan"], "dbscan": {"eps": 1.5, "min_pts": 4}}
        })");
        CHECK(*config.clustering.dbscan_eps == doctest::Approx(1.5));
    }
    SUBCASE("override keep must belong to the pair") {
        CHECK_THROWS_AS(parse_config(R"({
            "analysis": {"overrides": [{"pair": ["a","b"], "keep": "c"}]}
        })"),
                        ConfigError);
        const auto config = parse_config(R"({
            "analysis": {"overrides": [{"pair": ["duration_s","attack_time_s"],
                                         "keep": "duration_s"}]}
        })");
        CHECK(config.analysis.overrides.at("attack_time_s|duration_s") == "duration_s");
    }
    SUBCASE("bad json reports ConfigError") {
        CHECK_THROWS_AS(parse_config("{nope"), ConfigError);
    }
    SUBCASE("stft hop/window constraints") {
        CHECK_THROWS_AS(parse_config(R"({"detection": {"window_len": 1000}})"), ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"detection": {"hop_len": 4096}})"), ConfigError);
    }
    SUBCASE("config echo parses back") {
        const auto config = parse_config(R"({
            "input_dir": "in", "output_dir": "out", "clustering": {"seed": 7}
        })");
        const auto echoed = parse_config(config_echo(config));
        CHECK(echoed.clustering.seed.value() == 7);
        CHECK(echoed.input_dir == "in");
    }
}

TEST_CASE("sha256 is stable") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

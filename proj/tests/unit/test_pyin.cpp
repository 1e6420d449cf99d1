#include <doctest.h>

#include <algorithm>

#include "chickcall/errors.hpp"
#include "chickcall/pyin.hpp"
#include "common/synth.hpp"

using namespace chickcall;

namespace {

const double kFs = 44100.0;

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

TEST_CASE("estimate_f0: pure 3000 Hz tone") {
    auto clip = synth::make_clip(synth::tone(3000.0, 0.2, kFs, 0.8), kFs);
    const auto track = estimate_f0(clip, PyinParams{});
    REQUIRE(track.times_s.size() >= 2);

    const auto voiced = track.voiced_values();
    const double voiced_frac =
        static_cast<double>(voiced.size()) / static_cast<double>(track.times_s.size());
    CHECK(voiced_frac >= 0.9);
    REQUIRE(!voiced.empty());
    CHECK(std::abs(median_of(voiced) - 3000.0) <= 15.0);
}

TEST_CASE("estimate_f0: white noise stays mostly unvoiced") {
    auto clip = synth::make_clip(synth::white_noise(static_cast<std::size_t>(0.3 * kFs), 5, 0.8),
                                 kFs);
    const auto track = estimate_f0(clip, PyinParams{});
    const double voiced_frac =
        static_cast<double>(track.n_voiced()) / static_cast<double>(track.times_s.size());
    CHECK(voiced_frac < 0.2);
}

TEST_CASE("estimate_f0: rising chirp tracks monotonically") {
    auto clip = synth::make_clip(synth::chirp(3000.0, 3500.0, 0.25, kFs, 0.8), kFs);
    const auto track = estimate_f0(clip, PyinParams{});
    const auto voiced = track.voiced_values();
    REQUIRE(voiced.size() >= 5);

    double worst_drop = 0.0;
    for (std::size_t i = 1; i < voiced.size(); ++i)
        worst_drop = std::min(worst_drop, voiced[i] - voiced[i - 1]);
    CHECK(worst_drop >= -35.0);  // ~1% jitter allowance on a rising track
    CHECK(voiced.back() - voiced.front() > 300.0);
}

TEST_CASE("estimate_f0: track values stay inside the search band") {
    auto clip = synth::make_clip(synth::chirp(2500.0, 5500.0, 0.3, kFs, 0.6), kFs);
    PyinParams params;
    params.fmin_hz = 2000.0;
    params.fmax_hz = 6300.0;
    const auto track = estimate_f0(clip, params);
    for (std::size_t i = 0; i < track.voiced.size(); ++i) {
        if (!track.voiced[i]) continue;
        CHECK(track.f0_hz[i] >= params.fmin_hz);
        CHECK(track.f0_hz[i] <= params.fmax_hz);
        CHECK(track.voicing[i] >= 0.0);
        CHECK(track.voicing[i] <= 1.0);
    }
    for (std::size_t i = 1; i < track.times_s.size(); ++i)
        CHECK(track.times_s[i] > track.times_s[i - 1]);
}

TEST_CASE("estimate_f0: segment shorter than two frames throws") {
    auto clip = synth::make_clip(synth::tone(3000.0, 0.04, kFs, 0.5), kFs);  // < 2304 samples
    CHECK_THROWS_AS(estimate_f0(clip, PyinParams{}), FeatureError);
}

TEST_CASE("estimate_f0: invalid band configs throw") {
    auto clip = synth::make_clip(synth::tone(3000.0, 0.2, kFs, 0.5), kFs);
    PyinParams params;
    params.fmin_hz = 6000.0;
    params.fmax_hz = 3000.0;
    CHECK_THROWS_AS(estimate_f0(clip, params), ConfigError);
}

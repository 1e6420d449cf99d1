#include <doctest.h>

#include <random>

#include "chickcall/detection.hpp"
#include "chickcall/errors.hpp"
#include "common/synth.hpp"

using namespace chickcall;

namespace {

const double kFs = 44100.0;

DetectionParams default_params() { return DetectionParams{}; }

}  // namespace

TEST_CASE("hfc_curve: zero clip gives zero curve") {
    auto clip = synth::make_clip(std::vector<double>(8192, 0.0), kFs);
    const auto curve = hfc_curve(clip, StftConfig{});
    CHECK(!curve.empty());
    for (double v : curve) CHECK(v == 0.0);
}

TEST_CASE("hfc_curve: clip shorter than window throws") {
    auto clip = synth::make_clip(std::vector<double>(1024, 0.1), kFs);
    CHECK_THROWS_AS(hfc_curve(clip, StftConfig{}), DetectionError);
}

TEST_CASE("hfc_curve: white noise beats lowpassed noise") {
    auto noise = synth::white_noise(4096, 3, 0.5);
    // FFT oracle: zero everything above fs/8 and invert.
    auto spec = dsp::fft_real(noise);
    const std::size_t cut = noise.size() / 8;
    for (std::size_t k = cut; k <= noise.size() - cut; ++k) spec[k] = 0.0;
    auto lowpassed = dsp::ifft_real(spec);

    StftConfig stft{2048, 512, dsp::WindowFn::hann};
    const auto hfc_noise = hfc_curve(synth::make_clip(noise, kFs), stft);
    const auto hfc_low = hfc_curve(synth::make_clip(lowpassed, kFs), stft);
    for (std::size_t i = 0; i < hfc_noise.size(); ++i) CHECK(hfc_noise[i] > hfc_low[i]);
}

TEST_CASE("hfc_curve: pure tone at bin k0 weights by k0") {
    // Rectangular window + integer-cycle tone: single-line spectrum.
    const std::size_t n = 1024;
    const std::size_t k0 = 64;
    const double freq = static_cast<double>(k0) * kFs / static_cast<double>(n);
    auto clip = synth::make_clip(synth::tone(freq, static_cast<double>(n) / kFs, kFs, 0.5), kFs);
    clip.samples.resize(n);

    StftConfig stft{n, n, dsp::WindowFn::rect};
    const auto curve = hfc_curve(clip, stft);
    REQUIRE(curve.size() == 1);

    const auto mags = dsp::magnitude_spectrum(clip.samples);
    double energy = 0.0;
    for (double m : mags) energy += m * m;
    CHECK(curve[0] == doctest::Approx(static_cast<double>(k0) * energy).epsilon(1e-6));
}

TEST_CASE("pick_onsets") {
    const auto grid = dsp::frame_grid(44100 * 3, 2048, 512, kFs);
    DetectionParams params = default_params();

    SUBCASE("flat curve gives no onsets") {
        std::vector<double> flat(200, 1.0);
        CHECK(pick_onsets(flat, grid, params).empty());
    }

    SUBCASE("single impulse at frame 100") {
        std::vector<double> curve(200, 0.0);
        curve[100] = 5.0;
        const auto onsets = pick_onsets(curve, grid, params);
        REQUIRE(onsets.size() == 1);
        CHECK(onsets[0] == doctest::Approx(grid.center_time(100)).epsilon(1e-12));
    }

    SUBCASE("two peaks 10 ms apart keep only the larger") {
        // 10 ms hop makes consecutive frames 10 ms apart.
        const auto g = dsp::frame_grid(44100 * 3, 1024, 441, kFs);
        std::vector<double> curve(200, 0.0);
        curve[100] = 1.0;
        curve[101] = 2.0;
        params.min_inter_onset_s = 0.05;
        const auto onsets = pick_onsets(curve, g, params);

        // Brute-force oracle: all qualifying local maxima, tallest-first keep.
        REQUIRE(onsets.size() == 1);
        CHECK(onsets[0] == doctest::Approx(g.center_time(101)).epsilon(1e-12));
    }

    SUBCASE("empty curve throws") {
        std::vector<double> empty;
        CHECK_THROWS_AS(pick_onsets(empty, grid, params), DetectionError);
    }
}

TEST_CASE("detect_offset on a rectangular noise burst") {
    // Burst occupying [0.10 s, 0.30 s] in silence.
    std::vector<double> x(static_cast<std::size_t>(0.6 * kFs), 0.0);
    auto burst = synth::white_noise(static_cast<std::size_t>(0.2 * kFs), 11, 0.2);
    synth::mix_at(x, burst, 0.10, kFs);
    auto clip = synth::make_clip(x, kFs);

    DetectionParams params = default_params();
    for (auto method : {OffsetMethod::first_diff, OffsetMethod::local_min}) {
        params.offset_method = method;
        const double offset = detect_offset(clip, 0.10, params);
        CHECK(offset == doctest::Approx(0.30).epsilon(0).scale(1).epsilon(0.08));
        CHECK(std::abs(offset - 0.30) <= 0.02);
    }

    SUBCASE("second_diff also lands near the fall") {
        params.offset_method = OffsetMethod::second_diff;
        const double offset = detect_offset(clip, 0.10, params);
        CHECK(std::abs(offset - 0.30) <= 0.02);
    }

    SUBCASE("burst longer than the window is capped") {
        std::vector<double> y(static_cast<std::size_t>(1.2 * kFs), 0.0);
        auto long_burst = synth::white_noise(static_cast<std::size_t>(0.8 * kFs), 13, 0.2);
        synth::mix_at(y, long_burst, 0.10, kFs);
        params.offset_method = OffsetMethod::first_diff;
        const double offset = detect_offset(synth::make_clip(y, kFs), 0.10, params);
        CHECK(offset > 0.10);
        CHECK(offset <= 0.10 + params.max_call_dur_s + 0.012);  // window cap (frame-center slack)
    }

    SUBCASE("onset at file end throws") {
        CHECK_THROWS_AS(detect_offset(clip, 0.5999, params), DetectionError);
        CHECK_THROWS_AS(detect_offset(clip, 2.0, params), DetectionError);
    }
}

TEST_CASE("segment_calls") {
    SUBCASE("silence gives an empty list") {
        auto clip = synth::make_clip(std::vector<double>(44100, 0.0), kFs);
        CHECK(segment_calls(clip, default_params()).empty());
    }

    SUBCASE("five chirps at known times, high SNR") {
        const auto corpus = synth::chirp_corpus(5, 5.0, kFs, 21, 0.005, 0.7);
        const auto clip = normalize_max_loudness(corpus.clip);
        const auto segments = segment_calls(clip, default_params());
        REQUIRE(segments.size() == 5);
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(std::abs(segments[i].onset_s - corpus.truth[i].onset_s) <= 0.05);
    }

    SUBCASE("emitted segments always satisfy the invariants (property)") {
        std::mt19937_64 rng(99);
        for (int trial = 0; trial < 10; ++trial) {
            const auto corpus = synth::chirp_corpus(4 + trial % 5, 4.0, kFs, 1000 + trial,
                                                    0.01 + 0.01 * (trial % 3), 0.6);
            const auto clip = normalize_max_loudness(corpus.clip);
            DetectionParams params = default_params();
            params.offset_method =
                trial % 3 == 0 ? OffsetMethod::local_min
                               : (trial % 3 == 1 ? OffsetMethod::first_diff
                                                 : OffsetMethod::second_diff);
            const auto segments = segment_calls(clip, params);
            for (std::size_t i = 0; i < segments.size(); ++i) {
                CHECK(segments[i].offset_s > segments[i].onset_s);
                CHECK(segments[i].duration_s() <= params.max_call_dur_s + 0.012);
                if (i > 0) {
                    CHECK(segments[i].onset_s >= segments[i - 1].onset_s);
                    CHECK(segments[i - 1].offset_s <= segments[i].onset_s + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("HFC invariances") {
    const auto corpus = synth::chirp_corpus(3, 2.0, kFs, 5, 0.01, 0.5);
    StftConfig stft{};
    const auto base = hfc_curve(corpus.clip, stft);

    SUBCASE("polarity flip leaves HFC unchanged") {
        auto flipped = corpus.clip;
        for (double& v : flipped.samples) v = -v;
        const auto curve = hfc_curve(flipped, stft);
        for (std::size_t i = 0; i < base.size(); ++i)
            CHECK(curve[i] == doctest::Approx(base[i]).epsilon(1e-9));
    }

    SUBCASE("scaling by a > 0 scales HFC by a^2 and keeps onsets fixed") {
        const double a = 0.37;
        auto scaled = corpus.clip;
        for (double& v : scaled.samples) v *= a;
        const auto curve = hfc_curve(scaled, stft);
        for (std::size_t i = 0; i < base.size(); ++i)
            CHECK(curve[i] == doctest::Approx(a * a * base[i]).epsilon(1e-9));

        const auto grid = dsp::frame_grid(corpus.clip.samples.size(), stft.window_len,
                                          stft.hop_len, kFs);
        const auto onsets_base = pick_onsets(onset_novelty(base), grid, default_params());
        const auto onsets_scaled = pick_onsets(onset_novelty(curve), grid, default_params());
        CHECK(onsets_base == onsets_scaled);
    }
}

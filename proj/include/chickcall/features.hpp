#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "chickcall/audio.hpp"
#include "chickcall/detection.hpp"
#include "chickcall/pyin.hpp"

namespace chickcall {

struct FeatureParams {
    std::size_t frame_len = 2048;  // shared framing for F0/harmonics/RMS/centroid
    std::size_t hop_len = 256;
    dsp::WindowFn window_fn = dsp::WindowFn::hann;
    PyinParams pyin;                       // frame/hop mirrored from above on use
    double centroid_low_hz = 2000.0;
    double centroid_high_hz = 12600.0;
    // A frame is excluded from the centroid when the band holds less than
    // this share of the spectral magnitude (catches out-of-band-only frames).
    double centroid_band_floor = 1e-3;
};

/// Per-voiced-frame harmonic magnitudes: spectra read at the FFT bins nearest
/// F0, 2*F0 and 3*F0, each divided by the sample rate.
struct HarmonicTrack {
    std::vector<double> times_s;
    std::vector<double> f1_hz;    // 2 * F0
    std::vector<double> f2_hz;    // 3 * F0
    std::vector<double> mag_f0;
    std::vector<double> mag_f1;
    std::vector<double> mag_f2;
};

/// |analytic signal| per sample plus the attack anchors.
struct EnvelopeTrack {
    std::vector<double> env;
    double t_onset_s = 0.0;  // segment start (relative)
    double t_peak_s = 0.0;   // envelope argmax (relative)

    double onset_value() const { return env.empty() ? 0.0 : env.front(); }
    double peak_value() const;
};

struct CallTracks {
    F0Track f0;
    HarmonicTrack harmonics;
    std::vector<double> rms;
    std::vector<double> centroid;  // valid frames only
    EnvelopeTrack envelope;
};

/// The 20 per-call descriptors. Fields that cannot be computed (too few
/// voiced frames, zero attack time, zero denominators) stay disengaged and
/// serialize as explicit nulls.
struct CallFeatureVector {
    std::optional<double> duration_s;
    std::optional<double> attack_time_s;
    std::optional<double> envelope_slope;
    std::optional<double> rms_mean;
    std::optional<double> rms_std;
    std::optional<double> f0_mean_hz;
    std::optional<double> f0_std_hz;
    std::optional<double> f0_skewness;
    std::optional<double> f0_kurtosis;
    std::optional<double> f0_bandwidth_hz;
    std::optional<double> f0_diff1_mean_hz;
    std::optional<double> f0_slope_hz_per_s;
    std::optional<double> f0_mag_mean;
    std::optional<double> f1_mag_mean;
    std::optional<double> f2_mag_mean;
    std::optional<double> ratio_f0_f1;
    std::optional<double> ratio_f0_f2;
    std::optional<double> spec_centroid_mean_hz;
    std::optional<double> spec_centroid_std_hz;
    std::optional<double> attack_magnitude;

    static constexpr std::size_t n_features = 20;
    static const std::array<std::string, n_features>& names();
    std::array<std::optional<double>, n_features> values() const;
    bool complete() const;
};

HarmonicTrack harmonic_magnitudes(const AudioClip& segment, const F0Track& f0,
                                  const FeatureParams& params);

std::vector<double> rms_track(const AudioClip& segment, const FeatureParams& params);

std::vector<double> spectral_centroid_track(const AudioClip& segment,
                                            const FeatureParams& params);

EnvelopeTrack envelope(const AudioClip& segment);

/// All 20 descriptors from precomputed tracks (pure; no audio access).
CallFeatureVector compute_call_features(const CallSegment& segment, const CallTracks& tracks);

/// Slice a clip to [onset, offset) by sample index.
AudioClip slice_segment(const AudioClip& clip, const CallSegment& segment);

CallTracks compute_tracks(const AudioClip& segment_audio, const FeatureParams& params);

struct CallFeatures {
    CallSegment segment;
    CallFeatureVector features;
};

/// Per-call track extraction + descriptors over every segment of a clip.
/// Per-call failures yield a row of nulls and a warning, never a run failure.
std::vector<CallFeatures> extract_features(const AudioClip& clip,
                                           const std::vector<CallSegment>& segments,
                                           const FeatureParams& params,
                                           std::vector<std::string>* warnings = nullptr);

}  // namespace chickcall

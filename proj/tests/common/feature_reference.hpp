#pragma once

// Straight-from-equation reference for the 20 per-call descriptors, written
// as direct formula transcriptions over raw tracks. Kept independent of the
// library implementation on purpose.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "chickcall/features.hpp"
#include "common/synth.hpp"

namespace feature_ref {

using chickcall::CallFeatureVector;
using chickcall::CallSegment;
using chickcall::CallTracks;

inline CallFeatureVector reference(const CallSegment& segment, const CallTracks& tracks) {
    CallFeatureVector out;

    // T = T_end - T_start
    out.duration_s = segment.offset_s - segment.onset_s;

    // Envelope anchors.
    if (!tracks.envelope.env.empty()) {
        double peak = tracks.envelope.env[0];
        for (double v : tracks.envelope.env) peak = std::max(peak, v);
        const double x_onset = tracks.envelope.env.front();
        const double t_attack = tracks.envelope.t_peak_s - tracks.envelope.t_onset_s;
        out.attack_time_s = t_attack;                 // t_peak - t_onset
        out.attack_magnitude = peak - x_onset;        // |x(t_peak)| - |x(t_onset)|
        if (t_attack > 0.0) out.envelope_slope = (peak - x_onset) / t_attack;
    }

    // RMS mean / std (N-1).
    if (!tracks.rms.empty()) {
        double mean = 0.0;
        for (double v : tracks.rms) mean += v;
        mean /= static_cast<double>(tracks.rms.size());
        out.rms_mean = mean;
        if (tracks.rms.size() >= 2) {
            double acc = 0.0;
            for (double v : tracks.rms) acc += (v - mean) * (v - mean);
            out.rms_std = std::sqrt(acc / static_cast<double>(tracks.rms.size() - 1));
        }
    }

    // F0 statistics over voiced frames.
    std::vector<double> f0;
    std::vector<double> f0_times;
    for (std::size_t i = 0; i < tracks.f0.voiced.size(); ++i) {
        if (!tracks.f0.voiced[i]) continue;
        f0.push_back(tracks.f0.f0_hz[i]);
        f0_times.push_back(tracks.f0.times_s[i]);
    }
    if (f0.size() >= 2) {
        const double n = static_cast<double>(f0.size());
        double mean = 0.0;
        for (double v : f0) mean += v;
        mean /= n;
        out.f0_mean_hz = mean;

        double ss = 0.0;
        for (double v : f0) ss += (v - mean) * (v - mean);
        out.f0_std_hz = std::sqrt(ss / (n - 1.0));

        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (double v : f0) {
            m2 += std::pow(v - mean, 2.0);
            m3 += std::pow(v - mean, 3.0);
            m4 += std::pow(v - mean, 4.0);
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        if (m2 > 0.0) {
            out.f0_skewness = m3 / std::pow(std::sqrt(m2), 3.0);
            out.f0_kurtosis = m4 / std::pow(std::sqrt(m2), 4.0) - 3.0;
        }

        double lo = f0[0], hi = f0[0];
        for (double v : f0) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        out.f0_bandwidth_hz = hi - lo;

        double diff = 0.0;
        for (std::size_t i = 1; i < f0.size(); ++i) diff += f0[i] - f0[i - 1];
        out.f0_diff1_mean_hz = diff / (n - 1.0);

        const double t_attack = tracks.envelope.t_peak_s - tracks.envelope.t_onset_s;
        if (t_attack > 0.0) {
            // F0 at the voiced frames nearest the onset and the envelope peak.
            std::size_t on = 0, pk = 0;
            for (std::size_t i = 0; i < f0_times.size(); ++i) {
                if (std::abs(f0_times[i] - tracks.envelope.t_onset_s) <
                    std::abs(f0_times[on] - tracks.envelope.t_onset_s))
                    on = i;
                if (std::abs(f0_times[i] - tracks.envelope.t_peak_s) <
                    std::abs(f0_times[pk] - tracks.envelope.t_peak_s))
                    pk = i;
            }
            out.f0_slope_hz_per_s = (f0[pk] - f0[on]) / t_attack;
        }
    }

    // Harmonic magnitude means + ratios.
    if (!tracks.harmonics.mag_f0.empty()) {
        const double n = static_cast<double>(tracks.harmonics.mag_f0.size());
        double m0 = 0.0, m1 = 0.0, m2h = 0.0;
        for (double v : tracks.harmonics.mag_f0) m0 += v;
        for (double v : tracks.harmonics.mag_f1) m1 += v;
        for (double v : tracks.harmonics.mag_f2) m2h += v;
        m0 /= n;
        m1 /= n;
        m2h /= n;
        out.f0_mag_mean = m0;
        out.f1_mag_mean = m1;
        out.f2_mag_mean = m2h;
        if (m1 > 0.0) out.ratio_f0_f1 = m0 / m1;
        if (m2h > 0.0) out.ratio_f0_f2 = m0 / m2h;
    }

    // Spectral centroid mean / std (N-1) over valid frames.
    if (!tracks.centroid.empty()) {
        double mean = 0.0;
        for (double v : tracks.centroid) mean += v;
        mean /= static_cast<double>(tracks.centroid.size());
        out.spec_centroid_mean_hz = mean;
        if (tracks.centroid.size() >= 2) {
            double acc = 0.0;
            for (double v : tracks.centroid) acc += (v - mean) * (v - mean);
            out.spec_centroid_std_hz =
                std::sqrt(acc / static_cast<double>(tracks.centroid.size() - 1));
        }
    }
    return out;
}

// Random synthetic tracks (not audio): exercises the descriptor algebra over
// arbitrary voiced patterns, magnitudes and envelopes.
inline std::pair<CallSegment, CallTracks> random_tracks(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto u = [&] { return synth::uniform01(rng); };

    CallSegment segment;
    segment.source_id = "ref";
    segment.onset_s = 10.0 * u();
    segment.offset_s = segment.onset_s + 0.05 + 0.5 * u();

    CallTracks tracks;
    const int n_frames = 3 + static_cast<int>(u() * 40);
    const double hop_s = 0.005;
    bool any_voiced = false;
    for (int i = 0; i < n_frames; ++i) {
        tracks.f0.times_s.push_back(static_cast<double>(i) * hop_s);
        const bool voiced = u() < 0.8;
        any_voiced |= voiced;
        tracks.f0.voiced.push_back(voiced);
        tracks.f0.f0_hz.push_back(voiced ? 2000.0 + 4000.0 * u() : 0.0);
        tracks.f0.voicing.push_back(voiced ? 0.5 + 0.5 * u() : 0.3 * u());
    }
    for (std::size_t i = 0; i < tracks.f0.voiced.size(); ++i) {
        if (!tracks.f0.voiced[i]) continue;
        tracks.harmonics.times_s.push_back(tracks.f0.times_s[i]);
        tracks.harmonics.f1_hz.push_back(2.0 * tracks.f0.f0_hz[i]);
        tracks.harmonics.f2_hz.push_back(3.0 * tracks.f0.f0_hz[i]);
        tracks.harmonics.mag_f0.push_back(u());
        tracks.harmonics.mag_f1.push_back(u());
        tracks.harmonics.mag_f2.push_back(u());
    }
    const int n_rms = 1 + static_cast<int>(u() * 30);
    for (int i = 0; i < n_rms; ++i) tracks.rms.push_back(u());
    const int n_cent = static_cast<int>(u() * 20);
    for (int i = 0; i < n_cent; ++i) tracks.centroid.push_back(2000.0 + 10000.0 * u());

    const int n_env = 16 + static_cast<int>(u() * 400);
    tracks.envelope.env.resize(static_cast<std::size_t>(n_env));
    for (auto& v : tracks.envelope.env) v = u();
    std::size_t peak = 0;
    for (std::size_t i_env = 0; i_env < tracks.envelope.env.size(); ++i_env)
        if (tracks.envelope.env[i_env] > tracks.envelope.env[peak]) peak = i_env;
    tracks.envelope.t_onset_s = 0.0;
    tracks.envelope.t_peak_s = static_cast<double>(peak) / 44100.0;
    return {segment, tracks};
}

}  // namespace feature_ref

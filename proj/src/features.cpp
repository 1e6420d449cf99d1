#include "chickcall/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "chickcall/errors.hpp"

namespace chickcall {

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (N-1), as in the descriptor table.
std::optional<double> sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return std::nullopt;
    const double mu = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::size_t nearest_bin(double freq_hz, double fs, std::size_t n_fft) {
    const double raw = freq_hz * static_cast<double>(n_fft) / fs;
    const auto bin = static_cast<std::size_t>(std::lround(std::max(0.0, raw)));
    return std::min(bin, n_fft / 2);
}

}  // namespace

const std::array<std::string, CallFeatureVector::n_features>& CallFeatureVector::names() {
    static const std::array<std::string, n_features> kNames = {
        "duration_s",       "attack_time_s",        "envelope_slope",
        "rms_mean",         "rms_std",              "f0_mean_hz",
        "f0_std_hz",        "f0_skewness",          "f0_kurtosis",
        "f0_bandwidth_hz",  "f0_diff1_mean_hz",     "f0_slope_hz_per_s",
        "f0_mag_mean",      "f1_mag_mean",          "f2_mag_mean",
        "ratio_f0_f1",      "ratio_f0_f2",          "spec_centroid_mean_hz",
        "spec_centroid_std_hz", "attack_magnitude"};
    return kNames;
}

std::array<std::optional<double>, CallFeatureVector::n_features> CallFeatureVector::values()
    const {
    return {duration_s,      attack_time_s,   envelope_slope,  rms_mean,
            rms_std,         f0_mean_hz,      f0_std_hz,       f0_skewness,
            f0_kurtosis,     f0_bandwidth_hz, f0_diff1_mean_hz, f0_slope_hz_per_s,
            f0_mag_mean,     f1_mag_mean,     f2_mag_mean,     ratio_f0_f1,
            ratio_f0_f2,     spec_centroid_mean_hz, spec_centroid_std_hz, attack_magnitude};
}

bool CallFeatureVector::complete() const {
    const auto vals = values();
    return std::all_of(vals.begin(), vals.end(),
                       [](const auto& v) { return v.has_value(); });
}

double EnvelopeTrack::peak_value() const {
    if (env.empty()) return 0.0;
    return *std::max_element(env.begin(), env.end());
}

HarmonicTrack harmonic_magnitudes(const AudioClip& segment, const F0Track& f0,
                                  const FeatureParams& params) {
    HarmonicTrack track;
    const double fs = segment.sample_rate;
    const auto grid =
        dsp::frame_grid(segment.samples.size(), params.frame_len, params.hop_len, fs);
    const auto window = dsp::make_window(params.window_fn, params.frame_len);

    std::vector<double> frame(params.frame_len);
    const std::size_t n = std::min<std::size_t>(grid.n_frames, f0.voiced.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!f0.voiced[i]) continue;
        const double* src = segment.samples.data() + i * params.hop_len;
        for (std::size_t j = 0; j < params.frame_len; ++j) frame[j] = src[j] * window[j];
        const auto mags = dsp::magnitude_spectrum(frame);

        const double base = f0.f0_hz[i];
        track.times_s.push_back(f0.times_s[i]);
        track.f1_hz.push_back(2.0 * base);
        track.f2_hz.push_back(3.0 * base);
        track.mag_f0.push_back(mags[nearest_bin(base, fs, params.frame_len)] / fs);
        track.mag_f1.push_back(mags[nearest_bin(2.0 * base, fs, params.frame_len)] / fs);
        track.mag_f2.push_back(mags[nearest_bin(3.0 * base, fs, params.frame_len)] / fs);
    }
    return track;
}

std::vector<double> rms_track(const AudioClip& segment, const FeatureParams& params) {
    const auto grid = dsp::frame_grid(segment.samples.size(), params.frame_len,
                                      params.hop_len, segment.sample_rate);
    return dsp::rms_frames(segment.samples, grid);
}

std::vector<double> spectral_centroid_track(const AudioClip& segment,
                                            const FeatureParams& params) {
    const double fs = segment.sample_rate;
    const auto grid =
        dsp::frame_grid(segment.samples.size(), params.frame_len, params.hop_len, fs);
    const auto window = dsp::make_window(params.window_fn, params.frame_len);
    const double bin_hz = fs / static_cast<double>(params.frame_len);

    std::vector<double> centroids;
    std::vector<double> frame(params.frame_len);
    for (std::size_t i = 0; i < grid.n_frames; ++i) {
        const double* src = segment.samples.data() + i * params.hop_len;
        for (std::size_t j = 0; j < params.frame_len; ++j) frame[j] = src[j] * window[j];
        const auto mags = dsp::magnitude_spectrum(frame);

        double total = 0.0, band = 0.0, weighted = 0.0;
        for (std::size_t k = 0; k < mags.size(); ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            total += mags[k];
            if (f >= params.centroid_low_hz && f <= params.centroid_high_hz) {
                band += mags[k];
                weighted += f * mags[k];
            }
        }
        if (band <= 0.0 || band <= params.centroid_band_floor * total) continue;
        centroids.push_back(weighted / band);
    }
    return centroids;
}

EnvelopeTrack envelope(const AudioClip& segment) {
    EnvelopeTrack track;
    track.env = dsp::hilbert_envelope(segment.samples);
    track.t_onset_s = 0.0;
    if (!track.env.empty()) {
        const auto peak = std::max_element(track.env.begin(), track.env.end());
        track.t_peak_s = static_cast<double>(std::distance(track.env.begin(), peak)) /
                         segment.sample_rate;
    }
    return track;
}

CallFeatureVector compute_call_features(const CallSegment& segment, const CallTracks& tracks) {
    CallFeatureVector out;
    out.duration_s = segment.offset_s - segment.onset_s;

    // Envelope anchors: onset at segment start, peak at envelope argmax.
    if (!tracks.envelope.env.empty()) {
        const double attack = tracks.envelope.t_peak_s - tracks.envelope.t_onset_s;
        const double rise = tracks.envelope.peak_value() - tracks.envelope.onset_value();
        out.attack_time_s = attack;
        out.attack_magnitude = rise;
        if (attack > 0.0) out.envelope_slope = rise / attack;
    }

    if (!tracks.rms.empty()) {
        out.rms_mean = mean_of(tracks.rms);
        out.rms_std = sample_std(tracks.rms);
    }

    const auto f0 = tracks.f0.voiced_values();
    if (f0.size() >= 2) {
        const double mu = mean_of(f0);
        out.f0_mean_hz = mu;
        out.f0_std_hz = sample_std(f0);
        out.f0_bandwidth_hz =
            *std::max_element(f0.begin(), f0.end()) - *std::min_element(f0.begin(), f0.end());

        // Population central moments, as written in the descriptor table.
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (double v : f0) {
            const double d = v - mu;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        const double n = static_cast<double>(f0.size());
        m2 /= n;
        m3 /= n;
        m4 /= n;
        if (m2 > 0.0) {
            out.f0_skewness = m3 / std::pow(std::sqrt(m2), 3.0);
            out.f0_kurtosis = m4 / (m2 * m2) - 3.0;
        }

        double diff_acc = 0.0;
        for (std::size_t i = 1; i < f0.size(); ++i) diff_acc += f0[i] - f0[i - 1];
        out.f0_diff1_mean_hz = diff_acc / static_cast<double>(f0.size() - 1);

        // Slope from onset to the envelope peak over the attack time.
        const double attack = tracks.envelope.t_peak_s - tracks.envelope.t_onset_s;
        if (attack > 0.0 && !tracks.f0.times_s.empty()) {
            double f0_onset = 0.0, f0_peak = 0.0;
            double best_on = std::numeric_limits<double>::max();
            double best_pk = std::numeric_limits<double>::max();
            for (std::size_t i = 0; i < tracks.f0.times_s.size(); ++i) {
                if (!tracks.f0.voiced[i]) continue;
                const double t = tracks.f0.times_s[i];
                if (std::abs(t - tracks.envelope.t_onset_s) < best_on) {
                    best_on = std::abs(t - tracks.envelope.t_onset_s);
                    f0_onset = tracks.f0.f0_hz[i];
                }
                if (std::abs(t - tracks.envelope.t_peak_s) < best_pk) {
                    best_pk = std::abs(t - tracks.envelope.t_peak_s);
                    f0_peak = tracks.f0.f0_hz[i];
                }
            }
            out.f0_slope_hz_per_s = (f0_peak - f0_onset) / attack;
        }
    }

    if (!tracks.harmonics.mag_f0.empty()) {
        out.f0_mag_mean = mean_of(tracks.harmonics.mag_f0);
        out.f1_mag_mean = mean_of(tracks.harmonics.mag_f1);
        out.f2_mag_mean = mean_of(tracks.harmonics.mag_f2);
        if (*out.f1_mag_mean > 0.0) out.ratio_f0_f1 = *out.f0_mag_mean / *out.f1_mag_mean;
        if (*out.f2_mag_mean > 0.0) out.ratio_f0_f2 = *out.f0_mag_mean / *out.f2_mag_mean;
    }

    if (!tracks.centroid.empty()) {
        out.spec_centroid_mean_hz = mean_of(tracks.centroid);
        out.spec_centroid_std_hz = sample_std(tracks.centroid);
    }
    return out;
}

AudioClip slice_segment(const AudioClip& clip, const CallSegment& segment) {
    const auto n = clip.samples.size();
    auto to_index = [&](double t) {
        const auto i = static_cast<std::ptrdiff_t>(std::llround(t * clip.sample_rate));
        return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
            i, 0, static_cast<std::ptrdiff_t>(n)));
    };
    const std::size_t lo = to_index(segment.onset_s);
    const std::size_t hi = to_index(segment.offset_s);
    if (hi <= lo) throw FeatureError("empty segment slice at " + std::to_string(segment.onset_s));
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.source_id = clip.source_id;
    out.samples.assign(clip.samples.begin() + lo, clip.samples.begin() + hi);
    return out;
}

CallTracks compute_tracks(const AudioClip& segment_audio, const FeatureParams& params) {
    CallTracks tracks;
    PyinParams pyin = params.pyin;
    pyin.frame_len = params.frame_len;
    pyin.hop_len = params.hop_len;
    try {
        tracks.f0 = estimate_f0(segment_audio, pyin);
    } catch (const FeatureError&) {
        // Too short for pitch frames: F0-dependent descriptors stay null.
    }
    tracks.harmonics = harmonic_magnitudes(segment_audio, tracks.f0, params);
    tracks.rms = rms_track(segment_audio, params);
    tracks.centroid = spectral_centroid_track(segment_audio, params);
    tracks.envelope = envelope(segment_audio);
    return tracks;
}

std::vector<CallFeatures> extract_features(const AudioClip& clip,
                                           const std::vector<CallSegment>& segments,
                                           const FeatureParams& params,
                                           std::vector<std::string>* warnings) {
    std::vector<CallFeatures> rows;
    rows.reserve(segments.size());
    for (const auto& seg : segments) {
        CallFeatures row;
        row.segment = seg;
        try {
            const AudioClip audio = slice_segment(clip, seg);
            row.features = compute_call_features(seg, compute_tracks(audio, params));
        } catch (const Error& e) {
            if (warnings)
                warnings->push_back(clip.source_id + ": features failed at " +
                                    std::to_string(seg.onset_s) + "s: " + e.what());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace chickcall

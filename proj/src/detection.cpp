#include "chickcall/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chickcall/errors.hpp"

namespace chickcall {

namespace {

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

// Energy frames for offset search: contiguous RMS at the STFT hop spacing.
// The full STFT window would bias offsets late by ~window/2, which breaks the
// +-20 ms contract on sharp releases.
dsp::FrameGrid energy_grid(const AudioClip& clip, const DetectionParams& params) {
    return dsp::frame_grid(clip.samples.size(), params.stft.hop_len, params.stft.hop_len,
                           clip.sample_rate);
}

std::size_t argmin_earliest(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i < hi; ++i)
        if (v[i] < v[best]) best = i;
    return best;
}

double offset_from_energy(const std::vector<double>& energy, const dsp::FrameGrid& grid,
                          double onset_s, const DetectionParams& params) {
    // Candidate frames strictly after the onset, within the search window.
    std::size_t lo = grid.n_frames, hi = grid.n_frames;
    for (std::size_t i = 0; i < grid.n_frames; ++i) {
        const double t = grid.center_time(i);
        if (lo == grid.n_frames && t > onset_s + 1e-9) lo = i;
        if (t <= onset_s + params.max_call_dur_s + 1e-9) hi = i + 1;
    }
    if (lo >= hi)
        throw DetectionError("empty offset search window at onset " + std::to_string(onset_s));

    switch (params.offset_method) {
        case OffsetMethod::local_min: {
            std::vector<double> window(energy.begin() + lo, energy.begin() + hi);
            const double med = dsp::median(window);
            for (std::size_t i = lo; i < hi; ++i) {
                const bool left_ok = i == 0 || energy[i] <= energy[i - 1];
                const bool right_ok = i + 1 >= hi || energy[i] <= energy[i + 1];
                if (left_ok && right_ok && energy[i] < med) return grid.center_time(i);
            }
            return grid.center_time(argmin_earliest(energy, lo, hi));
        }
        case OffsetMethod::first_diff: {
            if (hi - lo < 2) return grid.center_time(lo);
            // d[i] = e[i+1] - e[i]; the steepest energy fall marks the release.
            std::size_t best = lo;
            double best_d = energy[lo + 1] - energy[lo];
            for (std::size_t i = lo; i + 1 < hi; ++i) {
                const double d = energy[i + 1] - energy[i];
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            return grid.center_time(best);
        }
        case OffsetMethod::second_diff: {
            if (hi - lo < 3) return grid.center_time(hi - 1);
            std::size_t best = lo + 1;
            double best_d = energy[lo] - 2.0 * energy[lo + 1] + energy[lo + 2];
            for (std::size_t i = lo; i + 2 < hi; ++i) {
                const double d = energy[i] - 2.0 * energy[i + 1] + energy[i + 2];
                if (d < best_d) {
                    best_d = d;
                    best = i + 1;
                }
            }
            return grid.center_time(best);
        }
    }
    throw DetectionError("unknown offset method");
}

}  // namespace

void validate_stft(const StftConfig& cfg) {
    if (cfg.hop_len == 0 || cfg.hop_len > cfg.window_len)
        throw ConfigError("stft: 0 < hop_len <= window_len required");
    if (!is_pow2(cfg.window_len))
        throw ConfigError("stft: window_len must be a power of two");
}

OffsetMethod offset_method_from_name(const std::string& name) {
    if (name == "local_min") return OffsetMethod::local_min;
    if (name == "first_diff") return OffsetMethod::first_diff;
    if (name == "second_diff") return OffsetMethod::second_diff;
    throw ConfigError("unknown offset method: " + name);
}

std::string offset_method_name(OffsetMethod m) {
    switch (m) {
        case OffsetMethod::local_min: return "local_min";
        case OffsetMethod::first_diff: return "first_diff";
        case OffsetMethod::second_diff: return "second_diff";
    }
    return "first_diff";
}

std::vector<double> hfc_curve(const AudioClip& clip, const StftConfig& stft) {
    validate_stft(stft);
    const auto grid =
        dsp::frame_grid(clip.samples.size(), stft.window_len, stft.hop_len, clip.sample_rate);
    if (grid.n_frames == 0)
        throw DetectionError("clip shorter than one analysis window: " + clip.source_id);

    const auto window = dsp::make_window(stft.window_fn, stft.window_len);
    std::vector<double> frame(stft.window_len);
    std::vector<double> curve(grid.n_frames);
    for (std::size_t i = 0; i < grid.n_frames; ++i) {
        const double* src = clip.samples.data() + i * stft.hop_len;
        for (std::size_t j = 0; j < stft.window_len; ++j) frame[j] = src[j] * window[j];
        const auto mags = dsp::magnitude_spectrum(frame);
        double hfc = 0.0;
        for (std::size_t k = 1; k < mags.size(); ++k)
            hfc += static_cast<double>(k) * mags[k] * mags[k];
        curve[i] = hfc;
    }
    return curve;
}

std::vector<double> onset_novelty(const std::vector<double>& curve) {
    std::vector<double> nov(curve.size(), 0.0);
    for (std::size_t i = 1; i < curve.size(); ++i)
        nov[i] = std::max(0.0, curve[i] - curve[i - 1]);
    return nov;
}

std::vector<double> pick_onsets(const std::vector<double>& curve, const dsp::FrameGrid& grid,
                                const DetectionParams& params) {
    if (curve.empty()) throw DetectionError("empty detection curve");
    const double frames_per_s = grid.sample_rate / static_cast<double>(grid.hop_len);
    const std::size_t half =
        std::max<std::size_t>(1, std::llround(0.5 * params.median_window_s * frames_per_s));
    const auto baseline = dsp::moving_median(curve, half);

    std::vector<std::size_t> candidates;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        if (curve[i] > curve[i - 1] && curve[i] >= curve[i + 1] &&
            curve[i] > params.peak_threshold_k * baseline[i])
            candidates.push_back(i);
    }
    // Enforce the minimum spacing keeping the taller peak.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return curve[a] > curve[b]; });
    std::vector<std::size_t> kept;
    for (std::size_t c : candidates) {
        const double t = grid.center_time(c);
        const bool clear = std::none_of(kept.begin(), kept.end(), [&](std::size_t k) {
            return std::abs(grid.center_time(k) - t) < params.min_inter_onset_s;
        });
        if (clear) kept.push_back(c);
    }
    std::sort(kept.begin(), kept.end());
    std::vector<double> onsets(kept.size());
    std::transform(kept.begin(), kept.end(), onsets.begin(),
                   [&](std::size_t i) { return grid.center_time(i); });
    return onsets;
}

double detect_offset(const AudioClip& clip, double onset_s, const DetectionParams& params) {
    if (onset_s < 0.0 || onset_s >= clip.duration_s())
        throw DetectionError("onset outside clip: " + std::to_string(onset_s));
    const auto grid = energy_grid(clip, params);
    if (grid.n_frames == 0) throw DetectionError("clip shorter than one energy frame");
    const auto energy = dsp::rms_frames(clip.samples, grid);
    return offset_from_energy(energy, grid, onset_s, params);
}

std::vector<CallSegment> segment_calls(const AudioClip& clip, const DetectionParams& params,
                                       std::vector<std::string>* warnings) {
    const auto hfc = hfc_curve(clip, params.stft);
    const auto grid = dsp::frame_grid(clip.samples.size(), params.stft.window_len,
                                      params.stft.hop_len, clip.sample_rate);
    const auto onsets = pick_onsets(onset_novelty(hfc), grid, params);

    const auto egrid = energy_grid(clip, params);
    const auto energy = dsp::rms_frames(clip.samples, egrid);

    std::vector<CallSegment> segments;
    for (double onset : onsets) {
        try {
            const double offset = offset_from_energy(energy, egrid, onset, params);
            segments.push_back({onset, offset, clip.source_id});
        } catch (const DetectionError& e) {
            if (warnings)
                warnings->push_back(clip.source_id + ": dropped call at " +
                                    std::to_string(onset) + "s: " + e.what());
        }
    }
    std::sort(segments.begin(), segments.end(),
              [](const CallSegment& a, const CallSegment& b) { return a.onset_s < b.onset_s; });
    // A following onset inside the previous call truncates that call.
    for (std::size_t i = 0; i + 1 < segments.size(); ++i)
        if (segments[i].offset_s > segments[i + 1].onset_s)
            segments[i].offset_s = segments[i + 1].onset_s;
    std::erase_if(segments, [](const CallSegment& s) { return !(s.offset_s > s.onset_s); });
    return segments;
}

}  // namespace chickcall

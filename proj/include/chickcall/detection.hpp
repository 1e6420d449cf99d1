#pragma once

#include <string>
#include <vector>

#include "chickcall/audio.hpp"
#include "chickcall/dsp.hpp"

namespace chickcall {

struct StftConfig {
    std::size_t window_len = 2048;  // power of two
    std::size_t hop_len = 512;
    dsp::WindowFn window_fn = dsp::WindowFn::hann;
};

void validate_stft(const StftConfig& cfg);

enum class OffsetMethod { local_min, first_diff, second_diff };

OffsetMethod offset_method_from_name(const std::string& name);
std::string offset_method_name(OffsetMethod m);

struct DetectionParams {
    StftConfig stft;
    double peak_threshold_k = 1.5;   // multiplier over the moving median
    double median_window_s = 0.35;   // moving-median span for the baseline
    double min_inter_onset_s = 0.03;
    double max_call_dur_s = 0.5;     // offset search window length
    OffsetMethod offset_method = OffsetMethod::first_diff;
};

/// One detected vocalisation.
struct CallSegment {
    double onset_s = 0.0;
    double offset_s = 0.0;
    std::string source_id;

    double duration_s() const { return offset_s - onset_s; }
};

/// High Frequency Content per frame: HFC[t] = sum_k k*|X(k,t)|^2 over the
/// one-sided spectrum. Throws DetectionError when the clip is shorter than
/// one window.
std::vector<double> hfc_curve(const AudioClip& clip, const StftConfig& stft);

/// Half-wave rectified first difference of a descriptor curve. Raw HFC peaks
/// mid-call on sustained calls; the rectified difference spikes at the attack
/// and is what the segmenter feeds to the peak picker.
std::vector<double> onset_novelty(const std::vector<double>& curve);

/// Local maxima above moving-median * peak_threshold_k, at least
/// min_inter_onset_s apart (ties resolved towards the larger peak).
/// Returned times are frame centers in seconds.
std::vector<double> pick_onsets(const std::vector<double>& curve, const dsp::FrameGrid& grid,
                                const DetectionParams& params);

/// Offset for a call starting at onset_s: the selected minimum of
/// {energy | d(energy) | d2(energy)} inside (onset_s, onset_s + max_call_dur_s].
/// The energy signal is contiguous short-time RMS at the STFT hop spacing.
double detect_offset(const AudioClip& clip, double onset_s, const DetectionParams& params);

/// Full onset+offset pass over a preprocessed clip. Segments come back sorted
/// and non-overlapping (an onset inside the previous call truncates it).
/// Per-call failures drop that call and append to `warnings` when given.
std::vector<CallSegment> segment_calls(const AudioClip& clip, const DetectionParams& params,
                                       std::vector<std::string>* warnings = nullptr);

}  // namespace chickcall

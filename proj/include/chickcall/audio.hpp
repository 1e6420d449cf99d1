#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace chickcall {

/// Mono sample buffer; the unit all DSP operates on.
struct AudioClip {
    std::vector<double> samples;  // amplitudes in [-1, 1]
    double sample_rate = 0.0;     // Hz
    std::string source_id;        // opaque file identifier (file stem on load)

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

struct BandpassSpec {
    double low_hz = 2000.0;
    double high_hz = 12600.0;
};

/// Load a PCM16 or float32 WAV file. Stereo input is downmixed by
/// equal-weight channel averaging; source_id is the file stem.
AudioClip load_wav(const std::filesystem::path& path);

/// Write a mono clip as 32-bit float WAV (test/tooling support).
void save_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Rescale so that max |sample| == 1. Throws NormalizationError on silence.
AudioClip normalize_max_loudness(const AudioClip& clip);

/// Zero-phase Butterworth bandpass (order 4, applied forward-backward).
/// Length-preserving; event times are not shifted.
AudioClip bandpass(const AudioClip& clip, const BandpassSpec& band);

/// Validate a band against a sample rate (0 < low < high < rate/2).
void validate_band(const BandpassSpec& band, double sample_rate);

namespace detail {

/// One biquad per row: {b0, b1, b2, a1, a2} with a0 == 1.
using SosFilter = std::vector<std::array<double, 5>>;

/// Butterworth bandpass design via analog prototype + bilinear transform.
/// `order` is the lowpass prototype order (the bandpass has 2*order poles).
SosFilter butter_bandpass(int order, double low_hz, double high_hz, double sample_rate);

/// Forward-backward filtering with odd-reflection padding and steady-state
/// initial conditions (zero-phase, transient-suppressed).
std::vector<double> filtfilt(const SosFilter& sos, const std::vector<double>& x);

}  // namespace detail

}  // namespace chickcall

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace chickcall::dsp {

/// Forward FFT of a real signal; returns the full complex spectrum (size n).
std::vector<std::complex<double>> fft_real(std::span<const double> x);

/// Inverse FFT of a full complex spectrum back to a real signal (size n).
std::vector<double> ifft_real(const std::vector<std::complex<double>>& spectrum);

/// One-sided magnitude spectrum, bins 0..n/2.
std::vector<double> magnitude_spectrum(std::span<const double> frame);

enum class WindowFn { hann, hamming, rect };

WindowFn window_from_name(const std::string& name);
std::string window_name(WindowFn fn);

/// Periodic tapering window of length n.
std::vector<double> make_window(WindowFn fn, std::size_t n);

/// Frame layout for short-time analysis: frames start at i*hop and cover
/// [i*hop, i*hop + window_len). No implicit centering pad.
struct FrameGrid {
    std::size_t window_len = 0;
    std::size_t hop_len = 0;
    std::size_t n_frames = 0;
    double sample_rate = 0.0;

    double center_time(std::size_t frame) const {
        return (static_cast<double>(frame) * static_cast<double>(hop_len) +
                static_cast<double>(window_len) / 2.0) /
               sample_rate;
    }
};

/// Grid for a signal of n samples; n_frames is 0 when n < window_len.
FrameGrid frame_grid(std::size_t n, std::size_t window_len, std::size_t hop_len,
                     double sample_rate);

double frame_rms(std::span<const double> frame);

/// Per-frame RMS over the grid (rectangular frames, no taper).
std::vector<double> rms_frames(std::span<const double> x, const FrameGrid& grid);

/// |analytic signal| computed via the frequency-domain Hilbert transform.
std::vector<double> hilbert_envelope(std::span<const double> x);

double median(std::vector<double> values);

/// Centered moving median with shrinking edge windows; half_window in samples.
std::vector<double> moving_median(std::span<const double> x, std::size_t half_window);

}  // namespace chickcall::dsp

#include "chickcall/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "chickcall/errors.hpp"

namespace chickcall::dsp {

namespace {

Eigen::FFT<double>& engine() {
    thread_local Eigen::FFT<double> fft;
    return fft;
}

}  // namespace

std::vector<std::complex<double>> fft_real(std::span<const double> x) {
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out;
    engine().fwd(out, in);
    return out;
}

std::vector<double> ifft_real(const std::vector<std::complex<double>>& spectrum) {
    std::vector<double> out;
    engine().inv(out, spectrum);
    return out;
}

std::vector<double> magnitude_spectrum(std::span<const double> frame) {
    auto spec = fft_real(frame);
    std::vector<double> mags(frame.size() / 2 + 1);
    for (std::size_t k = 0; k < mags.size(); ++k) mags[k] = std::abs(spec[k]);
    return mags;
}

WindowFn window_from_name(const std::string& name) {
    if (name == "hann") return WindowFn::hann;
    if (name == "hamming") return WindowFn::hamming;
    if (name == "rect") return WindowFn::rect;
    throw ConfigError("unknown window function: " + name);
}

std::string window_name(WindowFn fn) {
    switch (fn) {
        case WindowFn::hann: return "hann";
        case WindowFn::hamming: return "hamming";
        case WindowFn::rect: return "rect";
    }
    return "hann";
}

std::vector<double> make_window(WindowFn fn, std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n == 0 || fn == WindowFn::rect) return w;
    const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = std::cos(step * static_cast<double>(i));
        w[i] = fn == WindowFn::hann ? 0.5 - 0.5 * c : 0.54 - 0.46 * c;
    }
    return w;
}

FrameGrid frame_grid(std::size_t n, std::size_t window_len, std::size_t hop_len,
                     double sample_rate) {
    if (window_len == 0 || hop_len == 0 || hop_len > window_len)
        throw ConfigError("invalid frame layout: 0 < hop_len <= window_len required");
    FrameGrid grid{window_len, hop_len, 0, sample_rate};
    if (n >= window_len) grid.n_frames = (n - window_len) / hop_len + 1;
    return grid;
}

double frame_rms(std::span<const double> frame) {
    double acc = 0.0;
    for (double v : frame) acc += v * v;
    return frame.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(frame.size()));
}

std::vector<double> rms_frames(std::span<const double> x, const FrameGrid& grid) {
    std::vector<double> out(grid.n_frames);
    for (std::size_t i = 0; i < grid.n_frames; ++i)
        out[i] = frame_rms(x.subspan(i * grid.hop_len, grid.window_len));
    return out;
}

std::vector<double> hilbert_envelope(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    if (n == 1) return {std::abs(x[0])};
    auto spec = fft_real(x);
    // Keep DC (and Nyquist for even n), double positive bins, zero negative bins.
    const std::size_t half = n / 2;
    for (std::size_t k = 1; k < half + (n % 2); ++k) spec[k] *= 2.0;
    for (std::size_t k = half + 1; k < n; ++k) spec[k] = 0.0;

    std::vector<std::complex<double>> analytic;
    Eigen::FFT<double> cfft;
    cfft.inv(analytic, spec);
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(analytic[i]);
    return env;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    double lo = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lo + hi);
}

std::vector<double> moving_median(std::span<const double> x, std::size_t half_window) {
    std::vector<double> out(x.size());
    std::vector<double> scratch;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t lo = i >= half_window ? i - half_window : 0;
        const std::size_t hi = std::min(x.size(), i + half_window + 1);
        scratch.assign(x.begin() + lo, x.begin() + hi);
        out[i] = median(std::move(scratch));
    }
    return out;
}

}  // namespace chickcall::dsp

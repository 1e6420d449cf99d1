#include "chickcall/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>

#include "chickcall/errors.hpp"

namespace chickcall {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw IoError("not a RIFF/WAVE file: " + path.string());

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t size = read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw IoError("truncated WAV chunk: " + path.string());
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (size < 16) throw IoError("malformed fmt chunk: " + path.string());
            format = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            if (format == kFormatExtensible && size >= 40)
                format = read_u16(bytes.data() + body + 24);  // sub-format GUID leads with the tag
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data = bytes.data() + body;
            data_len = size;
        }
        pos = body + size + (size % 2);  // chunks are word-aligned
    }

    if (format == 0 || channels == 0 || rate == 0)
        throw IoError("missing fmt chunk: " + path.string());
    if (!data) throw IoError("missing data chunk: " + path.string());
    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32)
        throw IoError("unsupported WAV encoding (need PCM16 or float32): " + path.string());

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t n_frames = data_len / (bytes_per_sample * channels);
    if (n_frames == 0) throw IoError("zero-length audio stream: " + path.string());

    AudioClip clip;
    clip.sample_rate = static_cast<double>(rate);
    clip.source_id = path.stem().string();
    clip.samples.resize(n_frames);

    const double inv_channels = 1.0 / static_cast<double>(channels);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (i * channels + c) * bytes_per_sample;
            if (pcm16) {
                std::int16_t v;
                std::memcpy(&v, p, 2);
                acc += static_cast<double>(v) / 32768.0;
            } else {
                float v;
                std::memcpy(&v, p, 4);
                acc += static_cast<double>(v);
            }
        }
        const double s = acc * inv_channels;
        if (!std::isfinite(s)) throw IoError("non-finite sample in " + path.string());
        clip.samples[i] = s;
    }
    return clip;
}

void save_wav(const std::filesystem::path& path, const AudioClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write WAV file: " + path.string());
    const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
    const std::uint32_t data_size = n * 4;
    const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));

    auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };

    out.write("RIFF", 4);
    put_u32(36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(16);
    put_u16(kFormatFloat);
    put_u16(1);
    put_u32(rate);
    put_u32(rate * 4);
    put_u16(4);
    put_u16(32);
    out.write("data", 4);
    put_u32(data_size);
    for (double s : clip.samples) {
        const float v = static_cast<float>(s);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    if (!out) throw IoError("short write: " + path.string());
}

AudioClip normalize_max_loudness(const AudioClip& clip) {
    double peak = 0.0;
    for (double s : clip.samples) peak = std::max(peak, std::abs(s));
    if (peak <= 0.0)
        throw NormalizationError("silent recording: " + clip.source_id);
    AudioClip out = clip;
    const double g = 1.0 / peak;
    for (double& s : out.samples) s *= g;
    return out;
}

void validate_band(const BandpassSpec& band, double sample_rate) {
    if (!(band.low_hz > 0.0 && band.low_hz < band.high_hz && band.high_hz < sample_rate / 2.0))
        throw ConfigError("bandpass band must satisfy 0 < low < high < sample_rate/2 (got " +
                          std::to_string(band.low_hz) + ".." + std::to_string(band.high_hz) +
                          " Hz at " + std::to_string(sample_rate) + " Hz)");
}

namespace detail {

SosFilter butter_bandpass(int order, double low_hz, double high_hz, double sample_rate) {
    using cd = std::complex<double>;
    const double k = 2.0 * sample_rate;  // bilinear constant
    const double w1 = k * std::tan(std::numbers::pi * low_hz / sample_rate);
    const double w2 = k * std::tan(std::numbers::pi * high_hz / sample_rate);
    const double bw = w2 - w1;
    const double w0 = std::sqrt(w1 * w2);

    // Analog prototype poles on the unit circle, then lowpass -> bandpass.
    std::vector<cd> analog_poles;
    for (int i = 0; i < order; ++i) {
        const double theta = std::numbers::pi * (2.0 * i + order + 1.0) / (2.0 * order);
        const cd p{std::cos(theta), std::sin(theta)};
        const cd half = p * (bw / 2.0);
        const cd disc = std::sqrt(half * half - cd{w0 * w0, 0.0});
        analog_poles.push_back(half + disc);
        analog_poles.push_back(half - disc);
    }

    // Bilinear transform of poles; zeros land at z = +1 (n of them, from s = 0)
    // and z = -1 (n, from s = infinity). Gain follows the zpk bilinear rule.
    std::vector<cd> zpoles;
    cd denom{1.0, 0.0};
    for (const cd& s : analog_poles) {
        zpoles.push_back((cd{k, 0.0} + s) / (cd{k, 0.0} - s));
        denom *= (cd{k, 0.0} - s);
    }
    double gain = std::pow(bw * k, order) / denom.real();

    // Pair conjugate poles into biquads; each section gets one zero at +1 and
    // one at -1, so b = g * {1, 0, -1}.
    std::vector<cd> upper, reals;
    for (const cd& p : zpoles) {
        if (p.imag() > 1e-12)
            upper.push_back(p);
        else if (std::abs(p.imag()) <= 1e-12)
            reals.push_back(p);
    }
    std::sort(upper.begin(), upper.end(), [](const cd& a, const cd& b) {
        return std::abs(a) > std::abs(b);
    });
    std::sort(reals.begin(), reals.end(), [](const cd& a, const cd& b) {
        return a.real() < b.real();
    });

    SosFilter sos;
    for (const cd& p : upper)
        sos.push_back({1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2)
        sos.push_back({1.0, 0.0, -1.0, -(reals[i].real() + reals[i + 1].real()),
                       reals[i].real() * reals[i + 1].real()});

    // Exact unity gain at the geometric band center.
    const double wc = 2.0 * std::numbers::pi * std::sqrt(low_hz * high_hz) / sample_rate;
    const cd z = std::polar(1.0, wc);
    cd response{gain, 0.0};
    for (const auto& s : sos) {
        const cd num = s[0] * z * z + s[1] * z + s[2];
        const cd den = z * z + s[3] * z + s[4];
        response *= num / den;
    }
    gain /= std::abs(response);

    for (int i = 0; i < 3; ++i) sos.front()[i] *= gain;
    return sos;
}

namespace {

// Direct form II transposed, single biquad pass with initial state.
void biquad_run(const std::array<double, 5>& s, std::vector<double>& x, double z1,
                double z2) {
    const double b0 = s[0], b1 = s[1], b2 = s[2], a1 = s[3], a2 = s[4];
    for (double& v : x) {
        const double in = v;
        const double out = b0 * in + z1;
        z1 = b1 * in - a1 * out + z2;
        z2 = b2 * in - a2 * out;
        v = out;
    }
}

void sos_forward(const SosFilter& sos, std::vector<double>& x) {
    // Steady-state initial conditions scaled by the first sample; the DC gain
    // of each section scales the constant seen by the next one.
    double level = x.empty() ? 0.0 : x.front();
    for (const auto& s : sos) {
        const double denom = 1.0 + s[3] + s[4];
        const double g = denom != 0.0 ? (s[0] + s[1] + s[2]) / denom : 0.0;
        const double z1 = (g - s[0]) * level;
        const double z2 = (s[2] - s[4] * g) * level;
        biquad_run(s, x, z1, z2);
        level *= g;
    }
}

}  // namespace

std::vector<double> filtfilt(const SosFilter& sos, const std::vector<double>& x) {
    if (x.empty()) return {};
    const std::size_t want = 3 * (2 * sos.size() + 1);
    const std::size_t pad = std::min(want, x.size() - 1);

    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x.front() - x[pad - i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < pad; ++i)
        ext.push_back(2.0 * x.back() - x[x.size() - 2 - i]);

    sos_forward(sos, ext);
    std::reverse(ext.begin(), ext.end());
    sos_forward(sos, ext);
    std::reverse(ext.begin(), ext.end());

    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

}  // namespace detail

AudioClip bandpass(const AudioClip& clip, const BandpassSpec& band) {
    validate_band(band, clip.sample_rate);
    AudioClip out = clip;
    const auto sos = detail::butter_bandpass(4, band.low_hz, band.high_hz, clip.sample_rate);
    out.samples = detail::filtfilt(sos, clip.samples);
    return out;
}

}  // namespace chickcall

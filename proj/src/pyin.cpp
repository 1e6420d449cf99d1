#include "chickcall/pyin.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/FFT>

#include "chickcall/dsp.hpp"
#include "chickcall/errors.hpp"

namespace chickcall {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Candidate {
    double f0_hz;
    double prob;
};

// YIN difference function d(tau) for tau in [0, w], w = frame/2, computed as
// d(tau) = sum_{j<w} x_j^2 + sum_{j<w} x_{j+tau}^2 - 2 corr(tau) with the
// cross-correlation done in the frequency domain.
std::vector<double> difference_function(Eigen::FFT<double>& fft, const double* frame,
                                        std::size_t frame_len, std::size_t tau_max) {
    const std::size_t w = frame_len / 2;
    std::size_t m = 1;
    while (m < frame_len + w + 1) m <<= 1;

    std::vector<double> padded(m, 0.0), head(m, 0.0);
    std::copy(frame, frame + frame_len, padded.begin());
    std::copy(frame, frame + w, head.begin());

    std::vector<std::complex<double>> spec_x, spec_h;
    fft.fwd(spec_x, padded);
    fft.fwd(spec_h, head);
    for (std::size_t i = 0; i < m; ++i) spec_x[i] *= std::conj(spec_h[i]);
    std::vector<double> corr;
    fft.inv(corr, spec_x);

    std::vector<double> cumsq(frame_len + 1, 0.0);
    for (std::size_t i = 0; i < frame_len; ++i) cumsq[i + 1] = cumsq[i] + frame[i] * frame[i];

    std::vector<double> d(tau_max + 1);
    const double head_energy = cumsq[w];
    for (std::size_t tau = 0; tau <= tau_max; ++tau) {
        const double lag_energy = cumsq[tau + w] - cumsq[tau];
        d[tau] = std::max(0.0, head_energy + lag_energy - 2.0 * corr[tau]);
    }
    return d;
}

std::vector<double> cumulative_mean_normalized(const std::vector<double>& d) {
    std::vector<double> cmnd(d.size(), 1.0);
    double running = 0.0;
    for (std::size_t tau = 1; tau < d.size(); ++tau) {
        running += d[tau];
        cmnd[tau] = running > 0.0 ? d[tau] * static_cast<double>(tau) / running : 1.0;
    }
    return cmnd;
}

struct Trough {
    double tau;    // parabolic-interpolated lag
    double value;  // interpolated CMND depth
};

std::vector<Trough> find_troughs(const std::vector<double>& cmnd, std::size_t tau_min,
                                 std::size_t tau_max) {
    std::vector<Trough> troughs;
    for (std::size_t tau = std::max<std::size_t>(tau_min, 2); tau + 1 <= tau_max; ++tau) {
        const double prev = cmnd[tau - 1], cur = cmnd[tau], next = cmnd[tau + 1];
        if (cur < prev && cur <= next) {
            const double denom = prev - 2.0 * cur + next;
            double shift = 0.0;
            if (denom > 0.0) shift = std::clamp(0.5 * (prev - next) / denom, -0.5, 0.5);
            const double value = denom > 0.0 ? cur - 0.25 * (prev - next) * shift : cur;
            troughs.push_back({static_cast<double>(tau) + shift, std::max(0.0, value)});
        }
    }
    return troughs;
}

}  // namespace

std::size_t F0Track::n_voiced() const {
    return static_cast<std::size_t>(std::count(voiced.begin(), voiced.end(), true));
}

std::vector<double> F0Track::voiced_values() const {
    std::vector<double> out;
    out.reserve(voiced.size());
    for (std::size_t i = 0; i < voiced.size(); ++i)
        if (voiced[i]) out.push_back(f0_hz[i]);
    return out;
}

F0Track estimate_f0(const AudioClip& segment, const PyinParams& params) {
    if (!(params.fmin_hz > 0.0 && params.fmin_hz < params.fmax_hz &&
          params.fmax_hz < segment.sample_rate / 2.0))
        throw ConfigError("pyin: need 0 < fmin < fmax < sample_rate/2");

    const double fs = segment.sample_rate;
    const auto grid =
        dsp::frame_grid(segment.samples.size(), params.frame_len, params.hop_len, fs);
    if (grid.n_frames < 2)
        throw FeatureError("too_short: segment shorter than two pitch frames (" +
                           std::to_string(segment.samples.size()) + " samples)");

    const std::size_t w = params.frame_len / 2;
    const std::size_t tau_min =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fs / params.fmax_hz)));
    const std::size_t tau_max = std::min<std::size_t>(
        w - 1, static_cast<std::size_t>(std::ceil(fs / params.fmin_hz)) + 1);
    if (tau_min + 1 >= tau_max)
        throw ConfigError("pyin: search band too narrow for the sample rate");

    // Threshold grid with a beta prior.
    const int nt = params.n_thresholds;
    std::vector<double> thresholds(nt), prior(nt);
    double prior_sum = 0.0;
    for (int i = 0; i < nt; ++i) {
        thresholds[i] = static_cast<double>(i + 1) / static_cast<double>(nt);
        prior[i] = std::pow(thresholds[i], params.beta_a - 1.0) *
                   std::pow(1.0 - thresholds[i] + 1e-12, params.beta_b - 1.0);
        prior_sum += prior[i];
    }
    for (double& p : prior) p /= prior_sum;

    Eigen::FFT<double> fft;
    std::vector<std::vector<Candidate>> frame_candidates(grid.n_frames);
    std::vector<double> voiced_prob(grid.n_frames, 0.0);

    for (std::size_t f = 0; f < grid.n_frames; ++f) {
        const double* frame = segment.samples.data() + f * params.hop_len;
        const auto d = difference_function(fft, frame, params.frame_len, tau_max);
        const auto cmnd = cumulative_mean_normalized(d);
        const auto troughs = find_troughs(cmnd, tau_min, tau_max);
        if (troughs.empty()) continue;

        std::size_t global_min = 0;
        for (std::size_t t = 1; t < troughs.size(); ++t)
            if (troughs[t].value < troughs[global_min].value) global_min = t;

        std::vector<double> mass(troughs.size(), 0.0);
        for (int i = 0; i < nt; ++i) {
            std::size_t first = troughs.size();
            for (std::size_t t = 0; t < troughs.size(); ++t) {
                if (troughs[t].value < thresholds[i]) {
                    first = t;
                    break;
                }
            }
            if (first < troughs.size())
                mass[first] += prior[i];
            else
                mass[global_min] += prior[i] * params.no_trough_prob;
        }

        auto& cands = frame_candidates[f];
        double total = 0.0;
        for (std::size_t t = 0; t < troughs.size(); ++t) {
            if (mass[t] <= 0.0) continue;
            const double f0 = fs / troughs[t].tau;
            if (f0 < params.fmin_hz || f0 > params.fmax_hz) continue;
            cands.push_back({f0, mass[t]});
            total += mass[t];
        }
        voiced_prob[f] = std::min(1.0, total);
    }

    // Viterbi over a log-spaced pitch grid; each pitch bin has a voiced and an
    // unvoiced flavour so voicing transitions carry hysteresis.
    const double octaves = std::log2(params.fmax_hz / params.fmin_hz);
    const int n_bins =
        std::max(2, static_cast<int>(std::ceil(octaves * 1200.0 / params.cents_per_state)) + 1);
    std::vector<double> bin_freq(n_bins);
    for (int b = 0; b < n_bins; ++b)
        bin_freq[b] = params.fmin_hz *
                      std::pow(2.0, static_cast<double>(b) * params.cents_per_state / 1200.0);

    auto bin_of = [&](double f0) {
        const double b = 1200.0 * std::log2(f0 / params.fmin_hz) / params.cents_per_state;
        return std::clamp(static_cast<int>(std::lround(b)), 0, n_bins - 1);
    };

    const double bins_per_octave = 1200.0 / params.cents_per_state;
    const int max_jump = std::max(
        1, static_cast<int>(std::lround(params.max_transition_oct_per_s * bins_per_octave *
                                        static_cast<double>(params.hop_len) / fs)));

    // Local pitch-movement weights, triangular, row-normalized after truncation.
    std::vector<std::vector<double>> local(n_bins, std::vector<double>(n_bins, 0.0));
    for (int i = 0; i < n_bins; ++i) {
        double row = 0.0;
        for (int j = std::max(0, i - max_jump); j <= std::min(n_bins - 1, i + max_jump); ++j) {
            local[i][j] = static_cast<double>(max_jump + 1 - std::abs(i - j));
            row += local[i][j];
        }
        for (int j = 0; j < n_bins; ++j) local[i][j] /= row;
    }

    const int n_states = 2 * n_bins;  // [0, n_bins) voiced, [n_bins, 2n) unvoiced
    const double stay = 1.0 - params.switch_prob;

    std::vector<double> log_obs(n_states);
    std::vector<double> prev(n_states, std::log(1.0 / n_states)), cur(n_states);
    std::vector<std::vector<int>> back(grid.n_frames, std::vector<int>(n_states, 0));

    auto fill_obs = [&](std::size_t f) {
        std::vector<double> voiced_obs(n_bins, 0.0);
        for (const auto& c : frame_candidates[f]) voiced_obs[bin_of(c.f0_hz)] += c.prob;
        const double unvoiced_obs = (1.0 - std::min(1.0, voiced_prob[f])) / n_bins;
        for (int b = 0; b < n_bins; ++b) {
            log_obs[b] = voiced_obs[b] > 0.0 ? std::log(voiced_obs[b]) : kNegInf;
            log_obs[n_bins + b] = unvoiced_obs > 0.0 ? std::log(unvoiced_obs) : kNegInf;
        }
    };

    fill_obs(0);
    for (int s = 0; s < n_states; ++s) prev[s] += log_obs[s];

    for (std::size_t f = 1; f < grid.n_frames; ++f) {
        fill_obs(f);
        for (int s = 0; s < n_states; ++s) {
            const int bin = s % n_bins;
            const bool to_voiced = s < n_bins;
            double best = kNegInf;
            int best_from = 0;
            for (int p = 0; p < n_states; ++p) {
                if (prev[p] == kNegInf) continue;
                const int pbin = p % n_bins;
                if (std::abs(pbin - bin) > max_jump) continue;
                const bool from_voiced = p < n_bins;
                const double trans =
                    local[pbin][bin] * (from_voiced == to_voiced ? stay : params.switch_prob);
                if (trans <= 0.0) continue;
                const double score = prev[p] + std::log(trans);
                if (score > best) {
                    best = score;
                    best_from = p;
                }
            }
            cur[s] = best == kNegInf ? kNegInf : best + log_obs[s];
            back[f][s] = best_from;
        }
        if (std::all_of(cur.begin(), cur.end(), [](double v) { return v == kNegInf; })) {
            // No reachable state (e.g. a pitch jump beyond max_jump); restart.
            cur = log_obs;
        }
        std::swap(prev, cur);
    }

    int state = 0;
    for (int s = 1; s < n_states; ++s)
        if (prev[s] > prev[state]) state = s;
    std::vector<int> path(grid.n_frames);
    for (std::size_t f = grid.n_frames; f-- > 0;) {
        path[f] = state;
        state = back[f][state];
    }

    F0Track track;
    track.times_s.resize(grid.n_frames);
    track.f0_hz.assign(grid.n_frames, 0.0);
    track.voiced.assign(grid.n_frames, false);
    track.voicing = voiced_prob;
    for (std::size_t f = 0; f < grid.n_frames; ++f) {
        track.times_s[f] = grid.center_time(f);
        if (path[f] >= n_bins || frame_candidates[f].empty()) continue;
        // Snap the decoded bin back to the closest raw candidate so the output
        // keeps sub-bin resolution.
        const double target = bin_freq[path[f]];
        const auto& cands = frame_candidates[f];
        double best_f0 = cands.front().f0_hz;
        double best_dist = std::abs(std::log2(best_f0 / target));
        for (const auto& c : cands) {
            const double dist = std::abs(std::log2(c.f0_hz / target));
            if (dist < best_dist) {
                best_dist = dist;
                best_f0 = c.f0_hz;
            }
        }
        if (best_dist > params.cents_per_state / 1200.0) best_f0 = target;
        track.f0_hz[f] = best_f0;
        track.voiced[f] = true;
    }
    return track;
}

}  // namespace chickcall

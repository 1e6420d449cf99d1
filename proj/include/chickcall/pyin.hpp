#pragma once

#include <cstddef>
#include <vector>

#include "chickcall/audio.hpp"

namespace chickcall {

struct PyinParams {
    std::size_t frame_len = 2048;
    std::size_t hop_len = 256;
    double fmin_hz = 2000.0;
    double fmax_hz = 6300.0;
    int n_thresholds = 100;              // grid 0.01..1.00
    double beta_a = 2.0;                 // threshold prior Beta(a, b)
    double beta_b = 18.0;
    double no_trough_prob = 0.01;        // mass for frames with no sub-threshold trough
    double switch_prob = 0.01;           // voiced<->unvoiced transition probability
    double cents_per_state = 60.0;       // Viterbi pitch grid resolution
    double max_transition_oct_per_s = 35.92;
};

/// Fundamental-frequency track. times_s/voicing cover every analysis frame;
/// f0_hz is meaningful only where voiced[i] is true.
struct F0Track {
    std::vector<double> times_s;
    std::vector<double> f0_hz;
    std::vector<bool> voiced;
    std::vector<double> voicing;  // per-frame voiced probability in [0, 1]

    std::size_t n_voiced() const;
    std::vector<double> voiced_values() const;
};

/// Probabilistic YIN: per-frame cumulative-mean-normalized difference,
/// candidate extraction over a thresholds-with-prior grid, and Viterbi
/// smoothing over a log-spaced pitch grid with voiced/unvoiced states.
/// Throws FeatureError("too_short...") when fewer than 2 frames fit.
F0Track estimate_f0(const AudioClip& segment, const PyinParams& params);

}  // namespace chickcall

#pragma once

#include <stdexcept>
#include <string>

namespace chickcall {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable files, unsupported encodings, malformed CSV/JSON.
struct IoError : Error {
    using Error::Error;
};

// Invalid or inconsistent configuration values.
struct ConfigError : Error {
    using Error::Error;
};

// Silent recording: peak normalization has no valid scale.
struct NormalizationError : Error {
    using Error::Error;
};

// Onset/offset search could not produce a valid segment.
struct DetectionError : Error {
    using Error::Error;
};

// Per-call feature extraction failure (e.g. segment too short for one frame).
struct FeatureError : Error {
    using Error::Error;
};

// Iterative fit failed to reach a usable state (e.g. singular covariance).
struct ConvergenceError : Error {
    using Error::Error;
};

}  // namespace chickcall

#pragma once

// Procedural stand-ins for the benchmark datasets, used when the real files
// are not on disk.  Everything is a pure function of the seed.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "memcore/dataset.hpp"

namespace memcore::harness {

struct DigitOptions {
    std::size_t side = 28;      // rendered image side; pixels in [-0.5, 0.5]
    double pixel_noise = 0.02;  // gaussian noise std added before clamping
};

/// Handwriting-like digits: each class is a fixed set of strokes drawn with
/// a random affine jitter and stroke width.  Labels cycle through 0..9.
[[nodiscard]] Dataset synthetic_digits(std::size_t count, std::uint64_t seed,
                                       const DigitOptions& opts = {});

/// Area-average downsampling of square images (one per row) to out_side^2.
[[nodiscard]] Matrix downsample(const Matrix& images, std::size_t in_side, std::size_t out_side);

struct TrafficOptions {
    std::size_t features = 41;
    std::size_t latent = 5;   // normal traffic lies near a latent-dim manifold
    double noise = 0.02;      // isotropic noise std before scaling
    std::uint64_t structure_seed = 7;  // picks the manifold; shared by train and test draws
};

/// Normal connection records: a fixed random nonlinear map of a low-dimensional
/// latent, scaled with `scaler` (fitted here when not yet fitted).
[[nodiscard]] Matrix synthetic_traffic(std::size_t count, std::uint64_t seed,
                                       MinMaxScaler& scaler, const TrafficOptions& opts = {});

/// Anomalies from normal records: `features_hit` randomly chosen features
/// each pushed by +/- `sigmas` of that feature's spread over `normals`,
/// clamped to the rails.
[[nodiscard]] Matrix inject_anomalies(const Matrix& normals, std::size_t features_hit,
                                      double sigmas, std::uint64_t seed);

}  // namespace memcore::harness

#pragma once

// Per-pixel feature extraction and the two data-parallel kernels of the toy
// detector: the probability map and the mini-batch gradient. Each kernel has
// an OpenMP implementation and a plain serial reference used by the tests and
// the benchmark.

#include "textboot/image.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace textboot::kernels {

/// Box-mean radii of the pooled features.
inline constexpr int kMeanRadii[] = {1, 2, 4, 7};
/// Box-variance radii of the pooled features.
inline constexpr int kVarRadii[] = {1, 2, 4};

/// Finite-difference steps of the Hessian features. Each step contributes the
/// two eigenvalues of the Hessian of the 3x3-smoothed image.
inline constexpr int kHessianSteps[] = {2, 3};
/// Window radii of the structure-tensor coherence features (1 for elongated
/// structures, 0 for isotropic ones).
inline constexpr int kCoherenceRadii[] = {4, 7};

/// Features per pixel for a given patch radius, including the trailing bias.
std::size_t feature_count(int patch_radius) noexcept;

/// Precomputed per-image planes (normalised intensities plus integral images)
/// that make per-pixel feature extraction O(features).
class FeaturePlane {
public:
    FeaturePlane(const GrayImage& img, int patch_radius);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int patch_radius() const noexcept { return radius_; }
    std::size_t feature_count() const noexcept { return n_features_; }

    /// Writes feature_count() values for pixel (x, y).
    void features(int x, int y, std::span<float> out) const noexcept;

private:
    float intensity(int x, int y) const noexcept;
    double box_sum(const std::vector<double>& integral, int x0, int y0, int x1, int y1) const noexcept;

    int width_;
    int height_;
    int radius_;
    std::size_t n_features_;
    std::vector<float> values_;
    std::vector<double> integral_;    // (w+1)*(h+1)
    std::vector<double> integral_sq_; // (w+1)*(h+1)
    std::vector<float> hessian_;      // 2 * size(kHessianSteps) per pixel
    std::vector<double> integral_jxx_;
    std::vector<double> integral_jyy_;
    std::vector<double> integral_jxy_;
};

double sigmoid(double z) noexcept;

/// Text probability for every pixel, row-major into `out` (width*height).
void probability_map(const FeaturePlane& plane, std::span<const double> weights, std::span<float> out);
void probability_map_serial(const FeaturePlane& plane, std::span<const double> weights, std::span<float> out);

struct PixelSample {
    std::uint32_t plane = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    float label = 0.0f;
};

struct GradientResult {
    double loss_sum = 0.0; // summed binary cross-entropy over the batch
};

/// Number of fixed partitions a batch is split into. The partial sums are
/// reduced in partition order, so results do not depend on the thread count.
inline constexpr int kGradientChunks = 8;

/// Summed gradient of the (positive-weighted) binary cross-entropy over
/// `batch` into `grad` (overwritten).
GradientResult batch_gradient(std::span<const FeaturePlane> planes, std::span<const PixelSample> batch,
                              std::span<const double> weights, double positive_weight, std::span<double> grad);
/// Single-accumulator reference of batch_gradient.
GradientResult batch_gradient_serial(std::span<const FeaturePlane> planes, std::span<const PixelSample> batch,
                                     std::span<const double> weights, double positive_weight,
                                     std::span<double> grad);

} // namespace textboot::kernels

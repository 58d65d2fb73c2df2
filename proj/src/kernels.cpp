#include "textboot/kernels.hpp"

#include "textboot/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace textboot::kernels {

std::size_t feature_count(int patch_radius) noexcept {
    const auto side = static_cast<std::size_t>(2 * patch_radius + 1);
    return side * side + std::size(kMeanRadii) + std::size(kVarRadii) + 2 * std::size(kHessianSteps) +
           std::size(kCoherenceRadii) + 1;
}

FeaturePlane::FeaturePlane(const GrayImage& img, int patch_radius)
    : width_(img.width), height_(img.height), radius_(patch_radius), n_features_(kernels::feature_count(patch_radius)) {
    if (patch_radius < 0 || patch_radius > 8)
        throw Error(ErrorCode::InvalidArgument, "patch radius must lie in [0,8]");
    if (img.width < 1 || img.height < 1)
        throw Error(ErrorCode::InvalidArgument, "empty image");
    values_.resize(img.pixels.size());
    for (std::size_t i = 0; i < values_.size(); ++i)
        values_[i] = static_cast<float>(img.pixels[i]) / 255.0f;

    const auto stride = static_cast<std::size_t>(width_ + 1);
    integral_.assign(stride * static_cast<std::size_t>(height_ + 1), 0.0);
    integral_sq_.assign(integral_.size(), 0.0);
    for (int y = 0; y < height_; ++y) {
        double row = 0.0, row_sq = 0.0;
        for (int x = 0; x < width_; ++x) {
            const double v = values_[static_cast<std::size_t>(y) * width_ + x];
            row += v;
            row_sq += v * v;
            const std::size_t at = (static_cast<std::size_t>(y) + 1) * stride + x + 1;
            integral_[at] = integral_[at - stride] + row;
            integral_sq_[at] = integral_sq_[at - stride] + row_sq;
        }
    }

    std::vector<float> smooth(values_.size());
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            const int x0 = std::max(0, x - 1), y0 = std::max(0, y - 1);
            const int x1 = std::min(width_, x + 2), y1 = std::min(height_, y + 2);
            smooth[static_cast<std::size_t>(y) * width_ + x] =
                static_cast<float>(box_sum(integral_, x0, y0, x1, y1) / ((x1 - x0) * (y1 - y0)));
        }
    auto at = [&](int x, int y) {
        return static_cast<double>(smooth[static_cast<std::size_t>(std::clamp(y, 0, height_ - 1)) * width_ +
                                          std::clamp(x, 0, width_ - 1)]);
    };
    constexpr std::size_t per_pixel = 2 * std::size(kHessianSteps);
    hessian_.resize(values_.size() * per_pixel);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            float* h = &hessian_[(static_cast<std::size_t>(y) * width_ + x) * per_pixel];
            for (int s : kHessianSteps) {
                const double c = at(x, y);
                const double dxx = (at(x + s, y) + at(x - s, y) - 2.0 * c);
                const double dyy = (at(x, y + s) + at(x, y - s) - 2.0 * c);
                const double dxy = (at(x + s, y + s) + at(x - s, y - s) - at(x + s, y - s) - at(x - s, y + s)) / 4.0;
                const double half_trace = 0.5 * (dxx + dyy);
                const double disc = std::sqrt(0.25 * (dxx - dyy) * (dxx - dyy) + dxy * dxy);
                *h++ = static_cast<float>(half_trace - disc);
                *h++ = static_cast<float>(half_trace + disc);
            }
        }

    integral_jxx_.assign(integral_.size(), 0.0);
    integral_jyy_.assign(integral_.size(), 0.0);
    integral_jxy_.assign(integral_.size(), 0.0);
    for (int y = 0; y < height_; ++y) {
        double rxx = 0.0, ryy = 0.0, rxy = 0.0;
        for (int x = 0; x < width_; ++x) {
            const double gx = 0.5 * (at(x + 1, y) - at(x - 1, y));
            const double gy = 0.5 * (at(x, y + 1) - at(x, y - 1));
            rxx += gx * gx;
            ryy += gy * gy;
            rxy += gx * gy;
            const std::size_t i = (static_cast<std::size_t>(y) + 1) * stride + x + 1;
            integral_jxx_[i] = integral_jxx_[i - stride] + rxx;
            integral_jyy_[i] = integral_jyy_[i - stride] + ryy;
            integral_jxy_[i] = integral_jxy_[i - stride] + rxy;
        }
    }
}

float FeaturePlane::intensity(int x, int y) const noexcept {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return values_[static_cast<std::size_t>(y) * width_ + x];
}

double FeaturePlane::box_sum(const std::vector<double>& integral, int x0, int y0, int x1, int y1) const noexcept {
    const auto stride = static_cast<std::size_t>(width_ + 1);
    return integral[static_cast<std::size_t>(y1) * stride + x1] - integral[static_cast<std::size_t>(y0) * stride + x1] -
           integral[static_cast<std::size_t>(y1) * stride + x0] + integral[static_cast<std::size_t>(y0) * stride + x0];
}

void FeaturePlane::features(int x, int y, std::span<float> out) const noexcept {
    std::size_t k = 0;
    for (int dy = -radius_; dy <= radius_; ++dy)
        for (int dx = -radius_; dx <= radius_; ++dx)
            out[k++] = intensity(x + dx, y + dy) - 0.5f;

    auto window = [&](int r) {
        return std::array<int, 4>{std::max(0, x - r), std::max(0, y - r), std::min(width_, x + r + 1),
                                  std::min(height_, y + r + 1)};
    };
    for (int r : kMeanRadii) {
        const auto [x0, y0, x1, y1] = window(r);
        const double n = static_cast<double>((x1 - x0) * (y1 - y0));
        out[k++] = static_cast<float>(box_sum(integral_, x0, y0, x1, y1) / n - 0.5);
    }
    for (int r : kVarRadii) {
        const auto [x0, y0, x1, y1] = window(r);
        const double n = static_cast<double>((x1 - x0) * (y1 - y0));
        const double mean = box_sum(integral_, x0, y0, x1, y1) / n;
        const double var = std::max(0.0, box_sum(integral_sq_, x0, y0, x1, y1) / n - mean * mean);
        out[k++] = static_cast<float>(std::sqrt(var));
    }
    constexpr std::size_t per_pixel = 2 * std::size(kHessianSteps);
    const float* h = &hessian_[(static_cast<std::size_t>(y) * width_ + x) * per_pixel];
    for (std::size_t i = 0; i < per_pixel; ++i)
        out[k++] = h[i];
    for (int r : kCoherenceRadii) {
        const auto [x0, y0, x1, y1] = window(r);
        const double jxx = box_sum(integral_jxx_, x0, y0, x1, y1);
        const double jyy = box_sum(integral_jyy_, x0, y0, x1, y1);
        const double jxy = box_sum(integral_jxy_, x0, y0, x1, y1);
        const double trace = jxx + jyy;
        const double aniso = (jxx - jyy) * (jxx - jyy) + 4.0 * jxy * jxy;
        out[k++] = trace > 1e-9 ? static_cast<float>(std::sqrt(aniso) / trace) : 0.0f;
    }
    out[k] = 1.0f; // bias
}

double sigmoid(double z) noexcept {
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

double dot(std::span<const float> f, std::span<const double> w) noexcept {
    double z = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        z += static_cast<double>(f[i]) * w[i];
    return z;
}

double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_weights(const FeaturePlane& plane, std::span<const double> weights) {
    if (weights.size() != plane.feature_count())
        throw Error(ErrorCode::DimensionMismatch, "weight vector does not match the feature layout");
}

// Accumulates one sample into `grad`, returns its loss.
double accumulate(const FeaturePlane& plane, const PixelSample& s, std::span<const double> weights,
                  double positive_weight, std::span<float> scratch, std::span<double> grad) noexcept {
    plane.features(s.x, s.y, scratch);
    const double z = dot(scratch, weights);
    const double p = sigmoid(z);
    const double y = s.label;
    const double dz = positive_weight * y * (p - 1.0) + (1.0 - y) * p;
    for (std::size_t i = 0; i < scratch.size(); ++i)
        grad[i] += dz * static_cast<double>(scratch[i]);
    return positive_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
}

} // namespace

void probability_map_serial(const FeaturePlane& plane, std::span<const double> weights, std::span<float> out) {
    check_weights(plane, weights);
    std::vector<float> f(plane.feature_count());
    for (int y = 0; y < plane.height(); ++y)
        for (int x = 0; x < plane.width(); ++x) {
            plane.features(x, y, f);
            out[static_cast<std::size_t>(y) * plane.width() + x] = static_cast<float>(sigmoid(dot(f, weights)));
        }
}

void probability_map(const FeaturePlane& plane, std::span<const double> weights, std::span<float> out) {
    check_weights(plane, weights);
    const int height = plane.height();
    const int width = plane.width();
#pragma omp parallel
    {
        std::vector<float> f(plane.feature_count());
#pragma omp for schedule(static)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                plane.features(x, y, f);
                out[static_cast<std::size_t>(y) * width + x] = static_cast<float>(sigmoid(dot(f, weights)));
            }
    }
}

GradientResult batch_gradient_serial(std::span<const FeaturePlane> planes, std::span<const PixelSample> batch,
                                     std::span<const double> weights, double positive_weight,
                                     std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    GradientResult r;
    if (batch.empty())
        return r;
    std::vector<float> f(weights.size());
    for (const auto& s : batch)
        r.loss_sum += accumulate(planes[s.plane], s, weights, positive_weight, f, grad);
    return r;
}

GradientResult batch_gradient(std::span<const FeaturePlane> planes, std::span<const PixelSample> batch,
                              std::span<const double> weights, double positive_weight, std::span<double> grad) {
    const std::size_t n_feat = weights.size();
    std::array<std::vector<double>, kGradientChunks> partial;
    std::array<double, kGradientChunks> loss{};
    const std::size_t n = batch.size();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < kGradientChunks; ++c) {
        partial[c].assign(n_feat, 0.0);
        std::vector<float> f(n_feat);
        const std::size_t begin = n * static_cast<std::size_t>(c) / kGradientChunks;
        const std::size_t end = n * static_cast<std::size_t>(c + 1) / kGradientChunks;
        for (std::size_t i = begin; i < end; ++i)
            loss[c] += accumulate(planes[batch[i].plane], batch[i], weights, positive_weight, f, partial[c]);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    GradientResult r;
    for (int c = 0; c < kGradientChunks; ++c) {
        r.loss_sum += loss[c];
        for (std::size_t i = 0; i < n_feat; ++i)
            grad[i] += partial[c][i];
    }
    return r;
}

} // namespace textboot::kernels

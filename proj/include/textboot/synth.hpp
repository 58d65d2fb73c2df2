#pragma once

#include "textboot/data.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace textboot {

template <class T>
struct Range {
    T lo{};
    T hi{};
    bool valid() const noexcept { return lo <= hi; }
};

/// Parameters of a synthetic curved-ribbon scene family.
struct SceneSpec {
    int n_images = 10;
    int width = 64;
    int height = 64;
    Range<int> instances_per_image{1, 3};
    Range<double> curvature{0.0, 0.05}; // ribbon bend, radians per pixel of arc length
    Range<int> stroke_width{3, 5};
    double noise_level = 0.02;          // salt-and-pepper fraction
    std::uint64_t seed = 0;

    Range<int> length{20, 44};
    Range<double> contrast{0.25, 0.55}; // ribbon brightness above background
    Range<int> clutter{0, 3};           // bright distractor blobs per image
    double texture = 0.12;              // background texture amplitude
    double blur_noise = 0.03;           // additive gaussian sigma
    std::string id_prefix = "img";

    /// Throws InvalidArgument on empty ranges or n_images < 1.
    void validate() const;
};

struct SyntheticScene {
    GrayImage image;
    std::vector<Polygon> polygons;      // ground-truth outlines
    std::vector<BitMask> stroke_masks;  // exact rendered stroke pixels, one per ribbon
};

/// Renders image `index` of the family. Depends only on (spec, index).
SyntheticScene render_scene(const SceneSpec& spec, int index);

/// Writes `images/<id>.pgm` and `manifest.tsv` under out_dir and returns the
/// STRONG dataset. Byte-identical output for a fixed spec.
Dataset generate_synthetic(const SceneSpec& spec, const std::filesystem::path& out_dir);

} // namespace textboot

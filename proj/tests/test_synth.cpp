#include "oracles.hpp"

#include "textboot/error.hpp"
#include "textboot/synth.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace textboot;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST(SceneSpec, RejectsZeroImages) {
    SceneSpec s;
    s.n_images = 0;
    EXPECT_THROW(s.validate(), Error);
    s.n_images = 1;
    s.stroke_width = {5, 3};
    EXPECT_THROW(s.validate(), Error);
    s.stroke_width = {3, 5};
    s.noise_level = 1.5;
    EXPECT_THROW(s.validate(), Error);
}

TEST(Synth, FixedSeedIsByteIdentical) {
    oracle::TempDir a("synth"), b("synth");
    SceneSpec s;
    s.n_images = 6;
    s.seed = 42;
    const Dataset da = generate_synthetic(s, a.path());
    const Dataset db = generate_synthetic(s, b.path());
    EXPECT_EQ(da, db);
    EXPECT_EQ(read_bytes(a.path() / "manifest.tsv"), read_bytes(b.path() / "manifest.tsv"));
    for (const auto& r : da.records)
        EXPECT_EQ(read_bytes(a.path() / r.image_path), read_bytes(b.path() / r.image_path));
    EXPECT_EQ(load_dataset(a.path() / "manifest.tsv"), da);
}

TEST(Synth, DifferentSeedsDiffer) {
    SceneSpec s;
    s.seed = 1;
    const auto a = render_scene(s, 0);
    s.seed = 2;
    EXPECT_NE(a.image, render_scene(s, 0).image);
}

TEST(Synth, PolygonMatchesRenderedStroke) {
    SceneSpec s;
    s.seed = 5;
    s.curvature = {0.0, 0.12};
    int checked = 0;
    for (int i = 0; i < 60; ++i) {
        const auto scene = render_scene(s, i);
        ASSERT_EQ(scene.polygons.size(), scene.stroke_masks.size());
        for (std::size_t k = 0; k < scene.polygons.size(); ++k) {
            const BitMask m = rasterize(scene.polygons[k], s.width, s.height);
            EXPECT_GE(mask_iou(m, scene.stroke_masks[k]), 0.9) << "image " << i << " ribbon " << k;
            ++checked;
        }
    }
    EXPECT_GT(checked, 60);
}

TEST(Synth, RibbonsAreBrighterThanSurroundings) {
    SceneSpec s;
    s.seed = 8;
    s.noise_level = 0.0;
    s.clutter = {0, 0};
    for (int i = 0; i < 20; ++i) {
        const auto scene = render_scene(s, i);
        BitMask text(s.width, s.height);
        for (const auto& m : scene.stroke_masks)
            text |= m;
        double in = 0, out = 0;
        std::size_t n_in = 0, n_out = 0;
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                (text.get(x, y) ? in : out) += scene.image.at(x, y);
                ++(text.get(x, y) ? n_in : n_out);
            }
        if (n_in)
            EXPECT_GT(in / n_in, out / n_out + 30.0);
    }
}

TEST(Synth, InstanceCountWithinRange) {
    SceneSpec s;
    s.seed = 3;
    s.instances_per_image = {2, 2};
    for (int i = 0; i < 20; ++i)
        EXPECT_LE(render_scene(s, i).polygons.size(), 2u);
}

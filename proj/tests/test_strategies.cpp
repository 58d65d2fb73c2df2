#include "oracles.hpp"

#include "textboot/error.hpp"
#include "textboot/strategies.hpp"
#include "textboot/synth.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace textboot;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidArgument;
}

Detection candidate(const AxisRect& box, double score, int w = 32, int h = 32) {
    return {box, oracle::rect_mask(box, w, h), score};
}

// Returns the stored mask whose bounding box is exactly the query box.
class GroundTruthDetector final : public Detector {
public:
    explicit GroundTruthDetector(std::vector<BitMask> masks) : masks_(std::move(masks)) {}
    std::vector<Detection> detect(const GrayImage&) const override { return {}; }
    BitMask mask_for_box(const GrayImage& img, const AxisRect& box) const override {
        for (const auto& m : masks_)
            if (mask_bbox(m) == box)
                return m;
        return BitMask(img.width, img.height);
    }

private:
    std::vector<BitMask> masks_;
};

bool same_pair(const PseudoAnnotation& a, const Detection& d) { return a.box == d.box && a.mask == d.mask; }

Dataset weak_pool(const oracle::TempDir& dir, int n, std::uint64_t seed) {
    SceneSpec s;
    s.n_images = n;
    s.seed = seed;
    Dataset d = generate_synthetic(s, dir.path());
    for (auto& r : d.records)
        r = downgrade_to_weak(r);
    return d;
}

} // namespace

TEST(Naive, Examples) {
    const StrategyConfig cfg;
    EXPECT_TRUE(naive_select({}, cfg).empty());
    const auto keep = naive_select({candidate(AxisRect(0, 0, 4, 4), 0.6), candidate(AxisRect(5, 5, 9, 9), 0.4)}, cfg);
    ASSERT_EQ(keep.size(), 1u);
    EXPECT_EQ(keep[0].score, 0.6);
    EXPECT_EQ(keep[0].provenance, Strategy::Naive);
    EXPECT_TRUE(naive_select({candidate(AxisRect(0, 0, 4, 4), 0.5)}, cfg).empty());
}

TEST(Filter, Examples) {
    const StrategyConfig cfg;
    const auto c = candidate(AxisRect(0, 0, 10, 10), 0.9);
    EXPECT_TRUE(filter_select({c}, {}, cfg).empty());
    // IoU of (0,0,10,10) with (9,0,19,10) is 10/190
    EXPECT_TRUE(filter_select({c}, {AxisRect(9, 0, 19, 10)}, cfg).empty());
    // IoU 0.5: half of the candidate overlaps a box of the same size as the overlap
    const auto kept = filter_select({candidate(AxisRect(0, 0, 10, 10), 0.45)}, {AxisRect(0, 0, 10, 5)}, cfg);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].provenance, Strategy::Filter);
}

TEST(Filter, StrictBoundaries) {
    StrategyConfig cfg;
    cfg.score_s_prime = 0.4;
    cfg.iou_t = 0.5;
    EXPECT_TRUE(filter_select({candidate(AxisRect(0, 0, 10, 10), 0.4)}, {AxisRect(0, 0, 10, 10)}, cfg).empty());
    EXPECT_TRUE(filter_select({candidate(AxisRect(0, 0, 10, 10), 0.9)}, {AxisRect(0, 0, 10, 5)}, cfg).empty());
}

TEST(Local, Examples) {
    const oracle::FieldDetector f(32, 32, 1);
    const GrayImage img(32, 32);
    EXPECT_TRUE(local_generate(f, img, {}).empty());
    const std::vector<AxisRect> boxes = {AxisRect(0, 0, 5, 5), AxisRect(3.5, 2.25, 20, 9), AxisRect(0, 0, 5, 5)};
    const auto out = local_generate(f, img, boxes);
    ASSERT_EQ(out.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(out[i].box, boxes[i]);
        EXPECT_EQ(out[i].provenance, Strategy::Local);
        EXPECT_FALSE(out[i].score.has_value());
    }
    EXPECT_EQ(code_of([&] { local_generate(f, img, {AxisRect(1, 1, 1, 4)}); }), ErrorCode::DegenerateBox);
}

TEST(Local, OracleModelReproducesTruth) {
    SceneSpec s;
    s.seed = 4;
    for (int i = 0; i < 10; ++i) {
        const auto scene = render_scene(s, i);
        std::vector<BitMask> truth;
        std::vector<AxisRect> boxes;
        for (const auto& p : scene.polygons) {
            truth.push_back(rasterize(p, s.width, s.height));
            boxes.push_back(mask_bbox(truth.back()));
        }
        const GroundTruthDetector oracle_model(truth);
        const auto out = local_generate(oracle_model, scene.image, boxes);
        ASSERT_EQ(out.size(), truth.size());
        for (std::size_t k = 0; k < out.size(); ++k)
            EXPECT_EQ(mask_iou(out[k].mask, truth[k]), 1.0);
    }
}

TEST(Local, EmptyMasksKeptUnlessDisabled) {
    const GroundTruthDetector nothing({});
    StrategyConfig cfg;
    EXPECT_EQ(local_generate(nothing, GrayImage(8, 8), {AxisRect(1, 1, 4, 4)}, cfg).size(), 1u);
    cfg.keep_empty_local_masks = false;
    EXPECT_TRUE(local_generate(nothing, GrayImage(8, 8), {AxisRect(1, 1, 4, 4)}, cfg).empty());
}

TEST(StrategyConfig, RejectsOutOfRange) {
    StrategyConfig cfg;
    cfg.iou_t = 1.5;
    EXPECT_EQ(code_of([&] { naive_select({}, cfg); }), ErrorCode::InvalidArgument);
}

TEST(StrategyProperty, FilterEqualsDoubleLoopOracle) {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const auto cands = oracle::random_candidates(rng, static_cast<int>(rng() % 8), 24, 24);
        std::vector<AxisRect> weak;
        for (int k = static_cast<int>(rng() % 5); k > 0; --k)
            weak.push_back(oracle::random_rect(rng, 24, i % 2 == 0));
        StrategyConfig cfg;
        cfg.score_s_prime = u(rng);
        cfg.iou_t = u(rng);
        const auto got = filter_select(cands, weak, cfg);
        const auto want = oracle::filter_indices(cands, weak, cfg.score_s_prime, cfg.iou_t);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t k = 0; k < got.size(); ++k)
            EXPECT_TRUE(same_pair(got[k], cands[want[k]]));

        // with S = S', filter keeps a subset of naive
        cfg.score_s = cfg.score_s_prime;
        const auto naive = naive_select(cands, cfg);
        for (const auto& f : got)
            EXPECT_TRUE(std::any_of(naive.begin(), naive.end(),
                                    [&](const PseudoAnnotation& n) { return n.box == f.box && n.mask == f.mask; }));
    }
}

TEST(StrategyProperty, NaiveMonotoneInThreshold) {
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const auto cands = oracle::random_candidates(rng, static_cast<int>(rng() % 10), 20, 20);
        StrategyConfig lo, hi;
        lo.score_s = u(rng);
        hi.score_s = lo.score_s + (1.0 - lo.score_s) * u(rng);
        const auto a = naive_select(cands, lo);
        const auto b = naive_select(cands, hi);
        EXPECT_LE(b.size(), a.size());
        std::size_t j = 0;
        for (const auto& x : b) { // b is an order-preserving subsequence of a
            while (j < a.size() && !(a[j].box == x.box && a[j].mask == x.mask))
                ++j;
            EXPECT_LT(j, a.size());
        }
        for (const auto& x : a)
            EXPECT_TRUE(std::any_of(cands.begin(), cands.end(), [&](const Detection& c) { return same_pair(x, c); }));
    }
}

TEST(AnnotatePool, TierRules) {
    oracle::TempDir dir("pool");
    const Dataset weak = weak_pool(dir, 3, 2);
    const oracle::FieldDetector f(64, 64, 3);
    EXPECT_TRUE(annotate_pool(f, Dataset{}, Strategy::Naive, {}).images.empty());

    Dataset none = weak;
    for (auto& r : none.records)
        r = downgrade_to_none(r);
    EXPECT_EQ(code_of([&] { annotate_pool(f, none, Strategy::Filter, {}); }), ErrorCode::TierMismatch);
    EXPECT_EQ(code_of([&] { annotate_pool(f, none, Strategy::Local, {}); }), ErrorCode::TierMismatch);
    EXPECT_NO_THROW(annotate_pool(f, none, Strategy::Naive, {}));

    // naive ignores the weak rectangles
    const auto a = annotate_pool(f, weak, Strategy::Naive, {});
    const auto b = annotate_pool(f, none, Strategy::Naive, {});
    ASSERT_EQ(a.count, b.count);
    EXPECT_EQ(a.mean_score, b.mean_score);
}

TEST(AnnotatePool, LocalConservesRectangleCount) {
    oracle::TempDir dir("pool");
    const Dataset weak = weak_pool(dir, 30, 6);
    const oracle::FieldDetector f(64, 64, 4);
    const PseudoSet set = annotate_pool(f, weak, Strategy::Local, {}, 2);
    EXPECT_EQ(set.count, weak.instance_count());
    EXPECT_TRUE(std::is_sorted(set.images.begin(), set.images.end(),
                               [](const PseudoImage& x, const PseudoImage& y) { return x.image_id < y.image_id; }));
    for (const auto& img : set.images)
        for (const auto& a : img.annotations)
            EXPECT_EQ(a.round, 2);
}

TEST(AnnotatePool, Deterministic) {
    oracle::TempDir dir("pool");
    const Dataset weak = weak_pool(dir, 8, 7);
    const oracle::FieldDetector f(64, 64, 5);
    for (Strategy s : {Strategy::Naive, Strategy::Filter, Strategy::Local}) {
        const auto a = pseudo_to_dataset(annotate_pool(f, weak, s, {}), 64, 64);
        const auto b = pseudo_to_dataset(annotate_pool(f, weak, s, {}), 64, 64);
        EXPECT_EQ(a, b);
    }
}

TEST(PseudoManifest, RoundTripKeepsAnnotationStructure) {
    oracle::TempDir dir("pseudo");
    const Dataset weak = weak_pool(dir, 6, 9);
    const oracle::FieldDetector f(64, 64, 6);
    for (Strategy s : {Strategy::Naive, Strategy::Local}) {
        const PseudoSet set = annotate_pool(f, weak, s, {}, 1);
        const Dataset d = pseudo_to_dataset(set, 64, 64);
        save_dataset(d, dir.path() / "pseudo.tsv");
        const PseudoSet back = dataset_to_pseudo(load_dataset(dir.path() / "pseudo.tsv"));
        ASSERT_EQ(back.images.size(), set.images.size());
        EXPECT_EQ(back.count, set.count);
        for (std::size_t i = 0; i < set.images.size(); ++i) {
            EXPECT_EQ(back.images[i].image_path, set.images[i].image_path);
            ASSERT_EQ(back.images[i].annotations.size(), set.images[i].annotations.size());
            for (std::size_t k = 0; k < set.images[i].annotations.size(); ++k) {
                const auto& x = set.images[i].annotations[k];
                const auto& y = back.images[i].annotations[k];
                EXPECT_EQ(x.box, y.box);
                // outlines carry no holes
                EXPECT_EQ(oracle::fill_holes(x.mask), y.mask);
                EXPECT_EQ(x.score, y.score);
                EXPECT_EQ(x.provenance, y.provenance);
                EXPECT_EQ(x.round, 1);
            }
        }
    }
}

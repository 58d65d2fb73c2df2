#pragma once

// Pseudo-annotation strategies: turn a detector's output on unlabeled or
// rectangle-labeled images into (box, mask) pairs that are trained on as if
// they were ground truth.
//
//   naive   keep candidates with score > S
//   filter  keep candidates with score > S' whose box overlaps some weak
//           rectangle with IoU > T
//   local   feed every weak rectangle to the box-conditioned mask predictor
//           and keep each (rectangle, mask) pair unconditionally

#include "textboot/data.hpp"
#include "textboot/detector.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace textboot {

enum class Strategy { Naive, Filter, Local };

std::string_view to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view s);

struct StrategyConfig {
    double score_s = 0.5;        // naive score threshold
    double score_s_prime = 0.4;  // filter score threshold
    double iou_t = 0.3;          // filter box-IoU threshold
    bool keep_empty_local_masks = true;

    void validate() const;
};

struct PseudoAnnotation {
    AxisRect box;
    BitMask mask; // image frame, confined to box
    Strategy provenance = Strategy::Naive;
    int round = 0;
    std::optional<double> score; // candidate score; absent for local masks
};

struct PseudoImage {
    std::string image_id;
    std::string image_path; // absolute
    std::vector<PseudoAnnotation> annotations;
};

struct PseudoSet {
    std::vector<PseudoImage> images; // sorted by image_id
    std::size_t count = 0;           // total annotations
    double mean_score = 0.0;         // over annotations that carry a score

    void recompute_stats() noexcept;
};

std::vector<PseudoAnnotation> naive_select(const std::vector<Detection>& candidates, const StrategyConfig& cfg,
                                           int round = 0);

std::vector<PseudoAnnotation> filter_select(const std::vector<Detection>& candidates,
                                            const std::vector<AxisRect>& weak_boxes, const StrategyConfig& cfg,
                                            int round = 0);

/// One annotation per weak box, in input order (empty masks kept unless
/// cfg.keep_empty_local_masks is false). Propagates DegenerateBox.
std::vector<PseudoAnnotation> local_generate(const Detector& model, const GrayImage& image,
                                             const std::vector<AxisRect>& weak_boxes, const StrategyConfig& cfg = {},
                                             int round = 0);

/// Applies a strategy to every pool image. NAIVE accepts WEAK or NONE pools
/// (rectangles ignored); FILTER and LOCAL need WEAK. Throws TierMismatch.
PseudoSet annotate_pool(const Detector& model, const Dataset& pool, Strategy strategy, const StrategyConfig& cfg,
                        int round = 0);

/// Pseudo labels as a STRONG manifest: each mask becomes its traced outline
/// polygons, with attributes recording provenance, round and the per-annotation
/// boxes, scores and polygon counts so the annotation structure survives.
Dataset pseudo_to_dataset(const PseudoSet& set, int width, int height);
/// Inverse of pseudo_to_dataset (masks are re-rasterised outlines).
PseudoSet dataset_to_pseudo(const Dataset& d);

} // namespace textboot

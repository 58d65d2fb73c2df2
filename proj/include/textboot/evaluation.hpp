#pragma once

#include "textboot/data.hpp"
#include "textboot/detector.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace textboot {

enum class MatchOn { Mask, Box };

struct EvalConfig {
    double iou_threshold = 0.5;
    MatchOn match_on = MatchOn::Mask;

    void validate() const;
};

struct MatchCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

struct ImageEval {
    std::string image_id;
    MatchCounts counts;
};

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    MatchCounts totals;
    std::vector<ImageEval> per_image; // sorted by image_id
};

/// Harmonic mean, 0 when p + r == 0.
double f_measure(double precision, double recall) noexcept;
/// Fills precision/recall/F from `totals`.
void finalize_report(EvalReport& r) noexcept;

/// IoU table indexed [detection][truth].
using IouTable = std::vector<std::vector<double>>;

/// Detections are visited in row order; each takes the unmatched truth of
/// highest IoU (lowest index on ties) and counts as a true positive iff that
/// IoU reaches `threshold`.
MatchCounts greedy_match(const IouTable& iou, std::size_t n_truth, double threshold);

/// Exhaustive maximum one-to-one assignment. Test oracle for greedy_match;
/// throws TooLarge above 8 detections or 8 truths.
MatchCounts brute_force_match(const IouTable& iou, std::size_t n_truth, double threshold);

struct ImageDetections {
    std::string image_id;
    std::vector<Detection> detections;
};

/// Greedy score-ordered matching per image, micro-averaged over images.
/// Throws TierMismatch (non-STRONG truth), DimensionMismatch, InvalidArgument
/// (detections for an image absent from the truth).
EvalReport evaluate(const std::vector<ImageDetections>& detections, const Dataset& truth, const EvalConfig& cfg);

/// Text form used by the CLI and the round metrics files.
std::string format_report(const EvalReport& r);

} // namespace textboot

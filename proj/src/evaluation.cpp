#include "textboot/evaluation.hpp"

#include "textboot/error.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <map>
#include <numeric>

namespace textboot {

void EvalConfig::validate() const {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
        throw Error(ErrorCode::InvalidArgument, "IoU threshold must lie in (0,1)");
}

double f_measure(double precision, double recall) noexcept {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

void finalize_report(EvalReport& r) noexcept {
    const auto& t = r.totals;
    r.precision = (t.tp + t.fp) ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp) : 0.0;
    r.recall = (t.tp + t.fn) ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn) : 0.0;
    r.f_measure = f_measure(r.precision, r.recall);
}

MatchCounts greedy_match(const IouTable& iou, std::size_t n_truth, double threshold) {
    std::vector<bool> taken(n_truth, false);
    MatchCounts c;
    for (const auto& row : iou) {
        if (row.size() != n_truth)
            throw Error(ErrorCode::DimensionMismatch, "IoU table row length differs from truth count");
        std::size_t best = n_truth;
        double best_iou = -1.0;
        for (std::size_t g = 0; g < n_truth; ++g) {
            if (!taken[g] && row[g] > best_iou) {
                best_iou = row[g];
                best = g;
            }
        }
        if (best < n_truth && best_iou >= threshold) {
            taken[best] = true;
            ++c.tp;
        } else {
            ++c.fp;
        }
    }
    c.fn = n_truth - c.tp;
    return c;
}

namespace {

std::size_t best_assignment(const IouTable& iou, std::size_t det, std::vector<bool>& taken, double threshold) {
    if (det == iou.size())
        return 0;
    std::size_t best = best_assignment(iou, det + 1, taken, threshold); // leave this detection unmatched
    for (std::size_t g = 0; g < taken.size(); ++g) {
        if (taken[g] || iou[det][g] < threshold)
            continue;
        taken[g] = true;
        best = std::max(best, 1 + best_assignment(iou, det + 1, taken, threshold));
        taken[g] = false;
    }
    return best;
}

} // namespace

MatchCounts brute_force_match(const IouTable& iou, std::size_t n_truth, double threshold) {
    constexpr std::size_t kCap = 8;
    if (iou.size() > kCap || n_truth > kCap)
        throw Error(ErrorCode::TooLarge, "exhaustive matching is limited to 8x8 instances");
    for (const auto& row : iou)
        if (row.size() != n_truth)
            throw Error(ErrorCode::DimensionMismatch, "IoU table row length differs from truth count");
    std::vector<bool> taken(n_truth, false);
    MatchCounts c;
    c.tp = best_assignment(iou, 0, taken, threshold);
    c.fp = iou.size() - c.tp;
    c.fn = n_truth - c.tp;
    return c;
}

EvalReport evaluate(const std::vector<ImageDetections>& detections, const Dataset& truth, const EvalConfig& cfg) {
    cfg.validate();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < truth.records.size(); ++i) {
        const auto& r = truth.records[i];
        if (r.tier != Tier::Strong)
            throw Error(ErrorCode::TierMismatch, "ground truth '" + r.image_id + "' is not STRONG");
        index.emplace(r.image_id, i);
    }
    std::vector<const std::vector<Detection>*> per_record(truth.records.size(), nullptr);
    for (const auto& d : detections) {
        auto it = index.find(d.image_id);
        if (it == index.end())
            throw Error(ErrorCode::InvalidArgument, "detections for unknown image '" + d.image_id + "'");
        if (per_record[it->second])
            throw Error(ErrorCode::InvalidArgument, "duplicate detections for image '" + d.image_id + "'");
        per_record[it->second] = &d.detections;
    }

    const int W = truth.image_width, H = truth.image_height;
    const auto n = static_cast<std::ptrdiff_t>(truth.records.size());
    std::vector<MatchCounts> counts(truth.records.size());
    std::vector<std::exception_ptr> errors(truth.records.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto& rec = truth.records[static_cast<std::size_t>(i)];
            static const std::vector<Detection> kNone;
            const auto& dets = per_record[static_cast<std::size_t>(i)] ? *per_record[static_cast<std::size_t>(i)] : kNone;

            std::vector<std::size_t> order(dets.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

            std::vector<BitMask> truth_masks;
            if (cfg.match_on == MatchOn::Mask) {
                if (W < 1 || H < 1)
                    throw Error(ErrorCode::DimensionMismatch, "truth dataset has no image dimensions");
                for (const auto& p : rec.polygons)
                    truth_masks.push_back(rasterize(p, W, H));
            }
            IouTable table;
            table.reserve(dets.size());
            for (std::size_t k : order) {
                const auto& d = dets[k];
                std::vector<double> row;
                row.reserve(rec.polygons.size());
                for (std::size_t g = 0; g < rec.polygons.size(); ++g) {
                    if (cfg.match_on == MatchOn::Mask) {
                        if (d.mask.width() != W || d.mask.height() != H || !d.mask.image_frame())
                            throw Error(ErrorCode::DimensionMismatch,
                                        "detection mask for '" + rec.image_id + "' does not match the image size");
                        row.push_back(mask_iou(d.mask, truth_masks[g]));
                    } else {
                        row.push_back(rect_iou(d.box, rec.polygons[g].bounds()));
                    }
                }
                table.push_back(std::move(row));
            }
            counts[static_cast<std::size_t>(i)] = greedy_match(table, rec.polygons.size(), cfg.iou_threshold);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    EvalReport report;
    for (std::size_t i = 0; i < truth.records.size(); ++i) {
        report.totals.tp += counts[i].tp;
        report.totals.fp += counts[i].fp;
        report.totals.fn += counts[i].fn;
        report.per_image.push_back({truth.records[i].image_id, counts[i]});
    }
    std::sort(report.per_image.begin(), report.per_image.end(),
              [](const ImageEval& a, const ImageEval& b) { return a.image_id < b.image_id; });
    finalize_report(report);
    return report;
}

std::string format_report(const EvalReport& r) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "P=%.3f R=%.3f F=%.3f TP=%zu FP=%zu FN=%zu\n", r.precision, r.recall,
                  r.f_measure, r.totals.tp, r.totals.fp, r.totals.fn);
    out += line;
    for (const auto& img : r.per_image) {
        std::snprintf(line, sizeof(line), "image %s TP=%zu FP=%zu FN=%zu\n", img.image_id.c_str(), img.counts.tp,
                      img.counts.fp, img.counts.fn);
        out += line;
    }
    return out;
}

} // namespace textboot

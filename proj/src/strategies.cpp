#include "textboot/strategies.hpp"

#include "textboot/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>

namespace textboot {

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
    case Strategy::Naive: return "NAIVE";
    case Strategy::Filter: return "FILTER";
    case Strategy::Local: return "LOCAL";
    }
    return "NAIVE";
}

Strategy parse_strategy(std::string_view s) {
    std::string up(s);
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (up == "NAIVE")
        return Strategy::Naive;
    if (up == "FILTER")
        return Strategy::Filter;
    if (up == "LOCAL")
        return Strategy::Local;
    throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

void StrategyConfig::validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(score_s) || !unit(score_s_prime) || !unit(iou_t))
        throw Error(ErrorCode::InvalidArgument, "strategy thresholds must lie in [0,1]");
}

void PseudoSet::recompute_stats() noexcept {
    count = 0;
    double sum = 0.0;
    std::size_t scored = 0;
    for (const auto& img : images) {
        count += img.annotations.size();
        for (const auto& a : img.annotations)
            if (a.score) {
                sum += *a.score;
                ++scored;
            }
    }
    mean_score = scored ? sum / static_cast<double>(scored) : 0.0;
}

std::vector<PseudoAnnotation> naive_select(const std::vector<Detection>& candidates, const StrategyConfig& cfg,
                                           int round) {
    cfg.validate();
    std::vector<PseudoAnnotation> out;
    for (const auto& c : candidates)
        if (c.score > cfg.score_s)
            out.push_back({c.box, c.mask, Strategy::Naive, round, c.score});
    return out;
}

std::vector<PseudoAnnotation> filter_select(const std::vector<Detection>& candidates,
                                            const std::vector<AxisRect>& weak_boxes, const StrategyConfig& cfg,
                                            int round) {
    cfg.validate();
    std::vector<PseudoAnnotation> out;
    if (weak_boxes.empty())
        return out;
    for (const auto& c : candidates) {
        if (!(c.score > cfg.score_s_prime))
            continue;
        double best = 0.0;
        for (const auto& g : weak_boxes)
            best = std::max(best, rect_iou(c.box, g));
        if (best > cfg.iou_t)
            out.push_back({c.box, c.mask, Strategy::Filter, round, c.score});
    }
    return out;
}

std::vector<PseudoAnnotation> local_generate(const Detector& model, const GrayImage& image,
                                             const std::vector<AxisRect>& weak_boxes, const StrategyConfig& cfg,
                                             int round) {
    cfg.validate();
    std::vector<PseudoAnnotation> out;
    out.reserve(weak_boxes.size());
    for (const auto& g : weak_boxes) {
        BitMask m = model.mask_for_box(image, g);
        if (m.empty() && !cfg.keep_empty_local_masks)
            continue;
        out.push_back({g, std::move(m), Strategy::Local, round, std::nullopt});
    }
    return out;
}

PseudoSet annotate_pool(const Detector& model, const Dataset& pool, Strategy strategy, const StrategyConfig& cfg,
                        int round) {
    cfg.validate();
    for (const auto& r : pool.records) {
        const bool ok = strategy == Strategy::Naive ? (r.tier == Tier::None || r.tier == Tier::Weak)
                                                    : r.tier == Tier::Weak;
        if (!ok)
            throw Error(ErrorCode::TierMismatch, std::string(to_string(strategy)) + " strategy cannot use " +
                                                     std::string(to_string(r.tier)) + " record '" + r.image_id +
                                                     "'");
    }

    PseudoSet set;
    set.images.resize(pool.records.size());
    std::vector<std::exception_ptr> errors(pool.records.size());
    const auto n = static_cast<std::ptrdiff_t>(pool.records.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& rec = pool.records[static_cast<std::size_t>(i)];
        auto& img_out = set.images[static_cast<std::size_t>(i)];
        try {
            const GrayImage img = pool.load_image(rec);
            img_out.image_id = rec.image_id;
            img_out.image_path = std::filesystem::absolute(pool.image_file(rec)).lexically_normal().string();
            switch (strategy) {
            case Strategy::Naive: img_out.annotations = naive_select(model.detect(img), cfg, round); break;
            case Strategy::Filter: img_out.annotations = filter_select(model.detect(img), rec.rects, cfg, round); break;
            case Strategy::Local: img_out.annotations = local_generate(model, img, rec.rects, cfg, round); break;
            }
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    std::stable_sort(set.images.begin(), set.images.end(),
                     [](const PseudoImage& a, const PseudoImage& b) { return a.image_id < b.image_id; });
    set.recompute_stats();
    return set;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    if (s.empty())
        return out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

double to_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw Error(ErrorCode::ParseError, "bad number '" + std::string(s) + "' in pseudo attributes");
    return v;
}

} // namespace

Dataset pseudo_to_dataset(const PseudoSet& set, int width, int height) {
    Dataset d;
    d.image_width = width;
    d.image_height = height;
    d.root = "/";
    for (const auto& img : set.images) {
        AnnotationRecord r;
        r.image_id = img.image_id;
        r.image_path = img.image_path;
        r.tier = Tier::Strong;
        std::string boxes, parts, scores;
        Strategy provenance = Strategy::Local;
        int round = 0;
        for (std::size_t i = 0; i < img.annotations.size(); ++i) {
            const auto& a = img.annotations[i];
            provenance = a.provenance;
            round = a.round;
            auto polys = mask_to_polygon(a.mask);
            if (i) {
                boxes += ';';
                parts += ',';
                scores += ',';
            }
            boxes += format_number(a.box.x_min) + ',' + format_number(a.box.y_min) + ',' + format_number(a.box.x_max) +
                     ',' + format_number(a.box.y_max);
            parts += std::to_string(polys.size());
            scores += a.score ? format_number(*a.score) : std::string("-");
            for (auto& p : polys)
                r.polygons.push_back(std::move(p));
        }
        if (!img.annotations.empty()) {
            r.attributes.emplace_back("provenance", std::string(to_string(provenance)));
            r.attributes.emplace_back("round", std::to_string(round));
            r.attributes.emplace_back("boxes", boxes);
            r.attributes.emplace_back("parts", parts);
            r.attributes.emplace_back("scores", scores);
        }
        d.records.push_back(std::move(r));
    }
    return d;
}

PseudoSet dataset_to_pseudo(const Dataset& d) {
    PseudoSet set;
    const int W = d.image_width, H = d.image_height;
    for (const auto& r : d.records) {
        if (r.tier != Tier::Strong)
            throw Error(ErrorCode::TierMismatch, "pseudo manifest record '" + r.image_id + "' is not STRONG");
        PseudoImage img;
        img.image_id = r.image_id;
        img.image_path = d.image_file(r).string();
        const std::string* boxes = r.attribute("boxes");
        if (!boxes) {
            for (const auto& p : r.polygons) {
                PseudoAnnotation a{p.bounds(), rasterize(p, W, H), Strategy::Local, 0, std::nullopt};
                img.annotations.push_back(std::move(a));
            }
            set.images.push_back(std::move(img));
            continue;
        }
        const std::string* parts = r.attribute("parts");
        const std::string* scores = r.attribute("scores");
        const std::string* prov = r.attribute("provenance");
        const std::string* round = r.attribute("round");
        if (!parts || !scores || !prov || !round)
            throw Error(ErrorCode::ParseError, "incomplete pseudo attributes for '" + r.image_id + "'");
        const auto box_items = split(*boxes, ';');
        const auto part_items = split(*parts, ',');
        const auto score_items = split(*scores, ',');
        if (box_items.size() != part_items.size() || box_items.size() != score_items.size())
            throw Error(ErrorCode::ParseError, "pseudo attribute lists differ in length for '" + r.image_id + "'");
        const Strategy provenance = parse_strategy(*prov);
        const int round_no = static_cast<int>(to_double(*round));
        std::size_t next_poly = 0;
        for (std::size_t i = 0; i < box_items.size(); ++i) {
            const auto coords = split(box_items[i], ',');
            if (coords.size() != 4)
                throw Error(ErrorCode::ParseError, "pseudo box needs 4 coordinates");
            const AxisRect box(to_double(coords[0]), to_double(coords[1]), to_double(coords[2]), to_double(coords[3]));
            const auto n_parts = static_cast<std::size_t>(to_double(part_items[i]));
            if (next_poly + n_parts > r.polygons.size())
                throw Error(ErrorCode::ParseError, "pseudo part counts exceed polygon count");
            BitMask mask(W, H);
            for (std::size_t k = 0; k < n_parts; ++k)
                mask |= rasterize(r.polygons[next_poly++], W, H);
            std::optional<double> score;
            if (score_items[i] != "-")
                score = to_double(score_items[i]);
            img.annotations.push_back({box, std::move(mask), provenance, round_no, score});
        }
        if (next_poly != r.polygons.size())
            throw Error(ErrorCode::ParseError, "pseudo part counts do not cover all polygons");
        set.images.push_back(std::move(img));
    }
    std::stable_sort(set.images.begin(), set.images.end(),
                     [](const PseudoImage& a, const PseudoImage& b) { return a.image_id < b.image_id; });
    set.recompute_stats();
    return set;
}

} // namespace textboot

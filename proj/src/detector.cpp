#include "textboot/detector.hpp"

#include "textboot/error.hpp"
#include "textboot/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

namespace textboot {

void validate_detection(const Detection& d) {
    if (!(d.score >= 0.0 && d.score <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "detection score outside [0,1]");
    if (!d.mask.image_frame())
        throw Error(ErrorCode::InvalidArgument, "detection mask must be in the image frame");
    const PixelSpan span = pixel_span(d.box, d.mask.width(), d.mask.height());
    for (int y = 0; y < d.mask.height(); ++y)
        for (int x = 0; x < d.mask.width(); ++x)
            if (d.mask.get(x, y) && (x < span.x0 || x >= span.x1 || y < span.y0 || y >= span.y1))
                throw Error(ErrorCode::InvalidArgument, "detection mask pixel outside its box");
}

void TrainConfig::validate() const {
    if (epochs < 1)
        throw Error(ErrorCode::InvalidArgument, "epochs must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    if (batch_size < 1)
        throw Error(ErrorCode::InvalidArgument, "batch size must be at least 1");
    if (!(score_threshold_for_proposals > 0.0 && score_threshold_for_proposals < 1.0))
        throw Error(ErrorCode::InvalidArgument, "proposal threshold must lie in (0,1)");
    if (min_component_pixels < 1)
        throw Error(ErrorCode::InvalidArgument, "min_component_pixels must be at least 1");
    if (patch_radius < 0 || patch_radius > 8)
        throw Error(ErrorCode::InvalidArgument, "patch radius must lie in [0,8]");
    if (!(positive_weight > 0.0))
        throw Error(ErrorCode::InvalidArgument, "positive weight must be positive");
}

DetectorModel::DetectorModel(int patch_radius, std::vector<double> weights, double proposal_threshold,
                             int min_component_pixels, Metadata meta)
    : patch_radius_(patch_radius), weights_(std::move(weights)), proposal_threshold_(proposal_threshold),
      min_component_pixels_(min_component_pixels), meta_(meta) {
    if (patch_radius < 0 || patch_radius > 8)
        throw Error(ErrorCode::InvalidArgument, "patch radius must lie in [0,8]");
    if (weights_.size() != kernels::feature_count(patch_radius))
        throw Error(ErrorCode::DimensionMismatch, "weight vector does not match the feature layout");
    for (double w : weights_)
        if (!std::isfinite(w))
            throw Error(ErrorCode::NonFiniteLoss, "model parameter is not finite");
    if (!(proposal_threshold > 0.0 && proposal_threshold < 1.0) || min_component_pixels < 1)
        throw Error(ErrorCode::InvalidArgument, "invalid proposal settings");
}

std::vector<float> DetectorModel::probability_map(const GrayImage& image) const {
    const kernels::FeaturePlane plane(image, patch_radius_);
    std::vector<float> prob(image.pixels.size());
    kernels::probability_map(plane, weights_, prob);
    return prob;
}

std::vector<Detection> components_to_detections(const std::vector<float>& prob, int width, int height,
                                                double threshold, int min_pixels, double mask_threshold) {
    BitMask above(width, height);
    BitMask confident(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const float p = prob[static_cast<std::size_t>(y) * width + x];
            if (p > threshold)
                above.set(x, y);
            if (p > mask_threshold)
                confident.set(x, y);
        }
    const Components comps = label_components(above);

    std::vector<double> sums(static_cast<std::size_t>(comps.count), 0.0);
    for (std::size_t i = 0; i < comps.labels.size(); ++i)
        if (comps.labels[i] > 0)
            sums[static_cast<std::size_t>(comps.labels[i] - 1)] += prob[i];

    std::vector<Detection> out;
    for (int label = 1; label <= comps.count; ++label) {
        const std::size_t size = comps.sizes[static_cast<std::size_t>(label - 1)];
        if (size < static_cast<std::size_t>(min_pixels))
            continue;
        BitMask mask = component_mask(comps, label);
        if (mask_threshold > threshold) {
            BitMask core(width, height);
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x)
                    if (mask.get(x, y) && confident.get(x, y))
                        core.set(x, y);
            if (core.empty() || core.count() < static_cast<std::size_t>(min_pixels))
                continue;
            mask = std::move(core);
        }
        const AxisRect box = mask_bbox(mask);
        const double score = std::clamp(sums[static_cast<std::size_t>(label - 1)] / static_cast<double>(size), 0.0, 1.0);
        out.push_back({box, std::move(mask), score});
    }
    std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    return out;
}

std::vector<Detection> DetectorModel::detect(const GrayImage& image) const {
    return components_to_detections(probability_map(image), image.width, image.height, proposal_threshold_,
                                    min_component_pixels_, kMaskThreshold);
}

BitMask DetectorModel::mask_for_box(const GrayImage& image, const AxisRect& box) const {
    if (!(box.area() > 0.0))
        throw Error(ErrorCode::DegenerateBox, "box has zero area");
    BitMask out(image.width, image.height);
    const PixelSpan span = pixel_span(box, image.width, image.height);
    if (span.empty())
        return out;
    const kernels::FeaturePlane plane(image, patch_radius_);
    std::vector<float> f(plane.feature_count());
    for (int y = span.y0; y < span.y1; ++y)
        for (int x = span.x0; x < span.x1; ++x) {
            plane.features(x, y, f);
            double z = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i)
                z += static_cast<double>(f[i]) * weights_[i];
            // same float rounding as the full probability map
            if (static_cast<float>(kernels::sigmoid(z)) > kMaskThreshold)
                out.set(x, y);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Model file: little-endian
//   magic "TXBTDMDL" | u32 version | u32 patch_radius | u32 n_params
//   f64 proposal_threshold | u32 min_component_pixels
//   u32 rounds_seen | u32 epochs | u64 seed
//   f64[n_params] weights | u64 FNV-1a checksum of everything before it
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'X', 'B', 'T', 'D', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), c, c + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i)
            buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i)
            buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    std::vector<unsigned char> buf;
};

class Reader {
public:
    explicit Reader(const std::vector<unsigned char>& b) : buf(b) {}
    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw Error(ErrorCode::ParseError, "model file is truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }

    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;
};

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

void DetectorModel::save(const std::filesystem::path& path) const {
    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(patch_radius_));
    w.u32(static_cast<std::uint32_t>(weights_.size()));
    w.f64(proposal_threshold_);
    w.u32(static_cast<std::uint32_t>(min_component_pixels_));
    w.u32(meta_.rounds_seen);
    w.u32(meta_.epochs);
    w.u64(meta_.seed);
    for (double v : weights_)
        w.f64(v);
    w.u64(fnv1a(w.buf.data(), w.buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write model " + path.string());
    out.write(reinterpret_cast<const char*>(w.buf.data()), static_cast<std::streamsize>(w.buf.size()));
    if (!out)
        throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

DetectorModel DetectorModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open model " + path.string());
    const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < sizeof(kMagic) + 4 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw Error(ErrorCode::VersionMismatch, "not a textboot model file: " + path.string());
    Reader r(buf);
    r.pos = sizeof(kMagic);
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw Error(ErrorCode::VersionMismatch, "model version " + std::to_string(version) + " is not supported");
    const auto radius = static_cast<int>(r.u32());
    const std::uint32_t n = r.u32();
    const double threshold = r.f64();
    const auto min_pixels = static_cast<int>(r.u32());
    Metadata meta;
    meta.rounds_seen = r.u32();
    meta.epochs = r.u32();
    meta.seed = r.u64();
    if (n > (1u << 20))
        throw Error(ErrorCode::ParseError, "implausible parameter count");
    r.need(static_cast<std::size_t>(n) * 8 + 8);
    std::vector<double> weights(n);
    for (auto& v : weights)
        v = r.f64();
    const std::size_t payload = r.pos;
    if (r.u64() != fnv1a(buf.data(), payload))
        throw Error(ErrorCode::ParseError, "model checksum mismatch");
    if (r.pos != buf.size())
        throw Error(ErrorCode::ParseError, "trailing bytes after model payload");
    try {
        return DetectorModel(radius, std::move(weights), threshold, min_pixels, meta);
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, std::string("invalid model contents: ") + e.what());
    }
}

DetectorModel train(const DetectorModel* base, const std::vector<TrainExample>& examples, const TrainConfig& cfg) {
    return train(base, examples, cfg, nullptr);
}

DetectorModel train(const DetectorModel* base, const std::vector<TrainExample>& examples, const TrainConfig& cfg,
                    TrainLog* log) {
    cfg.validate();
    if (examples.empty())
        throw Error(ErrorCode::EmptyTrainingSet, "no training examples");

    const int radius = base ? base->patch_radius() : cfg.patch_radius;
    std::vector<double> weights = base ? base->weights() : std::vector<double>(kernels::feature_count(radius), 0.0);

    std::vector<kernels::FeaturePlane> planes;
    planes.reserve(examples.size());
    std::vector<kernels::PixelSample> samples;
    for (std::size_t e = 0; e < examples.size(); ++e) {
        const auto& ex = examples[e];
        if (!ex.image || ex.image->pixels.empty())
            throw Error(ErrorCode::InvalidArgument, "training example without an image");
        const GrayImage& img = *ex.image;
        if (img.width > 65535 || img.height > 65535)
            throw Error(ErrorCode::InvalidArgument, "image too large for the toy detector");
        BitMask label(img.width, img.height);
        for (const auto& m : ex.masks) {
            if (m.width() != img.width || m.height() != img.height || !m.image_frame())
                throw Error(ErrorCode::DimensionMismatch, "training mask does not match its image");
            label |= m;
        }
        planes.emplace_back(img, radius);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                samples.push_back({static_cast<std::uint32_t>(e), static_cast<std::uint16_t>(x),
                                   static_cast<std::uint16_t>(y), label.get(x, y) ? 1.0f : 0.0f});
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<double> grad(weights.size());
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    if (log)
        log->epoch_loss.clear();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = samples.size() - 1; i > 0; --i)
            std::swap(samples[i], samples[static_cast<std::size_t>(rng() % (i + 1))]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < samples.size(); start += batch) {
            const std::size_t count = std::min(batch, samples.size() - start);
            const auto res = kernels::batch_gradient(planes, std::span(samples).subspan(start, count), weights,
                                                     cfg.positive_weight, grad);
            if (!std::isfinite(res.loss_sum))
                throw Error(ErrorCode::NonFiniteLoss, "training loss diverged in epoch " + std::to_string(epoch));
            epoch_loss += res.loss_sum;
            const double step = cfg.learning_rate / static_cast<double>(count);
            for (std::size_t k = 0; k < weights.size(); ++k)
                weights[k] -= step * grad[k];
        }
        for (double w : weights)
            if (!std::isfinite(w))
                throw Error(ErrorCode::NonFiniteLoss, "parameters diverged in epoch " + std::to_string(epoch));
        if (log)
            log->epoch_loss.push_back(epoch_loss / static_cast<double>(samples.size()));
    }

    DetectorModel::Metadata meta;
    meta.rounds_seen = base ? base->metadata().rounds_seen + 1 : 0;
    meta.epochs = (base ? base->metadata().epochs : 0) + static_cast<std::uint32_t>(cfg.epochs);
    meta.seed = cfg.seed;
    return DetectorModel(radius, std::move(weights), cfg.score_threshold_for_proposals, cfg.min_component_pixels,
                         meta);
}


namespace {

const DetectorModel& as_model(const Detector& d) {
    const auto* m = dynamic_cast<const DetectorModel*>(&d);
    if (!m)
        throw Error(ErrorCode::InvalidArgument, "detector is not a patch-logistic model");
    return *m;
}

} // namespace

std::shared_ptr<const Detector> PatchLogisticBackend::train(const Detector* base,
                                                            const std::vector<TrainExample>& examples,
                                                            const TrainConfig& cfg) const {
    const DetectorModel* start = base ? &as_model(*base) : nullptr;
    return std::make_shared<DetectorModel>(textboot::train(start, examples, cfg));
}

void PatchLogisticBackend::save(const Detector& model, const std::filesystem::path& path) const {
    as_model(model).save(path);
}

std::shared_ptr<const Detector> PatchLogisticBackend::load(const std::filesystem::path& path) const {
    return std::make_shared<DetectorModel>(DetectorModel::load(path));
}

} // namespace textboot

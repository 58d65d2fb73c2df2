#pragma once

#include "textboot/geometry.hpp"
#include "textboot/image.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

namespace textboot {

/// One detected instance: bounding box, image-frame mask and confidence.
struct Detection {
    AxisRect box;
    BitMask mask;
    double score = 0.0;
};

/// Throws InvalidArgument when the mask leaves the (clamped) box or the score
/// is outside [0,1].
void validate_detection(const Detection& d);

/// The inference half of the detector contract. Strategies and the evaluator
/// only see this interface.
class Detector {
public:
    virtual ~Detector() = default;

    /// Candidate instances sorted by descending score.
    virtual std::vector<Detection> detect(const GrayImage& image) const = 0;
    /// Instance mask predicted inside `box`; pixels outside the box are 0.
    /// Throws DegenerateBox on zero-area boxes.
    virtual BitMask mask_for_box(const GrayImage& image, const AxisRect& box) const = 0;
};

enum class ExampleSource { Original, Pseudo };

struct TrainExample {
    std::shared_ptr<const GrayImage> image;
    std::vector<BitMask> masks; // image frame; union gives the pixel labels
    ExampleSource source = ExampleSource::Original;
};

struct TrainConfig {
    int epochs = 2;
    double learning_rate = 0.5;
    int batch_size = 256;
    std::uint64_t seed = 7;
    double score_threshold_for_proposals = 0.35;
    int min_component_pixels = 12;
    int patch_radius = 2;
    double positive_weight = 3.0;

    /// Throws InvalidArgument when an invariant fails.
    void validate() const;
};

struct ModelMetadata {
    std::uint32_t rounds_seen = 0;
    std::uint32_t epochs = 0;
    std::uint64_t seed = 0;
    friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

/// Toy trainable detector: logistic regression over local patch features.
class DetectorModel final : public Detector {
public:
    static constexpr double kMaskThreshold = 0.5;

    using Metadata = ModelMetadata;

    DetectorModel(int patch_radius, std::vector<double> weights, double proposal_threshold, int min_component_pixels,
                  Metadata meta = {});

    int patch_radius() const noexcept { return patch_radius_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double proposal_threshold() const noexcept { return proposal_threshold_; }
    int min_component_pixels() const noexcept { return min_component_pixels_; }
    const Metadata& metadata() const noexcept { return meta_; }

    /// Per-pixel text probability, row-major.
    std::vector<float> probability_map(const GrayImage& image) const;

    std::vector<Detection> detect(const GrayImage& image) const override;
    BitMask mask_for_box(const GrayImage& image, const AxisRect& box) const override;

    void save(const std::filesystem::path& path) const;
    /// Throws IoError, VersionMismatch (bad magic/version) or ParseError
    /// (truncated or corrupt payload).
    static DetectorModel load(const std::filesystem::path& path);

    friend bool operator==(const DetectorModel& a, const DetectorModel& b) {
        return a.patch_radius_ == b.patch_radius_ && a.weights_ == b.weights_ &&
               a.proposal_threshold_ == b.proposal_threshold_ &&
               a.min_component_pixels_ == b.min_component_pixels_ && a.meta_ == b.meta_;
    }

private:
    int patch_radius_;
    std::vector<double> weights_;
    double proposal_threshold_;
    int min_component_pixels_;
    Metadata meta_;
};

/// Connected components of `prob > threshold` with at least `min_pixels`
/// pixels, scored by mean probability and sorted by descending score. The
/// mask keeps the component pixels with `prob > mask_threshold`; components
/// whose mask ends up with fewer than `min_pixels` pixels are dropped.
std::vector<Detection> components_to_detections(const std::vector<float>& prob, int width, int height,
                                                double threshold, int min_pixels, double mask_threshold);

/// Mini-batch gradient descent on per-pixel binary cross-entropy. Fine-tunes
/// from `base` when given. Throws EmptyTrainingSet, NonFiniteLoss.
DetectorModel train(const DetectorModel* base, const std::vector<TrainExample>& examples, const TrainConfig& cfg);

/// Mean per-pixel training loss of each epoch of the last `train` call is
/// reported here when non-null.
struct TrainLog {
    std::vector<double> epoch_loss;
};
DetectorModel train(const DetectorModel* base, const std::vector<TrainExample>& examples, const TrainConfig& cfg,
                    TrainLog* log);


/// The training half of the detector contract: how the recursive loop builds,
/// persists and restores models without knowing their internals.
class DetectorBackend {
public:
    virtual ~DetectorBackend() = default;

    virtual std::shared_ptr<const Detector> train(const Detector* base, const std::vector<TrainExample>& examples,
                                                  const TrainConfig& cfg) const = 0;
    virtual void save(const Detector& model, const std::filesystem::path& path) const = 0;
    virtual std::shared_ptr<const Detector> load(const std::filesystem::path& path) const = 0;
};

/// Backend for DetectorModel.
class PatchLogisticBackend final : public DetectorBackend {
public:
    std::shared_ptr<const Detector> train(const Detector* base, const std::vector<TrainExample>& examples,
                                          const TrainConfig& cfg) const override;
    void save(const Detector& model, const std::filesystem::path& path) const override;
    std::shared_ptr<const Detector> load(const std::filesystem::path& path) const override;
};

} // namespace textboot

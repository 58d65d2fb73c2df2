#pragma once

#include "textboot/geometry.hpp"
#include "textboot/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace textboot {

/// STRONG carries polygons, WEAK carries axis-aligned rectangles, NONE carries
/// no geometry.
enum class Tier { Strong, Weak, None };

std::string_view to_string(Tier t) noexcept;
Tier parse_tier(std::string_view s);

struct AnnotationRecord {
    std::string image_id;
    std::string image_path;
    Tier tier = Tier::None;
    std::vector<Polygon> polygons; // STRONG only
    std::vector<AxisRect> rects;   // WEAK only
    /// Trailing key=value fields, kept in file order (provenance, round, ...).
    std::vector<std::pair<std::string, std::string>> attributes;

    const std::string* attribute(std::string_view key) const noexcept;

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct Dataset {
    std::vector<AnnotationRecord> records;
    int image_width = 0;
    int image_height = 0;
    /// Directory relative image paths are resolved against.
    std::filesystem::path root;

    std::filesystem::path image_file(const AnnotationRecord& r) const;
    GrayImage load_image(const AnnotationRecord& r) const;
    /// Sum of geometry items over records (polygons or rectangles).
    std::size_t instance_count() const noexcept;

    /// Structural equality ignores `root`.
    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.records == b.records && a.image_width == b.image_width && a.image_height == b.image_height;
    }
};

struct LoadOptions {
    bool check_images = true;
};

/// Parses a manifest (grammar in docs/manifest.md). Throws ParseError with the
/// offending line number, MissingImage, TierViolation.
Dataset load_dataset(const std::filesystem::path& manifest_path, LoadOptions opts = {});
/// Parses manifest text; image paths are resolved against `root`.
Dataset parse_manifest(std::string_view text, const std::filesystem::path& root, LoadOptions opts = {});
/// Relative image paths are rewritten relative to the manifest's directory.
void save_dataset(const Dataset& d, const std::filesystem::path& manifest_path);
std::string format_manifest(const Dataset& d, const std::filesystem::path& manifest_dir);

/// Throws TierViolation when the record's geometry does not match its tier.
void validate_record(const AnnotationRecord& r);

AnnotationRecord downgrade_to_weak(const AnnotationRecord& r);
AnnotationRecord downgrade_to_none(const AnnotationRecord& r);

enum class Downgrade { Keep, Weak, None };

struct Split {
    Dataset strong;
    Dataset rest;
};

/// Uniform random selection of round(fraction * n) records, reproducible from
/// `seed`. Both halves keep the input order. Throws EmptyDataset.
Split split_dataset(const Dataset& d, double strong_fraction, std::uint64_t seed, Downgrade rest_tier = Downgrade::Weak);

/// Converts a directory of third-party polygon-per-line dumps
/// (`x1,y1,...,xn,yn[,transcription]`, one file per image sharing its stem)
/// into a STRONG dataset.
Dataset convert_polygon_dumps(const std::filesystem::path& image_dir, const std::filesystem::path& annotation_dir,
                              const std::filesystem::path& manifest_dir);

/// Formats a double with the shortest representation that round-trips.
std::string format_number(double v);

} // namespace textboot

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace textboot {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned rectangle with half-open pixel coverage: an integer rectangle
/// [x_min, x_max) x [y_min, y_max) covers exactly the pixels whose centers lie
/// inside it.
struct AxisRect {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    AxisRect() = default;
    /// Throws InvalidArgument when min > max or a coordinate is not finite.
    AxisRect(double x0, double y0, double x1, double y1);

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    double area() const noexcept { return width() * height(); }

    friend bool operator==(const AxisRect&, const AxisRect&) = default;
};

/// Simple polygon, implicitly closed. Construction rejects fewer than three
/// vertices, non-finite coordinates and properly crossing edges.
class Polygon {
public:
    explicit Polygon(std::vector<Point> vertices);

    const std::vector<Point>& vertices() const noexcept { return vertices_; }
    std::size_t size() const noexcept { return vertices_.size(); }

    double perimeter() const noexcept;
    AxisRect bounds() const noexcept;

    friend bool operator==(const Polygon&, const Polygon&) = default;

private:
    std::vector<Point> vertices_;
};

/// Row-major packed binary raster. `frame` is empty for image coordinates and
/// holds the source rectangle for box-local windows.
class BitMask {
public:
    BitMask(int width, int height, std::optional<AxisRect> frame = std::nullopt);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const std::optional<AxisRect>& frame() const noexcept { return frame_; }
    bool image_frame() const noexcept { return !frame_.has_value(); }

    bool get(int x, int y) const noexcept {
        const std::size_t i = index(x, y);
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }
    void set(int x, int y, bool on = true) noexcept {
        const std::size_t i = index(x, y);
        const std::uint64_t bit = std::uint64_t{1} << (i & 63);
        if (on)
            words_[i >> 6] |= bit;
        else
            words_[i >> 6] &= ~bit;
    }

    std::size_t count() const noexcept;
    bool empty() const noexcept { return count() == 0; }
    bool same_shape(const BitMask& other) const noexcept;

    /// Number of pixels set in both masks. Shapes must match.
    std::size_t intersection_count(const BitMask& other) const;
    std::size_t union_count(const BitMask& other) const;
    /// In-place union; shapes must match.
    BitMask& operator|=(const BitMask& other);

    std::span<const std::uint64_t> words() const noexcept { return words_; }

    friend bool operator==(const BitMask&, const BitMask&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }
    void check_shape(const BitMask& other) const;

    int width_;
    int height_;
    std::optional<AxisRect> frame_;
    std::vector<std::uint64_t> words_;
};

/// Half-open integer pixel range covered by a rectangle, clamped to a frame.
struct PixelSpan {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool empty() const noexcept { return x0 >= x1 || y0 >= y1; }
};

/// Pixels whose centers fall inside `box`, clamped to [0,width) x [0,height).
PixelSpan pixel_span(const AxisRect& box, int width, int height) noexcept;

double polygon_area(const Polygon& p) noexcept;
double rect_iou(const AxisRect& a, const AxisRect& b) noexcept;
/// Even-odd rule at pixel centers; pixels outside the grid are dropped.
BitMask rasterize(const Polygon& p, int width, int height);
/// |a & b| / |a | b|, zero when both are empty. Throws DimensionMismatch.
double mask_iou(const BitMask& a, const BitMask& b);
/// Tightest half-open rectangle around the set pixels. Throws EmptyMask.
AxisRect mask_bbox(const BitMask& m);
/// Nearest-neighbour resample of the part of `m` under `box` into an
/// out_w x out_h box-frame window. Throws DegenerateBox.
BitMask crop_mask(const BitMask& m, const AxisRect& box, int out_w, int out_h);
/// Outer pixel-boundary contour of each 4-connected component, in raster
/// order of the component's first pixel.
std::vector<Polygon> mask_to_polygon(const BitMask& m);

/// 4-connected component labelling. Labels start at 1 in raster order of
/// each component's first pixel; 0 is background.
struct Components {
    int width = 0;
    int height = 0;
    int count = 0;
    std::vector<int> labels;
    std::vector<std::size_t> sizes; // indexed by label - 1
};
Components label_components(const BitMask& m);

/// Pixels of component `label` as an image-frame mask.
BitMask component_mask(const Components& c, int label);

} // namespace textboot

#include "textboot/geometry.hpp"

#include "textboot/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

namespace textboot {

namespace {

double cross(const Point& a, const Point& b, const Point& c) noexcept {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

int sign(double v) noexcept { return (v > 0.0) - (v < 0.0); }

// True when segments ab and cd cross at an interior point or overlap along
// a collinear stretch longer than a point. Touching is allowed.
bool segments_conflict(const Point& a, const Point& b, const Point& c, const Point& d) noexcept {
    const int o1 = sign(cross(a, b, c));
    const int o2 = sign(cross(a, b, d));
    const int o3 = sign(cross(c, d, a));
    const int o4 = sign(cross(c, d, b));
    if (o1 * o2 < 0 && o3 * o4 < 0)
        return true;
    if (o1 == 0 && o2 == 0 && o3 == 0 && o4 == 0) {
        // Collinear: project onto the dominant axis and test for overlap of positive length.
        const bool use_x = std::abs(b.x - a.x) + std::abs(d.x - c.x) >= std::abs(b.y - a.y) + std::abs(d.y - c.y);
        const double a0 = use_x ? std::min(a.x, b.x) : std::min(a.y, b.y);
        const double a1 = use_x ? std::max(a.x, b.x) : std::max(a.y, b.y);
        const double c0 = use_x ? std::min(c.x, d.x) : std::min(c.y, d.y);
        const double c1 = use_x ? std::max(c.x, d.x) : std::max(c.y, d.y);
        return std::min(a1, c1) > std::max(a0, c0);
    }
    return false;
}

} // namespace

AxisRect::AxisRect(double x0, double y0, double x1, double y1) : x_min(x0), y_min(y0), x_max(x1), y_max(y1) {
    if (!std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(x1) || !std::isfinite(y1))
        throw Error(ErrorCode::InvalidArgument, "rectangle coordinates must be finite");
    if (x0 > x1 || y0 > y1)
        throw Error(ErrorCode::InvalidArgument, "rectangle min exceeds max");
}

Polygon::Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
    const std::size_t n = vertices_.size();
    if (n < 3)
        throw Error(ErrorCode::InvalidArgument, "polygon needs at least 3 vertices, got " + std::to_string(n));
    for (const auto& p : vertices_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw Error(ErrorCode::InvalidArgument, "polygon vertex is not finite");
    }
    if (n < 4)
        return;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = vertices_[i];
        const Point& b = vertices_[(i + 1) % n];
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1)
                continue; // adjacent through the closing edge
            const Point& c = vertices_[j];
            const Point& d = vertices_[(j + 1) % n];
            if (segments_conflict(a, b, c, d))
                throw Error(ErrorCode::InvalidArgument,
                            "polygon is self-intersecting (edges " + std::to_string(i) + " and " +
                                std::to_string(j) + ")");
        }
    }
}

double Polygon::perimeter() const noexcept {
    double total = 0.0;
    for (std::size_t i = 0, j = vertices_.size() - 1; i < vertices_.size(); j = i++)
        total += std::hypot(vertices_[i].x - vertices_[j].x, vertices_[i].y - vertices_[j].y);
    return total;
}

AxisRect Polygon::bounds() const noexcept {
    AxisRect r;
    r.x_min = r.x_max = vertices_.front().x;
    r.y_min = r.y_max = vertices_.front().y;
    for (const auto& p : vertices_) {
        r.x_min = std::min(r.x_min, p.x);
        r.x_max = std::max(r.x_max, p.x);
        r.y_min = std::min(r.y_min, p.y);
        r.y_max = std::max(r.y_max, p.y);
    }
    return r;
}

BitMask::BitMask(int width, int height, std::optional<AxisRect> frame)
    : width_(width), height_(height), frame_(frame) {
    if (width < 1 || height < 1)
        throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    words_.assign((n + 63) / 64, 0);
}

std::size_t BitMask::count() const noexcept {
    std::size_t total = 0;
    for (auto w : words_)
        total += static_cast<std::size_t>(std::popcount(w));
    return total;
}

bool BitMask::same_shape(const BitMask& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && frame_ == other.frame_;
}

void BitMask::check_shape(const BitMask& other) const {
    if (!same_shape(other))
        throw Error(ErrorCode::DimensionMismatch, "masks differ in shape or frame (" + std::to_string(width_) + "x" +
                                                      std::to_string(height_) + " vs " +
                                                      std::to_string(other.width_) + "x" +
                                                      std::to_string(other.height_) + ")");
}

std::size_t BitMask::intersection_count(const BitMask& other) const {
    check_shape(other);
    std::size_t total = 0;
    for (std::size_t i = 0; i < words_.size(); ++i)
        total += static_cast<std::size_t>(std::popcount(words_[i] & other.words_[i]));
    return total;
}

std::size_t BitMask::union_count(const BitMask& other) const {
    check_shape(other);
    std::size_t total = 0;
    for (std::size_t i = 0; i < words_.size(); ++i)
        total += static_cast<std::size_t>(std::popcount(words_[i] | other.words_[i]));
    return total;
}

BitMask& BitMask::operator|=(const BitMask& other) {
    check_shape(other);
    for (std::size_t i = 0; i < words_.size(); ++i)
        words_[i] |= other.words_[i];
    return *this;
}

PixelSpan pixel_span(const AxisRect& box, int width, int height) noexcept {
    auto first_center_at_or_after = [](double v) {
        // smallest integer j with j + 0.5 >= v
        const double c = std::ceil(v - 0.5);
        if (c < -1e9)
            return -1000000000;
        if (c > 1e9)
            return 1000000000;
        return static_cast<int>(c);
    };
    PixelSpan s;
    s.x0 = std::clamp(first_center_at_or_after(box.x_min), 0, width);
    s.x1 = std::clamp(first_center_at_or_after(box.x_max), 0, width);
    s.y0 = std::clamp(first_center_at_or_after(box.y_min), 0, height);
    s.y1 = std::clamp(first_center_at_or_after(box.y_max), 0, height);
    return s;
}

double polygon_area(const Polygon& p) noexcept {
    const auto& v = p.vertices();
    double twice = 0.0;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++)
        twice += v[j].x * v[i].y - v[i].x * v[j].y;
    return std::abs(twice) * 0.5;
}

double rect_iou(const AxisRect& a, const AxisRect& b) noexcept {
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0)
        return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

BitMask rasterize(const Polygon& p, int width, int height) {
    BitMask out(width, height);
    const auto& v = p.vertices();
    const std::size_t n = v.size();
    std::vector<double> xs;
    xs.reserve(n);
    for (int row = 0; row < height; ++row) {
        const double yc = row + 0.5;
        xs.clear();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Point& pi = v[i];
            const Point& pj = v[j];
            if ((pi.y > yc) != (pj.y > yc))
                xs.push_back((pj.x - pi.x) * (yc - pi.y) / (pj.y - pi.y) + pi.x);
        }
        if (xs.empty())
            continue;
        std::sort(xs.begin(), xs.end());
        // A center xc is inside iff an odd number of crossings lie strictly
        // to its right, i.e. xs[2k] <= xc < xs[2k+1].
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const double lo = xs[k];
            const double hi = xs[k + 1];
            double start = std::ceil(lo - 0.5);
            if (start < 0.0)
                start = 0.0;
            if (start >= width)
                continue;
            for (int col = static_cast<int>(start); col < width; ++col) {
                const double xc = col + 0.5;
                if (xc < lo)
                    continue;
                if (!(xc < hi))
                    break;
                out.set(col, row);
            }
        }
    }
    return out;
}

double mask_iou(const BitMask& a, const BitMask& b) {
    const std::size_t uni = a.union_count(b);
    if (uni == 0)
        return 0.0;
    return static_cast<double>(a.intersection_count(b)) / static_cast<double>(uni);
}

AxisRect mask_bbox(const BitMask& m) {
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max();
    int x1 = -1, y1 = -1;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.get(x, y))
                continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0)
        throw Error(ErrorCode::EmptyMask, "mask has no set pixel");
    return AxisRect(x0, y0, x1 + 1, y1 + 1);
}

BitMask crop_mask(const BitMask& m, const AxisRect& box, int out_w, int out_h) {
    if (!(box.area() > 0.0))
        throw Error(ErrorCode::DegenerateBox, "crop box has zero area");
    if (out_w < 1 || out_h < 1)
        throw Error(ErrorCode::InvalidArgument, "crop output dimensions must be positive");
    BitMask out(out_w, out_h, box);
    const double sx = box.width() / out_w;
    const double sy = box.height() / out_h;
    for (int v = 0; v < out_h; ++v) {
        const double fy = std::floor(box.y_min + (v + 0.5) * sy);
        if (fy < 0.0 || fy >= m.height())
            continue;
        for (int u = 0; u < out_w; ++u) {
            const double fx = std::floor(box.x_min + (u + 0.5) * sx);
            if (fx < 0.0 || fx >= m.width())
                continue;
            if (m.get(static_cast<int>(fx), static_cast<int>(fy)))
                out.set(u, v);
        }
    }
    return out;
}

Components label_components(const BitMask& m) {
    Components c;
    c.width = m.width();
    c.height = m.height();
    c.labels.assign(static_cast<std::size_t>(c.width) * static_cast<std::size_t>(c.height), 0);
    std::vector<int> stack;
    for (int y = 0; y < c.height; ++y) {
        for (int x = 0; x < c.width; ++x) {
            const int idx = y * c.width + x;
            if (!m.get(x, y) || c.labels[idx] != 0)
                continue;
            const int label = ++c.count;
            std::size_t size = 0;
            c.labels[idx] = label;
            stack.push_back(idx);
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                ++size;
                const int cx = cur % c.width;
                const int cy = cur / c.width;
                const int nx[4] = {cx + 1, cx - 1, cx, cx};
                const int ny[4] = {cy, cy, cy + 1, cy - 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= c.width || ny[k] >= c.height)
                        continue;
                    const int nidx = ny[k] * c.width + nx[k];
                    if (c.labels[nidx] == 0 && m.get(nx[k], ny[k])) {
                        c.labels[nidx] = label;
                        stack.push_back(nidx);
                    }
                }
            }
            c.sizes.push_back(size);
        }
    }
    return c;
}

BitMask component_mask(const Components& c, int label) {
    BitMask out(c.width, c.height);
    for (int y = 0; y < c.height; ++y)
        for (int x = 0; x < c.width; ++x)
            if (c.labels[y * c.width + x] == label)
                out.set(x, y);
    return out;
}

namespace {

// Directions on the pixel-corner lattice: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
// An edge leaving vertex (vx, vy) in direction d is on the component boundary
// when the pixel on its left belongs to the component and the one on its
// right does not.
constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};
constexpr int kLeftPx[4][2] = {{0, 0}, {-1, 0}, {-1, -1}, {0, -1}};
constexpr int kRightPx[4][2] = {{0, -1}, {0, 0}, {-1, 0}, {-1, -1}};

std::vector<Point> trace_outer(const Components& c, int label, int start_x, int start_y) {
    auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < c.width && y < c.height && c.labels[y * c.width + x] == label;
    };
    auto has_edge = [&](int vx, int vy, int d) {
        return inside(vx + kLeftPx[d][0], vy + kLeftPx[d][1]) && !inside(vx + kRightPx[d][0], vy + kRightPx[d][1]);
    };

    std::vector<Point> out;
    int vx = start_x, vy = start_y, dir = 0;
    // Top edge of the raster-first pixel lies on the outer boundary.
    out.push_back({static_cast<double>(vx), static_cast<double>(vy)});
    const std::size_t guard = 4 * static_cast<std::size_t>(c.width + 1) * static_cast<std::size_t>(c.height + 1);
    for (std::size_t step = 0; step < guard; ++step) {
        vx += kDx[dir];
        vy += kDy[dir];
        // Prefer the left turn so the contour hugs the component at diagonal pinches.
        int next = -1;
        for (int turn : {1, 0, 3}) {
            const int d = (dir + turn) % 4;
            if (has_edge(vx, vy, d)) {
                next = d;
                break;
            }
        }
        if (vx == start_x && vy == start_y && next == 0)
            break;
        if (next != dir)
            out.push_back({static_cast<double>(vx), static_cast<double>(vy)});
        dir = next;
    }
    return out;
}

} // namespace

std::vector<Polygon> mask_to_polygon(const BitMask& m) {
    const Components c = label_components(m);
    std::vector<Polygon> out;
    out.reserve(static_cast<std::size_t>(c.count));
    std::vector<bool> seen(static_cast<std::size_t>(c.count) + 1, false);
    for (int y = 0; y < c.height; ++y) {
        for (int x = 0; x < c.width; ++x) {
            const int label = c.labels[y * c.width + x];
            if (label == 0 || seen[label])
                continue;
            seen[label] = true;
            out.emplace_back(trace_outer(c, label, x, y));
        }
    }
    return out;
}

} // namespace textboot

#include "textboot/synth.hpp"

#include "textboot/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace fs = std::filesystem;

namespace textboot {

void SceneSpec::validate() const {
    if (n_images < 1)
        throw Error(ErrorCode::InvalidArgument, "n_images must be at least 1");
    if (width < 16 || height < 16)
        throw Error(ErrorCode::InvalidArgument, "scene must be at least 16x16");
    if (!instances_per_image.valid() || instances_per_image.lo < 0 || !curvature.valid() || !stroke_width.valid() ||
        stroke_width.lo < 1 || !length.valid() || length.lo < 2 || !contrast.valid() || !clutter.valid() ||
        clutter.lo < 0)
        throw Error(ErrorCode::InvalidArgument, "scene spec has an empty or invalid range");
    if (!(noise_level >= 0.0 && noise_level <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "noise_level must lie in [0,1]");
    if (texture < 0.0 || blur_noise < 0.0)
        throw Error(ErrorCode::InvalidArgument, "texture and blur_noise must be non-negative");
}

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Distribution helpers written against the raw engine so output does not
// depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int lo, int hi) { return lo + static_cast<int>(eng_() % static_cast<std::uint64_t>(hi - lo + 1)); }
    double normal() {
        const double u1 = std::max(uniform(), 1e-300);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

private:
    std::mt19937_64 eng_;
};

struct Ribbon {
    Polygon outline;
    BitMask stroke;
    double contrast;
};

// Centerline of a constant-curvature arc sampled at `n + 1` evenly spaced
// arc-length positions; returns (x, y, heading) triples.
std::vector<std::array<double, 3>> arc_samples(double x0, double y0, double heading, double curvature, double length,
                                               int n) {
    std::vector<std::array<double, 3>> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        const double s = length * k / n;
        double x, y;
        if (std::abs(curvature) < 1e-9) {
            x = x0 + s * std::cos(heading);
            y = y0 + s * std::sin(heading);
        } else {
            const double r = 1.0 / curvature;
            x = x0 + r * (std::sin(heading + curvature * s) - std::sin(heading));
            y = y0 - r * (std::cos(heading + curvature * s) - std::cos(heading));
        }
        out.push_back({x, y, heading + curvature * s});
    }
    return out;
}

std::vector<Point> ribbon_outline(const std::vector<std::array<double, 3>>& center, double half_width) {
    std::vector<Point> pts;
    pts.reserve(center.size() * 2);
    for (const auto& c : center)
        pts.push_back({c[0] - std::sin(c[2]) * half_width, c[1] + std::cos(c[2]) * half_width});
    for (auto it = center.rbegin(); it != center.rend(); ++it) {
        const auto& c = *it;
        pts.push_back({c[0] + std::sin(c[2]) * half_width, c[1] - std::cos(c[2]) * half_width});
    }
    return pts;
}

// Coarse outline segment count: keeps the chord sagitta under 0.05 px while
// never going below the 7-points-per-side layout of common curved-text sets.
int outline_segments(double curvature, double length, double half_width) {
    const double k = std::abs(curvature);
    if (k < 1e-9)
        return 6;
    const double outer_radius = 1.0 / k + half_width;
    const double max_step = 2.0 * std::acos(std::max(0.0, 1.0 - 0.05 / outer_radius));
    return std::max(6, static_cast<int>(std::ceil(k * length / max_step)));
}

BitMask dilate(const BitMask& m, int radius) {
    BitMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (!m.get(x, y))
                continue;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < m.width() && ny < m.height())
                        out.set(nx, ny);
                }
        }
    return out;
}

} // namespace

SyntheticScene render_scene(const SceneSpec& spec, int index) {
    spec.validate();
    Rng rng(splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(index) + 0x51ed2701ULL)));
    const int W = spec.width, H = spec.height;

    std::vector<Ribbon> ribbons;
    BitMask occupied(W, H);
    const int wanted = rng.uniform_int(spec.instances_per_image.lo, spec.instances_per_image.hi);
    for (int attempt = 0; attempt < 400 && static_cast<int>(ribbons.size()) < wanted; ++attempt) {
        const int width = rng.uniform_int(spec.stroke_width.lo, spec.stroke_width.hi);
        const double length = rng.uniform_int(spec.length.lo, spec.length.hi);
        double curvature = rng.uniform(spec.curvature.lo, spec.curvature.hi);
        if (rng.uniform() < 0.5)
            curvature = -curvature;
        // keep the inner offset curve from folding over itself
        const double half = 0.5 * width;
        if (std::abs(curvature) * (half + 1.0) >= 1.0)
            curvature = std::copysign(1.0 / (half + 1.0) * 0.9, curvature);
        const double heading = rng.uniform(-kPi, kPi);
        const double x0 = rng.uniform(half + 1.0, W - half - 1.0);
        const double y0 = rng.uniform(half + 1.0, H - half - 1.0);

        const int fine_n = std::max(8, static_cast<int>(std::ceil(length)));
        const auto fine = arc_samples(x0, y0, heading, curvature, length, fine_n);
        const bool inside = std::all_of(fine.begin(), fine.end(), [&](const auto& c) {
            return c[0] >= half + 1.0 && c[0] <= W - half - 1.0 && c[1] >= half + 1.0 && c[1] <= H - half - 1.0;
        });
        if (!inside)
            continue;

        try {
            Polygon fine_poly(ribbon_outline(fine, half));
            BitMask stroke = rasterize(fine_poly, W, H);
            if (stroke.empty() || stroke.intersection_count(occupied) != 0)
                continue;
            const int coarse_n = outline_segments(curvature, length, half);
            Polygon outline(ribbon_outline(arc_samples(x0, y0, heading, curvature, length, coarse_n), half));
            occupied |= dilate(stroke, 3);
            const double contrast = rng.uniform(spec.contrast.lo, spec.contrast.hi);
            ribbons.push_back({std::move(outline), std::move(stroke), contrast});
        } catch (const Error&) {
            continue; // degenerate outline, resample
        }
    }

    // Distractors: bright elliptical blobs away from the text.
    std::vector<std::pair<BitMask, double>> blobs;
    const int n_blobs = rng.uniform_int(spec.clutter.lo, spec.clutter.hi);
    for (int attempt = 0; attempt < 200 && static_cast<int>(blobs.size()) < n_blobs; ++attempt) {
        const double rx = rng.uniform(4.5, 7.5);
        const double ry = rng.uniform(4.5, 7.5);
        const double cx = rng.uniform(rx + 1.0, W - rx - 1.0);
        const double cy = rng.uniform(ry + 1.0, H - ry - 1.0);
        BitMask blob(W, H);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
                if (dx * dx + dy * dy <= 1.0)
                    blob.set(x, y);
            }
        if (blob.intersection_count(occupied) != 0)
            continue;
        occupied |= dilate(blob, 2);
        blobs.emplace_back(std::move(blob), rng.uniform(spec.contrast.lo, spec.contrast.hi));
    }

    // Background: base level, linear shading and low-frequency texture.
    const double base = rng.uniform(0.12, 0.4);
    const double gx = rng.uniform(-0.15, 0.15) / W;
    const double gy = rng.uniform(-0.15, 0.15) / H;
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    for (int i = 0; i < 3; ++i) {
        const double freq = rng.uniform(0.05, 0.35);
        const double dir = rng.uniform(0.0, kPi);
        waves.push_back({freq * std::cos(dir), freq * std::sin(dir), rng.uniform(0.0, 2.0 * kPi),
                         spec.texture * rng.uniform(0.3, 1.0)});
    }
    std::vector<double> canvas(static_cast<std::size_t>(W) * H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double v = base + gx * (x - W / 2) + gy * (y - H / 2);
            for (const auto& w : waves)
                v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
            canvas[static_cast<std::size_t>(y) * W + x] = v;
        }
    auto paint = [&](const BitMask& m, double contrast) {
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if (m.get(x, y))
                    canvas[static_cast<std::size_t>(y) * W + x] += contrast;
    };
    for (const auto& r : ribbons)
        paint(r.stroke, r.contrast);
    for (const auto& [m, c] : blobs)
        paint(m, c);

    SyntheticScene scene;
    scene.image = GrayImage(W, H);
    for (std::size_t i = 0; i < canvas.size(); ++i) {
        double v = canvas[i] + spec.blur_noise * rng.normal();
        if (spec.noise_level > 0.0 && rng.uniform() < spec.noise_level)
            v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        scene.image.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
    for (auto& r : ribbons) {
        scene.polygons.push_back(std::move(r.outline));
        scene.stroke_masks.push_back(std::move(r.stroke));
    }
    return scene;
}

Dataset generate_synthetic(const SceneSpec& spec, const fs::path& out_dir) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

    Dataset d;
    d.root = out_dir;
    d.image_width = spec.width;
    d.image_height = spec.height;
    for (int i = 0; i < spec.n_images; ++i) {
        SyntheticScene scene = render_scene(spec, i);
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%05d", spec.id_prefix.c_str(), i);
        const std::string rel = std::string("images/") + name + ".pgm";
        write_pgm(scene.image, out_dir / rel);
        AnnotationRecord r;
        r.image_id = name;
        r.image_path = rel;
        r.tier = Tier::Strong;
        r.polygons = std::move(scene.polygons);
        d.records.push_back(std::move(r));
    }
    save_dataset(d, out_dir / "manifest.tsv");
    return d;
}

} // namespace textboot

#include "textboot/data.hpp"

#include "textboot/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace fs = std::filesystem;

namespace textboot {

std::string_view to_string(Tier t) noexcept {
    switch (t) {
    case Tier::Strong: return "STRONG";
    case Tier::Weak: return "WEAK";
    case Tier::None: return "NONE";
    }
    return "NONE";
}

Tier parse_tier(std::string_view s) {
    if (s == "STRONG")
        return Tier::Strong;
    if (s == "WEAK")
        return Tier::Weak;
    if (s == "NONE")
        return Tier::None;
    throw Error(ErrorCode::ParseError, "unknown tier '" + std::string(s) + "'");
}

const std::string* AnnotationRecord::attribute(std::string_view key) const noexcept {
    for (const auto& [k, v] : attributes)
        if (k == key)
            return &v;
    return nullptr;
}

fs::path Dataset::image_file(const AnnotationRecord& r) const {
    fs::path p(r.image_path);
    if (p.is_relative())
        p = root / p;
    return p;
}

GrayImage Dataset::load_image(const AnnotationRecord& r) const {
    const fs::path p = image_file(r);
    if (!fs::exists(p))
        throw Error(ErrorCode::MissingImage, "image for '" + r.image_id + "' not found: " + p.string());
    GrayImage img = read_pgm(p);
    if (image_width != 0 && (img.width != image_width || img.height != image_height))
        throw Error(ErrorCode::DimensionMismatch, "image '" + r.image_id + "' has unexpected dimensions");
    return img;
}

std::size_t Dataset::instance_count() const noexcept {
    std::size_t n = 0;
    for (const auto& r : records)
        n += r.polygons.size() + r.rects.size();
    return n;
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void validate_record(const AnnotationRecord& r) {
    switch (r.tier) {
    case Tier::Strong:
        if (!r.rects.empty())
            throw Error(ErrorCode::TierViolation, "STRONG record '" + r.image_id + "' carries rectangles");
        break;
    case Tier::Weak:
        if (!r.polygons.empty())
            throw Error(ErrorCode::TierViolation, "WEAK record '" + r.image_id + "' carries polygons");
        break;
    case Tier::None:
        if (!r.polygons.empty() || !r.rects.empty())
            throw Error(ErrorCode::TierViolation, "NONE record '" + r.image_id + "' carries geometry");
        break;
    }
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
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

bool parse_double(std::string_view s, double& out) {
    if (s.empty())
        return false;
    const char* first = s.data();
    if (*first == '+')
        ++first;
    auto res = std::from_chars(first, s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::vector<double> parse_numbers(std::string_view item, std::size_t line) {
    std::vector<double> out;
    for (auto tok : split(item, ',')) {
        double v = 0.0;
        if (!parse_double(tok, v))
            fail_line(line, "bad number '" + std::string(tok) + "'");
        out.push_back(v);
    }
    return out;
}

Polygon polygon_from_numbers(const std::vector<double>& nums, std::size_t line) {
    if (nums.size() % 2 != 0 || nums.size() < 6)
        fail_line(line, "polygon needs an even count of at least 6 coordinates");
    std::vector<Point> pts;
    pts.reserve(nums.size() / 2);
    for (std::size_t i = 0; i < nums.size(); i += 2)
        pts.push_back({nums[i], nums[i + 1]});
    try {
        return Polygon(std::move(pts));
    } catch (const Error& e) {
        fail_line(line, e.what());
    }
}

AnnotationRecord parse_record(std::string_view text, std::size_t line) {
    const auto fields = split(text, '\t');
    if (fields.size() < 4)
        fail_line(line, "expected at least 4 tab-separated fields, got " + std::to_string(fields.size()));
    AnnotationRecord r;
    r.image_id = std::string(fields[0]);
    r.image_path = std::string(fields[1]);
    if (r.image_id.empty() || r.image_path.empty())
        fail_line(line, "empty image_id or image_path");
    try {
        r.tier = parse_tier(fields[2]);
    } catch (const Error&) {
        fail_line(line, "unknown tier '" + std::string(fields[2]) + "'");
    }

    const std::string_view geom = fields[3];
    char kind = '-';
    if (geom != "-") {
        if (geom.size() < 2 || geom[1] != ':' || (geom[0] != 'P' && geom[0] != 'R'))
            fail_line(line, "geometry must be '-', 'P:...' or 'R:...'");
        kind = geom[0];
    }
    const bool tier_ok = (r.tier == Tier::Strong && kind == 'P') || (r.tier == Tier::Weak && kind == 'R') ||
                         (r.tier == Tier::None && kind == '-');
    if (!tier_ok)
        throw Error(ErrorCode::TierViolation, "line " + std::to_string(line) + ": tier " +
                                                  std::string(to_string(r.tier)) + " with geometry kind '" + kind +
                                                  "'");
    if (kind != '-' && geom.size() > 2) {
        for (auto item : split(geom.substr(2), ';')) {
            const auto nums = parse_numbers(item, line);
            if (kind == 'P') {
                r.polygons.push_back(polygon_from_numbers(nums, line));
            } else {
                if (nums.size() != 4)
                    fail_line(line, "rectangle needs 4 coordinates");
                try {
                    r.rects.emplace_back(nums[0], nums[1], nums[2], nums[3]);
                } catch (const Error& e) {
                    fail_line(line, e.what());
                }
            }
        }
    }

    for (std::size_t i = 4; i < fields.size(); ++i) {
        const auto eq = fields[i].find('=');
        if (eq == std::string_view::npos || eq == 0)
            fail_line(line, "attribute must be key=value");
        r.attributes.emplace_back(std::string(fields[i].substr(0, eq)), std::string(fields[i].substr(eq + 1)));
    }
    return r;
}

void append_polygon(std::string& out, const Polygon& p) {
    bool first = true;
    for (const auto& v : p.vertices()) {
        if (!first)
            out += ',';
        first = false;
        out += format_number(v.x);
        out += ',';
        out += format_number(v.y);
    }
}

void append_rect(std::string& out, const AxisRect& r) {
    out += format_number(r.x_min);
    out += ',';
    out += format_number(r.y_min);
    out += ',';
    out += format_number(r.x_max);
    out += ',';
    out += format_number(r.y_max);
}

std::string relocate(const std::string& image_path, const fs::path& from_root, const fs::path& to_dir) {
    const fs::path p(image_path);
    if (p.is_absolute())
        return image_path;
    const fs::path abs = fs::absolute(from_root / p).lexically_normal();
    const fs::path rel = abs.lexically_relative(fs::absolute(to_dir).lexically_normal());
    if (rel.empty())
        return abs.string();
    return rel.generic_string();
}

} // namespace

Dataset parse_manifest(std::string_view text, const fs::path& root, LoadOptions opts) {
    Dataset d;
    d.root = root;
    std::unordered_set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty() || line.front() == '#')
            continue;
        AnnotationRecord r = parse_record(line, line_no);
        if (!ids.insert(r.image_id).second)
            fail_line(line_no, "duplicate image_id '" + r.image_id + "'");
        d.records.push_back(std::move(r));
    }
    if (opts.check_images) {
        for (const auto& r : d.records) {
            const fs::path p = d.image_file(r);
            if (!fs::exists(p))
                throw Error(ErrorCode::MissingImage, "image for '" + r.image_id + "' not found: " + p.string());
            const auto [w, h] = pgm_dimensions(p);
            if (d.image_width == 0) {
                d.image_width = w;
                d.image_height = h;
            } else if (w != d.image_width || h != d.image_height) {
                throw Error(ErrorCode::DimensionMismatch, "image '" + r.image_id + "' is " + std::to_string(w) + "x" +
                                                              std::to_string(h) + ", dataset is " +
                                                              std::to_string(d.image_width) + "x" +
                                                              std::to_string(d.image_height));
            }
        }
    }
    return d;
}

Dataset load_dataset(const fs::path& manifest_path, LoadOptions opts) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open manifest " + manifest_path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), manifest_path.parent_path(), opts);
}

std::string format_manifest(const Dataset& d, const fs::path& manifest_dir) {
    std::string out;
    for (const auto& r : d.records) {
        validate_record(r);
        out += r.image_id;
        out += '\t';
        out += relocate(r.image_path, d.root, manifest_dir);
        out += '\t';
        out += to_string(r.tier);
        out += '\t';
        switch (r.tier) {
        case Tier::Strong:
            out += "P:";
            for (std::size_t i = 0; i < r.polygons.size(); ++i) {
                if (i)
                    out += ';';
                append_polygon(out, r.polygons[i]);
            }
            break;
        case Tier::Weak:
            out += "R:";
            for (std::size_t i = 0; i < r.rects.size(); ++i) {
                if (i)
                    out += ';';
                append_rect(out, r.rects[i]);
            }
            break;
        case Tier::None: out += '-'; break;
        }
        for (const auto& [k, v] : r.attributes) {
            out += '\t';
            out += k;
            out += '=';
            out += v;
        }
        out += '\n';
    }
    return out;
}

void save_dataset(const Dataset& d, const fs::path& manifest_path) {
    const fs::path dir = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
    const std::string text = format_manifest(d, dir);
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write manifest " + manifest_path.string());
    out << text;
    if (!out)
        throw Error(ErrorCode::IoError, "write failed for " + manifest_path.string());
}

AnnotationRecord downgrade_to_weak(const AnnotationRecord& r) {
    if (r.tier != Tier::Strong)
        throw Error(ErrorCode::WrongTier, "record '" + r.image_id + "' is not STRONG");
    AnnotationRecord out;
    out.image_id = r.image_id;
    out.image_path = r.image_path;
    out.tier = Tier::Weak;
    out.rects.reserve(r.polygons.size());
    for (const auto& p : r.polygons)
        out.rects.push_back(p.bounds());
    return out;
}

AnnotationRecord downgrade_to_none(const AnnotationRecord& r) {
    AnnotationRecord out;
    out.image_id = r.image_id;
    out.image_path = r.image_path;
    out.tier = Tier::None;
    return out;
}

Split split_dataset(const Dataset& d, double strong_fraction, std::uint64_t seed, Downgrade rest_tier) {
    if (d.records.empty())
        throw Error(ErrorCode::EmptyDataset, "cannot split an empty dataset");
    if (!(strong_fraction > 0.0 && strong_fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "strong fraction must lie strictly between 0 and 1");
    const std::size_t n = d.records.size();
    const auto k = static_cast<std::size_t>(std::llround(strong_fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
    std::vector<bool> chosen(n, false);
    for (std::size_t i = 0; i < k; ++i)
        chosen[order[i]] = true;

    Split s;
    for (Dataset* part : {&s.strong, &s.rest}) {
        part->image_width = d.image_width;
        part->image_height = d.image_height;
        part->root = d.root;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = d.records[i];
        if (chosen[i]) {
            s.strong.records.push_back(r);
            continue;
        }
        switch (rest_tier) {
        case Downgrade::Keep: s.rest.records.push_back(r); break;
        case Downgrade::Weak: s.rest.records.push_back(downgrade_to_weak(r)); break;
        case Downgrade::None: s.rest.records.push_back(downgrade_to_none(r)); break;
        }
    }
    return s;
}

Dataset convert_polygon_dumps(const fs::path& image_dir, const fs::path& annotation_dir, const fs::path& manifest_dir) {
    if (!fs::is_directory(image_dir))
        throw Error(ErrorCode::IoError, "not a directory: " + image_dir.string());
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(image_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm")
            images.push_back(entry.path());
    std::sort(images.begin(), images.end());

    Dataset d;
    d.root = manifest_dir;
    for (const auto& img : images) {
        const std::string stem = img.stem().string();
        fs::path ann = annotation_dir / (stem + ".txt");
        if (!fs::exists(ann))
            ann = annotation_dir / ("gt_" + stem + ".txt");
        if (!fs::exists(ann))
            throw Error(ErrorCode::MissingImage, "no annotation dump for image " + img.string());

        const auto [w, h] = pgm_dimensions(img);
        if (d.image_width == 0) {
            d.image_width = w;
            d.image_height = h;
        } else if (w != d.image_width || h != d.image_height) {
            throw Error(ErrorCode::DimensionMismatch, "non-uniform image size: " + img.string());
        }

        AnnotationRecord r;
        r.image_id = stem;
        const fs::path rel =
            fs::absolute(img).lexically_normal().lexically_relative(fs::absolute(manifest_dir).lexically_normal());
        r.image_path = rel.empty() ? fs::absolute(img).string() : rel.generic_string();
        r.tier = Tier::Strong;
        std::ifstream in(ann);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos)
                continue;
            std::vector<double> nums;
            for (auto tok : split(line, ',')) {
                while (!tok.empty() && tok.front() == ' ')
                    tok.remove_prefix(1);
                while (!tok.empty() && tok.back() == ' ')
                    tok.remove_suffix(1);
                double v = 0.0;
                if (!parse_double(tok, v))
                    break; // transcription or '####' marker ends the coordinates
                nums.push_back(v);
            }
            try {
                r.polygons.push_back(polygon_from_numbers(nums, line_no));
            } catch (const Error& e) {
                throw Error(ErrorCode::ParseError, ann.string() + ": " + e.what());
            }
        }
        d.records.push_back(std::move(r));
    }
    return d;
}

} // namespace textboot

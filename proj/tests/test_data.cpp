#include "oracles.hpp"

#include "textboot/data.hpp"
#include "textboot/error.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

using namespace textboot;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidArgument;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

AnnotationRecord strong_record(const std::string& id, std::vector<Polygon> polys) {
    AnnotationRecord r;
    r.image_id = id;
    r.image_path = "images/" + id + ".pgm";
    r.tier = Tier::Strong;
    r.polygons = std::move(polys);
    return r;
}

Dataset synthetic_records(std::size_t n) {
    Dataset d;
    for (std::size_t i = 0; i < n; ++i)
        d.records.push_back(strong_record("r" + std::to_string(i), {Polygon({{0, 0}, {2, 0}, {1, 2}})}));
    return d;
}

// 14 vertices along the two long sides of a curved band
Polygon fourteen_gon() {
    std::vector<Point> v;
    for (int i = 0; i < 7; ++i)
        v.push_back({2.0 + 5.25 * i, 10.0 + 0.125 * i * i});
    for (int i = 6; i >= 0; --i)
        v.push_back({2.0 + 5.25 * i, 16.5 + 0.125 * i * i});
    return Polygon(std::move(v));
}

} // namespace

TEST(Manifest, EmptyManifestHasNoRecords) {
    EXPECT_TRUE(parse_manifest("", ".").records.empty());
    EXPECT_TRUE(parse_manifest("# comment only\n\n", ".").records.empty());
}

TEST(Manifest, WeakWithPolygonIsTierViolation) {
    const std::string text = "a\ta.pgm\tWEAK\tP:0,0,1,0,0,1\n";
    EXPECT_EQ(code_of([&] { parse_manifest(text, ".", {false}); }), ErrorCode::TierViolation);
    EXPECT_EQ(code_of([] { parse_manifest("a\ta.pgm\tNONE\tR:0,0,1,1\n", ".", {false}); }),
              ErrorCode::TierViolation);
}

TEST(Manifest, MalformedLinesReportLineNumber) {
    const std::string text = "a\ta.pgm\tNONE\t-\nb\tb.pgm\tSTRONG\tP:0,0,1,x,0,1\n";
    try {
        parse_manifest(text, ".", {false});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    EXPECT_EQ(code_of([] { parse_manifest("a\ta.pgm\tNONE\n", ".", {false}); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_manifest("a\ta.pgm\tGOLD\t-\n", ".", {false}); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_manifest("a\ta.pgm\tSTRONG\tP:0,0,1,0\n", ".", {false}); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_manifest("a\ta.pgm\tWEAK\tR:3,0,1,1\n", ".", {false}); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_manifest("a\ta.pgm\tNONE\t-\tnovalue\n", ".", {false}); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_manifest("a\ta.pgm\tNONE\t-\na\tb.pgm\tNONE\t-\n", ".", {false}); }),
              ErrorCode::ParseError);
}

TEST(Manifest, MissingImageRejected) {
    oracle::TempDir dir("data");
    write_text(dir.path() / "m.tsv", "a\tnope.pgm\tNONE\t-\n");
    EXPECT_EQ(code_of([&] { load_dataset(dir.path() / "m.tsv"); }), ErrorCode::MissingImage);
}

TEST(Manifest, FourteenVertexPolygonRoundTripsBitIdentically) {
    oracle::TempDir dir("data");
    fs::create_directories(dir.path() / "images");
    write_pgm(GrayImage(48, 32), dir.path() / "images/c.pgm");
    Dataset d;
    d.root = dir.path();
    d.records.push_back(strong_record("c", {fourteen_gon()}));
    ASSERT_EQ(d.records[0].polygons[0].size(), 14u);

    save_dataset(d, dir.path() / "a.tsv");
    const Dataset once = load_dataset(dir.path() / "a.tsv");
    save_dataset(once, dir.path() / "b.tsv");
    const Dataset twice = load_dataset(dir.path() / "b.tsv");
    EXPECT_EQ(read_text(dir.path() / "a.tsv"), read_text(dir.path() / "b.tsv"));
    EXPECT_EQ(once.records, d.records);
    EXPECT_EQ(twice.records[0].polygons[0].vertices(), fourteen_gon().vertices());
    EXPECT_EQ(once.image_width, 48);
    EXPECT_EQ(once.image_height, 32);
}

TEST(Manifest, EmptyDatasetSavesEmptyManifest) {
    oracle::TempDir dir("data");
    save_dataset(Dataset{}, dir.path() / "m.tsv");
    EXPECT_EQ(read_text(dir.path() / "m.tsv"), "");
}

TEST(Manifest, ThreeTiersPreserveOrderAndAttributes) {
    Dataset d;
    d.records.push_back(strong_record("s", {Polygon({{0.1, 0.2}, {5, 0}, {2.5, 1e-3}})}));
    AnnotationRecord w;
    w.image_id = "w";
    w.image_path = "w.pgm";
    w.tier = Tier::Weak;
    w.rects = {AxisRect(0, 0, 1.5, 2), AxisRect(3, 3, 4, 4)};
    w.attributes = {{"round", "2"}, {"provenance", "local"}};
    AnnotationRecord n;
    n.image_id = "n";
    n.image_path = "n.pgm";
    n.tier = Tier::None;
    d.records = {d.records[0], w, n};
    const Dataset back = parse_manifest(format_manifest(d, "."), ".", {false});
    EXPECT_EQ(back.records, d.records);
    EXPECT_EQ(*back.records[1].attribute("provenance"), "local");
}

TEST(Manifest, RoundTripRandomPolygons) {
    std::mt19937_64 rng(7);
    Dataset d;
    for (int i = 0; i < 50; ++i) {
        std::vector<Polygon> ps;
        for (int k = 0; k < i % 4; ++k)
            ps.push_back(oracle::random_polygon(rng, 100.0));
        d.records.push_back(strong_record("p" + std::to_string(i), std::move(ps)));
    }
    EXPECT_EQ(parse_manifest(format_manifest(d, "."), ".", {false}).records, d.records);
}

TEST(Split, PublishedSplitSizes) {
    const Split a = split_dataset(synthetic_records(1000), 0.10, 1);
    EXPECT_EQ(a.strong.records.size(), 100u);
    EXPECT_EQ(a.rest.records.size(), 900u);
    const Split b = split_dataset(synthetic_records(1255), 0.0996, 1);
    EXPECT_EQ(b.strong.records.size(), 125u);
    EXPECT_EQ(b.rest.records.size(), 1130u);
}

TEST(Split, DeterministicForSeed) {
    const Dataset d = synthetic_records(200);
    EXPECT_EQ(split_dataset(d, 0.3, 9).strong, split_dataset(d, 0.3, 9).strong);
    EXPECT_NE(split_dataset(d, 0.3, 9).strong, split_dataset(d, 0.3, 10).strong);
}

TEST(Split, Errors) {
    EXPECT_EQ(code_of([] { split_dataset(Dataset{}, 0.1, 1); }), ErrorCode::EmptyDataset);
    EXPECT_EQ(code_of([] { split_dataset(synthetic_records(3), 0.0, 1); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { split_dataset(synthetic_records(3), 1.0, 1); }), ErrorCode::InvalidArgument);
}

TEST(SplitProperty, PartitionsByImageId) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 300;
        const double f = 0.01 + 0.98 * static_cast<double>(rng() % 1000) / 1000.0;
        const Dataset d = synthetic_records(n);
        const Downgrade mode = static_cast<Downgrade>(trial % 3);
        const Split s = split_dataset(d, f, rng(), mode);
        std::set<std::string> a, b;
        for (const auto& r : s.strong.records)
            a.insert(r.image_id);
        for (const auto& r : s.rest.records) {
            b.insert(r.image_id);
            EXPECT_EQ(r.tier, mode == Downgrade::Keep ? Tier::Strong : mode == Downgrade::Weak ? Tier::Weak : Tier::None);
        }
        EXPECT_EQ(a.size() + b.size(), n);
        for (const auto& id : a)
            EXPECT_FALSE(b.count(id));
        EXPECT_EQ(a.size(), static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
    }
}

TEST(Downgrade, Examples) {
    const auto sq = downgrade_to_weak(strong_record("a", {Polygon({{1, 1}, {4, 1}, {4, 5}, {1, 5}})}));
    EXPECT_EQ(sq.tier, Tier::Weak);
    EXPECT_EQ(sq.rects, (std::vector<AxisRect>{AxisRect(1, 1, 4, 5)}));
    EXPECT_TRUE(sq.polygons.empty());

    const auto diag = downgrade_to_weak(strong_record("b", {Polygon({{0, 0}, {4, 2}, {8, 0}, {4, -2}})}));
    EXPECT_EQ(diag.rects[0], AxisRect(0, -2, 8, 2));

    const auto three = downgrade_to_weak(strong_record(
        "c", {Polygon({{0, 0}, {1, 0}, {0, 1}}), Polygon({{5, 5}, {9, 5}, {5, 6}}), Polygon({{2, 2}, {3, 2}, {2, 7}})}));
    EXPECT_EQ(three.rects, (std::vector<AxisRect>{AxisRect(0, 0, 1, 1), AxisRect(5, 5, 9, 6), AxisRect(2, 2, 3, 7)}));

    AnnotationRecord weak = sq;
    EXPECT_EQ(code_of([&] { downgrade_to_weak(weak); }), ErrorCode::WrongTier);
    EXPECT_EQ(downgrade_to_none(sq).tier, Tier::None);
}

TEST(DowngradeProperty, MaskPixelsInsideWeakRectangle) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 200; ++i) {
        const Polygon p = oracle::random_polygon(rng, 40.0);
        const auto w = downgrade_to_weak(strong_record("x", {p}));
        const BitMask m = rasterize(p, 48, 48);
        const BitMask box = oracle::rect_mask(w.rects[0], 48, 48);
        EXPECT_EQ(m.intersection_count(box), m.count());
    }
}

TEST(Convert, PolygonDumps) {
    oracle::TempDir dir("convert");
    fs::create_directories(dir.path() / "img");
    fs::create_directories(dir.path() / "ann");
    write_pgm(GrayImage(20, 10), dir.path() / "img/a.pgm");
    write_pgm(GrayImage(20, 10), dir.path() / "img/b.pgm");
    write_text(dir.path() / "ann/a.txt", "1,1,5,1,5,4,1,4,HELLO\n2,2,8,2,8,6,5,9,2,6,###\n");
    write_text(dir.path() / "ann/gt_b.txt", "\n");
    const Dataset d = convert_polygon_dumps(dir.path() / "img", dir.path() / "ann", dir.path());
    ASSERT_EQ(d.records.size(), 2u);
    EXPECT_EQ(d.records[0].polygons.size(), 2u);
    EXPECT_EQ(d.records[0].polygons[1].size(), 5u);
    EXPECT_TRUE(d.records[1].polygons.empty());
    EXPECT_EQ(d.records[0].image_path, "img/a.pgm");
    save_dataset(d, dir.path() / "m.tsv");
    EXPECT_EQ(load_dataset(dir.path() / "m.tsv").records, d.records);

    write_text(dir.path() / "ann/a.txt", "1,1,5\n");
    EXPECT_EQ(code_of([&] { convert_polygon_dumps(dir.path() / "img", dir.path() / "ann", dir.path()); }),
              ErrorCode::ParseError);
    write_text(dir.path() / "ann/a.txt", "1,1,5,1,5,4\n");
    fs::remove(dir.path() / "ann/gt_b.txt");
    EXPECT_EQ(code_of([&] { convert_polygon_dumps(dir.path() / "img", dir.path() / "ann", dir.path()); }),
              ErrorCode::MissingImage);
}

TEST(Pgm, RoundTripAndErrors) {
    oracle::TempDir dir("pgm");
    GrayImage img(7, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(i * 11);
    write_pgm(img, dir.path() / "x.pgm");
    EXPECT_EQ(read_pgm(dir.path() / "x.pgm"), img);
    EXPECT_EQ(pgm_dimensions(dir.path() / "x.pgm"), std::make_pair(7, 3));
    write_text(dir.path() / "bad.pgm", "P5\n7 3\n255\nabc");
    EXPECT_EQ(code_of([&] { read_pgm(dir.path() / "bad.pgm"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { read_pgm(dir.path() / "none.pgm"); }), ErrorCode::IoError);
}

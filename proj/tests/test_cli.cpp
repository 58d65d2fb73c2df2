#include "oracles.hpp"

#include "textboot/evaluation.hpp"
#include "textboot/strategies.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sys/wait.h>

#include "json.hpp"

using namespace textboot;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli(const oracle::TempDir& dir, const std::string& args) {
    const fs::path out = dir.path() / "stdout.txt", err = dir.path() / "stderr.txt";
    const std::string cmd = std::string(TEXTBOOT_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_bytes(out), read_bytes(err)};
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::size_t lines_of(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Small synthetic data set shared by the run/eval/annotate tests.
struct Data {
    oracle::TempDir dir{"cli"};
    Data() {
        const auto r = cli(dir, "synth --out " + q(dir.path() / "all") + " --n 24 --seed 5");
        if (r.code != 0)
            throw std::runtime_error("synth failed: " + r.err);
        // first 18 images train, last 6 test
        const Dataset all = load_dataset(dir.path() / "all/manifest.tsv");
        Dataset train = all, test = all;
        train.records.resize(18);
        test.records.erase(test.records.begin(), test.records.begin() + 18);
        save_dataset(train, dir.path() / "all/train.tsv");
        save_dataset(test, dir.path() / "all/test.tsv");
        if (cli(dir, "split " + q(dir.path() / "all/train.tsv") + " --strong-fraction 0.2 --seed 1 --out " +
                         q(dir.path() / "weak"))
                .code != 0 ||
            cli(dir, "split " + q(dir.path() / "all/train.tsv") + " --strong-fraction 0.2 --seed 1 --downgrade none "
                         "--out " + q(dir.path() / "none"))
                    .code != 0)
            throw std::runtime_error("split failed");
    }
    fs::path p(const std::string& rel) const { return dir.path() / rel; }
    std::string run_args(const std::string& out, const std::string& extra) const {
        return "run --strong " + q(p("weak/strong.tsv")) + " --pool " + q(p("weak/rest.tsv")) + " --test " +
               q(p("all/test.tsv")) + " --epochs 1 --out " + q(p(out)) + " " + extra;
    }
};

Data& data() {
    static Data d;
    return d;
}

} // namespace

TEST(Cli, UsageErrors) {
    oracle::TempDir dir("cli");
    EXPECT_EQ(cli(dir, "").code, 2);
    EXPECT_EQ(cli(dir, "frobnicate").code, 2);
    EXPECT_EQ(cli(dir, "synth").code, 2);
    EXPECT_EQ(cli(dir, "--help").code, 0);
    EXPECT_EQ(cli(dir, "--version").code, 0);
}

TEST(Cli, SynthWritesManifestAndIsReproducible) {
    oracle::TempDir dir("cli");
    const auto a = cli(dir, "synth --out " + q(dir.path() / "a") + " --n 5 --seed 9");
    const auto b = cli(dir, "synth --out " + q(dir.path() / "b") + " --n 5 --seed 9");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_TRUE(fs::exists(dir.path() / "a/manifest.tsv"));
    const auto hash = [](const std::string& s) { return s.substr(s.find("hash=")); };
    EXPECT_EQ(hash(a.out), hash(b.out));
    EXPECT_EQ(read_bytes(dir.path() / "a/images/img_00003.pgm"), read_bytes(dir.path() / "b/images/img_00003.pgm"));
    EXPECT_EQ(cli(dir, "synth --out " + q(dir.path() / "c") + " --n 0").code, 1);
}

TEST(Cli, SynthUnwritableDirectory) {
    oracle::TempDir dir("cli");
    std::ofstream(dir.path() / "file") << "x";
    const auto r = cli(dir, "synth --out " + q(dir.path() / "file/sub") + " --n 1");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("IO_ERROR"), std::string::npos) << r.err;
}

TEST(Cli, SplitCountsAndTiers) {
    oracle::TempDir dir("cli");
    write_pgm(GrayImage(16, 16), dir.path() / "x.pgm");
    {
        std::ofstream m(dir.path() / "m.tsv");
        for (int i = 0; i < 1000; ++i)
            m << "i" << i << "\tx.pgm\tSTRONG\tP:1,1,9,1,9,5,1,5;2,7,6,7,6,12\n";
    }
    const auto r = cli(dir, "split " + q(dir.path() / "m.tsv") + " --strong-fraction 0.1 --seed 4 --out " +
                                q(dir.path() / "s"));
    ASSERT_EQ(r.code, 0) << r.err;
    const Dataset strong = load_dataset(dir.path() / "s/strong.tsv");
    const Dataset rest = load_dataset(dir.path() / "s/rest.tsv");
    EXPECT_EQ(strong.records.size(), 100u);
    EXPECT_EQ(rest.records.size(), 900u);
    EXPECT_EQ(rest.records[0].tier, Tier::Weak);
    EXPECT_EQ(rest.records[0].rects, (std::vector<AxisRect>{AxisRect(1, 1, 9, 5), AxisRect(2, 7, 6, 12)}));

    EXPECT_EQ(cli(dir, "split " + q(dir.path() / "m.tsv") + " --strong-fraction 0 --out " + q(dir.path() / "t")).code, 2);
    EXPECT_EQ(cli(dir, "split " + q(dir.path() / "m.tsv") + " --strong-fraction 1 --out " + q(dir.path() / "t")).code, 2);
    EXPECT_EQ(cli(dir, "split " + q(dir.path() / "m.tsv") + " --strong-fraction 0.5 --downgrade half --out " +
                           q(dir.path() / "t"))
                  .code,
              2);
    EXPECT_EQ(cli(dir, "split " + q(dir.path() / "missing.tsv") + " --strong-fraction 0.5 --out " + q(dir.path() / "t"))
                  .code,
              1);
}

TEST(Cli, RunZeroRoundsIsBaselineOnly) {
    auto& d = data();
    const auto r = cli(d.dir, d.run_args("r0", "--strategy local --rounds 0"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines_of(read_bytes(d.p("r0/metrics.tsv"))), 2u); // round 0 plus trailer
    EXPECT_FALSE(fs::exists(d.p("r0/round_1")));
}

TEST(Cli, RunFilterOnUnlabeledPoolIsTierMismatch) {
    auto& d = data();
    const auto r = cli(d.dir, "run --strong " + q(d.p("none/strong.tsv")) + " --pool " + q(d.p("none/rest.tsv")) +
                                  " --test " + q(d.p("all/test.tsv")) + " --strategy filter --out " + q(d.p("rf")));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("TIER_MISMATCH"), std::string::npos) << r.err;
}

TEST(Cli, LocalRunArtifactsAndManifest) {
    auto& d = data();
    const auto r = cli(d.dir, d.run_args("rl", "--strategy local --rounds 2"));
    ASSERT_EQ(r.code, 0) << r.err;
    for (int k = 0; k <= 2; ++k)
        EXPECT_TRUE(fs::exists(d.p("rl/round_" + std::to_string(k) + "/model.bin")));
    const std::string table = read_bytes(d.p("rl/f_vs_round.tsv"));
    EXPECT_EQ(table.substr(0, 17), "round\tf_measure\n0");
    EXPECT_EQ(lines_of(table), 4u);
    EXPECT_EQ(r.out.substr(0, table.size()), table);
    const auto manifest = nlohmann::json::parse(read_bytes(d.p("rl/run_manifest.json")));
    EXPECT_EQ(manifest["rounds"].size(), 3u);
    EXPECT_EQ(manifest["config"]["strategy"], "LOCAL");
    EXPECT_EQ(manifest["config"]["score_s"], 0.5);
    EXPECT_TRUE(manifest["complete"].get<bool>());
}

TEST(Cli, RunRespectsRunRootForRelativeOut) {
    auto& d = data();
    const std::string cmd = "TEXTBOOT_RUN_ROOT=" + q(d.p("root")) + " " + std::string(TEXTBOOT_BIN) + " run --strong " +
                            q(d.p("weak/strong.tsv")) + " --pool " + q(d.p("weak/rest.tsv")) + " --test " +
                            q(d.p("all/test.tsv")) + " --rounds 0 --epochs 1 --out rel >/dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(d.p("root/rel/metrics.tsv")));
}

TEST(Cli, EvalIdentityAndCrossCheck) {
    auto& d = data();
    const auto id = cli(d.dir, "eval --det " + q(d.p("all/test.tsv")) + " --gt " + q(d.p("all/test.tsv")));
    ASSERT_EQ(id.code, 0) << id.err;
    EXPECT_EQ(id.out.substr(0, 23), "P=1.000 R=1.000 F=1.000");

    // a pseudo manifest written by annotate, scored by the CLI and by the library
    ASSERT_EQ(cli(d.dir, d.run_args("re", "--rounds 0")).code, 0);
    Dataset test_weak = load_dataset(d.p("all/test.tsv"));
    for (auto& r : test_weak.records)
        r = downgrade_to_weak(r);
    save_dataset(test_weak, d.p("all/test_weak.tsv"));
    ASSERT_EQ(cli(d.dir, "annotate --model " + q(d.p("re/round_0/model.bin")) + " --pool " + q(d.p("all/test_weak.tsv")) +
                             " --strategy naive --out " + q(d.p("re/det.tsv")))
                  .code,
              0);
    const auto scored = cli(d.dir, "eval --det " + q(d.p("re/det.tsv")) + " --gt " + q(d.p("all/test.tsv")));
    ASSERT_EQ(scored.code, 0) << scored.err;

    const Dataset truth = load_dataset(d.p("all/test.tsv"));
    Dataset det_manifest = load_dataset(d.p("re/det.tsv"), {false});
    det_manifest.image_width = truth.image_width;
    det_manifest.image_height = truth.image_height;
    std::vector<ImageDetections> dets;
    for (const auto& img : dataset_to_pseudo(det_manifest).images) {
        ImageDetections x{img.image_id, {}};
        for (const auto& a : img.annotations)
            x.detections.push_back({a.mask.empty() ? a.box : mask_bbox(a.mask), a.mask, a.score.value_or(1.0)});
        dets.push_back(std::move(x));
    }
    EXPECT_EQ(scored.out, format_report(evaluate(dets, truth, {})));

    EXPECT_EQ(cli(d.dir, "eval --det " + q(d.p("nope.tsv")) + " --gt " + q(d.p("all/test.tsv"))).code, 1);
    EXPECT_EQ(cli(d.dir, "eval --det " + q(d.p("all/test.tsv")) + " --gt " + q(d.p("all/test.tsv")) + " --iou 1.5").code,
              2);
}

TEST(Cli, AnnotateCountsAndTiers) {
    auto& d = data();
    ASSERT_EQ(cli(d.dir, d.run_args("ra", "--rounds 0")).code, 0);
    const std::string model = q(d.p("ra/round_0/model.bin"));

    std::ofstream(d.p("empty.tsv")).flush();
    const auto e = cli(d.dir, "annotate --model " + model + " --pool " + q(d.p("empty.tsv")) + " --strategy local --out " +
                                  q(d.p("ra/empty_out.tsv")));
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_EQ(read_bytes(d.p("ra/empty_out.tsv")), "");

    const auto l = cli(d.dir, "annotate --model " + model + " --pool " + q(d.p("weak/rest.tsv")) +
                                  " --strategy local --out " + q(d.p("ra/local.tsv")));
    ASSERT_EQ(l.code, 0) << l.err;
    const std::size_t n_rects = load_dataset(d.p("weak/rest.tsv")).instance_count();
    EXPECT_NE(l.out.find("annotations=" + std::to_string(n_rects) + " "), std::string::npos) << l.out;
    EXPECT_EQ(dataset_to_pseudo(load_dataset(d.p("ra/local.tsv"))).count, n_rects);

    EXPECT_EQ(cli(d.dir, "annotate --model " + model + " --pool " + q(d.p("weak/rest.tsv")) + " --strategy naive --out " +
                             q(d.p("ra/naive.tsv")))
                  .code,
              0);
    EXPECT_EQ(cli(d.dir, "annotate --model " + model + " --pool " + q(d.p("none/rest.tsv")) + " --strategy local --out " +
                             q(d.p("ra/bad.tsv")))
                  .code,
              1);
}

TEST(Cli, ConvertDumps) {
    oracle::TempDir dir("cli");
    fs::create_directories(dir.path() / "img");
    fs::create_directories(dir.path() / "ann");
    write_pgm(GrayImage(20, 20), dir.path() / "img/a.pgm");
    std::ofstream(dir.path() / "ann/a.txt") << "1,1,8,1,8,6,1,6,WORD\n";
    const auto r = cli(dir, "convert --images " + q(dir.path() / "img") + " --annotations " + q(dir.path() / "ann") +
                                " --out " + q(dir.path() / "m.tsv"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_dataset(dir.path() / "m.tsv").instance_count(), 1u);
}

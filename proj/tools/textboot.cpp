// Command-line front end: synth, split, run, eval, annotate, convert.
//
// Exit codes: 0 success, 1 domain error (bad data, failed run), 2 usage error.

#include "textboot/error.hpp"
#include "textboot/orchestrator.hpp"
#include "textboot/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <string>

#ifndef TEXTBOOT_VERSION
#define TEXTBOOT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace textboot;

namespace {

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

/// Relative run directories land under $TEXTBOOT_RUN_ROOT when it is set.
fs::path run_directory(const fs::path& out) {
    if (out.is_absolute())
        return out;
    if (const char* root = std::getenv("TEXTBOOT_RUN_ROOT"); root && *root)
        return fs::path(root) / out;
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

// ---------------------------------------------------------------- options

struct SynthOptions {
    SceneSpec spec;
    fs::path out;
};

struct SplitOptions {
    fs::path manifest;
    double fraction = 0.1;
    std::string downgrade = "weak";
    std::uint64_t seed = 0;
    fs::path out;
};

struct ThresholdOptions {
    double score_s = 0.5;
    double score_s_prime = 0.4;
    double iou_t = 0.3;

    StrategyConfig config() const {
        StrategyConfig c;
        c.score_s = score_s;
        c.score_s_prime = score_s_prime;
        c.iou_t = iou_t;
        return c;
    }
};

struct RunOptions {
    fs::path strong, pool, test, out;
    std::string strategy = "local";
    int rounds = 3;
    ThresholdOptions thresholds;
    TrainConfig train;
    std::uint64_t seed = 1;
    std::string retrain_origin = "baseline";
    std::string annotate_with = "latest";
    double eval_iou = 0.5;
    std::string match_on = "mask";
    fs::path init_model;
    fs::path pseudo;
};

struct EvalOptions {
    fs::path det, gt;
    double iou = 0.5;
    std::string match_on = "mask";
};

struct AnnotateOptions {
    fs::path model, pool, out;
    std::string strategy = "local";
    ThresholdOptions thresholds;
    int round = 0;
};

struct ConvertOptions {
    fs::path images, annotations, out;
};

void add_thresholds(CLI::App* app, ThresholdOptions& t) {
    app->add_option("--score-s", t.score_s, "naive score threshold S")->check(CLI::Range(0.0, 1.0));
    app->add_option("--score-sprime", t.score_s_prime, "filter score threshold S'")->check(CLI::Range(0.0, 1.0));
    app->add_option("--iou-t", t.iou_t, "filter box IoU threshold T")->check(CLI::Range(0.0, 1.0));
}

MatchOn parse_match_on(const std::string& s) {
    if (s == "mask")
        return MatchOn::Mask;
    if (s == "box")
        return MatchOn::Box;
    throw UsageError("--match-on must be mask or box");
}

// ---------------------------------------------------------------- commands

int cmd_synth(const SynthOptions& o) {
    const Dataset d = generate_synthetic(o.spec, o.out);
    std::printf("images=%zu instances=%zu size=%dx%d manifest=%s hash=%s\n", d.records.size(), d.instance_count(),
                d.image_width, d.image_height, (o.out / "manifest.tsv").string().c_str(),
                file_hash(o.out / "manifest.tsv").c_str());
    return kOk;
}

int cmd_split(const SplitOptions& o) {
    if (!(o.fraction > 0.0 && o.fraction < 1.0))
        throw UsageError("--strong-fraction must lie strictly between 0 and 1");
    Downgrade mode;
    if (o.downgrade == "weak")
        mode = Downgrade::Weak;
    else if (o.downgrade == "none")
        mode = Downgrade::None;
    else if (o.downgrade == "keep")
        mode = Downgrade::Keep;
    else
        throw UsageError("--downgrade must be weak, none or keep");
    const Dataset d = load_dataset(o.manifest);
    const Split s = split_dataset(d, o.fraction, o.seed, mode);
    fs::create_directories(o.out);
    save_dataset(s.strong, o.out / "strong.tsv");
    save_dataset(s.rest, o.out / "rest.tsv");
    std::printf("strong=%zu rest=%zu rest_tier=%s\n", s.strong.records.size(), s.rest.records.size(),
                s.rest.records.empty() ? "-" : std::string(to_string(s.rest.records.front().tier)).c_str());
    return kOk;
}

nlohmann::json train_json(const TrainConfig& t) {
    return {{"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"batch_size", t.batch_size},
            {"seed", t.seed},
            {"proposal_threshold", t.score_threshold_for_proposals},
            {"min_component_pixels", t.min_component_pixels},
            {"patch_radius", t.patch_radius},
            {"positive_weight", t.positive_weight}};
}

int cmd_run(const RunOptions& o) {
    PipelineConfig cfg;
    cfg.setting = parse_setting(o.strategy);
    cfg.rounds = o.rounds;
    cfg.strategy_cfg = o.thresholds.config();
    cfg.train_cfg = o.train;
    cfg.eval_cfg.iou_threshold = o.eval_iou;
    cfg.eval_cfg.match_on = parse_match_on(o.match_on);
    cfg.seed = o.seed;
    if (o.retrain_origin == "baseline")
        cfg.retrain_origin = RetrainOrigin::FromBaseline;
    else if (o.retrain_origin == "previous")
        cfg.retrain_origin = RetrainOrigin::FromPrevious;
    else
        throw UsageError("--retrain-from must be baseline or previous");
    if (o.annotate_with == "latest")
        cfg.annotate_with = AnnotateWith::Latest;
    else if (o.annotate_with == "best")
        cfg.annotate_with = AnnotateWith::Best;
    else
        throw UsageError("--annotate-with must be latest or best");
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }

    const Dataset strong = o.strong.empty() ? Dataset{} : load_dataset(o.strong);
    const Dataset pool = load_dataset(o.pool);
    const Dataset test = load_dataset(o.test);

    PatchLogisticBackend backend;
    RunSeed seed;
    std::optional<PseudoSet> pseudo;
    if (!o.init_model.empty())
        seed.initial_model = backend.load(o.init_model);
    if (!o.pseudo.empty()) {
        pseudo = dataset_to_pseudo(load_dataset(o.pseudo));
        seed.pseudo = &*pseudo;
    }

    const fs::path dir = run_directory(o.out);
    const RunResult r = run_pipeline(strong, pool, test, cfg, dir, backend, seed);

    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& rep : r.reports) {
        const fs::path model = dir / ("round_" + std::to_string(rep.round)) / "model.bin";
        rounds.push_back({{"round", rep.round},
                          {"model", fs::relative(model, dir).generic_string()},
                          {"model_fnv1a64", file_hash(model)},
                          {"pseudo_manifest", "round_" + std::to_string(rep.round) + "/pseudo_manifest.tsv"},
                          {"metrics", "round_" + std::to_string(rep.round) + "/metrics.txt"},
                          {"f_measure", rep.f_measure}});
    }
    nlohmann::json inputs = nlohmann::json::object();
    auto add_input = [&](const char* key, const fs::path& p) {
        if (!p.empty())
            inputs[key] = {{"path", fs::absolute(p).lexically_normal().string()}, {"fnv1a64", file_hash(p)}};
    };
    add_input("strong", o.strong);
    add_input("pool", o.pool);
    add_input("test", o.test);
    add_input("init_model", o.init_model);
    add_input("pseudo", o.pseudo);
    const nlohmann::json manifest = {
        {"tool", "textboot"},
        {"version", TEXTBOOT_VERSION},
        {"config",
         {{"strategy", to_string(cfg.setting)},
          {"rounds", cfg.rounds},
          {"score_s", cfg.strategy_cfg.score_s},
          {"score_sprime", cfg.strategy_cfg.score_s_prime},
          {"iou_t", cfg.strategy_cfg.iou_t},
          {"retrain_from", to_string(cfg.retrain_origin)},
          {"annotate_with", to_string(cfg.annotate_with)},
          {"eval_iou", cfg.eval_cfg.iou_threshold},
          {"match_on", o.match_on},
          {"train", train_json(cfg.train_cfg)}}},
        {"seeds", {{"run", cfg.seed}, {"train_round_k", "run + k"}}},
        {"inputs", inputs},
        {"rounds", rounds},
        {"best_round", r.best_round},
        {"complete", r.complete}};
    write_file(dir / "run_manifest.json", manifest.dump(2) + "\n");

    std::fputs(format_f_table(r).c_str(), stdout);
    std::printf("best_round=%d\n", r.best_round);
    if (!r.complete) {
        std::fprintf(stderr, "textboot: run incomplete: %s\n", r.error.c_str());
        return kDomainError;
    }
    return kOk;
}

// Detection manifests may point at images that were moved; their masks are
// rasterised at the ground truth's dimensions.
std::vector<ImageDetections> load_detections(const fs::path& manifest, int width, int height) {
    Dataset d = load_dataset(manifest, LoadOptions{false});
    d.image_width = width;
    d.image_height = height;
    const PseudoSet set = dataset_to_pseudo(d);
    std::vector<ImageDetections> out;
    for (const auto& img : set.images) {
        ImageDetections det{img.image_id, {}};
        for (const auto& a : img.annotations) {
            const AxisRect box = a.mask.empty() ? a.box : mask_bbox(a.mask);
            det.detections.push_back({box, a.mask, a.score.value_or(1.0)});
        }
        out.push_back(std::move(det));
    }
    return out;
}

int cmd_eval(const EvalOptions& o) {
    EvalConfig cfg;
    cfg.iou_threshold = o.iou;
    cfg.match_on = parse_match_on(o.match_on);
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    const Dataset truth = load_dataset(o.gt);
    const EvalReport r = evaluate(load_detections(o.det, truth.image_width, truth.image_height), truth, cfg);
    std::fputs(format_report(r).c_str(), stdout);
    return kOk;
}

int cmd_annotate(const AnnotateOptions& o) {
    const Strategy strategy = parse_strategy(o.strategy);
    const Dataset pool = load_dataset(o.pool);
    PatchLogisticBackend backend;
    const auto model = backend.load(o.model);
    const PseudoSet set = annotate_pool(*model, pool, strategy, o.thresholds.config(), o.round);
    if (o.out.has_parent_path())
        fs::create_directories(o.out.parent_path());
    save_dataset(pseudo_to_dataset(set, pool.image_width, pool.image_height), o.out);
    std::printf("images=%zu annotations=%zu mean_score=%.3f\n", set.images.size(), set.count, set.mean_score);
    return kOk;
}

int cmd_convert(const ConvertOptions& o) {
    const fs::path manifest_dir = o.out.has_parent_path() ? o.out.parent_path() : fs::path(".");
    const Dataset d = convert_polygon_dumps(o.images, o.annotations, manifest_dir);
    save_dataset(d, o.out);
    std::printf("images=%zu instances=%zu\n", d.records.size(), d.instance_count());
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bootstrap a curved-text detector from few strong and many weak annotations"};
    app.require_subcommand(1);
    int jobs = 0;
    app.add_option("--jobs", jobs, "worker threads for per-image stages (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
    app.set_version_flag("--version", TEXTBOOT_VERSION);

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic curved-ribbon dataset");
    s->add_option("--out", synth.out, "output directory")->required();
    s->add_option("--n", synth.spec.n_images, "number of images");
    s->add_option("--width", synth.spec.width);
    s->add_option("--height", synth.spec.height);
    s->add_option("--instances-min", synth.spec.instances_per_image.lo);
    s->add_option("--instances-max", synth.spec.instances_per_image.hi);
    s->add_option("--curvature-min", synth.spec.curvature.lo);
    s->add_option("--curvature-max", synth.spec.curvature.hi);
    s->add_option("--stroke-min", synth.spec.stroke_width.lo);
    s->add_option("--stroke-max", synth.spec.stroke_width.hi);
    s->add_option("--length-min", synth.spec.length.lo);
    s->add_option("--length-max", synth.spec.length.hi);
    s->add_option("--contrast-min", synth.spec.contrast.lo);
    s->add_option("--contrast-max", synth.spec.contrast.hi);
    s->add_option("--clutter-min", synth.spec.clutter.lo);
    s->add_option("--clutter-max", synth.spec.clutter.hi);
    s->add_option("--noise", synth.spec.noise_level, "salt-and-pepper fraction");
    s->add_option("--texture", synth.spec.texture);
    s->add_option("--gauss-noise", synth.spec.blur_noise);
    s->add_option("--seed", synth.spec.seed);
    s->add_option("--prefix", synth.spec.id_prefix, "image id prefix");

    SplitOptions split;
    auto* sp = app.add_subcommand("split", "split a STRONG manifest into strong and downgraded parts");
    sp->add_option("manifest", split.manifest)->required();
    sp->add_option("--strong-fraction", split.fraction);
    sp->add_option("--downgrade", split.downgrade, "weak, none or keep");
    sp->add_option("--seed", split.seed);
    sp->add_option("--out", split.out, "output directory (strong.tsv, rest.tsv)")->required();

    RunOptions run;
    auto* r = app.add_subcommand("run", "recursive training run");
    r->add_option("--strong", run.strong, "STRONG manifest");
    r->add_option("--pool", run.pool, "pool manifest")->required();
    r->add_option("--test", run.test, "STRONG test manifest")->required();
    r->add_option("--out", run.out, "run directory")->required();
    r->add_option("--strategy", run.strategy, "naive, filter, local or fully");
    r->add_option("--rounds", run.rounds)->check(CLI::NonNegativeNumber);
    add_thresholds(r, run.thresholds);
    r->add_option("--epochs", run.train.epochs);
    r->add_option("--lr", run.train.learning_rate);
    r->add_option("--batch", run.train.batch_size);
    r->add_option("--proposal-threshold", run.train.score_threshold_for_proposals);
    r->add_option("--min-pixels", run.train.min_component_pixels);
    r->add_option("--patch-radius", run.train.patch_radius);
    r->add_option("--positive-weight", run.train.positive_weight);
    r->add_option("--seed", run.seed);
    r->add_option("--retrain-from", run.retrain_origin, "baseline or previous");
    r->add_option("--annotate-with", run.annotate_with, "latest or best");
    r->add_option("--eval-iou", run.eval_iou);
    r->add_option("--match-on", run.match_on, "mask or box");
    r->add_option("--init-model", run.init_model, "evaluate this model as round 0 instead of training one");
    r->add_option("--pseudo", run.pseudo, "pseudo manifest used in place of round-1 annotation");

    EvalOptions ev;
    auto* e = app.add_subcommand("eval", "score a detection manifest against ground truth");
    e->add_option("--det", ev.det)->required();
    e->add_option("--gt", ev.gt)->required();
    e->add_option("--iou", ev.iou);
    e->add_option("--match-on", ev.match_on, "mask or box");

    AnnotateOptions an;
    auto* a = app.add_subcommand("annotate", "pseudo-annotate a pool with a trained model");
    a->add_option("--model", an.model)->required();
    a->add_option("--pool", an.pool)->required();
    a->add_option("--strategy", an.strategy, "naive, filter or local");
    a->add_option("--out", an.out, "pseudo manifest path")->required();
    a->add_option("--round", an.round);
    add_thresholds(a, an.thresholds);

    ConvertOptions cv;
    auto* c = app.add_subcommand("convert", "import polygon-per-line annotation dumps");
    c->add_option("--images", cv.images)->required();
    c->add_option("--annotations", cv.annotations)->required();
    c->add_option("--out", cv.out, "manifest path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kUsageError;
    }
    if (jobs > 0)
        omp_set_num_threads(jobs);

    try {
        if (*s)
            return cmd_synth(synth);
        if (*sp)
            return cmd_split(split);
        if (*r)
            return cmd_run(run);
        if (*e)
            return cmd_eval(ev);
        if (*a)
            return cmd_annotate(an);
        if (*c)
            return cmd_convert(cv);
    } catch (const UsageError& err) {
        std::fprintf(stderr, "textboot: %s\n", err.what());
        return kUsageError;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "textboot: %s\n", err.what());
        return kDomainError;
    }
    return kUsageError;
}

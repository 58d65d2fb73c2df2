#include "textboot/orchestrator.hpp"

#include "textboot/error.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>

namespace fs = std::filesystem;

namespace textboot {

std::string_view to_string(Setting s) noexcept {
    switch (s) {
    case Setting::Naive: return "NAIVE";
    case Setting::Filter: return "FILTER";
    case Setting::Local: return "LOCAL";
    case Setting::Fully: return "FULLY";
    }
    return "LOCAL";
}

Setting parse_setting(std::string_view s) {
    std::string up(s);
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (up == "FULLY")
        return Setting::Fully;
    switch (parse_strategy(up)) {
    case Strategy::Naive: return Setting::Naive;
    case Strategy::Filter: return Setting::Filter;
    case Strategy::Local: return Setting::Local;
    }
    return Setting::Local;
}

std::string_view to_string(RetrainOrigin o) noexcept {
    return o == RetrainOrigin::FromBaseline ? "FROM_BASELINE" : "FROM_PREVIOUS";
}

std::string_view to_string(AnnotateWith a) noexcept { return a == AnnotateWith::Latest ? "LATEST" : "BEST"; }

void PipelineConfig::validate() const {
    if (rounds < 0)
        throw Error(ErrorCode::InvalidArgument, "rounds must be non-negative");
    strategy_cfg.validate();
    train_cfg.validate();
    eval_cfg.validate();
}

int select_best_round(const std::vector<RoundReport>& reports) noexcept {
    int best = -1;
    double best_f = -1.0;
    for (const auto& r : reports) {
        if (r.f_measure > best_f) {
            best_f = r.f_measure;
            best = r.round;
        }
    }
    return best;
}

EvalReport evaluate_model(const Detector& model, const Dataset& test, const EvalConfig& cfg) {
    std::vector<ImageDetections> dets(test.records.size());
    std::vector<std::exception_ptr> errors(test.records.size());
    const auto n = static_cast<std::ptrdiff_t>(test.records.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto& rec = test.records[static_cast<std::size_t>(i)];
            dets[static_cast<std::size_t>(i)] = {rec.image_id, model.detect(test.load_image(rec))};
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return evaluate(dets, test, cfg);
}

namespace {

class ImageCache {
public:
    std::shared_ptr<const GrayImage> get(const fs::path& path) {
        const std::string key = fs::absolute(path).lexically_normal().string();
        auto it = images_.find(key);
        if (it != images_.end())
            return it->second;
        if (!fs::exists(path))
            throw Error(ErrorCode::MissingImage, "image not found: " + path.string());
        auto img = std::make_shared<const GrayImage>(read_pgm(path));
        images_.emplace(key, img);
        return img;
    }

private:
    std::map<std::string, std::shared_ptr<const GrayImage>> images_;
};

std::vector<TrainExample> strong_examples(const Dataset& d, ImageCache& cache) {
    std::vector<TrainExample> out;
    out.reserve(d.records.size());
    for (const auto& r : d.records) {
        TrainExample ex;
        ex.image = cache.get(d.image_file(r));
        for (const auto& p : r.polygons)
            ex.masks.push_back(rasterize(p, ex.image->width, ex.image->height));
        ex.source = ExampleSource::Original;
        out.push_back(std::move(ex));
    }
    return out;
}

void append_pseudo_examples(const PseudoSet& set, ImageCache& cache, std::vector<TrainExample>& out) {
    for (const auto& img : set.images) {
        TrainExample ex;
        ex.image = cache.get(img.image_path);
        for (const auto& a : img.annotations)
            ex.masks.push_back(a.mask);
        ex.source = ExampleSource::Pseudo;
        out.push_back(std::move(ex));
    }
}

std::set<std::string> ids_of(const Dataset& d) {
    std::set<std::string> ids;
    for (const auto& r : d.records)
        ids.insert(r.image_id);
    return ids;
}

void require_disjoint(const std::set<std::string>& a, const std::set<std::string>& b, const char* what) {
    for (const auto& id : a)
        if (b.count(id))
            throw Error(ErrorCode::DisjointnessViolation, std::string(what) + " share image_id '" + id + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out)
        throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

fs::path round_dir(const fs::path& run_dir, int round) { return run_dir / ("round_" + std::to_string(round)); }

std::string round_metrics(const RoundReport& r, const EvalReport& eval) {
    std::string out = "round=" + std::to_string(r.round) + "\npseudo_count=" + std::to_string(r.pseudo_count) + "\n";
    return out + format_report(eval);
}

} // namespace

std::string format_metrics(const RunResult& r) {
    std::string out;
    char line[512];
    for (const auto& rep : r.reports) {
        std::snprintf(line, sizeof(line),
                      "round=%d\tprecision=%.6f\trecall=%.6f\tf_measure=%.6f\ttp=%zu\tfp=%zu\tfn=%zu\tpseudo_count=%zu"
                      "\tmodel=round_%d/model.bin\n",
                      rep.round, rep.precision, rep.recall, rep.f_measure, rep.counts.tp, rep.counts.fp, rep.counts.fn,
                      rep.pseudo_count, rep.round);
        out += line;
    }
    std::snprintf(line, sizeof(line), "# best_round=%d complete=%s\n", r.best_round, r.complete ? "true" : "false");
    out += line;
    return out;
}

std::string format_f_table(const RunResult& r) {
    std::string out = "round\tf_measure\n";
    char line[64];
    for (const auto& rep : r.reports) {
        std::snprintf(line, sizeof(line), "%d\t%.6f\n", rep.round, rep.f_measure);
        out += line;
    }
    return out;
}

RunResult run_pipeline(const Dataset& strong, const Dataset& pool, const Dataset& test, const PipelineConfig& cfg,
                       const fs::path& run_dir, const DetectorBackend& backend, const RunSeed& seed) {
    cfg.validate();
    const auto strong_ids = ids_of(strong);
    const auto pool_ids = ids_of(pool);
    const auto test_ids = ids_of(test);
    require_disjoint(pool_ids, strong_ids, "pool and strong set");
    require_disjoint(pool_ids, test_ids, "pool and test set");
    require_disjoint(strong_ids, test_ids, "strong and test set");

    for (const auto& r : strong.records)
        if (r.tier != Tier::Strong)
            throw Error(ErrorCode::TierMismatch, "strong set record '" + r.image_id + "' is not STRONG");
    for (const auto& r : pool.records) {
        bool ok = true;
        switch (cfg.setting) {
        case Setting::Naive: ok = r.tier == Tier::None || r.tier == Tier::Weak; break;
        case Setting::Filter:
        case Setting::Local: ok = r.tier == Tier::Weak; break;
        case Setting::Fully: ok = r.tier == Tier::Strong; break;
        }
        if (!ok)
            throw Error(ErrorCode::TierMismatch, std::string(to_string(cfg.setting)) + " setting cannot use " +
                                                     std::string(to_string(r.tier)) + " pool record '" + r.image_id +
                                                     "'");
    }
    if (!seed.initial_model && strong.records.empty())
        throw Error(ErrorCode::EmptyTrainingSet, "strong set is empty and no initial model was given");

    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create run directory " + run_dir.string() + ": " + ec.message());

    using clock = std::chrono::steady_clock;
    RunResult result;
    ImageCache cache;
    std::shared_ptr<const Detector> baseline;
    std::shared_ptr<const Detector> latest;
    std::shared_ptr<const Detector> best;
    double best_f = -1.0;

    auto finish_round = [&](int round, const std::shared_ptr<const Detector>& model, const PseudoSet* pseudo,
                            clock::time_point started) {
        const fs::path dir = round_dir(run_dir, round);
        fs::create_directories(dir);
        RoundReport rep;
        rep.round = round;
        rep.model_path = dir / "model.bin";
        backend.save(*model, rep.model_path);
        const EvalReport eval = evaluate_model(*model, test, cfg.eval_cfg);
        rep.precision = eval.precision;
        rep.recall = eval.recall;
        rep.f_measure = eval.f_measure;
        rep.counts = eval.totals;
        rep.pseudo_count = pseudo ? pseudo->count : 0;
        const PseudoSet empty;
        save_dataset(pseudo_to_dataset(pseudo ? *pseudo : empty, pool.image_width, pool.image_height),
                     dir / "pseudo_manifest.tsv");
        write_text(dir / "metrics.txt", round_metrics(rep, eval));
        rep.wall_time = std::chrono::duration<double>(clock::now() - started).count();
        result.reports.push_back(rep);
        latest = model;
        if (rep.f_measure > best_f) {
            best_f = rep.f_measure;
            best = model;
        }
    };

    int round = 0;
    try {
        const auto started = clock::now();
        const auto strong_set = strong_examples(strong, cache);
        if (seed.initial_model) {
            baseline = seed.initial_model;
        } else {
            TrainConfig tc = cfg.train_cfg;
            tc.seed = cfg.seed;
            baseline = backend.train(nullptr, strong_set, tc);
        }
        finish_round(0, baseline, nullptr, started);

        const auto pool_strong = cfg.setting == Setting::Fully ? strong_examples(pool, cache) : std::vector<TrainExample>{};
        const int rounds = cfg.setting == Setting::Fully ? 1 : cfg.rounds;
        for (round = 1; round <= rounds; ++round) {
            const auto t0 = clock::now();
            std::vector<TrainExample> examples = strong_set;
            PseudoSet pseudo;
            const PseudoSet* used = nullptr;
            if (cfg.setting == Setting::Fully) {
                examples.insert(examples.end(), pool_strong.begin(), pool_strong.end());
            } else {
                if (round == 1 && seed.pseudo) {
                    used = seed.pseudo;
                } else {
                    const Detector& annotator = cfg.annotate_with == AnnotateWith::Best ? *best : *latest;
                    const Strategy strategy = cfg.setting == Setting::Naive    ? Strategy::Naive
                                              : cfg.setting == Setting::Filter ? Strategy::Filter
                                                                               : Strategy::Local;
                    pseudo = annotate_pool(annotator, pool, strategy, cfg.strategy_cfg, round);
                    used = &pseudo;
                }
                for (const auto& img : used->images)
                    if (test_ids.count(img.image_id))
                        throw Error(ErrorCode::DisjointnessViolation,
                                    "pseudo-annotated image '" + img.image_id + "' belongs to the test set");
                append_pseudo_examples(*used, cache, examples);
            }
            TrainConfig tc = cfg.train_cfg;
            tc.seed = cfg.seed + static_cast<std::uint64_t>(round);
            const Detector* base = cfg.retrain_origin == RetrainOrigin::FromBaseline ? baseline.get() : latest.get();
            auto model = backend.train(base, examples, tc);
            finish_round(round, model, used, t0);
        }
    } catch (const std::exception& e) {
        result.complete = false;
        result.error = "round " + std::to_string(round) + ": " + e.what();
    }

    result.best_round = select_best_round(result.reports);
    write_text(run_dir / "metrics.tsv", format_metrics(result));
    write_text(run_dir / "f_vs_round.tsv", format_f_table(result));
    std::string timing = "round\twall_time_s\n";
    for (const auto& r : result.reports) {
        char line[64];
        std::snprintf(line, sizeof(line), "%d\t%.3f\n", r.round, r.wall_time);
        timing += line;
    }
    write_text(run_dir / "timing.tsv", timing);
    return result;
}

PseudoSet cross_domain_annotate(const fs::path& model_path, const Dataset& target_pool, const fs::path& out,
                                const StrategyConfig& cfg, const DetectorBackend& backend) {
    for (const auto& r : target_pool.records)
        if (r.tier != Tier::Weak)
            throw Error(ErrorCode::TierMismatch, "target pool record '" + r.image_id + "' is not WEAK");
    const auto model = backend.load(model_path);
    PseudoSet set = annotate_pool(*model, target_pool, Strategy::Local, cfg, 0);
    if (!out.parent_path().empty()) {
        std::error_code ec;
        fs::create_directories(out.parent_path(), ec);
    }
    save_dataset(pseudo_to_dataset(set, target_pool.image_width, target_pool.image_height), out);
    return set;
}

} // namespace textboot

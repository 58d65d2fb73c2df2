#pragma once

#include "textboot/data.hpp"
#include "textboot/detector.hpp"
#include "textboot/evaluation.hpp"
#include "textboot/strategies.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace textboot {

/// Training setting: one of the three pseudo-label strategies, or FULLY
/// (every pool image strongly annotated; the upper bound).
enum class Setting { Naive, Filter, Local, Fully };
enum class RetrainOrigin { FromBaseline, FromPrevious };
enum class AnnotateWith { Latest, Best };

std::string_view to_string(Setting s) noexcept;
Setting parse_setting(std::string_view s);
std::string_view to_string(RetrainOrigin o) noexcept;
std::string_view to_string(AnnotateWith a) noexcept;

struct PipelineConfig {
    Setting setting = Setting::Local;
    int rounds = 3;
    StrategyConfig strategy_cfg;
    TrainConfig train_cfg;
    EvalConfig eval_cfg;
    RetrainOrigin retrain_origin = RetrainOrigin::FromBaseline;
    AnnotateWith annotate_with = AnnotateWith::Latest;
    std::uint64_t seed = 1;

    void validate() const;
};

struct RoundReport {
    int round = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    MatchCounts counts;
    std::size_t pseudo_count = 0;
    std::filesystem::path model_path;
    double wall_time = 0.0; // seconds
};

struct RunResult {
    std::vector<RoundReport> reports; // reports[0] is the baseline
    int best_round = 0;
    bool complete = true;
    std::string error; // set when a round aborted
};

/// argmax of f_measure over reports, earliest round on ties; -1 when empty.
int select_best_round(const std::vector<RoundReport>& reports) noexcept;

/// Optional starting points for a run.
struct RunSeed {
    /// Evaluated as round 0 instead of training a baseline on `strong`.
    std::shared_ptr<const Detector> initial_model;
    /// Used in place of annotating the pool in round 1.
    const PseudoSet* pseudo = nullptr;
};

/// Recursive training:
///   round 0   train the baseline on `strong` (or take seed.initial_model)
///   round r   annotate `pool` with the round r-1 model (or the best so far),
///             retrain from the baseline (or the previous model) on strong plus
///             the fresh pseudo set, evaluate on `test`
/// FULLY trains once on strong plus the STRONG pool (rounds is ignored).
/// Artifacts go to run_dir/round_k/{model.bin,pseudo_manifest.tsv,metrics.txt}
/// plus run_dir/metrics.tsv and run_dir/f_vs_round.tsv.
/// Throws DisjointnessViolation and TierMismatch before any training; later
/// failures return a partial result with complete == false.
RunResult run_pipeline(const Dataset& strong, const Dataset& pool, const Dataset& test, const PipelineConfig& cfg,
                       const std::filesystem::path& run_dir, const DetectorBackend& backend = PatchLogisticBackend{},
                       const RunSeed& seed = {});

/// Local-strategy annotation of a WEAK target pool with a model trained
/// elsewhere; writes the pseudo manifest to `out`. Throws TierMismatch.
PseudoSet cross_domain_annotate(const std::filesystem::path& model_path, const Dataset& target_pool,
                                const std::filesystem::path& out, const StrategyConfig& cfg = {},
                                const DetectorBackend& backend = PatchLogisticBackend{});

/// Runs `model` over every image of `test` and scores it.
EvalReport evaluate_model(const Detector& model, const Dataset& test, const EvalConfig& cfg);

/// Per-round metrics records ("round=0 precision=... "), one line per round.
std::string format_metrics(const RunResult& r);
/// Two-column "round<TAB>f_measure" table with a header line.
std::string format_f_table(const RunResult& r);

} // namespace textboot

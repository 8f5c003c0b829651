#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "engage/engagement.hpp"
#include "engage/features.hpp"
#include "engage/selection.hpp"
#include "engage/signal.hpp"
#include "engage/stats.hpp"
#include "engage/svr.hpp"

namespace engage {

inline constexpr const char* kVersion = "1.0.0";

inline const std::vector<std::string> kAllCombinations = {"A", "V",   "T",  "A+V",
                                                          "A+T", "V+T", "A+V+T"};
inline const std::vector<std::string> kDefaultTargets = {"Vp/d", "Lp/d", "Cp/d", "LCp/d"};

struct ExperimentConfig {
    std::filesystem::path traces_csv;
    std::filesystem::path metadata_csv;
    std::filesystem::path comments_csv;
    std::filesystem::path annotated_comments_csv; // optional
    std::filesystem::path partition_csv;

    std::vector<std::string> combinations = kAllCombinations;
    std::vector<std::string> targets = kDefaultTargets;
    std::vector<std::string> methods = {"all", "sel.", "auto."};
    std::vector<double> c_grid = {1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    double epsilon = 0.1;
    int k_min = 6;
    int k_max_offset = 1; // k sweeps up to n_features - k_max_offset
    double cross_task_threshold = 0.2;
    FeatureParams feature_params;
    double sample_period = 0.25;
    std::vector<std::string> prediction_tasks = kPredictionTaskDefaults;
    std::uint64_t seed = 42;
    double svr_tol = 1e-4;
    int svr_max_iter = 10000;
    int jobs = 1;
    std::filesystem::path out_dir = "out";
    std::string echo_json; // config as loaded, path fields kept relative

    // Loads JSON config; relative input paths resolve against the config
    // file's directory.
    static ExperimentConfig from_file(const std::filesystem::path& path);
    void validate() const; // throws on missing inputs / bad knobs
};

struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string stage_name, const std::string& message)
        : std::runtime_error("[" + stage_name + "] " + message), stage(std::move(stage_name)) {}
};

struct MaeRow {
    std::string target;
    std::string combination;
    std::string method; // "all" / "sel." / "auto."
    double dev_mae = 0.0;
    double test_mae = 0.0;
    double rel_dev_pct = 0.0;  // vs the all row; 0 for "all"
    double rel_test_pct = 0.0;
    double best_C = 0.0;
    int k = 0; // features used
    bool fell_back_to_all = false;
    std::vector<std::string> features; // selected set (sel./auto. only)
    std::vector<WeightReportRow> weights;
};

struct DatasetSummary {
    int n_videos = 0;
    long long n_comments = 0;
    std::map<std::string, std::pair<double, double>> indicator_stats; // name -> (mean, std)
    int labeled_items = 0;
    int excluded_items = 0;
    double joint_prob = 0.0;
    std::map<std::string, int> fused_labels;
};

struct ExperimentReport {
    std::string version = kVersion;
    std::string config_echo;
    DatasetSummary summary;
    std::map<std::string, CorrelationMatrix> correlations; // by dimension name
    std::map<std::string, SelectionResult> cross_task;     // by dimension name
    std::vector<MaeRow> rows;
    std::map<std::string, double> avg_auto_k_per_target;
    std::map<std::string, double> avg_auto_features_per_dimension;

    std::string to_json() const;
};

// In-memory pipeline state shared by the stage functions.
struct PipelineData {
    std::vector<std::string> video_ids; // sorted
    std::vector<GoldSignal> gold;       // video-major, dimension-minor
    std::array<DataTable, 3> features_by_dim; // bare 24-column tables
    std::vector<FlagSet> feature_flags;       // parallel to `gold`
    DataTable indicators;
    std::map<std::string, std::string> split; // video -> train/dev/test
    DatasetSummary summary;
};

// ---- stage functions -------------------------------------------------

std::vector<AnnotationTrace> read_traces_csv(const std::filesystem::path& path,
                                             double sample_period);
std::vector<GoldSignal> fuse_stage(std::vector<AnnotationTrace> traces);
void write_gold_csv(const std::filesystem::path& path, const std::vector<GoldSignal>& gold);
std::vector<GoldSignal> read_gold_csv(const std::filesystem::path& path);
void write_ewe_weights_json(const std::filesystem::path& path,
                            const std::vector<GoldSignal>& gold);

void extract_stage(PipelineData& data, const FeatureParams& params);
void write_features_csv(const std::filesystem::path& path, const PipelineData& data);

void engagement_stage(PipelineData& data, const ExperimentConfig& config);
void write_indicators_csv(const std::filesystem::path& path, const PipelineData& data);

std::map<std::string, CorrelationMatrix> correlate_stage(const PipelineData& data,
                                                         const ExperimentConfig& config);

// Everything through indicators + partition, ready for selection/training.
PipelineData prepare(const ExperimentConfig& config);

// Full pipeline; writes every artifact beneath config.out_dir and returns
// the report. Identical config + seed reproduce byte-identical outputs.
ExperimentReport run(const ExperimentConfig& config);

// MAE >= 1 prints with 3 decimals, otherwise 3 significant digits.
std::string format_mae(double v);

} // namespace engage

// Command-line front end for the engagement-analysis pipeline. Subcommands
// mirror the pipeline stages so each step can run and be inspected on its
// own; `run` executes everything from one config.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>

#include <CLI11.hpp>

#include "engage/csv.hpp"
#include "engage/fixture.hpp"
#include "engage/pipeline.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

engage::ExperimentConfig load_config(const std::string& config_path, const std::string& out_dir,
                                     std::int64_t seed, int jobs) {
    engage::ExperimentConfig config;
    if (!config_path.empty()) config = engage::ExperimentConfig::from_file(config_path);
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    if (jobs > 0) config.jobs = jobs;
    return config;
}

void print_summary(const engage::ExperimentReport& report) {
    const auto& s = report.summary;
    std::printf("videos: %d, comments: %lld\n", s.n_videos, s.n_comments);
    for (const auto& name : engage::kPredictionTaskDefaults) {
        auto it = s.indicator_stats.find(name);
        if (it != s.indicator_stats.end())
            std::printf("%s: μ = %.2f, σ = %.2f\n", name.c_str(), it->second.first,
                        it->second.second);
    }
    if (s.labeled_items > 0)
        std::printf("labeled comments: %d (joint probability %.2f, %d excluded)\n",
                    s.labeled_items, s.joint_prob, s.excluded_items);
    std::printf("%-6s %-7s %-6s %3s %9s %10s %10s %8s %8s\n", "target", "combo", "method", "k",
                "C", "dev MAE", "test MAE", "rel.dev", "rel.test");
    for (const auto& row : report.rows) {
        std::printf("%-6s %-7s %-6s %3d %9g %10s %10s", row.target.c_str(),
                    row.combination.c_str(), row.method.c_str(), row.k, row.best_C,
                    engage::format_mae(row.dev_mae).c_str(),
                    engage::format_mae(row.test_mae).c_str());
        if (row.method == "all")
            std::printf(" %8s %8s\n", "-", "-");
        else
            std::printf(" %+7.1f%% %+7.1f%%\n", row.rel_dev_pct, row.rel_test_pct);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Engagement prediction from continuous emotion annotations"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may follow the subcommand

    std::string config_path, out_dir;
    std::int64_t seed = -1;
    int jobs = 0;
    app.add_option("--config", config_path, "Pipeline config JSON")->envname("ENGAGE_CONFIG");
    app.add_option("--out", out_dir, "Output directory override");
    app.add_option("--seed", seed, "Seed override");
    app.add_option("--jobs", jobs, "Worker threads for the experiment grid");

    // Per-stage overrides mirroring the config fields.
    double epsilon = -1.0, threshold = -1.0, sample_period = -1.0, svr_tol = -1.0;
    int k_min = -1, k_max_offset = -1, peak_support = -1, svr_max_iter = -1;
    std::vector<std::string> targets, combinations, methods;
    app.add_option("--epsilon", epsilon, "SVR epsilon tube override");
    app.add_option("--cross-task-threshold", threshold, "Cross-task |mean r| threshold");
    app.add_option("--sample-period", sample_period, "Seconds per annotation bin");
    app.add_option("--peak-support", peak_support, "Neighbors per side for the peaks feature");
    app.add_option("--k-min", k_min, "Smallest k in the automatic-selection sweep");
    app.add_option("--k-max-offset", k_max_offset, "Sweep stops at n_features - offset");
    app.add_option("--svr-tol", svr_tol, "SVR KKT tolerance");
    app.add_option("--svr-max-iter", svr_max_iter, "SVR iteration cap");
    app.add_option("--targets", targets, "Targets to predict (e.g. Lp/d)");
    app.add_option("--combinations", combinations, "Signal combinations (e.g. A+V)");
    app.add_option("--methods", methods, "Methods to run: all, sel., auto.");

    auto* cmd_run = app.add_subcommand("run", "Full pipeline: fuse through report");

    auto* cmd_fixture = app.add_subcommand("fixture", "Generate a synthetic dataset");
    int fx_videos = 300;
    std::string fx_out = "fixture";
    bool fx_no_adversarial = false;
    cmd_fixture->add_option("--videos", fx_videos, "Number of videos (>= 30)");
    cmd_fixture->add_option("--fixture-out", fx_out, "Fixture directory");
    cmd_fixture->add_flag("--no-adversarial", fx_no_adversarial,
                          "Disable the mirrored adversarial annotator");

    auto* cmd_fuse = app.add_subcommand("fuse", "Fuse annotation traces into gold signals");
    auto* cmd_extract = app.add_subcommand("extract", "Extract features from gold signals");
    std::string gold_path;
    cmd_extract->add_option("--gold", gold_path, "gold_signals.csv from `fuse`");
    auto* cmd_correlate = app.add_subcommand("correlate", "Correlation matrices per dimension");
    auto* cmd_select = app.add_subcommand("select", "Cross-task feature selection");
    auto* cmd_train = app.add_subcommand("train", "Experiment grid: selection + SVR training");
    auto* cmd_report = app.add_subcommand("report", "Full pipeline plus a printed summary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    auto apply_overrides = [&](engage::ExperimentConfig& config) {
        if (epsilon >= 0.0) config.epsilon = epsilon;
        if (threshold >= 0.0) config.cross_task_threshold = threshold;
        if (sample_period > 0.0) config.sample_period = sample_period;
        if (peak_support > 0) config.feature_params.peak_support = peak_support;
        if (k_min > 0) config.k_min = k_min;
        if (k_max_offset >= 0) config.k_max_offset = k_max_offset;
        if (svr_tol > 0.0) config.svr_tol = svr_tol;
        if (svr_max_iter > 0) config.svr_max_iter = svr_max_iter;
        if (!targets.empty()) config.targets = targets;
        if (!combinations.empty()) config.combinations = combinations;
        if (!methods.empty()) config.methods = methods;
    };

    try {
        if (cmd_fixture->parsed()) {
            engage::FixtureSpec spec;
            spec.n_videos = fx_videos;
            spec.adversarial_annotator = !fx_no_adversarial;
            std::uint64_t fx_seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : 42;
            if (!out_dir.empty()) fx_out = out_dir;
            try {
                auto paths = engage::generate_fixture(fx_seed, spec, fx_out);
                std::printf("fixture written to %s (config: %s)\n", fx_out.c_str(),
                            paths.config.string().c_str());
            } catch (const std::invalid_argument& e) {
                std::fprintf(stderr, "fixture spec error: %s\n", e.what());
                return kExitValidation;
            }
            return 0;
        }

        engage::ExperimentConfig config;
        try {
            if (config_path.empty()) {
                std::fprintf(stderr, "--config is required for this subcommand\n");
                return kExitValidation;
            }
            config = load_config(config_path, out_dir, seed, jobs);
            apply_overrides(config);
            config.validate();
        } catch (const std::exception& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return kExitValidation;
        }

        namespace fs = std::filesystem;
        fs::create_directories(config.out_dir);

        if (cmd_fuse->parsed()) {
            auto gold = engage::fuse_stage(
                engage::read_traces_csv(config.traces_csv, config.sample_period));
            engage::write_gold_csv(config.out_dir / "gold_signals.csv", gold);
            engage::write_ewe_weights_json(config.out_dir / "ewe_weights.json", gold);
            std::printf("fused %zu signals -> %s\n", gold.size(),
                        (config.out_dir / "gold_signals.csv").string().c_str());
            return 0;
        }

        if (cmd_extract->parsed()) {
            engage::PipelineData data;
            if (!gold_path.empty())
                data.gold = engage::read_gold_csv(gold_path);
            else
                data.gold = engage::fuse_stage(
                    engage::read_traces_csv(config.traces_csv, config.sample_period));
            engage::engagement_stage(data, config);
            std::set<std::string> keep(data.video_ids.begin(), data.video_ids.end());
            std::erase_if(data.gold,
                          [&keep](const engage::GoldSignal& g) { return !keep.count(g.video_id); });
            std::sort(data.gold.begin(), data.gold.end(),
                      [](const engage::GoldSignal& a, const engage::GoldSignal& b) {
                          if (a.video_id != b.video_id) return a.video_id < b.video_id;
                          return static_cast<int>(a.dimension) < static_cast<int>(b.dimension);
                      });
            engage::extract_stage(data, config.feature_params);
            engage::write_features_csv(config.out_dir / "features.csv", data);
            std::printf("features for %zu videos -> %s\n", data.video_ids.size(),
                        (config.out_dir / "features.csv").string().c_str());
            return 0;
        }

        if (cmd_correlate->parsed() || cmd_select->parsed()) {
            engage::PipelineData data = engage::prepare(config);
            auto matrices = engage::correlate_stage(data, config);
            for (const auto& [dim, matrix] : matrices) {
                std::string base = dim == "trustworthiness" ? "trust" : dim;
                engage::write_matrix_csv(matrix, config.out_dir / ("correlations_" + base + ".csv"),
                                         config.out_dir / ("correlations_" + base + "_p.csv"));
                engage::write_matrix_tsv(matrix, config.out_dir / ("correlations_" + base + ".tsv"));
                std::ofstream(config.out_dir / ("correlations_" + base + ".json"))
                    << engage::matrix_to_json(matrix) << "\n";
            }
            if (cmd_select->parsed()) {
                fs::create_directories(config.out_dir / "selection");
                for (const auto& [dim, matrix] : matrices) {
                    auto sel = engage::cross_task_select(matrix, config.cross_task_threshold);
                    std::ofstream out(config.out_dir / "selection" / ("cross_task_" + dim + ".json"));
                    out << "{\n  \"method\": \"sel.\",\n  \"dimension\": \"" << dim
                        << "\",\n  \"threshold\": " << config.cross_task_threshold
                        << ",\n  \"features\": [";
                    for (std::size_t i = 0; i < sel.feature_names.size(); ++i)
                        out << (i ? ", " : "") << '"' << sel.feature_names[i] << '"';
                    out << "]\n}\n";
                    std::printf("cross-task %s: %d features\n", dim.c_str(), sel.k);
                }
            }
            return 0;
        }

        if (cmd_run->parsed() || cmd_train->parsed() || cmd_report->parsed()) {
            engage::ExperimentReport report = engage::run(config);
            if (cmd_report->parsed() || cmd_run->parsed()) print_summary(report);
            std::printf("report: %s\n", (config.out_dir / "report.json").string().c_str());
            return 0;
        }
    } catch (const engage::StageError& e) {
        std::fprintf(stderr, "stage failure %s\n", e.what());
        return kExitStage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitStage;
    }
    return 0;
}

#include "engage/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "engage/csv.hpp"
#include "engage/rng.hpp"

namespace engage {

using ordered_json = nlohmann::ordered_json;

// ---- config ------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    ordered_json j = ordered_json::parse(in);

    ExperimentConfig c;
    auto base = path.parent_path();
    auto resolve = [&base](const std::string& p) -> std::filesystem::path {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    if (j.contains("traces")) c.traces_csv = resolve(j["traces"].get<std::string>());
    if (j.contains("metadata")) c.metadata_csv = resolve(j["metadata"].get<std::string>());
    if (j.contains("comments")) c.comments_csv = resolve(j["comments"].get<std::string>());
    if (j.contains("annotated_comments"))
        c.annotated_comments_csv = resolve(j["annotated_comments"].get<std::string>());
    if (j.contains("partition")) c.partition_csv = resolve(j["partition"].get<std::string>());

    if (j.contains("combinations")) c.combinations = j["combinations"].get<std::vector<std::string>>();
    if (j.contains("targets")) c.targets = j["targets"].get<std::vector<std::string>>();
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("c_grid")) c.c_grid = j["c_grid"].get<std::vector<double>>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("k_min")) c.k_min = j["k_min"].get<int>();
    if (j.contains("k_max_offset")) c.k_max_offset = j["k_max_offset"].get<int>();
    if (j.contains("cross_task_threshold"))
        c.cross_task_threshold = j["cross_task_threshold"].get<double>();
    if (j.contains("peak_support")) c.feature_params.peak_support = j["peak_support"].get<int>();
    if (j.contains("crossing_level"))
        c.feature_params.crossing_level = j["crossing_level"].get<double>();
    if (j.contains("saen_m")) c.feature_params.saen_m = j["saen_m"].get<int>();
    if (j.contains("saen_r_factor"))
        c.feature_params.saen_r_factor = j["saen_r_factor"].get<double>();
    if (j.contains("sample_period")) c.sample_period = j["sample_period"].get<double>();
    if (j.contains("prediction_tasks"))
        c.prediction_tasks = j["prediction_tasks"].get<std::vector<std::string>>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("svr_tol")) c.svr_tol = j["svr_tol"].get<double>();
    if (j.contains("svr_max_iter")) c.svr_max_iter = j["svr_max_iter"].get<int>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
    if (j.contains("out")) c.out_dir = resolve(j["out"].get<std::string>());

    c.echo_json = j.dump(2);
    return c;
}

void ExperimentConfig::validate() const {
    auto need = [](const std::filesystem::path& p, const char* what) {
        if (p.empty()) throw std::runtime_error(std::string("config: missing path for ") + what);
        if (!std::filesystem::exists(p))
            throw std::runtime_error("config: " + std::string(what) + " not found: " + p.string());
    };
    need(traces_csv, "traces");
    need(metadata_csv, "metadata");
    need(comments_csv, "comments");
    need(partition_csv, "partition");
    if (!annotated_comments_csv.empty() && !std::filesystem::exists(annotated_comments_csv))
        throw std::runtime_error("config: annotated_comments not found: " +
                                 annotated_comments_csv.string());
    if (c_grid.empty()) throw std::runtime_error("config: empty C grid");
    for (double c : c_grid)
        if (!(c > 0.0)) throw std::runtime_error("config: C values must be > 0");
    if (!(epsilon >= 0.0)) throw std::runtime_error("config: epsilon must be >= 0");
    if (k_min < 1) throw std::runtime_error("config: k_min must be >= 1");
    if (!(sample_period > 0.0)) throw std::runtime_error("config: sample_period must be > 0");
    if (targets.empty() || combinations.empty() || methods.empty())
        throw std::runtime_error("config: targets/combinations/methods must be non-empty");
    for (const auto& m : methods)
        if (m != "all" && m != "sel." && m != "auto.")
            throw std::runtime_error("config: unknown method '" + m + "'");
}

// ---- trace ingestion and fusion -----------------------------------------

std::vector<AnnotationTrace> read_traces_csv(const std::filesystem::path& path,
                                             double sample_period) {
    csv::Table t = csv::read_file(path);
    int c_vid = t.require_column("video_id");
    int c_dim = t.require_column("dimension");
    int c_ann = t.require_column("annotator_id");
    int c_bin = t.require_column("bin_index");
    int c_val = t.require_column("value");

    // (video, dimension, annotator) -> samples indexed by bin
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> groups;
    for (const auto& row : t.rows) {
        auto key = std::make_tuple(row[c_vid], row[c_dim], row[c_ann]);
        auto& samples = groups[key];
        std::size_t bin = static_cast<std::size_t>(std::stoll(row[c_bin]));
        if (bin >= samples.size()) samples.resize(bin + 1,
                                                  std::numeric_limits<double>::quiet_NaN());
        samples[bin] = std::stod(row[c_val]);
    }

    std::vector<AnnotationTrace> traces;
    traces.reserve(groups.size());
    for (auto& [key, samples] : groups) {
        AnnotationTrace tr;
        tr.video_id = std::get<0>(key);
        tr.dimension = dimension_from_string(std::get<1>(key));
        tr.annotator_id = std::get<2>(key);
        tr.sample_period = sample_period;
        tr.samples.resize(static_cast<Eigen::Index>(samples.size()));
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (std::isnan(samples[i]))
                throw std::runtime_error("traces: non-contiguous bin_index for " + tr.video_id +
                                         "/" + std::get<1>(key) + "/" + tr.annotator_id);
            tr.samples[static_cast<Eigen::Index>(i)] = samples[i];
        }
        tr.validate();
        traces.push_back(std::move(tr));
    }
    return traces;
}

std::vector<GoldSignal> fuse_stage(std::vector<AnnotationTrace> traces) {
    std::map<std::pair<std::string, int>, std::vector<AnnotationTrace>> groups;
    for (auto& t : traces)
        groups[{t.video_id, static_cast<int>(t.dimension)}].push_back(std::move(t));

    std::vector<GoldSignal> gold;
    gold.reserve(groups.size());
    for (auto& [key, group] : groups) gold.push_back(make_gold_signal(std::move(group)));
    return gold;
}

void write_gold_csv(const std::filesystem::path& path, const std::vector<GoldSignal>& gold) {
    csv::Table t;
    t.header = {"video_id", "dimension", "bin_index", "value"};
    for (const auto& g : gold)
        for (Eigen::Index i = 0; i < g.samples.size(); ++i)
            t.rows.push_back({g.video_id, to_string(g.dimension), std::to_string(i),
                              csv::format_double(g.samples[i])});
    csv::write_file(path, t);
}

std::vector<GoldSignal> read_gold_csv(const std::filesystem::path& path) {
    csv::Table t = csv::read_file(path);
    int c_vid = t.require_column("video_id");
    int c_dim = t.require_column("dimension");
    int c_val = t.require_column("value");

    std::map<std::pair<std::string, int>, std::vector<double>> groups;
    for (const auto& row : t.rows)
        groups[{row[c_vid], static_cast<int>(dimension_from_string(row[c_dim]))}].push_back(
            std::stod(row[c_val]));

    std::vector<GoldSignal> gold;
    for (auto& [key, samples] : groups) {
        GoldSignal g;
        g.video_id = key.first;
        g.dimension = static_cast<Dimension>(key.second);
        g.samples = Eigen::Map<Eigen::VectorXd>(samples.data(),
                                                static_cast<Eigen::Index>(samples.size()));
        g.constant_flag = g.samples.norm() == 0.0;
        gold.push_back(std::move(g));
    }
    return gold;
}

void write_ewe_weights_json(const std::filesystem::path& path,
                            const std::vector<GoldSignal>& gold) {
    ordered_json j;
    for (const auto& g : gold) {
        ordered_json w;
        for (const auto& [annotator, weight] : g.annotator_weights) w[annotator] = weight;
        w["constant_signal"] = g.constant_flag;
        j[g.video_id][to_string(g.dimension)] = std::move(w);
    }
    std::ofstream(path) << j.dump(2) << "\n";
}

// ---- feature extraction --------------------------------------------------

void extract_stage(PipelineData& data, const FeatureParams& params) {
    const Eigen::Index n = static_cast<Eigen::Index>(data.video_ids.size());
    for (std::size_t d = 0; d < kAllDimensions.size(); ++d) {
        data.features_by_dim[d].ids = data.video_ids;
        data.features_by_dim[d].columns.assign(kFeatureNames.begin(), kFeatureNames.end());
        data.features_by_dim[d].values.resize(n, 24);
    }
    data.feature_flags.resize(data.gold.size());

    std::map<std::string, Eigen::Index> row_of;
    for (std::size_t i = 0; i < data.video_ids.size(); ++i)
        row_of[data.video_ids[i]] = static_cast<Eigen::Index>(i);

    for (std::size_t g = 0; g < data.gold.size(); ++g) {
        const GoldSignal& sig = data.gold[g];
        FeatureVector fv = extract_features(sig, params);
        data.features_by_dim[static_cast<int>(sig.dimension)].values.row(row_of.at(sig.video_id)) =
            fv.as_vector();
        data.feature_flags[g] = fv.flags;
    }
}

void write_features_csv(const std::filesystem::path& path, const PipelineData& data) {
    csv::Table t;
    t.header = {"video_id", "dimension"};
    for (const char* name : kFeatureNames) t.header.push_back(name);
    t.header.push_back("flags");

    std::map<std::string, Eigen::Index> row_of;
    for (std::size_t i = 0; i < data.video_ids.size(); ++i)
        row_of[data.video_ids[i]] = static_cast<Eigen::Index>(i);

    for (std::size_t g = 0; g < data.gold.size(); ++g) {
        const GoldSignal& sig = data.gold[g];
        std::vector<std::string> row = {sig.video_id, to_string(sig.dimension)};
        const auto& table = data.features_by_dim[static_cast<int>(sig.dimension)];
        Eigen::Index r = row_of.at(sig.video_id);
        for (Eigen::Index c = 0; c < 24; ++c)
            row.push_back(csv::format_double(table.values(r, c)));
        row.push_back(data.feature_flags[g].joined());
        t.rows.push_back(std::move(row));
    }
    csv::write_file(path, t);
}

// ---- engagement ------------------------------------------------------------

namespace {

std::map<std::string, EngagementRecord> read_engagement(const ExperimentConfig& config,
                                                        long long* total_comments) {
    csv::Table meta = csv::read_file(config.metadata_csv);
    int c_vid = meta.require_column("video_id");
    int c_up = meta.require_column("upload_date");
    int c_cr = meta.require_column("crawl_date");
    int c_views = meta.require_column("views");
    int c_likes = meta.require_column("likes");
    int c_dislikes = meta.require_column("dislikes");
    int c_comments = meta.require_column("comments");
    int c_clikes = meta.require_column("comment_likes");

    std::map<std::string, EngagementRecord> records;
    for (const auto& row : meta.rows) {
        EngagementRecord r;
        r.video_id = row[c_vid];
        r.upload_date = Date::parse(row[c_up]);
        r.crawl_date = Date::parse(row[c_cr]);
        r.views = std::stoll(row[c_views]);
        r.likes = std::stoll(row[c_likes]);
        r.dislikes = std::stoll(row[c_dislikes]);
        r.comments = std::stoll(row[c_comments]);
        r.comment_likes = std::stoll(row[c_clikes]);
        records[r.video_id] = std::move(r);
    }

    csv::Table com = csv::read_file(config.comments_csv);
    int cc_vid = com.require_column("video_id");
    int cc_likes = com.require_column("likes");
    int cc_sent = com.require_column("sentiment");
    if (total_comments) *total_comments = static_cast<long long>(com.rows.size());
    for (const auto& row : com.rows) {
        auto it = records.find(row[cc_vid]);
        if (it == records.end()) continue;
        EngagementRecord& r = it->second;
        std::int64_t likes = std::stoll(row[cc_likes]);
        const std::string& s = row[cc_sent];
        if (s == "positive") {
            ++r.positive_comments;
            r.positive_comment_likes += likes;
        } else if (s == "neutral") {
            ++r.neutral_comments;
        } else if (s == "negative") {
            ++r.negative_comments;
            r.negative_comment_likes += likes;
        } else if (s != "unlabeled") {
            throw std::runtime_error("comments: unknown sentiment '" + s + "'");
        }
    }
    for (auto& [id, r] : records) r.validate();
    return records;
}

} // namespace

void engagement_stage(PipelineData& data, const ExperimentConfig& config) {
    long long total_comments = 0;
    auto records = read_engagement(config, &total_comments);

    // Restrict to videos that have both gold signals and metadata.
    std::set<std::string> with_gold;
    std::map<std::string, int> dims_seen;
    for (const auto& g : data.gold) ++dims_seen[g.video_id];
    for (const auto& [vid, count] : dims_seen)
        if (count == static_cast<int>(kAllDimensions.size())) with_gold.insert(vid);

    data.video_ids.clear();
    for (const auto& [vid, record] : records)
        if (with_gold.count(vid)) data.video_ids.push_back(vid);
    std::sort(data.video_ids.begin(), data.video_ids.end());
    if (data.video_ids.size() < 3)
        throw std::runtime_error("fewer than 3 videos with both traces and metadata");

    data.indicators.ids = data.video_ids;
    data.indicators.columns = kIndicatorNames;
    data.indicators.values.resize(static_cast<Eigen::Index>(data.video_ids.size()),
                                  static_cast<Eigen::Index>(kIndicatorNames.size()));
    for (std::size_t i = 0; i < data.video_ids.size(); ++i) {
        IndicatorVector v = indicators(records.at(data.video_ids[i]));
        for (std::size_t c = 0; c < kIndicatorNames.size(); ++c)
            data.indicators.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                v.by_name(kIndicatorNames[c]);
    }

    data.summary.n_videos = static_cast<int>(data.video_ids.size());
    data.summary.n_comments = total_comments;
    for (std::size_t c = 0; c < kIndicatorNames.size(); ++c) {
        Eigen::VectorXd col = data.indicators.values.col(static_cast<Eigen::Index>(c));
        double mean = col.mean();
        double sd = std::sqrt((col.array() - mean).square().mean());
        data.summary.indicator_stats[kIndicatorNames[c]] = {mean, sd};
    }

    if (!config.annotated_comments_csv.empty() &&
        std::filesystem::exists(config.annotated_comments_csv)) {
        csv::Table ann = csv::read_file(config.annotated_comments_csv);
        int l1 = ann.require_column("label1");
        int l2 = ann.require_column("label2");
        int l3 = ann.require_column("label3");
        std::vector<std::array<Sentiment, 3>> items;
        for (const auto& row : ann.rows)
            items.push_back({sentiment_from_string(row[l1]), sentiment_from_string(row[l2]),
                             sentiment_from_string(row[l3])});
        if (!items.empty()) {
            data.summary.labeled_items = static_cast<int>(items.size());
            data.summary.joint_prob = joint_probability(items);
            for (const auto& item : items) {
                auto fused = majority_fuse(item);
                if (fused)
                    ++data.summary.fused_labels[to_string(*fused)];
                else
                    ++data.summary.excluded_items;
            }
        }
    }
}

void write_indicators_csv(const std::filesystem::path& path, const PipelineData& data) {
    csv::Table t;
    t.header = {"video_id"};
    for (const auto& c : data.indicators.columns) t.header.push_back(c);
    for (std::size_t i = 0; i < data.indicators.ids.size(); ++i) {
        std::vector<std::string> row = {data.indicators.ids[i]};
        for (Eigen::Index c = 0; c < data.indicators.values.cols(); ++c)
            row.push_back(csv::format_double(data.indicators.values(static_cast<Eigen::Index>(i), c)));
        t.rows.push_back(std::move(row));
    }
    csv::write_file(path, t);
}

// ---- correlation -----------------------------------------------------------

std::map<std::string, CorrelationMatrix> correlate_stage(const PipelineData& data,
                                                         const ExperimentConfig& config) {
    std::map<std::string, CorrelationMatrix> out;
    for (std::size_t d = 0; d < kAllDimensions.size(); ++d)
        out[to_string(kAllDimensions[d])] =
            build_matrix(data.features_by_dim[d], data.indicators, config.prediction_tasks);
    return out;
}

// ---- preparation -----------------------------------------------------------

PipelineData prepare(const ExperimentConfig& config) {
    PipelineData data;
    try {
        data.gold = fuse_stage(read_traces_csv(config.traces_csv, config.sample_period));
    } catch (const std::exception& e) {
        throw StageError("fuse", e.what());
    }
    try {
        engagement_stage(data, config);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("engagement", e.what());
    }

    // Drop gold rows for videos outside the intersection, keep sorted order.
    std::set<std::string> keep(data.video_ids.begin(), data.video_ids.end());
    std::vector<GoldSignal> filtered;
    for (auto& g : data.gold)
        if (keep.count(g.video_id)) filtered.push_back(std::move(g));
    std::sort(filtered.begin(), filtered.end(), [](const GoldSignal& a, const GoldSignal& b) {
        if (a.video_id != b.video_id) return a.video_id < b.video_id;
        return static_cast<int>(a.dimension) < static_cast<int>(b.dimension);
    });
    data.gold = std::move(filtered);

    try {
        extract_stage(data, config.feature_params);
    } catch (const std::exception& e) {
        throw StageError("extract", e.what());
    }

    try {
        csv::Table part = csv::read_file(config.partition_csv);
        int c_vid = part.require_column("video_id");
        int c_split = part.require_column("split");
        for (const auto& row : part.rows) {
            if (row[c_split] != "train" && row[c_split] != "dev" && row[c_split] != "test")
                throw std::runtime_error("partition: unknown split '" + row[c_split] + "'");
            data.split[row[c_vid]] = row[c_split];
        }
        for (const auto& vid : data.video_ids)
            if (!data.split.count(vid))
                throw std::runtime_error("partition: missing video " + vid);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("partition", e.what());
    }
    return data;
}

// ---- training cells ---------------------------------------------------------

namespace {

struct ComboData {
    std::vector<std::string> feature_names; // prefixed
    Eigen::MatrixXd X_train, X_dev, X_test;
    std::vector<Eigen::Index> rows_train, rows_dev, rows_test;
};

std::vector<Dimension> parse_combination(const std::string& combo) {
    std::vector<Dimension> dims;
    std::stringstream ss(combo);
    std::string part;
    while (std::getline(ss, part, '+')) {
        if (part == "A") dims.push_back(Dimension::arousal);
        else if (part == "V") dims.push_back(Dimension::valence);
        else if (part == "T") dims.push_back(Dimension::trustworthiness);
        else throw std::runtime_error("unknown signal combination '" + combo + "'");
    }
    if (dims.empty()) throw std::runtime_error("empty signal combination");
    return dims;
}

ComboData build_combo(const PipelineData& data, const std::string& combo) {
    auto dims = parse_combination(combo);
    ComboData cd;
    const Eigen::Index n = static_cast<Eigen::Index>(data.video_ids.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(24 * dims.size()));
    for (std::size_t d = 0; d < dims.size(); ++d) {
        const auto& table = data.features_by_dim[static_cast<int>(dims[d])];
        X.middleCols(static_cast<Eigen::Index>(24 * d), 24) = table.values;
        for (const char* name : kFeatureNames)
            cd.feature_names.push_back(std::string(dimension_letter(dims[d])) + "_" + name);
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string& split = data.split.at(data.video_ids[static_cast<std::size_t>(i)]);
        if (split == "train") cd.rows_train.push_back(i);
        else if (split == "dev") cd.rows_dev.push_back(i);
        else cd.rows_test.push_back(i);
    }

    auto take = [&X](const std::vector<Eigen::Index>& rows) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
        return out;
    };
    cd.X_train = take(cd.rows_train);
    cd.X_dev = take(cd.rows_dev);
    cd.X_test = take(cd.rows_test);
    return cd;
}

Eigen::VectorXd take_target(const PipelineData& data, const std::vector<Eigen::Index>& rows,
                            const std::string& target) {
    int col = data.indicators.column(target);
    if (col < 0) throw std::runtime_error("unknown target indicator '" + target + "'");
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        y[static_cast<Eigen::Index>(r)] = data.indicators.values(rows[r], col);
    return y;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        out.col(static_cast<Eigen::Index>(c)) = X.col(cols[c]);
    return out;
}

struct CellOutput {
    std::vector<MaeRow> rows;
    SelectionResult auto_selection; // valid when auto. ran
    bool has_auto = false;
    std::map<std::string, LinearModel> final_models;  // by method
    std::map<std::string, Standardizer> final_scalers;
};

struct MethodEval {
    double dev_mae = 0.0;
    double test_mae = 0.0;
    double best_C = 0.0;
    LinearModel model;
    Standardizer scaler;
};

MethodEval evaluate_feature_set(const ComboData& cd, const Eigen::VectorXd& ytr,
                                const Eigen::VectorXd& ydev, const Eigen::VectorXd& yte,
                                const std::vector<int>& cols, const ExperimentConfig& config,
                                const FitOptions& options) {
    Eigen::MatrixXd Xtr = select_columns(cd.X_train, cols);
    Eigen::MatrixXd Xdv = select_columns(cd.X_dev, cols);
    Eigen::MatrixXd Xte = select_columns(cd.X_test, cols);
    GridSearchResult gs = grid_search(Xtr, ytr, Xdv, ydev, config.c_grid, config.epsilon, options);
    FinalizeResult fin = finalize_and_test(Xtr, ytr, Xdv, ydev, Xte, yte, gs.best_C,
                                           config.epsilon, options);
    MethodEval ev;
    ev.dev_mae = gs.best_dev_mae;
    ev.test_mae = fin.test_mae;
    ev.best_C = gs.best_C;
    ev.model = std::move(fin.model);
    ev.scaler = std::move(fin.scaler);
    return ev;
}

CellOutput evaluate_cell(const PipelineData& data, const ComboData& cd, const std::string& target,
                         const std::string& combo,
                         const std::map<std::string, SelectionResult>& cross_task,
                         const ExperimentConfig& config, std::uint64_t cell_seed) {
    CellOutput out;
    Eigen::VectorXd ytr = take_target(data, cd.rows_train, target);
    Eigen::VectorXd ydev = take_target(data, cd.rows_dev, target);
    Eigen::VectorXd yte = take_target(data, cd.rows_test, target);

    FitOptions options;
    options.tol = config.svr_tol;
    options.max_iter = config.svr_max_iter;
    options.seed = cell_seed;

    const int m = static_cast<int>(cd.feature_names.size());
    std::vector<int> all_cols(m);
    std::iota(all_cols.begin(), all_cols.end(), 0);

    // Univariate scores on the training partition feed every weight report.
    auto scores = univariate_scores(cd.X_train, ytr);
    std::map<std::string, double> p_by_name;
    for (int j = 0; j < m; ++j) p_by_name[cd.feature_names[j]] = scores[j].p;

    // Baseline is always computed: rel% needs it.
    MethodEval all_eval = evaluate_feature_set(cd, ytr, ydev, yte, all_cols, config, options);
    all_eval.model.feature_names = cd.feature_names;

    auto make_row = [&](const std::string& method, const MethodEval& ev, int k,
                        const std::vector<std::string>& features, bool fallback) {
        MaeRow row;
        row.target = target;
        row.combination = combo;
        row.method = method;
        row.dev_mae = ev.dev_mae;
        row.test_mae = ev.test_mae;
        row.rel_dev_pct = method == "all" ? 0.0 : rel_change_pct(all_eval.dev_mae, ev.dev_mae);
        row.rel_test_pct = method == "all" ? 0.0 : rel_change_pct(all_eval.test_mae, ev.test_mae);
        row.best_C = ev.best_C;
        row.k = k;
        row.fell_back_to_all = fallback;
        row.features = features;
        row.weights = weight_report(ev.model, p_by_name, cd.feature_names);
        return row;
    };

    for (const auto& method : config.methods) {
        if (method == "all") {
            out.rows.push_back(make_row("all", all_eval, m, {}, false));
            out.final_models["all"] = all_eval.model;
            out.final_scalers["all"] = all_eval.scaler;
        } else if (method == "sel.") {
            // Union of the per-dimension cross-task sets, in column order.
            std::set<std::string> chosen;
            for (Dimension d : parse_combination(combo)) {
                const auto& sel = cross_task.at(to_string(d));
                for (const auto& f : sel.feature_names)
                    chosen.insert(std::string(dimension_letter(d)) + "_" + f);
            }
            std::vector<int> cols;
            std::vector<std::string> names;
            for (int j = 0; j < m; ++j)
                if (chosen.count(cd.feature_names[j])) {
                    cols.push_back(j);
                    names.push_back(cd.feature_names[j]);
                }
            bool fallback = cols.empty();
            if (fallback) {
                cols = all_cols;
                names.clear();
            }
            MethodEval ev = evaluate_feature_set(cd, ytr, ydev, yte, cols, config, options);
            ev.model.feature_names = fallback ? cd.feature_names : names;
            out.rows.push_back(make_row("sel.", ev, static_cast<int>(cols.size()), names, fallback));
            out.final_models["sel."] = ev.model;
            out.final_scalers["sel."] = ev.scaler;
        } else if (method == "auto.") {
            int k_lo = std::min(config.k_min, m);
            int k_hi = std::max(k_lo, std::min(m, m - config.k_max_offset));
            SelectionResult sel = auto_select(cd.X_train, ytr, cd.X_dev, ydev, cd.feature_names,
                                              {k_lo, k_hi}, config.c_grid, config.epsilon,
                                              options, target);
            std::vector<int> cols;
            for (int j = 0; j < m; ++j)
                if (std::find(sel.feature_names.begin(), sel.feature_names.end(),
                              cd.feature_names[j]) != sel.feature_names.end())
                    cols.push_back(j);

            // Dev protocol already picked C for the winning k; only the
            // train+dev refit and test evaluation remain.
            Eigen::MatrixXd Xtr = select_columns(cd.X_train, cols);
            Eigen::MatrixXd Xdv = select_columns(cd.X_dev, cols);
            Eigen::MatrixXd Xte = select_columns(cd.X_test, cols);
            double dev_mae = 0.0;
            for (const auto& [k, mae_k] : sel.dev_mae_curve)
                if (k == sel.k) dev_mae = mae_k;
            FinalizeResult fin = finalize_and_test(Xtr, ytr, Xdv, ydev, Xte, yte, sel.best_C,
                                                   config.epsilon, options);
            MethodEval ev;
            ev.dev_mae = dev_mae;
            ev.test_mae = fin.test_mae;
            ev.best_C = sel.best_C;
            ev.model = std::move(fin.model);
            ev.model.feature_names = sel.feature_names;
            ev.scaler = std::move(fin.scaler);
            out.rows.push_back(make_row("auto.", ev, sel.k, sel.feature_names, false));
            out.final_models["auto."] = ev.model;
            out.final_scalers["auto."] = ev.scaler;
            out.auto_selection = std::move(sel);
            out.auto_selection.target = target;
            out.has_auto = true;
        }
    }
    return out;
}

std::string target_slug(const std::string& target) {
    std::string slug;
    for (char c : target)
        if (std::isalnum(static_cast<unsigned char>(c))) slug += static_cast<char>(std::tolower(c));
    return slug;
}

std::string method_slug(const std::string& method) {
    if (method == "all") return "all";
    if (method == "sel.") return "sel";
    return "auto";
}

ordered_json model_to_json(const LinearModel& model, const Standardizer& scaler,
                           std::uint64_t seed) {
    ordered_json j;
    j["feature_names"] = model.feature_names;
    j["weights"] = std::vector<double>(model.weights.data(),
                                       model.weights.data() + model.weights.size());
    j["bias"] = model.bias;
    j["C"] = model.C;
    j["epsilon"] = model.epsilon;
    j["standardizer"]["means"] =
        std::vector<double>(scaler.means.data(), scaler.means.data() + scaler.means.size());
    j["standardizer"]["stds"] =
        std::vector<double>(scaler.stds.data(), scaler.stds.data() + scaler.stds.size());
    j["standardizer"]["fitted_on"] = scaler.fitted_on;
    j["seed"] = seed;
    j["converged"] = model.converged;
    j["iterations_used"] = model.iterations_used;
    return j;
}

ordered_json selection_to_json(const SelectionResult& sel, const std::string& combination) {
    ordered_json j;
    j["method"] = to_string(sel.method);
    j["target"] = sel.target;
    if (!combination.empty()) j["combination"] = combination;
    j["k"] = sel.k;
    j["features"] = sel.feature_names;
    if (sel.method == SelectionMethod::cross_task) j["threshold"] = sel.threshold;
    if (sel.method == SelectionMethod::automatic) {
        j["best_C"] = sel.best_C;
        ordered_json curve = ordered_json::array();
        for (const auto& [k, mae_k] : sel.dev_mae_curve) curve.push_back({k, mae_k});
        j["dev_mae_curve"] = std::move(curve);
        ordered_json scores;
        for (const auto& [name, fs] : sel.per_feature_scores)
            scores[name] = {{"score", fs.score},
                            {"f_stat", fs.f_stat},
                            {"p", fs.p},
                            {"constant", fs.constant}};
        j["scores"] = std::move(scores);
    }
    return j;
}

} // namespace

// ---- report ------------------------------------------------------------------

std::string format_mae(double v) {
    char buf[40];
    if (std::fabs(v) >= 1.0)
        std::snprintf(buf, sizeof buf, "%.3f", v);
    else
        std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string ExperimentReport::to_json() const {
    ordered_json j;
    j["version"] = version;
    j["config"] = config_echo.empty() ? ordered_json::object() : ordered_json::parse(config_echo);

    ordered_json summary_json;
    summary_json["n_videos"] = summary.n_videos;
    summary_json["n_comments"] = summary.n_comments;
    ordered_json stats;
    for (const auto& [name, ms] : summary.indicator_stats)
        stats[name] = {{"mean", ms.first}, {"std", ms.second}};
    summary_json["indicators"] = std::move(stats);
    summary_json["labeled_items"] = summary.labeled_items;
    summary_json["excluded_items"] = summary.excluded_items;
    summary_json["joint_probability"] = summary.joint_prob;
    ordered_json fused;
    for (const auto& [label, count] : summary.fused_labels) fused[label] = count;
    summary_json["fused_labels"] = std::move(fused);
    j["dataset_summary"] = std::move(summary_json);

    ordered_json corr;
    for (const auto& [dim, matrix] : correlations)
        corr[dim] = ordered_json::parse(matrix_to_json(matrix));
    j["correlations"] = std::move(corr);

    ordered_json ct;
    for (const auto& [dim, sel] : cross_task) ct[dim] = selection_to_json(sel, "");
    j["cross_task_selection"] = std::move(ct);

    ordered_json sel_summary;
    ordered_json per_target;
    for (const auto& [t, k] : avg_auto_k_per_target) per_target[t] = k;
    sel_summary["avg_auto_k_per_target"] = std::move(per_target);
    ordered_json per_dim;
    for (const auto& [d, k] : avg_auto_features_per_dimension) per_dim[d] = k;
    sel_summary["avg_auto_features_per_dimension"] = std::move(per_dim);
    j["selection_summary"] = std::move(sel_summary);

    ordered_json rows_json = ordered_json::array();
    for (const auto& row : rows) {
        ordered_json r;
        r["target"] = row.target;
        r["combination"] = row.combination;
        r["method"] = row.method;
        r["k"] = row.k;
        r["best_C"] = row.best_C;
        r["dev_mae"] = row.dev_mae;
        r["test_mae"] = row.test_mae;
        r["rel_dev_pct"] = row.rel_dev_pct;
        r["rel_test_pct"] = row.rel_test_pct;
        r["fell_back_to_all"] = row.fell_back_to_all;
        r["features"] = row.features;
        ordered_json weights = ordered_json::array();
        for (const auto& w : row.weights)
            weights.push_back({{"feature", w.feature},
                               {"weight", w.weight},
                               {"scaled_p", w.scaled_p},
                               {"excluded", w.excluded}});
        r["weights"] = std::move(weights);
        rows_json.push_back(std::move(r));
    }
    j["rows"] = std::move(rows_json);
    return j.dump(2);
}

// ---- run -------------------------------------------------------------------

ExperimentReport run(const ExperimentConfig& config) {
    try {
        config.validate();
    } catch (const std::exception& e) {
        throw StageError("config", e.what());
    }

    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    fs::path staging = config.out_dir / ".staging";
    fs::remove_all(staging);
    fs::create_directories(staging);
    fs::create_directories(staging / "selection");
    fs::create_directories(staging / "models");

    ExperimentReport report;
    try {
        PipelineData data = prepare(config);

        try {
            write_gold_csv(staging / "gold_signals.csv", data.gold);
            write_ewe_weights_json(staging / "ewe_weights.json", data.gold);
            write_features_csv(staging / "features.csv", data);
            write_indicators_csv(staging / "indicators.csv", data);
        } catch (const std::exception& e) {
            throw StageError("artifacts", e.what());
        }

        try {
            report.correlations = correlate_stage(data, config);
            for (const auto& [dim, matrix] : report.correlations) {
                std::string base = dim == "trustworthiness" ? "trust" : dim;
                write_matrix_csv(matrix, staging / ("correlations_" + base + ".csv"),
                                 staging / ("correlations_" + base + "_p.csv"));
                write_matrix_tsv(matrix, staging / ("correlations_" + base + ".tsv"));
                std::ofstream(staging / ("correlations_" + base + ".json"))
                    << matrix_to_json(matrix) << "\n";
            }
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError("correlate", e.what());
        }

        std::map<std::string, SelectionResult> cross_task;
        try {
            for (const auto& [dim, matrix] : report.correlations) {
                SelectionResult sel = cross_task_select(matrix, config.cross_task_threshold);
                std::ofstream(staging / "selection" / ("cross_task_" + dim + ".json"))
                    << selection_to_json(sel, "").dump(2) << "\n";
                cross_task[dim] = std::move(sel);
            }
            report.cross_task = cross_task;
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError("select", e.what());
        }

        try {
            struct Cell {
                std::string target;
                std::string combo;
                std::uint64_t seed;
            };
            std::vector<Cell> cells;
            Rng root(config.seed);
            for (std::size_t t = 0; t < config.targets.size(); ++t)
                for (std::size_t c = 0; c < config.combinations.size(); ++c)
                    cells.push_back({config.targets[t], config.combinations[c],
                                     root.split(t + 1, c + 1).next_u64()});

            std::map<std::string, ComboData> combos;
            for (const auto& combo : config.combinations)
                if (!combos.count(combo)) combos[combo] = build_combo(data, combo);

            std::vector<CellOutput> outputs(cells.size());
            auto work = [&](std::size_t i) {
                outputs[i] = evaluate_cell(data, combos.at(cells[i].combo), cells[i].target,
                                           cells[i].combo, cross_task, config, cells[i].seed);
            };
            int jobs = std::max(1, config.jobs);
            if (jobs == 1) {
                for (std::size_t i = 0; i < cells.size(); ++i) work(i);
            } else {
                std::atomic<std::size_t> next{0};
                std::exception_ptr error;
                std::mutex error_mutex;
                auto worker = [&]() {
                    for (;;) {
                        std::size_t i = next.fetch_add(1);
                        if (i >= cells.size()) break;
                        try {
                            work(i);
                        } catch (...) {
                            std::scoped_lock lock(error_mutex);
                            if (!error) error = std::current_exception();
                        }
                    }
                };
                std::vector<std::thread> pool;
                for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
                for (auto& th : pool) th.join();
                if (error) std::rethrow_exception(error);
            }

            // Deterministic reduction in cell order.
            std::map<std::string, std::vector<int>> auto_k_by_target;
            std::map<std::string, std::vector<int>> auto_count_by_dim;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                CellOutput& out = outputs[i];
                for (MaeRow& row : out.rows) {
                    if (out.has_auto && row.method == "auto.") {
                        auto_k_by_target[row.target].push_back(row.k);
                        std::map<std::string, int> per_dim;
                        for (const auto& f : row.features) ++per_dim[f.substr(0, 1)];
                        for (Dimension d : parse_combination(cells[i].combo)) {
                            std::string letter = dimension_letter(d);
                            auto_count_by_dim[to_string(d)].push_back(
                                per_dim.count(letter) ? per_dim[letter] : 0);
                        }
                    }
                    report.rows.push_back(std::move(row));
                }
                std::string slug = target_slug(cells[i].target);
                if (out.has_auto) {
                    std::ofstream(staging / "selection" /
                                  ("auto_" + slug + "_" + cells[i].combo + ".json"))
                        << selection_to_json(out.auto_selection, cells[i].combo).dump(2) << "\n";
                }
                for (const auto& [method, model] : out.final_models) {
                    std::ofstream(staging / "models" /
                                  (slug + "_" + cells[i].combo + "_" + method_slug(method) + ".json"))
                        << model_to_json(model, out.final_scalers.at(method), cells[i].seed).dump(2)
                        << "\n";
                }
            }
            for (const auto& [target, ks] : auto_k_by_target)
                report.avg_auto_k_per_target[target] =
                    std::accumulate(ks.begin(), ks.end(), 0.0) / static_cast<double>(ks.size());
            for (const auto& [dim, counts] : auto_count_by_dim)
                report.avg_auto_features_per_dimension[dim] =
                    std::accumulate(counts.begin(), counts.end(), 0.0) /
                    static_cast<double>(counts.size());
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError("train", e.what());
        }

        try {
            report.summary = data.summary;
            report.config_echo = config.echo_json;

            csv::Table mae_rows;
            mae_rows.header = {"target", "combination", "method", "k", "best_C",
                               "dev_mae", "test_mae", "rel_dev_pct", "rel_test_pct"};
            for (const auto& row : report.rows) {
                char relbufntest[32], relbufdev[32], cbuf[32];
                std::snprintf(relbufdev, sizeof relbufdev, "%+.1f", row.rel_dev_pct);
                std::snprintf(relbufntest, sizeof relbufntest, "%+.1f", row.rel_test_pct);
                std::snprintf(cbuf, sizeof cbuf, "%g", row.best_C);
                mae_rows.rows.push_back({row.target, row.combination, row.method,
                                         std::to_string(row.k), cbuf, format_mae(row.dev_mae),
                                         format_mae(row.test_mae),
                                         row.method == "all" ? "" : relbufdev,
                                         row.method == "all" ? "" : relbufntest});
            }
            csv::write_file(staging / "mae_rows.csv", mae_rows);
            std::ofstream(staging / "report.json") << report.to_json() << "\n";
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError("report", e.what());
        }

        // Promote staged artifacts.
        for (const auto& entry : fs::directory_iterator(staging)) {
            fs::path dest = config.out_dir / entry.path().filename();
            fs::remove_all(dest);
            fs::rename(entry.path(), dest);
        }
        fs::remove_all(staging);
    } catch (...) {
        fs::remove_all(staging);
        throw;
    }
    return report;
}

} // namespace engage

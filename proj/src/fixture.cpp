#include "engage/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "engage/csv.hpp"
#include "engage/engagement.hpp"
#include "engage/rng.hpp"
#include "engage/signal.hpp"

namespace engage {

using ordered_json = nlohmann::ordered_json;

double PlantedTarget::noise_floor_mae() const {
    return noise_sigma * std::sqrt(2.0 / 3.14159265358979323846);
}

std::vector<PlantedTarget> FixtureSpec::default_targets() {
    return {
        {"Vp/d", 900.0, 45.0,
         {{"arousal", "peaks", 40.0},
          {"arousal", "absE", 30.0},
          {"arousal", "q05", -25.0},
          {"valence", "absE", 20.0},
          {"trustworthiness", "absE", 18.0}}},
        {"Lp/d", 30.0, 1.5,
         {{"arousal", "peaks", 2.5}, {"arousal", "absE", 2.0}, {"arousal", "q05", -2.0}}},
        {"Cp/d", 6.0, 0.5,
         {{"valence", "peaks", 0.5},
          {"valence", "LSBMe", 0.35},
          {"valence", "absE", 0.3},
          {"arousal", "peaks", 0.2}}},
        {"LCp/d", 15.0, 1.2,
         {{"trustworthiness", "absE", 1.2},
          {"trustworthiness", "peaks", 0.8},
          {"trustworthiness", "q95", 0.6},
          {"arousal", "peaks", 0.4}}},
    };
}

namespace {

std::string video_name(int v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "v%03d", v);
    return buf;
}

int feature_index(const std::string& name) {
    for (std::size_t i = 0; i < kFeatureNames.size(); ++i)
        if (name == kFeatureNames[i]) return static_cast<int>(i);
    throw std::invalid_argument("unknown feature '" + name + "'");
}

// Smooth band-limited base signal with a per-video asymmetry knob, scaled
// into the joystick axis range.
Eigen::VectorXd synth_base(Rng rng, int length) {
    int waves = static_cast<int>(rng.uniform_int(2, 6));
    double roughness = rng.uniform(4.0, 40.0);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(length);
    for (int k = 0; k < waves; ++k) {
        double freq = rng.uniform(1.0, roughness);
        double phase = rng.uniform(0.0, 6.283185307179586);
        double amp = rng.uniform(0.3, 1.0);
        for (int t = 0; t < length; ++t)
            s[t] += amp * std::sin(6.283185307179586 * freq * t / length + phase);
    }
    double gamma = rng.uniform(-0.4, 0.4);
    s = s.array() + gamma * s.array().square();

    double mean = s.mean();
    double sd = std::sqrt((s.array() - mean).square().mean());
    if (sd <= 0.0) sd = 1.0;
    double center = rng.uniform(-300.0, 300.0);
    double amp = rng.uniform(150.0, 600.0);
    return ((s.array() - mean) / sd * amp + center).cwiseMax(-1000.0).cwiseMin(1000.0);
}

Eigen::VectorXd annotator_trace(Rng rng, const Eigen::VectorXd& base, int length, double noise,
                                bool adversarial) {
    double bias = rng.uniform(-60.0, 60.0);
    double scale = rng.uniform(0.85, 1.15);
    Eigen::VectorXd t(length);
    double base_mean = base.head(length).mean();
    for (int i = 0; i < length; ++i) {
        double centered = base[i] - base_mean;
        double v = adversarial ? base_mean - scale * centered : base_mean + scale * centered;
        v += bias + rng.normal(0.0, noise);
        t[i] = std::round(std::clamp(v, -1000.0, 1000.0));
    }
    return t;
}

Sentiment random_label(Rng& rng, bool allow_na) {
    double u = rng.uniform();
    if (allow_na && u < 0.05) return Sentiment::not_applicable;
    if (u < 0.40) return Sentiment::positive;
    if (u < 0.72) return Sentiment::neutral;
    return Sentiment::negative;
}

} // namespace

FixturePaths generate_fixture(std::uint64_t seed, const FixtureSpec& spec,
                              const std::filesystem::path& out_dir) {
    if (spec.n_videos < 30) throw std::invalid_argument("fixture: n_videos must be >= 30");
    if (spec.annotators < 2) throw std::invalid_argument("fixture: need at least 2 annotators");

    std::vector<PlantedTarget> targets =
        spec.targets.empty() ? FixtureSpec::default_targets() : spec.targets;
    for (const auto& t : targets) {
        bool has_signal = std::any_of(t.weights.begin(), t.weights.end(),
                                      [](const PlantedFeature& f) { return f.weight != 0.0; });
        if (t.noise_sigma <= 0.0 && !has_signal)
            throw std::invalid_argument("fixture: degenerate planted spec for " + t.target);
    }

    std::filesystem::create_directories(out_dir);
    Rng root(seed);

    const int n = spec.n_videos;
    csv::Table traces_csv;
    traces_csv.header = {"video_id", "dimension", "annotator_id", "bin_index", "value"};

    // features[d] is n x 24 for dimension d, computed through the same
    // fuse/standardize/extract path the pipeline uses.
    std::array<Eigen::MatrixXd, 3> features;
    for (auto& f : features) f.resize(n, 24);

    for (int v = 0; v < n; ++v) {
        Rng video_rng = root.split(1, static_cast<std::uint64_t>(v));
        int length = static_cast<int>(video_rng.uniform_int(spec.min_length, spec.max_length));
        for (std::size_t d = 0; d < kAllDimensions.size(); ++d) {
            Dimension dim = kAllDimensions[d];
            Eigen::VectorXd base = synth_base(video_rng.split(2, d), length);

            std::vector<AnnotationTrace> traces;
            for (int a = 0; a < spec.annotators; ++a) {
                bool adversarial = spec.adversarial_annotator && a == spec.annotators - 1;
                Rng arng = video_rng.split(3 + static_cast<std::uint64_t>(a), d);
                int alen = length - static_cast<int>(arng.uniform_int(0, 3));
                AnnotationTrace t;
                t.video_id = video_name(v);
                t.dimension = dim;
                t.annotator_id = "a" + std::to_string(a + 1);
                t.sample_period = spec.sample_period;
                t.samples = annotator_trace(arng, base, alen, spec.annotator_noise, adversarial);
                traces.push_back(std::move(t));
            }

            for (const auto& t : traces)
                for (Eigen::Index i = 0; i < t.samples.size(); ++i)
                    traces_csv.rows.push_back({t.video_id, to_string(t.dimension), t.annotator_id,
                                               std::to_string(i),
                                               csv::format_double(t.samples[i])});

            GoldSignal gold = make_gold_signal(std::move(traces));
            features[d].row(v) = extract_features(gold, spec.feature_params).as_vector();
        }
    }

    // Standardize planted feature columns and build the per-day targets.
    auto planted_series = [&](const PlantedTarget& t, int stream) {
        Rng trng = root.split(4, static_cast<std::uint64_t>(stream));
        Eigen::VectorXd y = Eigen::VectorXd::Constant(n, t.base);
        for (const auto& pf : t.weights) {
            int d = static_cast<int>(dimension_from_string(pf.dimension));
            Eigen::VectorXd col = features[d].col(feature_index(pf.feature));
            double mean = col.mean();
            double sd = std::sqrt((col.array() - mean).square().mean());
            if (sd <= 0.0)
                throw std::runtime_error("fixture: planted feature " + pf.feature +
                                         " is constant across videos");
            y += pf.weight * ((col.array() - mean) / sd).matrix();
        }
        for (int v = 0; v < n; ++v) y[v] += trng.normal(0.0, t.noise_sigma);
        return y;
    };

    Eigen::VectorXd vpd(n), lpd(n), cpd(n), lcpd(n);
    int clamped = 0;
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        Eigen::VectorXd y = planted_series(targets[ti], static_cast<int>(ti));
        for (int v = 0; v < n; ++v)
            if (y[v] < 0.01) {
                y[v] = 0.01;
                ++clamped;
            }
        if (targets[ti].target == "Vp/d") vpd = y;
        else if (targets[ti].target == "Lp/d") lpd = y;
        else if (targets[ti].target == "Cp/d") cpd = y;
        else if (targets[ti].target == "LCp/d") lcpd = y;
        else throw std::invalid_argument("fixture: unsupported planted target " + targets[ti].target);
    }

    csv::Table metadata;
    metadata.header = {"video_id", "upload_date", "crawl_date",
                       "views",    "likes",       "dislikes",
                       "comments", "comment_likes"};
    csv::Table comments;
    comments.header = {"video_id", "comment_id", "likes", "sentiment"};

    const Date crawl_base = Date::parse("2021-03-01");
    std::vector<std::string> all_comment_ids;
    std::vector<Sentiment> all_comment_sentiments;

    for (int v = 0; v < n; ++v) {
        Rng mrng = root.split(5, static_cast<std::uint64_t>(v));
        std::int64_t days = mrng.uniform_int(30, 120);
        Date crawl = Date::from_serial(crawl_base.serial_day() + mrng.uniform_int(0, 60));
        Date upload = Date::from_serial(crawl.serial_day() - days);

        double dpd = mrng.uniform(0.03, 0.10) * lpd[v];
        auto count = [days](double per_day) {
            return std::llround(per_day * static_cast<double>(days));
        };
        std::int64_t n_comments = count(cpd[v]);
        std::int64_t total_comment_likes = count(lcpd[v]);

        // Per-comment rows; likes distributed uniformly so totals reconcile.
        std::vector<std::int64_t> likes(static_cast<std::size_t>(n_comments), 0);
        if (n_comments > 0)
            for (std::int64_t l = 0; l < total_comment_likes; ++l)
                ++likes[static_cast<std::size_t>(mrng.uniform_int(0, n_comments - 1))];
        else
            total_comment_likes = 0;

        double p_pos = mrng.uniform(0.20, 0.45);
        double p_neg = mrng.uniform(0.15, 0.40);
        for (std::int64_t c = 0; c < n_comments; ++c) {
            char cid[32];
            std::snprintf(cid, sizeof cid, "%s_c%04lld", video_name(v).c_str(),
                          static_cast<long long>(c));
            double u = mrng.uniform();
            std::string sentiment;
            Sentiment s;
            if (u < 0.02) {
                sentiment = "unlabeled";
                s = Sentiment::not_applicable;
            } else if (u < 0.02 + p_pos) {
                sentiment = "positive";
                s = Sentiment::positive;
            } else if (u < 0.02 + p_pos + p_neg) {
                sentiment = "negative";
                s = Sentiment::negative;
            } else {
                sentiment = "neutral";
                s = Sentiment::neutral;
            }
            comments.rows.push_back({video_name(v), cid,
                                     std::to_string(likes[static_cast<std::size_t>(c)]),
                                     sentiment});
            if (sentiment != "unlabeled") {
                all_comment_ids.push_back(cid);
                all_comment_sentiments.push_back(s);
            }
        }

        metadata.rows.push_back({video_name(v), upload.to_string(), crawl.to_string(),
                                 std::to_string(count(vpd[v])), std::to_string(count(lpd[v])),
                                 std::to_string(count(dpd)), std::to_string(n_comments),
                                 std::to_string(total_comment_likes)});
    }

    // Labeled sample for the majority-fusion path: three annotators with a
    // controlled per-annotator accuracy against the comment's true label.
    csv::Table annotated;
    annotated.header = {"comment_id", "label1", "label2", "label3"};
    Rng lrng = root.split(6);
    int n_items = std::min<int>(spec.labeled_comment_items,
                                static_cast<int>(all_comment_ids.size()));
    for (int i = 0; i < n_items; ++i) {
        Sentiment truth = all_comment_sentiments[static_cast<std::size_t>(i)];
        std::array<std::string, 3> labels;
        for (auto& lab : labels) {
            if (lrng.uniform() < spec.labeler_accuracy) {
                lab = to_string(truth);
            } else {
                Sentiment other = truth;
                while (other == truth) other = random_label(lrng, true);
                lab = to_string(other);
            }
        }
        annotated.rows.push_back(
            {all_comment_ids[static_cast<std::size_t>(i)], labels[0], labels[1], labels[2]});
    }

    // 60-20-20 split.
    csv::Table partition;
    partition.header = {"video_id", "split"};
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng prng = root.split(7);
    prng.shuffle(order.data(), order.size());
    int n_train = n * 60 / 100;
    int n_dev = n * 20 / 100;
    std::vector<std::string> split_of(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const char* split = i < n_train ? "train" : (i < n_train + n_dev ? "dev" : "test");
        split_of[static_cast<std::size_t>(order[i])] = split;
    }
    for (int v = 0; v < n; ++v)
        partition.rows.push_back({video_name(v), split_of[static_cast<std::size_t>(v)]});

    FixturePaths paths;
    paths.traces = out_dir / "traces.csv";
    paths.metadata = out_dir / "metadata.csv";
    paths.comments = out_dir / "comments.csv";
    paths.annotated_comments = out_dir / "annotated_comments.csv";
    paths.partition = out_dir / "partition.csv";
    paths.planted = out_dir / "planted.json";
    paths.config = out_dir / "config.json";

    csv::write_file(paths.traces, traces_csv);
    csv::write_file(paths.metadata, metadata);
    csv::write_file(paths.comments, comments);
    csv::write_file(paths.annotated_comments, annotated);
    csv::write_file(paths.partition, partition);

    ordered_json planted;
    planted["seed"] = seed;
    planted["n_videos"] = n;
    planted["adversarial_annotator"] = spec.adversarial_annotator;
    planted["adversarial_annotator_id"] =
        spec.adversarial_annotator ? "a" + std::to_string(spec.annotators) : "";
    planted["clamped_targets"] = clamped;
    ordered_json jt = ordered_json::array();
    for (const auto& t : targets) {
        ordered_json w = ordered_json::array();
        for (const auto& pf : t.weights) {
            std::string col = std::string(dimension_letter(dimension_from_string(pf.dimension))) +
                              "_" + pf.feature;
            w.push_back({{"dimension", pf.dimension},
                         {"feature", pf.feature},
                         {"column", col},
                         {"weight", pf.weight}});
        }
        jt.push_back({{"target", t.target},
                      {"base", t.base},
                      {"noise_sigma", t.noise_sigma},
                      {"noise_floor_mae", t.noise_floor_mae()},
                      {"weights", std::move(w)}});
    }
    planted["targets"] = std::move(jt);
    std::ofstream(paths.planted) << planted.dump(2) << "\n";

    ordered_json config;
    config["traces"] = "traces.csv";
    config["metadata"] = "metadata.csv";
    config["comments"] = "comments.csv";
    config["annotated_comments"] = "annotated_comments.csv";
    config["partition"] = "partition.csv";
    config["sample_period"] = spec.sample_period;
    config["peak_support"] = spec.feature_params.peak_support;
    config["saen_m"] = spec.feature_params.saen_m;
    config["saen_r_factor"] = spec.feature_params.saen_r_factor;
    config["seed"] = seed;
    std::ofstream(paths.config) << config.dump(2) << "\n";

    return paths;
}

} // namespace engage

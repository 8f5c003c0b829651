#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "engage/features.hpp"

namespace engage {

// One planted coefficient: the target depends linearly on the named feature
// (standardized across videos) of the named dimension's gold signal.
struct PlantedFeature {
    std::string dimension; // "arousal" | "valence" | "trustworthiness"
    std::string feature;   // canonical feature name, e.g. "peaks"
    double weight = 0.0;
};

struct PlantedTarget {
    std::string target; // indicator name, e.g. "Lp/d"
    double base = 0.0;
    double noise_sigma = 0.0;
    std::vector<PlantedFeature> weights;

    // E|N(0, sigma)| — the MAE of the best possible predictor.
    double noise_floor_mae() const;
};

struct FixtureSpec {
    int n_videos = 300;
    int annotators = 5;
    bool adversarial_annotator = true; // last annotator mirrors the signal
    double annotator_noise = 60.0;     // white noise amplitude, axis units
    int min_length = 150;
    int max_length = 400;
    double sample_period = 0.25;
    FeatureParams feature_params;      // must match the analysis config
    std::vector<PlantedTarget> targets; // defaults used when empty
    int labeled_comment_items = 200;
    double labeler_accuracy = 0.656;   // ~0.47 pairwise agreement

    static std::vector<PlantedTarget> default_targets();
};

struct FixturePaths {
    std::filesystem::path traces;
    std::filesystem::path metadata;
    std::filesystem::path comments;
    std::filesystem::path annotated_comments;
    std::filesystem::path partition;
    std::filesystem::path planted; // planted.json, for test assertions
    std::filesystem::path config;  // ready-to-run pipeline config
};

// Desk-scale synthetic dataset: per video, `annotators` traces for each of
// the three dimensions (plus one optional adversarial annotator), metadata
// whose per-day targets are planted linear functions of known gold-signal
// features, comment files, a labeled-comment sample, and a 60-20-20
// partition. Everything derives from `seed`.
FixturePaths generate_fixture(std::uint64_t seed, const FixtureSpec& spec,
                              const std::filesystem::path& out_dir);

} // namespace engage

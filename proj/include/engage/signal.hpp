#pragma once

#include <Eigen/Core>

#include <array>
#include <map>
#include <string>
#include <vector>

namespace engage {

enum class Dimension { arousal, valence, trustworthiness };

const char* to_string(Dimension d);
const char* dimension_letter(Dimension d); // "A", "V", "T"
Dimension dimension_from_string(const std::string& s);

inline constexpr std::array<Dimension, 3> kAllDimensions = {
    Dimension::arousal, Dimension::valence, Dimension::trustworthiness};

// One annotator's sampled continuous trace for a single video and dimension.
// Raw joystick values live on a [-1000, 1000] axis; traces that have already
// been standardized elsewhere set `standardized` and skip the range check.
struct AnnotationTrace {
    std::string video_id;
    Dimension dimension = Dimension::arousal;
    std::string annotator_id;
    Eigen::VectorXd samples;
    double sample_period = 0.25;
    bool standardized = false;

    void validate() const; // throws std::invalid_argument on violation
};

// EWE-fused, z-standardized per-video signal for one dimension.
struct GoldSignal {
    std::string video_id;
    Dimension dimension = Dimension::arousal;
    Eigen::VectorXd samples;
    std::map<std::string, double> annotator_weights;
    bool constant_flag = false; // fused signal was constant; samples all zero
};

// Truncates all traces to the minimum common length (annotation sessions may
// differ by a few bins). Order preserved.
std::vector<AnnotationTrace> align_traces(std::vector<AnnotationTrace> traces);

// Evaluator Weighted Estimator over aligned traces. Each annotator's weight
// is the Pearson correlation of their trace with the mean of the remaining
// traces, clipped below at zero; undefined correlations (constant trace or
// constant leave-one-out mean) also clip to zero. The fused sample is the
// weight-normalized mean. Output is NOT yet z-standardized.
GoldSignal ewe_fuse(const std::vector<AnnotationTrace>& traces);

// (x - mean) / population_std elementwise; a constant input maps to all
// zeros and raises *constant_flag instead of erroring.
Eigen::VectorXd z_standardize(const Eigen::VectorXd& x, bool* constant_flag = nullptr);

// align + ewe_fuse + z_standardize.
GoldSignal make_gold_signal(std::vector<AnnotationTrace> traces);

} // namespace engage

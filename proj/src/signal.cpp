#include "engage/signal.hpp"

#include <cmath>
#include <stdexcept>

namespace engage {

const char* to_string(Dimension d) {
    switch (d) {
        case Dimension::arousal: return "arousal";
        case Dimension::valence: return "valence";
        case Dimension::trustworthiness: return "trustworthiness";
    }
    return "?";
}

const char* dimension_letter(Dimension d) {
    switch (d) {
        case Dimension::arousal: return "A";
        case Dimension::valence: return "V";
        case Dimension::trustworthiness: return "T";
    }
    return "?";
}

Dimension dimension_from_string(const std::string& s) {
    if (s == "arousal") return Dimension::arousal;
    if (s == "valence") return Dimension::valence;
    if (s == "trustworthiness" || s == "trust") return Dimension::trustworthiness;
    throw std::invalid_argument("unknown dimension '" + s + "'");
}

void AnnotationTrace::validate() const {
    if (samples.size() == 0) throw std::invalid_argument("trace has no samples");
    if (!(sample_period > 0.0)) throw std::invalid_argument("sample_period must be > 0");
    if (!standardized) {
        for (Eigen::Index i = 0; i < samples.size(); ++i) {
            double v = samples[i];
            if (!(v >= -1000.0 && v <= 1000.0))
                throw std::invalid_argument("raw trace sample outside [-1000, 1000]");
        }
    }
}

std::vector<AnnotationTrace> align_traces(std::vector<AnnotationTrace> traces) {
    if (traces.empty()) throw std::invalid_argument("no traces");
    Eigen::Index min_len = traces.front().samples.size();
    for (const auto& t : traces) {
        if (t.samples.size() == 0) throw std::invalid_argument("no traces");
        if (t.video_id != traces.front().video_id || t.dimension != traces.front().dimension)
            throw std::invalid_argument("heterogeneous traces");
        min_len = std::min(min_len, t.samples.size());
    }
    for (auto& t : traces)
        if (t.samples.size() > min_len) t.samples.conservativeResize(min_len);
    return traces;
}

namespace {

// Pearson correlation with an "undefined" escape for constant inputs.
bool pearson_or_undefined(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double* out) {
    const double n = static_cast<double>(a.size());
    Eigen::VectorXd da = a.array() - a.mean();
    Eigen::VectorXd db = b.array() - b.mean();
    double va = da.squaredNorm() / n;
    double vb = db.squaredNorm() / n;
    if (va <= 0.0 || vb <= 0.0) return false;
    *out = da.dot(db) / (n * std::sqrt(va) * std::sqrt(vb));
    return true;
}

} // namespace

GoldSignal ewe_fuse(const std::vector<AnnotationTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("no traces");
    const Eigen::Index len = traces.front().samples.size();
    for (const auto& t : traces)
        if (t.samples.size() != len) throw std::invalid_argument("ewe_fuse: traces not aligned");

    GoldSignal gold;
    gold.video_id = traces.front().video_id;
    gold.dimension = traces.front().dimension;

    const std::size_t a_count = traces.size();
    if (a_count == 1) {
        gold.samples = traces.front().samples;
        gold.annotator_weights[traces.front().annotator_id] = 1.0;
        return gold;
    }

    std::vector<double> weights(a_count, 0.0);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(len);
    for (const auto& t : traces) total += t.samples;

    for (std::size_t a = 0; a < a_count; ++a) {
        Eigen::VectorXd rest_mean = (total - traces[a].samples) / static_cast<double>(a_count - 1);
        double r = 0.0;
        if (pearson_or_undefined(traces[a].samples, rest_mean, &r)) {
            weights[a] = std::max(0.0, r);
        } else {
            // A constant trace carries no reliability signal: weight 0. When
            // instead the leave-one-out mean is constant (the others cancel),
            // judge the annotator against the all-rater mean, which still
            // varies whenever the trace does.
            Eigen::VectorXd all_mean = total / static_cast<double>(a_count);
            if (pearson_or_undefined(traces[a].samples, all_mean, &r))
                weights[a] = std::max(0.0, r);
        }
    }

    double weight_sum = 0.0;
    for (double w : weights) weight_sum += w;
    if (weight_sum <= 0.0) throw std::runtime_error("no reliable annotators");

    Eigen::VectorXd fused = Eigen::VectorXd::Zero(len);
    for (std::size_t a = 0; a < a_count; ++a)
        if (weights[a] > 0.0) fused += weights[a] * traces[a].samples;
    fused /= weight_sum;

    gold.samples = std::move(fused);
    for (std::size_t a = 0; a < a_count; ++a)
        gold.annotator_weights[traces[a].annotator_id] = weights[a];
    return gold;
}

Eigen::VectorXd z_standardize(const Eigen::VectorXd& x, bool* constant_flag) {
    if (x.size() == 0) throw std::invalid_argument("z_standardize: empty input");
    if (constant_flag) *constant_flag = false;
    double mean = x.mean();
    double var = (x.array() - mean).square().mean();
    if (var <= 0.0) {
        if (constant_flag) *constant_flag = true;
        return Eigen::VectorXd::Zero(x.size());
    }
    return (x.array() - mean) / std::sqrt(var);
}

GoldSignal make_gold_signal(std::vector<AnnotationTrace> traces) {
    auto aligned = align_traces(std::move(traces));
    GoldSignal gold = ewe_fuse(aligned);
    gold.samples = z_standardize(gold.samples, &gold.constant_flag);
    return gold;
}

} // namespace engage

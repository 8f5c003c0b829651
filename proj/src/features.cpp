#include "engage/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace engage {

void FlagSet::add(const std::string& name) {
    auto it = std::lower_bound(names_.begin(), names_.end(), name);
    if (it == names_.end() || *it != name) names_.insert(it, name);
}

bool FlagSet::contains(const std::string& name) const {
    return std::binary_search(names_.begin(), names_.end(), name);
}

std::string FlagSet::joined() const {
    std::string out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (i) out += ';';
        out += names_[i];
    }
    return out;
}

Eigen::Matrix<double, 24, 1> FeatureVector::as_vector() const {
    Eigen::Matrix<double, 24, 1> v;
    v << std_dev, q05, q25, q50, q75, q95, skew, kurt, abs_energy, sample_entropy,
        asoc, mach, mch, msdc, lsame, lsbme, pre_da, flmi, llmi, flma, llma,
        static_cast<double>(crm), static_cast<double>(peaks), static_cast<double>(cbme);
    return v;
}

namespace {

double quantile_linear(const std::vector<double>& sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    double pos = q * static_cast<double>(n - 1);
    auto idx = static_cast<std::size_t>(pos);
    if (idx >= n - 1) return sorted[n - 1];
    double frac = pos - static_cast<double>(idx);
    return sorted[idx] + frac * (sorted[idx + 1] - sorted[idx]);
}

} // namespace

DistributionStats distribution_stats(const Eigen::VectorXd& x, FlagSet* flags) {
    const Eigen::Index n = x.size();
    if (n == 0) throw std::invalid_argument("distribution_stats: empty input");
    DistributionStats out{};

    const double nn = static_cast<double>(n);
    const double mean = x.mean();
    Eigen::ArrayXd d = x.array() - mean;
    const double m2 = d.square().mean();
    out.std_dev = std::sqrt(m2);

    std::vector<double> sorted(x.data(), x.data() + n);
    std::sort(sorted.begin(), sorted.end());
    out.q05 = quantile_linear(sorted, 0.05);
    out.q25 = quantile_linear(sorted, 0.25);
    out.q50 = quantile_linear(sorted, 0.50);
    out.q75 = quantile_linear(sorted, 0.75);
    out.q95 = quantile_linear(sorted, 0.95);

    // Adjusted Fisher-Pearson skewness and excess kurtosis, both on the
    // sample (ddof=1) variance.
    const double sum2 = d.square().sum();
    if (n >= 3 && sum2 > 0.0) {
        double s = std::sqrt(sum2 / (nn - 1.0));
        double sum3 = d.cube().sum();
        out.skew = nn / ((nn - 1.0) * (nn - 2.0)) * sum3 / (s * s * s);
    } else {
        out.skew = 0.0;
        if (flags) flags->add("skew_degenerate");
    }
    if (n >= 4 && sum2 > 0.0) {
        double s2 = sum2 / (nn - 1.0);
        double sum4 = d.square().square().sum();
        out.kurt = nn * (nn + 1.0) * sum4 / ((nn - 1.0) * (nn - 2.0) * (nn - 3.0) * s2 * s2) -
                   3.0 * (nn - 1.0) * (nn - 1.0) / ((nn - 2.0) * (nn - 3.0));
    } else {
        out.kurt = 0.0;
        if (flags) flags->add("kurt_degenerate");
    }
    return out;
}

EnergyEntropy energy_entropy(const Eigen::VectorXd& x, int m, double r_factor, FlagSet* flags) {
    const Eigen::Index n = x.size();
    if (n == 0) throw std::invalid_argument("energy_entropy: empty input");
    if (m < 1) throw std::invalid_argument("energy_entropy: m must be >= 1");

    EnergyEntropy out{};
    out.abs_energy = x.squaredNorm();

    if (n < m + 2) {
        out.sample_entropy = 0.0;
        if (flags) flags->add("saen_degenerate");
        return out;
    }

    const double mean = x.mean();
    const double r = r_factor * std::sqrt((x.array() - mean).square().mean());

    // Template pairs over the first n-m start points, so every m-template
    // has an (m+1)-continuation. Chebyshev distance, self-matches excluded.
    const Eigen::Index t_count = n - m;
    long long b_matches = 0; // length-m matches
    long long a_matches = 0; // length-(m+1) matches
    const double* p = x.data();
    for (Eigen::Index i = 0; i < t_count; ++i) {
        for (Eigen::Index j = i + 1; j < t_count; ++j) {
            double dist = 0.0;
            for (int k = 0; k < m; ++k)
                dist = std::max(dist, std::fabs(p[i + k] - p[j + k]));
            if (dist <= r) {
                ++b_matches;
                if (std::fabs(p[i + m] - p[j + m]) <= r) ++a_matches;
            }
        }
    }

    if (b_matches == 0 || a_matches == 0) {
        out.sample_entropy = 0.0;
        if (flags) flags->add("saen_degenerate");
    } else {
        out.sample_entropy =
            -std::log(static_cast<double>(a_matches) / static_cast<double>(b_matches));
    }
    return out;
}

ChangeStats change_stats(const Eigen::VectorXd& x, FlagSet* flags) {
    const Eigen::Index n = x.size();
    if (n < 2) throw std::invalid_argument("change_stats: need at least 2 samples");
    ChangeStats out{};

    Eigen::ArrayXd diff = x.tail(n - 1).array() - x.head(n - 1).array();
    out.asoc = diff.abs().sum();
    out.mach = out.asoc / static_cast<double>(n);
    out.mch = (x[n - 1] - x[0]) / static_cast<double>(n - 1);

    if (n >= 3) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i + 2 < n; ++i)
            acc += 0.5 * (x[i + 2] - 2.0 * x[i + 1] + x[i]);
        out.msdc = acc / (2.0 * static_cast<double>(n - 1));
    } else {
        out.msdc = 0.0;
        if (flags) flags->add("msdc_short");
    }
    return out;
}

ShapeCounts shape_counts(const Eigen::VectorXd& x, double m, int peak_support, FlagSet* flags) {
    const Eigen::Index n = x.size();
    if (n == 0) throw std::invalid_argument("shape_counts: empty input");
    if (peak_support < 1) throw std::invalid_argument("shape_counts: peak_support must be >= 1");
    (void)flags;

    ShapeCounts out{};
    const double nn = static_cast<double>(n);

    // Crossings of level m: strictly opposite signs of (x - m) between
    // consecutive samples; samples equal to m carry the previous sign.
    long crossings = 0;
    int carried = 0; // 0 until a nonzero sign appears
    for (Eigen::Index i = 0; i < n; ++i) {
        int s = x[i] > m ? 1 : (x[i] < m ? -1 : 0);
        if (s == 0) continue;
        if (carried != 0 && s != carried) ++crossings;
        carried = s;
    }
    out.crm = crossings;

    long peak_count = 0;
    for (Eigen::Index i = peak_support; i + peak_support < n; ++i) {
        bool is_peak = true;
        for (int k = 1; k <= peak_support && is_peak; ++k)
            if (!(x[i] > x[i - k] && x[i] > x[i + k])) is_peak = false;
        if (is_peak) ++peak_count;
    }
    out.peaks = peak_count;

    const double mean = x.mean();
    long below = 0;
    long run_above = 0, run_below = 0;
    long best_above = 0, best_below = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (x[i] < mean) ++below;
        run_above = x[i] > mean ? run_above + 1 : 0;
        run_below = x[i] < mean ? run_below + 1 : 0;
        best_above = std::max(best_above, run_above);
        best_below = std::max(best_below, run_below);
    }
    out.cbme = below;
    out.lsame = static_cast<double>(best_above) / nn;
    out.lsbme = static_cast<double>(best_below) / nn;

    std::map<double, long> counts;
    for (Eigen::Index i = 0; i < n; ++i) ++counts[x[i]];
    long recurring = 0;
    for (const auto& [value, count] : counts)
        if (count > 1) recurring += count;
    out.pre_da = static_cast<double>(recurring) / nn;

    Eigen::Index first_min = 0, last_min = 0, first_max = 0, last_max = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
        if (x[i] < x[first_min]) first_min = i;
        if (x[i] <= x[last_min]) last_min = i;
        if (x[i] > x[first_max]) first_max = i;
        if (x[i] >= x[last_max]) last_max = i;
    }
    out.flmi = static_cast<double>(first_min) / nn;
    out.flma = static_cast<double>(first_max) / nn;
    out.llmi = static_cast<double>(last_min + 1) / nn;
    out.llma = static_cast<double>(last_max + 1) / nn;
    return out;
}

FeatureVector extract_features(const Eigen::VectorXd& x, const FeatureParams& params) {
    FeatureVector fv;
    if (x.size() < 2 * static_cast<Eigen::Index>(params.peak_support) + 3)
        fv.flags.add("short_series");

    DistributionStats ds = distribution_stats(x, &fv.flags);
    fv.std_dev = ds.std_dev;
    fv.q05 = ds.q05;
    fv.q25 = ds.q25;
    fv.q50 = ds.q50;
    fv.q75 = ds.q75;
    fv.q95 = ds.q95;
    fv.skew = ds.skew;
    fv.kurt = ds.kurt;

    EnergyEntropy ee = energy_entropy(x, params.saen_m, params.saen_r_factor, &fv.flags);
    fv.abs_energy = ee.abs_energy;
    fv.sample_entropy = ee.sample_entropy;

    ChangeStats cs = change_stats(x, &fv.flags);
    fv.asoc = cs.asoc;
    fv.mach = cs.mach;
    fv.mch = cs.mch;
    fv.msdc = cs.msdc;

    ShapeCounts sc = shape_counts(x, params.crossing_level, params.peak_support, &fv.flags);
    fv.crm = sc.crm;
    fv.peaks = sc.peaks;
    fv.cbme = sc.cbme;
    fv.lsame = sc.lsame;
    fv.lsbme = sc.lsbme;
    fv.pre_da = sc.pre_da;
    fv.flmi = sc.flmi;
    fv.llmi = sc.llmi;
    fv.flma = sc.flma;
    fv.llma = sc.llma;
    return fv;
}

FeatureVector extract_features(const GoldSignal& signal, const FeatureParams& params) {
    FeatureVector fv = extract_features(signal.samples, params);
    if (signal.constant_flag) fv.flags.add("constant_signal");
    return fv;
}

} // namespace engage

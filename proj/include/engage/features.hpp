#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

#include "engage/signal.hpp"

namespace engage {

// Degenerate-input markers carried alongside feature values. Downstream
// stages need finite numbers, so degenerate statistics yield convention
// values plus a named flag instead of NaN.
class FlagSet {
public:
    void add(const std::string& name);
    bool contains(const std::string& name) const;
    bool empty() const { return names_.empty(); }
    std::string joined() const; // semicolon-separated, sorted
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_; // kept sorted and unique
};

// Canonical feature order; also the features.csv column order.
inline constexpr std::array<const char*, 24> kFeatureNames = {
    "std",  "q05",  "q25",   "q50",   "q75",   "q95",   "skew",  "kurt",
    "absE", "SaEn", "ASOC",  "MACh",  "MCh",   "MSDC",  "LSAMe", "LSBMe",
    "PReDa", "FLMi", "LLMi",  "FLMa",  "LLMa",  "CrM",   "peaks", "CBMe"};

struct FeatureVector {
    double std_dev = 0, q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0;
    double skew = 0, kurt = 0;
    double abs_energy = 0, sample_entropy = 0;
    double asoc = 0, mach = 0, mch = 0, msdc = 0;
    double lsame = 0, lsbme = 0, pre_da = 0;
    double flmi = 0, llmi = 0, flma = 0, llma = 0;
    long crm = 0, peaks = 0, cbme = 0;
    FlagSet flags;

    Eigen::Matrix<double, 24, 1> as_vector() const; // canonical order
};

struct DistributionStats {
    double std_dev, q05, q25, q50, q75, q95, skew, kurt;
};

struct EnergyEntropy {
    double abs_energy, sample_entropy;
};

struct ChangeStats {
    double asoc, mach, mch, msdc;
};

struct ShapeCounts {
    long crm, peaks, cbme;
    double lsame, lsbme, pre_da, flmi, llmi, flma, llma;
};

struct FeatureParams {
    double crossing_level = 0.0;  // m of the crossings count
    int peak_support = 10;
    int saen_m = 2;
    double saen_r_factor = 0.2;   // tolerance = factor * population std
};

// Population std, linearly interpolated quantiles, bias-adjusted
// Fisher-Pearson skewness and excess kurtosis. Series shorter than 3 (skew)
// or 4 (kurt) and constant series take convention value 0 with a flag.
DistributionStats distribution_stats(const Eigen::VectorXd& x, FlagSet* flags = nullptr);

// absE = sum of squares. Sample entropy with embedding m, Chebyshev
// distance, tolerance r_factor * population std, self-matches excluded;
// -ln(A/B) with A/B the (m+1)- and m-length template match counts.
EnergyEntropy energy_entropy(const Eigen::VectorXd& x, int m = 2, double r_factor = 0.2,
                             FlagSet* flags = nullptr);

ChangeStats change_stats(const Eigen::VectorXd& x, FlagSet* flags = nullptr);

ShapeCounts shape_counts(const Eigen::VectorXd& x, double m = 0.0, int peak_support = 10,
                         FlagSet* flags = nullptr);

FeatureVector extract_features(const Eigen::VectorXd& x, const FeatureParams& params = {});
FeatureVector extract_features(const GoldSignal& signal, const FeatureParams& params = {});

} // namespace engage

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "engage/features.hpp"

namespace engage {

struct Date {
    int year = 1970, month = 1, day = 1;

    static Date parse(const std::string& iso); // YYYY-MM-DD
    static Date from_serial(std::int64_t days); // inverse of serial_day
    std::string to_string() const;
    std::int64_t serial_day() const; // days since 1970-01-01 (civil calendar)
};

// Per-video counts at crawl time plus ingested comment-sentiment tallies.
struct EngagementRecord {
    std::string video_id;
    Date upload_date;
    Date crawl_date;
    std::int64_t views = 0, likes = 0, dislikes = 0, comments = 0, comment_likes = 0;
    std::int64_t positive_comments = 0, neutral_comments = 0, negative_comments = 0;
    // Likes accumulated on positive/negative comments, for the lc. ratios.
    std::int64_t positive_comment_likes = 0, negative_comment_likes = 0;

    void validate() const;
    std::int64_t days_elapsed() const; // calendar difference, floored at 1
};

// Canonical indicator order; also the correlation-matrix row order.
inline const std::vector<std::string> kIndicatorNames = {
    "Vp/d",  "Lp/d",  "Dp/d",  "Cp/d",  "LCp/d",
    "like_dislike_ratio", "pos_ratio", "neu_ratio", "neg_ratio",
    "pos_neg_ratio", "like_comment_ratio", "pos_lc_ratio", "neg_lc_ratio"};

inline const std::vector<std::string> kPredictionTaskDefaults = {
    "Vp/d", "Lp/d", "Dp/d", "Cp/d", "LCp/d"};

// Ratio schema (0/0 yields 0 plus a flag):
//   like_dislike_ratio  = likes / (likes + dislikes)
//   pos|neu|neg_ratio   = sentiment count / labeled comments
//   pos_neg_ratio       = positive / (positive + negative)
//   like_comment_ratio  = comment_likes / comments
//   pos|neg_lc_ratio    = likes on positive|negative comments / labeled comments
struct IndicatorVector {
    double vpd = 0, lpd = 0, dpd = 0, cpd = 0, lcpd = 0;
    double like_dislike_ratio = 0, pos_ratio = 0, neu_ratio = 0, neg_ratio = 0;
    double pos_neg_ratio = 0, like_comment_ratio = 0, pos_lc_ratio = 0, neg_lc_ratio = 0;
    FlagSet flags;

    double by_name(const std::string& name) const;
};

// Counts divided by max(1, days between upload and crawl).
IndicatorVector per_day(const EngagementRecord& record);

// Ratio indicators; degenerate 0/0 denominators yield 0 with a flag.
IndicatorVector ratios(const EngagementRecord& record);

// per_day + ratios in one vector.
IndicatorVector indicators(const EngagementRecord& record);

enum class Sentiment { positive, neutral, negative, not_applicable };

Sentiment sentiment_from_string(const std::string& s);
const char* to_string(Sentiment s);

// Majority label of three annotations, or nullopt when no label reaches two
// votes (the item is excluded from the fused ground truth).
std::optional<Sentiment> majority_fuse(const std::array<Sentiment, 3>& labels);

// Mean over items of the fraction of agreeing annotator pairs (3 per item).
double joint_probability(const std::vector<std::array<Sentiment, 3>>& annotations);

} // namespace engage

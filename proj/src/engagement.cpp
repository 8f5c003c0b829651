#include "engage/engagement.hpp"

#include <cstdio>
#include <stdexcept>

namespace engage {

Date Date::parse(const std::string& iso) {
    Date d;
    if (std::sscanf(iso.c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3)
        throw std::invalid_argument("invalid ISO-8601 date '" + iso + "'");
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
        throw std::invalid_argument("invalid ISO-8601 date '" + iso + "'");
    return d;
}

Date Date::from_serial(std::int64_t days) {
    // Howard Hinnant's civil-from-days.
    std::int64_t z = days + 719468;
    std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    std::int64_t doe = z - era * 146097;
    std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t y = yoe + era * 400;
    std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    std::int64_t mp = (5 * doy + 2) / 153;
    Date d;
    d.day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    d.month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    d.year = static_cast<int>(y + (d.month <= 2 ? 1 : 0));
    return d;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::int64_t Date::serial_day() const {
    // Howard Hinnant's days-from-civil.
    std::int64_t y = year - (month <= 2 ? 1 : 0);
    std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    std::int64_t yoe = y - era * 400;
    std::int64_t doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

void EngagementRecord::validate() const {
    if (crawl_date.serial_day() < upload_date.serial_day())
        throw std::invalid_argument("crawl date before upload date");
    if (views < 0 || likes < 0 || dislikes < 0 || comments < 0 || comment_likes < 0 ||
        positive_comments < 0 || neutral_comments < 0 || negative_comments < 0)
        throw std::invalid_argument("negative engagement count");
    if (positive_comments + neutral_comments + negative_comments > comments)
        throw std::invalid_argument("labeled comments exceed total comments");
}

std::int64_t EngagementRecord::days_elapsed() const {
    std::int64_t d = crawl_date.serial_day() - upload_date.serial_day();
    return d < 1 ? 1 : d;
}

double IndicatorVector::by_name(const std::string& name) const {
    if (name == "Vp/d") return vpd;
    if (name == "Lp/d") return lpd;
    if (name == "Dp/d") return dpd;
    if (name == "Cp/d") return cpd;
    if (name == "LCp/d") return lcpd;
    if (name == "like_dislike_ratio") return like_dislike_ratio;
    if (name == "pos_ratio") return pos_ratio;
    if (name == "neu_ratio") return neu_ratio;
    if (name == "neg_ratio") return neg_ratio;
    if (name == "pos_neg_ratio") return pos_neg_ratio;
    if (name == "like_comment_ratio") return like_comment_ratio;
    if (name == "pos_lc_ratio") return pos_lc_ratio;
    if (name == "neg_lc_ratio") return neg_lc_ratio;
    throw std::out_of_range("unknown indicator '" + name + "'");
}

IndicatorVector per_day(const EngagementRecord& record) {
    record.validate();
    IndicatorVector v;
    double days = static_cast<double>(record.days_elapsed());
    v.vpd = static_cast<double>(record.views) / days;
    v.lpd = static_cast<double>(record.likes) / days;
    v.dpd = static_cast<double>(record.dislikes) / days;
    v.cpd = static_cast<double>(record.comments) / days;
    v.lcpd = static_cast<double>(record.comment_likes) / days;
    return v;
}

namespace {

double safe_ratio(double num, double den, const char* flag, FlagSet& flags) {
    if (den <= 0.0) {
        flags.add(flag);
        return 0.0;
    }
    return num / den;
}

} // namespace

IndicatorVector ratios(const EngagementRecord& record) {
    record.validate();
    IndicatorVector v;
    double pos = static_cast<double>(record.positive_comments);
    double neu = static_cast<double>(record.neutral_comments);
    double neg = static_cast<double>(record.negative_comments);
    double labeled = pos + neu + neg;

    v.like_dislike_ratio = safe_ratio(static_cast<double>(record.likes),
                                      static_cast<double>(record.likes + record.dislikes),
                                      "no_like_dislike_data", v.flags);
    v.pos_ratio = safe_ratio(pos, labeled, "no_labeled_comments", v.flags);
    v.neu_ratio = safe_ratio(neu, labeled, "no_labeled_comments", v.flags);
    v.neg_ratio = safe_ratio(neg, labeled, "no_labeled_comments", v.flags);
    v.pos_neg_ratio = safe_ratio(pos, pos + neg, "no_pos_neg_comments", v.flags);
    v.like_comment_ratio = safe_ratio(static_cast<double>(record.comment_likes),
                                      static_cast<double>(record.comments),
                                      "no_comments", v.flags);
    v.pos_lc_ratio = safe_ratio(static_cast<double>(record.positive_comment_likes), labeled,
                                "no_labeled_comments", v.flags);
    v.neg_lc_ratio = safe_ratio(static_cast<double>(record.negative_comment_likes), labeled,
                                "no_labeled_comments", v.flags);
    return v;
}

IndicatorVector indicators(const EngagementRecord& record) {
    IndicatorVector v = per_day(record);
    IndicatorVector r = ratios(record);
    v.like_dislike_ratio = r.like_dislike_ratio;
    v.pos_ratio = r.pos_ratio;
    v.neu_ratio = r.neu_ratio;
    v.neg_ratio = r.neg_ratio;
    v.pos_neg_ratio = r.pos_neg_ratio;
    v.like_comment_ratio = r.like_comment_ratio;
    v.pos_lc_ratio = r.pos_lc_ratio;
    v.neg_lc_ratio = r.neg_lc_ratio;
    v.flags = r.flags;
    return v;
}

Sentiment sentiment_from_string(const std::string& s) {
    if (s == "positive") return Sentiment::positive;
    if (s == "neutral") return Sentiment::neutral;
    if (s == "negative") return Sentiment::negative;
    if (s == "not_applicable" || s == "na") return Sentiment::not_applicable;
    throw std::invalid_argument("unknown sentiment label '" + s + "'");
}

const char* to_string(Sentiment s) {
    switch (s) {
        case Sentiment::positive: return "positive";
        case Sentiment::neutral: return "neutral";
        case Sentiment::negative: return "negative";
        case Sentiment::not_applicable: return "not_applicable";
    }
    return "?";
}

std::optional<Sentiment> majority_fuse(const std::array<Sentiment, 3>& labels) {
    for (Sentiment candidate : labels) {
        int votes = 0;
        for (Sentiment l : labels)
            if (l == candidate) ++votes;
        if (votes >= 2) return candidate;
    }
    return std::nullopt;
}

double joint_probability(const std::vector<std::array<Sentiment, 3>>& annotations) {
    if (annotations.empty()) throw std::invalid_argument("joint_probability: empty table");
    double total = 0.0;
    for (const auto& item : annotations) {
        int agreeing = 0;
        if (item[0] == item[1]) ++agreeing;
        if (item[0] == item[2]) ++agreeing;
        if (item[1] == item[2]) ++agreeing;
        total += agreeing / 3.0;
    }
    return total / static_cast<double>(annotations.size());
}

} // namespace engage

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "posfaith/errors.hpp"
#include "posfaith/scorers.hpp"
#include "posfaith/segment.hpp"

namespace posfaith {

enum class BinMode {
    // Equal-width bins over [0, W] where W is the summary extent. A position
    // p lands in bin k iff e_{k-1} <= p < e_k; the last bin is right-closed.
    fixed_domain,
    // Equal-width bins over [min p, max p], intervals left-open/right-closed,
    // with the lowest edge lowered by 0.1% of the range (equal-width cut
    // semantics). Errors when all positions coincide.
    observed_range,
};

inline BinMode bin_mode_from_string(std::string_view s) {
    if (s == "fixed" || s == "fixed_domain") return BinMode::fixed_domain;
    if (s == "observed" || s == "observed_range") return BinMode::observed_range;
    throw DataError("unknown bin mode: " + std::string(s));
}

// Which per-fact coordinate is binned.
enum class CoordinateMode { words, facts, sentences };

inline CoordinateMode coordinate_from_string(std::string_view s) {
    if (s == "words") return CoordinateMode::words;
    if (s == "facts") return CoordinateMode::facts;
    if (s == "sentences") return CoordinateMode::sentences;
    throw DataError("unknown coordinate mode: " + std::string(s));
}

// Bin edges plus the bin index of every input position.
struct BinAssignment {
    std::vector<double> edges;  // bin_count + 1, strictly increasing
    std::vector<int> bin_of;    // 0-based, aligned with the input

    int bin_count() const { return static_cast<int>(edges.size()) - 1; }
};

// Per-bin faithfulness profile: means are absent for empty bins.
struct BinProfile {
    int bin_count = 0;
    std::vector<double> edges;
    std::vector<std::optional<double>> means;  // one entry per bin
    std::vector<long> counts;
};

struct SensitivityReport {
    double sensitivity = 0.0;  // percentage points; meaningful iff defined
    bool defined = false;      // false whenever any bin is empty
    BinProfile profile;
};

inline BinAssignment assign_bins(std::span<const double> positions, double domain_width,
                                 int bin_count, BinMode mode = BinMode::fixed_domain) {
    if (bin_count < 2) throw DataError("bin_count must be >= 2");
    BinAssignment out;
    out.edges.resize(static_cast<std::size_t>(bin_count) + 1);

    if (mode == BinMode::fixed_domain) {
        if (domain_width < 1.0) throw DataError("domain width must be >= 1");
        for (int k = 0; k <= bin_count; ++k)
            out.edges[static_cast<std::size_t>(k)] = domain_width * k / bin_count;
        out.bin_of.reserve(positions.size());
        for (const double p : positions) {
            if (p < 0.0 || p > domain_width)
                throw DataError("position " + std::to_string(p) + " outside [0, " +
                                std::to_string(domain_width) + "]");
            int idx = std::min(bin_count - 1,
                               static_cast<int>(std::floor(p * bin_count / domain_width)));
            // The half-open intervals are authoritative; the arithmetic above
            // is only a starting guess near edges.
            while (idx > 0 && p < out.edges[static_cast<std::size_t>(idx)]) --idx;
            while (idx < bin_count - 1 && p >= out.edges[static_cast<std::size_t>(idx) + 1]) ++idx;
            out.bin_of.push_back(idx);
        }
        return out;
    }

    if (positions.empty()) throw DataError("observed_range binning needs positions");
    const auto [lo_it, hi_it] = std::minmax_element(positions.begin(), positions.end());
    const double lo = *lo_it, hi = *hi_it;
    const double range = hi - lo;
    if (range <= 0.0) throw DataError("degenerate position range");
    out.edges[0] = lo - 0.001 * range;
    for (int k = 1; k < bin_count; ++k)
        out.edges[static_cast<std::size_t>(k)] = lo + range * k / bin_count;
    // pin the last edge to the exact maximum so it cannot round below hi
    out.edges[static_cast<std::size_t>(bin_count)] = hi;
    out.bin_of.reserve(positions.size());
    for (const double p : positions) {
        int idx = std::min(bin_count - 1,
                           static_cast<int>(std::floor((p - lo) * bin_count / range)));
        idx = std::max(0, idx);
        while (idx > 0 && p <= out.edges[static_cast<std::size_t>(idx)]) --idx;
        while (idx < bin_count - 1 && p > out.edges[static_cast<std::size_t>(idx) + 1]) ++idx;
        out.bin_of.push_back(idx);
    }
    return out;
}

inline BinAssignment assign_bins(const std::vector<AtomicFact>& facts, long summary_words,
                                 int bin_count, BinMode mode = BinMode::fixed_domain) {
    std::vector<double> positions;
    positions.reserve(facts.size());
    for (const auto& f : facts) positions.push_back(f.position_words);
    return assign_bins(positions, static_cast<double>(summary_words), bin_count, mode);
}

// Mean score of the facts assigned to each bin. Empty bins are flagged,
// not fatal.
inline BinProfile bin_profile(std::span<const double> scores, const BinAssignment& assignment) {
    if (scores.size() != assignment.bin_of.size())
        throw DataError("bin_profile: scores/assignment size mismatch");
    const int k = assignment.bin_count();
    BinProfile profile;
    profile.bin_count = k;
    profile.edges = assignment.edges;
    profile.counts.assign(static_cast<std::size_t>(k), 0);
    std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto b = static_cast<std::size_t>(assignment.bin_of[i]);
        sums[b] += scores[i];
        ++profile.counts[b];
    }
    profile.means.resize(static_cast<std::size_t>(k));
    for (std::size_t b = 0; b < sums.size(); ++b)
        if (profile.counts[b] > 0)
            profile.means[b] = sums[b] / static_cast<double>(profile.counts[b]);
    return profile;
}

// Sensitivity = 100 x (mean of the leading K-1 bin means minus the final bin
// mean). Positive values mean the final bin is less faithful than the rest.
// Undefined (and flagged) when any bin is empty.
inline SensitivityReport sensitivity(const BinProfile& profile) {
    SensitivityReport report;
    report.profile = profile;
    if (profile.bin_count < 2) throw DataError("sensitivity needs >= 2 bins");
    for (const auto& m : profile.means)
        if (!m.has_value()) return report;  // defined stays false
    double head = 0.0;
    for (int k = 0; k + 1 < profile.bin_count; ++k)
        head += *profile.means[static_cast<std::size_t>(k)];
    head /= static_cast<double>(profile.bin_count - 1);
    report.sensitivity =
        100.0 * (head - *profile.means[static_cast<std::size_t>(profile.bin_count) - 1]);
    report.defined = true;
    return report;
}

// Convenience: sensitivity straight from K bin means (all bins occupied).
inline SensitivityReport sensitivity_from_means(const std::vector<double>& means) {
    BinProfile profile;
    profile.bin_count = static_cast<int>(means.size());
    for (const double m : means) {
        profile.means.emplace_back(m);
        profile.counts.push_back(1);
    }
    for (int k = 0; k <= profile.bin_count; ++k)
        profile.edges.push_back(static_cast<double>(k));
    return sensitivity(profile);
}

// Positions for the chosen coordinate, with the matching domain width:
//   words     -> midpoint word offset of the parent sentence over [0, W]
//   facts     -> fact ordinal over [0, N)
//   sentences -> sentence index over [0, S)
struct PositionSet {
    std::vector<double> positions;
    double domain_width = 0.0;
};

inline PositionSet fact_positions(const std::vector<AtomicFact>& kept_facts, long summary_words,
                                  long summary_sentences, CoordinateMode mode) {
    PositionSet out;
    out.positions.reserve(kept_facts.size());
    switch (mode) {
        case CoordinateMode::words:
            for (const auto& f : kept_facts) out.positions.push_back(f.position_words);
            out.domain_width = static_cast<double>(summary_words);
            break;
        case CoordinateMode::facts:
            for (std::size_t i = 0; i < kept_facts.size(); ++i)
                out.positions.push_back(static_cast<double>(i));
            out.domain_width = static_cast<double>(std::max<std::size_t>(1, kept_facts.size()));
            break;
        case CoordinateMode::sentences:
            for (const auto& f : kept_facts)
                out.positions.push_back(static_cast<double>(f.sentence_index));
            out.domain_width = static_cast<double>(std::max<long>(1, summary_sentences));
            break;
    }
    return out;
}

// Bin report JSON: {"summary_id", "bin_count", "edges", "means", "counts",
// "sensitivity": float|null}. Empty-bin means serialize as null.
inline nlohmann::json bin_report_json(const std::string& summary_id,
                                      const SensitivityReport& report) {
    nlohmann::json j;
    j["summary_id"] = summary_id;
    j["bin_count"] = report.profile.bin_count;
    j["edges"] = report.profile.edges;
    nlohmann::json means = nlohmann::json::array();
    for (const auto& m : report.profile.means)
        means.push_back(m ? nlohmann::json(*m) : nlohmann::json(nullptr));
    j["means"] = std::move(means);
    j["counts"] = report.profile.counts;
    j["sensitivity"] = report.defined ? nlohmann::json(report.sensitivity) : nlohmann::json(nullptr);
    return j;
}

inline SensitivityReport bin_report_from_json(const nlohmann::json& j) {
    SensitivityReport report;
    report.profile.bin_count = j.at("bin_count").get<int>();
    report.profile.edges = j.at("edges").get<std::vector<double>>();
    for (const auto& m : j.at("means"))
        report.profile.means.push_back(m.is_null() ? std::optional<double>{}
                                                   : std::optional<double>{m.get<double>()});
    report.profile.counts = j.at("counts").get<std::vector<long>>();
    if (!j.at("sensitivity").is_null()) {
        report.sensitivity = j["sensitivity"].get<double>();
        report.defined = true;
    }
    return report;
}

}  // namespace posfaith

#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "posfaith/corpus.hpp"
#include "posfaith/errors.hpp"
#include "posfaith/positional.hpp"

namespace posfaith {

// How per-summary bin profiles pool into a group profile. fact_pooled weights
// every fact equally (the default); summary_mean weights every summary
// equally.
enum class AggregationMode { fact_pooled, summary_mean };

inline std::string to_string(AggregationMode m) {
    return m == AggregationMode::fact_pooled ? "fact_pooled" : "summary_mean";
}

inline AggregationMode aggregation_mode_from_string(std::string_view s) {
    if (s == "fact_pooled") return AggregationMode::fact_pooled;
    if (s == "summary_mean") return AggregationMode::summary_mean;
    throw DataError("unknown aggregation mode: " + std::string(s));
}

struct GroupKey {
    std::string model;
    std::string dataset;
    std::string context_bucket;
    std::string regime;
    std::string decoding;

    auto tie() const { return std::tie(model, dataset, context_bucket, regime, decoding); }
    bool operator==(const GroupKey& o) const { return tie() == o.tie(); }
    bool operator<(const GroupKey& o) const { return tie() < o.tie(); }

    std::string label() const {
        std::string out;
        for (const std::string* part : {&model, &dataset, &context_bucket, &regime, &decoding}) {
            if (part->empty()) continue;
            if (!out.empty()) out.push_back('/');
            out += *part;
        }
        return out.empty() ? "all" : out;
    }

    static GroupKey for_summary(const SummaryRecord& rec) {
        GroupKey key;
        if (auto it = rec.meta.find("model"); it != rec.meta.end()) key.model = it->second;
        if (auto it = rec.meta.find("dataset"); it != rec.meta.end()) key.dataset = it->second;
        if (auto it = rec.meta.find("context_tokens"); it != rec.meta.end())
            key.context_bucket = it->second;
        key.regime = to_string(rec.regime);
        key.decoding = rec.decoding.slug();
        return key;
    }
};

struct SummaryProfile {
    std::string summary_id;
    GroupKey group;
    BinProfile profile;
};

struct AggregateRow {
    GroupKey key;
    std::vector<std::optional<double>> means;
    std::vector<long> counts;  // facts pooled per bin
    std::optional<double> sensitivity;
    long n_summaries = 0;
};

struct AggregateTable {
    int bin_count = 0;
    AggregationMode mode = AggregationMode::fact_pooled;
    std::vector<AggregateRow> rows;  // sorted by group key

    bool operator==(const AggregateTable& o) const;
};

// Pools per-summary bin profiles into one row per group, in group-key order.
// fact_pooled: bin mean over all facts in the bin across the group.
// summary_mean: unweighted mean of the per-summary bin means (summaries with
// that bin empty do not contribute to it). Sensitivity is recomputed from the
// group means and is absent whenever any group bin is empty.
inline AggregateTable aggregate(const std::vector<SummaryProfile>& profiles,
                                AggregationMode mode = AggregationMode::fact_pooled) {
    AggregateTable table;
    table.mode = mode;
    if (profiles.empty()) return table;
    table.bin_count = profiles.front().profile.bin_count;
    for (const auto& p : profiles)
        if (p.profile.bin_count != table.bin_count)
            throw DataError("aggregate: mixed bin counts (" + std::to_string(table.bin_count) +
                            " vs " + std::to_string(p.profile.bin_count) + ")");

    struct Accumulator {
        std::vector<double> weighted_sum;
        std::vector<long> fact_counts;
        std::vector<double> mean_sum;
        std::vector<long> mean_n;
        long n_summaries = 0;
    };
    std::map<GroupKey, Accumulator> groups;
    const auto k = static_cast<std::size_t>(table.bin_count);
    for (const auto& p : profiles) {
        auto& acc = groups[p.group];
        if (acc.weighted_sum.empty()) {
            acc.weighted_sum.assign(k, 0.0);
            acc.fact_counts.assign(k, 0);
            acc.mean_sum.assign(k, 0.0);
            acc.mean_n.assign(k, 0);
        }
        ++acc.n_summaries;
        for (std::size_t b = 0; b < k; ++b) {
            if (!p.profile.means[b].has_value()) continue;
            acc.weighted_sum[b] += *p.profile.means[b] * static_cast<double>(p.profile.counts[b]);
            acc.fact_counts[b] += p.profile.counts[b];
            acc.mean_sum[b] += *p.profile.means[b];
            ++acc.mean_n[b];
        }
    }

    for (const auto& [key, acc] : groups) {
        AggregateRow row;
        row.key = key;
        row.n_summaries = acc.n_summaries;
        row.counts = acc.fact_counts;
        row.means.resize(k);
        for (std::size_t b = 0; b < k; ++b) {
            if (mode == AggregationMode::fact_pooled) {
                if (acc.fact_counts[b] > 0)
                    row.means[b] = acc.weighted_sum[b] / static_cast<double>(acc.fact_counts[b]);
            } else if (acc.mean_n[b] > 0) {
                row.means[b] = acc.mean_sum[b] / static_cast<double>(acc.mean_n[b]);
            }
        }
        const bool complete =
            std::all_of(row.means.begin(), row.means.end(),
                        [](const std::optional<double>& m) { return m.has_value(); });
        if (complete) {
            std::vector<double> means;
            for (const auto& m : row.means) means.push_back(*m);
            row.sensitivity = sensitivity_from_means(means).sensitivity;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

// Raw inter-annotator agreement: the unadjusted percentage of items on which
// both label lists coincide.
inline double raw_agreement(const std::vector<bool>& labels_a, const std::vector<bool>& labels_b) {
    if (labels_a.empty()) throw DataError("raw_agreement: empty label lists");
    if (labels_a.size() != labels_b.size())
        throw DataError("raw_agreement: length mismatch (" + std::to_string(labels_a.size()) +
                        " vs " + std::to_string(labels_b.size()) + ")");
    std::size_t matches = 0;
    for (std::size_t i = 0; i < labels_a.size(); ++i)
        if (labels_a[i] == labels_b[i]) ++matches;
    return 100.0 * static_cast<double>(matches) / static_cast<double>(labels_a.size());
}

enum class RenderFormat { markdown, csv, json, svg_lines };

inline RenderFormat render_format_from_string(std::string_view s) {
    if (s == "md" || s == "markdown") return RenderFormat::markdown;
    if (s == "csv") return RenderFormat::csv;
    if (s == "json") return RenderFormat::json;
    if (s == "svg" || s == "svg_lines") return RenderFormat::svg_lines;
    throw DataError("unknown render format: " + std::string(s));
}

namespace detail {

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string render_markdown(const AggregateTable& table) {
    std::string out;
    out += "| group | n |";
    for (int b = 1; b <= table.bin_count; ++b) out += " bin " + std::to_string(b) + " |";
    out += " sensitivity |\n";
    out += "|---|---|";
    for (int b = 0; b < table.bin_count; ++b) out += "---|";
    out += "---|\n";
    for (const auto& row : table.rows) {
        // bold the max bin, underline the min, on the printed 2-decimal values
        std::string max_s, min_s;
        for (const auto& m : row.means) {
            if (!m) continue;
            const std::string s = fixed2(*m);
            if (max_s.empty() || std::stod(s) > std::stod(max_s)) max_s = s;
            if (min_s.empty() || std::stod(s) < std::stod(min_s)) min_s = s;
        }
        out += "| " + row.key.label() + " | " + std::to_string(row.n_summaries) + " |";
        for (const auto& m : row.means) {
            if (!m) {
                out += " - |";
                continue;
            }
            const std::string s = fixed2(*m);
            if (max_s != min_s && s == max_s) out += " **" + s + "** |";
            else if (max_s != min_s && s == min_s) out += " <u>" + s + "</u> |";
            else out += " " + s + " |";
        }
        out += row.sensitivity ? " " + fixed2(*row.sensitivity) + " |\n" : " - |\n";
    }
    return out;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string render_csv(const AggregateTable& table) {
    std::string out = "model,dataset,context_bucket,regime,decoding,n_summaries";
    for (int b = 1; b <= table.bin_count; ++b) out += ",mean_" + std::to_string(b);
    for (int b = 1; b <= table.bin_count; ++b) out += ",count_" + std::to_string(b);
    out += ",sensitivity\n";
    for (const auto& row : table.rows) {
        out += csv_escape(row.key.model) + "," + csv_escape(row.key.dataset) + "," +
               csv_escape(row.key.context_bucket) + "," + csv_escape(row.key.regime) + "," +
               csv_escape(row.key.decoding) + "," + std::to_string(row.n_summaries);
        for (const auto& m : row.means) out += m ? "," + fixed2(*m) : ",";
        for (const long c : row.counts) out += "," + std::to_string(c);
        out += row.sensitivity ? "," + fixed2(*row.sensitivity) + "\n" : ",\n";
    }
    return out;
}

inline std::string render_svg(const AggregateTable& table) {
    constexpr int kWidth = 640, kHeight = 400, kMargin = 48;
    static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(kWidth) + "\" height=\"" + std::to_string(kHeight) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // y axis covers [0,1] faithfulness; x axis is the bin index
    auto x_of = [&](int bin) {
        return kMargin + (kWidth - 2 * kMargin) * bin / std::max(1, table.bin_count - 1);
    };
    auto y_of = [&](double mean) {
        return kHeight - kMargin - static_cast<int>((kHeight - 2 * kMargin) * mean);
    };
    out += "<line x1=\"" + std::to_string(kMargin) + "\" y1=\"" + std::to_string(kHeight - kMargin) +
           "\" x2=\"" + std::to_string(kWidth - kMargin) + "\" y2=\"" +
           std::to_string(kHeight - kMargin) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + std::to_string(kMargin) + "\" y1=\"" + std::to_string(kMargin) +
           "\" x2=\"" + std::to_string(kMargin) + "\" y2=\"" + std::to_string(kHeight - kMargin) +
           "\" stroke=\"black\"/>\n";
    int color = 0;
    for (const auto& row : table.rows) {
        std::string points;
        for (int b = 0; b < table.bin_count; ++b) {
            const auto& m = row.means[static_cast<std::size_t>(b)];
            if (!m) continue;
            points += std::to_string(x_of(b)) + "," + std::to_string(y_of(*m)) + " ";
        }
        if (points.empty()) continue;
        out += "<polyline fill=\"none\" stroke=\"";
        out += kColors[color % 8];
        out += "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
        out += "<!-- " + row.key.label() + " -->\n";
        ++color;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace detail

inline nlohmann::json aggregate_to_json(const AggregateTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
        nlohmann::json means = nlohmann::json::array();
        for (const auto& m : row.means)
            means.push_back(m ? nlohmann::json(*m) : nlohmann::json(nullptr));
        rows.push_back({{"group",
                         {{"model", row.key.model},
                          {"dataset", row.key.dataset},
                          {"context_bucket", row.key.context_bucket},
                          {"regime", row.key.regime},
                          {"decoding", row.key.decoding}}},
                        {"n_summaries", row.n_summaries},
                        {"means", std::move(means)},
                        {"counts", row.counts},
                        {"sensitivity", row.sensitivity ? nlohmann::json(*row.sensitivity)
                                                        : nlohmann::json(nullptr)}});
    }
    return {{"bin_count", table.bin_count},
            {"mode", to_string(table.mode)},
            {"rows", std::move(rows)}};
}

inline AggregateTable aggregate_from_json(const nlohmann::json& j) {
    AggregateTable table;
    table.bin_count = j.at("bin_count").get<int>();
    table.mode = aggregation_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& r : j.at("rows")) {
        AggregateRow row;
        const auto& g = r.at("group");
        row.key.model = g.at("model").get<std::string>();
        row.key.dataset = g.at("dataset").get<std::string>();
        row.key.context_bucket = g.at("context_bucket").get<std::string>();
        row.key.regime = g.at("regime").get<std::string>();
        row.key.decoding = g.at("decoding").get<std::string>();
        row.n_summaries = r.at("n_summaries").get<long>();
        for (const auto& m : r.at("means"))
            row.means.push_back(m.is_null() ? std::optional<double>{}
                                            : std::optional<double>{m.get<double>()});
        row.counts = r.at("counts").get<std::vector<long>>();
        if (!r.at("sensitivity").is_null()) row.sensitivity = r["sensitivity"].get<double>();
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline bool AggregateTable::operator==(const AggregateTable& o) const {
    if (bin_count != o.bin_count || mode != o.mode || rows.size() != o.rows.size()) return false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& a = rows[i];
        const auto& b = o.rows[i];
        if (!(a.key == b.key) || a.means != b.means || a.counts != b.counts ||
            a.sensitivity != b.sensitivity || a.n_summaries != b.n_summaries)
            return false;
    }
    return true;
}

// Deterministic rendering: identical tables produce identical bytes.
inline std::string render(const AggregateTable& table, RenderFormat format) {
    switch (format) {
        case RenderFormat::markdown: return detail::render_markdown(table);
        case RenderFormat::csv: return detail::render_csv(table);
        case RenderFormat::json: return aggregate_to_json(table).dump(2) + "\n";
        default: return detail::render_svg(table);
    }
}

}  // namespace posfaith

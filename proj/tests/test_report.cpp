#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "posfaith/report.hpp"

using namespace posfaith;

namespace {

BinProfile profile_of(const std::vector<double>& means, const std::vector<long>& counts) {
    BinProfile p;
    p.bin_count = static_cast<int>(means.size());
    for (std::size_t i = 0; i < means.size(); ++i) {
        p.means.emplace_back(counts[i] > 0 ? std::optional<double>{means[i]}
                                           : std::optional<double>{});
        p.counts.push_back(counts[i]);
    }
    for (int k = 0; k <= p.bin_count; ++k) p.edges.push_back(20.0 * k);
    return p;
}

SummaryProfile summary_profile(const std::string& id, const GroupKey& key,
                               const std::vector<double>& means,
                               const std::vector<long>& counts) {
    SummaryProfile sp;
    sp.summary_id = id;
    sp.group = key;
    sp.profile = profile_of(means, counts);
    return sp;
}

GroupKey key_of(const std::string& model) {
    GroupKey key;
    key.model = model;
    key.dataset = "wiki";
    key.regime = "long";
    key.decoding = "greedy";
    return key;
}

}  // namespace

TEST_CASE("aggregate over a single summary equals its profile", "[report]") {
    const auto sp = summary_profile("s1", key_of("llama"),
                                    {0.81, 0.82, 0.79, 0.80, 0.75}, {3, 4, 2, 5, 1});
    for (const auto mode : {AggregationMode::fact_pooled, AggregationMode::summary_mean}) {
        const AggregateTable table = aggregate({sp}, mode);
        REQUIRE(table.rows.size() == 1);
        const auto& row = table.rows[0];
        for (std::size_t b = 0; b < 5; ++b)
            CHECK(*row.means[b] == Catch::Approx(*sp.profile.means[b]).margin(1e-12));
        REQUIRE(row.sensitivity.has_value());
        CHECK(*row.sensitivity == Catch::Approx(5.50).margin(0.01));
        CHECK(row.n_summaries == 1);
    }
}

TEST_CASE("pooling modes weight facts vs summaries", "[report]") {
    // bin 1: summary A mean 0.8 over 2 facts, summary B mean 0.6 over 6 facts
    const auto a = summary_profile("a", key_of("m"), {0.8, 0.5, 0.5, 0.5, 0.5},
                                   {2, 1, 1, 1, 1});
    const auto b = summary_profile("b", key_of("m"), {0.6, 0.5, 0.5, 0.5, 0.5},
                                   {6, 1, 1, 1, 1});
    const AggregateTable pooled = aggregate({a, b}, AggregationMode::fact_pooled);
    REQUIRE(pooled.rows.size() == 1);
    CHECK(*pooled.rows[0].means[0] == Catch::Approx(0.65).margin(1e-12));  // (0.8*2+0.6*6)/8
    CHECK(pooled.rows[0].counts[0] == 8);

    const AggregateTable averaged = aggregate({a, b}, AggregationMode::summary_mean);
    CHECK(*averaged.rows[0].means[0] == Catch::Approx(0.7).margin(1e-12));
}

TEST_CASE("aggregate groups by key and rejects mixed bin counts", "[report]") {
    const auto a = summary_profile("a", key_of("llama"), {0.8, 0.8, 0.8, 0.8, 0.8},
                                   {1, 1, 1, 1, 1});
    const auto b = summary_profile("b", key_of("qwen"), {0.9, 0.9, 0.9, 0.9, 0.9},
                                   {1, 1, 1, 1, 1});
    const AggregateTable table = aggregate({b, a});  // insertion order reversed
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].key.model == "llama");  // sorted by key
    CHECK(table.rows[1].key.model == "qwen");

    auto ten = summary_profile("c", key_of("llama"),
                               std::vector<double>(10, 0.8), std::vector<long>(10, 1));
    CHECK_THROWS_WITH(aggregate({a, ten}), Catch::Matchers::ContainsSubstring("mixed bin counts"));
}

TEST_CASE("empty-bin summaries drop out of summary_mean per bin", "[report]") {
    const auto a = summary_profile("a", key_of("m"), {0.8, 0.0, 0.5, 0.5, 0.5},
                                   {2, 0, 1, 1, 1});  // bin 2 empty
    const auto b = summary_profile("b", key_of("m"), {0.6, 0.4, 0.5, 0.5, 0.5},
                                   {1, 3, 1, 1, 1});
    const AggregateTable averaged = aggregate({a, b}, AggregationMode::summary_mean);
    CHECK(*averaged.rows[0].means[1] == Catch::Approx(0.4));  // only b contributes
    const AggregateTable pooled = aggregate({a, b}, AggregationMode::fact_pooled);
    CHECK(*pooled.rows[0].means[1] == Catch::Approx(0.4));
    CHECK(pooled.rows[0].counts[1] == 3);
}

TEST_CASE("raw_agreement reproduces the published numbers", "[report]") {
    auto lists_with_matches = [](std::size_t total, std::size_t matches) {
        std::vector<bool> a(total, true), b(total, true);
        for (std::size_t i = matches; i < total; ++i) b[i] = false;
        return std::make_pair(a, b);
    };
    {
        const auto [a, b] = lists_with_matches(543, 515);
        CHECK(std::round(raw_agreement(a, b) * 10.0) / 10.0 == 94.8);
    }
    {
        const auto [a, b] = lists_with_matches(1569, 1541);
        CHECK(std::round(raw_agreement(a, b) * 10.0) / 10.0 == 98.2);
    }
    {
        const std::vector<bool> same = {true, false, true};
        CHECK(raw_agreement(same, same) == 100.0);
    }
    CHECK_THROWS_AS(raw_agreement({}, {}), DataError);
    CHECK_THROWS_AS(raw_agreement({true}, {true, false}), DataError);
}

TEST_CASE("raw_agreement is symmetric and permutation-invariant", "[report]") {
    std::mt19937 rng(101);
    for (int round = 0; round < 30; ++round) {
        const std::size_t n = 1 + rng() % 200;
        std::vector<bool> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng() % 2 == 0;
            b[i] = rng() % 2 == 0;
        }
        const double forward = raw_agreement(a, b);
        CHECK(raw_agreement(b, a) == forward);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<bool> pa(n), pb(n);
        for (std::size_t i = 0; i < n; ++i) {
            pa[i] = a[order[i]];
            pb[i] = b[order[i]];
        }
        CHECK(raw_agreement(pa, pb) == forward);
    }
}

TEST_CASE("markdown render bolds the max bin and underlines the min", "[report]") {
    const auto sp = summary_profile("s1", key_of("llama"),
                                    {0.81, 0.82, 0.79, 0.80, 0.75}, {1, 1, 1, 1, 1});
    const std::string md = render(aggregate({sp}), RenderFormat::markdown);
    CHECK(md.find("**0.82**") != std::string::npos);
    CHECK(md.find("<u>0.75</u>") != std::string::npos);
    CHECK(md.find("5.50") != std::string::npos);
    CHECK(md.find("llama/wiki/long/greedy") != std::string::npos);
}

TEST_CASE("csv render handles empty tables and empty cells", "[report]") {
    const AggregateTable empty;
    const std::string csv = render(empty, RenderFormat::csv);
    CHECK(csv == "model,dataset,context_bucket,regime,decoding,n_summaries,sensitivity\n");

    const auto sp = summary_profile("s1", key_of("llama"), {0.8, 0.0, 0.8, 0.8, 0.8},
                                    {1, 0, 1, 1, 1});
    const std::string with_hole = render(aggregate({sp}), RenderFormat::csv);
    CHECK(with_hole.find(",0.80,,0.80") != std::string::npos);  // empty bin cell
    CHECK(with_hole.back() == '\n');
}

TEST_CASE("json render round-trips the table", "[report]") {
    const auto a = summary_profile("a", key_of("llama"),
                                   {0.81, 0.82, 0.79, 0.80, 0.75}, {3, 4, 2, 5, 1});
    const auto b = summary_profile("b", key_of("qwen"), {0.86, 0.83, 0.83, 0.82, 0.84},
                                   {2, 2, 2, 2, 2});
    const AggregateTable table = aggregate({a, b});
    const std::string rendered = render(table, RenderFormat::json);
    const AggregateTable back = aggregate_from_json(nlohmann::json::parse(rendered));
    CHECK(back == table);
}

TEST_CASE("render is deterministic", "[report]") {
    const auto sp = summary_profile("s", key_of("llama"),
                                    {0.81, 0.82, 0.79, 0.80, 0.75}, {2, 3, 4, 5, 6});
    const AggregateTable table = aggregate({sp});
    for (const auto format : {RenderFormat::markdown, RenderFormat::csv, RenderFormat::json,
                              RenderFormat::svg_lines}) {
        CHECK(render(table, format) == render(table, format));
    }
    const std::string svg = render(table, RenderFormat::svg_lines);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
}

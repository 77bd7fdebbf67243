#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "posfaith/errors.hpp"

namespace posfaith {

// Decoder self-attention over the full prompt+output sequence, averaged
// across layers and heads. Row i is the attending token, column j the
// attended token; causality means values[i][j] = 0 for j > i and each row
// sums to 1 over columns 0..i.
struct AttentionMatrix {
    int seq_len = 0;
    int prompt_len = 0;
    std::vector<double> values;  // seq_len x seq_len, row-major

    double at(int row, int col) const {
        return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(seq_len) +
                      static_cast<std::size_t>(col)];
    }
    double& at(int row, int col) {
        return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(seq_len) +
                      static_cast<std::size_t>(col)];
    }
};

// One of the 100-token blocks tiling [0, L); the final block carries the
// remainder and is normalized by its true length.
struct TokenBlock {
    int index = 0;
    int start = 0;
    int length = 0;
};

struct TokenSpan {
    int start = 0;
    int length = 0;
};

// The first, middle, and last output sentences in token coordinates.
struct TargetSentences {
    TokenSpan first;
    TokenSpan middle;
    TokenSpan last;
};

// Whether the matrix row or column is the attending token when aggregating.
// Causal decoder exports put the attending (later) token on the row;
// column_attends covers transposed exports.
enum class Orientation { row_attends, column_attends };

inline Orientation orientation_from_string(std::string_view s) {
    if (s == "rows" || s == "row_attends") return Orientation::row_attends;
    if (s == "columns" || s == "column_attends") return Orientation::column_attends;
    throw DataError("unknown orientation: " + std::string(s));
}

// Checks causality and row stochasticity. Rows whose sums deviate from 1 by
// at most `renorm_tol` are renormalized (tolerates float16 exports); larger
// deviations are corruption and throw.
inline void validate_and_normalize(AttentionMatrix& m, double renorm_tol = 1e-3,
                                   double check_tol = 1e-4) {
    const int n = m.seq_len;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j)
            if (m.at(i, j) != 0.0)
                throw DataError("attention matrix not causal: values[" + std::to_string(i) +
                                "][" + std::to_string(j) + "] = " + std::to_string(m.at(i, j)));
        double sum = 0.0;
        for (int j = 0; j <= i; ++j) sum += m.at(i, j);
        if (std::abs(sum - 1.0) > renorm_tol)
            throw DataError("attention row " + std::to_string(i) + " sums to " +
                            std::to_string(sum) + ", outside renormalization tolerance");
        if (std::abs(sum - 1.0) > 0.0)
            for (int j = 0; j <= i; ++j) m.at(i, j) /= sum;
        double check = 0.0;
        for (int j = 0; j <= i; ++j) check += m.at(i, j);
        if (std::abs(check - 1.0) > check_tol)
            throw DataError("attention row " + std::to_string(i) +
                            " failed post-normalization check");
    }
}

// Loads an attention bundle directory holding meta.json and matrix.f32.
// meta.json: {"seq_len", "prompt_len", "layers", "heads", "layout"} with
// layout "avg" (one matrix) or "stack" (layers x heads matrices, mean-reduced
// here). matrix.f32 is row-major little-endian float32.
inline AttentionMatrix load_attention(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path meta_path = fs::path(dir) / "meta.json";
    const fs::path matrix_path = fs::path(dir) / "matrix.f32";

    std::ifstream meta_in(meta_path);
    if (!meta_in) throw DataError("cannot open " + meta_path.string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed meta.json: " + std::string(e.what()));
    }

    AttentionMatrix m;
    m.seq_len = meta.at("seq_len").get<int>();
    m.prompt_len = meta.at("prompt_len").get<int>();
    const int layers = meta.value("layers", 1);
    const int heads = meta.value("heads", 1);
    const std::string layout = meta.value("layout", "avg");
    if (m.seq_len < 1) throw DataError("seq_len must be >= 1");
    if (m.prompt_len < 0 || m.prompt_len > m.seq_len)
        throw DataError("prompt_len outside [0, seq_len]");

    const std::size_t cells = static_cast<std::size_t>(m.seq_len) * static_cast<std::size_t>(m.seq_len);
    std::size_t matrices = 1;
    if (layout == "stack") {
        if (layers < 1 || heads < 1) throw DataError("stack layout needs layers, heads >= 1");
        matrices = static_cast<std::size_t>(layers) * static_cast<std::size_t>(heads);
    } else if (layout != "avg") {
        throw DataError("unknown attention layout: " + layout);
    }
    const std::size_t expected_bytes = matrices * cells * sizeof(float);

    std::ifstream in(matrix_path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("cannot open " + matrix_path.string());
    const auto actual_bytes = static_cast<std::size_t>(in.tellg());
    if (actual_bytes != expected_bytes)
        throw DataError("matrix.f32 size mismatch: expected " + std::to_string(expected_bytes) +
                        " bytes, got " + std::to_string(actual_bytes));
    in.seekg(0);

    m.values.assign(cells, 0.0);
    std::vector<float> buffer(cells);
    for (std::size_t k = 0; k < matrices; ++k) {
        in.read(reinterpret_cast<char*>(buffer.data()),
                static_cast<std::streamsize>(cells * sizeof(float)));
        if (!in) throw DataError("short read from " + matrix_path.string());
        for (std::size_t i = 0; i < cells; ++i) m.values[i] += static_cast<double>(buffer[i]);
    }
    if (matrices > 1)
        for (auto& v : m.values) v /= static_cast<double>(matrices);

    validate_and_normalize(m);
    return m;
}

// Output-sentence token spans from the bundle's spans.json:
//   {"sentences": [{"start": int, "length": int}, ...]}  (absolute offsets)
inline std::vector<TokenSpan> load_token_spans(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path path = fs::path(dir) / "spans.json";
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed spans.json: " + std::string(e.what()));
    }
    std::vector<TokenSpan> spans;
    for (const auto& s : j.at("sentences"))
        spans.push_back({s.at("start").get<int>(), s.at("length").get<int>()});
    return spans;
}

inline std::vector<TokenBlock> partition_blocks(int seq_len, int block_tokens = 100) {
    if (seq_len < 1) throw DataError("seq_len must be >= 1");
    if (block_tokens < 1) throw DataError("block_tokens must be >= 1");
    std::vector<TokenBlock> blocks;
    for (int start = 0, k = 0; start < seq_len; start += block_tokens, ++k)
        blocks.push_back({k, start, std::min(block_tokens, seq_len - start)});
    return blocks;
}

// first = sentence 0, last = sentence S-1, middle = sentence floor((S-1)/2);
// with one sentence all three coincide.
inline TargetSentences select_targets(const std::vector<TokenSpan>& sentence_spans) {
    if (sentence_spans.empty()) throw DataError("no output sentences to target");
    const std::size_t s = sentence_spans.size();
    TargetSentences t;
    t.first = sentence_spans.front();
    t.middle = sentence_spans[(s - 1) / 2];
    t.last = sentence_spans.back();
    return t;
}

// Attn(k -> target) = (1 / (|block| * T)) * sum over block tokens i and
// target tokens j of attn(x_i -> x_j). With column_attends the transposed
// entry attn(x_j -> x_i) is summed instead.
inline double block_sentence_attention(const AttentionMatrix& m, const TokenBlock& block,
                                       const TokenSpan& target,
                                       Orientation orientation = Orientation::row_attends) {
    if (block.start < 0 || block.start + block.length > m.seq_len)
        throw DataError("block outside matrix bounds");
    if (target.start < 0 || target.start + target.length > m.seq_len)
        throw DataError("target span outside matrix bounds");
    if (block.length < 1 || target.length < 1)
        throw DataError("block and target must be non-empty");
    double sum = 0.0;
    for (int i = block.start; i < block.start + block.length; ++i)
        for (int j = target.start; j < target.start + target.length; ++j)
            sum += orientation == Orientation::row_attends ? m.at(i, j) : m.at(j, i);
    return sum / (static_cast<double>(block.length) * static_cast<double>(target.length));
}

// One row per block: the data behind the positional attention profile.
struct AttentionProfileRow {
    int block_index = 0;
    double attn_first = 0.0;
    double attn_middle = 0.0;
    double attn_last = 0.0;
};

inline std::vector<AttentionProfileRow> attention_profile(
    const AttentionMatrix& m, const TargetSentences& targets,
    Orientation orientation = Orientation::row_attends, int block_tokens = 100) {
    std::vector<AttentionProfileRow> rows;
    for (const auto& block : partition_blocks(m.seq_len, block_tokens)) {
        AttentionProfileRow row;
        row.block_index = block.index;
        row.attn_first = block_sentence_attention(m, block, targets.first, orientation);
        row.attn_middle = block_sentence_attention(m, block, targets.middle, orientation);
        row.attn_last = block_sentence_attention(m, block, targets.last, orientation);
        rows.push_back(row);
    }
    return rows;
}

inline std::string attention_profile_csv(const std::vector<AttentionProfileRow>& rows) {
    std::string out = "block_index,attn_first,attn_middle,attn_last\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", r.block_index, r.attn_first,
                      r.attn_middle, r.attn_last);
        out += buf;
    }
    return out;
}

}  // namespace posfaith

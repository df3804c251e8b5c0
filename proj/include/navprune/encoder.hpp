#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "navprune/linalg.hpp"

namespace navprune {

// Opaque token identifier. Sequences built by make_sequence use the original
// position, which doubles as the tie-break key everywhere.
using TokenId = std::size_t;

// Per-token importance (column sums of attention, summed over heads).
using ImportanceScores = std::map<TokenId, double>;

// Ids whose attention rows are skipped (selective attention sum).
using QuerySkip = std::set<TokenId>;

struct EncoderConfig {
    std::size_t layers = 1;
    std::size_t heads = 1;
    std::size_t hidden_dim = 8;
    std::size_t ffn_mult = 4;
    std::uint64_t seed = 0;

    std::size_t head_dim() const { return hidden_dim / heads; }
    void validate() const;
};

struct LayerWeights {
    std::vector<Matrix> query;  // per head, d x d_head
    std::vector<Matrix> key;
    std::vector<Matrix> value;
    Matrix output;   // d x d
    Matrix ffn_in;   // d x (ffn_mult * d)
    Matrix ffn_out;  // (ffn_mult * d) x d
};

struct EncoderWeights {
    EncoderConfig config;
    std::vector<LayerWeights> layers;
};

EncoderWeights init_weights(const EncoderConfig& config);

struct FeatureToken {
    TokenId id = 0;
    std::vector<double> feature;
    std::vector<std::size_t> origins;  // original positions covered by this token
};

struct FeatureSeq {
    std::vector<FeatureToken> tokens;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
    std::vector<TokenId> ids() const;
    // Position of `id`, or size() when absent.
    std::size_t index_of(TokenId id) const;
};

// Ids 0..n-1 with origins {i}.
FeatureSeq make_sequence(const std::vector<std::vector<double>>& features);

// Adds fixed sinusoidal offsets by sequence position.
void add_positional_offsets(FeatureSeq& seq, double scale = 0.1);

struct AttentionRecord {
    std::size_t layer = 0;
    std::vector<TokenId> ids;           // row/column order
    std::vector<Matrix> heads;          // len x len, rows = queries
    std::vector<bool> computed_rows;    // false for skipped queries (all-zero rows)
};

ImportanceScores importance_scores(const AttentionRecord& record);
double total_score(const ImportanceScores& scores);

// Attention half of a layer: softmax matrices plus the concatenated head
// outputs Z (len x d), before the output projection.
struct AttentionPhase {
    AttentionRecord record;
    Matrix mixed;
};

AttentionPhase compute_attention(const FeatureSeq& seq, const EncoderWeights& weights,
                                 std::size_t layer, const QuerySkip* skip = nullptr,
                                 MacCounter* counter = nullptr);

// Output projection, residual, feed-forward, residual. `mixed` rows align with seq.
FeatureSeq finish_layer(const FeatureSeq& seq, const Matrix& mixed, const EncoderWeights& weights,
                        std::size_t layer, MacCounter* counter = nullptr);

struct LayerOutput {
    FeatureSeq seq;
    AttentionRecord record;
};

LayerOutput attention_forward(const FeatureSeq& seq, const EncoderWeights& weights,
                              std::size_t layer, const QuerySkip* skip = nullptr,
                              MacCounter* counter = nullptr);

// What a pruning hook asks the stack to do after a layer's attention.
struct LayerEdit {
    std::vector<TokenId> remove;
    // (absorbed, kept): the kept token becomes the average of both.
    std::vector<std::pair<TokenId, TokenId>> merge;

    std::size_t reduction() const { return remove.size() + merge.size(); }
};

struct LayerContext {
    std::size_t layer;
    const FeatureSeq& input;
    const AttentionRecord& record;
    const ImportanceScores& scores;
};

using PruneHook = std::function<LayerEdit(const LayerContext&)>;

struct StackRun {
    FeatureSeq output;
    std::vector<ImportanceScores> scores;   // per layer, computed on the layer input
    std::vector<std::size_t> lengths;       // layer inputs plus the final output
    std::vector<std::size_t> active_rows;   // attention rows computed per layer
    std::vector<std::size_t> removed;       // tokens removed or merged away per layer
};

StackRun run_stack(FeatureSeq seq, const EncoderWeights& weights, const PruneHook& hook = {},
                   const QuerySkip* skip = nullptr, MacCounter* counter = nullptr);

}  // namespace navprune

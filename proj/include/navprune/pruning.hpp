#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "navprune/encoder.hpp"
#include "navprune/tokens.hpp"
#include "navprune/topo_map.hpp"
#include "navprune/vocabulary.hpp"

namespace navprune {

enum class Modality { instruction, views, history };

std::string to_string(Modality m);

struct PruneBudget {
    double retain_fraction = 1.0;
    std::vector<std::size_t> per_layer_removals;
    Modality modality = Modality::views;

    std::size_t total() const;
};

PruneBudget schedule_budget(double retain_fraction, std::size_t layers, std::size_t prunable_count,
                            Modality modality = Modality::views);

struct ViewPartition {
    std::vector<TokenId> action_ids;
    std::vector<TokenId> background_ids;

    bool is_action(TokenId id) const;
    std::size_t size() const { return action_ids.size() + background_ids.size(); }
};

enum class StrategyKind { none, bgp, vpp, btp, random, cascade, fastv, tome };

std::string to_string(StrategyKind kind);
StrategyKind parse_strategy_kind(const std::string& name);

struct StrategySpec {
    StrategyKind kind = StrategyKind::none;
    std::size_t fastv_prune_layer = 2;
    std::size_t tome_merges = 0;  // 0: take the per-layer count from the budget
    std::size_t k_btp = 6;
    bool protect_action_views = true;
    std::uint64_t seed = 0;  // random strategy only

    void validate() const;
};

// Outcome of a selection: kept ids in original order, removed ids sorted.
struct Selection {
    std::vector<TokenId> retained;
    std::vector<TokenId> removed;
    std::size_t clamped = 0;  // requested removals that could not be made
};

// Removes the k lowest-scoring ids among `candidates`; ties remove the lower id
// first. `order` lists every id in output order.
Selection lowest_k(const std::vector<TokenId>& order, const std::vector<TokenId>& candidates,
                   const ImportanceScores& scores, std::size_t k);

Selection bgp_prune(const ViewPartition& partition, const ImportanceScores& scores, std::size_t k);

// Keeps the k_btp highest-scoring unvisited nodes; ties keep the earlier discovery.
TopoMap btp_prune(TopoMap map, std::size_t k_btp);

// The leading start token (id 0 when it reads "<s>") is never prunable; the
// trailing end token always counts as a vocabulary member.
Selection vpp_prune(const TokenSeq& tokens, const Vocabulary& vocab, const ImportanceScores& scores,
                    std::size_t k);

// Same rule over an arbitrary live subset, used layer by layer in the stack.
Selection vpp_select(const std::vector<TokenId>& order, const std::vector<TokenId>& members,
                     const std::vector<TokenId>& others, const ImportanceScores& scores,
                     std::size_t k);

Selection cascade_prune(const std::vector<TokenId>& order, const ImportanceScores& cumulative,
                        std::size_t k, const std::set<TokenId>& protected_ids = {});

// Single-shot removal of the total_k lowest-scoring tokens.
Selection fastv_prune(const std::vector<TokenId>& order, const ImportanceScores& scores,
                      std::size_t total_k, const std::set<TokenId>& protected_ids = {});

// FastV removes tokens after the attention of layer prune_layer - 1, so layer
// prune_layer is the first to see the shorter sequence.
bool fastv_fires(std::size_t layer, std::size_t prune_layer);

Selection random_prune(const std::vector<TokenId>& order, std::size_t k, std::uint64_t seed,
                       const std::set<TokenId>& protected_ids = {});

// Bipartite soft matching: even positions form set A, odd positions set B
// (protected tokens excluded). Each A token pairs with its most cosine-similar
// B token and the m most similar pairs merge. Pairs are (absorbed A, kept B).
std::vector<std::pair<TokenId, TokenId>> tome_pairs(const FeatureSeq& seq, std::size_t merges,
                                                     const std::set<TokenId>& protected_ids = {});
FeatureSeq tome_merge(const FeatureSeq& seq, std::size_t merges,
                      const std::set<TokenId>& protected_ids = {});

QuerySkip sas_mask(const ViewPartition& partition);

// Per-stack pruning driver: turns a strategy plus budget into a PruneHook.
// Scores come from the layer's attention unless fixed scores are given.
class StackPruner {
public:
    StackPruner(StrategySpec spec, PruneBudget budget, std::size_t layers);

    // Ids that may never be removed (action views under protection, the start token).
    void set_protected(std::set<TokenId> ids) { protected_ = std::move(ids); }
    // Vocabulary members for VPP: ids whose text is in the vocabulary.
    void set_vocabulary_members(std::set<TokenId> ids) { members_ = std::move(ids); }
    void set_fixed_scores(ImportanceScores scores) { fixed_ = std::move(scores); has_fixed_ = true; }

    LayerEdit operator()(const LayerContext& ctx);
    PruneHook hook();

    std::size_t removed() const { return removed_; }
    std::size_t clamped() const { return clamped_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::size_t layer_budget(std::size_t layer) const;

    StrategySpec spec_;
    PruneBudget budget_;
    std::size_t layers_;
    std::set<TokenId> protected_;
    std::set<TokenId> members_;
    ImportanceScores fixed_;
    bool has_fixed_ = false;
    ImportanceScores cumulative_;
    std::size_t removed_ = 0;
    std::size_t clamped_ = 0;
    std::vector<std::string> warnings_;
};

}  // namespace navprune

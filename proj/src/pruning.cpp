#include "navprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "navprune/rng.hpp"

namespace navprune {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::instruction: return "instruction";
        case Modality::views: return "views";
        case Modality::history: return "history";
    }
    return "?";
}

std::size_t PruneBudget::total() const {
    std::size_t s = 0;
    for (std::size_t k : per_layer_removals) s += k;
    return s;
}

PruneBudget schedule_budget(double retain_fraction, std::size_t layers, std::size_t prunable_count,
                            Modality modality) {
    if (!(retain_fraction > 0.0) || retain_fraction > 1.0)
        throw std::invalid_argument("retain_fraction must be in (0, 1]");
    if (layers < 1) throw std::invalid_argument("layers must be at least 1");
    const auto total = static_cast<std::size_t>(
        std::llround((1.0 - retain_fraction) * static_cast<double>(prunable_count)));
    PruneBudget b{retain_fraction, std::vector<std::size_t>(layers, total / layers), modality};
    for (std::size_t i = 0; i < total % layers; ++i) ++b.per_layer_removals[i];
    return b;
}

bool ViewPartition::is_action(TokenId id) const {
    return std::find(action_ids.begin(), action_ids.end(), id) != action_ids.end();
}

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::none: return "none";
        case StrategyKind::bgp: return "bgp";
        case StrategyKind::vpp: return "vpp";
        case StrategyKind::btp: return "btp";
        case StrategyKind::random: return "random";
        case StrategyKind::cascade: return "cascade";
        case StrategyKind::fastv: return "fastv";
        case StrategyKind::tome: return "tome";
    }
    return "?";
}

StrategyKind parse_strategy_kind(const std::string& name) {
    for (auto k : {StrategyKind::none, StrategyKind::bgp, StrategyKind::vpp, StrategyKind::btp,
                   StrategyKind::random, StrategyKind::cascade, StrategyKind::fastv,
                   StrategyKind::tome})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

void StrategySpec::validate() const {
    if (kind == StrategyKind::fastv && fastv_prune_layer < 1)
        throw std::invalid_argument("fastv prune_layer must be at least 1");
}

namespace {

double score_of(const ImportanceScores& scores, TokenId id) {
    auto it = scores.find(id);
    if (it == scores.end())
        throw std::invalid_argument("no importance score for token " + std::to_string(id));
    return it->second;
}

Selection split(const std::vector<TokenId>& order, std::vector<TokenId> removed) {
    std::sort(removed.begin(), removed.end());
    Selection s;
    for (TokenId id : order)
        if (!std::binary_search(removed.begin(), removed.end(), id)) s.retained.push_back(id);
    s.removed = std::move(removed);
    return s;
}

// Candidates ordered for removal: lowest score first, then lowest id.
std::vector<TokenId> removal_order(std::vector<TokenId> ids, const ImportanceScores& scores) {
    std::vector<std::pair<double, TokenId>> keyed;
    keyed.reserve(ids.size());
    for (TokenId id : ids) keyed.emplace_back(score_of(scores, id), id);
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t i = 0; i < keyed.size(); ++i) ids[i] = keyed[i].second;
    return ids;
}

std::vector<TokenId> unprotected(const std::vector<TokenId>& order,
                                 const std::set<TokenId>& protected_ids) {
    std::vector<TokenId> out;
    for (TokenId id : order)
        if (!protected_ids.count(id)) out.push_back(id);
    return out;
}

}  // namespace

Selection lowest_k(const std::vector<TokenId>& order, const std::vector<TokenId>& candidates,
                   const ImportanceScores& scores, std::size_t k) {
    auto ranked = removal_order(candidates, scores);
    const std::size_t take = std::min(k, ranked.size());
    ranked.resize(take);
    Selection s = split(order, std::move(ranked));
    s.clamped = k - take;
    return s;
}

Selection bgp_prune(const ViewPartition& partition, const ImportanceScores& scores, std::size_t k) {
    std::vector<TokenId> order = partition.action_ids;
    order.insert(order.end(), partition.background_ids.begin(), partition.background_ids.end());
    std::sort(order.begin(), order.end());
    return lowest_k(order, partition.background_ids, scores, k);
}

TopoMap btp_prune(TopoMap map, std::size_t k_btp) {
    auto open = map.unvisited();
    if (open.size() <= k_btp) return map;
    std::sort(open.begin(), open.end(), [&](NodeId a, NodeId b) {
        const MapNode& na = map.node(a);
        const MapNode& nb = map.node(b);
        if (na.latest_score != nb.latest_score) return na.latest_score > nb.latest_score;
        if (na.discovery_step != nb.discovery_step) return na.discovery_step < nb.discovery_step;
        return a < b;
    });
    for (std::size_t i = k_btp; i < open.size(); ++i) map.erase_unvisited(open[i]);
    return map;
}

Selection vpp_select(const std::vector<TokenId>& order, const std::vector<TokenId>& members,
                     const std::vector<TokenId>& others, const ImportanceScores& scores,
                     std::size_t k) {
    if (k > members.size() + others.size())
        throw std::invalid_argument("budget exceeds prunable tokens");
    std::vector<TokenId> removed;
    if (members.size() >= k) {
        removed = removal_order(members, scores);
        removed.resize(k);
    } else {
        removed = members;
        auto rest = removal_order(others, scores);
        rest.resize(k - members.size());
        removed.insert(removed.end(), rest.begin(), rest.end());
    }
    return split(order, std::move(removed));
}

Selection vpp_prune(const TokenSeq& tokens, const Vocabulary& vocab, const ImportanceScores& scores,
                    std::size_t k) {
    std::vector<TokenId> order, members, others;
    for (TokenId id = 0; id < tokens.size(); ++id) {
        order.push_back(id);
        const std::string& text = tokens[id].text;
        if (id == 0 && text == kStartToken) continue;
        if (text == kEndToken || vocab.contains(text)) members.push_back(id);
        else others.push_back(id);
    }
    return vpp_select(order, members, others, scores, k);
}

Selection cascade_prune(const std::vector<TokenId>& order, const ImportanceScores& cumulative,
                        std::size_t k, const std::set<TokenId>& protected_ids) {
    return lowest_k(order, unprotected(order, protected_ids), cumulative, k);
}

Selection fastv_prune(const std::vector<TokenId>& order, const ImportanceScores& scores,
                      std::size_t total_k, const std::set<TokenId>& protected_ids) {
    return lowest_k(order, unprotected(order, protected_ids), scores, total_k);
}

bool fastv_fires(std::size_t layer, std::size_t prune_layer) { return layer + 1 == prune_layer; }

Selection random_prune(const std::vector<TokenId>& order, std::size_t k, std::uint64_t seed,
                       const std::set<TokenId>& protected_ids) {
    auto pool = unprotected(order, protected_ids);
    Rng rng(seed);
    rng.shuffle(pool);
    const std::size_t take = std::min(k, pool.size());
    pool.resize(take);
    Selection s = split(order, std::move(pool));
    s.clamped = k - take;
    return s;
}

std::vector<std::pair<TokenId, TokenId>> tome_pairs(const FeatureSeq& seq, std::size_t merges,
                                                     const std::set<TokenId>& protected_ids) {
    std::vector<std::size_t> a_side, b_side;
    std::size_t eligible = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (protected_ids.count(seq.tokens[i].id)) continue;
        (eligible++ % 2 == 0 ? a_side : b_side).push_back(i);
    }
    if (b_side.empty()) return {};

    struct Candidate {
        double similarity;
        std::size_t a;
        std::size_t b;
    };
    std::vector<Candidate> best;
    for (std::size_t a : a_side) {
        Candidate c{-INFINITY, a, b_side.front()};
        for (std::size_t b : b_side) {
            const double s = cosine(seq.tokens[a].feature, seq.tokens[b].feature);
            if (s > c.similarity) c = {s, a, b};
        }
        best.push_back(c);
    }
    std::stable_sort(best.begin(), best.end(),
                     [](const Candidate& x, const Candidate& y) { return x.similarity > y.similarity; });
    const std::size_t m = std::min({merges, best.size(), seq.size() / 2});
    std::vector<std::pair<TokenId, TokenId>> pairs;
    for (std::size_t i = 0; i < m; ++i)
        pairs.emplace_back(seq.tokens[best[i].a].id, seq.tokens[best[i].b].id);
    return pairs;
}

FeatureSeq tome_merge(const FeatureSeq& seq, std::size_t merges,
                      const std::set<TokenId>& protected_ids) {
    const auto pairs = tome_pairs(seq, merges, protected_ids);
    std::map<std::size_t, std::vector<std::size_t>> groups;
    std::vector<bool> drop(seq.size(), false);
    for (const auto& [absorbed, kept] : pairs) {
        const std::size_t a = seq.index_of(absorbed);
        drop[a] = true;
        groups[seq.index_of(kept)].push_back(a);
    }
    FeatureSeq out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (drop[i]) continue;
        FeatureToken t = seq.tokens[i];
        auto it = groups.find(i);
        if (it != groups.end()) {
            for (std::size_t a : it->second) {
                for (std::size_t c = 0; c < t.feature.size(); ++c) t.feature[c] += seq.tokens[a].feature[c];
                t.origins.insert(t.origins.end(), seq.tokens[a].origins.begin(),
                                 seq.tokens[a].origins.end());
            }
            const double n = static_cast<double>(it->second.size() + 1);
            for (double& x : t.feature) x /= n;
            std::sort(t.origins.begin(), t.origins.end());
        }
        out.tokens.push_back(std::move(t));
    }
    return out;
}

QuerySkip sas_mask(const ViewPartition& partition) {
    return {partition.background_ids.begin(), partition.background_ids.end()};
}

StackPruner::StackPruner(StrategySpec spec, PruneBudget budget, std::size_t layers)
    : spec_(spec), budget_(std::move(budget)), layers_(layers) {
    spec_.validate();
    if (budget_.per_layer_removals.size() != layers_)
        throw std::invalid_argument("budget does not match stack depth");
    if (spec_.kind == StrategyKind::fastv && spec_.fastv_prune_layer >= layers_) {
        warnings_.push_back("fastv prune_layer " + std::to_string(spec_.fastv_prune_layer) +
                            " clamped to " + std::to_string(layers_ - 1) + " for a " +
                            std::to_string(layers_) + "-layer stack");
        spec_.fastv_prune_layer = std::max<std::size_t>(1, layers_ - 1);
    }
}

std::size_t StackPruner::layer_budget(std::size_t layer) const {
    if (spec_.kind == StrategyKind::fastv)
        return fastv_fires(layer, spec_.fastv_prune_layer) ? budget_.total() : 0;
    return budget_.per_layer_removals.at(layer);
}

LayerEdit StackPruner::operator()(const LayerContext& ctx) {
    LayerEdit edit;
    const ImportanceScores& scores = has_fixed_ ? fixed_ : ctx.scores;
    const std::vector<TokenId> order = ctx.input.ids();
    if (spec_.kind == StrategyKind::cascade)
        for (TokenId id : order) cumulative_[id] += score_of(scores, id);

    const std::size_t k = layer_budget(ctx.layer);
    if (k == 0 || spec_.kind == StrategyKind::none || spec_.kind == StrategyKind::btp) return edit;

    Selection sel;
    switch (spec_.kind) {
        case StrategyKind::bgp:
            sel = lowest_k(order, unprotected(order, protected_), scores, k);
            break;
        case StrategyKind::vpp: {
            std::vector<TokenId> members, others;
            for (TokenId id : unprotected(order, protected_))
                (members_.count(id) ? members : others).push_back(id);
            sel = vpp_select(order, members, others, scores, k);
            break;
        }
        case StrategyKind::cascade:
            sel = cascade_prune(order, cumulative_, k, protected_);
            break;
        case StrategyKind::fastv:
            sel = fastv_prune(order, scores, k, protected_);
            break;
        case StrategyKind::random:
            sel = random_prune(order, k, mix_seed(spec_.seed, ctx.layer), protected_);
            break;
        case StrategyKind::tome: {
            const std::size_t m = spec_.tome_merges ? spec_.tome_merges : k;
            edit.merge = tome_pairs(ctx.input, m, protected_);
            sel.clamped = m - edit.merge.size();
            break;
        }
        default:
            break;
    }
    edit.remove = sel.removed;
    removed_ += edit.reduction();
    if (sel.clamped > 0) {
        clamped_ += sel.clamped;
        warnings_.push_back("layer " + std::to_string(ctx.layer) + ": " +
                            std::to_string(sel.clamped) + " removals clamped");
    }
    return edit;
}

PruneHook StackPruner::hook() {
    return [this](const LayerContext& ctx) { return (*this)(ctx); };
}

}  // namespace navprune

#include "navprune/agent.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "navprune/linalg.hpp"
#include "navprune/rng.hpp"

namespace navprune {

std::string to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::stop: return "stop";
        case ActionKind::navigate: return "navigate";
        case ActionKind::backtrack: return "backtrack";
    }
    return "?";
}

std::string to_string(ImportanceSource source) {
    return source == ImportanceSource::oracle ? "oracle" : "attention";
}

ImportanceSource parse_importance_source(const std::string& text) {
    if (text == "oracle") return ImportanceSource::oracle;
    if (text == "attention") return ImportanceSource::attention;
    throw std::invalid_argument("importance source must be oracle or attention, got '" + text + "'");
}

ActionChoice step(const PolicyState& state, const std::vector<ViewCandidate>& panorama,
                  const TopoMap& map, const PolicyParams& params) {
    ActionChoice best{ActionKind::stop, map.current(), 0, params.theta_stop, 0.0, 0};
    if (state.pointer >= state.targets.size()) return best;  // nothing left to follow
    const auto& target = state.targets[state.pointer];

    // Candidates are visited in ascending id order and only a strictly higher
    // score replaces the incumbent, which yields the documented tie order.
    std::vector<const ViewCandidate*> views;
    for (const auto& v : panorama) views.push_back(&v);
    std::sort(views.begin(), views.end(), [](auto* a, auto* b) { return a->destination < b->destination; });
    for (const ViewCandidate* v : views) {
        const double s = cosine(v->feature, target);
        // Going back to a visited node needs a confident match.
        if (map.contains(v->destination) && map.node(v->destination).status == NodeStatus::visited &&
            s < params.tau)
            continue;
        if (s > best.score) best = {ActionKind::navigate, v->destination, v->view, s, s, 1};
    }
    for (NodeId id : map.unvisited()) {
        const auto hops = map.hops(map.current(), id);
        if (!hops) continue;
        const double match = cosine(map.node(id).feature, target);
        double s = match;
        for (std::size_t h = 0; h < *hops; ++h) s *= params.gamma;
        if (s > best.score) best = {ActionKind::backtrack, id, 0, s, match, *hops};
    }
    return best;
}

bool judge_success(const HouseGraph& house, NodeId stop_node, NodeId goal, std::size_t success_hops) {
    const auto d = house.distance(stop_node, goal);
    return d && *d <= success_hops;
}

ModelDims StackConfigs::dims() const {
    return {{language.layers, language.hidden_dim, language.ffn_mult},
            {view.layers, view.hidden_dim, view.ffn_mult},
            {cross.layers, cross.hidden_dim, cross.ffn_mult}};
}

Encoders Encoders::create(const StackConfigs& configs) {
    return {init_weights(configs.language), init_weights(configs.view), init_weights(configs.cross)};
}

EpisodeConfig reference_config(const EpisodeConfig& config) {
    EpisodeConfig ref = config;
    ref.instruction_strategy = StrategySpec{};
    ref.view_strategy = StrategySpec{};
    ref.k_btp.reset();
    ref.instruction_retain = 1.0;
    ref.view_retain = 1.0;
    ref.selective_attention = false;
    return ref;
}

namespace {

StackSchedule schedule_of(const StackRun& run) { return {run.lengths, run.active_rows}; }

std::vector<double> padded(const std::vector<double>& v, std::size_t dim) {
    if (v.size() == dim) return v;
    return std::vector<double>(dim, 0.0);
}

}  // namespace

EpisodeResult run_episode(const World& world, const EpisodeConfig& config, const Encoders& encoders,
                          const Vocabulary* vocabulary, MacCounter* counter) {
    const HouseGraph& house = world.house;
    const TokenSeq& tokens = world.instruction.tokens;
    const std::size_t dim = world.params.hidden_dim;
    if (encoders.language.config.hidden_dim != dim || encoders.view.config.hidden_dim != dim ||
        encoders.cross.config.hidden_dim != dim)
        throw std::invalid_argument("encoder width does not match the world feature width");
    const std::size_t t_max = config.t_max ? config.t_max : 3 * house.gt_path.size();
    const bool run_cross = config.run_cross_modal || config.importance == ImportanceSource::attention;
    const ModelDims dims{{encoders.language.config.layers, dim, encoders.language.config.ffn_mult},
                         {encoders.view.config.layers, dim, encoders.view.config.ffn_mult},
                         {encoders.cross.config.layers, dim, encoders.cross.config.ffn_mult}};

    EpisodeResult result;
    const std::uint64_t counted_before = counter ? counter->flops() : 0;

    // Instruction: encoded and pruned once.
    std::vector<std::vector<double>> raw;
    for (const auto& t : tokens) raw.push_back(t.embedding);
    FeatureSeq instruction = make_sequence(raw);
    add_positional_offsets(instruction);
    const std::size_t lan_layers = encoders.language.config.layers;
    const std::size_t lan_prunable = tokens.empty() ? 0 : tokens.size() - 1;
    StackPruner lan_pruner(config.instruction_strategy,
                           schedule_budget(config.instruction_retain, lan_layers, lan_prunable,
                                           Modality::instruction),
                           lan_layers);
    lan_pruner.set_protected({0});
    if (config.instruction_strategy.kind == StrategyKind::vpp) {
        if (!vocabulary) throw std::invalid_argument("missing vocabulary for VPP");
        std::set<TokenId> members;
        for (TokenId id = 1; id < tokens.size(); ++id)
            if (tokens[id].text == kEndToken || vocabulary->contains(tokens[id].text)) members.insert(id);
        lan_pruner.set_vocabulary_members(std::move(members));
    }
    if (config.importance == ImportanceSource::oracle) {
        OracleConfig oc = config.oracle;
        oc.seed = mix_seed(config.seed, 11);
        lan_pruner.set_fixed_scores(importance_oracle(world.instruction, oc));
    }
    const StackRun lan = run_stack(instruction, encoders.language, lan_pruner.hook(), nullptr, counter);
    result.instruction_schedule = schedule_of(lan);
    for (const auto& w : lan_pruner.warnings()) result.warnings.push_back("instruction: " + w);

    PolicyState state;
    for (const auto& t : lan.output.tokens)
        if (tokens.at(t.id).relevant) state.targets.push_back(tokens[t.id].embedding);

    TopoMap map(house.start);
    Rng node_rng(mix_seed(config.seed, 12));
    OracleConfig node_oracle = config.oracle;
    result.path.push_back(house.start);

    for (std::size_t decision = 0;; ++decision) {
        StepLog log;
        log.decision = decision;
        log.from = map.current();
        if (decision == 0) log.instruction_removed = tokens.size() - lan.output.size();
        log.instruction_tokens = lan.output.size();

        if (config.k_btp) {
            const std::size_t before = map.size();
            map = btp_prune(std::move(map), *config.k_btp);
            log.history_removed = before - map.size();
        }
        log.unvisited_after_prune = map.unvisited().size();

        // Panorama at the current node.
        const NodeId here = map.current();
        const auto& pano = world.panoramas.panoramas.at(here);
        std::vector<std::vector<double>> vraw;
        ViewPartition partition;
        for (TokenId h = 0; h < pano.size(); ++h) {
            vraw.push_back(pano[h].feature);
            (pano[h].kind == ViewKind::action ? partition.action_ids : partition.background_ids).push_back(h);
        }
        FeatureSeq views = make_sequence(vraw);
        add_positional_offsets(views);
        const std::size_t vis_layers = encoders.view.config.layers;
        StrategySpec vspec = config.view_strategy;
        vspec.seed = mix_seed(config.seed, 1000 + here);
        StackPruner vis_pruner(vspec, schedule_budget(config.view_retain, vis_layers, pano.size()), vis_layers);
        if (vspec.protect_action_views)
            vis_pruner.set_protected({partition.action_ids.begin(), partition.action_ids.end()});
        const QuerySkip skip = config.selective_attention ? sas_mask(partition) : QuerySkip{};
        const StackRun vis = run_stack(views, encoders.view, vis_pruner.hook(),
                                       config.selective_attention ? &skip : nullptr, counter);
        result.view_schedules.push_back(schedule_of(vis));
        for (const auto& w : vis_pruner.warnings()) result.warnings.push_back("views: " + w);
        log.views_removed = pano.size() - vis.output.size();
        log.view_tokens = vis.output.size();

        std::set<TokenId> kept;
        for (const auto& t : vis.output.tokens) kept.insert(t.id);
        std::vector<ViewCandidate> candidates;
        for (TokenId h : partition.action_ids) {
            if (!kept.count(h)) continue;
            std::vector<double> pooled = pano[h].feature;
            for (TokenId nb : {(h + pano.size() - 1) % pano.size(), (h + 1) % pano.size()}) {
                if (nb == h || !kept.count(nb) || pano[nb].kind != ViewKind::background) continue;
                for (std::size_t c = 0; c < dim; ++c) pooled[c] += pano[nb].feature[c];
            }
            candidates.push_back({h, *pano[h].destination, normalized(pooled)});
        }

        // History tokens: every node currently on the map.
        log.history_tokens = map.size();
        result.history_lengths.push_back(map.size());
        std::map<TokenId, double> view_scores;
        if (run_cross) {
            FeatureSeq cross;
            for (const auto& t : lan.output.tokens) cross.tokens.push_back({cross.size(), t.feature, {}});
            const std::size_t view_base = cross.size();
            for (const auto& t : vis.output.tokens) cross.tokens.push_back({cross.size(), t.feature, {}});
            for (const auto& [id, node] : map.nodes())
                cross.tokens.push_back({cross.size(), padded(node.feature, dim), {}});
            for (auto& t : cross.tokens) t.origins = {t.id};
            const StackRun cm = run_stack(std::move(cross), encoders.cross, {}, nullptr, counter);
            const ImportanceScores& last = cm.scores.back();
            for (std::size_t i = 0; i < vis.output.size(); ++i)
                view_scores[vis.output.tokens[i].id] = last.at(view_base + i);
        }

        const ActionChoice choice = step(state, candidates, map, config.policy);
        log.action = choice;

        for (const auto& c : candidates) {
            const double score = config.importance == ImportanceSource::attention
                                     ? view_scores.at(c.view)
                                     : node_importance(house, c.destination, node_oracle, node_rng);
            map.observe(here, c.destination, c.feature, score, decision);
        }
        result.log.push_back(log);
        result.decisions = decision + 1;

        if (choice.kind == ActionKind::stop) {
            result.steps += 1;
            result.success = judge_success(house, here, house.goal, config.success_hops);
            break;
        }
        if (choice.kind == ActionKind::navigate) {
            result.path.push_back(choice.target);
        } else {
            const auto route = map.route(here, choice.target);
            result.path.insert(result.path.end(), route.begin() + 1, route.end());
        }
        result.steps += choice.hops;
        map.move_to(choice.target);
        if (choice.match >= config.policy.tau) ++state.pointer;
        if (result.steps >= t_max) {
            result.capped = true;
            result.steps = t_max;
            result.success = false;
            break;
        }
    }

    result.flops = g_total(result.instruction_schedule, result.view_schedules, result.history_lengths,
                           dims, result.decisions);
    if (counter) result.instrumented_flops = counter->flops() - counted_before;
    return result;
}

std::string format_trace(const EpisodeResult& result) {
    std::string out;
    char buf[256];
    for (const auto& s : result.log) {
        std::snprintf(buf, sizeof buf,
                      "step=%zu kind=%s target=%zu score=%.6f hops=%zu instr=%zu views=%zu history=%zu "
                      "pruned_instr=%zu pruned_views=%zu pruned_history=%zu\n",
                      s.decision, to_string(s.action.kind).c_str(), s.action.target, s.action.score,
                      s.action.hops, s.instruction_tokens, s.view_tokens, s.history_tokens,
                      s.instruction_removed, s.views_removed, s.history_removed);
        out += buf;
    }
    return out;
}

}  // namespace navprune

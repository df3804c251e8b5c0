#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "navprune/encoder.hpp"
#include "navprune/flopsmeter.hpp"
#include "navprune/pruning.hpp"
#include "navprune/topo_map.hpp"
#include "navprune/vocabulary.hpp"
#include "navprune/worldgen.hpp"

namespace navprune {

struct PolicyParams {
    double gamma = 0.9;       // backtrack decay per hop
    double tau = 0.95;        // match threshold that advances the instruction pointer
    double theta_stop = 0.5;  // stop score
};

enum class ActionKind { stop, navigate, backtrack };

std::string to_string(ActionKind kind);

struct ActionChoice {
    ActionKind kind = ActionKind::stop;
    NodeId target = 0;
    TokenId view = 0;       // heading of the chosen action view (navigate only)
    double score = 0.0;     // decayed score that won the argmax
    double match = 0.0;     // undecayed cosine to the current instruction target
    std::size_t hops = 0;   // movement cost in steps
};

// A retained action view with its retained neighbouring context pooled in.
struct ViewCandidate {
    TokenId view = 0;
    NodeId destination = 0;
    std::vector<double> feature;
};

struct PolicyState {
    // Embeddings of the retained relevant instruction tokens, in order.
    std::vector<std::vector<double>> targets;
    std::size_t pointer = 0;  // next unmatched target
};

// Argmax over stop, navigate and backtrack. Ties prefer stop, then navigate,
// then backtrack, then the lower node id.
ActionChoice step(const PolicyState& state, const std::vector<ViewCandidate>& panorama,
                  const TopoMap& map, const PolicyParams& params);

bool judge_success(const HouseGraph& house, NodeId stop_node, NodeId goal, std::size_t success_hops);

enum class ImportanceSource { oracle, attention };

std::string to_string(ImportanceSource source);
ImportanceSource parse_importance_source(const std::string& text);

struct StackConfigs {
    EncoderConfig language{6, 4, 64, 4, 101};
    EncoderConfig view{2, 4, 64, 4, 202};
    EncoderConfig cross{3, 4, 64, 4, 303};

    ModelDims dims() const;
};

struct Encoders {
    EncoderWeights language;
    EncoderWeights view;
    EncoderWeights cross;

    static Encoders create(const StackConfigs& configs);
};

struct EpisodeConfig {
    StrategySpec instruction_strategy;  // kind none, vpp or a baseline
    StrategySpec view_strategy;         // kind none, bgp or a baseline
    std::optional<std::size_t> k_btp;   // backtracking pruning when set
    double instruction_retain = 1.0;
    double view_retain = 1.0;
    bool selective_attention = false;   // skip background-view query rows
    ImportanceSource importance = ImportanceSource::oracle;
    OracleConfig oracle;
    PolicyParams policy;
    std::size_t success_hops = 0;
    std::size_t t_max = 0;              // 0: 3 x |gt_path|
    bool run_cross_modal = false;       // always run in attention mode
    std::uint64_t seed = 0;
};

struct StepLog {
    std::size_t decision = 0;
    ActionChoice action;
    NodeId from = 0;
    std::size_t instruction_removed = 0;  // nonzero on the first decision only
    std::size_t views_removed = 0;
    std::size_t history_removed = 0;
    std::size_t instruction_tokens = 0;   // retained after pruning
    std::size_t view_tokens = 0;
    std::size_t history_tokens = 0;       // map nodes fed to the cross-modal stack
    std::size_t unvisited_after_prune = 0;
};

struct EpisodeResult {
    bool success = false;
    bool capped = false;
    std::size_t steps = 0;
    std::size_t decisions = 0;
    std::vector<NodeId> path;
    FlopsLedger flops;
    std::vector<StepLog> log;
    // Schedules behind the ledger, kept for audits.
    StackSchedule instruction_schedule;
    std::vector<StackSchedule> view_schedules;
    std::vector<std::size_t> history_lengths;
    std::uint64_t instrumented_flops = 0;  // meaningful when every stack ran with a counter
    std::vector<std::string> warnings;
};

// Vocabulary may be null unless the instruction strategy is VPP.
EpisodeResult run_episode(const World& world, const EpisodeConfig& config, const Encoders& encoders,
                          const Vocabulary* vocabulary, MacCounter* counter = nullptr);

// Same world and seeds with every pruning switched off.
EpisodeConfig reference_config(const EpisodeConfig& config);

// One line per action: step kind target score and retained-token counts.
std::string format_trace(const EpisodeResult& result);

}  // namespace navprune

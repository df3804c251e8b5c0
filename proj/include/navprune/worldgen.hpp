#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "navprune/encoder.hpp"
#include "navprune/rng.hpp"
#include "navprune/tokens.hpp"

namespace navprune {

struct HouseNode {
    NodeId id = 0;
    std::size_t region = 0;  // nodes in a region have correlated landmarks
    std::string name;        // landmark word used in instructions
};

struct HouseGraph {
    std::vector<HouseNode> nodes;
    std::vector<std::set<NodeId>> adjacency;
    NodeId start = 0;
    NodeId goal = 0;
    std::vector<NodeId> gt_path;

    std::size_t degree(NodeId id) const { return adjacency.at(id).size(); }
    // Hop distance; nullopt when unreachable.
    std::optional<std::size_t> distance(NodeId a, NodeId b) const;
    // Throws std::logic_error on a broken invariant.
    void validate(std::size_t max_degree) const;
};

// Shape of the distractor structure around the ground-truth path.
struct HouseOptions {
    std::size_t region_span = 3;     // consecutive path nodes sharing a region
    double new_region_rate = 0.05;   // distractor opens a fresh region
    double lookalike_rate = 0.5;     // distractor off a path node copies the next path node's region
    double extra_edge_rate = 0.15;   // extra edge attempts per node
};

// path_len counts the nodes on gt_path (start and goal included).
HouseGraph generate_house(std::uint64_t seed, std::size_t n_nodes, std::size_t path_len,
                          std::size_t max_degree = 4, const HouseOptions& options = {});

enum class ViewKind { action, background };

struct View {
    ViewKind kind = ViewKind::background;
    std::optional<NodeId> destination;  // action views only
    std::optional<NodeId> context_of;   // background view beside an action view
    std::vector<double> feature;
};

struct PanoramaOptions {
    std::size_t views = 12;
    double region_correlation = 0.85;  // share of landmark variance from the region direction
    double max_landmark_cosine = 0.89;
    double occlusion_rate = 0.2;       // chance an action view is a partial observation
    double occlusion_cosine = 0.85;    // cosine of an occluded view to its landmark
    double context_cosine = 0.93;      // cosine of a background view beside an action view to its landmark
};

struct PanoramaSpec {
    std::vector<std::vector<double>> landmarks;  // unit norm, per node
    std::vector<std::vector<View>> panoramas;    // per node, indexed by heading
};

PanoramaSpec generate_panoramas(const HouseGraph& house, std::size_t hidden_dim, double sigma_feat,
                                std::uint64_t seed, const PanoramaOptions& options = {});

struct SyntheticInstruction {
    TokenSeq tokens;

    std::size_t relevant_count() const;
    std::string text() const;
};

SyntheticInstruction generate_instruction(const HouseGraph& house, const PanoramaSpec& panoramas,
                                          double filler_rate, std::uint64_t seed);

struct OracleConfig {
    double sigma_feat = 0.03;
    double p_flip = 0.3;
    double boost = 1.0;
    double score_noise = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Relevant tokens score 1.0, everything else 0.2, plus Gaussian noise; each
// non-relevant token gains `boost` with probability p_flip. Clamped at 0.
ImportanceScores importance_oracle(const SyntheticInstruction& instruction, const OracleConfig& config);

// Map-node relevance for backtracking: 1.0 on the ground-truth path, 0.2 off it,
// plus Gaussian noise (no flips). Draws from `rng`.
double node_importance(const HouseGraph& house, NodeId node, const OracleConfig& config, Rng& rng);

struct WorldParams {
    std::size_t n_nodes = 60;
    std::size_t path_len = 0;  // nodes on gt_path; 0 draws from [path_min, path_max]
    std::size_t path_min = 10;
    std::size_t path_max = 14;
    std::size_t max_degree = 4;
    std::size_t hidden_dim = 64;
    double sigma_feat = 0.03;
    double filler_rate = 0.75;
    HouseOptions house;
    PanoramaOptions panorama;
};

struct World {
    std::uint64_t seed = 0;
    WorldParams params;
    HouseGraph house;
    PanoramaSpec panoramas;
    SyntheticInstruction instruction;
};

World generate_world(const WorldParams& params, std::uint64_t seed);

std::string serialize_world(const World& world);
World parse_world(std::string_view text);

}  // namespace navprune

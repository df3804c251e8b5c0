#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "navprune/tokens.hpp"

namespace navprune {

enum class NodeStatus { visited, unvisited };

struct MapNode {
    NodeStatus status = NodeStatus::unvisited;
    std::vector<double> feature;
    double latest_score = 0.0;
    std::size_t discovery_step = 0;
};

// The agent's history: discovered nodes and the edges it has observed.
class TopoMap {
public:
    explicit TopoMap(NodeId start);

    NodeId current() const { return current_; }
    bool contains(NodeId id) const { return nodes_.count(id) != 0; }
    const MapNode& node(NodeId id) const;
    const std::map<NodeId, MapNode>& nodes() const { return nodes_; }
    const std::map<NodeId, std::set<NodeId>>& adjacency() const { return adjacency_; }
    std::size_t size() const { return nodes_.size(); }

    std::vector<NodeId> unvisited() const;
    std::vector<NodeId> visited() const;

    // Records `node` as seen from `from`. Unvisited nodes get their feature and
    // score overwritten by the latest observation; discovery step is kept.
    void observe(NodeId from, NodeId node, std::vector<double> feature, double score,
                 std::size_t step);
    // Moves to `id` and marks it visited. `id` must already be on the map.
    void move_to(NodeId id);
    // Drops an unvisited node and its edges.
    void erase_unvisited(NodeId id);

    // Hop distance over observed edges.
    std::optional<std::size_t> hops(NodeId from, NodeId to) const;
    // Shortest node sequence from `from` to `to`, both included; empty if unreachable.
    std::vector<NodeId> route(NodeId from, NodeId to) const;

    // Throws std::logic_error when an invariant is broken.
    void check_invariants() const;

private:
    std::map<NodeId, MapNode> nodes_;
    std::map<NodeId, std::set<NodeId>> adjacency_;
    NodeId current_;
};

}  // namespace navprune

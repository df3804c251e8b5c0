#include "navprune/topo_map.hpp"

#include <deque>
#include <stdexcept>
#include <string>

namespace navprune {

TopoMap::TopoMap(NodeId start) : current_(start) {
    nodes_[start].status = NodeStatus::visited;
    adjacency_[start];
}

const MapNode& TopoMap::node(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::out_of_range("node " + std::to_string(id) + " not on map");
    return it->second;
}

std::vector<NodeId> TopoMap::unvisited() const {
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes_)
        if (n.status == NodeStatus::unvisited) out.push_back(id);
    return out;
}

std::vector<NodeId> TopoMap::visited() const {
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes_)
        if (n.status == NodeStatus::visited) out.push_back(id);
    return out;
}

void TopoMap::observe(NodeId from, NodeId node, std::vector<double> feature, double score,
                      std::size_t step) {
    if (!contains(from) || nodes_.at(from).status != NodeStatus::visited)
        throw std::invalid_argument("observations must come from a visited node");
    auto [it, inserted] = nodes_.try_emplace(node);
    MapNode& n = it->second;
    if (inserted) {
        n.status = NodeStatus::unvisited;
        n.discovery_step = step;
    }
    if (n.status == NodeStatus::unvisited) {
        n.feature = std::move(feature);
        n.latest_score = score;
    }
    adjacency_[from].insert(node);
    adjacency_[node].insert(from);
}

void TopoMap::move_to(NodeId id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::invalid_argument("cannot move to an undiscovered node");
    it->second.status = NodeStatus::visited;
    current_ = id;
}

void TopoMap::erase_unvisited(NodeId id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end() || it->second.status != NodeStatus::unvisited)
        throw std::invalid_argument("only unvisited nodes can be erased");
    nodes_.erase(it);
    for (NodeId nb : adjacency_[id]) adjacency_[nb].erase(id);
    adjacency_.erase(id);
}

std::optional<std::size_t> TopoMap::hops(NodeId from, NodeId to) const {
    const auto path = route(from, to);
    if (path.empty()) return std::nullopt;
    return path.size() - 1;
}

std::vector<NodeId> TopoMap::route(NodeId from, NodeId to) const {
    if (!contains(from) || !contains(to)) return {};
    std::map<NodeId, NodeId> parent{{from, from}};
    std::deque<NodeId> queue{from};
    while (!queue.empty()) {
        const NodeId x = queue.front();
        queue.pop_front();
        if (x == to) break;
        auto it = adjacency_.find(x);
        if (it == adjacency_.end()) continue;
        for (NodeId y : it->second)
            if (parent.emplace(y, x).second) queue.push_back(y);
    }
    if (!parent.count(to)) return {};
    std::vector<NodeId> path{to};
    while (path.back() != from) path.push_back(parent[path.back()]);
    return {path.rbegin(), path.rend()};
}

void TopoMap::check_invariants() const {
    if (node(current_).status != NodeStatus::visited)
        throw std::logic_error("current node is not visited");
    for (const auto& [id, n] : nodes_) {
        if (n.status != NodeStatus::unvisited) continue;
        bool seen = false;
        auto it = adjacency_.find(id);
        if (it != adjacency_.end())
            for (NodeId nb : it->second)
                if (nodes_.at(nb).status == NodeStatus::visited) seen = true;
        if (!seen)
            throw std::logic_error("unvisited node " + std::to_string(id) +
                                   " has no visited neighbour");
    }
}

}  // namespace navprune

#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtsim/types.hpp"

namespace mtsim {

struct LinkSpec {
    LinkId id = 0;
    NodeId from = 0;
    NodeId to = 0;
    double length_m = 0.0;
    double vmax_mps = 0.0;

    double free_flow_time() const { return length_m / vmax_mps; }
};

struct IntersectionSpec {
    NodeId node = 0;
    double control_zone_m = 200.0;
    double clearance_s = 3.0;          // h_c
    double saturation_headway_s = 2.0; // h_f
    std::vector<std::vector<LinkId>> phases;  // served incoming links per phase

    int num_phases() const { return int(phases.size()); }
    // index of the first phase serving `link`, -1 if none
    int phase_of(LinkId link) const;
};

struct Path {
    std::vector<LinkId> links;
    double free_flow_time = 0.0;
};

struct PathSet {
    NodeId origin = 0;
    NodeId destination = 0;
    std::vector<Path> paths;  // sorted by free-flow time, lexicographic tie-break
    bool unreachable = false;
};

class NetworkGraph {
  public:
    std::vector<NodeId> nodes;
    std::vector<LinkSpec> links;
    std::vector<IntersectionSpec> intersections;

    void build_index();

    bool has_node(NodeId n) const { return node_set_.count(n) > 0; }
    const LinkSpec* link_by_id(LinkId id) const;
    const LinkSpec* link_between(NodeId from, NodeId to) const;
    const IntersectionSpec* intersection_at(NodeId n) const;
    const std::vector<LinkId>& outgoing(NodeId n) const;
    const std::vector<LinkId>& incoming(NodeId n) const;
    // legs = number of distinct neighbour nodes
    int legs(NodeId n) const;

  private:
    std::unordered_map<NodeId, int> node_set_;
    std::unordered_map<LinkId, int> link_index_;
    std::unordered_map<std::uint64_t, int> link_pair_;
    std::unordered_map<NodeId, std::vector<LinkId>> out_, in_;
    std::unordered_map<NodeId, int> inter_index_;
    std::vector<LinkId> empty_;
};

// Parses and validates a network document (JSON text). Throws ConfigError
// naming the offending element on parse failures, missing reverse links or
// phases that reference non-incoming links.
NetworkGraph load_network(const std::string& json_text);
NetworkGraph load_network_file(const std::string& path);

// Returns all invariant violations (empty when the graph is valid).
std::vector<std::string> validate(const NetworkGraph& graph);

// Yen k-shortest loopless paths by free-flow time; `edge_time_offset` is a
// fixed per-edge cost added on top of length/vmax (used by callers that
// account for junction traversal). Ties broken by lexicographic link-id
// sequence. Unreachable OD yields an empty, flagged PathSet.
PathSet k_shortest_paths(const NetworkGraph& graph, NodeId origin, NodeId destination,
                         int k, double edge_time_offset = 0.0);

// Resolves the bundled data directory: MTSIM_DATA_DIR env var first, then
// the compiled-in path.
std::string default_network_path();

}  // namespace mtsim

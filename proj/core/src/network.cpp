#include "mtsim/network.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mtsim {

namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
    return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
}

}  // namespace

int IntersectionSpec::phase_of(LinkId link) const {
    for (int m = 0; m < int(phases.size()); ++m) {
        for (LinkId l : phases[m]) {
            if (l == link) return m;
        }
    }
    return -1;
}

void NetworkGraph::build_index() {
    node_set_.clear();
    link_index_.clear();
    link_pair_.clear();
    out_.clear();
    in_.clear();
    inter_index_.clear();
    for (NodeId n : nodes) node_set_[n] = 1;
    for (int i = 0; i < int(links.size()); ++i) {
        const LinkSpec& l = links[i];
        link_index_[l.id] = i;
        link_pair_[pair_key(l.from, l.to)] = i;
        out_[l.from].push_back(l.id);
        in_[l.to].push_back(l.id);
    }
    for (auto& [n, v] : out_) std::sort(v.begin(), v.end());
    for (auto& [n, v] : in_) std::sort(v.begin(), v.end());
    for (int i = 0; i < int(intersections.size()); ++i) {
        inter_index_[intersections[i].node] = i;
    }
}

const LinkSpec* NetworkGraph::link_by_id(LinkId id) const {
    auto it = link_index_.find(id);
    return it == link_index_.end() ? nullptr : &links[it->second];
}

const LinkSpec* NetworkGraph::link_between(NodeId from, NodeId to) const {
    auto it = link_pair_.find(pair_key(from, to));
    return it == link_pair_.end() ? nullptr : &links[it->second];
}

const IntersectionSpec* NetworkGraph::intersection_at(NodeId n) const {
    auto it = inter_index_.find(n);
    return it == inter_index_.end() ? nullptr : &intersections[it->second];
}

const std::vector<LinkId>& NetworkGraph::outgoing(NodeId n) const {
    auto it = out_.find(n);
    return it == out_.end() ? empty_ : it->second;
}

const std::vector<LinkId>& NetworkGraph::incoming(NodeId n) const {
    auto it = in_.find(n);
    return it == in_.end() ? empty_ : it->second;
}

int NetworkGraph::legs(NodeId n) const {
    std::set<NodeId> neigh;
    for (LinkId l : outgoing(n)) neigh.insert(link_by_id(l)->to);
    for (LinkId l : incoming(n)) neigh.insert(link_by_id(l)->from);
    return int(neigh.size());
}

NetworkGraph load_network(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("network parse failure: ") + e.what());
    }

    NetworkGraph g;
    try {
        for (const auto& n : doc.at("nodes")) g.nodes.push_back(n.get<NodeId>());
        for (const auto& jl : doc.at("links")) {
            LinkSpec l;
            l.id = jl.at("id").get<LinkId>();
            l.from = jl.at("from").get<NodeId>();
            l.to = jl.at("to").get<NodeId>();
            l.length_m = jl.at("length_m").get<double>();
            l.vmax_mps = jl.at("vmax_mps").get<double>();
            g.links.push_back(l);
        }
        if (doc.contains("intersections")) {
            for (const auto& ji : doc.at("intersections")) {
                IntersectionSpec s;
                s.node = ji.at("id").get<NodeId>();
                s.control_zone_m = ji.value("R_m", 200.0);
                s.clearance_s = ji.value("h_c_s", 3.0);
                s.saturation_headway_s = ji.value("h_f_s", 2.0);
                for (const auto& ph : ji.at("phases")) {
                    s.phases.push_back(ph.get<std::vector<LinkId>>());
                }
                g.intersections.push_back(s);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("network parse failure: ") + e.what());
    }

    g.build_index();

    auto violations = validate(g);
    if (!violations.empty()) throw ConfigError(violations.front());
    return g;
}

NetworkGraph load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open network file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_network(ss.str());
}

std::vector<std::string> validate(const NetworkGraph& graph) {
    std::vector<std::string> out;
    std::set<NodeId> nodes(graph.nodes.begin(), graph.nodes.end());
    std::set<LinkId> seen_links;
    std::set<std::pair<NodeId, NodeId>> pairs;
    std::map<NodeId, std::set<NodeId>> neighbours;
    std::map<NodeId, std::set<LinkId>> incoming;
    std::map<NodeId, int> incident;

    for (const LinkSpec& l : graph.links) {
        neighbours[l.from].insert(l.to);
        neighbours[l.to].insert(l.from);
        incoming[l.to].insert(l.id);
        ++incident[l.from];
        ++incident[l.to];
    }
    for (const LinkSpec& l : graph.links) {
        if (!seen_links.insert(l.id).second) {
            out.push_back("duplicate link id " + std::to_string(l.id));
        }
        if (!nodes.count(l.from)) {
            out.push_back("link " + std::to_string(l.id) + ": unknown from-node " +
                          std::to_string(l.from));
        }
        if (!nodes.count(l.to)) {
            out.push_back("link " + std::to_string(l.id) + ": unknown to-node " +
                          std::to_string(l.to));
        }
        if (!(l.length_m > 0.0)) {
            out.push_back("link " + std::to_string(l.id) + ": nonpositive length");
        }
        if (!(l.vmax_mps > 0.0)) {
            out.push_back("link " + std::to_string(l.id) + ": nonpositive speed");
        }
        pairs.insert({l.from, l.to});
    }
    for (const LinkSpec& l : graph.links) {
        if (!pairs.count({l.to, l.from})) {
            out.push_back("missing reverse link for (" + std::to_string(l.from) + "," +
                          std::to_string(l.to) + ")");
        }
    }
    // orphan nodes: no incident links at all
    for (NodeId n : graph.nodes) {
        if (incident[n] == 0) {
            out.push_back("orphan node " + std::to_string(n));
        }
    }
    for (const IntersectionSpec& s : graph.intersections) {
        if (!nodes.count(s.node)) {
            out.push_back("intersection " + std::to_string(s.node) + ": unknown node");
            continue;
        }
        if (int(neighbours[s.node].size()) <= 2 && !s.phases.empty()) {
            out.push_back("intersection " + std::to_string(s.node) +
                          ": signal on a node with <= 2 legs");
        }
        std::set<LinkId> covered;
        const std::set<LinkId>& in_set = incoming[s.node];
        for (int m = 0; m < int(s.phases.size()); ++m) {
            for (LinkId l : s.phases[m]) {
                if (!in_set.count(l)) {
                    out.push_back("intersection " + std::to_string(s.node) + " phase " +
                                  std::to_string(m + 1) + ": link " + std::to_string(l) +
                                  " is not an incoming link");
                }
                covered.insert(l);
            }
        }
        if (!s.phases.empty()) {
            for (LinkId l : in_set) {
                if (!covered.count(l)) {
                    out.push_back("intersection " + std::to_string(s.node) + ": incoming link " +
                                  std::to_string(l) + " not served by any phase");
                }
            }
        }
    }
    return out;
}

namespace {

struct DijkstraResult {
    bool reachable = false;
    std::vector<LinkId> links;
    double cost = 0.0;
};

// Deterministic Dijkstra over link free-flow time + offset; ties broken by
// smaller node id, path reconstruction by link id.
DijkstraResult shortest_path(const NetworkGraph& g, NodeId origin, NodeId destination,
                             double offset, const std::set<LinkId>& banned_links,
                             const std::set<NodeId>& banned_nodes) {
    std::map<NodeId, double> dist;
    std::map<NodeId, LinkId> pred;
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[origin] = 0.0;
    pq.push({0.0, origin});
    while (!pq.empty()) {
        auto [d, n] = pq.top();
        pq.pop();
        if (d > dist[n] + 1e-12) continue;
        if (n == destination) break;
        for (LinkId lid : g.outgoing(n)) {
            if (banned_links.count(lid)) continue;
            const LinkSpec* l = g.link_by_id(lid);
            if (banned_nodes.count(l->to)) continue;
            double nd = d + l->free_flow_time() + offset;
            auto it = dist.find(l->to);
            if (it == dist.end() || nd < it->second - 1e-12 ||
                (std::abs(nd - it->second) <= 1e-12 && pred.count(l->to) &&
                 lid < pred[l->to])) {
                dist[l->to] = nd;
                pred[l->to] = lid;
                pq.push({nd, l->to});
            }
        }
    }
    DijkstraResult res;
    if (!dist.count(destination)) return res;
    res.reachable = true;
    res.cost = dist[destination];
    NodeId n = destination;
    while (n != origin) {
        LinkId lid = pred[n];
        res.links.push_back(lid);
        n = g.link_by_id(lid)->from;
    }
    std::reverse(res.links.begin(), res.links.end());
    return res;
}

double path_cost(const NetworkGraph& g, const std::vector<LinkId>& links, double offset) {
    double c = 0.0;
    for (LinkId l : links) c += g.link_by_id(l)->free_flow_time() + offset;
    return c;
}

struct CandidateLess {
    bool operator()(const std::pair<double, std::vector<LinkId>>& a,
                    const std::pair<double, std::vector<LinkId>>& b) const {
        if (std::abs(a.first - b.first) > 1e-12) return a.first < b.first;
        return a.second < b.second;  // lexicographic by link ids
    }
};

}  // namespace

PathSet k_shortest_paths(const NetworkGraph& graph, NodeId origin, NodeId destination,
                         int k, double edge_time_offset) {
    PathSet out;
    out.origin = origin;
    out.destination = destination;
    if (origin == destination || !graph.has_node(origin) || !graph.has_node(destination) ||
        k <= 0) {
        out.unreachable = true;
        return out;
    }

    auto first = shortest_path(graph, origin, destination, edge_time_offset, {}, {});
    if (!first.reachable) {
        out.unreachable = true;
        return out;
    }
    std::vector<std::vector<LinkId>> accepted{first.links};
    std::set<std::pair<double, std::vector<LinkId>>, CandidateLess> candidates;
    std::set<std::vector<LinkId>> known{first.links};

    while (int(accepted.size()) < k) {
        const auto& prev = accepted.back();
        // spur from every node of the previous accepted path
        std::set<NodeId> banned_nodes;
        std::vector<LinkId> root;
        NodeId spur = origin;
        for (size_t i = 0; i <= prev.size(); ++i) {
            if (i > 0) {
                root.push_back(prev[i - 1]);
                banned_nodes.insert(spur);
                spur = graph.link_by_id(prev[i - 1])->to;
            }
            if (spur == destination) break;
            std::set<LinkId> banned_links;
            for (const auto& p : accepted) {
                if (p.size() >= root.size() &&
                    std::equal(root.begin(), root.end(), p.begin())) {
                    if (p.size() > root.size()) banned_links.insert(p[root.size()]);
                }
            }
            auto spur_path =
                shortest_path(graph, spur, destination, edge_time_offset, banned_links,
                              banned_nodes);
            if (!spur_path.reachable) continue;
            std::vector<LinkId> total = root;
            total.insert(total.end(), spur_path.links.begin(), spur_path.links.end());
            if (known.insert(total).second) {
                candidates.insert({path_cost(graph, total, edge_time_offset), total});
            }
        }
        if (candidates.empty()) break;
        accepted.push_back(candidates.begin()->second);
        candidates.erase(candidates.begin());
    }

    for (const auto& links : accepted) {
        Path p;
        p.links = links;
        p.free_flow_time = path_cost(graph, links, edge_time_offset);
        out.paths.push_back(std::move(p));
    }
    std::sort(out.paths.begin(), out.paths.end(), [](const Path& a, const Path& b) {
        if (std::abs(a.free_flow_time - b.free_flow_time) > 1e-12)
            return a.free_flow_time < b.free_flow_time;
        return a.links < b.links;
    });
    return out;
}

std::string default_network_path() {
    if (const char* env = std::getenv("MTSIM_DATA_DIR")) {
        return std::string(env) + "/sioux_falls.json";
    }
#ifdef MTSIM_DATA_DIR
    return std::string(MTSIM_DATA_DIR) + "/sioux_falls.json";
#else
    return "sioux_falls.json";
#endif
}

}  // namespace mtsim

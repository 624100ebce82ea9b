#ifndef EDGESIM_TOPOLOGY_HPP
#define EDGESIM_TOPOLOGY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgesim {

using NodeId = int;

struct Position {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Position& a, const Position& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// How densely the backhaul mesh is wired.
//   high:   full 4-neighbour lattice
//   middle: lattice edges inside a central core block, a spanning path outside
//   low:    serpentine spanning tree, no cycles
enum class Connectivity { high, middle, low };

inline const char* to_string(Connectivity c) {
    switch (c) {
        case Connectivity::high: return "high";
        case Connectivity::middle: return "middle";
        case Connectivity::low: return "low";
    }
    return "?";
}

inline Connectivity connectivity_from_string(const std::string& s) {
    if (s == "high") return Connectivity::high;
    if (s == "middle") return Connectivity::middle;
    if (s == "low") return Connectivity::low;
    throw std::invalid_argument("unknown connectivity kind: " + s);
}

// Immutable edge-node grid. Nodes sit at cell centers of a rows x cols grid
// covering a square region; hop_matrix holds BFS shortest-path edge counts.
struct Topology {
    int rows = 0;
    int cols = 0;
    double region_side = 0.0;
    Connectivity kind = Connectivity::high;
    std::vector<Position> node_positions;
    std::vector<std::vector<NodeId>> neighbors;
    std::vector<std::vector<int>> hop_matrix;

    int node_count() const { return rows * cols; }

    bool adjacent(NodeId a, NodeId b) const {
        const auto& n = neighbors[static_cast<std::size_t>(a)];
        return std::find(n.begin(), n.end(), b) != n.end();
    }

    std::size_t edge_count() const {
        std::size_t twice = 0;
        for (const auto& n : neighbors) twice += n.size();
        return twice / 2;
    }
};

namespace detail {

inline void add_edge(Topology& topo, NodeId a, NodeId b) {
    if (a == b) return;
    if (!topo.adjacent(a, b)) {
        topo.neighbors[static_cast<std::size_t>(a)].push_back(b);
        topo.neighbors[static_cast<std::size_t>(b)].push_back(a);
    }
}

inline std::vector<int> bfs_hops(const Topology& topo, NodeId root) {
    std::vector<int> hops(static_cast<std::size_t>(topo.node_count()), -1);
    hops[static_cast<std::size_t>(root)] = 0;
    std::queue<NodeId> frontier;
    frontier.push(root);
    while (!frontier.empty()) {
        const NodeId v = frontier.front();
        frontier.pop();
        for (NodeId w : topo.neighbors[static_cast<std::size_t>(v)]) {
            if (hops[static_cast<std::size_t>(w)] < 0) {
                hops[static_cast<std::size_t>(w)] = hops[static_cast<std::size_t>(v)] + 1;
                frontier.push(w);
            }
        }
    }
    return hops;
}

}  // namespace detail

inline Topology build_grid_topology(int rows, int cols, double region_side, Connectivity kind) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("grid dimensions must be >= 1");
    if (!(region_side > 0.0)) throw std::invalid_argument("region_side must be > 0");

    Topology topo;
    topo.rows = rows;
    topo.cols = cols;
    topo.region_side = region_side;
    topo.kind = kind;

    const int m = rows * cols;
    topo.node_positions.resize(static_cast<std::size_t>(m));
    topo.neighbors.resize(static_cast<std::size_t>(m));

    const double cell_w = region_side / cols;
    const double cell_h = region_side / rows;
    auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            topo.node_positions[static_cast<std::size_t>(id(r, c))] = {(c + 0.5) * cell_w,
                                                                       (r + 0.5) * cell_h};

    switch (kind) {
        case Connectivity::high: {
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    if (c + 1 < cols) detail::add_edge(topo, id(r, c), id(r, c + 1));
                    if (r + 1 < rows) detail::add_edge(topo, id(r, c), id(r + 1, c));
                }
            }
            break;
        }
        case Connectivity::middle: {
            // lattice-wired core block centered in the grid
            const int core_r = std::max(1, rows / 2);
            const int core_c = std::max(1, cols / 2);
            const int r0 = (rows - core_r) / 2;
            const int c0 = (cols - core_c) / 2;
            auto in_core = [&](int r, int c) {
                return r >= r0 && r < r0 + core_r && c >= c0 && c < c0 + core_c;
            };
            for (int r = r0; r < r0 + core_r; ++r) {
                for (int c = c0; c < c0 + core_c; ++c) {
                    if (c + 1 < c0 + core_c) detail::add_edge(topo, id(r, c), id(r, c + 1));
                    if (r + 1 < r0 + core_r) detail::add_edge(topo, id(r, c), id(r + 1, c));
                }
            }
            // remaining nodes chained in index order, attached to the core once
            std::vector<NodeId> outside;
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    if (!in_core(r, c)) outside.push_back(id(r, c));
            for (std::size_t k = 0; k + 1 < outside.size(); ++k)
                detail::add_edge(topo, outside[k], outside[k + 1]);
            if (!outside.empty()) detail::add_edge(topo, outside.front(), id(r0, c0));
            break;
        }
        case Connectivity::low: {
            // serpentine path through the grid: M-1 edges, no cycles
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c + 1 < cols; ++c) detail::add_edge(topo, id(r, c), id(r, c + 1));
                if (r + 1 < rows) {
                    const int c_turn = (r % 2 == 0) ? cols - 1 : 0;
                    detail::add_edge(topo, id(r, c_turn), id(r + 1, c_turn));
                }
            }
            break;
        }
    }

    for (auto& n : topo.neighbors) std::sort(n.begin(), n.end());

    topo.hop_matrix.resize(static_cast<std::size_t>(m));
    for (NodeId v = 0; v < m; ++v) {
        topo.hop_matrix[static_cast<std::size_t>(v)] = detail::bfs_hops(topo, v);
        for (int h : topo.hop_matrix[static_cast<std::size_t>(v)])
            if (h < 0) throw std::logic_error("grid construction produced a disconnected graph");
    }
    return topo;
}

inline int hop_distance(const Topology& topo, NodeId a, NodeId b) {
    const int m = topo.node_count();
    if (a < 0 || a >= m || b < 0 || b >= m) throw std::invalid_argument("node id out of range");
    return topo.hop_matrix[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

// Traces can leave the region; positions are clamped to the boundary first.
inline Position clamp_to_region(const Topology& topo, Position p) {
    p.x = std::clamp(p.x, 0.0, topo.region_side);
    p.y = std::clamp(p.y, 0.0, topo.region_side);
    return p;
}

// Node whose center is closest to p; ties broken by lowest index.
inline NodeId nearest_node(const Topology& topo, Position p) {
    p = clamp_to_region(topo, p);
    NodeId best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (NodeId v = 0; v < topo.node_count(); ++v) {
        const Position& q = topo.node_positions[static_cast<std::size_t>(v)];
        const double dx = p.x - q.x;
        const double dy = p.y - q.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = v;
        }
    }
    return best;
}

}  // namespace edgesim

#endif

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace gcnet::graph {

enum class Temporal : int { past = 0, present = 1, future = 2 };
inline constexpr std::size_t kTemporalTypes = 3;

/// Which edge typing drives a relation-conditioned aggregation.
/// `coupled` crosses both: id = temporal * S^2 + speaker.
enum class RelationFamily { speaker, temporal, coupled };

/// Message edge src -> dst (information flows from src into dst).
struct Edge {
    std::size_t src;
    std::size_t dst;
    int speaker_type;   // speakers[dst] * S + speakers[src]
    int temporal_type;  // Temporal of src relative to dst
};

/// Window-limited conversation graph shared by the speaker and temporal
/// aggregators: same edges, two typings.
struct TypedGraph {
    std::size_t length = 0;
    std::size_t window = 0;
    std::size_t speakers = 0;
    std::vector<Edge> edges;                         // grouped by dst, src ascending
    std::vector<std::vector<std::size_t>> in_edges;  // per dst: indices into edges

    std::size_t in_degree(std::size_t node) const { return in_edges[node].size(); }
    std::size_t relation_count(RelationFamily family) const;
    int relation(const Edge& e, RelationFamily family) const;
    /// N_i^r: result[i][r] lists the source nodes of node i under relation r.
    std::vector<std::vector<std::vector<std::size_t>>> neighborhoods(RelationFamily family) const;
};

/// Ordered speaker pair (speaker of i -> speaker of j), encoded as s_i * S + s_j.
int speaker_type(std::size_t i, std::size_t j, std::span<const int> speakers, std::size_t speaker_count);

/// past if j < i, present if j == i, future if j > i.
Temporal temporal_type(std::size_t i, std::size_t j);

/// Node i receives from every j with |i - j| <= window (0-based indices), self included.
TypedGraph build_graph(std::span<const int> speakers, std::size_t window, std::size_t speaker_count);

/// Debug dump: one "src dst speaker_type temporal_type" row per edge.
void write_edge_table(const TypedGraph& graph, std::ostream& out);

} // namespace gcnet::graph

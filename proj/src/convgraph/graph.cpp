#include "gcnet/convgraph/graph.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>

namespace gcnet::graph {

std::size_t TypedGraph::relation_count(RelationFamily family) const {
    switch (family) {
    case RelationFamily::speaker: return speakers * speakers;
    case RelationFamily::temporal: return kTemporalTypes;
    case RelationFamily::coupled: return kTemporalTypes * speakers * speakers;
    }
    return 0;
}

int TypedGraph::relation(const Edge& e, RelationFamily family) const {
    switch (family) {
    case RelationFamily::speaker: return e.speaker_type;
    case RelationFamily::temporal: return e.temporal_type;
    case RelationFamily::coupled: return e.temporal_type * static_cast<int>(speakers * speakers) + e.speaker_type;
    }
    return -1;
}

std::vector<std::vector<std::vector<std::size_t>>> TypedGraph::neighborhoods(RelationFamily family) const {
    std::vector<std::vector<std::vector<std::size_t>>> out(
        length, std::vector<std::vector<std::size_t>>(relation_count(family)));
    for (std::size_t i = 0; i < length; ++i)
        for (auto k : in_edges[i]) out[i][static_cast<std::size_t>(relation(edges[k], family))].push_back(edges[k].src);
    return out;
}

int speaker_type(std::size_t i, std::size_t j, std::span<const int> speakers, std::size_t speaker_count) {
    if (i >= speakers.size() || j >= speakers.size())
        throw std::out_of_range("speaker_type: node index out of range");
    for (auto n : {i, j})
        if (speakers[n] < 0 || static_cast<std::size_t>(speakers[n]) >= speaker_count)
            throw std::out_of_range("speaker_type: speaker " + std::to_string(speakers[n]) + " of node " +
                                    std::to_string(n) + " outside [0, " + std::to_string(speaker_count) + ")");
    return speakers[i] * static_cast<int>(speaker_count) + speakers[j];
}

Temporal temporal_type(std::size_t i, std::size_t j) {
    if (j < i) return Temporal::past;
    if (j == i) return Temporal::present;
    return Temporal::future;
}

TypedGraph build_graph(std::span<const int> speakers, std::size_t window, std::size_t speaker_count) {
    if (window < 1) throw std::invalid_argument("build_graph: window must be >= 1");
    if (speakers.empty()) throw std::invalid_argument("build_graph: conversation has no utterances");
    TypedGraph g;
    g.length = speakers.size();
    g.window = window;
    g.speakers = speaker_count;
    g.in_edges.resize(g.length);
    for (std::size_t i = 0; i < g.length; ++i) {
        const std::size_t lo = i >= window ? i - window : 0;
        const std::size_t hi = std::min(i + window, g.length - 1);
        for (std::size_t j = lo; j <= hi; ++j) {
            g.in_edges[i].push_back(g.edges.size());
            g.edges.push_back(Edge{j, i, speaker_type(i, j, speakers, speaker_count),
                                   static_cast<int>(temporal_type(i, j))});
        }
    }
    return g;
}

void write_edge_table(const TypedGraph& graph, std::ostream& out) {
    out << "src\tdst\tspeaker_type\ttemporal_type\n";
    static constexpr const char* kTemporal[] = {"past", "present", "future"};
    for (const auto& e : graph.edges)
        out << e.src << '\t' << e.dst << '\t' << e.speaker_type << '\t' << kTemporal[e.temporal_type] << '\n';
}

} // namespace gcnet::graph

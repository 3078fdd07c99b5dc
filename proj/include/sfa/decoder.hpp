#pragma once

#include <vector>

#include "sfa/graph.hpp"
#include "sfa/ops.hpp"

namespace sfa {

// Edge (i -> j) is kept iff sigmoid(S^e_ij) clears the threshold; the root
// column and self-loops never decode. Label = argmax over S^l_ij, ties to the
// lowest index. No structural constraints: recovery absorbs inconsistencies.
inline DepGraph decode_graph(const Tensor& s_edge, const Tensor& s_label, const LabelSet& labels,
                             double threshold = 0.5) {
    if (s_edge.rank() != 2 || s_edge.dim(0) != s_edge.dim(1))
        fail("decode_graph: edge scores must be square, got ", shape_string(s_edge.shape()));
    const int n = s_edge.dim(0);
    if (s_label.rank() != 3 || s_label.dim(0) != n || s_label.dim(1) != n ||
        s_label.dim(2) != labels.size())
        fail("decode_graph: label scores ", shape_string(s_label.shape()), " do not match ", n,
             " nodes and ", labels.size(), " labels");
    DepGraph g;
    g.n = n;
    for (int i = 0; i < n; ++i) {
        for (int j = 1; j < n; ++j) {
            if (i == j) continue;
            if (1.0 / (1.0 + std::exp(-s_edge.at(i, j))) <= threshold) continue;
            int best = 0;
            for (int c = 1; c < labels.size(); ++c)
                if (s_label.at(i, j, c) > s_label.at(i, j, best)) best = c;
            g.add_edge(i, j, labels.name(best));
        }
    }
    return g;
}

inline std::vector<SentimentTuple> decode_tuples(const DepGraph& g, DecodeReport* report = nullptr) {
    return graph_to_tuples(g, report);
}

} // namespace sfa

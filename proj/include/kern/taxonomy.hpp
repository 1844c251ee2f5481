#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kern/corpus.hpp"

namespace kern {

/// Validated affiliation forest over a corpus's fashion elements. Edges run
/// parent <- child with the two legal kinds: category <- attribute and
/// attribute <- attribute_value. Children are ordered lexicographically by
/// name, which also fixes the canonical edge (and relation-weight) order.
class Taxonomy {
public:
    struct Edge {
        int parent = -1;
        int child = -1;
    };

    /// Edges grouped by parent, for one bottom-up pass.
    struct ParentGroup {
        int parent = -1;
        std::vector<int> edge_indices; // into edges()
    };

    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t num_nodes() const { return parent_.size(); }
    int parent_of(int element_id) const { return parent_[static_cast<std::size_t>(element_id)]; }
    const std::vector<int>& children_of(int element_id) const {
        return children_[static_cast<std::size_t>(element_id)];
    }

    /// Update schedule: pass 0 feeds attribute values into attributes,
    /// pass 1 feeds attributes into categories.
    const std::vector<std::vector<ParentGroup>>& passes() const { return passes_; }

private:
    friend Taxonomy build_taxonomy(const std::vector<std::pair<std::string, std::string>>&,
                                   const std::vector<FashionElement>&);

    std::vector<Edge> edges_;
    std::vector<int> parent_;
    std::vector<std::vector<int>> children_;
    std::vector<std::vector<ParentGroup>> passes_;
};

/// Validates and indexes an edge list. Throws on unknown names, nodes with
/// two parents, cycles, and kind-incompatible edges.
Taxonomy build_taxonomy(const std::vector<std::pair<std::string, std::string>>& edges,
                        const std::vector<FashionElement>& elements);

/// One weight per taxonomy edge: each child's share of its parent, uniform
/// 1/|children|. Sums to one per parent.
std::vector<double> init_relation_weights(const Taxonomy& taxonomy);

/// Child-to-parent message passing on an embedding table (one row per
/// element id). Runs the two bottom-up passes; every parent gains the
/// weighted sum of its children's rows as they stood when its pass began.
/// Leaf rows come through unchanged.
std::vector<std::vector<double>> message_pass(const std::vector<std::vector<double>>& embeddings,
                                              const Taxonomy& taxonomy,
                                              std::span<const double> weights);

} // namespace kern

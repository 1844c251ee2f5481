#include "kern/taxonomy.hpp"

#include <algorithm>
#include <map>

namespace kern {

Taxonomy build_taxonomy(const std::vector<std::pair<std::string, std::string>>& raw_edges,
                        const std::vector<FashionElement>& elements) {
    std::map<std::string, int> by_name;
    for (const auto& e : elements) by_name.emplace(e.name, e.id);

    auto resolve = [&](const std::string& name) {
        const auto it = by_name.find(name);
        if (it == by_name.end())
            throw Error("data", "taxonomy references unknown element '" + name + "'");
        return it->second;
    };

    const std::size_t n = elements.size();
    Taxonomy tax;
    tax.parent_.assign(n, -1);
    tax.children_.assign(n, {});

    struct NamedEdge {
        int parent, child;
        std::string child_name;
    };
    std::vector<NamedEdge> named;
    for (const auto& [parent_name, child_name] : raw_edges) {
        const int parent = resolve(parent_name);
        const int child = resolve(child_name);
        if (tax.parent_[static_cast<std::size_t>(child)] != -1)
            throw Error("data", "taxonomy: element '" + child_name + "' has more than one parent");
        if (parent == child)
            throw Error("data", "taxonomy: element '" + child_name + "' is its own parent");
        tax.parent_[static_cast<std::size_t>(child)] = parent;
        named.push_back({parent, child, child_name});
    }

    // each node has at most one parent, so any cycle shows up as a walk that
    // never reaches a root
    for (std::size_t i = 0; i < n; ++i) {
        int cur = static_cast<int>(i);
        std::size_t steps = 0;
        while (cur != -1) {
            cur = tax.parent_[static_cast<std::size_t>(cur)];
            if (++steps > n)
                throw Error("data", "taxonomy contains a cycle involving '" + elements[i].name + "'");
        }
    }

    for (const auto& e : named) {
        const ElementKind pk = elements[static_cast<std::size_t>(e.parent)].kind;
        const ElementKind ck = elements[static_cast<std::size_t>(e.child)].kind;
        const bool ok = (pk == ElementKind::Category && ck == ElementKind::Attribute) ||
                        (pk == ElementKind::Attribute && ck == ElementKind::AttributeValue);
        if (!ok)
            throw Error("data", "taxonomy: illegal affiliation " + std::string(to_string(ck)) + " '" +
                                    e.child_name + "' under " + to_string(pk) + " '" +
                                    elements[static_cast<std::size_t>(e.parent)].name + "'");
    }

    // canonical order: by parent id, then child name
    std::sort(named.begin(), named.end(), [](const NamedEdge& a, const NamedEdge& b) {
        return std::tie(a.parent, a.child_name) < std::tie(b.parent, b.child_name);
    });
    for (const auto& e : named) {
        tax.children_[static_cast<std::size_t>(e.parent)].push_back(e.child);
        tax.edges_.push_back({e.parent, e.child});
    }

    tax.passes_.resize(2);
    for (int level = 0; level < 2; ++level) {
        const ElementKind child_kind =
            level == 0 ? ElementKind::AttributeValue : ElementKind::Attribute;
        Taxonomy::ParentGroup group;
        for (std::size_t i = 0; i < tax.edges_.size(); ++i) {
            const auto& e = tax.edges_[i];
            if (elements[static_cast<std::size_t>(e.child)].kind != child_kind) continue;
            if (group.parent != e.parent && group.parent != -1) {
                tax.passes_[static_cast<std::size_t>(level)].push_back(std::move(group));
                group = {};
            }
            group.parent = e.parent;
            group.edge_indices.push_back(static_cast<int>(i));
        }
        if (group.parent != -1) tax.passes_[static_cast<std::size_t>(level)].push_back(std::move(group));
    }
    return tax;
}

std::vector<double> init_relation_weights(const Taxonomy& taxonomy) {
    std::vector<double> weights(taxonomy.edges().size(), 0.0);
    for (std::size_t i = 0; i < taxonomy.edges().size(); ++i) {
        const int parent = taxonomy.edges()[i].parent;
        weights[i] = 1.0 / static_cast<double>(taxonomy.children_of(parent).size());
    }
    return weights;
}

std::vector<std::vector<double>> message_pass(const std::vector<std::vector<double>>& embeddings,
                                              const Taxonomy& taxonomy,
                                              std::span<const double> weights) {
    if (embeddings.size() != taxonomy.num_nodes())
        throw Error("data", "message_pass: embedding table size does not match taxonomy");
    if (weights.size() != taxonomy.edges().size())
        throw Error("data", "message_pass: weight count does not match edge count");
    const std::size_t dim = embeddings.empty() ? 0 : embeddings.front().size();
    for (const auto& row : embeddings)
        if (row.size() != dim) throw Error("data", "message_pass: embedding dimension mismatch");

    auto out = embeddings;
    for (const auto& pass : taxonomy.passes()) {
        const auto snapshot = out; // parents read values as of the pass start
        for (const auto& group : pass) {
            auto& parent = out[static_cast<std::size_t>(group.parent)];
            for (const int edge_index : group.edge_indices) {
                const auto& edge = taxonomy.edges()[static_cast<std::size_t>(edge_index)];
                const auto& child = snapshot[static_cast<std::size_t>(edge.child)];
                const double w = weights[static_cast<std::size_t>(edge_index)];
                for (std::size_t d = 0; d < dim; ++d) parent[d] += w * child[d];
            }
        }
    }
    return out;
}

} // namespace kern

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kern/error.hpp"

namespace kern {

/// A named dense tensor (vector or row-major matrix) with a gradient
/// accumulator of the same shape. Gradients persist across backward calls
/// until zero_grad().
struct Parameter {
    std::string name;
    int rows = 0;
    int cols = 1;
    std::vector<double> value;
    std::vector<double> grad;

    Parameter() = default;
    Parameter(std::string n, int r, int c = 1)
        : name(std::move(n)),
          rows(r),
          cols(c),
          value(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0),
          grad(value.size(), 0.0) {}

    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Records vector-valued operations for reverse-mode differentiation. Nodes
/// are append-only; backward() walks them in reverse and adds dLoss/dtheta
/// into every reachable Parameter's grad (so repeated calls accumulate).
class Tape {
public:
    using NodeId = std::int32_t;

    NodeId constant(std::vector<double> v);
    NodeId scalar(double v) { return constant({v}); }

    /// Leaf bound to a whole parameter tensor (flattened row-major).
    NodeId param(Parameter& p);
    /// Leaf bound to one row of a matrix parameter (embedding lookup).
    NodeId param_row(Parameter& p, int row);
    /// Leaf bound to a single entry, as a length-1 node.
    NodeId param_entry(Parameter& p, int index);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b); // elementwise
    NodeId scale(NodeId x, NodeId s);               // s: length-1 node
    NodeId scale_const(NodeId x, double c);
    NodeId concat(std::span<const NodeId> parts);
    NodeId slice(NodeId x, int offset, int len);
    NodeId sigmoid(NodeId x);
    NodeId tanh(NodeId x);
    NodeId relu(NodeId x);

    /// W x (matrix parameter times vector node).
    NodeId matvec(Parameter& w, NodeId x);
    /// W x + b.
    NodeId affine(Parameter& w, Parameter& b, NodeId x);

    /// Sum of |a_i - b_i| as a length-1 node. Subgradient 0 at exact ties.
    NodeId l1_distance(NodeId a, NodeId b);
    /// Mean of |pred_i - truth_i| over length-1 prediction nodes.
    NodeId mean_abs_error(std::span<const NodeId> predictions, std::span<const double> truth);
    /// Mean of length-1 nodes.
    NodeId mean(std::span<const NodeId> scalars);

    const std::vector<double>& value(NodeId id) const { return nodes_[check(id)].val; }
    double scalar_value(NodeId id) const;
    int length(NodeId id) const { return static_cast<int>(nodes_[check(id)].val.size()); }

    /// Seeds d(loss)/d(loss)=1 and propagates; loss must be a length-1 node.
    void backward(NodeId loss);

    std::size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void(Tape&, const Node&)> back; // empty for constants
    };

    std::size_t check(NodeId id) const;
    NodeId push(std::vector<double> val, std::function<void(Tape&, const Node&)> back);
    std::vector<double>& grad_of(NodeId id) { return nodes_[check(id)].grad; }

    std::vector<Node> nodes_;
};

} // namespace kern

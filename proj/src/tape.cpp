#include "kern/tape.hpp"

#include <cmath>

namespace kern {

std::size_t Tape::check(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
        throw Error("internal", "tape: invalid node id");
    return static_cast<std::size_t>(id);
}

Tape::NodeId Tape::push(std::vector<double> val, std::function<void(Tape&, const Node&)> back) {
    nodes_.push_back(Node{std::move(val), {}, std::move(back)});
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::constant(std::vector<double> v) { return push(std::move(v), {}); }

Tape::NodeId Tape::param(Parameter& p) {
    return push(p.value, [&p](Tape&, const Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    });
}

Tape::NodeId Tape::param_row(Parameter& p, int row) {
    if (row < 0 || row >= p.rows)
        throw Error("internal", "tape: row out of range for parameter " + p.name);
    const std::size_t offset = static_cast<std::size_t>(row) * static_cast<std::size_t>(p.cols);
    std::vector<double> v(p.value.begin() + static_cast<std::ptrdiff_t>(offset),
                          p.value.begin() + static_cast<std::ptrdiff_t>(offset + static_cast<std::size_t>(p.cols)));
    return push(std::move(v), [&p, offset](Tape&, const Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[offset + i] += n.grad[i];
    });
}

Tape::NodeId Tape::param_entry(Parameter& p, int index) {
    if (index < 0 || static_cast<std::size_t>(index) >= p.size())
        throw Error("internal", "tape: entry out of range for parameter " + p.name);
    return push({p.value[static_cast<std::size_t>(index)]}, [&p, index](Tape&, const Node& n) {
        p.grad[static_cast<std::size_t>(index)] += n.grad[0];
    });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    const auto& va = value(a);
    const auto& vb = value(b);
    if (va.size() != vb.size()) throw Error("internal", "tape add: size mismatch");
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
        auto& ga = t.grad_of(a);
        auto& gb = t.grad_of(b);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            ga[i] += n.grad[i];
            gb[i] += n.grad[i];
        }
    });
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    const auto& va = value(a);
    const auto& vb = value(b);
    if (va.size() != vb.size()) throw Error("internal", "tape sub: size mismatch");
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
        auto& ga = t.grad_of(a);
        auto& gb = t.grad_of(b);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            ga[i] += n.grad[i];
            gb[i] -= n.grad[i];
        }
    });
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    const auto& va = value(a);
    const auto& vb = value(b);
    if (va.size() != vb.size()) throw Error("internal", "tape mul: size mismatch");
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
        const auto& va2 = t.value(a);
        const auto& vb2 = t.value(b);
        auto& ga = t.grad_of(a);
        auto& gb = t.grad_of(b);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            ga[i] += n.grad[i] * vb2[i];
            gb[i] += n.grad[i] * va2[i];
        }
    });
}

Tape::NodeId Tape::scale(NodeId x, NodeId s) {
    const auto& vx = value(x);
    if (value(s).size() != 1) throw Error("internal", "tape scale: scale factor must be length 1");
    const double c = value(s)[0];
    std::vector<double> out(vx.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * vx[i];
    return push(std::move(out), [x, s](Tape& t, const Node& n) {
        const double c2 = t.value(s)[0];
        const auto& vx2 = t.value(x);
        auto& gx = t.grad_of(x);
        auto& gs = t.grad_of(s);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            gx[i] += n.grad[i] * c2;
            gs[0] += n.grad[i] * vx2[i];
        }
    });
}

Tape::NodeId Tape::scale_const(NodeId x, double c) {
    const auto& vx = value(x);
    std::vector<double> out(vx.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * vx[i];
    return push(std::move(out), [x, c](Tape& t, const Node& n) {
        auto& gx = t.grad_of(x);
        for (std::size_t i = 0; i < n.grad.size(); ++i) gx[i] += n.grad[i] * c;
    });
}

Tape::NodeId Tape::concat(std::span<const NodeId> parts) {
    std::vector<double> out;
    std::vector<NodeId> ids(parts.begin(), parts.end());
    for (const NodeId id : ids) {
        const auto& v = value(id);
        out.insert(out.end(), v.begin(), v.end());
    }
    return push(std::move(out), [ids](Tape& t, const Node& n) {
        std::size_t offset = 0;
        for (const NodeId id : ids) {
            auto& g = t.grad_of(id);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[offset + i];
            offset += g.size();
        }
    });
}

Tape::NodeId Tape::slice(NodeId x, int offset, int len) {
    const auto& vx = value(x);
    if (offset < 0 || len < 0 || static_cast<std::size_t>(offset + len) > vx.size())
        throw Error("internal", "tape slice: range out of bounds");
    std::vector<double> out(vx.begin() + offset, vx.begin() + offset + len);
    return push(std::move(out), [x, offset](Tape& t, const Node& n) {
        auto& gx = t.grad_of(x);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            gx[static_cast<std::size_t>(offset) + i] += n.grad[i];
    });
}

Tape::NodeId Tape::sigmoid(NodeId x) {
    const auto& vx = value(x);
    std::vector<double> out(vx.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-vx[i]));
    return push(std::move(out), [x](Tape& t, const Node& n) {
        auto& gx = t.grad_of(x);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            gx[i] += n.grad[i] * n.val[i] * (1.0 - n.val[i]);
    });
}

Tape::NodeId Tape::tanh(NodeId x) {
    const auto& vx = value(x);
    std::vector<double> out(vx.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(vx[i]);
    return push(std::move(out), [x](Tape& t, const Node& n) {
        auto& gx = t.grad_of(x);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            gx[i] += n.grad[i] * (1.0 - n.val[i] * n.val[i]);
    });
}

Tape::NodeId Tape::relu(NodeId x) {
    const auto& vx = value(x);
    std::vector<double> out(vx.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i] > 0.0 ? vx[i] : 0.0;
    return push(std::move(out), [x](Tape& t, const Node& n) {
        const auto& vx2 = t.value(x);
        auto& gx = t.grad_of(x);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            if (vx2[i] > 0.0) gx[i] += n.grad[i];
    });
}

Tape::NodeId Tape::matvec(Parameter& w, NodeId x) {
    const auto& vx = value(x);
    if (static_cast<std::size_t>(w.cols) != vx.size())
        throw Error("internal", "tape matvec: dimension mismatch for " + w.name);
    std::vector<double> out(static_cast<std::size_t>(w.rows), 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double* wr = w.value.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(w.cols);
        double acc = 0.0;
        for (int c = 0; c < w.cols; ++c) acc += wr[c] * vx[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
    return push(std::move(out), [&w, x](Tape& t, const Node& n) {
        const auto& vx2 = t.value(x);
        auto& gx = t.grad_of(x);
        for (int r = 0; r < w.rows; ++r) {
            const double g = n.grad[static_cast<std::size_t>(r)];
            if (g == 0.0) continue;
            const std::size_t base = static_cast<std::size_t>(r) * static_cast<std::size_t>(w.cols);
            const double* wr = w.value.data() + base;
            double* gw = w.grad.data() + base;
            for (int c = 0; c < w.cols; ++c) {
                gw[c] += g * vx2[static_cast<std::size_t>(c)];
                gx[static_cast<std::size_t>(c)] += g * wr[c];
            }
        }
    });
}

Tape::NodeId Tape::affine(Parameter& w, Parameter& b, NodeId x) {
    if (b.rows != w.rows || b.cols != 1)
        throw Error("internal", "tape affine: bias shape mismatch for " + w.name);
    const auto& vx = value(x);
    if (static_cast<std::size_t>(w.cols) != vx.size())
        throw Error("internal", "tape affine: dimension mismatch for " + w.name);
    std::vector<double> out(static_cast<std::size_t>(w.rows));
    for (int r = 0; r < w.rows; ++r) {
        const double* wr = w.value.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(w.cols);
        double acc = b.value[static_cast<std::size_t>(r)];
        for (int c = 0; c < w.cols; ++c) acc += wr[c] * vx[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
    return push(std::move(out), [&w, &b, x](Tape& t, const Node& n) {
        const auto& vx2 = t.value(x);
        auto& gx = t.grad_of(x);
        for (int r = 0; r < w.rows; ++r) {
            const double g = n.grad[static_cast<std::size_t>(r)];
            if (g == 0.0) continue;
            b.grad[static_cast<std::size_t>(r)] += g;
            const std::size_t base = static_cast<std::size_t>(r) * static_cast<std::size_t>(w.cols);
            const double* wr = w.value.data() + base;
            double* gw = w.grad.data() + base;
            for (int c = 0; c < w.cols; ++c) {
                gw[c] += g * vx2[static_cast<std::size_t>(c)];
                gx[static_cast<std::size_t>(c)] += g * wr[c];
            }
        }
    });
}

Tape::NodeId Tape::l1_distance(NodeId a, NodeId b) {
    const auto& va = value(a);
    const auto& vb = value(b);
    if (va.size() != vb.size()) throw Error("internal", "tape l1_distance: size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) total += std::abs(va[i] - vb[i]);
    return push({total}, [a, b](Tape& t, const Node& n) {
        const auto& va2 = t.value(a);
        const auto& vb2 = t.value(b);
        auto& ga = t.grad_of(a);
        auto& gb = t.grad_of(b);
        const double g = n.grad[0];
        for (std::size_t i = 0; i < va2.size(); ++i) {
            const double d = va2[i] - vb2[i];
            const double s = d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0;
            ga[i] += g * s;
            gb[i] -= g * s;
        }
    });
}

Tape::NodeId Tape::mean_abs_error(std::span<const NodeId> predictions,
                                  std::span<const double> truth) {
    if (predictions.size() != truth.size())
        throw Error("data", "sequence loss: prediction/truth length mismatch");
    if (predictions.empty()) throw Error("data", "sequence loss: empty sequence");
    std::vector<NodeId> preds(predictions.begin(), predictions.end());
    std::vector<double> y(truth.begin(), truth.end());
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (value(preds[i]).size() != 1)
            throw Error("internal", "sequence loss: predictions must be scalars");
        total += std::abs(value(preds[i])[0] - y[i]);
    }
    const double inv = 1.0 / static_cast<double>(preds.size());
    return push({total * inv}, [preds, y, inv](Tape& t, const Node& n) {
        const double g = n.grad[0] * inv;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const double d = t.value(preds[i])[0] - y[i];
            const double s = d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0;
            t.grad_of(preds[i])[0] += g * s;
        }
    });
}

Tape::NodeId Tape::mean(std::span<const NodeId> scalars) {
    if (scalars.empty()) throw Error("internal", "tape mean: empty list");
    std::vector<NodeId> ids(scalars.begin(), scalars.end());
    double total = 0.0;
    for (const NodeId id : ids) {
        if (value(id).size() != 1) throw Error("internal", "tape mean: inputs must be scalars");
        total += value(id)[0];
    }
    const double inv = 1.0 / static_cast<double>(ids.size());
    return push({total * inv}, [ids, inv](Tape& t, const Node& n) {
        for (const NodeId id : ids) t.grad_of(id)[0] += n.grad[0] * inv;
    });
}

double Tape::scalar_value(NodeId id) const {
    const auto& v = value(id);
    if (v.size() != 1) throw Error("internal", "tape: node is not a scalar");
    return v[0];
}

void Tape::backward(NodeId loss) {
    const std::size_t li = check(loss);
    if (nodes_[li].val.size() != 1)
        throw Error("data", "backward: loss must be a scalar node");
    for (auto& node : nodes_) node.grad.assign(node.val.size(), 0.0);
    nodes_[li].grad[0] = 1.0;
    for (std::size_t i = li + 1; i-- > 0;) {
        const Node& node = nodes_[i];
        if (node.back) node.back(*this, node);
    }
}

} // namespace kern

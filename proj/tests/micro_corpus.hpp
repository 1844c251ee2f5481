#pragma once

// Tiny hand-built corpus shared by the model tests and the acceptance suite:
// 2 groups, 3 elements forming a category<-attribute<-value chain, series of
// 16 half-month points.

#include <cmath>
#include <vector>

#include "kern/corpus.hpp"
#include "kern/model.hpp"
#include "kern/taxonomy.hpp"

namespace micro {

inline kern::Corpus corpus() {
    kern::Corpus c;
    c.grid_period = 24;
    c.groups = {{0, 0, 0}, {1, 1, 1}};
    c.elements = {{0, "collar", kern::ElementKind::Attribute},
                  {1, "jacket", kern::ElementKind::Category},
                  {2, "studded", kern::ElementKind::AttributeValue}};
    for (int g = 0; g < 2; ++g) {
        for (int e = 0; e < 3; ++e) {
            kern::TimeSeries s;
            s.group_id = g;
            s.element_id = e;
            s.grid_period = 24;
            s.start_index = 0;
            for (int t = 0; t < 16; ++t)
                s.values.push_back(0.4 + 0.2 * std::sin(0.7 * t + g + 2.0 * e) +
                                   0.05 * ((g + e + t) % 3));
            c.series.push_back(std::move(s));
        }
    }
    return c;
}

inline std::vector<std::pair<std::string, std::string>> edges() {
    return {{"jacket", "collar"}, {"collar", "studded"}};
}

inline kern::Taxonomy taxonomy(const kern::Corpus& c) {
    return kern::build_taxonomy(edges(), c.elements);
}

inline kern::TrainConfig config() {
    kern::TrainConfig cfg;
    cfg.embed_dim = 3;
    cfg.hidden_dim = 5;
    cfg.triplet_weight = 0.5;
    cfg.batch_size = 3;
    cfg.iterations = 4;
    cfg.seed = 7;
    cfg.optimizer.learning_rate = 5e-3;
    return cfg;
}

inline kern::ExperimentSetting setting() { return {"micro", 8, 4, 24}; }

/// The full loss the trainer minimizes, rebuilt as a pure function of the
/// parameters: one batch of three fixed samples and one deterministic
/// triplet, both knowledge modules on.
inline double full_loss(kern::KernModel& model, const std::vector<kern::Sample>& batch,
                        bool backward) {
    kern::Tape tape;
    const auto elems = model.element_nodes(tape);
    std::vector<kern::KernModel::SequenceNodes> outputs;
    std::vector<kern::Tape::NodeId> losses;
    for (const auto& s : batch) {
        outputs.push_back(model.forward(tape, s, elems, true));
        losses.push_back(tape.add(outputs.back().encoder_loss, outputs.back().decoder_loss));
    }
    std::vector<const kern::Sample*> ptrs;
    for (const auto& s : batch) ptrs.push_back(&s);
    kern::Rng rng(7, 0);
    const kern::Triplet tri = kern::sample_triplet(ptrs, rng);
    const auto reg = kern::triplet_regularizer(tape, outputs[static_cast<std::size_t>(tri.anchor)],
                                               outputs[static_cast<std::size_t>(tri.close)],
                                               outputs[static_cast<std::size_t>(tri.far)]);
    const auto total = tape.add(tape.mean(losses),
                                tape.scale_const(reg, model.config.triplet_weight));
    if (backward) tape.backward(total);
    return tape.scalar_value(total);
}

inline std::vector<kern::Sample> fixed_batch(const kern::Corpus& c,
                                             const kern::ExperimentSetting& s) {
    std::vector<kern::Sample> batch;
    for (int e = 0; e < 3; ++e) {
        const auto samples = kern::make_samples(c.series[static_cast<std::size_t>(e)], s.input_len,
                                                s.horizon, 1);
        batch.push_back(samples.front());
    }
    return batch;
}

} // namespace micro

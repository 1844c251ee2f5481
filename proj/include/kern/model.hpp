#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kern/corpus.hpp"
#include "kern/lstm.hpp"
#include "kern/optimizer.hpp"
#include "kern/tape.hpp"
#include "kern/taxonomy.hpp"

namespace kern {

struct TrainConfig {
    int embed_dim = 10;   // D
    int hidden_dim = 50;  // H
    double triplet_weight = 2e-4;
    int batch_size = 400;
    int iterations = 300;
    OptimizerConfig optimizer;
    std::uint64_t seed = 1;
    bool use_internal_knowledge = true;
    bool use_external_knowledge = true;
};

/// Named experiment windows: half-year (48 in / 12 out, half-month grid),
/// one-year (48 / 24), geostyle (52 / 26, weekly grid).
struct ExperimentSetting {
    std::string name = "half-year";
    int input_len = 48;
    int horizon = 12;
    int grid_period = 24;
};

ExperimentSetting setting_by_name(const std::string& name);

/// Every learnable tensor of the model.
struct KernParams {
    Parameter city_table, age_table, gender_table, element_table, timestep_table;
    Parameter group_weights, group_bias; // D x 3D, D
    LstmCellParams encoder;              // input 3D+1
    LstmCellParams decoder_fwd, decoder_bwd; // input 3D
    Parameter encoder_head_w, encoder_head_b; // 1 x H, 1
    Parameter decoder_head_w, decoder_head_b; // 1 x 2H, 1
    Parameter relation_weights; // one per taxonomy edge

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
};

struct KernModel {
    TrainConfig config;
    int input_len = 0;
    int horizon = 0;
    int grid_period = 24;
    std::vector<UserGroup> groups;        // id catalogs frozen at training time
    std::vector<FashionElement> elements;
    Taxonomy taxonomy;
    KernParams params;

    static KernModel create(const Corpus& corpus, const Taxonomy& taxonomy,
                            const TrainConfig& config, const ExperimentSetting& setting);

    /// Allocates all tensors (zero-filled) for the given catalogs; used by
    /// create() and by the checkpoint loader.
    static KernModel shell(const TrainConfig& config, std::vector<UserGroup> groups,
                           std::vector<FashionElement> elements, Taxonomy taxonomy, int input_len,
                           int horizon, int grid_period);

    int find_group(const UserGroup& triple) const;
    int find_element(std::string_view name) const;

    struct SequenceNodes {
        std::vector<Tape::NodeId> encoder_hidden; // h_1..h_T
        std::vector<Tape::NodeId> decoder_hidden; // T' nodes of width 2H
        std::vector<Tape::NodeId> encoder_preds;  // T-1 scalars
        std::vector<Tape::NodeId> decoder_preds;  // T' scalars
        Tape::NodeId encoder_loss = -1;
        Tape::NodeId decoder_loss = -1;
    };

    /// Embedding row per element; with external knowledge on, the taxonomy
    /// message passing has been applied (children feed parents, weighted by
    /// the learnable relation weights).
    std::vector<Tape::NodeId> element_nodes(Tape& tape);

    /// Fused group representation W [c; a; n] + b.
    Tape::NodeId group_embedding(Tape& tape, int group_id);

    /// Teacher-forced encoder over the input window, then the bidirectional
    /// decoder over the horizon (both directions start from the encoder's
    /// final state). L1 losses are attached when `with_losses`.
    SequenceNodes forward(Tape& tape, const Sample& sample,
                          const std::vector<Tape::NodeId>& element_nodes, bool with_losses);

    /// Decoder predictions for one input window; pure in the parameters and
    /// stateless across calls (the tape it records is local).
    std::vector<double> forecast(int group_id, int element_id, std::span<const double> window,
                                 long window_start_index) const;
};

/// Mean absolute error between a prediction sequence and ground truth.
double sequence_loss(std::span<const double> predictions, std::span<const double> truth);

struct Triplet {
    int anchor = -1; // k
    int close = -1;  // p
    int far = -1;    // q
};

/// Draws three distinct samples and orders (close, far) so the anchor's L1
/// distance over the full ground-truth window is smaller to `close`.
/// Exact distance ties are re-drawn.
Triplet sample_triplet(std::span<const Sample* const> batch, Rng& rng);

/// Hinge regularizer over per-step hidden-state distances: encoder steps are
/// compared in R^H (the T-1 prediction states), decoder steps in R^2H, and
/// the hinge max(0, d_close - d_far) is averaged over all compared steps.
Tape::NodeId triplet_regularizer(Tape& tape, const KernModel::SequenceNodes& anchor,
                                 const KernModel::SequenceNodes& close,
                                 const KernModel::SequenceNodes& far);

/// Sum of the three sequences' encoder+decoder losses plus lambda times the
/// regularizer.
Tape::NodeId triplet_total_loss(Tape& tape, const KernModel::SequenceNodes& anchor,
                                const KernModel::SequenceNodes& close,
                                const KernModel::SequenceNodes& far, Tape::NodeId regularizer,
                                double lambda);

struct TrainRecord {
    double loss = 0.0;
    double triplet = 0.0;
};

struct Checkpoint {
    KernModel model;
    std::vector<TrainRecord> history;
};

/// Full training loop: batches sampled over the training-role windows of all
/// series, message passing per forward pass when external knowledge is on,
/// in-batch triplets when internal knowledge is on. Deterministic per seed.
/// `log` (optional) receives one line per iteration with the loss, the
/// triplet term, and the per-parent relation-weight sums.
Checkpoint train_kern(const Corpus& corpus, const Taxonomy& taxonomy, const TrainConfig& config,
                      const ExperimentSetting& setting, std::ostream* log = nullptr);

} // namespace kern

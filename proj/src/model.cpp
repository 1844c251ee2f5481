#include "kern/model.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "kern/numio.hpp"

namespace kern {

ExperimentSetting setting_by_name(const std::string& name) {
    if (name == "half-year") return {"half-year", 48, 12, 24};
    if (name == "one-year") return {"one-year", 48, 24, 24};
    if (name == "geostyle") return {"geostyle", 52, 26, 52};
    throw Error("config", "unknown setting '" + name + "' (expected half-year, one-year or geostyle)");
}

std::vector<Parameter*> KernParams::all() {
    return {&city_table,     &age_table,          &gender_table,  &element_table,
            &timestep_table, &group_weights,      &group_bias,    &encoder.input_weights,
            &encoder.hidden_weights, &encoder.bias, &decoder_fwd.input_weights,
            &decoder_fwd.hidden_weights, &decoder_fwd.bias, &decoder_bwd.input_weights,
            &decoder_bwd.hidden_weights, &decoder_bwd.bias, &encoder_head_w, &encoder_head_b,
            &decoder_head_w, &decoder_head_b, &relation_weights};
}

std::vector<const Parameter*> KernParams::all() const {
    auto list = const_cast<KernParams*>(this)->all();
    return {list.begin(), list.end()};
}

KernModel KernModel::shell(const TrainConfig& config, std::vector<UserGroup> groups,
                           std::vector<FashionElement> elements, Taxonomy taxonomy, int input_len,
                           int horizon, int grid_period) {
    if (config.embed_dim < 1 || config.hidden_dim < 1)
        throw Error("config", "model dimensions must be positive");
    if (config.triplet_weight < 0.0)
        throw Error("config", "triplet regularization weight must be >= 0");
    if (input_len < 2 || horizon < 1)
        throw Error("config", "need an input window of >= 2 and a horizon of >= 1");
    if (groups.empty() || elements.empty())
        throw Error("data", "cannot build a model over an empty corpus");
    if (taxonomy.num_nodes() != elements.size())
        throw Error("data", "taxonomy does not cover the corpus elements");

    KernModel m;
    m.config = config;
    m.input_len = input_len;
    m.horizon = horizon;
    m.grid_period = grid_period;
    m.groups = std::move(groups);
    m.elements = std::move(elements);
    m.taxonomy = std::move(taxonomy);

    int max_city = 0;
    for (const auto& g : m.groups) max_city = std::max(max_city, g.city);

    const int d = config.embed_dim;
    const int h = config.hidden_dim;
    m.params.city_table = Parameter("embed.city", max_city + 1, d);
    m.params.age_table = Parameter("embed.age", 4, d);
    m.params.gender_table = Parameter("embed.gender", 2, d);
    m.params.element_table = Parameter("embed.element", static_cast<int>(m.elements.size()), d);
    m.params.timestep_table = Parameter("embed.timestep", grid_period, d);
    m.params.group_weights = Parameter("group.weight", d, 3 * d);
    m.params.group_bias = Parameter("group.bias", d);
    m.params.encoder = LstmCellParams("encoder", 3 * d + 1, h);
    m.params.decoder_fwd = LstmCellParams("decoder_fwd", 3 * d, h);
    m.params.decoder_bwd = LstmCellParams("decoder_bwd", 3 * d, h);
    m.params.encoder_head_w = Parameter("head.encoder.weight", 1, h);
    m.params.encoder_head_b = Parameter("head.encoder.bias", 1);
    m.params.decoder_head_w = Parameter("head.decoder.weight", 1, 2 * h);
    m.params.decoder_head_b = Parameter("head.decoder.bias", 1);
    m.params.relation_weights =
        Parameter("taxonomy.relation_weights", static_cast<int>(m.taxonomy.edges().size()));
    return m;
}

KernModel KernModel::create(const Corpus& corpus, const Taxonomy& taxonomy,
                            const TrainConfig& config, const ExperimentSetting& setting) {
    KernModel m = shell(config, corpus.groups, corpus.elements, taxonomy, setting.input_len,
                        setting.horizon, setting.grid_period);

    Rng init_rng(config.seed, 100);
    const int d = config.embed_dim;
    const int h = config.hidden_dim;
    init_uniform(m.params.city_table, d, init_rng);
    init_uniform(m.params.age_table, d, init_rng);
    init_uniform(m.params.gender_table, d, init_rng);
    init_uniform(m.params.element_table, d, init_rng);
    init_uniform(m.params.timestep_table, d, init_rng);
    init_uniform(m.params.group_weights, 3 * d, init_rng);
    init_lstm(m.params.encoder, init_rng);
    init_lstm(m.params.decoder_fwd, init_rng);
    init_lstm(m.params.decoder_bwd, init_rng);
    init_uniform(m.params.encoder_head_w, h, init_rng);
    init_uniform(m.params.decoder_head_w, 2 * h, init_rng);

    const auto w0 = init_relation_weights(m.taxonomy);
    m.params.relation_weights.value = w0;
    m.params.relation_weights.grad.assign(w0.size(), 0.0);
    return m;
}

int KernModel::find_group(const UserGroup& triple) const {
    for (std::size_t i = 0; i < groups.size(); ++i)
        if (groups[i] == triple) return static_cast<int>(i);
    return -1;
}

int KernModel::find_element(std::string_view name) const {
    for (const auto& e : elements)
        if (e.name == name) return e.id;
    return -1;
}

std::vector<Tape::NodeId> KernModel::element_nodes(Tape& tape) {
    std::vector<Tape::NodeId> nodes(elements.size());
    for (std::size_t i = 0; i < elements.size(); ++i)
        nodes[i] = tape.param_row(params.element_table, static_cast<int>(i));
    if (!config.use_external_knowledge) return nodes;

    for (const auto& pass : taxonomy.passes()) {
        const auto snapshot = nodes;
        for (const auto& group : pass) {
            Tape::NodeId message = -1;
            for (const int edge_index : group.edge_indices) {
                const auto& edge = taxonomy.edges()[static_cast<std::size_t>(edge_index)];
                const auto weighted =
                    tape.scale(snapshot[static_cast<std::size_t>(edge.child)],
                               tape.param_entry(params.relation_weights, edge_index));
                message = message < 0 ? weighted : tape.add(message, weighted);
            }
            auto& parent = nodes[static_cast<std::size_t>(group.parent)];
            parent = tape.add(snapshot[static_cast<std::size_t>(group.parent)], message);
        }
    }
    return nodes;
}

Tape::NodeId KernModel::group_embedding(Tape& tape, int group_id) {
    if (group_id < 0 || static_cast<std::size_t>(group_id) >= groups.size())
        throw Error("data", "group id out of range: " + std::to_string(group_id));
    const auto& g = groups[static_cast<std::size_t>(group_id)];
    const std::vector<Tape::NodeId> parts = {tape.param_row(params.city_table, g.city),
                                             tape.param_row(params.age_table, g.age_band),
                                             tape.param_row(params.gender_table, g.gender)};
    return tape.affine(params.group_weights, params.group_bias, tape.concat(parts));
}

KernModel::SequenceNodes KernModel::forward(Tape& tape, const Sample& sample,
                                            const std::vector<Tape::NodeId>& elems,
                                            bool with_losses) {
    const int t_in = static_cast<int>(sample.input.size());
    const int t_out = horizon;
    if (t_in != input_len)
        throw Error("data", "forward: input window length " + std::to_string(t_in) +
                                " does not match the configured " + std::to_string(input_len));
    if (sample.positions.size() != static_cast<std::size_t>(input_len + horizon))
        throw Error("data", "forward: sample carries wrong number of timestep positions");
    if (sample.element_id < 0 || static_cast<std::size_t>(sample.element_id) >= elems.size())
        throw Error("data", "element id out of range: " + std::to_string(sample.element_id));

    SequenceNodes out;
    const auto group_node = group_embedding(tape, sample.group_id);
    const auto element_node = elems[static_cast<std::size_t>(sample.element_id)];

    auto timestep_node = [&](int step) {
        const int pos = sample.positions[static_cast<std::size_t>(step)];
        if (pos < 0 || pos >= grid_period)
            throw Error("data", "timestep position out of range: " + std::to_string(pos));
        return tape.param_row(params.timestep_table, pos);
    };

    // encoder: teacher forcing, h_t predicts the next observed value
    LstmState state = lstm_zero_state(tape, params.encoder);
    out.encoder_hidden.reserve(static_cast<std::size_t>(t_in));
    out.encoder_preds.reserve(static_cast<std::size_t>(t_in - 1));
    for (int t = 0; t < t_in; ++t) {
        const std::vector<Tape::NodeId> parts = {group_node, element_node, timestep_node(t),
                                                 tape.scalar(sample.input[static_cast<std::size_t>(t)])};
        state = lstm_cell(tape, params.encoder, tape.concat(parts), state);
        out.encoder_hidden.push_back(state.hidden);
        if (t + 1 < t_in)
            out.encoder_preds.push_back(
                tape.affine(params.encoder_head_w, params.encoder_head_b, state.hidden));
    }

    // decoder: both directions start from the encoder's final state
    std::vector<Tape::NodeId> dec_inputs(static_cast<std::size_t>(t_out));
    for (int t = 0; t < t_out; ++t) {
        const std::vector<Tape::NodeId> parts = {group_node, element_node, timestep_node(t_in + t)};
        dec_inputs[static_cast<std::size_t>(t)] = tape.concat(parts);
    }
    std::vector<Tape::NodeId> fwd(static_cast<std::size_t>(t_out));
    LstmState dec_state = state;
    for (int t = 0; t < t_out; ++t) {
        dec_state = lstm_cell(tape, params.decoder_fwd, dec_inputs[static_cast<std::size_t>(t)], dec_state);
        fwd[static_cast<std::size_t>(t)] = dec_state.hidden;
    }
    std::vector<Tape::NodeId> bwd(static_cast<std::size_t>(t_out));
    dec_state = state;
    for (int t = t_out - 1; t >= 0; --t) {
        dec_state = lstm_cell(tape, params.decoder_bwd, dec_inputs[static_cast<std::size_t>(t)], dec_state);
        bwd[static_cast<std::size_t>(t)] = dec_state.hidden;
    }
    out.decoder_hidden.reserve(static_cast<std::size_t>(t_out));
    out.decoder_preds.reserve(static_cast<std::size_t>(t_out));
    for (int t = 0; t < t_out; ++t) {
        const std::vector<Tape::NodeId> parts = {fwd[static_cast<std::size_t>(t)],
                                                 bwd[static_cast<std::size_t>(t)]};
        const auto joint = tape.concat(parts);
        out.decoder_hidden.push_back(joint);
        out.decoder_preds.push_back(tape.affine(params.decoder_head_w, params.decoder_head_b, joint));
    }

    if (with_losses) {
        if (sample.target.size() != static_cast<std::size_t>(t_out))
            throw Error("data", "forward: target length does not match the horizon");
        if (t_in >= 2) {
            const std::span<const double> next_values(sample.input.data() + 1,
                                                      static_cast<std::size_t>(t_in - 1));
            out.encoder_loss = tape.mean_abs_error(out.encoder_preds, next_values);
        } else {
            out.encoder_loss = tape.scalar(0.0);
        }
        out.decoder_loss = tape.mean_abs_error(out.decoder_preds, sample.target);
    }
    return out;
}

std::vector<double> KernModel::forecast(int group_id, int element_id,
                                        std::span<const double> window,
                                        long window_start_index) const {
    if (window.size() != static_cast<std::size_t>(input_len))
        throw Error("data", "forecast: window length " + std::to_string(window.size()) +
                                " does not match the configured " + std::to_string(input_len));
    for (const double v : window)
        if (is_missing(v)) throw Error("data", "forecast: window contains missing values");
    if (element_id < 0 || static_cast<std::size_t>(element_id) >= elements.size())
        throw Error("data", "element id out of range: " + std::to_string(element_id));

    Sample s;
    s.group_id = group_id;
    s.element_id = element_id;
    s.input.assign(window.begin(), window.end());
    s.positions.resize(static_cast<std::size_t>(input_len + horizon));
    for (int j = 0; j < input_len + horizon; ++j)
        s.positions[static_cast<std::size_t>(j)] =
            timestep_position(window_start_index + j, grid_period);

    // the tape only reads parameter values unless backward() runs, so the
    // forward pass leaves the model untouched
    KernModel& self = const_cast<KernModel&>(*this);
    Tape tape;
    const auto elems = self.element_nodes(tape);
    const auto seq = self.forward(tape, s, elems, false);
    std::vector<double> out;
    out.reserve(seq.decoder_preds.size());
    for (const auto id : seq.decoder_preds) out.push_back(tape.scalar_value(id));
    return out;
}

double sequence_loss(std::span<const double> predictions, std::span<const double> truth) {
    if (predictions.size() != truth.size())
        throw Error("data", "sequence_loss: length mismatch");
    if (predictions.empty()) throw Error("data", "sequence_loss: empty sequence");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) total += std::abs(predictions[i] - truth[i]);
    return total / static_cast<double>(predictions.size());
}

namespace {

double window_distance(const Sample& a, const Sample& b) {
    if (a.input.size() != b.input.size() || a.target.size() != b.target.size())
        throw Error("data", "sample_triplet: samples have mismatched window lengths");
    double d = 0.0;
    for (std::size_t i = 0; i < a.input.size(); ++i) d += std::abs(a.input[i] - b.input[i]);
    for (std::size_t i = 0; i < a.target.size(); ++i) d += std::abs(a.target[i] - b.target[i]);
    return d;
}

} // namespace

Triplet sample_triplet(std::span<const Sample* const> batch, Rng& rng) {
    if (batch.size() < 3)
        throw Error("data", "sample_triplet: need at least 3 samples, got " +
                                std::to_string(batch.size()));
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const auto idx = rng.sample_indices(static_cast<int>(batch.size()), 3);
        Triplet t{idx[0], idx[1], idx[2]};
        const double dp = window_distance(*batch[static_cast<std::size_t>(t.anchor)],
                                          *batch[static_cast<std::size_t>(t.close)]);
        const double dq = window_distance(*batch[static_cast<std::size_t>(t.anchor)],
                                          *batch[static_cast<std::size_t>(t.far)]);
        if (dp == dq) continue; // exact tie: re-draw
        if (dp > dq) std::swap(t.close, t.far);
        return t;
    }
    throw Error("data", "sample_triplet: could not draw a tie-free triplet");
}

Tape::NodeId triplet_regularizer(Tape& tape, const KernModel::SequenceNodes& anchor,
                                 const KernModel::SequenceNodes& close,
                                 const KernModel::SequenceNodes& far) {
    const std::size_t enc = anchor.encoder_hidden.size();
    const std::size_t dec = anchor.decoder_hidden.size();
    if (close.encoder_hidden.size() != enc || far.encoder_hidden.size() != enc ||
        close.decoder_hidden.size() != dec || far.decoder_hidden.size() != dec)
        throw Error("data", "triplet_regularizer: stage misalignment between sequences");

    std::vector<Tape::NodeId> hinges;
    auto compare = [&](Tape::NodeId hk, Tape::NodeId hp, Tape::NodeId hq) {
        const auto d_close = tape.l1_distance(hk, hp);
        const auto d_far = tape.l1_distance(hk, hq);
        hinges.push_back(tape.relu(tape.sub(d_close, d_far)));
    };
    // the encoder states that feed predictions (the final one hands off to
    // the decoder, giving T-1+T' compared steps)
    for (std::size_t t = 0; t + 1 < enc; ++t)
        compare(anchor.encoder_hidden[t], close.encoder_hidden[t], far.encoder_hidden[t]);
    for (std::size_t t = 0; t < dec; ++t)
        compare(anchor.decoder_hidden[t], close.decoder_hidden[t], far.decoder_hidden[t]);
    if (hinges.empty()) return tape.scalar(0.0);
    return tape.mean(hinges);
}

Tape::NodeId triplet_total_loss(Tape& tape, const KernModel::SequenceNodes& anchor,
                                const KernModel::SequenceNodes& close,
                                const KernModel::SequenceNodes& far, Tape::NodeId regularizer,
                                double lambda) {
    if (lambda < 0.0) throw Error("config", "triplet weight must be >= 0");
    auto seq_sum = [&](const KernModel::SequenceNodes& s) {
        return tape.add(s.encoder_loss, s.decoder_loss);
    };
    const auto losses = tape.add(tape.add(seq_sum(anchor), seq_sum(close)), seq_sum(far));
    return tape.add(losses, tape.scale_const(regularizer, lambda));
}

Checkpoint train_kern(const Corpus& corpus, const Taxonomy& taxonomy, const TrainConfig& config,
                      const ExperimentSetting& setting, std::ostream* log) {
    if (config.batch_size < 1) throw Error("config", "batch size must be >= 1");
    if (config.use_internal_knowledge && config.batch_size < 3)
        throw Error("config", "internal knowledge requires a batch size of at least 3");
    if (config.iterations < 0) throw Error("config", "iteration count must be >= 0");
    if (corpus.grid_period != setting.grid_period)
        throw Error("config", "corpus grid period " + std::to_string(corpus.grid_period) +
                                  " does not match setting '" + setting.name + "'");

    // training pool: every training-role window of every usable series
    std::vector<Sample> pool;
    std::size_t skipped = 0;
    for (std::size_t si = 0; si < corpus.series.size(); ++si) {
        const auto& raw = corpus.series[si];
        if (raw.values.size() < static_cast<std::size_t>(setting.input_len + setting.horizon) ||
            raw.missing_fraction() > 0.5) {
            ++skipped;
            continue;
        }
        const TimeSeries series = impute_missing(raw);
        auto samples = make_samples(series, setting.input_len, setting.horizon, 1);
        for (auto& s : samples) {
            if (s.role != Sample::Role::Train) continue;
            s.series_index = static_cast<int>(si);
            pool.push_back(std::move(s));
        }
    }
    if (pool.empty()) throw Error("data", "no training samples (series too short?)");

    KernModel model = KernModel::create(corpus, taxonomy, config, setting);
    Optimizer optimizer(config.optimizer, model.params.all());
    Rng batch_rng(config.seed, 201);
    Rng triplet_rng(config.seed, 202);

    if (log) {
        *log << "# kern training: samples=" << pool.size() << " skipped_series=" << skipped
             << " internal=" << (config.use_internal_knowledge ? "on" : "off")
             << " external=" << (config.use_external_knowledge ? "on" : "off")
             << " lambda=" << format_double(config.triplet_weight) << "\n";
    }

    Checkpoint ckpt;
    ckpt.history.reserve(static_cast<std::size_t>(config.iterations));

    const int batch_size = std::min<int>(config.batch_size, static_cast<int>(pool.size()));
    for (int iteration = 1; iteration <= config.iterations; ++iteration) {
        const auto picks = batch_rng.sample_indices(static_cast<int>(pool.size()), batch_size);
        std::vector<const Sample*> batch;
        batch.reserve(picks.size());
        for (const int i : picks) batch.push_back(&pool[static_cast<std::size_t>(i)]);

        Tape tape;
        const auto elems = model.element_nodes(tape);
        std::vector<KernModel::SequenceNodes> outputs;
        std::vector<Tape::NodeId> sample_losses;
        outputs.reserve(batch.size());
        for (const Sample* s : batch) {
            outputs.push_back(model.forward(tape, *s, elems, true));
            sample_losses.push_back(tape.add(outputs.back().encoder_loss, outputs.back().decoder_loss));
        }
        Tape::NodeId total = tape.mean(sample_losses);

        double triplet_value = 0.0;
        if (config.use_internal_knowledge && batch.size() >= 3) {
            const int n_triplets = static_cast<int>(batch.size()) / 3;
            std::vector<Tape::NodeId> regs;
            regs.reserve(static_cast<std::size_t>(n_triplets));
            for (int i = 0; i < n_triplets; ++i) {
                const Triplet t = sample_triplet(batch, triplet_rng);
                regs.push_back(triplet_regularizer(tape, outputs[static_cast<std::size_t>(t.anchor)],
                                                   outputs[static_cast<std::size_t>(t.close)],
                                                   outputs[static_cast<std::size_t>(t.far)]));
            }
            const auto reg_mean = tape.mean(regs);
            triplet_value = tape.scalar_value(reg_mean);
            total = tape.add(total, tape.scale_const(reg_mean, config.triplet_weight));
        }

        const double loss_value = tape.scalar_value(total);
        if (!std::isfinite(loss_value))
            throw Error("train", "non-finite loss " + format_double(loss_value) + " at iteration " +
                                     std::to_string(iteration));

        optimizer.zero_grad();
        tape.backward(total);
        optimizer.step();
        ckpt.history.push_back({loss_value, triplet_value});

        if (log) {
            *log << "iter=" << iteration << " loss=" << format_double(loss_value)
                 << " triplet=" << format_double(triplet_value) << " parent_weight_sums=";
            bool first = true;
            for (const auto& pass : taxonomy.passes()) {
                for (const auto& group : pass) {
                    double sum = 0.0;
                    for (const int e : group.edge_indices)
                        sum += model.params.relation_weights.value[static_cast<std::size_t>(e)];
                    if (!first) *log << ';';
                    first = false;
                    *log << model.elements[static_cast<std::size_t>(group.parent)].name << ':'
                         << format_double(sum);
                }
            }
            *log << "\n";
        }
    }

    ckpt.model = std::move(model);
    return ckpt;
}

} // namespace kern

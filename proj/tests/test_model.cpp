#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kern/checkpoint.hpp"
#include "kern/model.hpp"
#include "micro_corpus.hpp"

using namespace kern;

namespace {

KernModel micro_model(TrainConfig cfg = micro::config()) {
    const Corpus c = micro::corpus();
    return KernModel::create(c, micro::taxonomy(c), cfg, micro::setting());
}

void zero_all(KernModel& m) {
    for (Parameter* p : m.params.all()) std::fill(p->value.begin(), p->value.end(), 0.0);
}

} // namespace

TEST_CASE("dimensions follow the embedding width") {
    TrainConfig cfg = micro::config();
    cfg.embed_dim = 10;
    cfg.hidden_dim = 50;
    const KernModel m = micro_model(cfg);
    CHECK(m.params.encoder.input_dim() == 31);      // 3D+1
    CHECK(m.params.decoder_fwd.input_dim() == 30);  // 3D
    CHECK(m.params.decoder_bwd.input_dim() == 30);
    CHECK(m.params.encoder_head_w.cols == 50);      // H -> 1
    CHECK(m.params.decoder_head_w.cols == 100);     // 2H -> 1
    CHECK(m.params.group_weights.rows == 10);
    CHECK(m.params.group_weights.cols == 30);
}

TEST_CASE("group embedding reduces to the bias under zero weights") {
    KernModel m = micro_model();
    zero_all(m);
    m.params.group_bias.value = {0.25, -0.5, 1.0};
    Tape tape;
    const auto g = m.group_embedding(tape, 0);
    CHECK(tape.value(g) == std::vector<double>{0.25, -0.5, 1.0});
}

TEST_CASE("group embedding with an identity block selects the city embedding") {
    KernModel m = micro_model();
    zero_all(m);
    const int d = m.config.embed_dim;
    // W = [I 0 0]
    for (int i = 0; i < d; ++i)
        m.params.group_weights.value[static_cast<std::size_t>(i * 3 * d + i)] = 1.0;
    for (int j = 0; j < d; ++j)
        m.params.city_table.value[static_cast<std::size_t>(j)] = 0.1 * (j + 1);
    Tape tape;
    const auto g = m.group_embedding(tape, 0); // group 0 has city 0
    const auto& v = tape.value(g);
    for (int j = 0; j < d; ++j)
        CHECK(v[static_cast<std::size_t>(j)] == doctest::Approx(0.1 * (j + 1)));
}

TEST_CASE("group embedding rejects out-of-range ids") {
    KernModel m = micro_model();
    Tape tape;
    CHECK_THROWS_AS(m.group_embedding(tape, 17), Error);
}

TEST_CASE("forward pass emits T hidden states, T-1 encoder and T' decoder predictions") {
    KernModel m = micro_model();
    const auto batch = micro::fixed_batch(micro::corpus(), micro::setting());
    Tape tape;
    const auto elems = m.element_nodes(tape);
    const auto out = m.forward(tape, batch[0], elems, true);
    CHECK(out.encoder_hidden.size() == 8);
    CHECK(out.encoder_preds.size() == 7);
    CHECK(out.decoder_hidden.size() == 4);
    CHECK(out.decoder_preds.size() == 4);
    CHECK(tape.length(out.decoder_hidden[0]) == 2 * m.config.hidden_dim);
}

TEST_CASE("zero parameters predict the heads' biases everywhere") {
    KernModel m = micro_model();
    zero_all(m);
    m.params.encoder_head_b.value = {0.33};
    m.params.decoder_head_b.value = {0.77};
    const auto batch = micro::fixed_batch(micro::corpus(), micro::setting());
    Tape tape;
    const auto elems = m.element_nodes(tape);
    const auto out = m.forward(tape, batch[1], elems, true);
    for (const auto id : out.encoder_preds)
        CHECK(tape.scalar_value(id) == doctest::Approx(0.33));
    for (const auto id : out.decoder_preds)
        CHECK(tape.scalar_value(id) == doctest::Approx(0.77));
}

TEST_CASE("sequence loss is the mean absolute error") {
    const std::vector<double> a = {0.2}, b = {0.5};
    CHECK(sequence_loss(a, b) == doctest::Approx(0.3));
    CHECK(sequence_loss(b, b) == 0.0);
    const std::vector<double> c = {0.0, 1.0}, d = {1.0, 0.0};
    CHECK(sequence_loss(c, d) == doctest::Approx(1.0));
    CHECK_THROWS_AS(sequence_loss({}, {}), Error);
}

namespace {

Sample flat_sample(std::vector<double> input, std::vector<double> target) {
    Sample s;
    s.input = std::move(input);
    s.target = std::move(target);
    return s;
}

} // namespace

TEST_CASE("triplet sampling orders by ground-truth closeness") {
    // anchor equals p exactly; q differs
    const Sample k = flat_sample({0.5, 0.5}, {0.5});
    const Sample p = k;
    const Sample q = flat_sample({0.9, 0.1}, {0.2});
    const std::vector<const Sample*> batch = {&k, &p, &q};
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const Triplet t = sample_triplet(batch, rng);
        const auto dist = [&](int x, int y) {
            double d = 0.0;
            for (std::size_t j = 0; j < batch[static_cast<std::size_t>(x)]->input.size(); ++j)
                d += std::abs(batch[static_cast<std::size_t>(x)]->input[j] -
                              batch[static_cast<std::size_t>(y)]->input[j]);
            for (std::size_t j = 0; j < batch[static_cast<std::size_t>(x)]->target.size(); ++j)
                d += std::abs(batch[static_cast<std::size_t>(x)]->target[j] -
                              batch[static_cast<std::size_t>(y)]->target[j]);
            return d;
        };
        CHECK(dist(t.anchor, t.close) < dist(t.anchor, t.far));
    }
}

TEST_CASE("triplet sampling re-draws exact ties and gives up eventually") {
    const Sample a = flat_sample({0.5}, {0.5});
    const Sample b = a, c = a; // all pairwise distances are zero
    const std::vector<const Sample*> batch = {&a, &b, &c};
    Rng rng(1);
    CHECK_THROWS_AS(sample_triplet(batch, rng), Error);
}

TEST_CASE("triplet sampling needs three samples") {
    const Sample a = flat_sample({0.1}, {0.1});
    const Sample b = flat_sample({0.9}, {0.9});
    const std::vector<const Sample*> batch = {&a, &b};
    Rng rng(1);
    CHECK_THROWS_AS(sample_triplet(batch, rng), Error);
}

namespace {

KernModel::SequenceNodes const_hiddens(Tape& tape, const std::vector<std::vector<double>>& enc,
                                       const std::vector<std::vector<double>>& dec) {
    KernModel::SequenceNodes out;
    for (const auto& h : enc) out.encoder_hidden.push_back(tape.constant(h));
    for (const auto& h : dec) out.decoder_hidden.push_back(tape.constant(h));
    return out;
}

} // namespace

TEST_CASE("triplet regularizer examples") {
    Tape tape;
    // three steps compared: encoder steps 1..2 (of 3 states) and one decoder step
    const auto anchor = const_hiddens(tape, {{0.0, 0.0}, {0.0, 0.0}, {9.0, 9.0}}, {{0.0}});

    SUBCASE("hinge inactive when close is closer at every step") {
        const auto close = const_hiddens(tape, {{0.1, 0.0}, {0.0, 0.1}, {0.0, 0.0}}, {{0.1}});
        const auto far = const_hiddens(tape, {{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}}, {{1.0}});
        CHECK(tape.scalar_value(triplet_regularizer(tape, anchor, close, far)) == 0.0);
    }
    SUBCASE("constant violation of 0.1 averages to 0.1") {
        const auto close = const_hiddens(tape, {{0.6, 0.0}, {0.6, 0.0}, {0.0, 0.0}}, {{0.6}});
        const auto far = const_hiddens(tape, {{0.5, 0.0}, {0.5, 0.0}, {0.0, 0.0}}, {{0.5}});
        CHECK(tape.scalar_value(triplet_regularizer(tape, anchor, close, far)) ==
              doctest::Approx(0.1));
    }
    SUBCASE("anchor identical to close gives zero") {
        const auto close = const_hiddens(tape, {{0.0, 0.0}, {0.0, 0.0}, {9.0, 9.0}}, {{0.0}});
        const auto far = const_hiddens(tape, {{0.3, 0.0}, {0.0, 0.3}, {0.0, 0.0}}, {{0.7}});
        CHECK(tape.scalar_value(triplet_regularizer(tape, anchor, close, far)) == 0.0);
    }
    SUBCASE("stage misalignment is rejected") {
        const auto close = const_hiddens(tape, {{0.1, 0.0}, {0.0, 0.1}}, {{0.1}});
        const auto far = const_hiddens(tape, {{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}}, {{1.0}});
        CHECK_THROWS_AS(triplet_regularizer(tape, anchor, close, far), Error);
    }
}

TEST_CASE("hinge asymmetry: swapping a correctly ordered pair cannot lower the penalty") {
    Tape tape;
    const auto anchor = const_hiddens(tape, {{0.0, 0.0}}, {{0.0}});
    const auto close = const_hiddens(tape, {{0.2, 0.0}}, {{0.1}});
    const auto far = const_hiddens(tape, {{0.9, 0.0}}, {{0.8}});
    const double correct = tape.scalar_value(triplet_regularizer(tape, anchor, close, far));
    const double swapped = tape.scalar_value(triplet_regularizer(tape, anchor, far, close));
    CHECK(correct == 0.0);
    CHECK(swapped >= correct);
    CHECK(swapped > 0.0);
}

TEST_CASE("total loss is the three sequence losses plus the weighted regularizer") {
    KernModel m = micro_model();
    const auto batch = micro::fixed_batch(micro::corpus(), micro::setting());
    Tape tape;
    const auto elems = m.element_nodes(tape);
    std::vector<KernModel::SequenceNodes> outs;
    for (const auto& s : batch) outs.push_back(m.forward(tape, s, elems, true));
    const auto reg = triplet_regularizer(tape, outs[0], outs[1], outs[2]);

    const auto zero = triplet_total_loss(tape, outs[0], outs[1], outs[2], reg, 0.0);
    double plain = 0.0;
    for (const auto& o : outs)
        plain += tape.scalar_value(o.encoder_loss) + tape.scalar_value(o.decoder_loss);
    CHECK(tape.scalar_value(zero) == doctest::Approx(plain).epsilon(1e-12));

    const double lambda = 2e-4; // paper default
    const auto weighted = triplet_total_loss(tape, outs[0], outs[1], outs[2], reg, lambda);
    CHECK(tape.scalar_value(weighted) ==
          doctest::Approx(plain + lambda * tape.scalar_value(reg)).epsilon(1e-12));
}

TEST_CASE("full model gradients agree with central finite differences") {
    const Corpus c = micro::corpus();
    KernModel model = KernModel::create(c, micro::taxonomy(c), micro::config(), micro::setting());
    const auto batch = micro::fixed_batch(c, micro::setting());

    const auto params = model.params.all();
    const double err = finite_diff_check(
        params, [&] { return micro::full_loss(model, batch, false); },
        [&] { micro::full_loss(model, batch, true); });
    CHECK(err < 1e-4);
}

TEST_CASE("with lambda zero and external off the loss path is the plain encoder-decoder") {
    const Corpus c = micro::corpus();
    const Taxonomy tax = micro::taxonomy(c);

    TrainConfig with_triplets = micro::config();
    with_triplets.triplet_weight = 0.0;
    with_triplets.use_external_knowledge = false;
    with_triplets.iterations = 3;

    TrainConfig plain = with_triplets;
    plain.use_internal_knowledge = false;

    const Checkpoint a = train_kern(c, tax, with_triplets, micro::setting());
    const Checkpoint b = train_kern(c, tax, plain, micro::setting());
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i)
        CHECK(a.history[i].loss == b.history[i].loss);
    // parameters evolve identically too
    const auto pa = a.model.params.all();
    const auto pb = b.model.params.all();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("training is deterministic per seed") {
    const Corpus c = micro::corpus();
    const Taxonomy tax = micro::taxonomy(c);
    const Checkpoint a = train_kern(c, tax, micro::config(), micro::setting());
    const Checkpoint b = train_kern(c, tax, micro::config(), micro::setting());
    CHECK(checkpoint_to_json(a) == checkpoint_to_json(b));

    TrainConfig other = micro::config();
    other.seed = 8;
    const Checkpoint d = train_kern(c, tax, other, micro::setting());
    CHECK(checkpoint_to_json(a) != checkpoint_to_json(d));
}

TEST_CASE("training loss falls by half on an easy noiseless corpus") {
    SynthConfig gen;
    gen.cities = 2;
    gen.age_bands = 1;
    gen.genders = 1;
    gen.num_groups = 2;
    gen.categories = 1;
    gen.attributes_per_category = 1;
    gen.values_per_attribute = 3;
    gen.series_length = 40;
    gen.noise = 0.0;
    gen.slope_max = 0.0;
    gen.second_harmonic = false;
    const Corpus c = generate_synthetic_corpus(gen, 3);
    const Taxonomy tax = build_taxonomy(synthetic_taxonomy_edges(gen), c.elements);

    TrainConfig cfg;
    cfg.embed_dim = 4;
    cfg.hidden_dim = 12;
    cfg.batch_size = 9;
    cfg.iterations = 200;
    cfg.seed = 5;
    cfg.triplet_weight = 1e-3;
    const ExperimentSetting setting{"micro", 24, 4, 24};
    const Checkpoint ckpt = train_kern(c, tax, cfg, setting);

    const double first = ckpt.history.front().loss;
    double best = first;
    for (const auto& r : ckpt.history) best = std::min(best, r.loss);
    CHECK(best <= 0.5 * first);
}

TEST_CASE("batch size below three rejects internal knowledge") {
    const Corpus c = micro::corpus();
    TrainConfig cfg = micro::config();
    cfg.batch_size = 2;
    CHECK_THROWS_AS(train_kern(c, micro::taxonomy(c), cfg, micro::setting()), Error);
    cfg.use_internal_knowledge = false;
    cfg.iterations = 1;
    CHECK_NOTHROW(train_kern(c, micro::taxonomy(c), cfg, micro::setting()));
}

TEST_CASE("forecast returns the horizon and is deterministic and pure") {
    const Corpus c = micro::corpus();
    const Checkpoint ckpt = train_kern(c, micro::taxonomy(c), micro::config(), micro::setting());

    const auto& series = c.series[0];
    const std::span<const double> window(series.values.data(), 8);
    const auto a = ckpt.model.forecast(0, 0, window, 0);
    const auto b = ckpt.model.forecast(0, 0, window, 0);
    CHECK(a.size() == 4);
    CHECK(a == b);

    CHECK_THROWS_AS(ckpt.model.forecast(0, 0, window.subspan(0, 5), 0), Error);
}

TEST_CASE("zero-parameter model forecasts the decoder bias") {
    KernModel m = micro_model();
    zero_all(m);
    m.params.decoder_head_b.value = {0.42};
    const std::vector<double> window(8, 0.5);
    const auto out = m.forecast(0, 0, window, 0);
    for (const double v : out) CHECK(v == doctest::Approx(0.42));
}

TEST_CASE("without external knowledge the element nodes are the raw embedding rows") {
    TrainConfig cfg = micro::config();
    cfg.use_external_knowledge = false;
    KernModel m = micro_model(cfg);
    Tape tape;
    const auto nodes = m.element_nodes(tape);
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
        const auto& v = tape.value(nodes[e]);
        for (int d = 0; d < m.config.embed_dim; ++d)
            CHECK(v[static_cast<std::size_t>(d)] ==
                  m.params.element_table.value[e * static_cast<std::size_t>(m.config.embed_dim) +
                                               static_cast<std::size_t>(d)]);
    }
}

TEST_CASE("checkpoints round trip exactly") {
    const Corpus c = micro::corpus();
    const Checkpoint ckpt = train_kern(c, micro::taxonomy(c), micro::config(), micro::setting());

    const auto path = std::filesystem::temp_directory_path() / "kern_test_ckpt.json";
    save_checkpoint(ckpt, path);
    const Checkpoint loaded = load_checkpoint(path);

    const auto pa = ckpt.model.params.all();
    const auto pb = loaded.model.params.all();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(pa[i]->value == pb[i]->value);
    }
    CHECK(loaded.model.input_len == ckpt.model.input_len);
    CHECK(loaded.model.horizon == ckpt.model.horizon);
    CHECK(loaded.history.size() == ckpt.history.size());
    CHECK(checkpoint_to_json(loaded) == checkpoint_to_json(ckpt));

    // forecasts from the loaded model are identical
    const std::span<const double> window(c.series[0].values.data(), 8);
    CHECK(ckpt.model.forecast(0, 0, window, 0) == loaded.model.forecast(0, 0, window, 0));
    std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected with a format error") {
    CHECK_THROWS_AS(checkpoint_from_json("{not json"), Error);
    CHECK_THROWS_AS(checkpoint_from_json("{\"format_version\": 9}"), Error);
}

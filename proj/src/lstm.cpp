#include "kern/lstm.hpp"

#include <cmath>

namespace kern {

LstmState lstm_cell(Tape& tape, LstmCellParams& params, Tape::NodeId input, LstmState previous) {
    const int h = params.hidden_dim();
    if (tape.length(input) != params.input_dim())
        throw Error("data", "lstm_cell: input width " + std::to_string(tape.length(input)) +
                                " does not match " + params.input_weights.name);
    if (tape.length(previous.hidden) != h || tape.length(previous.cell) != h)
        throw Error("data", "lstm_cell: state width does not match " + params.hidden_weights.name);

    const auto gates = tape.add(tape.affine(params.input_weights, params.bias, input),
                                tape.matvec(params.hidden_weights, previous.hidden));
    const auto in_gate = tape.sigmoid(tape.slice(gates, 0, h));
    const auto forget_gate = tape.sigmoid(tape.slice(gates, h, h));
    const auto candidate = tape.tanh(tape.slice(gates, 2 * h, h));
    const auto out_gate = tape.sigmoid(tape.slice(gates, 3 * h, h));

    LstmState next;
    next.cell = tape.add(tape.mul(forget_gate, previous.cell), tape.mul(in_gate, candidate));
    next.hidden = tape.mul(out_gate, tape.tanh(next.cell));
    return next;
}

LstmState lstm_zero_state(Tape& tape, const LstmCellParams& params) {
    LstmState s;
    s.hidden = tape.constant(std::vector<double>(static_cast<std::size_t>(params.hidden_dim()), 0.0));
    s.cell = tape.constant(std::vector<double>(static_cast<std::size_t>(params.hidden_dim()), 0.0));
    return s;
}

void init_uniform(Parameter& p, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in < 1 ? 1 : fan_in));
    for (auto& v : p.value) v = rng.uniform(-bound, bound);
}

void init_lstm(LstmCellParams& params, Rng& rng) {
    init_uniform(params.input_weights, params.input_dim(), rng);
    init_uniform(params.hidden_weights, params.hidden_dim(), rng);
    const int h = params.hidden_dim();
    for (auto& v : params.bias.value) v = 0.0;
    for (int i = h; i < 2 * h; ++i) params.bias.value[static_cast<std::size_t>(i)] = 1.0;
}

} // namespace kern

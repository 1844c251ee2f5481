#pragma once

#include "kern/rng.hpp"
#include "kern/tape.hpp"

namespace kern {

/// Standard LSTM cell weights, gate order (input, forget, candidate, output)
/// stacked along rows.
struct LstmCellParams {
    Parameter input_weights;  // 4H x input_dim
    Parameter hidden_weights; // 4H x H
    Parameter bias;           // 4H

    LstmCellParams() = default;
    LstmCellParams(const std::string& prefix, int input_dim, int hidden_dim)
        : input_weights(prefix + ".w_in", 4 * hidden_dim, input_dim),
          hidden_weights(prefix + ".w_hid", 4 * hidden_dim, hidden_dim),
          bias(prefix + ".bias", 4 * hidden_dim) {}

    int hidden_dim() const { return hidden_weights.cols; }
    int input_dim() const { return input_weights.cols; }
};

struct LstmState {
    Tape::NodeId hidden = -1;
    Tape::NodeId cell = -1;
};

/// One step: c' = f*c + i*g, h' = o*tanh(c') with (i,f,o) sigmoid and g tanh
/// over W_in x + W_hid h + bias.
LstmState lstm_cell(Tape& tape, LstmCellParams& params, Tape::NodeId input, LstmState previous);

/// Zero state of the right width for the cell.
LstmState lstm_zero_state(Tape& tape, const LstmCellParams& params);

/// Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] init.
void init_uniform(Parameter& p, int fan_in, Rng& rng);

/// Uniform init for all cell weights; forget-gate bias set to +1.
void init_lstm(LstmCellParams& params, Rng& rng);

} // namespace kern

#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include "marl/errors.hpp"
#include "marl/tensor/param_store.hpp"
#include "marl/tensor/tape.hpp"

namespace marl::tensor {

enum class Activation { identity, tanh, relu };

template <class T, class Store>
Var bind(Tape<T>& tape, Store& store, ParamHandle h) {
  return tape.parameter(store[h]);
}

template <class T>
Var activate(Tape<T>& tape, Var x, Activation act) {
  switch (act) {
    case Activation::tanh:
      return tape.tanh(x);
    case Activation::relu:
      return tape.relu(x);
    case Activation::identity:
      break;
  }
  return x;
}

/// Fully connected layer: activation(x W^T + b).
struct Dense {
  ParamHandle weight = -1;
  ParamHandle bias = -1;
  int in = 0;
  int out = 0;
  Activation activation = Activation::identity;

  template <class T, class Rng>
  static Dense create(ParamStore<T>& store, const std::string& name, int in, int out, Activation act, Rng& rng) {
    Dense d;
    d.in = in;
    d.out = out;
    d.activation = act;
    d.weight = store.add(name + ".weight", out, in);
    d.bias = store.add(name + ".bias", 1, out);
    init_uniform(store[d.weight], in, rng);
    init_uniform(store[d.bias], in, rng);
    return d;
  }
};

/// Records `layer` on the tape. A const store binds frozen parameters.
template <class T, class Store>
Var dense_forward(Tape<T>& tape, Store& store, const Dense& layer, Var x) {
  if (tape.cols(x) != layer.in) {
    throw ShapeError("dense_forward(): input has " + std::to_string(tape.cols(x)) +
                     " columns, layer '" + store[layer.weight].name + "' expects " + std::to_string(layer.in));
  }
  const Var y = tape.linear(x, bind(tape, store, layer.weight), bind(tape, store, layer.bias));
  return activate(tape, y, layer.activation);
}

/// Latent transition z' = tanh(U z + c).
struct RecurrentCell {
  Dense transition;

  template <class T, class Rng>
  static RecurrentCell create(ParamStore<T>& store, const std::string& name, int latent_dim, Rng& rng) {
    return RecurrentCell{Dense::create(store, name, latent_dim, latent_dim, Activation::tanh, rng)};
  }
};

template <class T, class Store>
Var recurrent_cell(Tape<T>& tape, Store& store, const RecurrentCell& cell, Var z) {
  return dense_forward(tape, store, cell.transition, z);
}

struct AttentionConfig {
  int model_dim = 32;
  int num_heads = 2;

  int head_dim() const { return model_dim / num_heads; }
  void validate() const {
    if (model_dim <= 0 || num_heads <= 0 || model_dim % num_heads != 0) {
      throw ConfigError("attention model_dim " + std::to_string(model_dim) + " is not divisible by " +
                        std::to_string(num_heads) + " heads");
    }
  }
};

/// Standard multi-head self-attention with biased Q/K/V/output projections.
struct MultiHeadAttention {
  AttentionConfig config;
  Dense query;
  Dense key;
  Dense value;
  Dense output;

  template <class T, class Rng>
  static MultiHeadAttention create(ParamStore<T>& store, const std::string& name, AttentionConfig cfg, Rng& rng) {
    cfg.validate();
    const int d = cfg.model_dim;
    MultiHeadAttention m;
    m.config = cfg;
    m.query = Dense::create(store, name + ".query", d, d, Activation::identity, rng);
    m.key = Dense::create(store, name + ".key", d, d, Activation::identity, rng);
    m.value = Dense::create(store, name + ".value", d, d, Activation::identity, rng);
    m.output = Dense::create(store, name + ".output", d, d, Activation::identity, rng);
    return m;
  }
};

struct AttentionResult {
  Var output;
  Var weights_node;  // pass to Tape::attention_weights()
};

/// Self-attention over every block of `sequence_length` consecutive rows of
/// `sequence` ([B * sequence_length, model_dim]); blocks do not attend to each other.
template <class T, class Store>
AttentionResult self_attention(Tape<T>& tape, Store& store, const MultiHeadAttention& mha, Var sequence,
                               int sequence_length) {
  mha.config.validate();
  if (sequence_length < 1) throw ShapeError("self_attention(): sequence length must be >= 1");
  const Var q = dense_forward(tape, store, mha.query, sequence);
  const Var k = dense_forward(tape, store, mha.key, sequence);
  const Var v = dense_forward(tape, store, mha.value, sequence);
  const Var att = tape.attention(q, k, v, sequence_length, mha.config.num_heads);
  return {dense_forward(tape, store, mha.output, att), att};
}

}  // namespace marl::tensor

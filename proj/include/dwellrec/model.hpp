#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dwellrec/clicks.hpp"
#include "dwellrec/gru.hpp"
#include "dwellrec/layers.hpp"

namespace dwellrec {

// Index 0 of the item and dwell tables is the reserved padding slot; dense
// vocab index v maps to model index v + 1, dwell bucket b to b + 1.
constexpr std::int32_t kPadIndex = 0;

enum class ModelKind { it_rnn, dt_rnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ItRnnConfig {
  std::size_t num_items = 0;  // item slots including the padding slot
  std::size_t item_em_size = 128;
  std::size_t it_rnn_size = 128;
  std::size_t max_len = 15;
};

struct DtRnnConfig {
  ItRnnConfig base;
  std::size_t dt_em_size = 0;
  std::size_t dt_rnn_size = 0;
  std::size_t dwell_bucket_count = 0;  // dwell slots including the padding slot
};

ItRnnConfig config_for_vocab(const Vocab& vocab, std::size_t item_em_size, std::size_t it_rnn_size,
                             std::size_t max_len = 15);
DtRnnConfig dt_config_for_vocab(const Vocab& vocab, std::size_t item_em_size,
                                std::size_t it_rnn_size, std::size_t dt_em_size,
                                std::size_t dt_rnn_size, std::size_t max_len = 15);

// Fixed-shape mini-batch, left-padded: positions before max_len - length hold
// the padding index in both grids. Ids and targets are model indices.
struct Batch {
  std::size_t size = 0;
  std::size_t max_len = 0;
  std::vector<std::int32_t> item_ids;   // size * max_len
  std::vector<std::int32_t> dwell_ids;  // size * max_len
  std::vector<std::int32_t> lengths;
  std::vector<std::int32_t> targets;
  std::vector<std::int64_t> session_ids;

  std::int32_t item_at(std::size_t row, std::size_t t) const { return item_ids[row * max_len + t]; }
  std::int32_t dwell_at(std::size_t row, std::size_t t) const {
    return dwell_ids[row * max_len + t];
  }
};

struct ModelParams {
  ModelKind kind = ModelKind::it_rnn;
  DtRnnConfig config;  // base always meaningful; dt fields only for dt_rnn

  Param item_embedding;
  GruCell item_gru;
  Param out_w;
  Param out_b;
  // dt_rnn only
  Param dwell_embedding;
  GruCell dwell_gru;

  std::vector<Param*> all_params();
  std::vector<const Param*> all_params() const;
  std::size_t parameter_count() const;
  void zero_grads();
};

// Deterministic initialization from std::mt19937_64 (see DetRng): weight
// matrices uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)), embeddings
// uniform(-0.05, 0.05), biases zero. Identical seeds give identical
// parameters on every platform.
ModelParams init_params(const ItRnnConfig& config, std::uint64_t seed);
ModelParams init_params(const DtRnnConfig& config, std::uint64_t seed);

struct ModelTrace {
  const Batch* batch = nullptr;  // borrowed; must outlive the backward pass
  GruTrace item_trace;
  GruTrace dwell_trace;  // dt_rnn only
  Tensor2 probs;         // batch x num_items
};

// Runs the item path (and for DT-RNN the dwell path) over the padded batch
// and produces next-item probabilities from the last hidden state.
ModelTrace model_forward(const ModelParams& params, const Batch& batch);
ModelTrace itrnn_forward(const ModelParams& params, const Batch& batch);
ModelTrace dtrnn_forward(const ModelParams& params, const Batch& batch);

// Cross-entropy backward through the whole architecture; accumulates into
// every reachable parameter and returns the batch mean negative
// log-likelihood of the targets.
double model_backward(ModelParams& params, const ModelTrace& trace,
                      std::span<const std::int32_t> targets);

// Top-k indices of one probability row, descending probability, ties broken
// by ascending index; `excluded` (the padding slot in model use) never ranks.
std::vector<std::pair<std::int32_t, double>> topk_row(std::span<const double> probs, std::size_t k,
                                                      std::optional<std::size_t> excluded = {});

// Per batch row, the k highest-probability items (padding excluded). k is
// clamped to the number of real items.
std::vector<std::vector<std::pair<std::int32_t, double>>> predict_topk(const ModelParams& params,
                                                                       const Batch& batch,
                                                                       std::size_t k = 20);

// Self-describing binary checkpoint: JSON header (kind, config, vocab hash,
// parameter table) followed by raw little-endian 64-bit values, Adam moments
// included so training resumes bit-exactly.
void save_checkpoint(const ModelParams& params, std::uint64_t vocab_hash, const std::string& path);

struct Checkpoint {
  ModelParams params;
  std::uint64_t vocab_hash = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace dwellrec

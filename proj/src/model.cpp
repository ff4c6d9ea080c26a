#include "dwellrec/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "dwellrec/errors.hpp"
#include "dwellrec/rng.hpp"

namespace dwellrec {

namespace {

using nlohmann::json;

void fill_uniform(Tensor2& t, DetRng& rng, double lo, double hi) {
  for (double& v : t.flat()) v = rng.uniform(lo, hi);
}

// Glorot range for a weight matrix, biases stay zero.
void init_weight(Param& p, DetRng& rng) {
  const double a =
      std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  fill_uniform(p.value, rng, -a, a);
}

void init_gru_weights(GruCell& cell, DetRng& rng) {
  // draw order: W_z, W_r, W_h, U_z, U_r, U_h; biases zero
  init_weight(cell.w_z, rng);
  init_weight(cell.w_r, rng);
  init_weight(cell.w_h, rng);
  init_weight(cell.u_z, rng);
  init_weight(cell.u_r, rng);
  init_weight(cell.u_h, rng);
}

// Allocates all tensors for a config with zeroed values.
ModelParams make_model(ModelKind kind, const DtRnnConfig& config) {
  ModelParams p;
  p.kind = kind;
  p.config = config;
  const ItRnnConfig& base = config.base;
  if (base.num_items < 2 || base.item_em_size < 1 || base.it_rnn_size < 1 || base.max_len < 1) {
    throw ConfigError("model config: all sizes must be positive and num_items >= 2");
  }
  p.item_embedding = Param("item_embedding", base.num_items, base.item_em_size);
  std::size_t item_gru_input = base.item_em_size;
  if (kind == ModelKind::dt_rnn) {
    if (config.dt_em_size < 1 || config.dt_rnn_size < 1 || config.dwell_bucket_count < 2) {
      throw ConfigError("dt config: dwell sizes must be positive");
    }
    p.dwell_embedding = Param("dwell_embedding", config.dwell_bucket_count, config.dt_em_size);
    p.dwell_gru = GruCell("dwell_gru", config.dt_em_size, config.dt_rnn_size);
    item_gru_input += config.dt_rnn_size;
  }
  p.item_gru = GruCell("item_gru", item_gru_input, base.it_rnn_size);
  p.out_w = Param("out_w", base.it_rnn_size, base.num_items);
  p.out_b = Param("out_b", 1, base.num_items);
  return p;
}

StepMasks masks_for(const Batch& batch) {
  StepMasks masks(batch.max_len, std::vector<std::uint8_t>(batch.size, 1));
  for (std::size_t r = 0; r < batch.size; ++r) {
    const auto len = static_cast<std::size_t>(batch.lengths[r]);
    if (len < 1 || len > batch.max_len) {
      throw ShapeError("batch row " + std::to_string(r) + " has invalid length " +
                       std::to_string(batch.lengths[r]));
    }
    for (std::size_t t = 0; t + len < batch.max_len; ++t) masks[t][r] = 0;
  }
  return masks;
}

std::vector<std::int32_t> column_ids(const std::vector<std::int32_t>& grid, std::size_t batch_size,
                                     std::size_t max_len, std::size_t t) {
  std::vector<std::int32_t> ids(batch_size);
  for (std::size_t r = 0; r < batch_size; ++r) ids[r] = grid[r * max_len + t];
  return ids;
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::it_rnn ? "it_rnn" : "dt_rnn"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "it_rnn" || s == "itrnn") return ModelKind::it_rnn;
  if (s == "dt_rnn" || s == "dtrnn") return ModelKind::dt_rnn;
  throw ConfigError("unknown model kind: " + s);
}

ItRnnConfig config_for_vocab(const Vocab& vocab, std::size_t item_em_size, std::size_t it_rnn_size,
                             std::size_t max_len) {
  ItRnnConfig cfg;
  cfg.num_items = static_cast<std::size_t>(vocab.size()) + 1;  // + padding slot
  cfg.item_em_size = item_em_size;
  cfg.it_rnn_size = it_rnn_size;
  cfg.max_len = max_len;
  return cfg;
}

DtRnnConfig dt_config_for_vocab(const Vocab& vocab, std::size_t item_em_size,
                                std::size_t it_rnn_size, std::size_t dt_em_size,
                                std::size_t dt_rnn_size, std::size_t max_len) {
  DtRnnConfig cfg;
  cfg.base = config_for_vocab(vocab, item_em_size, it_rnn_size, max_len);
  cfg.dt_em_size = dt_em_size;
  cfg.dt_rnn_size = dt_rnn_size;
  cfg.dwell_bucket_count = static_cast<std::size_t>(vocab.dwell_bucket_count) + 1;  // + padding
  return cfg;
}

std::vector<Param*> ModelParams::all_params() {
  std::vector<Param*> out;
  out.push_back(&item_embedding);
  if (kind == ModelKind::dt_rnn) {
    out.push_back(&dwell_embedding);
    for (Param* p : dwell_gru.params()) out.push_back(p);
  }
  for (Param* p : item_gru.params()) out.push_back(p);
  out.push_back(&out_w);
  out.push_back(&out_b);
  return out;
}

std::vector<const Param*> ModelParams::all_params() const {
  std::vector<const Param*> out;
  for (Param* p : const_cast<ModelParams*>(this)->all_params()) out.push_back(p);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Param* p : all_params()) n += p->value.size();
  return n;
}

void ModelParams::zero_grads() {
  for (Param* p : all_params()) p->zero_grad();
}

ModelParams init_params(const ItRnnConfig& config, std::uint64_t seed) {
  DtRnnConfig wrapped;
  wrapped.base = config;
  ModelParams p = make_model(ModelKind::it_rnn, wrapped);
  DetRng rng(seed);
  // draw order: item_embedding, item_gru weights, out_w
  fill_uniform(p.item_embedding.value, rng, -0.05, 0.05);
  init_gru_weights(p.item_gru, rng);
  init_weight(p.out_w, rng);
  return p;
}

ModelParams init_params(const DtRnnConfig& config, std::uint64_t seed) {
  ModelParams p = make_model(ModelKind::dt_rnn, config);
  DetRng rng(seed);
  // draw order: item_embedding, dwell_embedding, dwell_gru weights,
  // item_gru weights, out_w
  fill_uniform(p.item_embedding.value, rng, -0.05, 0.05);
  fill_uniform(p.dwell_embedding.value, rng, -0.05, 0.05);
  init_gru_weights(p.dwell_gru, rng);
  init_gru_weights(p.item_gru, rng);
  init_weight(p.out_w, rng);
  return p;
}

ModelTrace itrnn_forward(const ModelParams& params, const Batch& batch) {
  const StepMasks masks = masks_for(batch);
  std::vector<Tensor2> inputs;
  inputs.reserve(batch.max_len);
  for (std::size_t t = 0; t < batch.max_len; ++t) {
    inputs.push_back(embedding_forward(
        params.item_embedding, column_ids(batch.item_ids, batch.size, batch.max_len, t)));
  }
  ModelTrace trace;
  trace.batch = &batch;
  const Tensor2 h0(batch.size, params.config.base.it_rnn_size);
  trace.item_trace = gru_forward(params.item_gru, inputs, h0, &masks);
  trace.probs = softmax_rows(
      affine_forward(trace.item_trace.last_hidden(), params.out_w.value, params.out_b.value));
  return trace;
}

ModelTrace dtrnn_forward(const ModelParams& params, const Batch& batch) {
  if (batch.dwell_ids.size() != batch.item_ids.size()) {
    throw ShapeError("dtrnn_forward: batch has no aligned dwell grid");
  }
  const StepMasks masks = masks_for(batch);

  std::vector<Tensor2> dwell_inputs;
  dwell_inputs.reserve(batch.max_len);
  for (std::size_t t = 0; t < batch.max_len; ++t) {
    dwell_inputs.push_back(embedding_forward(
        params.dwell_embedding, column_ids(batch.dwell_ids, batch.size, batch.max_len, t)));
  }
  ModelTrace trace;
  trace.batch = &batch;
  const Tensor2 dwell_h0(batch.size, params.config.dt_rnn_size);
  trace.dwell_trace = gru_forward(params.dwell_gru, dwell_inputs, dwell_h0, &masks);

  // per-step item input: dwell-GRU output first, item embedding second
  const std::size_t dt_cols = params.config.dt_rnn_size;
  const std::size_t em_cols = params.config.base.item_em_size;
  std::vector<Tensor2> item_inputs;
  item_inputs.reserve(batch.max_len);
  for (std::size_t t = 0; t < batch.max_len; ++t) {
    const Tensor2 emb = embedding_forward(
        params.item_embedding, column_ids(batch.item_ids, batch.size, batch.max_len, t));
    const Tensor2& g = trace.dwell_trace.hidden(t);
    Tensor2 x(batch.size, dt_cols + em_cols);
    for (std::size_t r = 0; r < batch.size; ++r) {
      std::memcpy(x.row(r).data(), g.row(r).data(), dt_cols * sizeof(double));
      std::memcpy(x.row(r).data() + dt_cols, emb.row(r).data(), em_cols * sizeof(double));
    }
    item_inputs.push_back(std::move(x));
  }

  const Tensor2 h0(batch.size, params.config.base.it_rnn_size);
  trace.item_trace = gru_forward(params.item_gru, item_inputs, h0, &masks);
  trace.probs = softmax_rows(
      affine_forward(trace.item_trace.last_hidden(), params.out_w.value, params.out_b.value));
  return trace;
}

ModelTrace model_forward(const ModelParams& params, const Batch& batch) {
  return params.kind == ModelKind::it_rnn ? itrnn_forward(params, batch)
                                          : dtrnn_forward(params, batch);
}

double model_backward(ModelParams& params, const ModelTrace& trace,
                      std::span<const std::int32_t> targets) {
  const Batch& batch = *trace.batch;
  Tensor2 d_h;
  const double loss = softmax_xent_backward(trace.probs, targets, params.out_w, params.out_b,
                                            trace.item_trace.last_hidden(), d_h);

  std::vector<Tensor2> d_hidden(batch.max_len);
  for (std::size_t t = 0; t + 1 < batch.max_len; ++t) {
    d_hidden[t] = Tensor2(batch.size, params.config.base.it_rnn_size);
  }
  d_hidden[batch.max_len - 1] = std::move(d_h);

  const std::vector<Tensor2> d_inputs = gru_backward(params.item_gru, trace.item_trace, d_hidden);

  if (params.kind == ModelKind::it_rnn) {
    for (std::size_t t = 0; t < batch.max_len; ++t) {
      embedding_backward(params.item_embedding,
                         column_ids(batch.item_ids, batch.size, batch.max_len, t), d_inputs[t]);
    }
    return loss;
  }

  // split each step gradient back into the dwell-GRU part and the embedding part
  const std::size_t dt_cols = params.config.dt_rnn_size;
  const std::size_t em_cols = params.config.base.item_em_size;
  std::vector<Tensor2> d_dwell_out(batch.max_len);
  for (std::size_t t = 0; t < batch.max_len; ++t) {
    Tensor2 d_g(batch.size, dt_cols);
    Tensor2 d_emb(batch.size, em_cols);
    for (std::size_t r = 0; r < batch.size; ++r) {
      std::memcpy(d_g.row(r).data(), d_inputs[t].row(r).data(), dt_cols * sizeof(double));
      std::memcpy(d_emb.row(r).data(), d_inputs[t].row(r).data() + dt_cols,
                  em_cols * sizeof(double));
    }
    embedding_backward(params.item_embedding,
                       column_ids(batch.item_ids, batch.size, batch.max_len, t), d_emb);
    d_dwell_out[t] = std::move(d_g);
  }

  const std::vector<Tensor2> d_dwell_inputs =
      gru_backward(params.dwell_gru, trace.dwell_trace, d_dwell_out);
  for (std::size_t t = 0; t < batch.max_len; ++t) {
    embedding_backward(params.dwell_embedding,
                       column_ids(batch.dwell_ids, batch.size, batch.max_len, t),
                       d_dwell_inputs[t]);
  }
  return loss;
}

std::vector<std::pair<std::int32_t, double>> topk_row(std::span<const double> probs, std::size_t k,
                                                      std::optional<std::size_t> excluded) {
  std::vector<std::int32_t> idx;
  idx.reserve(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (excluded && j == *excluded) continue;
    idx.push_back(static_cast<std::int32_t>(j));
  }
  k = std::min(k, idx.size());
  const auto better = [&](std::int32_t a, std::int32_t b) {
    if (probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)]) {
      return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
    }
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  std::vector<std::pair<std::int32_t, double>> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    out.emplace_back(idx[j], probs[static_cast<std::size_t>(idx[j])]);
  }
  return out;
}

std::vector<std::vector<std::pair<std::int32_t, double>>> predict_topk(const ModelParams& params,
                                                                       const Batch& batch,
                                                                       std::size_t k) {
  const ModelTrace trace = model_forward(params, batch);
  std::vector<std::vector<std::pair<std::int32_t, double>>> out;
  out.reserve(batch.size);
  for (std::size_t r = 0; r < batch.size; ++r) {
    out.push_back(topk_row(trace.probs.row(r), k, static_cast<std::size_t>(kPadIndex)));
  }
  return out;
}

namespace {

void write_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64_block(std::ostream& out, const Tensor2& t) {
  for (double d : t.flat()) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

void read_f64_block(std::istream& in, Tensor2& t) {
  for (double& d : t.flat()) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    d = std::bit_cast<double>(bits);
  }
}

constexpr char kCheckpointMagic[8] = {'D', 'R', 'E', 'C', 'C', 'K', 'P', 'T'};

std::string hash_to_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hex_to_hash(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

}  // namespace

void save_checkpoint(const ModelParams& params, std::uint64_t vocab_hash,
                     const std::string& path) {
  json header;
  header["kind"] = to_string(params.kind);
  header["config"] = {
      {"num_items", params.config.base.num_items},
      {"item_em_size", params.config.base.item_em_size},
      {"it_rnn_size", params.config.base.it_rnn_size},
      {"max_len", params.config.base.max_len},
      {"dt_em_size", params.config.dt_em_size},
      {"dt_rnn_size", params.config.dt_rnn_size},
      {"dwell_bucket_count", params.config.dwell_bucket_count},
  };
  header["vocab_hash"] = hash_to_hex(vocab_hash);
  json table = json::array();
  for (const Param* p : params.all_params()) {
    table.push_back({{"name", p->name},
                     {"rows", p->value.rows()},
                     {"cols", p->value.cols()},
                     {"step", p->step}});
  }
  header["params"] = std::move(table);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string header_text = header.dump();
  write_u32_le(out, static_cast<std::uint32_t>(header_text.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const Param* p : params.all_params()) {
    write_f64_block(out, p->value);
    write_f64_block(out, p->m);
    write_f64_block(out, p->v);
  }
  if (!out) throw IoError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw ParseError("not a checkpoint file: " + path);
  }
  const std::uint32_t header_len = read_u32_le(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), header_len);
  if (!in) throw ParseError("truncated checkpoint header: " + path);

  json header = json::parse(header_text, nullptr, false);
  if (header.is_discarded()) throw ParseError("bad checkpoint header JSON: " + path);

  DtRnnConfig config;
  const json& c = header.at("config");
  config.base.num_items = c.at("num_items").get<std::size_t>();
  config.base.item_em_size = c.at("item_em_size").get<std::size_t>();
  config.base.it_rnn_size = c.at("it_rnn_size").get<std::size_t>();
  config.base.max_len = c.at("max_len").get<std::size_t>();
  config.dt_em_size = c.at("dt_em_size").get<std::size_t>();
  config.dt_rnn_size = c.at("dt_rnn_size").get<std::size_t>();
  config.dwell_bucket_count = c.at("dwell_bucket_count").get<std::size_t>();

  Checkpoint ckpt;
  ckpt.params = make_model(model_kind_from_string(header.at("kind").get<std::string>()), config);
  ckpt.vocab_hash = hex_to_hash(header.at("vocab_hash").get<std::string>());

  const json& table = header.at("params");
  const std::vector<Param*> live = ckpt.params.all_params();
  if (table.size() != live.size()) {
    throw ParseError("checkpoint parameter table size mismatch: " + path);
  }
  for (std::size_t i = 0; i < live.size(); ++i) {
    const json& entry = table[i];
    Param* p = live[i];
    if (entry.at("name").get<std::string>() != p->name ||
        entry.at("rows").get<std::size_t>() != p->value.rows() ||
        entry.at("cols").get<std::size_t>() != p->value.cols()) {
      throw ParseError("checkpoint parameter " + p->name + " shape/name mismatch: " + path);
    }
    p->step = entry.at("step").get<std::int64_t>();
    read_f64_block(in, p->value);
    read_f64_block(in, p->m);
    read_f64_block(in, p->v);
  }
  if (!in) throw ParseError("truncated checkpoint data: " + path);
  return ckpt;
}

}  // namespace dwellrec

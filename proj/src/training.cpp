#include "dwellrec/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dwellrec/errors.hpp"
#include "dwellrec/rng.hpp"

namespace dwellrec {

std::vector<Batch> make_batches(std::span<const Example> examples, std::size_t batch_size,
                                std::size_t max_len, std::uint64_t seed, std::size_t epoch,
                                bool shuffle) {
  if (batch_size == 0) throw ConfigError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    DetRng rng(derive_seed(seed, epoch));
    rng.shuffle(order);
  }

  std::vector<Batch> batches;
  batches.reserve((examples.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    Batch b;
    b.size = n;
    b.max_len = max_len;
    b.item_ids.assign(n * max_len, kPadIndex);
    b.dwell_ids.assign(n * max_len, kPadIndex);
    b.lengths.resize(n);
    b.targets.resize(n);
    b.session_ids.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const Example& ex = examples[order[start + r]];
      if (ex.length() == 0 || ex.length() > max_len) {
        throw ShapeError("make_batches: example length " + std::to_string(ex.length()) +
                         " outside [1, " + std::to_string(max_len) + "]");
      }
      const std::size_t offset = max_len - ex.length();
      for (std::size_t t = 0; t < ex.length(); ++t) {
        b.item_ids[r * max_len + offset + t] = ex.items[t] + 1;  // shift into model space
        b.dwell_ids[r * max_len + offset + t] = ex.dwell[t] + 1;
      }
      b.lengths[r] = static_cast<std::int32_t>(ex.length());
      b.targets[r] = ex.target + 1;
      b.session_ids[r] = ex.session_id;
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

namespace {

std::string param_stats(const ModelParams& params) {
  std::ostringstream out;
  for (const Param* p : params.all_params()) {
    double max_abs = 0.0;
    bool finite = true;
    for (double v : p->value.flat()) {
      if (!std::isfinite(v)) finite = false;
      max_abs = std::max(max_abs, std::fabs(v));
    }
    out << ' ' << p->name << "(max|v|=" << max_abs << (finite ? "" : ",nonfinite") << ')';
  }
  return out.str();
}

}  // namespace

TrainLog train(ModelParams& params, std::span<const Example> examples, const TrainConfig& config,
               const std::string& checkpoint_dir, std::uint64_t vocab_hash,
               const EpochCallback& after_epoch) {
  if (config.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (examples.empty()) throw ConfigError("train: no examples");
  const AdamConfig adam = config.adam();
  const std::vector<Param*> all = params.all_params();

  TrainLog log;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Batch> batches = make_batches(
        examples, config.batch_size, params.config.base.max_len, config.seed, epoch, config.shuffle);

    double loss_sum = 0.0;
    std::size_t example_count = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      const ModelTrace trace = model_forward(params, batch);
      const double loss = model_backward(params, trace, batch.targets);
      if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(bi) + ";" + param_stats(params));
      }
      loss_sum += loss * static_cast<double>(batch.size);
      example_count += batch.size;
      for (Param* p : all) adam_step(*p, adam);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(example_count);
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!checkpoint_dir.empty()) {
      stats.checkpoint_path = checkpoint_dir + "/epoch_" + std::to_string(epoch) + ".ckpt";
      save_checkpoint(params, vocab_hash, stats.checkpoint_path);
    }
    log.epochs.push_back(std::move(stats));
    if (after_epoch) after_epoch(epoch, params);
  }
  return log;
}

void save_trainlog_csv(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write train log: " + path);
  out << "epoch,mean_loss,seconds\n";
  char buf[64];
  for (const EpochStats& e : log.epochs) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.mean_loss);
    out << e.epoch << ',' << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.3f", e.seconds);
    out << buf << '\n';
  }
}

}  // namespace dwellrec

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dwellrec/model.hpp"
#include "dwellrec/preprocess.hpp"

namespace dwellrec {

// 1-based rank of the target within one probability row: 1 + the number of
// strictly larger entries + the number of equal entries at smaller indices.
// `excluded` (the padding slot in model use) never competes.
std::uint32_t rank_of_target(std::span<const double> probs, std::size_t target,
                             std::optional<std::size_t> excluded = {});

double recall_at_k(std::span<const std::uint32_t> ranks, std::size_t k = 20);
double mrr_at_k(std::span<const std::uint32_t> ranks, std::size_t k = 20);

struct ExampleOutcome {
  std::int64_t session_id = 0;
  std::int32_t target = 0;  // dense vocab index
  std::uint32_t rank = 0;
};

struct EvalReport {
  std::vector<ExampleOutcome> outcomes;
  std::size_t k = 20;
  double recall = 0.0;
  double mrr = 0.0;
  std::size_t n = 0;
  std::size_t epoch = 0;
};

// Ranks every example's target under the model (padding slot excluded) and
// aggregates Recall@k / MRR@k. Batching only affects grouping, not results.
EvalReport evaluate(const ModelParams& params, std::span<const Example> examples,
                    std::size_t k = 20, std::size_t batch_size = 256, std::size_t epoch = 0);

// Keeps only each session's longest prefix (the example predicting the final
// click), for last-prefix-only evaluation.
std::vector<Example> last_prefix_only(std::span<const Example> examples);

// Report with maximum recall; ties resolved to the earliest entry.
const EvalReport& best_epoch(std::span<const EvalReport> reports);

// Unweighted arithmetic mean of per-fold recalls.
double fold_average(std::span<const double> recalls);

// Per-example reciprocal rank at k (0 beyond k), the pairing unit for the
// significance test.
std::vector<double> reciprocal_ranks_at_k(const EvalReport& report, std::size_t k = 20);

enum class WilcoxonMethod { exact, normal_approximation };

struct WilcoxonResult {
  std::size_t n_effective = 0;  // pairs surviving zero-difference removal
  double w = 0.0;               // min(W+, W-)
  double p_two_sided = 1.0;
  WilcoxonMethod method = WilcoxonMethod::exact;
};

// Wilcoxon signed-rank test on paired samples. Zero differences drop;
// tied |d| get average ranks. Exact two-sided p over all 2^n sign
// assignments for n_effective <= 25 (computed by rank-sum enumeration),
// otherwise a normal approximation with tie and continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// CSV: header + `session_id,target,rank`.
void save_eval_csv(const EvalReport& report, const std::string& path);
EvalReport load_eval_csv(const std::string& path);

// Aggregate JSON: {recall_at_20, mrr_at_20, n, epoch}.
void save_eval_json(const EvalReport& report, const std::string& path);

}  // namespace dwellrec

#include "dwellrec/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "dwellrec/errors.hpp"
#include "dwellrec/training.hpp"

namespace dwellrec {

std::uint32_t rank_of_target(std::span<const double> probs, std::size_t target,
                             std::optional<std::size_t> excluded) {
  if (target >= probs.size() || (excluded && target == *excluded)) {
    throw IndexError("rank_of_target: target " + std::to_string(target) + " out of range");
  }
  const double p_target = probs[target];
  std::uint32_t rank = 1;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (j == target || (excluded && j == *excluded)) continue;
    if (probs[j] > p_target || (probs[j] == p_target && j < target)) ++rank;
  }
  return rank;
}

double recall_at_k(std::span<const std::uint32_t> ranks, std::size_t k) {
  if (ranks.empty()) throw ConfigError("recall_at_k: empty rank list");
  std::size_t hits = 0;
  for (std::uint32_t r : ranks) {
    if (r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double mrr_at_k(std::span<const std::uint32_t> ranks, std::size_t k) {
  if (ranks.empty()) throw ConfigError("mrr_at_k: empty rank list");
  double sum = 0.0;
  for (std::uint32_t r : ranks) {
    if (r <= k) sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(ranks.size());
}

EvalReport evaluate(const ModelParams& params, std::span<const Example> examples, std::size_t k,
                    std::size_t batch_size, std::size_t epoch) {
  if (examples.empty()) throw ConfigError("evaluate: no examples");
  EvalReport report;
  report.k = k;
  report.epoch = epoch;
  const std::vector<Batch> batches = make_batches(
      examples, batch_size, params.config.base.max_len, /*seed=*/0, /*epoch=*/0, /*shuffle=*/false);
  std::vector<std::uint32_t> ranks;
  ranks.reserve(examples.size());
  for (const Batch& batch : batches) {
    const ModelTrace trace = model_forward(params, batch);
    for (std::size_t r = 0; r < batch.size; ++r) {
      const auto target = static_cast<std::size_t>(batch.targets[r]);
      const std::uint32_t rank =
          rank_of_target(trace.probs.row(r), target, static_cast<std::size_t>(kPadIndex));
      report.outcomes.push_back(
          {batch.session_ids[r], batch.targets[r] - 1, rank});
      ranks.push_back(rank);
    }
  }
  report.n = ranks.size();
  report.recall = recall_at_k(ranks, k);
  report.mrr = mrr_at_k(ranks, k);
  return report;
}

std::vector<Example> last_prefix_only(std::span<const Example> examples) {
  // longest prefix per session; examples of one session are adjacent in
  // augmentation output but we do not rely on that
  std::map<std::int64_t, std::size_t> best;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto [it, inserted] = best.try_emplace(examples[i].session_id, i);
    if (!inserted && examples[i].length() > examples[it->second].length()) {
      it->second = i;
    }
  }
  std::vector<std::size_t> keep;
  keep.reserve(best.size());
  for (const auto& [_, idx] : best) keep.push_back(idx);
  std::sort(keep.begin(), keep.end());
  std::vector<Example> out;
  out.reserve(keep.size());
  for (std::size_t idx : keep) out.push_back(examples[idx]);
  return out;
}

const EvalReport& best_epoch(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ConfigError("best_epoch: no reports");
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].recall > reports[best].recall) best = i;
  }
  return reports[best];
}

double fold_average(std::span<const double> recalls) {
  if (recalls.empty()) throw ConfigError("fold_average: no folds");
  double sum = 0.0;
  for (double r : recalls) sum += r;
  return sum / static_cast<double>(recalls.size());
}

std::vector<double> reciprocal_ranks_at_k(const EvalReport& report, std::size_t k) {
  std::vector<double> out;
  out.reserve(report.outcomes.size());
  for (const ExampleOutcome& o : report.outcomes) {
    out.push_back(o.rank <= k ? 1.0 / static_cast<double>(o.rank) : 0.0);
  }
  return out;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("wilcoxon_signed_rank: need equal-length nonempty samples");
  }
  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }

  WilcoxonResult result;
  result.n_effective = diffs.size();
  if (diffs.empty()) {
    return result;  // degenerate: p = 1, W = 0
  }
  const std::size_t n = diffs.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::fabs(diffs[x]) < std::fabs(diffs[y]);
  });

  // average ranks for tied |d|; doubled ranks stay integral
  std::vector<double> rank(n, 0.0);
  double tie_correction = 0.0;  // sum of (t^3 - t) over tie groups
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]])) ++j;
    const double avg = static_cast<double>(i + j + 2) / 2.0;  // ranks are 1-based
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    const double t = static_cast<double>(j - i + 1);
    tie_correction += t * t * t - t;
    i = j + 1;
  }

  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    (diffs[i] > 0 ? w_plus : w_minus) += rank[i];
  }
  result.w = std::min(w_plus, w_minus);

  if (n <= 25) {
    result.method = WilcoxonMethod::exact;
    // distribution of the doubled positive rank sum over all 2^n sign
    // assignments, by incremental convolution
    std::vector<std::int64_t> doubled(n);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = std::llround(2.0 * rank[i]);
      total += doubled[i];
    }
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(total) + 1, 0);
    counts[0] = 1;
    for (std::int64_t r2 : doubled) {
      for (std::int64_t s = total - r2; s >= 0; --s) {
        counts[static_cast<std::size_t>(s + r2)] += counts[static_cast<std::size_t>(s)];
      }
    }
    const std::int64_t w2 = std::llround(2.0 * result.w);
    std::uint64_t at_most = 0;
    for (std::int64_t s = 0; s <= total; ++s) {
      if (std::min(s, total - s) <= w2) at_most += counts[static_cast<std::size_t>(s)];
    }
    result.p_two_sided = static_cast<double>(at_most) / std::exp2(static_cast<double>(n));
  } else {
    result.method = WilcoxonMethod::normal_approximation;
    const double dn = static_cast<double>(n);
    const double mean = dn * (dn + 1.0) / 4.0;
    const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_correction / 48.0;
    const double z = (result.w - mean + 0.5) / std::sqrt(var);
    result.p_two_sided = std::min(1.0, 2.0 * normal_cdf(z));
  }
  return result;
}

void save_eval_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write eval report: " + path);
  out << "session_id,target,rank\n";
  for (const ExampleOutcome& o : report.outcomes) {
    out << o.session_id << ',' << o.target << ',' << o.rank << '\n';
  }
}

EvalReport load_eval_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open eval report: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "session_id,target,rank") {
    throw ParseError("eval report missing header: " + path);
  }
  EvalReport report;
  std::vector<std::uint32_t> ranks;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c2 == std::string::npos) {
      throw ParseError("eval report line " + std::to_string(line_no) + " malformed: " + path);
    }
    ExampleOutcome o;
    const char* base = line.data();
    auto parse_to = [&](std::size_t from, std::size_t to, auto& out_value) {
      auto [ptr, ec] = std::from_chars(base + from, base + to, out_value);
      if (ec != std::errc{} || ptr != base + to) {
        throw ParseError("eval report line " + std::to_string(line_no) + " malformed: " + path);
      }
    };
    parse_to(0, c1, o.session_id);
    parse_to(c1 + 1, c2, o.target);
    parse_to(c2 + 1, line.size(), o.rank);
    report.outcomes.push_back(o);
    ranks.push_back(o.rank);
  }
  report.n = report.outcomes.size();
  if (!ranks.empty()) {
    report.recall = recall_at_k(ranks, report.k);
    report.mrr = mrr_at_k(ranks, report.k);
  }
  return report;
}

void save_eval_json(const EvalReport& report, const std::string& path) {
  nlohmann::json j{{"recall_at_20", report.recall},
                   {"mrr_at_20", report.mrr},
                   {"n", report.n},
                   {"epoch", report.epoch}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write eval json: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace dwellrec

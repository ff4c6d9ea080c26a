#include <algorithm>
#include <bitset>
#include <cmath>
#include <numeric>

#include <doctest.h>

#include "dwellrec/errors.hpp"
#include "dwellrec/evaluation.hpp"
#include "dwellrec/model.hpp"
#include "dwellrec/rng.hpp"

using namespace dwellrec;

namespace {

// Brute-force oracle: full 2^n enumeration of sign patterns with its own
// tie-averaged ranking, independent of the library implementation.
double wilcoxon_enumeration_oracle(std::vector<double> a, std::vector<double> b) {
  std::vector<double> abs_d;
  std::vector<int> sign;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) {
      abs_d.push_back(std::fabs(d));
      sign.push_back(d > 0 ? 1 : -1);
    }
  }
  const std::size_t n = abs_d.size();
  if (n == 0) return 1.0;
  REQUIRE(n <= 20);  // oracle is exponential

  // O(n^2) average-rank assignment
  std::vector<double> rank(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (abs_d[j] < abs_d[i]) below += 1.0;
      if (abs_d[j] == abs_d[i]) equal += 1.0;
    }
    rank[i] = below + (equal + 1.0) / 2.0;
  }

  auto min_w = [&](const std::vector<int>& signs) {
    double wp = 0.0, wm = 0.0;
    for (std::size_t i = 0; i < n; ++i) (signs[i] > 0 ? wp : wm) += rank[i];
    return std::min(wp, wm);
  };
  const double observed = min_w(sign);

  std::size_t hits = 0;
  const std::size_t total = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < total; ++mask) {
    std::vector<int> signs(n);
    for (std::size_t i = 0; i < n; ++i) signs[i] = (mask >> i) & 1 ? 1 : -1;
    if (min_w(signs) <= observed + 1e-12) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("rank_of_target basics") {
  const std::vector<double> row1{0.1, 0.5, 0.4};
  CHECK(rank_of_target(row1, 1) == 1);
  const std::vector<double> row2{0.4, 0.4, 0.2};
  CHECK(rank_of_target(row2, 1) == 2);  // tie at a smaller index precedes
  CHECK(rank_of_target(row2, 0) == 1);
  CHECK_THROWS_AS(rank_of_target(row2, 5), IndexError);
}

TEST_CASE("rank_of_target honors the excluded index") {
  const std::vector<double> row{0.9, 0.05, 0.05};
  CHECK(rank_of_target(row, 1, std::size_t{0}) == 1);  // index 0 does not compete
  CHECK(rank_of_target(row, 1) == 2);
}

TEST_CASE("rank_of_target agrees with the topk position oracle") {
  DetRng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> row(25);
    for (double& v : row) v = rng.uniform();
    if (trial % 3 == 0) row[rng.below(25)] = row[rng.below(25)];  // ties
    const std::size_t target = rng.below(25);
    const auto sorted = topk_row(row, row.size());
    std::uint32_t position = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i].first == static_cast<std::int32_t>(target)) {
        position = static_cast<std::uint32_t>(i + 1);
        break;
      }
    }
    CHECK(rank_of_target(row, target) == position);
  }
}

TEST_CASE("recall and mrr closed-form example") {
  const std::vector<std::uint32_t> ranks{1, 3, 25, 7};
  CHECK(recall_at_k(ranks, 20) == 0.75);
  CHECK(mrr_at_k(ranks, 20) == doctest::Approx(0.36904761904761907).epsilon(1e-15));
}

TEST_CASE("all rank-1 gives perfect scores") {
  const std::vector<std::uint32_t> ranks{1, 1, 1};
  CHECK(recall_at_k(ranks, 20) == 1.0);
  CHECK(mrr_at_k(ranks, 20) == 1.0);
}

TEST_CASE("metrics reject empty input") {
  CHECK_THROWS_AS(recall_at_k({}, 20), ConfigError);
  CHECK_THROWS_AS(mrr_at_k({}, 20), ConfigError);
}

TEST_CASE("recall and mrr are nondecreasing in k, and mrr <= recall") {
  DetRng rng(73);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::uint32_t> ranks;
    for (int i = 0; i < 50; ++i) ranks.push_back(1 + rng.below(40));
    double prev_recall = 0.0, prev_mrr = 0.0;
    for (std::size_t k = 1; k <= 45; ++k) {
      const double r = recall_at_k(ranks, k);
      const double m = mrr_at_k(ranks, k);
      CHECK(r >= prev_recall);
      CHECK(m >= prev_mrr);
      CHECK(m <= r);
      prev_recall = r;
      prev_mrr = m;
    }
  }
}

TEST_CASE("best_epoch picks the maximum recall, earliest on ties") {
  auto report = [](double recall, std::size_t epoch) {
    EvalReport r;
    r.recall = recall;
    r.epoch = epoch;
    return r;
  };
  {
    const std::vector<EvalReport> reports{report(0.3, 1), report(0.5, 2), report(0.4, 3)};
    CHECK(best_epoch(reports).epoch == 2);
  }
  {
    const std::vector<EvalReport> reports{report(0.5, 1), report(0.5, 2)};
    CHECK(best_epoch(reports).epoch == 1);
  }
  CHECK_THROWS_AS(best_epoch({}), ConfigError);

  SUBCASE("random lists match a linear-scan oracle") {
    DetRng rng(79);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<EvalReport> reports;
      for (std::size_t e = 1; e <= 1 + rng.below(10); ++e) {
        reports.push_back(report(rng.below(5) / 4.0, e));  // coarse values force ties
      }
      std::size_t expect = 0;
      for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].recall > reports[expect].recall) expect = i;
      }
      CHECK(best_epoch(reports).epoch == reports[expect].epoch);
    }
  }
}

TEST_CASE("fold_average reproduces the published six-fold means") {
  const std::vector<double> em32{0.639205, 0.631944, 0.665537, 0.673638, 0.688529, 0.663411};
  const std::vector<double> em16{0.636482, 0.629568, 0.661093, 0.673821, 0.684637, 0.666146};
  CHECK(std::fabs(fold_average(em32) - 0.660377) < 5e-6);
  CHECK(std::fabs(fold_average(em16) - 0.658625) < 5e-6);
  CHECK(fold_average(std::vector<double>{0.42}) == 0.42);
  CHECK_THROWS_AS(fold_average({}), ConfigError);
}

TEST_CASE("wilcoxon degenerate case: equal samples") {
  const std::vector<double> a{1, 2, 3};
  const auto res = wilcoxon_signed_rank(a, a);
  CHECK(res.n_effective == 0);
  CHECK(res.p_two_sided == 1.0);
}

TEST_CASE("wilcoxon d=[+1,+2,+3] has exact two-sided p = 0.25") {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{0, 0, 0};
  const auto res = wilcoxon_signed_rank(a, b);
  CHECK(res.n_effective == 3);
  CHECK(res.w == 0.0);
  CHECK(res.method == WilcoxonMethod::exact);
  CHECK(res.p_two_sided == 0.25);
}

TEST_CASE("wilcoxon exact p matches full enumeration on random pairs") {
  DetRng rng(83);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 12;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      // small integer values provoke ties and zero differences
      a[i] = static_cast<double>(rng.range(0, 6));
      b[i] = static_cast<double>(rng.range(0, 6));
    }
    const auto res = wilcoxon_signed_rank(a, b);
    const double oracle = wilcoxon_enumeration_oracle(a, b);
    CHECK(std::fabs(res.p_two_sided - oracle) < 1e-12);
  }
}

TEST_CASE("wilcoxon p is symmetric under swapping the samples") {
  DetRng rng(89);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(15), b(15);
    for (std::size_t i = 0; i < 15; ++i) {
      a[i] = rng.uniform();
      b[i] = rng.uniform();
    }
    const auto ab = wilcoxon_signed_rank(a, b);
    const auto ba = wilcoxon_signed_rank(b, a);
    CHECK(ab.p_two_sided == ba.p_two_sided);
    CHECK(ab.w == ba.w);
  }
}

TEST_CASE("wilcoxon p is invariant under pair relabeling") {
  DetRng rng(97);
  std::vector<double> a(14), b(14);
  for (std::size_t i = 0; i < 14; ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  const auto before = wilcoxon_signed_rank(a, b);
  std::vector<std::size_t> perm(14);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  std::vector<double> pa(14), pb(14);
  for (std::size_t i = 0; i < 14; ++i) {
    pa[i] = a[perm[i]];
    pb[i] = b[perm[i]];
  }
  const auto after = wilcoxon_signed_rank(pa, pb);
  CHECK(before.p_two_sided == after.p_two_sided);
}

TEST_CASE("wilcoxon switches to the normal approximation above n=25") {
  DetRng rng(101);
  std::vector<double> a(40), b(40);
  for (std::size_t i = 0; i < 40; ++i) {
    a[i] = rng.uniform() + 0.8;  // strongly shifted
    b[i] = rng.uniform();
  }
  const auto res = wilcoxon_signed_rank(a, b);
  CHECK(res.method == WilcoxonMethod::normal_approximation);
  CHECK(res.p_two_sided < 1e-4);
  CHECK(res.p_two_sided >= 0.0);

  // near-identical samples stay insignificant
  std::vector<double> c = a;
  for (std::size_t i = 0; i < 40; ++i) c[i] += (rng.uniform() - 0.5) * 1e-3;
  const auto null_res = wilcoxon_signed_rank(a, c);
  CHECK(null_res.p_two_sided > 0.05);
}

TEST_CASE("exact method is used through n_effective = 25") {
  std::vector<double> a(25), b(25);
  for (std::size_t i = 0; i < 25; ++i) {
    a[i] = static_cast<double>(i + 1);
    b[i] = 0.0;
  }
  const auto res = wilcoxon_signed_rank(a, b);
  CHECK(res.n_effective == 25);
  CHECK(res.method == WilcoxonMethod::exact);
  // all-positive differences: p = 2 / 2^25
  CHECK(res.p_two_sided == doctest::Approx(2.0 / 33554432.0).epsilon(1e-12));
}

TEST_CASE("eval report CSV round-trips") {
  EvalReport report;
  report.outcomes = {{10, 3, 1}, {11, 4, 25}, {12, 0, 7}};
  report.n = 3;
  const std::string path = "eval_report_test.csv";
  save_eval_csv(report, path);
  const EvalReport loaded = load_eval_csv(path);
  REQUIRE(loaded.outcomes.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded.outcomes[i].session_id == report.outcomes[i].session_id);
    CHECK(loaded.outcomes[i].target == report.outcomes[i].target);
    CHECK(loaded.outcomes[i].rank == report.outcomes[i].rank);
  }
  CHECK(loaded.recall == doctest::Approx(2.0 / 3.0));
  std::remove(path.c_str());
}

TEST_CASE("reciprocal ranks at k") {
  EvalReport report;
  report.outcomes = {{1, 0, 1}, {2, 0, 4}, {3, 0, 21}};
  const auto rr = reciprocal_ranks_at_k(report, 20);
  REQUIRE(rr.size() == 3);
  CHECK(rr[0] == 1.0);
  CHECK(rr[1] == 0.25);
  CHECK(rr[2] == 0.0);
}

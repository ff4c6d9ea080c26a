#pragma once

#include <vector>

#include "dwellrec/clicks.hpp"

namespace dwellrec::test {

// Hand-built 20-session corpus for the preprocessing filter. Items 101..105
// are frequent; 201..203 are rare. Expected outcome of filter_dataset with
// min_len=2, min_support=5, max_len=16, enumerated by hand:
//
//   session  1 [101]            dropped: shorter than 2 (its click never
//                               counts toward support)
//   session  2 [101 x17]        counts toward support, then dropped: longer
//                               than 16
//   session 11 [102,201,103] -> [102,103] (201 has support 2)
//   session 12 [201,202]        all clicks rare -> dropped
//   session 13 [101,202]     -> [101], fell below 2 -> dropped
//   session 14 [203 x5]         203 reaches support exactly 5 -> kept whole
//   session 15 [104 x16]        length boundary, kept
//   all others                  kept unchanged
//
// Supports over sessions surviving step (1): 101:24 102:8 103:10 104:22
// 105:8 201:2 202:2 203:5. Survivors: 3,4,5,6,7,8,9,10,11,14,15,16,17,18,
// 19,20 (16 sessions, 59 clicks, 43 augmented examples).
inline std::vector<Session> filter_fixture_sessions() {
  constexpr std::int64_t kBase = 1'396'310'400'000;  // 2014-04-01T00:00:00Z
  constexpr std::int64_t kGapMs = 10'000;            // 10 s between clicks

  const std::vector<std::vector<std::int64_t>> item_lists = {
      /* 1*/ {101},
      /* 2*/ {101, 101, 101, 101, 101, 101, 101, 101, 101, 101, 101, 101, 101, 101, 101, 101, 101},
      /* 3*/ {101, 102},
      /* 4*/ {102, 103, 104},
      /* 5*/ {103, 104, 105, 101},
      /* 6*/ {104, 105},
      /* 7*/ {105, 102, 103},
      /* 8*/ {101, 103},
      /* 9*/ {102, 104},
      /*10*/ {105, 101, 104, 102, 103},
      /*11*/ {102, 201, 103},
      /*12*/ {201, 202},
      /*13*/ {101, 202},
      /*14*/ {203, 203, 203, 203, 203},
      /*15*/ {104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104},
      /*16*/ {105, 105},
      /*17*/ {103, 101},
      /*18*/ {104, 103, 102},
      /*19*/ {105, 103},
      /*20*/ {101, 105, 103, 102},
  };

  std::vector<Session> sessions;
  for (std::size_t s = 0; s < item_lists.size(); ++s) {
    Session session;
    session.session_id = static_cast<std::int64_t>(s) + 1;
    std::int64_t t = kBase + static_cast<std::int64_t>(s) * 3'600'000;
    for (std::int64_t item : item_lists[s]) {
      session.clicks.push_back({session.session_id, t, item, "0"});
      t += kGapMs;
    }
    sessions.push_back(std::move(session));
  }
  return sessions;
}

// id -> surviving item sequence, hand-enumerated
inline std::vector<std::pair<std::int64_t, std::vector<std::int64_t>>> filter_fixture_expected() {
  return {
      {3, {101, 102}},
      {4, {102, 103, 104}},
      {5, {103, 104, 105, 101}},
      {6, {104, 105}},
      {7, {105, 102, 103}},
      {8, {101, 103}},
      {9, {102, 104}},
      {10, {105, 101, 104, 102, 103}},
      {11, {102, 103}},
      {14, {203, 203, 203, 203, 203}},
      {15, {104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104, 104}},
      {16, {105, 105}},
      {17, {103, 101}},
      {18, {104, 103, 102}},
      {19, {105, 103}},
      {20, {101, 105, 103, 102}},
  };
}

}  // namespace dwellrec::test

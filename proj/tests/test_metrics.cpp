#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <vector>

#include "doctest.h"
#include "faith/metrics.hpp"
#include "faith/rng.hpp"

using namespace faith;

namespace {

// Independent oracle: literal transcription of the metric definitions, written
// without sharing code with the implementation.
double oracle_fixed(const EditSequence& p, const EditSequence& g) {
  int ok = 0;
  for (int i = 0; i < 4; ++i) {
    const int pv = i < static_cast<int>(p.size()) ? static_cast<int>(p[i]) : 99;
    const int gv = i < static_cast<int>(g.size()) ? static_cast<int>(g[i]) : 99;
    if (pv == gv) ++ok;
  }
  return ok / 4.0;
}

double oracle_adaptive(const EditSequence& p, const EditSequence& g) {
  const size_t m = std::min(p.size(), g.size());
  if (m == 0) return p.empty() && g.empty() ? 1.0 : 0.0;
  int ok = 0;
  for (size_t i = 0; i < m; ++i)
    if (p[i] == g[i]) ++ok;
  return static_cast<double>(ok) / static_cast<double>(m);
}

double oracle_full(const EditSequence& p, const EditSequence& g) {
  if (p.size() != g.size()) return 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i] != g[i]) return 0.0;
  return 1.0;
}

EditSequence random_seq(std::mt19937_64& rng) {
  EditSequence s;
  const int len = uniform_int(rng, 0, 4);
  for (int i = 0; i < len; ++i)
    s.push_back(static_cast<Attribute>(uniform_int(rng, 0, kNumAttributes - 1)));
  return s;
}

SampleRecord record_with(const std::string& id, EditSequence seq) {
  SampleRecord r;
  r.id = id;
  r.image_ref = id + ".ppm";
  int t = 0;
  for (Attribute a : seq) {
    EditStep s;
    s.attribute = a;
    s.prompt = "p" + std::to_string(t++);
    r.steps.push_back(s);
  }
  return r;
}

}  // namespace

TEST_CASE("hand-enumerated metric values") {
  using A = Attribute;
  CHECK(fixed_acc({}, {}) == 1.0);
  CHECK(fixed_acc({A::hair, A::eyes, A::hat}, {A::hair, A::lips}) == 0.5);
  CHECK(fixed_acc({A::eyes, A::lips, A::hair, A::hat}, {A::eyes, A::lips, A::hair, A::hat}) ==
        1.0);

  CHECK(adaptive_acc({A::hair, A::eyes, A::hat}, {A::hair, A::lips}) == 0.5);
  CHECK(adaptive_acc({}, {}) == 1.0);
  CHECK(adaptive_acc({A::hat}, {}) == 0.0);
  CHECK(adaptive_acc({}, {A::hat}) == 0.0);

  CHECK(full_acc({A::glasses}, {A::glasses}) == 1.0);
  CHECK(full_acc({A::lips, A::hair}, {A::hair, A::lips}) == 0.0);
  CHECK(full_acc({A::hair, A::hat}, {A::hair}) == 0.0);

  EditSequence five(5, A::eyes);
  CHECK_THROWS_AS(fixed_acc(five, {}), std::invalid_argument);
  CHECK_THROWS_AS(adaptive_acc({}, five), std::invalid_argument);
  CHECK_THROWS_AS(full_acc(five, five), std::invalid_argument);
}

TEST_CASE("agreement with the brute-force oracle on 10000 random pairs") {
  auto rng = make_rng(41);
  for (int t = 0; t < 10000; ++t) {
    const EditSequence p = random_seq(rng), g = random_seq(rng);
    CHECK(fixed_acc(p, g) == oracle_fixed(p, g));
    CHECK(adaptive_acc(p, g) == oracle_adaptive(p, g));
    CHECK(full_acc(p, g) == oracle_full(p, g));
  }
}

TEST_CASE("metric identities") {
  auto rng = make_rng(42);
  for (int t = 0; t < 2000; ++t) {
    EditSequence p = random_seq(rng), g = random_seq(rng);
    SUBCASE("") {}
    // symmetry
    CHECK(fixed_acc(p, g) == fixed_acc(g, p));
    CHECK(adaptive_acc(p, g) == adaptive_acc(g, p));
    CHECK(full_acc(p, g) == full_acc(g, p));
    // full match forces the other two to 1
    if (full_acc(p, g) == 1.0) {
      CHECK(fixed_acc(p, g) == 1.0);
      CHECK(adaptive_acc(p, g) == 1.0);
    }
  }
  // equal length 4: fixed == adaptive exactly
  for (int t = 0; t < 2000; ++t) {
    EditSequence p, g;
    for (int i = 0; i < 4; ++i) {
      p.push_back(static_cast<Attribute>(uniform_int(rng, 0, 5)));
      g.push_back(static_cast<Attribute>(uniform_int(rng, 0, 5)));
    }
    CHECK(fixed_acc(p, g) == adaptive_acc(p, g));
  }
}

TEST_CASE("evaluate aggregates by ground-truth length") {
  using A = Attribute;
  std::vector<SampleRecord> records;
  int n = 0;
  for (int len = 0; len <= 4; ++len)
    for (int i = 0; i < 3; ++i) {
      EditSequence s;
      for (int j = 0; j < len; ++j) s.push_back(static_cast<A>((i + j) % 6));
      records.push_back(record_with("e" + std::to_string(n++), s));
    }

  SUBCASE("oracle predictor scores 1.0 everywhere") {
    auto report = evaluate([](const SampleRecord& r) { return r.sequence(); }, records);
    for (const auto& row : report.per_length) {
      CHECK(row.count == 3);
      CHECK(row.fixed == 1.0);
      CHECK(row.adaptive == 1.0);
      CHECK(row.full == 1.0);
    }
    CHECK(report.average.fixed == 1.0);
    CHECK(report.average.full == 1.0);
    CHECK(report.average.count == 15);
  }

  SUBCASE("always-empty predictor") {
    auto report = evaluate([](const SampleRecord&) { return EditSequence{}; }, records);
    CHECK(report.per_length[0].fixed == 1.0);
    CHECK(report.per_length[0].adaptive == 1.0);
    CHECK(report.per_length[0].full == 1.0);
    for (int len = 1; len <= 4; ++len) {
      CHECK(report.per_length[len].full == 0.0);
      CHECK(report.per_length[len].adaptive == 0.0);
      CHECK(report.per_length[len].fixed == doctest::Approx((4.0 - len) / 4.0));
    }
  }

  SUBCASE("report replays a brute-force recomputation") {
    auto scramble = [](const SampleRecord& r) {
      EditSequence s = r.sequence();
      if (s.size() >= 2) std::swap(s[0], s[1]);
      return s;
    };
    auto report = evaluate(scramble, records);
    for (int len = 0; len <= 4; ++len) {
      double f = 0, a = 0, fu = 0;
      int c = 0;
      for (const auto& r : records) {
        if (static_cast<int>(r.steps.size()) != len) continue;
        const auto p = scramble(r);
        f += oracle_fixed(p, r.sequence());
        a += oracle_adaptive(p, r.sequence());
        fu += oracle_full(p, r.sequence());
        ++c;
      }
      CHECK(report.per_length[len].fixed == f / c);
      CHECK(report.per_length[len].adaptive == a / c);
      CHECK(report.per_length[len].full == fu / c);
    }
  }

  SUBCASE("empty record list rejected") {
    CHECK_THROWS_AS(evaluate([](const SampleRecord& r) { return r.sequence(); }, {}),
                    std::invalid_argument);
  }
}

TEST_CASE("report renderers are stable") {
  std::vector<SampleRecord> records = {record_with("a", {}),
                                       record_with("b", {Attribute::hat}),
                                       record_with("c", {Attribute::eyes, Attribute::lips})};
  auto report = evaluate([](const SampleRecord& r) { return r.sequence(); }, records);
  const std::string table = report.to_table();
  CHECK(table.find("Length") == 0);
  CHECK(table.find("Avg.") != std::string::npos);
  CHECK(table.find("100.00") != std::string::npos);
  auto j = report.to_json();
  CHECK(j["per_length"].size() == 5);
  CHECK(j["average"]["full_acc"] == 1.0);
  CHECK(j.dump() == report.to_json().dump());
}

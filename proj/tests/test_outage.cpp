#include <doctest.h>

#include <numeric>
#include <random>

#include "case14_util.hpp"
#include "netmodel.hpp"
#include "outage.hpp"
#include "powerflow.hpp"

using namespace gridkit;

namespace {

GridCase four_bus_ring() {
  return parse_case(R"({"version":1,
    "buses":[{"id":1,"type":"slack","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":2,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":3,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":4,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1}],
    "branches":[{"from":1,"to":2,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0},
                {"from":2,"to":3,"r":0,"x":0.2,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0},
                {"from":3,"to":4,"r":0,"x":0.25,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0},
                {"from":4,"to":1,"r":0,"x":0.5,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0}],
    "generators":[],"loads":[]})");
}

Vec random_balanced(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Vec p(n);
  for (int i = 0; i < n; ++i) p[i] = g(rng);
  p.array() -= p.mean();
  return p;
}

std::vector<int> all_buses(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

bool connected_without(const GridCase& c, const std::vector<int>& lines) {
  std::vector<char> drop(c.n_branches(), 0);
  for (int l : lines) drop[l] = 1;
  std::vector<std::pair<int, int>> edges;
  for (int l = 0; l < c.n_branches(); ++l)
    if (!drop[l]) edges.emplace_back(c.from_index(l), c.to_index(l));
  auto comp = connected_components(c.n_buses(), edges);
  return *std::max_element(comp.begin(), comp.end()) == 0;
}

}  // namespace

TEST_CASE("no event produces a zero observation") {
  GridCase c = four_bus_ring();
  DcModel dc = build_dc(c);
  Vec p = random_balanced(4, 1);
  Vec theta = solve_dc(dc, p, 0);
  OutageModel model = build_outage_model(dc, theta, theta, all_buses(4), 0);
  CHECK(model.observation.cwiseAbs().maxCoeff() == 0.0);

  OutageEstimate est = identify_exhaustive(model, 1);
  CHECK(est.lines[0] == 0);  // lowest index on the degenerate tie
  CHECK(std::abs(est.m_hat[0]) < 1e-12);
}

TEST_CASE("single outage on the ring matches the forward simulation") {
  GridCase c = four_bus_ring();
  DcModel dc = build_dc(c);
  Vec p = random_balanced(4, 2);
  const int out_line = 1;
  auto [pre, post] = simulate_line_outage(c, p, {out_line}, 0);
  OutageModel model = build_outage_model(dc, pre, post, all_buses(4), 0);

  // observation equals m_l * (B^-1 a_l) for the true line
  const double m_true =
      dc.A.row(out_line).dot(post) / c.branches()[out_line].x;
  Vec predicted = model.F.col(out_line) * m_true;
  CHECK((model.observation - predicted).cwiseAbs().maxCoeff() < 1e-10);

  OutageEstimate est = identify_exhaustive(model, 1);
  CHECK(est.lines == std::vector<int>{out_line});
  CHECK(est.residual < 1e-10);
  CHECK(est.m_hat[out_line] == doctest::Approx(m_true).epsilon(1e-8));
}

TEST_CASE("model restricted to every bus equals the unrestricted model") {
  GridCase c = four_bus_ring();
  DcModel dc = build_dc(c);
  Vec p = random_balanced(4, 3);
  auto [pre, post] = simulate_line_outage(c, p, {2}, 0);
  OutageModel full = build_outage_model(dc, pre, post, all_buses(4), 0);
  CHECK(full.F.rows() == 3);  // every bus except the reference
  CHECK(full.observation.size() == 3);
}

TEST_CASE("model validation") {
  GridCase c = four_bus_ring();
  DcModel dc = build_dc(c);
  Vec theta = Vec::Zero(4);
  CHECK_THROWS_WITH_AS(build_outage_model(dc, theta, theta, {1, 2}, 0),
                       doctest::Contains("reference bus"), Error);
  CHECK_THROWS_AS(build_outage_model(dc, theta, theta, {}, 0), Error);
  CHECK_THROWS_AS(identify_exhaustive(
                      build_outage_model(dc, theta, theta, all_buses(4), 0), 3),
                  Error);
}

TEST_CASE("double outage on the 14-bus fixture is identified exactly") {
  GridCase c = load_case14();
  DcModel dc = build_dc(c);
  Vec p = random_balanced(14, 4);
  std::vector<int> out = {2, 10};
  REQUIRE(connected_without(c, out));
  auto [pre, post] = simulate_line_outage(c, p, out, 0);
  OutageModel model = build_outage_model(dc, pre, post, all_buses(14), 0);

  OutageEstimate ex = identify_exhaustive(model, 2);
  CHECK(ex.lines == out);
  CHECK(ex.residual < 1e-9);

  OutageEstimate omp = identify_omp(model, 2);
  CHECK(omp.lines == out);
}

TEST_CASE("omp with a single column equals the exhaustive oracle") {
  GridCase c = load_case14();
  DcModel dc = build_dc(c);
  for (int line = 0; line < c.n_branches(); ++line) {
    if (!connected_without(c, {line})) continue;
    Vec p = random_balanced(14, 100 + line);
    auto [pre, post] = simulate_line_outage(c, p, {line}, 0);
    OutageModel model = build_outage_model(dc, pre, post, all_buses(14), 0);
    OutageEstimate ex = identify_exhaustive(model, 1);
    OutageEstimate greedy = identify_omp(model, 1);
    CHECK(ex.lines == std::vector<int>{line});
    CHECK(greedy.lines == ex.lines);
  }
}

TEST_CASE("omp with k=0 returns the empty estimate") {
  GridCase c = four_bus_ring();
  DcModel dc = build_dc(c);
  Vec p = random_balanced(4, 5);
  auto [pre, post] = simulate_line_outage(c, p, {1}, 0);
  OutageModel model = build_outage_model(dc, pre, post, all_buses(4), 0);
  OutageEstimate est = identify_omp(model, 0);
  CHECK(est.lines.empty());
  CHECK(est.residual == doctest::Approx(model.observation.norm()));
}

TEST_CASE("row restriction to an internal area keeps the outage identifiable") {
  GridCase c = load_case14();
  DcModel dc = build_dc(c);
  // bus 14 is unobserved; the outaged line has both endpoints internal.
  // (A line hanging off an unobserved degree-2 bus would be structurally
  // ambiguous: its visible signature equals that of the bus's other line.)
  std::vector<int> internal;
  for (int b = 0; b < 13; ++b) internal.push_back(b);
  Vec p = random_balanced(14, 6);
  const int out_line = 10;  // branch 6-11, both ends observed
  REQUIRE(connected_without(c, {out_line}));
  auto [pre, post] = simulate_line_outage(c, p, {out_line}, 0);
  OutageModel model = build_outage_model(dc, pre, post, internal, 0);
  CHECK(model.F.rows() == 12);
  OutageEstimate est = identify_exhaustive(model, 1);
  CHECK(est.lines == std::vector<int>{out_line});
  CHECK(est.residual < 1e-10);
}

TEST_CASE("omp equals the exhaustive oracle on every noiseless double outage") {
  GridCase c = load_case14();
  DcModel dc = build_dc(c);
  std::vector<int> all = all_buses(14);
  int checked = 0;
  for (int i = 0; i < c.n_branches(); ++i) {
    for (int j = i + 1; j < c.n_branches(); ++j) {
      if (!connected_without(c, {i, j})) continue;
      Vec p = random_balanced(14, 137 + i * 20 + j);
      auto [pre, post] = simulate_line_outage(c, p, {i, j}, 0);
      OutageModel model = build_outage_model(dc, pre, post, all, 0);
      OutageEstimate ex = identify_exhaustive(model, 2);
      OutageEstimate greedy = identify_omp(model, 2);
      CHECK(greedy.lines == ex.lines);
      ++checked;
    }
  }
  CHECK(checked > 150);
}

TEST_CASE("omp support recovery rate at 40 dB SNR") {
  GridCase c = load_case14();
  DcModel dc = build_dc(c);

  // admissible double outages keep the grid connected
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < c.n_branches(); ++i)
    for (int j = i + 1; j < c.n_branches(); ++j)
      if (connected_without(c, {i, j})) pairs.emplace_back(i, j);
  REQUIRE(pairs.size() > 50);

  int hits = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(4000 + t);
    auto [i, j] = pairs[rng() % pairs.size()];
    Vec p = random_balanced(14, 7000 + t);
    auto [pre, post] = simulate_line_outage(c, p, {i, j}, 0);
    OutageModel model = build_outage_model(dc, pre, post, all_buses(14), 0);

    // add observation noise at 40 dB signal-to-noise
    std::normal_distribution<double> g;
    const double snr = 40.0;
    double sigma = model.observation.norm() * std::pow(10.0, -snr / 20.0) /
                   std::sqrt(static_cast<double>(model.observation.size()));
    for (int r = 0; r < model.observation.size(); ++r)
      model.observation[r] += sigma * g(rng);

    OutageEstimate est = identify_omp(model, 2);
    if (est.lines == std::vector<int>{i, j}) ++hits;
  }
  CHECK(hits >= 90);
}

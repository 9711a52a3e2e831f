#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "netmodel.hpp"
#include "test_util.hpp"

using namespace gridkit;

namespace {

std::string two_bus_case(double x = 0.1, double b_c = 0.0, double shift = 0.0) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                R"({"version":1,
  "buses":[{"id":1,"type":"slack","b_shunt":0,"v_min":0.9,"v_max":1.1},
           {"id":2,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1}],
  "branches":[{"from":1,"to":2,"r":0,"x":%g,"b_c":%g,"tap":1,"shift":%g,"p_max":0,"s_max":0}],
  "generators":[],"loads":[]})",
                x, b_c, shift);
  return buf;
}

ComplexState random_state(int n, unsigned seed, double angle_scale = 0.3,
                          double mag_spread = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexState s;
  s.vm.resize(n);
  s.va.resize(n);
  for (int i = 0; i < n; ++i) {
    s.vm[i] = 1.0 + mag_spread * u(rng);
    s.va[i] = angle_scale * u(rng);
  }
  s.va[0] = 0.0;
  return s;
}

}  // namespace

TEST_CASE("parse_case accepts the minimal two-bus system") {
  GridCase c = parse_case(two_bus_case());
  CHECK(c.n_buses() == 2);
  CHECK(c.n_branches() == 1);
  CHECK(c.slack_index() == 0);
}

TEST_CASE("parse_case reads the 14-bus fixture") {
  GridCase c = parse_case(read_fixture("case14.json"));
  CHECK(c.n_buses() == 14);
  CHECK(c.n_branches() == 20);
  CHECK(c.generators().size() == 5);
  // round trip through the serializer
  GridCase c2 = parse_case(case_to_json(c));
  CHECK(c2.n_buses() == 14);
  CHECK(c2.branches()[7].tap == doctest::Approx(0.978));
}

TEST_CASE("parse_case diagnostics are distinct") {
  CHECK_THROWS_WITH_AS(parse_case("{nope"), doctest::Contains("malformed JSON"),
                       Error);
  CHECK_THROWS_WITH_AS(parse_case(two_bus_case(0.0)),
                       doctest::Contains("nonpositive reactance"), Error);

  std::string no_slack = R"({"version":1,
    "buses":[{"id":1,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1}],
    "branches":[],"generators":[],"loads":[]})";
  CHECK_THROWS_WITH_AS(parse_case(no_slack), doctest::Contains("missing slack bus"),
                       Error);

  std::string dangling = R"({"version":1,
    "buses":[{"id":1,"type":"slack","b_shunt":0,"v_min":0.9,"v_max":1.1}],
    "branches":[{"from":1,"to":7,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0}],
    "generators":[],"loads":[]})";
  CHECK_THROWS_WITH_AS(parse_case(dangling),
                       doctest::Contains("dangling branch endpoint"), Error);

  std::string unknown_key = two_bus_case();
  unknown_key.insert(unknown_key.find("\"buses\""), "\"extra\":3,");
  CHECK_THROWS_WITH_AS(parse_case(unknown_key), doctest::Contains("unknown key"),
                       Error);
}

TEST_CASE("build_admittance assembles the plain pi model") {
  GridCase c = parse_case(two_bus_case(0.1));
  AdmittanceModel m = build_admittance(c);
  CHECK(std::abs(m.Y(0, 0) - Complex(0, -10)) < 1e-12);
  CHECK(std::abs(m.Y(0, 1) - Complex(0, 10)) < 1e-12);
  CHECK(std::abs(m.Y(1, 0) - Complex(0, 10)) < 1e-12);
  CHECK(std::abs(m.Y(1, 1) - Complex(0, -10)) < 1e-12);
  CHECK_FALSE(m.has_phase_shift);
}

TEST_CASE("charging susceptance adds to the diagonal only") {
  AdmittanceModel plain = build_admittance(parse_case(two_bus_case(0.1, 0.0)));
  AdmittanceModel charged = build_admittance(parse_case(two_bus_case(0.1, 0.2)));
  CHECK(std::abs(charged.Y(0, 0) - plain.Y(0, 0) - Complex(0, 0.1)) < 1e-12);
  CHECK(std::abs(charged.Y(1, 1) - plain.Y(1, 1) - Complex(0, 0.1)) < 1e-12);
  CHECK(std::abs(charged.Y(0, 1) - plain.Y(0, 1)) < 1e-12);
}

TEST_CASE("phase shifter breaks Y symmetry") {
  AdmittanceModel m = build_admittance(parse_case(two_bus_case(0.1, 0.0, 0.2)));
  CHECK(m.has_phase_shift);
  CHECK(std::abs(m.Y(0, 1) - m.Y(1, 0)) > 1e-6);

  AdmittanceModel m14 = build_admittance(parse_case(read_fixture("case14.json")));
  CHECK_FALSE(m14.has_phase_shift);
  CHECK((m14.Y - m14.Y.transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("build_dc on a single branch") {
  DcModel m = build_dc(parse_case(two_bus_case(0.1)));
  CHECK(m.Bx(0, 0) == doctest::Approx(10.0));
  CHECK(m.Bx(0, 1) == doctest::Approx(-10.0));
  CHECK(m.Bx(1, 0) == doctest::Approx(-10.0));
  CHECK(m.Bx(1, 1) == doctest::Approx(10.0));
}

TEST_CASE("B_x is the weighted Laplacian of the 14-bus fixture") {
  GridCase c = parse_case(read_fixture("case14.json"));
  DcModel m = build_dc(c);
  Mat rebuilt = m.A.transpose() * m.D.asDiagonal() * m.A;
  CHECK((m.Bx - rebuilt).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m.Bx * Vec::Ones(14)).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::SelfAdjointEigenSolver<Mat> es(m.Bx);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);  // PSD
  int rank = (es.eigenvalues().array() > 1e-8).count();
  CHECK(rank == 13);  // connected: N_b - 1
}

TEST_CASE("disconnected case has rank N_b - #components") {
  std::string four_bus = R"({"version":1,
    "buses":[{"id":1,"type":"slack","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":2,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":3,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":4,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1}],
    "branches":[{"from":1,"to":2,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0},
                {"from":3,"to":4,"r":0,"x":0.2,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0}],
    "generators":[],"loads":[]})";
  DcModel m = build_dc(parse_case(four_bus));
  Eigen::SelfAdjointEigenSolver<Mat> es(m.Bx);
  int rank = (es.eigenvalues().array() > 1e-8).count();
  CHECK(rank == 2);
}

TEST_CASE("flat state on a lossless branch draws no series power") {
  GridCase c = parse_case(two_bus_case(0.1, 0.2));
  AdmittanceModel m = build_admittance(c);
  PQ inj = ac_injections(m, ComplexState::flat(2), Coords::Polar);
  CHECK(inj.p.cwiseAbs().maxCoeff() < 1e-14);
  // Q reflects only the charging term: Q_m = -B_mm = -0.1 per end at V=1
  CHECK(inj.q[0] == doctest::Approx(-0.1));
  CHECK(inj.q[1] == doctest::Approx(-0.1));
}

TEST_CASE("two-bus polar injection by hand") {
  GridCase c = parse_case(two_bus_case(0.1));
  AdmittanceModel m = build_admittance(c);
  ComplexState s;
  s.vm = Vec::Ones(2);
  s.va.resize(2);
  s.va << 0.1, 0.0;
  PQ inj = ac_injections(m, s, Coords::Polar);
  CHECK(inj.p[0] == doctest::Approx(10.0 * std::sin(0.1)).epsilon(1e-12));
  CHECK(inj.p[1] == doctest::Approx(-10.0 * std::sin(0.1)).epsilon(1e-12));
}

TEST_CASE("polar and rectangular injections agree on random 14-bus states") {
  GridCase c = parse_case(read_fixture("case14.json"));
  AdmittanceModel m = build_admittance(c);
  for (unsigned seed = 0; seed < 50; ++seed) {
    ComplexState s = random_state(14, seed);
    PQ a = ac_injections(m, s, Coords::Polar);
    PQ b = ac_injections(m, s, Coords::Rect);
    CHECK((a.p - b.p).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.q - b.q).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("series-only branch carries equal and opposite current") {
  AdmittanceModel plain = build_admittance(parse_case(two_bus_case(0.1, 0.0)));
  ComplexState s = random_state(2, 7);
  auto flows = branch_flows(plain, s);
  CHECK(std::abs(flows[0].i_from + flows[0].i_to) < 1e-14);

  AdmittanceModel charged = build_admittance(parse_case(two_bus_case(0.1, 0.2)));
  auto flows2 = branch_flows(charged, s);
  CHECK(std::abs(flows2[0].i_from + flows2[0].i_to) > 1e-6);
}

TEST_CASE("line flows plus shunt reproduce nodal injections") {
  GridCase c = parse_case(read_fixture("case14.json"));
  AdmittanceModel m = build_admittance(c);
  ComplexState s = random_state(14, 21);
  PQ inj = ac_injections(m, s, Coords::Polar);
  auto flows = branch_flows(m, s);
  CVec v = s.to_complex();

  CVec total = CVec::Zero(14);
  for (int l = 0; l < c.n_branches(); ++l) {
    total[c.from_index(l)] += flows[l].s_from;
    total[c.to_index(l)] += flows[l].s_to;
  }
  for (int i = 0; i < 14; ++i) {
    // bus shunt current j*b_s*V contributes S = -j*b_s*|V|^2
    total[i] += -Complex(0, c.buses()[i].b_shunt) * std::norm(v[i]);
    CHECK(std::abs(total[i] - Complex(inj.p[i], inj.q[i])) < 1e-12);
  }
}

TEST_CASE("dc injections") {
  GridCase c2 = parse_case(two_bus_case(0.1));
  DcModel m2 = build_dc(c2);
  Vec theta(2), v = Vec::Ones(2);
  theta << 0.1, 0.0;
  PQ inj = dc_injections(m2, theta, v);
  CHECK(inj.p[0] == doctest::Approx(1.0));
  CHECK(inj.p[1] == doctest::Approx(-1.0));

  // constant angles produce no flow
  PQ none = dc_injections(m2, Vec::Constant(2, 0.4), v);
  CHECK(none.p.cwiseAbs().maxCoeff() < 1e-14);

  GridCase c14 = parse_case(read_fixture("case14.json"));
  DcModel m14 = build_dc(c14);
  ComplexState s = random_state(14, 3);
  PQ inj14 = dc_injections(m14, s.va, s.vm);
  CHECK(std::abs(inj14.p.sum()) < 1e-12);
}

TEST_CASE("dc model is the small-angle limit of the lossless ac model") {
  // lossless 4-bus ring without transformers or shunts
  std::string ring = R"({"version":1,
    "buses":[{"id":1,"type":"slack","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":2,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":3,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":4,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1}],
    "branches":[{"from":1,"to":2,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0},
                {"from":2,"to":3,"r":0,"x":0.2,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0},
                {"from":3,"to":4,"r":0,"x":0.25,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0},
                {"from":4,"to":1,"r":0,"x":0.5,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0}],
    "generators":[],"loads":[]})";
  GridCase c = parse_case(ring);
  AdmittanceModel ac = build_admittance(c);
  DcModel dc = build_dc(c);
  Vec theta0(4);
  theta0 << 0.0, 0.3, -0.2, 0.1;
  double prev_ratio = 0.0;
  for (double s : {1e-1, 1e-2, 1e-3}) {
    ComplexState st;
    st.vm = Vec::Ones(4);
    st.va = s * theta0;
    Vec p_ac = ac_injections(ac, st, Coords::Polar).p;
    Vec p_dc = dc_injections(dc, st.va, st.vm).p;
    double ratio = (p_ac - p_dc).cwiseAbs().maxCoeff() / (s * s);
    if (prev_ratio > 0.0) CHECK(ratio < prev_ratio);  // error is o(s^2)
    CHECK(ratio < 1.0);
    prev_ratio = ratio;
  }
}

TEST_CASE("polar/rectangular conversions are mutually inverse") {
  for (unsigned seed = 0; seed < 20; ++seed) {
    ComplexState s = random_state(10, seed, 3.0, 0.4);
    ComplexState back = ComplexState::from_rect(s.rect_real(), s.rect_imag());
    CHECK((back.vm - s.vm).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.va - s.va).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dimension mismatches are rejected") {
  GridCase c = parse_case(two_bus_case());
  AdmittanceModel m = build_admittance(c);
  CHECK_THROWS_AS(ac_injections(m, ComplexState::flat(3), Coords::Polar), Error);
  DcModel dm = build_dc(c);
  CHECK_THROWS_AS(dc_injections(dm, Vec::Zero(3), Vec::Ones(2)), Error);
}

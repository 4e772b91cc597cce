#include <doctest.h>

#include <cmath>

#include "error.hpp"
#include "helpers.hpp"
#include "loci.hpp"
#include "samples_io.hpp"
#include "state_space.hpp"

using namespace freqstab;
using testing::cd;
using testing::kPi;

TEST_CASE("eval_response: C(-A)^-1 B at dc is identity") {
  StateSpaceModel m;
  m.A = -Eigen::Matrix2d::Identity();
  m.state_labels = {"a", "b"};
  m.add_input("u", Eigen::Matrix2d::Identity());
  m.add_output("y", Eigen::Matrix2d::Identity());
  const Eigen::MatrixXcd G = eval_response(m, "u", "y", 0.0);
  CHECK((G - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("eval_response: dq RL branch admittance times analytic impedance is identity") {
  const double R = 0.4, L = 7e-3, w0 = 2 * kPi * 50;
  const auto m = rl_branch_model(R, L, w0);
  for (double f : {0.01, 0.3, 5.0, 50.0, 777.0, 1e4}) {
    const double w = 2 * kPi * f;
    const Eigen::MatrixXcd Y = eval_response(m, "u", "i", w);
    CHECK((Y * testing::rl_impedance(R, L, w0, w) - Eigen::Matrix2cd::Identity()).norm() < 1e-10);
  }
}

TEST_CASE("eval_response: strictly proper model rolls off") {
  Eigen::MatrixXd A(3, 3);
  A << -1, 2, 0, -3, -4, 1, 0.5, 0, -2;
  StateSpaceModel m;
  m.A = A;
  m.state_labels = {"x1", "x2", "x3"};
  m.add_input("u", Eigen::MatrixXd::Ones(3, 1));
  m.add_output("y", Eigen::MatrixXd::Ones(1, 3));
  const double rho = eigenvalues(A).cwiseAbs().maxCoeff();
  CHECK(eval_response(m, "u", "y", 1e6 * rho).norm() < 1e-4);
}

TEST_CASE("eval_response: singular resolvent on an imaginary-axis pole") {
  StateSpaceModel m;
  m.A.resize(2, 2);
  m.A << 0, 3, -3, 0;
  m.state_labels = {"x", "y"};
  m.add_input("u", Eigen::Matrix2d::Identity());
  m.add_output("y", Eigen::Matrix2d::Identity());
  try {
    eval_response(m, "u", "y", 3.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSingularResolvent);
  }
}

TEST_CASE("state-space validation rejects bad shapes and non-finite entries") {
  StateSpaceModel m;
  m.A = -Eigen::Matrix2d::Identity();
  m.state_labels = {"a", "b"};
  m.add_input("u", Eigen::MatrixXd::Ones(3, 1));
  CHECK_THROWS_AS(m.validate(), Error);
  StateSpaceModel k;
  k.A = -Eigen::Matrix2d::Identity();
  k.A(0, 1) = std::nan("");
  k.state_labels = {"a", "b"};
  CHECK_THROWS_AS(k.validate(), Error);
}

TEST_CASE("eigen2 on simple matrices") {
  auto sorted = [](std::pair<cd, cd> p) {
    if (p.first.real() > p.second.real()) std::swap(p.first, p.second);
    return p;
  };
  auto id = eigen2(Eigen::Matrix2cd::Identity());
  CHECK(std::abs(id.first - 1.0) < 1e-14);
  CHECK(std::abs(id.second - 1.0) < 1e-14);

  Eigen::Matrix2cd D = Eigen::Matrix2cd::Zero();
  D(0, 0) = cd(2, 1);
  D(1, 1) = cd(-3, 0.5);
  auto d = eigen2(D);
  const bool direct = std::abs(d.first - D(0, 0)) < 1e-14 && std::abs(d.second - D(1, 1)) < 1e-14;
  const bool swapped = std::abs(d.second - D(0, 0)) < 1e-14 && std::abs(d.first - D(1, 1)) < 1e-14;
  CHECK((direct || swapped));

  // roots of l^2 + 3 l + 2
  Eigen::Matrix2cd M;
  M << 0, 1, -2, -3;
  auto r = sorted(eigen2(M));
  CHECK(std::abs(r.first - cd(-2, 0)) < 1e-13);
  CHECK(std::abs(r.second - cd(-1, 0)) < 1e-13);
}

TEST_CASE("eigen2 matches the determinant and trace of random complex matrices") {
  std::srand(7);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Matrix2cd M = Eigen::Matrix2cd::Random() * 10.0;
    const auto [a, b] = eigen2(M);
    CHECK(std::abs(a + b - M.trace()) < 1e-12 * (1 + M.norm()));
    CHECK(std::abs(a * b - M.determinant()) < 1e-12 * (1 + M.squaredNorm()));
  }
}

TEST_CASE("sort_loci: constant pair and passthrough") {
  std::vector<double> f{1, 2, 3, 4};
  std::vector<std::pair<cd, cd>> raw{{2, 5}, {5, 2}, {2, 5}, {5, 2}};
  const EigenLoci l = sort_loci(f, raw);
  const cd first = l.lambda1[0];
  for (std::size_t k = 0; k < f.size(); ++k) {
    CHECK(l.lambda1[k] == first);
    CHECK(l.lambda2[k] == (first == cd(2) ? cd(5) : cd(2)));
  }
  const EigenLoci one = sort_loci({3.0}, {{cd(1, 1), cd(4, 0)}});
  CHECK(one.size() == 1);
  CHECK(one.lambda1[0] == cd(1, 1));
  CHECK(one.lambda2[0] == cd(4, 0));
}

TEST_CASE("sort_loci follows phase continuity for e^{j theta} and 2 e^{j theta}") {
  std::vector<double> f;
  std::vector<std::pair<cd, cd>> raw;
  for (int k = 0; k < 400; ++k) {
    const double th = 0.02 * k;
    f.push_back(1.0 + k);
    const cd a = std::polar(1.0, th), b = std::polar(2.0, th);
    raw.push_back(k % 3 == 0 ? std::make_pair(b, a) : std::make_pair(a, b));
  }
  const EigenLoci l = sort_loci(f, raw);
  const bool l1_small = std::abs(l.lambda1[0]) < 1.5;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double th = 0.02 * static_cast<double>(k);
    const cd small = std::polar(1.0, th), big = std::polar(2.0, th);
    CHECK(std::abs((l1_small ? l.lambda1[k] : l.lambda2[k]) - small) < 1e-14);
    CHECK(std::abs((l1_small ? l.lambda2[k] : l.lambda1[k]) - big) < 1e-14);
  }
}

TEST_CASE("winding_number examples") {
  std::vector<cd> circle, inner, twice;
  for (int k = 0; k < 720; ++k) {
    const double th = 2 * kPi * k / 720.0;
    circle.push_back(-1.0 + 0.5 * std::polar(1.0, th));
    inner.push_back(0.9 * std::polar(1.0, th));
    twice.push_back(std::polar(1.0, 2 * th) - 1.0 + 0.0);
  }
  CHECK(winding_number(circle, -1.0) == 1);
  std::vector<cd> reversed(circle.rbegin(), circle.rend());
  CHECK(winding_number(reversed, -1.0) == -1);
  CHECK(winding_number(inner, -1.0) == 0);
  // e^{j2 theta} - 1 passes through 0; wind it about its centre -1
  CHECK(winding_number(twice, cd(-1.0, 0.0)) == 2);
}

TEST_CASE("winding_number refuses points on the curve") {
  std::vector<cd> c;
  for (int k = 0; k < 100; ++k) c.push_back(std::polar(1.0, 2 * kPi * k / 100.0));
  CHECK_THROWS_AS(winding_number(c, cd(1.0, 0.0)), Error);
}

TEST_CASE("transfer samples validation") {
  TransferSamples s(2, 2);
  s.push_back(1.0, Eigen::Matrix2cd::Identity());
  s.push_back(2.0, Eigen::Matrix2cd::Identity());
  CHECK_NOTHROW(s.validate());
  TransferSamples bad = s;
  bad.freq_hz[1] = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  TransferSamples nf = s;
  nf.values[0](0, 1) = cd(std::nan(""), 0);
  CHECK_THROWS_AS(nf.validate(), Error);
}

TEST_CASE("log_grid holds both endpoints and the requested density") {
  const auto f = log_grid(0.01, 1e4, 100);
  CHECK(f.front() == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(f.back() == doctest::Approx(1e4).epsilon(1e-15));
  CHECK(f.size() == 601);
  for (std::size_t k = 1; k < f.size(); ++k) CHECK(f[k] > f[k - 1]);
}

TEST_CASE("csv and json round trips are exact") {
  TransferSamples s(2, 1);
  for (int k = 0; k < 25; ++k) {
    Eigen::MatrixXcd v(2, 1);
    v << cd(std::sin(k) / 3.0, 1e-300 * k), cd(-1.0 / (k + 7), std::exp(k / 3.0));
    s.push_back(0.1 * std::pow(1.37, k), v);
  }
  const TransferSamples c = samples_from_csv(samples_to_csv(s));
  const TransferSamples j = samples_from_json(samples_to_json(s));
  REQUIRE(c.size() == s.size());
  REQUIRE(j.size() == s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(c.freq_hz[k] == s.freq_hz[k]);
    CHECK(j.freq_hz[k] == s.freq_hz[k]);
    CHECK((c.values[k] - s.values[k]).norm() == 0.0);
    CHECK((j.values[k] - s.values[k]).norm() == 0.0);
  }
}

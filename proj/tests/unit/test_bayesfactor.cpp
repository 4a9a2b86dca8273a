#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "nettomo/bayesfactor.hpp"
#include "nettomo/errors.hpp"

using namespace nettomo;
using boost::multiprecision::cpp_rational;

namespace {

void compositions(int k, int n, const std::function<void(const CountVector&)>& f) {
  CountVector v = CountVector::Zero(k);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == k - 1) {
      v(i) = left;
      f(v);
      return;
    }
    for (int a = 0; a <= left; ++a) {
      v(i) = a;
      rec(i + 1, left - a);
    }
  };
  rec(0, n);
}

cpp_rational rising(cpp_rational x, Count n) {
  cpp_rational r = 1;
  for (Count i = 0; i < n; ++i) r *= x + i;
  return r;
}

// Dirichlet-multinomial mass with integer parameters, as an exact fraction.
cpp_rational dm_exact(const CountVector& n, const std::vector<int>& alpha) {
  Count total = 0;
  int a = 0;
  cpp_rational num = 1;
  for (Eigen::Index k = 0; k < n.size(); ++k) {
    total += n(k);
    a += alpha[static_cast<std::size_t>(k)];
    num *= rising(alpha[static_cast<std::size_t>(k)], n(k));
    for (Count i = 2; i <= n(k); ++i) num /= i;
  }
  for (Count i = 2; i <= total; ++i) num *= i;
  return num / rising(a, total);
}

TransitionProfile sticky(int k, double stay) {
  std::vector<std::string> states;
  for (int i = 0; i < k; ++i) states.push_back("s" + std::to_string(i));
  TransitionProfile p = TransitionProfile::uniform("alice", states);
  p.probs = Matrix::Constant(k, k, (1.0 - stay) / (k - 1));
  p.probs.diagonal().setConstant(stay);
  return p;
}

}  // namespace

TEST_CASE("dirichlet-multinomial sums to one, exactly for integer parameters") {
  for (int k = 1; k <= 4; ++k) {
    std::vector<int> alpha;
    for (int i = 0; i < k; ++i) alpha.push_back(i + 1);
    Vector alpha_d(k);
    for (int i = 0; i < k; ++i) alpha_d(i) = alpha[static_cast<std::size_t>(i)];
    for (int n = 0; n <= 8; ++n) {
      cpp_rational exact = 0;
      double total = 0.0;
      compositions(k, n, [&](const CountVector& v) {
        const cpp_rational q = dm_exact(v, alpha);
        exact += q;
        const double got = std::exp(dm_marginal_logpmf(v, DirichletParams{alpha_d}));
        CHECK(std::abs(got / static_cast<double>(q) - 1.0) < 1e-12);
        total += got;
      });
      CHECK(exact == 1);
      CHECK(std::abs(total - 1.0) < 1e-13);
    }
  }
}

TEST_CASE("property: marginal equals likelihood times prior over posterior") {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + static_cast<int>(rng.uniform_int(0, 3));
    Vector alpha(k);
    for (int i = 0; i < k; ++i) alpha(i) = 0.2 + 3.0 * rng.uniform();
    const DirichletParams d{alpha};
    PacketSequence seq{"x", {}};
    const auto len = rng.uniform_int(2, 12);
    for (Count i = 0; i < len; ++i) seq.events.push_back(static_cast<int>(rng.uniform_int(0, k - 1)));
    CountVector n = CountVector::Zero(k);
    for (std::size_t i = 1; i < seq.events.size(); ++i) n(seq.events[i]) += 1;
    const Vector q = sample_dirichlet(d, rng);
    double loglik = 0.0;
    for (std::size_t i = 1; i < seq.events.size(); ++i) loglik += std::log(q(seq.events[i]));
    const double rhs = loglik + dirichlet_logpdf(q, d) - dirichlet_logpdf(q, dirichlet_posterior(d, n));
    CHECK(seq_loglik_h1(seq, d) == doctest::Approx(rhs).epsilon(1e-9));
  }
}

TEST_CASE("dirichlet density on a known point") {
  Vector p(2);
  p << 0.25, 0.75;
  Vector a(2);
  a << 2.0, 3.0;
  // Beta(2, 3) density at 0.25 is 12 * 0.25 * 0.75^2.
  CHECK(dirichlet_logpdf(p, DirichletParams{a}) == doctest::Approx(std::log(12 * 0.25 * 0.5625)));
  CHECK_THROWS_AS(dirichlet_logpdf(Vector::Zero(2), DirichletParams{a}), DomainError);
}

TEST_CASE("null log-likelihood and the impossible-step case") {
  TransitionProfile p = sticky(3, 0.8);
  const PacketSequence seq{"alice", {0, 0, 1, 1}};
  CHECK(seq_loglik_h0(seq, p) == doctest::Approx(std::log(0.8) + std::log(0.1) + std::log(0.8)));
  p.probs(1, 1) = 0.0;
  p.probs(1, 0) = 0.2;
  CHECK(std::isinf(seq_loglik_h0(seq, p)));
  const BayesFactor bf = bayes_factor(seq, p, DirichletParams::uniform(3));
  CHECK(bf.woe == std::numeric_limits<double>::infinity());
  const ScoreRecord rec = score_sequence(seq, p, DirichletParams::uniform(3));
  CHECK(rec.anomaly);
  CHECK(rec.to_json()["woe"] == "+inf");
}

TEST_CASE("profile update with smoothing") {
  const TransitionProfile p0 = TransitionProfile::uniform("bob", {"a", "b", "c"}, 0.5);
  const TransitionProfile p1 = update_profile(p0, PacketSequence{"bob", {0, 1, 0, 1}}, 0.5);
  CHECK(p1.counts(0, 1) == 2.0);
  CHECK(p1.counts(1, 0) == 1.0);
  CHECK(p1.probs(0, 1) == doctest::Approx(2.5 / 3.5));
  CHECK(p1.probs(2, 2) == doctest::Approx(1.0 / 3.0));
  CHECK_NOTHROW(p1.validate());
  const TransitionProfile p2 = update_profile(p0, PacketSequence{"bob", {0, 1}}, 0.0);
  CHECK(p2.probs(0, 1) == 1.0);
  CHECK(p2.probs(1, 0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("profile json round trip and validation") {
  const TransitionProfile p = update_profile(sticky(3, 0.6), PacketSequence{"alice", {0, 2, 1}}, 0.5);
  const TransitionProfile back = TransitionProfile::from_json(p.to_json());
  CHECK(back.states == p.states);
  CHECK(back.probs == p.probs);
  CHECK(back.counts == p.counts);
  const auto path = std::filesystem::temp_directory_path() / "nettomo_profile_test.json";
  p.save(path);
  CHECK(TransitionProfile::load(path).probs == p.probs);
  std::filesystem::remove(path);

  TransitionProfile bad = p;
  bad.probs(0, 0) += 0.1;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK_THROWS_AS(p.state_index("zzz"), DomainError);
}

TEST_CASE("method-of-moments dirichlet fit") {
  Rng rng(12);
  Vector alpha(3);
  alpha << 2.0, 4.0, 6.0;
  std::vector<CountVector> history;
  for (int s = 0; s < 4000; ++s) {
    const Vector q = sample_dirichlet(DirichletParams{alpha}, rng);
    const PacketSequence seq = simulate_iid_sequence(q, 31, rng);
    CountVector n = CountVector::Zero(3);
    for (std::size_t i = 1; i < seq.events.size(); ++i) n(seq.events[i]) += 1;
    history.push_back(n);
  }
  const DirichletParams fit = fit_dirichlet_moments(history);
  CHECK(fit.alpha.sum() == doctest::Approx(12.0).epsilon(0.1));
  CHECK(fit.alpha(2) / fit.alpha.sum() == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("sequence csv grouping and encoding") {
  std::istringstream in("t,sender,sd_label\n2,a,y\n1,a,x\n5,b,x\n3,a,x\n");
  const auto seqs = read_sequences_csv(in);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].sender_id == "a");
  CHECK(seqs[0].labels == std::vector<std::string>{"x", "y", "x"});
  const TransitionProfile p = TransitionProfile::uniform("a", {"x", "y"});
  CHECK(encode(seqs[0], p).events == std::vector<int>{0, 1, 0});
  std::istringstream bad("t,who,label\n");
  CHECK_THROWS(read_sequences_csv(bad));
}

TEST_CASE("sequences drawn from the profile score below zero on average") {
  const TransitionProfile p = sticky(4, 0.85);
  const DirichletParams d = DirichletParams::uniform(4);
  Rng rng(2);
  std::vector<double> on;
  std::vector<double> off;
  for (int r = 0; r < 200; ++r) {
    on.push_back(bayes_factor(simulate_profile_sequence(p, 0, 30, rng), p, d).woe);
    off.push_back(bayes_factor(simulate_iid_sequence(sample_dirichlet(d, rng), 30, rng), p, d).woe);
  }
  std::nth_element(on.begin(), on.begin() + 100, on.end());
  std::nth_element(off.begin(), off.begin() + 100, off.end());
  CHECK(on[100] < 0.0);
  CHECK(off[100] > 0.0);
}

TEST_CASE("dirichlet density closed forms and normalization") {
  Vector half(2);
  half << 0.5, 0.5;
  CHECK(dirichlet_logpdf(half, DirichletParams{Vector::Constant(2, 2.0)}) == doctest::Approx(std::log(1.5)));
  Vector p(4);
  p << 0.1, 0.2, 0.3, 0.4;
  CHECK(dirichlet_logpdf(p, DirichletParams::uniform(4)) == doctest::Approx(std::log(6.0)));

  // Mean of the density under uniform draws on the simplex, times the simplex area 1/2.
  Vector alpha(3);
  alpha << 2.0, 3.0, 4.0;
  Rng rng(13);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(dirichlet_logpdf(sample_dirichlet(DirichletParams::uniform(3), rng), DirichletParams{alpha}));
  CHECK(sum / n / 2.0 == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("two-state uniform marginal is flat in the split") {
  for (int total = 0; total <= 10; ++total) {
    for (int a = 0; a <= total; ++a) {
      CountVector n(2);
      n << a, total - a;
      const cpp_rational want = dm_exact(n, {1, 1});
      CHECK(want == cpp_rational(1, total + 1));
      CHECK(std::exp(dm_marginal_logpmf(n, DirichletParams::uniform(2))) == doctest::Approx(1.0 / (total + 1)).epsilon(1e-13));
    }
  }
  int count = 0;
  cpp_rational sum = 0;
  compositions(3, 6, [&](const CountVector& v) {
    ++count;
    sum += dm_exact(v, {1, 2, 3});
  });
  CHECK(count == 28);
  CHECK(sum == 1);
}

TEST_CASE("alternative log-likelihood closed forms") {
  const PacketSequence seq{"x", {1, 0, 0, 1}};
  CHECK(seq_loglik_h1(seq, DirichletParams::uniform(2)) == doctest::Approx(std::log(1.0 / 12.0)));
  for (int k = 2; k <= 6; ++k) {
    const PacketSequence one{"x", {0, k - 1}};
    CHECK(seq_loglik_h1(one, DirichletParams::uniform(k)) == doctest::Approx(-std::log(static_cast<double>(k))));
  }
}

TEST_CASE("property: alternative log-likelihood ignores the order of C1..CT") {
  Rng rng(47);
  for (int t = 0; t < 30; ++t) {
    const int k = 2 + static_cast<int>(rng.uniform_int(0, 3));
    Vector alpha(k);
    for (int i = 0; i < k; ++i) alpha(i) = 0.3 + 2.0 * rng.uniform();
    PacketSequence seq{"x", {}};
    const auto len = rng.uniform_int(3, 15);
    for (Count i = 0; i < len; ++i) seq.events.push_back(static_cast<int>(rng.uniform_int(0, k - 1)));
    const double base = seq_loglik_h1(seq, DirichletParams{alpha});
    PacketSequence shuffled = seq;
    for (std::size_t i = shuffled.events.size() - 1; i > 1; --i) {
      std::swap(shuffled.events[i], shuffled.events[1 + static_cast<std::size_t>(rng.uniform_int(0, static_cast<Count>(i) - 1))]);
    }
    CHECK(seq_loglik_h1(shuffled, DirichletParams{alpha}) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("null log-likelihood closed forms") {
  const TransitionProfile flat = TransitionProfile::uniform("u", {"a", "b", "c", "d"});
  PacketSequence seq{"u", {0, 1, 2, 3, 0, 0, 2, 1, 3, 3, 2}};
  CHECK(seq_loglik_h0(seq, flat) == doctest::Approx(-10.0 * std::log(4.0)));

  TransitionProfile cycle = flat;
  cycle.probs.setZero();
  for (int j = 0; j < 4; ++j) cycle.probs(j, (j + 1) % 4) = 1.0;
  const PacketSequence walk{"u", {2, 3, 0, 1, 2, 3}};
  CHECK(seq_loglik_h0(walk, cycle) == 0.0);
}

TEST_CASE("equal likelihoods give a neutral verdict") {
  const TransitionProfile flat = TransitionProfile::uniform("u", {"a", "b", "c"});
  const BayesFactor bf = bayes_factor(PacketSequence{"u", {0, 2}}, flat, DirichletParams::uniform(3));
  CHECK(bf.woe == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(bf.bf == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("property: dirichlet posterior updates are additive") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    Vector alpha(4);
    CountVector n1(4);
    CountVector n2(4);
    for (int i = 0; i < 4; ++i) {
      alpha(i) = 0.1 + rng.uniform();
      n1(i) = rng.uniform_int(0, 9);
      n2(i) = rng.uniform_int(0, 9);
    }
    const DirichletParams d{alpha};
    const Vector twice = dirichlet_posterior(dirichlet_posterior(d, n1), n2).alpha;
    const Vector once = dirichlet_posterior(d, n1 + n2).alpha;
    CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("property: a sequence scores lowest against its own unsmoothed fit") {
  Rng rng(61);
  const std::vector<std::string> states{"a", "b", "c"};
  const DirichletParams d = DirichletParams::uniform(3);
  for (int t = 0; t < 30; ++t) {
    const TransitionProfile source = sticky(3, 0.3 + 0.6 * rng.uniform());
    const PacketSequence seq = simulate_profile_sequence(source, 0, 25, rng);
    const PacketSequence other = simulate_profile_sequence(sticky(3, 0.5), 1, 25, rng);
    const TransitionProfile own = update_profile(TransitionProfile::uniform("s", states), seq, 0.0);
    const TransitionProfile rival = update_profile(TransitionProfile::uniform("s", states), other, 0.5);
    CHECK(bayes_factor(seq, own, d).woe <= bayes_factor(seq, rival, d).woe + 1e-12);
  }
}

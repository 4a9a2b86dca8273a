#include "nettomo/detect.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "nettomo/errors.hpp"

namespace nettomo {

namespace {

using Real = long double;
__extension__ using Wide = unsigned __int128;

constexpr Real kLog2Pi = 1.837877066409345483560659472811235279722794947275566825634L;

Real fraction_of(const MonitorConfig& m) {
  return static_cast<Real>(m.w) / static_cast<Real>(m.address_space);
}

Real complement_of(const MonitorConfig& m) {
  return static_cast<Real>(m.address_space - m.w) / static_cast<Real>(m.address_space);
}

// log(n!) - log(sqrt(2 pi n) (n/e)^n).
Real stirling_error(Real n) {
  static const std::array<Real, 16> small = [] {
    std::array<Real, 16> t{};
    for (int k = 1; k < 16; ++k) {
      const auto x = static_cast<Real>(k);
      t[static_cast<std::size_t>(k)] = std::lgamma(x + 1.0L) - (x + 0.5L) * std::log(x) + x - 0.5L * kLog2Pi;
    }
    return t;
  }();
  if (n < 16.0L) return small[static_cast<std::size_t>(n)];
  constexpr Real s0 = 1.0L / 12.0L;
  constexpr Real s1 = 1.0L / 360.0L;
  constexpr Real s2 = 1.0L / 1260.0L;
  constexpr Real s3 = 1.0L / 1680.0L;
  constexpr Real s4 = 1.0L / 1188.0L;
  const Real nn = n * n;
  if (n > 500.0L) return (s0 - s1 / nn) / n;
  if (n > 80.0L) return (s0 - (s1 - s2 / nn) / nn) / n;
  if (n > 35.0L) return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n;
  return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n;
}

// x log(x / mu) + mu - x without cancellation when x is close to mu.
Real deviance(Real x, Real mu) {
  if (std::fabs(x - mu) < 0.1L * (x + mu)) {
    Real v = (x - mu) / (x + mu);
    Real s = (x - mu) * v;
    Real ej = 2.0L * x * v;
    v *= v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const Real next = s + ej / static_cast<Real>(2 * j + 1);
      if (next == s) return next;
      s = next;
    }
    return s;
  }
  return x * std::log(x / mu) + mu - x;
}

Real binomial_log_mass(std::uint64_t d, std::uint64_t j, Real p, Real q) {
  if (d == 0) return 0.0L;
  const auto n = static_cast<Real>(d);
  if (j == 0) return q > 0.0L ? n * std::log1p(-p) : -std::numeric_limits<Real>::infinity();
  if (j == d) return p > 0.0L ? n * std::log(p) : -std::numeric_limits<Real>::infinity();
  if (p == 0.0L || q == 0.0L) return -std::numeric_limits<Real>::infinity();
  const auto x = static_cast<Real>(j);
  const Real lc = stirling_error(n) - stirling_error(x) - stirling_error(n - x) - deviance(x, n * p) -
                  deviance(n - x, n * q);
  const Real lf = kLog2Pi + std::log(x) + std::log1p(-x / n);
  return lc - 0.5L * lf;
}

}  // namespace

MonitorConfig MonitorConfig::with_address_bits(std::uint64_t w, int bits) {
  if (bits < 1 || bits > 63) throw DomainError("address bits must lie in [1, 63]");
  MonitorConfig m{w, std::uint64_t{1} << bits};
  m.validate();
  return m;
}

void MonitorConfig::validate() const {
  if (w < 1) throw DomainError("at least one address must be monitored");
  if (w > address_space) throw DomainError("monitored addresses exceed the address space");
}

double MonitorConfig::fraction() const { return static_cast<double>(fraction_of(*this)); }

double detection_probability(const MonitorConfig& m, std::uint64_t d) {
  m.validate();
  if (d == 0) return 0.0;
  if (m.w == m.address_space) return 1.0;
  return static_cast<double>(-std::expm1(static_cast<Real>(d) * std::log1p(-fraction_of(m))));
}

double expected_observed(const MonitorConfig& m, std::uint64_t d) {
  m.validate();
  return static_cast<double>(static_cast<Real>(m.w) * static_cast<Real>(d) / static_cast<Real>(m.address_space));
}

double observed_count_logpmf(const MonitorConfig& m, std::uint64_t d, std::uint64_t j) {
  m.validate();
  if (j > d) throw DomainError("observed count " + std::to_string(j) + " exceeds attack size " + std::to_string(d));
  return static_cast<double>(binomial_log_mass(d, j, fraction_of(m), complement_of(m)));
}

double observed_count_pmf(const MonitorConfig& m, std::uint64_t d, std::uint64_t j) {
  m.validate();
  if (j > d) throw DomainError("observed count " + std::to_string(j) + " exceeds attack size " + std::to_string(d));
  return static_cast<double>(std::exp(binomial_log_mass(d, j, fraction_of(m), complement_of(m))));
}

std::uint64_t attack_size_mle(const MonitorConfig& m, std::uint64_t j) {
  m.validate();
  const Wide num = static_cast<Wide>(j) * m.address_space;
  const Wide q = num / m.w;
  if (q > std::numeric_limits<std::uint64_t>::max()) throw DomainError("attack-size estimate exceeds 64 bits");
  return static_cast<std::uint64_t>(q);
}

nlohmann::json GapReport::to_json() const {
  return {{"gap_truncated_as_printed", gap_truncated_as_printed}, {"gap_geometric", gap_geometric}};
}

GapReport expected_gap(const MonitorConfig& m) {
  m.validate();
  GapReport g;
  g.gap_geometric = static_cast<double>(static_cast<Real>(m.address_space) / static_cast<Real>(m.w));
  if (m.w == m.address_space) {
    g.gap_truncated_as_printed = 1.0;
    return g;
  }
  const Real p = fraction_of(m);
  const Real q = complement_of(m);
  constexpr std::uint64_t kDirectLimit = 10'000'000;
  if (m.w <= kDirectLimit) {
    // Neumaier-compensated direct sum.
    Real sum = 0.0L;
    Real comp = 0.0L;
    Real power = 1.0L;
    for (std::uint64_t s = 1; s <= m.w; ++s) {
      const Real term = static_cast<Real>(s) * power * p;
      const Real t = sum + term;
      comp += std::fabs(sum) >= std::fabs(term) ? (sum - t) + term : (term - t) + sum;
      sum = t;
      power *= q;
    }
    g.gap_truncated_as_printed = static_cast<double>(sum + comp);
    return g;
  }
  // sum = (1 - q^w - w p q^w) / p with q^w = e^{-u}.
  const auto w = static_cast<Real>(m.w);
  const Real u = -w * std::log1p(-p);
  Real numerator;
  if (u > 1.0L) {
    numerator = -std::expm1(-u) - w * p * std::exp(-u);
  } else {
    // e^{-u} (e^u - 1 - u + (u - w p)), each bracket by its series.
    Real tail = 0.0L;  // sum_{k>=2} p^k / k
    Real pk = p;
    for (int k = 2; k < 400; ++k) {
      pk *= p;
      const Real next = tail + pk / static_cast<Real>(k);
      if (next == tail) break;
      tail = next;
    }
    Real g2 = 0.0L;  // sum_{k>=2} u^k / k!
    Real uk = u;
    for (int k = 2; k < 400; ++k) {
      uk *= u / static_cast<Real>(k);
      const Real next = g2 + uk;
      if (next == g2) break;
      g2 = next;
    }
    numerator = std::exp(-u) * (g2 + w * tail);
  }
  g.gap_truncated_as_printed = static_cast<double>(numerator / p);
  return g;
}

nlohmann::json detection_report(const MonitorConfig& m, std::uint64_t d, std::uint64_t j) {
  m.validate();
  nlohmann::json out;
  out["w"] = m.w;
  out["address_space"] = m.address_space;
  out["d"] = d;
  out["j"] = j;
  out["detection_probability"] = detection_probability(m, d);
  out["expected_observed"] = expected_observed(m, d);
  if (j <= d) {
    out["observed_count_pmf"] = observed_count_pmf(m, d, j);
  } else {
    out["observed_count_pmf"] = nullptr;
  }
  out["attack_size_mle"] = attack_size_mle(m, j);
  out["gap"] = expected_gap(m).to_json();
  return out;
}

}  // namespace nettomo

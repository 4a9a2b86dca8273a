#include "nettomo/bayesfactor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include "nettomo/errors.hpp"

namespace nettomo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index k, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != k) {
    throw DomainError(std::string("profile ") + what + " must be a " + std::to_string(k) + " x " + std::to_string(k) +
                      " array");
  }
  Matrix m(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != k) {
      throw DomainError(std::string("profile ") + what + " row " + std::to_string(i) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < k; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

nlohmann::json finite_or_label(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "+inf" : "-inf";
}

}  // namespace

TransitionProfile TransitionProfile::uniform(std::string sender_id, std::vector<std::string> states,
                                             double smoothing) {
  TransitionProfile p;
  p.sender_id = std::move(sender_id);
  p.states = std::move(states);
  const Eigen::Index k = p.size();
  if (k < 1) throw DomainError("profile needs at least one state");
  p.probs = Matrix::Constant(k, k, 1.0 / static_cast<double>(k));
  p.counts = Matrix::Zero(k, k);
  p.smoothing = smoothing;
  p.validate();
  return p;
}

int TransitionProfile::state_index(const std::string& label) const {
  const auto it = std::find(states.begin(), states.end(), label);
  if (it == states.end()) throw DomainError("state '" + label + "' is not in the profile of sender '" + sender_id + "'");
  return static_cast<int>(it - states.begin());
}

void TransitionProfile::validate() const {
  const Eigen::Index k = size();
  if (k < 1) throw DomainError("profile needs at least one state");
  if (std::set<std::string>(states.begin(), states.end()).size() != states.size()) {
    throw DomainError("profile state labels must be unique");
  }
  if (probs.rows() != k || probs.cols() != k) throw DimensionMismatch("profile matrix must be K x K");
  if (counts.rows() != k || counts.cols() != k) throw DimensionMismatch("profile counts must be K x K");
  if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw DomainError("smoothing must be nonnegative");
  for (Eigen::Index i = 0; i < k; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!(probs(i, j) >= 0.0)) throw DomainError("profile probabilities must be nonnegative");
      if (!(counts(i, j) >= 0.0)) throw DomainError("profile counts must be nonnegative");
      s += probs(i, j);
    }
    if (std::abs(s - 1.0) > 1e-10) throw DomainError("profile row " + std::to_string(i) + " does not sum to 1");
  }
}

nlohmann::json TransitionProfile::to_json() const {
  return {{"schema", 1},          {"sender", sender_id},         {"states", states},
          {"matrix", matrix_json(probs)}, {"counts", matrix_json(counts)}, {"smoothing", smoothing}};
}

TransitionProfile TransitionProfile::from_json(const nlohmann::json& j) {
  TransitionProfile p;
  try {
    p.sender_id = j.at("sender").get<std::string>();
    p.states = j.at("states").get<std::vector<std::string>>();
    const auto k = static_cast<Eigen::Index>(p.states.size());
    p.probs = matrix_from_json(j.at("matrix"), k, "matrix");
    p.counts = j.contains("counts") ? matrix_from_json(j.at("counts"), k, "counts") : Matrix::Zero(k, k);
    p.smoothing = j.value("smoothing", 0.5);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed profile: ") + e.what());
  }
  p.validate();
  return p;
}

TransitionProfile TransitionProfile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open profile " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("profile " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void TransitionProfile::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write profile " + path.string());
  out << to_json().dump(2) << '\n';
}

DirichletParams DirichletParams::uniform(Eigen::Index k) {
  if (k < 1) throw DomainError("Dirichlet needs at least one category");
  return DirichletParams{Vector::Ones(k)};
}

void DirichletParams::validate() const {
  if (alpha.size() < 1) throw DomainError("Dirichlet needs at least one category");
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    if (!(alpha(k) > 0.0) || !std::isfinite(alpha(k))) throw DomainError("Dirichlet parameters must be positive");
  }
}

void PacketSequence::validate(Eigen::Index k) const {
  if (events.size() < 2) throw DomainError("a packet sequence needs at least two events");
  for (const int e : events) {
    if (e < 0 || e >= k) throw DomainError("sequence state index " + std::to_string(e) + " is out of range");
  }
}

double dirichlet_logpdf(const Vector& p, const DirichletParams& d) {
  d.validate();
  if (p.size() != d.alpha.size()) throw DimensionMismatch("probability vector and Dirichlet differ in length");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (!(p(k) > 0.0)) throw DomainError("point must lie in the open simplex");
    sum += p(k);
  }
  if (std::abs(sum - 1.0) > 1e-10) throw DomainError("point must sum to 1");
  double out = std::lgamma(d.alpha.sum());
  for (Eigen::Index k = 0; k < p.size(); ++k) out += (d.alpha(k) - 1.0) * std::log(p(k)) - std::lgamma(d.alpha(k));
  return out;
}

double dm_marginal_logpmf(const CountVector& n, const DirichletParams& d) {
  d.validate();
  if (n.size() != d.alpha.size()) throw DimensionMismatch("count vector and Dirichlet differ in length");
  const double a = d.alpha.sum();
  Count total = 0;
  double out = 0.0;
  for (Eigen::Index k = 0; k < n.size(); ++k) {
    if (n(k) < 0) throw DomainError("counts must be nonnegative");
    total += n(k);
    const auto nk = static_cast<double>(n(k));
    out += std::lgamma(d.alpha(k) + nk) - std::lgamma(d.alpha(k)) - std::lgamma(nk + 1.0);
  }
  const auto nt = static_cast<double>(total);
  return out + std::lgamma(nt + 1.0) - (std::lgamma(a + nt) - std::lgamma(a));
}

DirichletParams dirichlet_posterior(const DirichletParams& d, const CountVector& n) {
  d.validate();
  if (n.size() != d.alpha.size()) throw DimensionMismatch("count vector and Dirichlet differ in length");
  DirichletParams out = d;
  for (Eigen::Index k = 0; k < n.size(); ++k) {
    if (n(k) < 0) throw DomainError("counts must be nonnegative");
    out.alpha(k) += static_cast<double>(n(k));
  }
  return out;
}

double seq_loglik_h0(const PacketSequence& seq, const TransitionProfile& prof) {
  seq.validate(prof.size());
  double out = 0.0;
  for (std::size_t t = 1; t < seq.events.size(); ++t) {
    const double pr = prof.probs(seq.events[t - 1], seq.events[t]);
    if (!(pr > 0.0)) return -kInf;
    out += std::log(pr);
  }
  return out;
}

double seq_loglik_h1(const PacketSequence& seq, const DirichletParams& d) {
  d.validate();
  seq.validate(d.alpha.size());
  Vector m = Vector::Zero(d.alpha.size());
  for (std::size_t t = 1; t < seq.events.size(); ++t) m(seq.events[t]) += 1.0;
  const double a = d.alpha.sum();
  double out = std::lgamma(a) - std::lgamma(a + static_cast<double>(seq.transitions()));
  for (Eigen::Index k = 0; k < m.size(); ++k) out += std::lgamma(d.alpha(k) + m(k)) - std::lgamma(d.alpha(k));
  return out;
}

BayesFactor bayes_factor(const PacketSequence& seq, const TransitionProfile& prof, const DirichletParams& d) {
  if (d.alpha.size() != prof.size()) throw DimensionMismatch("Dirichlet and profile differ in state count");
  const double h1 = seq_loglik_h1(seq, d);
  const double h0 = seq_loglik_h0(seq, prof);
  BayesFactor out;
  out.woe = std::isinf(h0) ? kInf : h1 - h0;
  out.bf = std::exp(out.woe);
  return out;
}

TransitionProfile update_profile(const TransitionProfile& prof, const PacketSequence& seq, double smoothing) {
  if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw DomainError("smoothing must be nonnegative");
  const Eigen::Index k = prof.size();
  seq.validate(k);
  TransitionProfile out = prof;
  out.smoothing = smoothing;
  for (std::size_t t = 1; t < seq.events.size(); ++t) out.counts(seq.events[t - 1], seq.events[t]) += 1.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double denom = out.counts.row(i).sum() + static_cast<double>(k) * smoothing;
    if (denom > 0.0) {
      out.probs.row(i) = (out.counts.row(i).array() + smoothing) / denom;
    } else {
      out.probs.row(i).setConstant(1.0 / static_cast<double>(k));
    }
  }
  return out;
}

DirichletParams fit_dirichlet_moments(const std::vector<CountVector>& history) {
  if (history.empty()) throw DomainError("need at least one count vector");
  const Eigen::Index k = history.front().size();
  if (k < 2) throw DomainError("need at least two categories");
  Vector totals_by_state = Vector::Zero(k);
  double grand = 0.0;
  double sum_sq_totals = 0.0;
  for (const auto& n : history) {
    if (n.size() != k) throw DimensionMismatch("count vectors differ in length");
    for (Eigen::Index c = 0; c < k; ++c) {
      if (n(c) < 0) throw DomainError("counts must be nonnegative");
    }
    const auto t = static_cast<double>(n.sum());
    totals_by_state += n.cast<double>();
    grand += t;
    sum_sq_totals += t * t;
  }
  if (!(grand > 0.0)) throw DomainError("history holds no events");
  constexpr double kMinShare = 1e-6;
  Vector p = (totals_by_state / grand).cwiseMax(kMinShare);
  p /= p.sum();

  double scatter = 0.0;
  for (const auto& n : history) {
    const auto t = static_cast<double>(n.sum());
    scatter += (n.cast<double>() - t * p).squaredNorm();
  }
  const double spread = (p.array() * (1.0 - p.array())).sum();
  // E[scatter] = spread * sum_i n_i (n_i + a) / (1 + a) under Dirichlet-multinomial sampling.
  constexpr double kMaxConcentration = 1e6;
  constexpr double kMinConcentration = 1e-3;
  double a = kMaxConcentration;
  const double under = scatter - spread * grand;
  if (under > 0.0) a = std::clamp((spread * sum_sq_totals - scatter) / under, kMinConcentration, kMaxConcentration);
  return DirichletParams{a * p};
}

Vector sample_dirichlet(const DirichletParams& d, Rng& rng) {
  d.validate();
  Vector g(d.alpha.size());
  for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = rng.gamma(d.alpha(k), 1.0);
  const double s = g.sum();
  if (!(s > 0.0)) {
    g.setZero();
    g(static_cast<Eigen::Index>(rng.uniform_int(0, g.size() - 1))) = 1.0;
    return g;
  }
  return g / s;
}

namespace {

int draw_category(const Vector& q, Rng& rng) {
  const double u = rng.uniform() * q.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    acc += q(k);
    if (u < acc) return static_cast<int>(k);
  }
  for (Eigen::Index k = q.size(); k-- > 0;) {
    if (q(k) > 0.0) return static_cast<int>(k);
  }
  throw DomainError("category weights are all zero");
}

}  // namespace

PacketSequence simulate_profile_sequence(const TransitionProfile& prof, int start, Eigen::Index length, Rng& rng) {
  if (length < 2) throw DomainError("a packet sequence needs at least two events");
  if (start < 0 || start >= prof.size()) throw DomainError("start state is out of range");
  PacketSequence s;
  s.sender_id = prof.sender_id;
  s.events.push_back(start);
  while (static_cast<Eigen::Index>(s.events.size()) < length) {
    s.events.push_back(draw_category(prof.probs.row(s.events.back()).transpose(), rng));
  }
  return s;
}

PacketSequence simulate_iid_sequence(const Vector& q, Eigen::Index length, Rng& rng) {
  if (length < 2) throw DomainError("a packet sequence needs at least two events");
  PacketSequence s;
  for (Eigen::Index t = 0; t < length; ++t) s.events.push_back(draw_category(q, rng));
  return s;
}

std::vector<LabeledSequence> read_sequences_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("sequence CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,sender,sd_label") throw DomainError("sequence CSV has unexpected header '" + line + "'");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<long long, std::string>>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string t;
    std::string sender;
    std::string label;
    if (!std::getline(fields, t, ',') || !std::getline(fields, sender, ',') || !std::getline(fields, label)) {
      throw DomainError("sequence CSV line " + std::to_string(lineno) + " has too few fields");
    }
    long long tv;
    try {
      std::size_t used = 0;
      tv = std::stoll(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw DomainError("sequence CSV line " + std::to_string(lineno) + " has a non-integer time");
    }
    if (!rows.contains(sender)) order.push_back(sender);
    rows[sender].emplace_back(tv, label);
  }
  std::vector<LabeledSequence> out;
  for (const auto& sender : order) {
    auto& r = rows[sender];
    std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    LabeledSequence s;
    s.sender_id = sender;
    for (const auto& [t, label] : r) s.labels.push_back(label);
    out.push_back(std::move(s));
  }
  return out;
}

PacketSequence encode(const LabeledSequence& seq, const TransitionProfile& prof) {
  PacketSequence s;
  s.sender_id = seq.sender_id;
  for (const auto& label : seq.labels) s.events.push_back(prof.state_index(label));
  return s;
}

nlohmann::json ScoreRecord::to_json() const {
  return {{"sender", sender},
          {"T", transitions},
          {"woe", finite_or_label(result.woe)},
          {"bf", finite_or_label(result.bf)},
          {"verdict", anomaly ? "anomaly" : "normal"}};
}

ScoreRecord score_sequence(const PacketSequence& seq, const TransitionProfile& prof, const DirichletParams& d,
                           double woe_threshold) {
  ScoreRecord r;
  r.sender = seq.sender_id;
  r.transitions = seq.transitions();
  r.result = bayes_factor(seq, prof, d);
  r.anomaly = r.result.woe > woe_threshold;
  return r;
}

}  // namespace nettomo

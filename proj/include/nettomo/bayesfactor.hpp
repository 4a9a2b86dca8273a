#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nettomo/rng.hpp"
#include "nettomo/types.hpp"

namespace nettomo {

/// Per-sender Markov profile over K categorical SD labels: probs(j, k) is
/// the chance that a packet to state k follows one to state j. Raw
/// transition counts are kept next to the probabilities so the profile can
/// be refit as history grows.
struct TransitionProfile {
  std::string sender_id;
  std::vector<std::string> states;
  Matrix probs;
  Matrix counts;
  double smoothing = 0.5;

  // Uniform rows, zero counts.
  static TransitionProfile uniform(std::string sender_id, std::vector<std::string> states, double smoothing = 0.5);

  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(states.size()); }
  // Index of a state label; throws DomainError for unknown labels.
  int state_index(const std::string& label) const;
  // Rows sum to 1 within 1e-10, entries nonnegative, labels unique.
  void validate() const;

  nlohmann::json to_json() const;
  static TransitionProfile from_json(const nlohmann::json& j);
  static TransitionProfile load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct DirichletParams {
  Vector alpha;

  static DirichletParams uniform(Eigen::Index k);
  void validate() const;  // every alpha_k > 0
};

struct PacketSequence {
  std::string sender_id;
  std::vector<int> events;  // C_0, ..., C_T as state indices

  Eigen::Index transitions() const noexcept { return static_cast<Eigen::Index>(events.size()) - 1; }
  // At least two events, all in [0, k).
  void validate(Eigen::Index k) const;
};

// Standard normalized Dirichlet log density on the open simplex.
double dirichlet_logpdf(const Vector& p, const DirichletParams& d);

/// Dirichlet-multinomial mass of the count vector n:
/// log n! - log (a)_n + sum_k [log (alpha_k)_{n_k} - log n_k!], with a the
/// sum of alpha and (x)_m the rising factorial.
double dm_marginal_logpmf(const CountVector& n, const DirichletParams& d);

// alpha + n.
DirichletParams dirichlet_posterior(const DirichletParams& d, const CountVector& n);

// Sum over t >= 1 of log probs(C_{t-1}, C_t); -inf on a zero-probability step.
double seq_loglik_h0(const PacketSequence& seq, const TransitionProfile& prof);

// Log marginal of the ordered states C_1..C_T drawn i.i.d. from Q ~ Dirichlet(alpha).
double seq_loglik_h1(const PacketSequence& seq, const DirichletParams& d);

struct BayesFactor {
  double bf = 1.0;
  double woe = 0.0;  // log bf; +inf when the profile rules the sequence out
};

BayesFactor bayes_factor(const PacketSequence& seq, const TransitionProfile& prof, const DirichletParams& d);

/// Adds the transitions of `seq` to the profile counts and refits
/// probs(j, k) = (counts(j, k) + s) / (row total + K s). A row with no mass
/// (unvisited and s = 0) is set uniform.
TransitionProfile update_profile(const TransitionProfile& prof, const PacketSequence& seq, double smoothing);

/// Method-of-moments Dirichlet fit from per-sender state-count vectors:
/// the mean proportions give the direction and the overdispersion of the
/// counts relative to a multinomial gives the total concentration.
DirichletParams fit_dirichlet_moments(const std::vector<CountVector>& history);

// Markov path of `length` events from the profile, starting at `start`.
PacketSequence simulate_profile_sequence(const TransitionProfile& prof, int start, Eigen::Index length, Rng& rng);
// `length` events drawn i.i.d. from q.
PacketSequence simulate_iid_sequence(const Vector& q, Eigen::Index length, Rng& rng);
// Dirichlet(alpha) draw by normalized gammas.
Vector sample_dirichlet(const DirichletParams& d, Rng& rng);

struct LabeledSequence {
  std::string sender_id;
  std::vector<std::string> labels;
};

// CSV `t,sender,sd_label`; rows are ordered by t within each sender.
// Senders come back in order of first appearance.
std::vector<LabeledSequence> read_sequences_csv(std::istream& in);
PacketSequence encode(const LabeledSequence& seq, const TransitionProfile& prof);

struct ScoreRecord {
  std::string sender;
  Eigen::Index transitions = 0;
  BayesFactor result;
  bool anomaly = false;

  // Non-finite woe and bf are written as the strings "+inf" and "-inf".
  nlohmann::json to_json() const;
};

ScoreRecord score_sequence(const PacketSequence& seq, const TransitionProfile& prof, const DirichletParams& d,
                           double woe_threshold = 0.0);

}  // namespace nettomo

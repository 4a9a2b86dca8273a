#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nettomo {

// Root of the toolkit's exception hierarchy. Every failure raised by the
// library derives from this so callers (the CLI in particular) can map
// categories onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed network description: unknown nodes or links, broken paths,
// non-binary routing entries, disconnected graphs.
class InvalidTopology : public Error {
 public:
  using Error::Error;
};

// Routing matrix without full row rank. Carries the rows that can be dropped
// to restore linear independence.
class RankDeficient : public Error {
 public:
  RankDeficient(const std::string& what, std::vector<std::size_t> redundant_rows)
      : Error(what), redundant_rows_(std::move(redundant_rows)) {}

  const std::vector<std::size_t>& redundant_rows() const noexcept { return redundant_rows_; }

 private:
  std::vector<std::size_t> redundant_rows_;
};

// Feasible-set search ran past its node budget.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(const std::string& what, std::uint64_t nodes_visited, std::size_t solutions_found)
      : Error(what), nodes_visited_(nodes_visited), solutions_found_(solutions_found) {}

  std::uint64_t nodes_visited() const noexcept { return nodes_visited_; }
  std::size_t solutions_found() const noexcept { return solutions_found_; }

 private:
  std::uint64_t nodes_visited_;
  std::size_t solutions_found_;
};

// Link counts that no nonnegative integer route vector can produce.
class InconsistentObservation : public Error {
 public:
  using Error::Error;
};

// A Gibbs state whose conditional support is empty.
class InfeasibleState : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Singular systems and similar floating-point breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Vector or matrix shapes that do not line up.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace nettomo

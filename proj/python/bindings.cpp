#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>

#include "nettomo/bayesfactor.hpp"
#include "nettomo/detect.hpp"
#include "nettomo/errors.hpp"
#include "nettomo/estimators.hpp"
#include "nettomo/gibbs.hpp"
#include "nettomo/simulator.hpp"
#include "nettomo/topology.hpp"

namespace py = pybind11;
using namespace nettomo;

namespace {

// JSON crosses the boundary as text; the Python wrapper parses it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

RoutingMatrix routing(const Eigen::MatrixXi& a) { return RoutingMatrix(a); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the nettomo package";

  auto base = py::register_exception<Error>(m, "NettomoError", PyExc_ValueError);
  py::register_exception<InvalidTopology>(m, "InvalidTopology", base.ptr());
  py::register_exception<RankDeficient>(m, "RankDeficient", base.ptr());
  py::register_exception<BudgetExceeded>(m, "BudgetExceeded", base.ptr());
  py::register_exception<InconsistentObservation>(m, "InconsistentObservation", base.ptr());
  py::register_exception<InfeasibleState>(m, "InfeasibleState", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());

  // topology
  m.def("four_node_routing", [] { return build_routing_matrix(four_node_network()).entries(); });
  m.def("routing_from_json", [](const std::string& text) {
    return build_routing_matrix(Network::from_json(nlohmann::json::parse(text))).entries();
  });
  m.def("load_routing", [](const std::string& path) { return build_routing_matrix(Network::load(path)).entries(); });
  m.def("sd_pair_count", &sd_pair_count);
  m.def("check_identifiability", [](const Eigen::MatrixXi& a) { return check_identifiability(routing(a)); });
  m.def("check_capacity_bound", [](const Eigen::MatrixXi& a) { return check_capacity_bound(routing(a)); });
  m.def("partition_columns", [](const Eigen::MatrixXi& a) {
    const Partition p = partition(routing(a));
    return py::make_tuple(p.pivot_cols(), p.free_cols());
  });
  m.def("solve_x1", [](const Eigen::MatrixXi& a, const CountVector& y, const CountVector& x2) {
    return solve_x1(partition(routing(a)), y, x2);
  });

  // simulation
  m.def(
      "simulate_routes",
      [](const Vector& lambda, Eigen::Index periods, std::uint64_t seed) {
        return sample_sd_traffic(RateVector(lambda), periods, seed).x;
      },
      py::arg("rates"), py::arg("periods"), py::arg("seed"));
  m.def("link_counts", [](const Eigen::MatrixXi& a, const CountMatrix& x) { return link_counts(routing(a), x); });
  m.def("enumerate_feasible", [](const Eigen::MatrixXi& a, const CountVector& y, std::int64_t cap) {
    return enumerate_feasible(partition(routing(a)), y, cap);
  }, py::arg("a"), py::arg("y"), py::arg("cap") = 64);

  // estimators
  m.def(
      "estep_exact",
      [](const Eigen::MatrixXi& a, const CountVector& y, const Vector& lambda, std::int64_t cap) {
        const ExactEStep e = estep_exact_full(partition(routing(a)), y, RateVector(lambda), cap);
        return py::make_tuple(e.mean, e.log_likelihood);
      },
      py::arg("a"), py::arg("y"), py::arg("rates"), py::arg("cap") = 64);
  m.def("estep_normal", [](const Eigen::MatrixXi& a, const Vector& y, const Vector& lambda) {
    return estep_normal(routing(a), y, RateVector(lambda));
  });
  m.def(
      "em_fit",
      [](const Eigen::MatrixXi& a, const CountMatrix& y, bool exact, int max_iters, double tol, double floor,
         std::int64_t cap, bool track_loglik) {
        const RoutingMatrix r = routing(a);
        EmConfig cfg;
        cfg.estep_mode = exact ? EStepMode::exact : EStepMode::normal;
        cfg.max_iters = max_iters;
        cfg.tol = tol;
        cfg.floor = floor;
        cfg.cap = cap;
        cfg.track_loglik = track_loglik;
        const EstimateReport rep = em_fit(r, y, default_init(r, y, floor), cfg);
        return py::make_tuple(rep.lambda_hat, dump(rep.to_json()), rep.trajectory, rep.objective_trajectory);
      },
      py::arg("a"), py::arg("y"), py::arg("exact") = true, py::arg("max_iters") = 500, py::arg("tol") = 1e-6,
      py::arg("floor") = 1e-6, py::arg("cap") = 64, py::arg("track_loglik") = false);
  m.def(
      "moment_fit",
      [](const Eigen::MatrixXi& a, const CountMatrix& y, double floor, double weight) {
        return moment_fit(routing(a), y, floor, weight).lambda_hat;
      },
      py::arg("a"), py::arg("y"), py::arg("floor") = 1e-6, py::arg("second_moment_weight") = 1.0);
  m.def(
      "gaussian_fit",
      [](const Eigen::MatrixXi& a, const CountMatrix& y, int max_iters, double tol) {
        const RoutingMatrix r = routing(a);
        GaussianConfig cfg;
        cfg.max_iters = max_iters;
        cfg.tol = tol;
        const EstimateReport rep = gaussian_fit(r, y, default_init(r, y), cfg);
        return py::make_tuple(rep.lambda_hat, *rep.objective);
      },
      py::arg("a"), py::arg("y"), py::arg("max_iters") = 500, py::arg("tol") = 1e-6);
  m.def("observed_loglik", [](const Eigen::MatrixXi& a, const CountMatrix& y, const Vector& lambda, std::int64_t cap) {
    return observed_loglik(partition(routing(a)), y, RateVector(lambda), cap);
  }, py::arg("a"), py::arg("y"), py::arg("rates"), py::arg("cap") = 64);

  // gibbs
  m.def(
      "run_chain",
      [](const Eigen::MatrixXi& a, const CountMatrix& y, int samples, int burn_in, int thin, std::uint64_t seed,
         double shape, double rate, int chains, bool mh, bool random_scan) {
        ChainConfig cfg;
        cfg.n_samples = samples;
        cfg.burn_in = burn_in;
        cfg.thin = thin;
        cfg.seed = seed;
        cfg.prior = GammaPrior(shape, rate);
        cfg.chains = chains;
        cfg.mh_fallback = mh;
        cfg.scan = random_scan ? ScanOrder::random : ScanOrder::ascending;
        ChainResult res;
        {
          py::gil_scoped_release release;
          res = run_chain(routing(a), y, cfg);
        }
        return py::make_tuple(res.lambda_draws, res.x_draws, dump(res.summary.to_json()));
      },
      py::arg("a"), py::arg("y"), py::arg("samples") = 1000, py::arg("burn_in") = 500, py::arg("thin") = 1,
      py::arg("seed") = 0, py::arg("prior_shape") = 1.0, py::arg("prior_rate") = 0.01, py::arg("chains") = 1,
      py::arg("mh_fallback") = false, py::arg("random_scan") = false);

  // detection
  auto monitor = [](std::uint64_t w, int bits) { return MonitorConfig::with_address_bits(w, bits); };
  m.def("detection_probability", [monitor](std::uint64_t w, std::uint64_t d, int bits) {
    return detection_probability(monitor(w, bits), d);
  }, py::arg("w"), py::arg("d"), py::arg("address_bits") = 32);
  m.def("observed_count_pmf", [monitor](std::uint64_t w, std::uint64_t d, std::uint64_t j, int bits) {
    return observed_count_pmf(monitor(w, bits), d, j);
  }, py::arg("w"), py::arg("d"), py::arg("j"), py::arg("address_bits") = 32);
  m.def("attack_size_mle", [monitor](std::uint64_t w, std::uint64_t j, int bits) {
    return attack_size_mle(monitor(w, bits), j);
  }, py::arg("w"), py::arg("j"), py::arg("address_bits") = 32);
  m.def("detection_report", [monitor](std::uint64_t w, std::uint64_t d, std::uint64_t j, int bits) {
    return dump(detection_report(monitor(w, bits), d, j));
  }, py::arg("w"), py::arg("d"), py::arg("j"), py::arg("address_bits") = 32);

  // anomaly scoring
  m.def("dm_marginal_logpmf", [](const CountVector& n, const Vector& alpha) {
    return dm_marginal_logpmf(n, DirichletParams{alpha});
  });
  m.def("score_sequence", [](const std::string& profile_json, const std::vector<std::string>& labels,
                             const Vector& alpha, double threshold) {
    const TransitionProfile prof = TransitionProfile::from_json(nlohmann::json::parse(profile_json));
    const PacketSequence seq = encode(LabeledSequence{prof.sender_id, labels}, prof);
    return dump(score_sequence(seq, prof, DirichletParams{alpha}, threshold).to_json());
  }, py::arg("profile_json"), py::arg("labels"), py::arg("alpha"), py::arg("threshold") = 0.0);
  m.def("build_profile", [](const std::string& sender, const std::vector<std::string>& states,
                            const std::vector<std::string>& labels, double smoothing) {
    TransitionProfile prof = TransitionProfile::uniform(sender, states, smoothing);
    prof = update_profile(prof, encode(LabeledSequence{sender, labels}, prof), smoothing);
    return dump(prof.to_json());
  }, py::arg("sender"), py::arg("states"), py::arg("labels"), py::arg("smoothing") = 0.5);
}

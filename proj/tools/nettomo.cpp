// nettomo: command-line front end for network tomography experiments.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nettomo/bayesfactor.hpp"
#include "nettomo/detect.hpp"
#include "nettomo/errors.hpp"
#include "nettomo/estimators.hpp"
#include "nettomo/gibbs.hpp"
#include "nettomo/rng.hpp"
#include "nettomo/simulator.hpp"
#include "nettomo/topology.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nettomo;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kInput = 2, kAnomaly = 3, kNumeric = 4 };

// Input problems that are not library errors: missing files, bad flag values.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Nested JSON objects map onto subcommands: {"estimate": {"method": "gibbs"}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      input >> doc;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        std::vector<std::string> next = parents;
        next.push_back(key);
        flatten(value, next, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
};

std::string config_hash(const json& config) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json envelope(const std::string& command, const json& config, std::optional<std::uint64_t> seed) {
  json out;
  out["schema"] = 1;
  out["command"] = command;
  out["config"] = config;
  out["config_hash"] = config_hash(config);
  out["seed"] = seed ? json(*seed) : json(nullptr);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector parse_rates(const std::string& text, Eigen::Index c) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("rate list entry '" + item + "' is not a number");
    }
  }
  if (values.size() == 1) return Vector::Constant(c, values[0]);
  if (static_cast<Eigen::Index>(values.size()) != c) {
    throw InputError("rate list has " + std::to_string(values.size()) + " entries, expected 1 or " + std::to_string(c));
  }
  return Eigen::Map<const Vector>(values.data(), c);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json routing_json(const RoutingMatrix& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    std::vector<int> row(static_cast<std::size_t>(a.cols()));
    for (Eigen::Index j = 0; j < a.cols(); ++j) row[static_cast<std::size_t>(j)] = a(i, j);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string topology;
  std::string lambda;
  long periods = 100;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_simulate(const SimulateArgs& args) {
  const Network net = Network::load(args.topology);
  const RoutingMatrix a = build_routing_matrix(net);
  const RateVector lambda(parse_rates(args.lambda, a.cols()));
  if (args.periods < 1) throw InputError("--periods must be at least 1");

  TrafficSample s = sample_sd_traffic(lambda, args.periods, args.seed);
  s.y = link_counts(a, s.x);
  std::ostringstream csv;
  write_sample_csv(csv, s);
  write_text(args.out, csv.str());

  const json config = {{"topology", args.topology},
                       {"lambda", to_std(lambda.values())},
                       {"periods", args.periods},
                       {"out", args.out}};
  json report = envelope("simulate", config, args.seed);
  report["links"] = a.rows();
  report["routes"] = a.cols();
  report["routing_matrix"] = routing_json(a);
  report["identifiable"] = check_identifiability(a);
  report["capacity_bound_exceeded"] = check_capacity_bound(a);
  report["routes_all_pairs"] = net.routes_all_pairs();
  report["sample_file"] = fs::path(args.out).filename().string();
  const std::string text = report.dump(2) + "\n";
  write_text(args.out + ".json", text);
  std::cout << text;
  return kOk;
}

// ---------------------------------------------------------------- check

struct CheckArgs {
  std::string topology;
};

int cmd_check(const CheckArgs& args) {
  const Network net = Network::load(args.topology);
  const RoutingMatrix a = build_routing_matrix(net);
  json report = envelope("check", {{"topology", args.topology}}, std::nullopt);
  report["nodes"] = net.node_count();
  report["links"] = a.rows();
  report["routes"] = a.cols();
  report["sd_pair_count"] = sd_pair_count(static_cast<std::int64_t>(net.node_count()));
  report["routes_all_pairs"] = net.routes_all_pairs();
  report["identifiable"] = check_identifiability(a);
  report["capacity_bound_exceeded"] = check_capacity_bound(a);
  report["routing_matrix"] = routing_json(a);
  json labels = json::array();
  for (std::size_t j = 0; j < net.pair_count(); ++j) labels.push_back(net.path_label(j));
  report["route_labels"] = labels;
  try {
    const Partition p = partition(a);
    report["full_row_rank"] = true;
    report["pivot_cols"] = p.pivot_cols();
    report["free_cols"] = p.free_cols();
  } catch (const RankDeficient& e) {
    report["full_row_rank"] = false;
    report["redundant_rows"] = e.redundant_rows();
  }
  std::cout << report.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string topology;
  std::string data;
  std::string method = "em-exact";
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string lambda_true;
  int max_iters = 500;
  double tol = 1e-6;
  double floor = 1e-6;
  std::int64_t cap = 64;
  bool track_loglik = false;
  int multistart = 1;
  double second_moment_weight = 1.0;
  int samples = 1000;
  int burn_in = 500;
  int thin = 1;
  double prior_shape = 1.0;
  double prior_rate = 0.01;
  int chains = 1;
  bool mh_fallback = false;
  int mh_width = 3;
  std::string scan = "ascending";
};

json estimate_config(const EstimateArgs& a) {
  json c = {{"topology", a.topology}, {"data", a.data}, {"method", a.method}, {"out_dir", a.out_dir}};
  if (!a.lambda_true.empty()) c["lambda_true"] = a.lambda_true;
  if (a.method == "gibbs") {
    c["samples"] = a.samples;
    c["burn_in"] = a.burn_in;
    c["thin"] = a.thin;
    c["prior_shape"] = a.prior_shape;
    c["prior_rate"] = a.prior_rate;
    c["chains"] = a.chains;
    c["mh_fallback"] = a.mh_fallback;
    c["mh_width"] = a.mh_width;
    c["scan"] = a.scan;
  } else if (a.method == "moments") {
    c["floor"] = a.floor;
    c["second_moment_weight"] = a.second_moment_weight;
  } else {
    c["max_iters"] = a.max_iters;
    c["tol"] = a.tol;
    c["floor"] = a.floor;
    c["multistart"] = a.multistart;
    if (a.method == "em-exact") {
      c["cap"] = a.cap;
      c["track_loglik"] = a.track_loglik;
    }
  }
  return c;
}

std::string trajectory_csv(const EstimateReport& r) {
  std::string out = "iteration,delta,objective\n";
  const std::size_t n = std::max(r.trajectory.size(), r.objective_trajectory.size());
  for (std::size_t i = 0; i < n; ++i) {
    out += std::to_string(i + 1) + ",";
    if (i < r.trajectory.size()) out += fmt(r.trajectory[i]);
    out += ",";
    if (i < r.objective_trajectory.size()) out += fmt(r.objective_trajectory[i]);
    out += "\n";
  }
  return out;
}

std::string lambda_csv(const Network& net, const Vector& hat, const std::optional<Vector>& truth) {
  std::string out = truth ? "index,route,lambda_hat,lambda_true,relative_error\n" : "index,route,lambda_hat\n";
  for (Eigen::Index j = 0; j < hat.size(); ++j) {
    out += std::to_string(j) + "," + net.path_label(static_cast<std::size_t>(j)) + "," + fmt(hat(j));
    if (truth) out += "," + fmt((*truth)(j)) + "," + fmt(std::abs(hat(j) - (*truth)(j)) / (*truth)(j));
    out += "\n";
  }
  return out;
}

CountMatrix link_observations(const TrafficSample& s, const RoutingMatrix& a) {
  if (s.y.rows() > 0) {
    if (s.y.cols() != a.rows()) throw InputError("sample link counts do not match the topology");
    return s.y;
  }
  if (s.x.rows() > 0 && s.x.cols() == a.cols()) return link_counts(a, s.x);
  throw InputError("sample file holds no link counts");
}

int cmd_estimate(const EstimateArgs& args) {
  const Network net = Network::load(args.topology);
  const RoutingMatrix a = build_routing_matrix(net);
  std::istringstream data(read_text(args.data));
  const CountMatrix y = link_observations(read_sample_csv(data), a);
  std::optional<Vector> truth;
  if (!args.lambda_true.empty()) truth = RateVector(parse_rates(args.lambda_true, a.cols())).values();
  if (args.multistart < 1) throw InputError("--multistart must be at least 1");

  const fs::path dir(args.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string());

  const json config = estimate_config(args);
  json report = envelope("estimate", config, args.seed);
  Vector hat;

  if (args.method == "gibbs") {
    ChainConfig cfg;
    cfg.n_samples = args.samples;
    cfg.burn_in = args.burn_in;
    cfg.thin = args.thin;
    cfg.seed = args.seed;
    cfg.prior = GammaPrior(args.prior_shape, args.prior_rate);
    cfg.chains = args.chains;
    cfg.mh_fallback = args.mh_fallback;
    cfg.mh_width = args.mh_width;
    if (args.scan == "random") {
      cfg.scan = ScanOrder::random;
    } else if (args.scan != "ascending") {
      throw InputError("--scan must be ascending or random");
    }
    const ChainResult res = run_chain(a, y, cfg);
    std::ostringstream draws;
    write_draws_csv(draws, res);
    write_text(dir / "draws.csv", draws.str());
    json summary = envelope("estimate", config, args.seed);
    summary["summary"] = res.summary.to_json();
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    hat.resize(a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) hat(j) = res.summary.lambda[static_cast<std::size_t>(j)].mean;
    report["method"] = "gibbs";
    report["lambda_hat"] = to_std(hat);
    report["acceptance_rate"] = res.summary.acceptance_rate;
    report["draws"] = res.summary.draws;
  } else if (args.method == "moments") {
    const EstimateReport r = moment_fit(a, y, args.floor, args.second_moment_weight);
    hat = r.lambda_hat;
    report.update(r.to_json());
  } else {
    const bool is_em = args.method == "em-exact" || args.method == "em-normal";
    if (!is_em && args.method != "gaussian") throw InputError("unknown method '" + args.method + "'");
    const RateVector base = default_init(a, y, args.floor);
    Rng rng(args.seed);
    std::vector<double> objectives;
    std::optional<EstimateReport> best;
    std::size_t chosen = 0;
    const Vector ybar = column_means(y);
    for (int s = 0; s < args.multistart; ++s) {
      Vector init = base.values();
      if (s > 0) {
        for (Eigen::Index j = 0; j < init.size(); ++j) init(j) *= 0.5 + rng.uniform();
      }
      EstimateReport r;
      double objective = 0.0;
      if (is_em) {
        EmConfig cfg;
        cfg.max_iters = args.max_iters;
        cfg.tol = args.tol;
        cfg.floor = args.floor;
        cfg.cap = args.cap;
        cfg.track_loglik = args.track_loglik;
        cfg.estep_mode = args.method == "em-exact" ? EStepMode::exact : EStepMode::normal;
        r = em_fit(a, y, RateVector(init), cfg);
        objective = args.method == "em-exact"
                        ? (r.objective ? *r.objective : observed_loglik(partition(a), y, RateVector(r.lambda_hat), args.cap))
                        : gaussian_loglik(RateVector(r.lambda_hat), ybar, y.rows(), a);
      } else {
        GaussianConfig cfg;
        cfg.max_iters = args.max_iters;
        cfg.tol = args.tol;
        cfg.floor = args.floor;
        r = gaussian_fit(a, y, RateVector(init), cfg);
        objective = *r.objective;
      }
      objectives.push_back(objective);
      if (!best || objective > objectives[chosen]) {
        best = r;
        chosen = static_cast<std::size_t>(s);
      }
    }
    hat = best->lambda_hat;
    report.update(best->to_json());
    if (args.multistart > 1) report["multistart"] = {{"starts", args.multistart}, {"chosen", chosen}, {"objectives", objectives}};
    write_text(dir / "trajectory.csv", trajectory_csv(*best));
  }

  if (truth) {
    report["lambda_true"] = to_std(*truth);
    report["relative_error"] = to_std(((hat - *truth).cwiseAbs().array() / truth->array()).matrix());
  }
  write_text(dir / "lambda.csv", lambda_csv(net, hat, truth));
  const std::string text = report.dump(2) + "\n";
  write_text(dir / "report.json", text);
  std::cout << text;
  return kOk;
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
  std::uint64_t w = 0;
  int address_bits = 32;
  std::uint64_t d = 0;
  std::uint64_t j = 0;
};

int cmd_detect(const DetectArgs& args) {
  const MonitorConfig m = MonitorConfig::with_address_bits(args.w, args.address_bits);
  const json config = {{"w", args.w}, {"address_bits", args.address_bits}, {"d", args.d}, {"j", args.j}};
  json report = envelope("detect", config, std::nullopt);
  report.update(detection_report(m, args.d, args.j));
  std::cout << report.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- profile / score

fs::path profile_path(const fs::path& dir, const std::string& sender) {
  if (sender.empty() || sender.find_first_of("/\\") != std::string::npos || sender == "." || sender == "..") {
    throw InputError("sender id '" + sender + "' cannot name a profile file");
  }
  return dir / (sender + ".json");
}

std::vector<LabeledSequence> load_sequences(const std::string& path) {
  std::istringstream in(read_text(path));
  return read_sequences_csv(in);
}

struct ProfileArgs {
  std::string profiles;
  std::string sequences;
  double smoothing = 0.5;
  std::string states;
};

int cmd_profile(const ProfileArgs& args) {
  const fs::path dir(args.profiles);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create profile directory " + dir.string());
  const json config = {{"profiles", args.profiles},
                       {"sequences", args.sequences},
                       {"smoothing", args.smoothing},
                       {"states", args.states}};
  const std::string hash = config_hash(config);
  json summary = envelope("profile", config, std::nullopt);
  summary["senders"] = json::array();
  for (const LabeledSequence& seq : load_sequences(args.sequences)) {
    const fs::path file = profile_path(dir, seq.sender_id);
    TransitionProfile prof;
    if (fs::exists(file)) {
      prof = TransitionProfile::load(file);
    } else {
      std::vector<std::string> states = split_list(args.states);
      if (states.empty()) {
        states = seq.labels;
        std::sort(states.begin(), states.end());
        states.erase(std::unique(states.begin(), states.end()), states.end());
      }
      prof = TransitionProfile::uniform(seq.sender_id, states, args.smoothing);
    }
    prof = update_profile(prof, encode(seq, prof), args.smoothing);
    json doc = prof.to_json();
    doc["config_hash"] = hash;
    write_text(file, doc.dump(2) + "\n");
    summary["senders"].push_back({{"sender", seq.sender_id}, {"transitions", seq.labels.size() - 1}});
  }
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

struct ScoreArgs {
  std::string profiles;
  std::string sequences;
  double threshold = 0.0;
  double alpha = 1.0;
  bool fit_alpha = false;
};

int cmd_score(const ScoreArgs& args) {
  const fs::path dir(args.profiles);
  const json config = {{"profiles", args.profiles},
                       {"sequences", args.sequences},
                       {"threshold", args.threshold},
                       {"alpha", args.alpha},
                       {"fit_alpha", args.fit_alpha}};
  const std::string hash = config_hash(config);
  if (!(args.alpha > 0.0)) throw InputError("--alpha must be positive");

  std::map<std::string, TransitionProfile> store;
  auto profile_for = [&](const std::string& sender) -> const TransitionProfile& {
    auto it = store.find(sender);
    if (it == store.end()) {
      const fs::path file = profile_path(dir, sender);
      if (!fs::exists(file)) throw InputError("no profile for sender '" + sender + "' in " + dir.string());
      it = store.emplace(sender, TransitionProfile::load(file)).first;
    }
    return it->second;
  };

  const auto sequences = load_sequences(args.sequences);
  bool anomaly = false;
  for (const LabeledSequence& seq : sequences) {
    const TransitionProfile& prof = profile_for(seq.sender_id);
    DirichletParams d = DirichletParams{Vector::Constant(prof.size(), args.alpha)};
    if (args.fit_alpha) {
      std::vector<CountVector> history;
      for (Eigen::Index i = 0; i < prof.size(); ++i) {
        CountVector row = prof.counts.row(i).transpose().array().round().cast<Count>();
        if (row.sum() > 0) history.push_back(row);
      }
      if (!history.empty()) d = fit_dirichlet_moments(history);
    }
    const ScoreRecord rec = score_sequence(encode(seq, prof), prof, d, args.threshold);
    json line = rec.to_json();
    line["schema"] = 1;
    line["config_hash"] = hash;
    std::cout << line.dump() << "\n";
    anomaly = anomaly || rec.anomaly;
  }
  return anomaly ? kAnomaly : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network tomography, spoofed-traffic detection and anomaly scoring"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with one object per subcommand; flags override it");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Draw Poisson route traffic and its link counts");
  simulate->add_option("--topology", sim.topology, "Topology JSON")->required();
  simulate->add_option("--lambda", sim.lambda, "Route rates: one value or a comma list")->required();
  simulate->add_option("--periods", sim.periods, "Measurement periods")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Generator seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Sample CSV to write (a .json sidecar is written next to it)")->required();

  CheckArgs chk;
  auto* check = app.add_subcommand("check", "Structural checks of a topology");
  check->add_option("--topology", chk.topology, "Topology JSON")->required();

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate route rates from link counts");
  estimate->add_option("--topology", est.topology, "Topology JSON")->required();
  estimate->add_option("--data", est.data, "Sample CSV")->required();
  estimate->add_option("--method", est.method, "em-exact, em-normal, gaussian, moments or gibbs")
      ->check(CLI::IsMember({"em-exact", "em-normal", "gaussian", "moments", "gibbs"}))
      ->capture_default_str();
  estimate->add_option("--out-dir", est.out_dir, "Directory for report, trajectories and draws")->required();
  estimate->add_option("--seed", est.seed, "Seed for multistart and sampling")->capture_default_str();
  estimate->add_option("--lambda-true", est.lambda_true, "True rates, adds relative-error columns");
  estimate->add_option("--max-iters", est.max_iters)->capture_default_str();
  estimate->add_option("--tol", est.tol)->capture_default_str();
  estimate->add_option("--floor", est.floor)->capture_default_str();
  estimate->add_option("--cap", est.cap, "Exact E-step search budget per free coordinate")->capture_default_str();
  estimate->add_flag("--track-loglik", est.track_loglik, "Record the observed-data log-likelihood (em-exact)");
  estimate->add_option("--multistart", est.multistart, "Random restarts around the default start")
      ->capture_default_str();
  estimate->add_option("--second-moment-weight", est.second_moment_weight)->capture_default_str();
  estimate->add_option("--samples", est.samples, "Retained draws per chain")->capture_default_str();
  estimate->add_option("--burn-in", est.burn_in)->capture_default_str();
  estimate->add_option("--thin", est.thin)->capture_default_str();
  estimate->add_option("--prior-shape", est.prior_shape)->capture_default_str();
  estimate->add_option("--prior-rate", est.prior_rate)->capture_default_str();
  estimate->add_option("--chains", est.chains)->capture_default_str();
  estimate->add_flag("--mh-fallback", est.mh_fallback, "Metropolis-Hastings updates for route counts");
  estimate->add_option("--mh-width", est.mh_width)->capture_default_str();
  estimate->add_option("--scan", est.scan, "ascending or random")->capture_default_str();

  DetectArgs det;
  auto* detect = app.add_subcommand("detect", "Detection math for spoofed-source attacks");
  detect->add_option("--w", det.w, "Monitored addresses")->required();
  detect->add_option("--address-bits", det.address_bits, "Address space is 2^bits")->capture_default_str();
  detect->add_option("--d", det.d, "Attack size in packets")->capture_default_str();
  detect->add_option("--j", det.j, "Observed packets")->capture_default_str();

  ProfileArgs prof;
  auto* profile = app.add_subcommand("profile", "Build or extend per-sender transition profiles");
  profile->add_option("--profiles", prof.profiles, "Profile directory")->required();
  profile->add_option("--sequences", prof.sequences, "History CSV t,sender,sd_label")->required();
  profile->add_option("--smoothing", prof.smoothing)->capture_default_str();
  profile->add_option("--states", prof.states, "Comma list of state labels for new profiles");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Bayes-factor scoring of packet sequences");
  score->add_option("--profiles", sc.profiles, "Profile directory")->required();
  score->add_option("--sequences", sc.sequences, "CSV t,sender,sd_label")->required();
  score->add_option("--threshold", sc.threshold, "Flag sequences whose weight of evidence exceeds this")
      ->capture_default_str();
  score->add_option("--alpha", sc.alpha, "Symmetric Dirichlet parameter")->capture_default_str();
  score->add_flag("--fit-alpha", sc.fit_alpha, "Method-of-moments Dirichlet fit from profile counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*check) return cmd_check(chk);
    if (*estimate) return cmd_estimate(est);
    if (*detect) return cmd_detect(det);
    if (*profile) return cmd_profile(prof);
    if (*score) return cmd_score(sc);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const BudgetExceeded& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const InfeasibleState& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  }
  return kUsage;
}

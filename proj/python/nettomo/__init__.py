"""Network tomography, spoofed-traffic detection and Bayes-factor anomaly scoring."""

import json as _json

from . import _core
from ._core import (
    BudgetExceeded,
    DimensionMismatch,
    DomainError,
    InconsistentObservation,
    InfeasibleState,
    InvalidTopology,
    NettomoError,
    NumericError,
    RankDeficient,
    attack_size_mle,
    check_capacity_bound,
    check_identifiability,
    detection_probability,
    dm_marginal_logpmf,
    enumerate_feasible,
    estep_normal,
    four_node_routing,
    gaussian_fit,
    link_counts,
    load_routing,
    moment_fit,
    observed_count_pmf,
    observed_loglik,
    partition_columns,
    sd_pair_count,
    simulate_routes,
    solve_x1,
)

__version__ = "0.1.0"


def routing_from_dict(doc):
    """Routing matrix of a topology given as a dict with nodes, links and paths."""
    return _core.routing_from_json(_json.dumps(doc))


def estep_exact(a, y, rates, cap=64):
    """Conditional mean of the route counts and log P(y | rates)."""
    return _core.estep_exact(a, y, rates, cap)


def em_fit(a, y, exact=True, max_iters=500, tol=1e-6, floor=1e-6, cap=64, track_loglik=False):
    """EM estimate of the route rates. Returns (rates, report dict, deltas, log-likelihoods)."""
    rates, report, deltas, objective = _core.em_fit(a, y, exact, max_iters, tol, floor, cap, track_loglik)
    return rates, _json.loads(report), deltas, objective


def run_chain(a, y, samples=1000, burn_in=500, thin=1, seed=0, prior_shape=1.0, prior_rate=0.01, chains=1,
              mh_fallback=False, random_scan=False):
    """Gibbs sampler. Returns (rate draws, route-count draws, summary dict)."""
    lam, x, summary = _core.run_chain(a, y, samples, burn_in, thin, seed, prior_shape, prior_rate, chains,
                                      mh_fallback, random_scan)
    return lam, x, _json.loads(summary)


def detection_report(w, d, j, address_bits=32):
    return _json.loads(_core.detection_report(w, d, j, address_bits))


def build_profile(sender, states, labels, smoothing=0.5):
    """Transition profile fitted to one labelled history, as a dict."""
    return _json.loads(_core.build_profile(sender, list(states), list(labels), smoothing))


def score_sequence(profile, labels, alpha, threshold=0.0):
    """Weight of evidence for an anomaly; `profile` is a profile dict."""
    return _json.loads(_core.score_sequence(_json.dumps(profile), list(labels), alpha, threshold))

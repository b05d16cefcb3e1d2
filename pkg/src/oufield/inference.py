"""Posterior sampling for the transport parameters (gamma, alpha, eta, beta,
sigma2) given an observed time-averaged field.

Blocks gamma, alpha, eta, sigma2 move by random-walk Metropolis on the log
scale (all parameters are positive); beta has an exact truncated-normal
Gibbs update because the field mean is linear in beta.  Step sizes adapt
toward 0.44 acceptance during burn-in only and are frozen afterwards, so the
post-burn-in kernel leaves the posterior invariant.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.stats import truncnorm

from .exceptions import DataError, NumericalError
from .sulfate import PARAM_NAMES, SulfateModel, Theta

METROPOLIS_BLOCKS = ("gamma", "alpha", "eta", "sigma2")
RIDGE_BLOCK = "gamma_eta"  # joint move along the strongly correlated pair
ALL_STEP_BLOCKS = METROPOLIS_BLOCKS + (RIDGE_BLOCK,)
TARGET_ACCEPTANCE = 0.44

_HALF_NORMAL_CONST = 0.5 * math.log(2.0 / math.pi)


def half_normal_logpdf(x: float, scale: float) -> float:
    if x <= 0:
        return -math.inf
    return _HALF_NORMAL_CONST - math.log(scale) - 0.5 * (x / scale) ** 2


def exponential_logpdf(x: float, rate: float) -> float:
    if x <= 0:
        return -math.inf
    return math.log(rate) - rate * x


@dataclass(frozen=True)
class PriorSpec:
    """Half-normal scales for gamma/alpha/beta, exponential rates for
    eta/sigma2.  Defaults are weakly informative for annual-average fields on
    a ~14 km grid."""

    gamma_scale: float = 5000.0
    alpha_scale: float = 10.0
    beta_scale: float = 10.0
    eta_rate: float = 1.0
    sigma2_rate: float = 1e-4

    def __post_init__(self):
        for name in ("gamma_scale", "alpha_scale", "beta_scale", "eta_rate",
                     "sigma2_rate"):
            if getattr(self, name) <= 0:
                raise DataError(f"prior hyperparameter {name} must be positive")

    def log_prior(self, theta: Theta) -> float:
        return (half_normal_logpdf(theta.gamma, self.gamma_scale)
                + half_normal_logpdf(theta.alpha, self.alpha_scale)
                + half_normal_logpdf(theta.beta, self.beta_scale)
                + exponential_logpdf(theta.eta, self.eta_rate)
                + exponential_logpdf(theta.sigma2, self.sigma2_rate))

    def sample(self, rng: np.random.Generator, delta: float, T: float) -> Theta:
        return Theta(gamma=abs(rng.normal(0, self.gamma_scale)),
                     alpha=abs(rng.normal(0, self.alpha_scale)),
                     eta=rng.exponential(1.0 / self.eta_rate),
                     beta=abs(rng.normal(0, self.beta_scale)),
                     sigma2=rng.exponential(1.0 / self.sigma2_rate),
                     delta=delta, T=T)


@dataclass
class ChainState:
    theta: Theta
    log_lik: float
    log_post: float


def evaluate_state(model: SulfateModel, prior: PriorSpec, theta: Theta,
                   v_obs: np.ndarray, mask: np.ndarray | None) -> ChainState:
    model.set_theta(theta)
    ll = model.log_likelihood(v_obs, mask)
    return ChainState(theta=theta, log_lik=ll, log_post=ll + prior.log_prior(theta))


def metropolis_block(state: ChainState, model: SulfateModel, prior: PriorSpec,
                     v_obs: np.ndarray, mask: np.ndarray | None, block: str,
                     step: float, rng: np.random.Generator) -> bool:
    """One log-scale random-walk update of a single parameter block.

    Proposal theta' = theta * exp(eps) with eps ~ N(0, step^2); the Jacobian
    of the log transform contributes log(theta'/theta) to the acceptance
    ratio.  Mutates the state in place; returns whether the move was taken.
    """
    if block not in PARAM_NAMES:
        raise ValueError(f"unknown Metropolis block {block!r}")
    if not math.isfinite(state.log_post):
        raise NumericalError(
            f"sampler state corrupted: log posterior is {state.log_post} "
            f"at theta = {state.theta}")
    current = getattr(state.theta, block)
    eps = rng.normal(0.0, step)
    proposal_value = current * math.exp(eps)
    proposal = state.theta.replace(**{block: proposal_value})

    model.set_theta(proposal)
    try:
        ll = model.log_likelihood(v_obs, mask)
    except NumericalError:
        model.set_theta(state.theta)
        return False
    lp = ll + prior.log_prior(proposal)
    log_ratio = (lp + math.log(proposal_value)) - (state.log_post + math.log(current))
    if math.log(rng.uniform()) < log_ratio:
        state.theta = proposal
        state.log_lik = ll
        state.log_post = lp
        return True
    model.set_theta(state.theta)
    return False


def ridge_block(state: ChainState, model: SulfateModel, prior: PriorSpec,
                v_obs: np.ndarray, mask: np.ndarray | None, step: float,
                rng: np.random.Generator) -> bool:
    """Joint log-scale move of (gamma, eta) along their posterior ridge.

    The data mainly constrain the mixing length sqrt(gamma/eta), which makes
    log gamma and log eta almost perfectly correlated; single-site walks
    then crawl.  Proposing gamma' = gamma*e^eps, eta' = eta*e^eps moves along
    the ridge in one step.  In (log gamma, log eta) space this is a symmetric
    walk along (1, 1), so the acceptance ratio is the posterior ratio times
    the log-transform Jacobian gamma'*eta' / (gamma*eta).
    """
    if not math.isfinite(state.log_post):
        raise NumericalError(
            f"sampler state corrupted: log posterior is {state.log_post} "
            f"at theta = {state.theta}")
    eps = rng.normal(0.0, step)
    scale = math.exp(eps)
    proposal = state.theta.replace(gamma=state.theta.gamma * scale,
                                   eta=state.theta.eta * scale)
    model.set_theta(proposal)
    try:
        ll = model.log_likelihood(v_obs, mask)
    except NumericalError:
        model.set_theta(state.theta)
        return False
    lp = ll + prior.log_prior(proposal)
    log_ratio = (lp + math.log(proposal.gamma) + math.log(proposal.eta)) \
        - (state.log_post + math.log(state.theta.gamma) + math.log(state.theta.eta))
    if math.log(rng.uniform()) < log_ratio:
        state.theta = proposal
        state.log_lik = ll
        state.log_post = lp
        return True
    model.set_theta(state.theta)
    return False


def gibbs_beta(state: ChainState, model: SulfateModel, prior: PriorSpec,
               v_obs: np.ndarray, mask: np.ndarray | None,
               rng: np.random.Generator) -> float:
    """Exact draw of beta from its full conditional.

    The whitened residual is linear in beta: r(beta) = r0 - beta * w with
    w = eta * A_z^{-1} X (adjusted for any masked-cell fill), so a
    half-normal prior times the Gaussian likelihood gives a normal in beta
    truncated to (0, inf).  With no valid data the draw is from the prior.
    """
    t = state.theta
    model.set_theta(t)
    n = model.grid.n
    if mask is None:
        mask_arr = np.ones(n, dtype=bool)
    else:
        mask_arr = np.asarray(mask, dtype=bool).ravel()
    n_valid = int(mask_arr.sum())

    if n_valid == 0:
        new_beta = abs(rng.normal(0.0, prior.beta_scale))
    else:
        A, _, _ = model._y_ops()
        _, _, u = model._z_ops()
        eta_u = t.eta * u
        v = np.asarray(v_obs, dtype=float).ravel()
        if n_valid == n:
            w = eta_u
            r0 = A.matrix @ v
        else:
            _, lu_y, _ = model._y_ops()
            mu_unit = lu_y.solve(eta_u)  # mean field per unit beta
            w = eta_u - A.matrix @ np.where(mask_arr, 0.0, mu_unit)
            r0 = A.matrix @ np.where(mask_arr, v, 0.0)
        wv, rv = w[mask_arr], r0[mask_arr]
        wtw = float(wv @ wv)
        if wtw == 0.0:
            raise DataError(
                "degenerate design for the beta update: emissions response is "
                "zero on all valid cells")
        noise_prec = t.T / t.sigma2
        prec = 1.0 / prior.beta_scale**2 + noise_prec * wtw
        var = 1.0 / prec
        mean = var * noise_prec * float(wv @ rv)
        sd = math.sqrt(var)
        new_beta = float(truncnorm.rvs((0.0 - mean) / sd, np.inf, loc=mean,
                                       scale=sd, random_state=rng))
        if new_beta <= 0.0:  # numerical underflow of the truncation boundary
            new_beta = np.nextafter(0.0, 1.0)

    state.theta = t.replace(beta=new_beta)
    model.set_theta(state.theta)
    state.log_lik = model.log_likelihood(v_obs, mask)
    state.log_post = state.log_lik + prior.log_prior(state.theta)
    return new_beta


@dataclass
class MCMCConfig:
    n_chains: int = 5
    iterations: int = 150_000
    burn_in: int = 25_000
    prior: PriorSpec = dc_field(default_factory=PriorSpec)
    initial_steps: dict = dc_field(default_factory=lambda: {
        "gamma": 0.4, "alpha": 0.8, "eta": 0.4, "sigma2": 0.4,
        RIDGE_BLOCK: 0.3})
    adapt_interval: int = 50
    start: list | None = None  # explicit per-chain Theta starting points
    threads: int = 1

    def __post_init__(self):
        if self.n_chains < 1:
            raise DataError("need at least one chain")
        if self.burn_in >= self.iterations:
            raise DataError(
                f"burn_in ({self.burn_in}) must be below iterations ({self.iterations})")


@dataclass
class Trace:
    """Per-chain MCMC output: all iterations (burn-in included) plus the
    step-size history that proves adaptation froze after burn-in."""

    samples: np.ndarray           # (iterations, 5), PARAM_NAMES order
    log_post: np.ndarray          # (iterations,)
    step_history: np.ndarray | None  # (iterations, len(ALL_STEP_BLOCKS))
    acceptance: dict
    seed: int
    burn_in: int
    chain_id: int
    delta: float = 50.0
    T: float = 1.0

    def post_burn(self) -> np.ndarray:
        return self.samples[self.burn_in:]

    def frozen_steps(self) -> dict:
        if self.step_history is None:
            return {}
        return dict(zip(ALL_STEP_BLOCKS, self.step_history[-1]))


def _draw_start(prior: PriorSpec, rng: np.random.Generator, model: SulfateModel,
                v_obs, mask, delta: float, T: float) -> ChainState:
    for _ in range(200):
        theta = prior.sample(rng, delta, T)
        if min(theta.gamma, theta.alpha, theta.eta, theta.beta, theta.sigma2) <= 0:
            continue
        state = evaluate_state(model, prior, theta, v_obs, mask)
        if math.isfinite(state.log_post):
            return state
    raise NumericalError("could not find a finite-posterior starting point")


def run_single_chain(model: SulfateModel, v_obs: np.ndarray,
                     mask: np.ndarray | None, config: MCMCConfig, seed: int,
                     chain_id: int) -> Trace:
    rng = np.random.default_rng(seed)
    delta, T = model.theta.delta, model.theta.T
    if config.start is not None:
        state = evaluate_state(model, config.prior, config.start[chain_id],
                               v_obs, mask)
    else:
        state = _draw_start(config.prior, rng, model, v_obs, mask, delta, T)

    steps = dict(config.initial_steps)
    samples = np.empty((config.iterations, len(PARAM_NAMES)))
    log_post = np.empty(config.iterations)
    step_history = np.empty((config.iterations, len(METROPOLIS_BLOCKS)))
    accept_post = {b: 0 for b in METROPOLIS_BLOCKS}
    window = {b: 0 for b in METROPOLIS_BLOCKS}
    n_post = 0

    for it in range(config.iterations):
        adapting = it < config.burn_in
        for b_idx, block in enumerate(METROPOLIS_BLOCKS):
            took = metropolis_block(state, model, config.prior, v_obs, mask,
                                    block, steps[block], rng)
            if adapting:
                window[block] += took
            else:
                accept_post[block] += took
        gibbs_beta(state, model, config.prior, v_obs, mask, rng)
        if not adapting:
            n_post += 1

        if adapting and (it + 1) % config.adapt_interval == 0:
            batch = (it + 1) // config.adapt_interval
            for block in METROPOLIS_BLOCKS:
                rate = window[block] / config.adapt_interval
                steps[block] *= math.exp((rate - TARGET_ACCEPTANCE) / math.sqrt(batch))
                window[block] = 0

        samples[it] = state.theta.free_values()
        log_post[it] = state.log_post
        step_history[it] = [steps[b] for b in METROPOLIS_BLOCKS]

    acceptance = {b: accept_post[b] / max(n_post, 1) for b in METROPOLIS_BLOCKS}
    return Trace(samples=samples, log_post=log_post, step_history=step_history,
                 acceptance=acceptance, seed=seed, burn_in=config.burn_in,
                 chain_id=chain_id, delta=delta, T=T)


def run_chains(model: SulfateModel, v_obs: np.ndarray, mask: np.ndarray | None,
               config: MCMCConfig, seeds) -> list[Trace]:
    """Run config.n_chains independent chains; each gets a cloned model and
    its own RNG stream, so results are deterministic given the seed list."""
    seeds = list(seeds)
    if len(seeds) != config.n_chains:
        raise DataError(f"need {config.n_chains} seeds, got {len(seeds)}")

    def job(args):
        cid, seed = args
        return run_single_chain(model.clone(), v_obs, mask, config, seed, cid)

    jobs = list(enumerate(seeds))
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(job, jobs))
    return [job(j) for j in jobs]


def pool_post_burn(traces) -> np.ndarray:
    return np.vstack([t.post_burn() for t in traces])


# -- diagnostics --------------------------------------------------------------

def split_rhat(chains: np.ndarray) -> float:
    """Split-R-hat for one parameter; chains is (m, n)."""
    m, n = chains.shape
    half = n // 2
    splits = np.vstack([chains[:, :half], chains[:, half:2 * half]])
    means = splits.mean(axis=1)
    variances = splits.var(axis=1, ddof=1)
    W = variances.mean()
    B = half * means.var(ddof=1)
    if W == 0:
        return math.nan
    var_hat = (half - 1) / half * W + B / half
    return math.sqrt(var_hat / W)


def _autocovariance(x: np.ndarray) -> np.ndarray:
    n = x.size
    xc = x - x.mean()
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f))[:n].real
    return acov / n


def effective_sample_size(chains: np.ndarray) -> float:
    """Combined-chain ESS with Geyer initial-monotone truncation."""
    m, n = chains.shape
    acov = np.mean([_autocovariance(c) for c in chains], axis=0)
    W = acov[0]  # biased within-chain variance, averaged over chains
    if m > 1:
        var_plus = W + chains.mean(axis=1).var(ddof=1)
    else:
        var_plus = W * n / (n - 1)
    if var_plus == 0:
        return math.nan
    rho = 1.0 - (W - acov) / var_plus
    # Geyer: sum consecutive pairs while positive and decreasing
    tau = 1.0
    prev_pair = math.inf
    k = 1
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair < 0:
            break
        pair = min(pair, prev_pair)
        tau += 2.0 * pair
        prev_pair = pair
        k += 2
    return m * n / tau


def diagnostics(traces) -> dict:
    """Split-R-hat and effective sample size per parameter."""
    if len(traces) < 2:
        raise DataError("diagnostics need at least 2 chains")
    post = [t.post_burn() for t in traces]
    if min(p.shape[0] for p in post) < 100:
        raise DataError("diagnostics need at least 100 post-burn-in samples per chain")
    rhat = {}
    ess = {}
    for idx, name in enumerate(PARAM_NAMES):
        chains = np.vstack([p[None, :, idx] for p in post])
        r = split_rhat(chains)
        if math.isnan(r):
            warnings.warn(f"R-hat undefined for {name}: zero within-chain variance")
        rhat[name] = r
        ess[name] = effective_sample_size(chains)
    return {"rhat": rhat, "ess": ess}


def dic(traces, loglik, thin: int = 1) -> float:
    """Deviance information criterion from pooled post-burn-in draws.

    loglik maps a 5-vector in PARAM_NAMES order to a log likelihood; DIC =
    mean deviance + p_D with p_D = mean deviance - deviance at the posterior
    mean.
    """
    pooled = pool_post_burn(traces)[::thin]
    if pooled.shape[0] == 0:
        raise DataError("no post-burn-in samples for DIC")
    if np.all(pooled == pooled[0]):
        # point-mass trace: p_D = 0 exactly, DIC = D(theta)
        d = -2.0 * loglik(pooled[0])
        if not math.isfinite(d):
            raise NumericalError("nonfinite deviance at the point-mass theta")
        return d
    deviances = np.array([-2.0 * loglik(row) for row in pooled])
    if not np.all(np.isfinite(deviances)):
        raise NumericalError("nonfinite deviance encountered in DIC")
    d_bar = deviances.mean()
    d_at_mean = -2.0 * loglik(pooled.mean(axis=0))
    if not math.isfinite(d_at_mean):
        raise NumericalError("nonfinite deviance at the posterior mean")
    p_d = d_bar - d_at_mean
    return d_bar + p_d


def model_loglik_fn(model: SulfateModel, v_obs, mask=None):
    """Adapter: pooled-trace row -> model log likelihood (for dic)."""
    base = model.theta

    def fn(row):
        model.set_theta(base.with_free_values(row))
        return model.log_likelihood(v_obs, mask)

    return fn


# -- persistence ---------------------------------------------------------------

TRACE_HEADER = ["iter", "gamma", "alpha", "eta", "beta", "sigma2", "logpost"]


def save_trace(trace: Trace, csv_path, sidecar_path, config_hash: str = "") -> None:
    """One CSV per chain plus a JSON sidecar with seed/config/acceptance."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for it in range(trace.samples.shape[0]):
            row = [it] + [repr(float(v)) for v in trace.samples[it]]
            row.append(repr(float(trace.log_post[it])))
            writer.writerow(row)
    sidecar = {
        "seed": trace.seed,
        "chain_id": trace.chain_id,
        "burn_in": trace.burn_in,
        "delta": trace.delta,
        "T": trace.T,
        "config_hash": config_hash,
        "acceptance": {k: float(v) for k, v in sorted(trace.acceptance.items())},
        "frozen_steps": {k: float(v) for k, v in sorted(trace.frozen_steps().items())},
    }
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_trace(csv_path, sidecar_path) -> Trace:
    with open(sidecar_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    rows = []
    log_post = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append([float(row[p]) for p in PARAM_NAMES])
            log_post.append(float(row["logpost"]))
    return Trace(samples=np.asarray(rows), log_post=np.asarray(log_post),
                 step_history=None, acceptance=meta.get("acceptance", {}),
                 seed=meta["seed"], burn_in=meta["burn_in"],
                 chain_id=meta["chain_id"], delta=meta.get("delta", 50.0),
                 T=meta.get("T", 1.0))

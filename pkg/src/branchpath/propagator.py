"""Finite path sums, their entropy-weighted expectation, and estimators.

The exact routes (path enumeration and transfer matrices) are kept separate
so each can serve as the other's oracle. Monte Carlo draws paths from the
entropic distribution and averages phases; every sampled contribution has
unit modulus and suppression lives in the sampling probability.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np

from .action_entropy import ActionModel, path_actions, site_positions, step_action
from .errors import BadModelKind, BudgetExceeded, DegenerateEnsemble, DimensionMismatch
from .paths import DEFAULT_PATH_CAP, PathSet, enumerate_paths, log_partition, path_probabilities
from .templates import lattice_complex

__all__ = [
    "pairwise_sum",
    "amplitude_sum",
    "expected_amplitude",
    "transfer_matrix_propagator",
    "lattice_ensemble",
    "CategoricalSampler",
    "LatticeSampler",
    "MonteCarloResult",
    "monte_carlo_amplitude",
    "CumulantComparison",
    "cumulant_corrected_expectation",
    "EnsembleReport",
    "propagate",
]

MC_CHUNK = 4096


def pairwise_sum(values: Sequence[complex] | np.ndarray) -> complex:
    """Tree summation with a fixed pairing, independent of platform BLAS."""
    z = np.array(values, dtype=complex)
    if z.size == 0:
        return 0j
    while z.size > 1:
        if z.size % 2:
            z = np.append(z, 0j)
        z = z[0::2] + z[1::2]
    return complex(z[0])


def _exponent(k: float, hbar: float) -> complex:
    if not hbar > 0:
        raise ValueError("hbar must be > 0")
    if k < 0:
        raise ValueError("k must be >= 0")
    return complex(-k, 0.0 if math.isinf(hbar) else 1.0 / hbar)


def _phases(actions: np.ndarray, hbar: float) -> np.ndarray:
    return np.exp(_exponent(0.0, hbar) * actions)


def amplitude_sum(
    path_weights: Sequence[float],
    actions: Sequence[float],
    hbar: float = 1.0,
    path_set: PathSet | None = None,
) -> complex:
    """Z = sum_i w_i exp(i S_i / hbar)."""
    w = np.asarray(path_weights, dtype=float)
    s = np.asarray(actions, dtype=float)
    if w.shape != s.shape or (path_set is not None and len(path_set) != w.size):
        raise DimensionMismatch("path weights, actions and path set must have equal length")
    return pairwise_sum(w * _phases(s, hbar))


def expected_amplitude(
    actions: Sequence[float],
    k: float = 0.0,
    hbar: float = 1.0,
    w_E: float = 1.0,
    zeta: float | None = None,
) -> complex:
    """E[Z] = zeta * sum_p w_E exp((i/hbar - k) S_p).

    ``zeta`` defaults to 1/len(actions), so a flat ensemble with k = 0 and
    zero actions gives exactly 1.
    """
    s = np.asarray(actions, dtype=float)
    if s.size == 0:
        raise DegenerateEnsemble("empty ensemble")
    if zeta is None:
        zeta = 1.0 / s.size
    return zeta * w_E * pairwise_sum(np.exp(_exponent(k, hbar) * s))


def transfer_matrix_propagator(
    model: ActionModel,
    sites: int,
    steps: int,
    source: int,
    sink: int,
    k: float = 0.0,
    hbar: float = 1.0,
    budget: int = 10**7,
) -> complex:
    """Kernel K(source -> sink) from repeated one-step matrix products."""
    if model.kind not in ("free_particle", "harmonic_oscillator"):
        raise BadModelKind("transfer matrices need a lattice action model")
    if sites * sites * steps > budget:
        raise BudgetExceeded(f"sites^2 * steps = {sites * sites * steps} exceeds budget {budget}")
    if not (0 <= source < sites and 0 <= sink < sites) or steps < 1:
        raise ValueError("source/sink must be lattice sites and steps >= 1")
    x = site_positions(sites, model.a)
    M = np.exp(_exponent(k, hbar) * step_action(x[:, None], x[None, :], model))
    v = np.zeros(sites, dtype=complex)
    v[source] = 1.0
    for _ in range(steps):
        v = v @ M
    return complex(v[sink])


def lattice_ensemble(
    model: ActionModel, sites: int, steps: int, source: int, sink: int, cap: int = DEFAULT_PATH_CAP
):
    """Enumerate lattice paths through the complete layered complex.

    Returns (complex, path set, per-path actions).
    """
    cx = lattice_complex(sites, steps)
    c_I = [s.id for s in cx.simplices
           if s.t_start == 0 and cx.vertices[s.vertex_ids[0]].x[0] == source]
    c_F = [s.id for s in cx.simplices
           if s.t_end == steps and cx.vertices[s.vertex_ids[-1]].x[0] == sink]
    ps = enumerate_paths(cx, c_I, c_F, cap=cap)
    return cx, ps, path_actions(ps, model, cx)


# -- sampling -------------------------------------------------------------------

class PathSampler(Protocol):
    size: int
    log_z: float

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray: ...


class CategoricalSampler:
    """Exact draws from an enumerated ensemble with P(p) proportional to exp(-k S)."""

    def __init__(self, actions: Sequence[float], k: float):
        self.actions = np.asarray(actions, dtype=float)
        self.probs = path_probabilities(self.actions, k)
        self.cdf = np.cumsum(self.probs)
        self.cdf[-1] = 1.0
        self.size = self.actions.size
        self.log_z = log_partition(self.actions, k)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = np.searchsorted(self.cdf, rng.random(n), side="right")
        return self.actions[np.minimum(idx, self.size - 1)]


class LatticeSampler:
    """Ancestral draws of lattice paths, slice by slice, from backward messages."""

    def __init__(self, model: ActionModel, sites: int, steps: int, source: int, sink: int, k: float):
        if model.kind not in ("free_particle", "harmonic_oscillator"):
            raise BadModelKind("ancestral sampling needs a lattice action model")
        self.x = site_positions(sites, model.a)
        self.S = step_action(self.x[:, None], self.x[None, :], model)
        logW = -k * self.S
        self.steps, self.source = steps, source
        beta = [None] * (steps + 1)
        beta[steps] = np.full(sites, -np.inf)
        beta[steps][sink] = 0.0
        for t in range(steps - 1, -1, -1):
            a = logW + beta[t + 1][None, :]
            top = a.max(axis=1, keepdims=True)
            beta[t] = (top + np.log(np.exp(a - top).sum(axis=1, keepdims=True)))[:, 0]
        self.log_z = float(beta[0][source])
        self.cdfs = []
        for t in range(steps):
            a = logW + beta[t + 1][None, :] - beta[t][:, None]
            p = np.exp(np.where(np.isfinite(a), a, -np.inf))
            p /= p.sum(axis=1, keepdims=True).clip(min=1e-300)
            c = np.cumsum(p, axis=1)
            c[:, -1] = 1.0
            self.cdfs.append(c)
        self.size = sites ** (steps - 1)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        pos = np.full(n, self.source)
        acts = np.zeros(n)
        for t in range(self.steps):
            u = rng.random(n)
            nxt = (u[:, None] >= self.cdfs[t][pos]).sum(axis=1)
            nxt = np.minimum(nxt, self.x.size - 1)
            acts += self.S[pos, nxt]
            pos = nxt
        return acts


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: complex
    stderr: float
    stderr_re: float
    stderr_im: float
    n_samples: int
    seed: int


def monte_carlo_amplitude(
    sampler: PathSampler | None = None,
    actions: Sequence[float] | None = None,
    k: float = 0.0,
    hbar: float = 1.0,
    n: int = 10_000,
    seed: int = 0,
    w_E: float = 1.0,
    zeta: float | None = None,
    threads: int = 1,
) -> MonteCarloResult:
    """Importance-sampled E[Z] = zeta * w_E * Z_P * <exp(i S / hbar)>_{p ~ P}.

    Sample chunks use RNG streams keyed by (seed, chunk index) and are
    reduced in chunk order, so the result does not depend on ``threads``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if sampler is None:
        if actions is None or len(actions) == 0:
            raise DegenerateEnsemble("need a sampler or a nonempty action vector")
        sampler = CategoricalSampler(actions, k)
    if zeta is None:
        zeta = 1.0 / sampler.size
    c = _exponent(0.0, hbar)
    sizes = [min(MC_CHUNK, n - i) for i in range(0, n, MC_CHUNK)]

    def run(i: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        return np.exp(c * sampler.draw(rng, sizes[i]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    z = np.concatenate(parts)
    scale = zeta * w_E * math.exp(sampler.log_z)
    mean = pairwise_sum(z) / n
    if n > 1:
        se_re = float(np.std(z.real, ddof=1)) / math.sqrt(n)
        se_im = float(np.std(z.imag, ddof=1)) / math.sqrt(n)
    else:
        se_re = se_im = float("inf")
    se_re, se_im = abs(scale) * se_re, abs(scale) * se_im
    return MonteCarloResult(scale * mean, math.hypot(se_re, se_im), se_re, se_im, n, seed)


# -- factorization check ----------------------------------------------------------

@dataclass(frozen=True)
class CumulantComparison:
    exact: complex
    factorized: complex
    corrected: complex
    stderr: float
    cov_wS: float

    @property
    def residual(self) -> complex:
        """What the variance correction leaves unexplained."""
        return self.exact - self.corrected


def cumulant_corrected_expectation(
    weight_samples: Sequence[float], action_samples: Sequence[float], hbar: float = 1.0
) -> CumulantComparison:
    """Compare E[w e^{iS/hbar}] with its factorized and variance-corrected forms."""
    w = np.asarray(weight_samples, dtype=float)
    s = np.asarray(action_samples, dtype=float)
    if w.shape != s.shape:
        raise DimensionMismatch("weights and actions must pair up")
    if w.size < 2:
        raise DegenerateEnsemble("need at least two samples")
    phase = np.exp(1j * s / hbar)
    wz = w * phase
    n = w.size
    exact = pairwise_sum(wz) / n
    mean_w = float(w.mean())
    factorized = mean_w * (pairwise_sum(phase) / n)
    corrected = mean_w * np.exp(1j * s.mean() / hbar) * math.exp(-s.var(ddof=1) / (2 * hbar**2))
    stderr = math.sqrt(float(np.var(wz.real, ddof=1) + np.var(wz.imag, ddof=1)) / n)
    cov = float(np.cov(w, s)[0, 1])
    return CumulantComparison(exact, factorized, complex(corrected), stderr, cov)


# -- reports ------------------------------------------------------------------------

def _cx(z: complex | None) -> dict[str, float] | None:
    return None if z is None else {"re": z.real, "im": z.imag}


@dataclass
class EnsembleReport:
    z_exact: complex | None
    e_z: complex | None
    z_transfer: complex | None
    mc_estimate: complex | None
    mc_stderr: float | None
    n_samples: int
    n_paths: int | None
    seed: int
    parameters: dict[str, Any] = field(default_factory=dict)
    contributions: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "z_exact": _cx(self.z_exact),
            "e_z": _cx(self.e_z),
            "z_transfer": _cx(self.z_transfer),
            "mc_estimate": _cx(self.mc_estimate),
            "mc_stderr": self.mc_stderr,
            "n_samples": self.n_samples,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "parameters": self.parameters,
        }


def propagate(
    model: ActionModel,
    sites: int,
    steps: int,
    source: int,
    sink: int,
    k: float = 0.0,
    hbar: float = 1.0,
    n_samples: int = 10_000,
    seed: int = 0,
    w_E: float = 1.0,
    zeta: float | None = None,
    cap: int = DEFAULT_PATH_CAP,
    threads: int = 1,
) -> EnsembleReport:
    """Lattice propagator by every available route.

    Enumeration is skipped when the ensemble exceeds ``cap``; Monte Carlo
    then falls back to ancestral sampling.
    """
    n_paths = sites ** (steps - 1)
    zeta_v = 1.0 / n_paths if zeta is None else zeta
    z_exact = e_z = None
    contributions: list[dict[str, Any]] = []
    if n_paths <= cap:
        cx, ps, acts = lattice_ensemble(model, sites, steps, source, sink, cap)
        weights = w_E * np.exp(-k * acts)
        z_exact = amplitude_sum(weights, acts, hbar)
        e_z = expected_amplitude(acts, k, hbar, w_E, zeta_v)
        phase = _phases(acts, hbar)
        for p, s, w, ph in zip(ps.paths, acts, weights, phase):
            contributions.append({"path": " ".join(p), "action": float(s), "weight": float(w),
                                  "re": float((w * ph).real), "im": float((w * ph).imag)})
        sampler: PathSampler = CategoricalSampler(acts, k)
    else:
        sampler = LatticeSampler(model, sites, steps, source, sink, k)
    z_tm = transfer_matrix_propagator(model, sites, steps, source, sink, k, hbar)
    mc = None
    if n_samples > 0:
        mc = monte_carlo_amplitude(sampler, k=k, hbar=hbar, n=n_samples, seed=seed,
                                   w_E=w_E, zeta=zeta_v, threads=threads)
    return EnsembleReport(
        z_exact=z_exact,
        e_z=e_z,
        z_transfer=z_tm,
        mc_estimate=mc.estimate if mc else None,
        mc_stderr=mc.stderr if mc else None,
        n_samples=n_samples,
        n_paths=n_paths,
        seed=seed,
        parameters={"k": k, "hbar": hbar, "w_E": w_E, "zeta": zeta_v, "model": model.to_dict(),
                    "sites": sites, "steps": steps, "source": source, "sink": sink},
        contributions=contributions,
    )

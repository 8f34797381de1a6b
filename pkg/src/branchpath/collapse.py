"""Entropic collapse: the two-branch sample model, block structure, and the
weight-exchange walk whose absorption statistics give the Born rule.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats
from scipy.special import expit

from .action_entropy import FieldEnsembleModel, field_microstate_count
from .complex_core import BoundaryMatrix, boundary_matrix, to_fraction
from .errors import (
    BadInitialState,
    DegenerateProbability,
    InvalidSpec,
    NonOrthogonalDecomposition,
    UnnormalizedState,
)
from .propagator import pairwise_sum
from .templates import toy_collapsed, toy_uncollapsed, two_cluster
from .weights import DEFAULT_BUDGET, count_lattice_configs, null_space

__all__ = [
    "ToyModelSpec",
    "ToyEntropies",
    "ToyCounts",
    "toy_entropies",
    "toy_exact_counts",
    "collapse_threshold",
    "block_decomposition",
    "DeficitScan",
    "entropy_deficit_scan",
    "CollapseState",
    "CollapseRun",
    "simulate_collapse",
    "CollapseTrials",
    "run_collapse_trials",
    "BornReport",
    "components_from_probabilities",
    "born_statistics",
    "CutoffResult",
    "trajectory_distance",
    "similarity_cutoff_propagator",
    "tanh_response",
    "channel_probability",
    "log_odds_statistic",
]

TRIAL_CHUNK = 4096


# -- two-branch sample model ------------------------------------------------------

@dataclass(frozen=True)
class ToyModelSpec:
    b: float
    L: float
    w_T: float
    T: int
    dw: float = 1.0

    def __post_init__(self) -> None:
        if not (self.b > 0 and self.L > 0 and self.dw > 0):
            raise InvalidSpec("b, L and dw must be positive")
        if self.w_T < 2 * self.L:
            raise InvalidSpec("two branches need w_T >= 2L")
        if int(self.T) != self.T or self.T < 1:
            raise InvalidSpec("T must be a positive integer")


@dataclass(frozen=True)
class ToyEntropies:
    s_A: float
    s_B_weight: float
    s_B_weight_continuum: float
    s_B_field_bounds: tuple[float, float]
    threshold: float
    discrete_threshold: float

    @property
    def favorable(self) -> bool:
        """Collapsed state wins even with the smallest admissible field entropy."""
        return self.s_B_weight + self.s_B_field_bounds[0] > self.s_A

    @property
    def favorable_continuum(self) -> bool:
        return self.s_B_weight_continuum + self.s_B_field_bounds[0] > self.s_A


def collapse_threshold(b: float, L: float) -> float:
    """Total weight above which recombining branches carry more entropy."""
    if not (b > 0 and L > 0):
        raise InvalidSpec("b and L must be positive")
    return math.exp(b) + 2 * L


def toy_entropies(spec: ToyModelSpec) -> ToyEntropies:
    """Closed-form entropies of the uncollapsed (A) and collapsed (B) models.

    ``s_B_weight`` counts lattice allocations of the excess weight, so it
    carries a +1 inside the logarithm relative to the continuum value. The
    continuum form measures weight in units of ``dw``; at ``dw = 1`` the
    discrete flip sits one grid step below the continuum threshold.
    """
    excess = spec.w_T - 2 * spec.L
    per_step = math.floor(excess / spec.dw + 1e-12) + 1
    cont = spec.T * math.log(excess) if excess > 0 else -math.inf
    return ToyEntropies(
        s_A=2 * spec.b * spec.T,
        s_B_weight=spec.T * math.log(per_step),
        s_B_weight_continuum=cont,
        s_B_field_bounds=(spec.b * spec.T, 2 * spec.b * spec.T),
        threshold=collapse_threshold(spec.b, spec.L),
        discrete_threshold=2 * spec.L + (math.exp(spec.b) - 1) * spec.dw,
    )


@dataclass(frozen=True)
class ToyCounts:
    """Exact microstate counts of the two sample complexes."""

    a_weight: int
    a_field: int
    b_weight: int
    b_field: int

    @property
    def s_A(self) -> float:
        return math.log(self.a_weight) + math.log(self.a_field)

    @property
    def s_B_weight(self) -> float:
        return math.log(self.b_weight)

    @property
    def s_B_field(self) -> float:
        return math.log(self.b_field)


def toy_exact_counts(
    spec: ToyModelSpec, max_run: int = 1, budget: int = DEFAULT_BUDGET
) -> ToyCounts:
    """Count microstates of both sample complexes with the generic counters.

    Branch A starts from a fixed weight split (it never recombines, so the
    split is an initial condition, not a degree of freedom).
    """
    field = FieldEnsembleModel(spec.b, max_run)
    L, w_T, dw = to_fraction(spec.L), to_fraction(spec.w_T), to_fraction(spec.dw)
    m_a = toy_uncollapsed(spec.T, L=L, total=w_T)
    m_b = toy_collapsed(spec.T, L=L, total=w_T)
    steps = int((w_T - 2 * L) // dw)
    w_a = L + dw * (steps // 2)
    first = sorted(m_a.first_layer())
    fixed = {first[0]: w_a, first[1]: w_T - w_a}
    return ToyCounts(
        a_weight=count_lattice_configs(m_a, L, w_T, dw, budget=budget, fixed=fixed),
        a_field=field_microstate_count(m_a, field),
        b_weight=count_lattice_configs(m_b, L, w_T, dw, budget=budget),
        b_field=field_microstate_count(m_b, field),
    )


# -- block structure ---------------------------------------------------------------

def block_decomposition(D: BoundaryMatrix) -> list[tuple[str, ...]]:
    """Finest column partition making D block diagonal.

    Blocks are connected components of the bipartite face/simplex graph,
    ordered by their first column.
    """
    n = len(D.col_ids)
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for row in D.data:
        cols = np.flatnonzero(row).tolist()
        for c in cols[1:]:
            ra, rb = find(cols[0]), find(c)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for c in range(n):
        groups.setdefault(find(c), []).append(c)
    return [tuple(D.col_ids[c] for c in g) for g in sorted(groups.values())]


@dataclass(frozen=True)
class DeficitScan:
    volumes: tuple[int, ...]
    nullity_connected: tuple[int, ...]
    nullity_blocked: tuple[int, ...]
    simplices: tuple[int, ...]
    slope: float
    intercept: float
    r2: float

    @property
    def deficits(self) -> tuple[int, ...]:
        return tuple(c - b for c, b in zip(self.nullity_connected, self.nullity_blocked))

    def rows(self) -> list[dict[str, Any]]:
        return [
            {"V": v, "nullity_connected": c, "nullity_blocked": b, "deficit": c - b, "simplices": s}
            for v, c, b, s in zip(self.volumes, self.nullity_connected, self.nullity_blocked, self.simplices)
        ]


def entropy_deficit_scan(volumes: Sequence[int], width: int = 1) -> DeficitScan:
    """Null-space deficit of the blocked two-cluster complex against the connected one."""
    conn, blk, sizes = [], [], []
    for V in volumes:
        a = two_cluster(V, width, connected=True)
        b = two_cluster(V, width, connected=False)
        if len(a.simplices) != len(b.simplices):
            raise AssertionError("template variants must have equal simplex counts")
        conn.append(null_space(boundary_matrix(a)).nullity)
        blk.append(null_space(boundary_matrix(b)).nullity)
        sizes.append(len(a.simplices))
    deficits = np.subtract(conn, blk)
    if len(volumes) >= 2:
        fit = stats.linregress(np.asarray(volumes, dtype=float), deficits.astype(float))
        slope, intercept, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue**2)
    else:
        slope = intercept = r2 = float("nan")
    return DeficitScan(tuple(volumes), tuple(conn), tuple(blk), tuple(sizes), slope, intercept, r2)


# -- weight-exchange walk ---------------------------------------------------------

@dataclass(frozen=True)
class CollapseState:
    outcome_weights: tuple[float, ...]
    step: int = 0
    absorbed: int | None = None

    @property
    def total(self) -> float:
        return math.fsum(self.outcome_weights)


EntropyFn = Callable[[np.ndarray], float]


def _pick_pairs(alive: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    keys = rng.random(alive.shape)
    keys[~alive] = -1.0
    order = np.argsort(-keys, axis=1, kind="stable")
    return order[:, 0], order[:, 1]


def _step(
    w: np.ndarray,
    L_threshold: float,
    delta: float,
    rng: np.random.Generator,
    drift: float,
    entropy_fn: EntropyFn | None,
) -> None:
    """Advance every row of ``w`` by one symmetric transfer, in place."""
    alive = w > L_threshold
    i, j = _pick_pairs(alive, rng)
    rows = np.arange(w.shape[0])
    amount = np.minimum(delta, np.minimum(w[rows, i], w[rows, j]))
    u = rng.random(w.shape[0])
    p_up = np.full(w.shape[0], 0.5)
    if drift and entropy_fn is not None:
        for r in range(w.shape[0]):
            up, down = w[r].copy(), w[r].copy()
            up[i[r]] += amount[r]
            up[j[r]] -= amount[r]
            down[i[r]] -= amount[r]
            down[j[r]] += amount[r]
            p_up[r] = min(1.0, max(0.0, 0.5 + drift * (entropy_fn(up) - entropy_fn(down))))
    sign = np.where(u < p_up, 1.0, -1.0)
    w[rows, i] += sign * amount
    w[rows, j] -= sign * amount


def _validate_weights(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise BadInitialState("need at least two outcome weights")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise BadInitialState("outcome weights must be finite, non-negative, with positive total")
    return w


@dataclass(frozen=True)
class CollapseRun:
    outcome: int | None
    trajectory: np.ndarray
    steps: int


def simulate_collapse(
    initial: CollapseState | Sequence[float],
    L_threshold: float = 0.0,
    step_scale: float = 0.02,
    seed: int = 0,
    max_steps: int = 10**6,
    drift: float = 0.0,
    entropy_fn: EntropyFn | None = None,
) -> CollapseRun:
    """One unbiased weight-exchange walk until a single outcome survives.

    Each step moves min(step_scale * w_T, w_i, w_j) between a random pair of
    live outcomes in a random direction, so every weight is a martingale and
    the total is conserved. An outcome dies once its weight is at or below
    ``L_threshold``. A nonzero ``drift`` tilts transfers up the entropy
    gradient given by ``entropy_fn`` and biases the statistics.
    """
    weights = initial.outcome_weights if isinstance(initial, CollapseState) else initial
    w = _validate_weights(weights)[None, :].copy()
    delta = step_scale * float(w.sum())
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    traj = [w[0].copy()]
    steps = 0
    while (w[0] > L_threshold).sum() > 1 and steps < max_steps:
        _step(w, L_threshold, delta, rng, drift, entropy_fn)
        traj.append(w[0].copy())
        steps += 1
    alive = np.flatnonzero(w[0] > L_threshold)
    outcome = int(alive[0]) if alive.size == 1 else None
    return CollapseRun(outcome, np.array(traj), steps)


@dataclass(frozen=True)
class CollapseTrials:
    outcomes: np.ndarray
    steps: np.ndarray
    snapshot: np.ndarray | None = None


def run_collapse_trials(
    weights: Sequence[float],
    n_trials: int,
    L_threshold: float = 0.0,
    step_scale: float = 0.02,
    seed: int = 0,
    threads: int = 1,
    max_steps: int = 10**6,
    snapshot_step: int | None = None,
) -> CollapseTrials:
    """Many independent walks, vectorized in chunks with per-chunk RNG streams.

    Outcome -1 marks a walk still unresolved after ``max_steps``. With
    ``snapshot_step`` the weights of every trial at that step are returned
    (absorbed walks are frozen, as a stopped martingale).
    """
    w0 = _validate_weights(weights)
    delta = step_scale * float(w0.sum())
    sizes = [min(TRIAL_CHUNK, n_trials - i) for i in range(0, n_trials, TRIAL_CHUNK)]

    def run(c: int):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        w = np.tile(w0, (sizes[c], 1))
        steps = np.zeros(sizes[c], dtype=np.int64)
        snap = w.copy() if snapshot_step == 0 else None
        idx = np.flatnonzero((w > L_threshold).sum(axis=1) > 1)
        sub = w[idx]
        t = 0
        while idx.size and t < max_steps:
            _step(sub, L_threshold, delta, rng, 0.0, None)
            steps[idx] += 1
            t += 1
            if snapshot_step is not None and t == snapshot_step:
                w[idx] = sub
                snap = w.copy()
            done = (sub > L_threshold).sum(axis=1) <= 1
            if done.any():
                w[idx[done]] = sub[done]
                idx, sub = idx[~done], sub[~done]
        w[idx] = sub
        if snapshot_step is not None and snap is None:
            snap = w.copy()
        alive = w > L_threshold
        out = np.where(alive.sum(axis=1) == 1, np.argmax(alive, axis=1), -1)
        return out, steps, snap

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(c) for c in range(len(sizes))]
    outcomes = np.concatenate([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    snap = np.concatenate([p[2] for p in parts]) if snapshot_step is not None else None
    return CollapseTrials(outcomes, steps, snap)


# -- Born statistics ----------------------------------------------------------------

@dataclass(frozen=True)
class BornReport:
    expected: tuple[float, ...]
    counts: tuple[int, ...]
    n_trials: int
    unresolved: int
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    chi2: float
    p_value: float
    seed: int

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(c / self.n_trials for c in self.counts)

    def rows(self) -> list[dict[str, Any]]:
        return [
            {"outcome": r, "expected": e, "count": c, "frequency": c / self.n_trials,
             "ci_low": lo, "ci_high": hi}
            for r, (e, c, lo, hi) in enumerate(zip(self.expected, self.counts, self.ci_low, self.ci_high), start=1)
        ]


def components_from_probabilities(p: Sequence[float]) -> list[np.ndarray]:
    """Orthogonal components sqrt(p_r) e_r."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise UnnormalizedState("probabilities must be non-negative")
    eye = np.eye(p.size, dtype=complex)
    return [math.sqrt(v) * eye[r] for r, v in enumerate(p)]


def _wilson(count: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    p = count / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def born_statistics(
    psi_components: Sequence[Sequence[complex]],
    n_trials: int,
    seed: int = 0,
    w_T: float = 1.0,
    step_scale: float = 0.02,
    L_threshold: float = 0.0,
    threads: int = 1,
    tol: float = 1e-9,
) -> BornReport:
    """Outcome frequencies of collapse walks started at w_T * |psi_r|^2."""
    comps = [np.asarray(c, dtype=complex) for c in psi_components]
    if not comps:
        raise UnnormalizedState("no components")
    for a in range(len(comps)):
        for b in range(a + 1, len(comps)):
            if abs(np.vdot(comps[a], comps[b])) > tol:
                raise NonOrthogonalDecomposition(f"components {a} and {b} overlap")
    psi = np.sum(comps, axis=0)
    norm = float(np.vdot(psi, psi).real)
    if abs(norm - 1.0) > tol:
        raise UnnormalizedState(f"<psi|psi> = {norm}, expected 1")
    probs = np.array([float(np.vdot(c, c).real) for c in comps])

    if len(comps) == 1:
        outcomes = np.zeros(n_trials, dtype=np.int64)
    else:
        outcomes = run_collapse_trials(
            w_T * probs, n_trials, L_threshold, step_scale, seed, threads
        ).outcomes
    counts = np.bincount(outcomes[outcomes >= 0], minlength=len(comps))
    unresolved = int((outcomes < 0).sum())
    n_ok = n_trials - unresolved
    cis = [_wilson(int(c), n_ok) for c in counts]
    live = probs > 0
    if live.sum() > 1:
        res = stats.chisquare(counts[live], n_ok * probs[live] / probs[live].sum())
        chi2, pval = float(res.statistic), float(res.pvalue)
    else:
        chi2, pval = 0.0, 1.0
    return BornReport(
        expected=tuple(probs.tolist()),
        counts=tuple(int(c) for c in counts),
        n_trials=n_ok,
        unresolved=unresolved,
        ci_low=tuple(c[0] for c in cis),
        ci_high=tuple(c[1] for c in cis),
        chi2=chi2,
        p_value=pval,
        seed=seed,
    )


# -- similarity cutoff ----------------------------------------------------------------

@dataclass(frozen=True)
class CutoffResult:
    z_cut: complex
    z_full: complex
    n_included: int
    empty: bool


def trajectory_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Root-mean-square per-slice displacement between two trajectories."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("trajectories must have equal length")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def similarity_cutoff_propagator(
    trajectories: Sequence[Sequence[float]],
    actions: Sequence[float],
    classical: int | Sequence[float],
    radius: float,
    hbar: float = 1.0,
    w_E: float = 1.0,
) -> CutoffResult:
    """Sum w_E exp(i S / hbar) over paths within ``radius`` of the classical path.

    ``classical`` is an index into ``trajectories`` or an explicit trajectory.
    An empty neighbourhood gives z_cut = 0 with ``empty`` set.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    trajs = np.asarray(trajectories, dtype=float)
    s = np.asarray(actions, dtype=float)
    ref = trajs[classical] if isinstance(classical, (int, np.integer)) else np.asarray(classical, dtype=float)
    dist = np.sqrt(np.mean((trajs - ref[None, :]) ** 2, axis=1))
    phase = w_E * np.exp(1j * s / hbar) if not math.isinf(hbar) else np.full(s.size, w_E, dtype=complex)
    keep = dist <= radius
    z_cut = pairwise_sum(phase[keep]) if keep.any() else 0j
    return CutoffResult(z_cut, pairwise_sum(phase), int(keep.sum()), not keep.any())


# -- nonlinearity channel ---------------------------------------------------------------

def tanh_response(u: Any, u0: float) -> Any:
    """Bounded response u0 * tanh(u / u0): linear for small u, saturating at +-u0."""
    if not u0 > 0:
        raise ValueError("u0 must be > 0")
    return u0 * np.tanh(np.asarray(u, dtype=float) / u0) if np.ndim(u) else u0 * math.tanh(u / u0)


def channel_probability(u: Any, u0: float, coupling: float = 1.0, d0: float = 0.0) -> Any:
    """Demonstration P(u) whose log-odds are d0 + 4 * coupling * f(u)."""
    return expit(d0 + 4 * coupling * tanh_response(u, u0))


def log_odds_statistic(
    P_of_u: Callable[[Any], Any] | Sequence[float], u_grid: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Return (D(u), J(u)) with D = ln(P / (1 - P)) and J = (D(u) - D(0)) / 4."""
    u = np.asarray(u_grid, dtype=float)
    if callable(P_of_u):
        P = np.asarray(P_of_u(u), dtype=float)
        P0 = float(P_of_u(0.0))
    else:
        P = np.asarray(P_of_u, dtype=float)
        if P.shape != u.shape:
            raise ValueError("probability samples must align with u_grid")
        zero = np.flatnonzero(u == 0.0)
        if zero.size == 0:
            raise ValueError("u_grid must contain 0 when P is given as samples")
        P0 = float(P[zero[0]])
    if np.any((P <= 0) | (P >= 1)) or not 0 < P0 < 1:
        raise DegenerateProbability("P(u) must lie strictly between 0 and 1")
    D = np.log(P) - np.log1p(-P)
    D0 = math.log(P0) - math.log1p(-P0)
    J = (D - D0) / 4
    J[u == 0.0] = 0.0
    return D, J

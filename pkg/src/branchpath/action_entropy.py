"""Action functionals and microstate-counting entropy.

Two families of per-path action are provided: lattice actions for a particle
on a time-sliced line (demonstration inputs with known answers), and the
entropic action, a negative multiple of a path's microstate entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .complex_core import BranchedComplex
from .errors import BadModelKind, ConfigError, InvalidEndpoints, ZeroMicrostates
from .paths import Path, PathSet, path_trajectory, successors
from .weights import DEFAULT_BUDGET, count_lattice_configs

__all__ = [
    "KINDS",
    "ActionModel",
    "FieldEnsembleModel",
    "MicrostateCounts",
    "model_from_block",
    "site_positions",
    "step_action",
    "lattice_action",
    "field_groups",
    "field_microstate_count",
    "microstate_counts",
    "microstate_entropy",
    "entropic_action",
    "path_actions",
]

KINDS = ("free_particle", "harmonic_oscillator", "entropic", "table")


@dataclass(frozen=True)
class ActionModel:
    kind: str = "free_particle"
    m: float = 1.0
    omega: float = 0.0
    eps: float = 1.0
    a: float = 1.0
    alpha: float = 1.0
    table: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise BadModelKind(f"unknown action kind {self.kind!r}; expected one of {KINDS}")
        for name in ("m", "eps", "a", "alpha"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.omega < 0:
            raise ConfigError("omega must be >= 0")
        if self.kind == "table" and self.table is None:
            raise ConfigError("table kind needs explicit per-path actions")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "kind": self.kind, "m": self.m, "omega": self.omega,
            "eps": self.eps, "a": self.a, "alpha": self.alpha,
        }
        if self.table is not None:
            out["table"] = list(self.table)
        return out


@dataclass(frozen=True)
class FieldEnsembleModel:
    """Field microstates: one symbol per branch per time step.

    The alphabet has ``round(e**b)`` symbols. Branches coupled in a layer
    (sharing a vertex there) may carry different symbols, but for at most
    ``max_run`` consecutive layers; otherwise they must agree.
    """

    b: float
    max_run: int = 1

    def __post_init__(self) -> None:
        if not self.b > 0:
            raise ConfigError("entropy rate b must be > 0")
        if self.max_run < 0:
            raise ConfigError("max_run must be >= 0")

    @property
    def symbol_count(self) -> int:
        return max(1, round(math.exp(self.b)))

    @property
    def rounding_error(self) -> float:
        """|ln(symbol_count) - b| in nats per branch-step."""
        return abs(math.log(self.symbol_count) - self.b)


def model_from_block(block: Mapping[str, Any]) -> tuple[ActionModel, FieldEnsembleModel | None]:
    """Parse a JSON model block ``{kind, m, omega, eps, a, alpha, b}``."""
    allowed = {"kind", "m", "omega", "eps", "a", "alpha", "b", "table", "max_run"}
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"unknown model keys: {sorted(extra)}")
    kw = {k: block[k] for k in ("kind", "m", "omega", "eps", "a", "alpha") if k in block}
    if "table" in block:
        kw["table"] = tuple(float(v) for v in block["table"])
    field = None
    if "b" in block:
        field = FieldEnsembleModel(float(block["b"]), int(block.get("max_run", 1)))
    return ActionModel(**kw), field


def site_positions(sites: int, a: float) -> np.ndarray:
    """Physical positions of lattice sites, centred on the origin."""
    return a * (np.arange(sites) - (sites - 1) / 2)


def step_action(x: Any, y: Any, model: ActionModel) -> Any:
    """Action of one time slice from x to y (left-point potential)."""
    s = 0.5 * model.m * ((y - x) / model.eps) ** 2 * model.eps
    if model.kind == "harmonic_oscillator":
        s = s - 0.5 * model.m * model.omega**2 * x**2 * model.eps
    return s


def lattice_action(trajectory: Sequence[float], model: ActionModel) -> float:
    if model.kind not in ("free_particle", "harmonic_oscillator"):
        raise BadModelKind(f"lattice_action needs a physical model, got {model.kind!r}")
    x = np.asarray(trajectory, dtype=float)
    if x.size < 2:
        raise ValueError("trajectory needs at least two points")
    return float(math.fsum(step_action(x[:-1], x[1:], model).tolist()))


# -- microstate counting ---------------------------------------------------------

def field_groups(cx: BranchedComplex, region: int | None = None) -> list[list[int]]:
    """Sizes of the coupled branch groups in every unit layer (optionally of one region)."""
    out = []
    for t in range(cx.t_min, cx.t_max):
        layer = [s for s in cx.simplices_at(t) if region is None or s.region == region]
        if not layer:
            continue
        parent = list(range(len(layer)))

        def find(i: int) -> int:
            while parent[i] != i:
                i = parent[i]
            return i

        for i in range(len(layer)):
            for j in range(i + 1, len(layer)):
                if set(layer[i].vertex_ids) & set(layer[j].vertex_ids):
                    parent[find(j)] = find(i)
        sizes: dict[int, int] = {}
        for i in range(len(layer)):
            sizes[find(i)] = sizes.get(find(i), 0) + 1
        out.append(sorted(sizes.values()))
    return out


def field_microstate_count(cx: BranchedComplex, model: FieldEnsembleModel) -> int:
    """Exact number of field microstates, by a run-length transfer over layers.

    Regions are independent, so their counts multiply.
    """
    q = model.symbol_count
    total_count = 1
    for region in sorted({s.region for s in cx.simplices}):
        # state: length of the current run of layers in which coupled branches differ
        state = [1] + [0] * model.max_run
        for sizes in field_groups(cx, region):
            agree = q ** len(sizes)
            differ = q ** sum(sizes) - agree
            nxt = [sum(state) * agree] + [0] * model.max_run
            for run in range(model.max_run):
                nxt[run + 1] += state[run] * differ
            state = nxt
        total_count *= sum(state)
    return total_count


@dataclass(frozen=True)
class MicrostateCounts:
    weight_count: int
    field_count: int

    @property
    def weight_entropy(self) -> float:
        return math.log(self.weight_count)

    @property
    def field_entropy(self) -> float:
        return math.log(self.field_count)

    @property
    def entropy(self) -> float:
        return self.weight_entropy + self.field_entropy


def _check_path(cx: BranchedComplex, path: Path) -> None:
    if not path:
        raise InvalidEndpoints("empty path")
    succ = successors(cx)
    if cx.simplex(path[0]).t_start != cx.t_min or cx.simplex(path[-1]).t_end != cx.t_max:
        raise InvalidEndpoints("path must run from the first slice to the last")
    for a, b in zip(path, path[1:]):
        if b not in succ[a]:
            raise InvalidEndpoints(f"{b!r} does not continue {a!r}")


def microstate_counts(
    path: Path,
    cx: BranchedComplex,
    field_model: FieldEnsembleModel,
    dw: Any = 1,
    L: Any = None,
    w_T: Any = None,
    budget: int = DEFAULT_BUDGET,
    fixed: Mapping[str, Any] | None = None,
) -> MicrostateCounts:
    """Weight and field microstate counts of the configurations realizing ``path``.

    Every weight is at least L > 0, so each configuration of the complex
    realizes each of its paths; the counts are those of the whole complex.
    """
    _check_path(cx, path)
    n_w = count_lattice_configs(cx, L, w_T, dw, budget=budget, fixed=fixed)
    if n_w == 0:
        raise ZeroMicrostates("no weight configuration is consistent with the path")
    return MicrostateCounts(n_w, field_microstate_count(cx, field_model))


def microstate_entropy(path: Path, cx: BranchedComplex, field_model: FieldEnsembleModel, **kw: Any) -> float:
    """S_en[p] = ln(N_w * N_phi) in nats under the uniform measure."""
    return microstate_counts(path, cx, field_model, **kw).entropy


def entropic_action(s_en: float, alpha: float = 1.0) -> float:
    if not alpha > 0:
        raise ConfigError("alpha must be > 0")
    return -alpha * s_en


def path_actions(
    path_set: PathSet,
    model: ActionModel,
    cx: BranchedComplex | None = None,
    field_model: FieldEnsembleModel | None = None,
    **count_kw: Any,
) -> np.ndarray:
    """Per-path actions for any model kind, in path-set order."""
    if model.kind == "table":
        if len(model.table) != len(path_set):
            raise ConfigError(f"table has {len(model.table)} actions for {len(path_set)} paths")
        return np.asarray(model.table, dtype=float)
    if cx is None:
        raise ConfigError(f"{model.kind} actions need the complex")
    if model.kind == "entropic":
        if field_model is None:
            raise ConfigError("entropic actions need a field model (b)")
        return np.array([
            entropic_action(microstate_entropy(p, cx, field_model, **count_kw), model.alpha)
            for p in path_set.paths
        ])
    pos = site_positions(max(v.x[0] for v in cx.vertices.values()) + 1, model.a)
    return np.array([lattice_action(pos[path_trajectory(cx, p)], model) for p in path_set.paths])

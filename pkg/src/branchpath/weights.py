"""Branch-weight configuration space: null spaces, feasibility, and counting.

All constraint algebra is done in exact rational arithmetic. Floats only
appear in entropies and inside the LP used to locate a feasible point; any
point returned from there is re-derived and checked exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .complex_core import BoundaryMatrix, BranchedComplex, boundary_matrix, to_fraction
from .errors import BudgetExceeded, ZeroMicrostates

__all__ = [
    "DEFAULT_BUDGET",
    "NullSpaceBasis",
    "WeightConfiguration",
    "FeasibilityReport",
    "rref",
    "rank",
    "null_space",
    "feasible_region",
    "count_lattice_configs",
    "weight_entropy",
]

DEFAULT_BUDGET = 10**7

Matrix = list[list[Fraction]]


def rref(rows: Sequence[Sequence[Any]]) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form over the rationals. Returns (R, pivot columns)."""
    m = [[Fraction(v) for v in row] for row in rows]
    if not m:
        return [], []
    n_cols = len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence[Any]]) -> int:
    return len(rref(rows)[1])


@dataclass(frozen=True)
class NullSpaceBasis:
    basis_vectors: tuple[tuple[Fraction, ...], ...]
    rank: int
    nullity: int
    col_ids: tuple[str, ...] = ()


def null_space(D: BoundaryMatrix | Sequence[Sequence[Any]], n_cols: int | None = None) -> NullSpaceBasis:
    """Exact basis of ker(D), one vector per free column of the RREF.

    Each basis vector has a 1 in its free column and 0 in every other free
    column, which makes the basis canonical for a fixed column order.
    """
    if isinstance(D, BoundaryMatrix):
        rows = D.data.tolist()
        n_cols = len(D.col_ids)
        col_ids = D.col_ids
    else:
        rows = [list(r) for r in D]
        if n_cols is None:
            if not rows:
                raise ValueError("n_cols is required for a matrix with no rows")
            n_cols = len(rows[0])
        col_ids = ()
    R, pivots = rref(rows)
    free = [c for c in range(n_cols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [Fraction(0)] * n_cols
        v[f] = Fraction(1)
        for row, p in zip(R, pivots):
            v[p] = -row[f]
        basis.append(tuple(v))
    return NullSpaceBasis(tuple(basis), len(pivots), len(free), col_ids)


# -- constraint system --------------------------------------------------------

@dataclass(frozen=True)
class WeightConfiguration:
    values: Mapping[str, Fraction]
    total: Fraction
    lower_bound: Fraction

    def violations(self, cx: BranchedComplex) -> list[str]:
        out = []
        D = boundary_matrix(cx)
        vec = [self.values[s] for s in D.col_ids]
        for rid, val in zip(D.row_ids, D.apply(vec)):
            if val != 0:
                out.append(f"conservation fails at face {rid}: residual {val}")
        for sid, w in self.values.items():
            if w < self.lower_bound:
                out.append(f"{sid}: weight {w} < L={self.lower_bound}")
        for key, ids in cx.cells():
            s = sum(self.values[i] for i in ids)
            if s != self.total:
                out.append(f"cell {key}: total {s} != w_T={self.total}")
        return out


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    witness: WeightConfiguration | None
    dimension: int | None
    reason: str = ""


def _equalities(
    cx: BranchedComplex, L: Fraction, w_T: Fraction, fixed: Mapping[str, Any] | None = None
) -> tuple[list[list[Fraction]], list[Fraction]]:
    """Equality system E w = r in the raw weights: conservation, cell totals, fixed values."""
    D = boundary_matrix(cx)
    n = len(cx.simplices)
    E: list[list[Fraction]] = [[Fraction(v) for v in row] for row in D.data.tolist()]
    r: list[Fraction] = [Fraction(0)] * len(E)
    for _, ids in cx.cells():
        row = [Fraction(0)] * n
        for sid in ids:
            row[cx.column(sid)] = Fraction(1)
        E.append(row)
        r.append(w_T)
    for sid, val in (fixed or {}).items():
        row = [Fraction(0)] * n
        row[cx.column(sid)] = Fraction(1)
        E.append(row)
        r.append(to_fraction(val))
    return E, r


def _solve_exact(E: list[list[Fraction]], r: list[Fraction], free_values: Mapping[int, Fraction]):
    """Solve E w = r with the free columns set from ``free_values``. None if inconsistent."""
    n = len(E[0]) if E else 0
    R, pivots = rref([row + [rhs] for row, rhs in zip(E, r)])
    if n in pivots:
        return None
    free = [c for c in range(n) if c not in set(pivots)]
    w = [Fraction(0)] * n
    for f in free:
        w[f] = free_values.get(f, Fraction(0))
    for row, p in zip(R, pivots):
        w[p] = row[n] - sum(row[f] * w[f] for f in free)
    return w


def feasible_region(cx: BranchedComplex, L: Any = None, w_T: Any = None) -> FeasibilityReport:
    """Decide whether {D w = 0, cell totals = w_T, w >= L} is nonempty.

    Returns an exact witness in the relative interior and the dimension of
    the polytope's affine hull.
    """
    L = to_fraction(L) if L is not None else cx.lower_bound
    if w_T is None:
        if cx.total_weight is None:
            raise ValueError("w_T not given and the complex has no total_weight")
        w_T = cx.total_weight
    w_T = to_fraction(w_T)
    if L <= 0 or w_T <= 0:
        raise ValueError("L and w_T must be positive")
    branching = cx.max_branching()
    if w_T < branching * L:
        return FeasibilityReport(
            False, None, None,
            f"w_T={w_T} < {branching} branches x L={L}: lower bound cannot be met in every layer",
        )

    E, r = _equalities(cx, L, w_T)
    n = len(cx.simplices)
    A = np.array([[float(v) for v in row] for row in E])
    b = np.array([float(v) for v in r])
    bounds = [(float(L), None)] * n
    base = linprog(np.zeros(n), A_eq=A, b_eq=b, bounds=bounds, method="highs")
    if base.status != 0:
        return FeasibilityReport(False, None, None, "no weight assignment satisfies all constraints")

    # a coordinate is pinned at L iff its maximum over the polytope is L
    pinned, interior = [], []
    scale = float(w_T)
    for j in range(n):
        c = np.zeros(n)
        c[j] = -1.0
        res = linprog(c, A_eq=A, b_eq=b, bounds=bounds, method="highs")
        top = res.x[j] if res.status == 0 else float(L)
        if top - float(L) <= 1e-9 * scale:
            pinned.append(j)
        else:
            interior.append(res.x)

    E_aff = [row[:] for row in E]
    r_aff = r[:]
    for j in pinned:
        row = [Fraction(0)] * n
        row[j] = Fraction(1)
        E_aff.append(row)
        r_aff.append(L)
    dim = n - rank(E_aff)

    guess = np.mean(interior, axis=0) if interior else base.x
    free_cols = _free_columns(E_aff)
    free_vals = {c: Fraction(float(guess[c])).limit_denominator(10**6) for c in free_cols}
    w = _solve_exact(E_aff, r_aff, free_vals)
    witness = None
    if w is not None:
        config = WeightConfiguration(dict(zip(cx.simplex_ids, w)), w_T, L)
        if not config.violations(cx):
            witness = config
    if witness is None:
        raise RuntimeError("LP reported feasibility but no exact witness could be reconstructed")
    return FeasibilityReport(True, witness, dim)


def _free_columns(E: list[list[Fraction]]) -> list[int]:
    if not E:
        return []
    _, pivots = rref(E)
    return [c for c in range(len(E[0])) if c not in set(pivots)]


# -- lattice counting ----------------------------------------------------------

class _Counter:
    def __init__(self, budget: int):
        self.budget = budget
        self.nodes = 0

    def spend(self, k: int) -> None:
        self.nodes += k
        if self.nodes > self.budget:
            raise BudgetExceeded(
                f"enumeration exceeded the node budget of {self.budget}; use sampling instead"
            )


def _components(E: list[list[int]], n: int) -> list[list[int]]:
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for row in E:
        cols = [c for c, v in enumerate(row) if v]
        for c in cols[1:]:
            parent[find(c)] = find(cols[0])
    groups: dict[int, list[int]] = {}
    for c in range(n):
        groups.setdefault(find(c), []).append(c)
    return sorted(groups.values())


def _count_component(E: list[list[Fraction]], r: list[Fraction], ub: list[int], counter: _Counter) -> int:
    """Count integer n in the box [0, ub] with E n = r.

    Depth-first over the free columns of the RREF; pivot columns follow
    exactly. Branches are cut when some pivot's reachable interval misses
    its box.
    """
    n = len(ub)
    R, pivots = rref([row + [rhs] for row, rhs in zip(E, r)])
    if n in pivots:
        return 0
    free = [c for c in range(n) if c not in set(pivots)]
    if not free:
        counter.spend(1)
        vals = [row[n] for row in R]
        return int(all(v.denominator == 1 and 0 <= v <= ub[p] for v, p in zip(vals, pivots)))

    # integer form: den_p * n_p = num_p - sum_f coef_pf * n_f
    rows = []
    for row, p in zip(R, pivots):
        den = math.lcm(*(v.denominator for v in row))
        rows.append((p, den, int(row[n] * den), [int(row[f] * den) for f in free]))
    k = len(free)
    fub = [ub[f] for f in free]
    # rest_lo/hi[d][i]: range of -sum coef*n_f over free vars at depth >= d
    rest_lo = [[0] * len(rows) for _ in range(k + 1)]
    rest_hi = [[0] * len(rows) for _ in range(k + 1)]
    for d in range(k - 1, -1, -1):
        for i, (_, _, _, coef) in enumerate(rows):
            a = -coef[d] * fub[d]
            rest_lo[d][i] = rest_lo[d + 1][i] + min(0, a)
            rest_hi[d][i] = rest_hi[d + 1][i] + max(0, a)
    bounds = [(den, den * ub[p]) for p, den, _, _ in rows]
    coefs = [coef for _, _, _, coef in rows]

    def viable(acc: list[int], d: int) -> bool:
        for i, (den, hi) in enumerate(bounds):
            if acc[i] + rest_hi[d][i] < 0 or acc[i] + rest_lo[d][i] > hi:
                return False
        return True

    def leaves(acc: list[int]) -> int:
        span = np.arange(fub[-1] + 1, dtype=np.int64)
        ok = np.ones(span.size, dtype=bool)
        for i, (den, hi) in enumerate(bounds):
            vals = acc[i] - coefs[i][-1] * span
            ok &= (vals >= 0) & (vals <= hi) & (vals % den == 0)
        return int(ok.sum())

    def walk(d: int, acc: list[int]) -> int:
        if d == k - 1:
            counter.spend(fub[d] + 1)
            return leaves(acc)
        total = 0
        for v in range(fub[d] + 1):
            counter.spend(1)
            nxt = [a - coefs[i][d] * v for i, a in enumerate(acc)]
            if viable(nxt, d + 1):
                total += walk(d + 1, nxt)
        return total

    start = [num for _, _, num, _ in rows]
    if not viable(start, 0):
        return 0
    return walk(0, start)


def count_lattice_configs(
    cx: BranchedComplex,
    L: Any = None,
    w_T: Any = None,
    dw: Any = 1,
    budget: int = DEFAULT_BUDGET,
    fixed: Mapping[str, Any] | None = None,
) -> int:
    """Exact number of weight assignments on the grid {L, L+dw, L+2dw, ...}.

    Counted assignments satisfy conservation, the per-cell total ``w_T``,
    and any ``fixed`` simplex values. Independent constraint components are
    counted separately and multiplied.
    """
    L = to_fraction(L) if L is not None else cx.lower_bound
    if w_T is None:
        if cx.total_weight is None:
            raise ValueError("w_T not given and the complex has no total_weight")
        w_T = cx.total_weight
    w_T, dw = to_fraction(w_T), to_fraction(dw)
    if L <= 0 or dw <= 0:
        raise ValueError("L and dw must be positive")
    n = len(cx.simplices)

    # w = L + dw * k with k >= 0 integer
    E, r = _equalities(cx, L, w_T, fixed)
    r_int = [(rhs - L * sum(row)) / dw for row, rhs in zip(E, r)]
    ub = [None] * n
    for _, ids in cx.cells():
        cap = (w_T - len(ids) * L) / dw
        if cap < 0:
            return 0
        for sid in ids:
            c = cx.column(sid)
            ub[c] = math.floor(cap) if ub[c] is None else min(ub[c], math.floor(cap))
    if any(u is None for u in ub):
        raise ValueError("every simplex must lie in a cell")

    counter = _Counter(budget)
    total = 1
    for comp in _components(E, n):
        rows = [(row, rhs) for row, rhs in zip(E, r_int) if any(row[c] for c in comp)]
        sub_E = [[row[c] for c in comp] for row, _ in rows]
        sub_r = [rhs for _, rhs in rows]
        sub_ub = [ub[c] for c in comp]
        if not sub_E:
            sub_E, sub_r = [[Fraction(0)] * len(comp)], [Fraction(0)]
        total *= _count_component(sub_E, sub_r, sub_ub, counter)
        if total == 0:
            return 0
    return total


def weight_entropy(count: int) -> float:
    """Entropy in nats of a uniform ensemble of ``count`` microstates."""
    if count <= 0:
        raise ZeroMicrostates("no microstates: the constraint region is empty")
    return math.log(count)

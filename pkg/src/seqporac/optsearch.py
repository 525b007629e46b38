"""Numerical search over qubit preparations, measurement directions and unsharpness.

The search is an independent check on the closed forms: it never assumes
the optimal geometry, it only runs the sequential chain on trial states and
directions and keeps the best of many seeded local searches.

Measurement directions are spherical angles. Observers whose unsharpness is
not fixed get an angle ``t`` in ``[0, pi/2]`` with ``lam = sin t``, which
keeps ``sqrt(1 - lam**2) = cos t`` smooth up to the sharp end. Preparations
come in two families:

* unconstrained: one pure Bloch vector per input (or per antipodal pair),
  optionally with a free radius;
* parity-oblivious: a qubit ensemble hides every parity of two or more bits
  exactly when ``a_x = c_0 + sum_y (-1)^{x_y} c_y``. The constant ``c_0``
  never changes a success probability and only eats into the Bloch ball, so
  the search uses ``a_x = sum_y (-1)^{x_y} c_y`` subject to ``|a_x| <= 1``.
  The parity constraints then hold exactly.

Floors (``S_j >= f_j``) are inequality constraints. Weights add ``w_j S_j``
to the objective, which traces the trade-off front without a constraint.
Each local search is SLSQP driven by the exact Jacobian of the chain, which
is propagated in forward mode alongside the Bloch vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import orthogonal_procrustes
from scipy.optimize import minimize

from . import closedform as cf
from .racgame import bit_matrix, bitstrings, parity_set
from .seqsim import bloch_chain_success

DEFAULT_RESTARTS = 50
MAXITER = 300
FTOL = 1e-13
FEASIBILITY_TOL = 1e-8
HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class SearchSpace:
    """What the optimiser may vary.

    ``fixed_lambdas[k]`` is the unsharpness of observer ``k`` or ``None`` when
    the search may choose it. ``floors[k]`` is a minimum success probability
    for observer ``k`` (``None`` for no floor) and ``weights[k]`` its weight
    in the objective next to the target observer.
    """

    n: int
    fixed_lambdas: tuple
    po_constrained: bool = False
    antipodal: bool = False
    mixed: bool = False
    floors: tuple = ()
    weights: tuple = ()
    dim: int = 2

    def __post_init__(self):
        object.__setattr__(self, "fixed_lambdas", tuple(self.fixed_lambdas))
        k = len(self.fixed_lambdas)
        if k < 1:
            raise ValueError("need at least one observer")
        if len(self.floors) > k or len(self.weights) > k:
            raise ValueError("more floors or weights than observers")
        object.__setattr__(self, "floors", tuple(self.floors) + (None,) * (k - len(self.floors)))
        weights = tuple(float(w) for w in self.weights) + (0.0,) * (k - len(self.weights))
        object.__setattr__(self, "weights", weights)
        if self.dim != 2:
            raise ValueError("the search covers qubit preparations only")
        if self.n not in (2, 3, 4):
            raise ValueError(f"n={self.n} not supported")
        for lam in self.fixed_lambdas:
            if lam is not None and not 0.0 <= lam <= 1.0:
                raise ValueError(f"fixed unsharpness {lam} outside [0, 1]")

    @property
    def n_observers(self) -> int:
        return len(self.fixed_lambdas)

    @property
    def n_preparations(self) -> int:
        """Independently parameterised Bloch vectors."""
        if self.po_constrained:
            return self.n
        return 2 ** (self.n - 1) if self.antipodal else 2 ** self.n

    @property
    def n_prep_parameters(self) -> int:
        if self.po_constrained:
            return 3 * self.n
        return (3 if self.mixed else 2) * self.n_preparations

    @property
    def n_free_lambdas(self) -> int:
        return sum(lam is None for lam in self.fixed_lambdas)

    @property
    def n_parameters(self) -> int:
        return self.n_prep_parameters + 2 * self.n * self.n_observers + self.n_free_lambdas

    def bounds(self) -> list[tuple]:
        if self.mixed and not self.po_constrained:
            out = [(None, None), (None, None), (0.0, 1.0)] * self.n_preparations
        else:
            out = [(None, None)] * self.n_prep_parameters
        out += [(None, None)] * (2 * self.n * self.n_observers)
        out += [(0.0, HALF_PI)] * self.n_free_lambdas
        return out


@dataclass(frozen=True)
class Decoded:
    bloch: np.ndarray
    directions: tuple[np.ndarray, ...]
    lambdas: tuple[float, ...]


def _unit(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _unit_grad(theta, phi):
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    d_theta = np.stack([ct * cp, ct * sp, -st], axis=-1)
    d_phi = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
    return d_theta, d_phi


_SIGNS: dict[int, np.ndarray] = {}


def _signs(n: int) -> np.ndarray:
    if n not in _SIGNS:
        _SIGNS[n] = 1.0 - 2.0 * bit_matrix(n)
    return _SIGNS[n]


def _preparations(space: SearchSpace, p: np.ndarray, with_grad: bool):
    """Bloch vectors ``(N, 3)`` and their tangents ``(P, N, 3)`` w.r.t. all parameters."""
    n, npp = space.n, space.n_prep_parameters
    big_n = 2 ** n
    grad = np.zeros((len(p), big_n, 3)) if with_grad else None
    if space.po_constrained:
        signs = _signs(n)
        a = signs @ p[:npp].reshape(n, 3)
        if with_grad:
            for y in range(n):
                for j in range(3):
                    grad[3 * y + j, :, j] = signs[:, y]
        return a, grad
    m = space.n_preparations
    width = 3 if space.mixed else 2
    ang = p[:npp].reshape(m, width)
    u = _unit(ang[:, 0], ang[:, 1])
    r = np.clip(ang[:, 2], 0.0, 1.0) if space.mixed else np.ones(m)
    a = u * r[:, None]
    if with_grad:
        dt, dp = _unit_grad(ang[:, 0], ang[:, 1])
        for i in range(m):
            grad[width * i, i] = dt[i] * r[i]
            grad[width * i + 1, i] = dp[i] * r[i]
            if space.mixed:
                grad[width * i + 2, i] = u[i]
    if space.antipodal:
        # lexicographic order puts complement(x) at index 2**n - 1 - i
        a = np.concatenate([a, -a[::-1]])
        if with_grad:
            grad[:, m:] = -grad[:, :m][:, ::-1]
    return a, grad


def _observers(space: SearchSpace, p: np.ndarray):
    """Directions ``(K, n, 3)``, their angle gradients, and ``lam``/``s`` per observer."""
    n, k = space.n, space.n_observers
    pos = space.n_prep_parameters
    ang = p[pos:pos + 2 * n * k].reshape(k, n, 2)
    dirs = _unit(ang[..., 0], ang[..., 1])
    d_theta, d_phi = _unit_grad(ang[..., 0], ang[..., 1])
    pos += 2 * n * k
    lams, ss, lam_idx = [], [], []
    for lam in space.fixed_lambdas:
        if lam is None:
            t = float(np.clip(p[pos], 0.0, HALF_PI))
            lams.append(math.sin(t))
            ss.append(math.cos(t))
            lam_idx.append(pos)
            pos += 1
        else:
            lams.append(float(lam))
            ss.append(math.sqrt(max(1.0 - lam * lam, 0.0)))
            lam_idx.append(None)
    return dirs, d_theta, d_phi, lams, ss, lam_idx


def decode(space: SearchSpace, p: np.ndarray) -> Decoded:
    p = np.asarray(p, dtype=float)
    a, _ = _preparations(space, p, False)
    dirs, _, _, lams, _, _ = _observers(space, p)
    return Decoded(a, tuple(dirs), tuple(lams))


def chain_with_jacobian(space: SearchSpace, p: np.ndarray, keep: int | None = None):
    """Success of the first ``keep`` observers and its Jacobian ``(keep, P)``.

    Mirrors :func:`seqporac.seqsim.bloch_chain_success` step by step and
    carries the tangent of every Bloch vector along.
    """
    p = np.asarray(p, dtype=float)
    keep = space.n_observers if keep is None else keep
    n = space.n
    big_n = 2 ** n
    signs = _signs(n)
    a, ta = _preparations(space, p, True)
    dirs, d_theta, d_phi, lams, ss, lam_idx = _observers(space, p)
    base = space.n_prep_parameters
    succ = np.empty(keep)
    jac = np.zeros((keep, len(p)))
    scale = 1.0 / (2 * n * big_n)
    for k in range(keep):
        b = dirs[k]
        tb = np.zeros((len(p), n, 3))
        for y in range(n):
            tb[base + 2 * (k * n + y), y] = d_theta[k, y]
            tb[base + 2 * (k * n + y) + 1, y] = d_phi[k, y]
        lam, s = lams[k], ss[k]
        tlam = np.zeros(len(p))
        ts = np.zeros(len(p))
        if lam_idx[k] is not None:
            # lam = sin t, s = cos t
            tlam[lam_idx[k]] = s
            ts[lam_idx[k]] = -lam
        proj = a @ b.T
        tproj = ta @ b.T + np.einsum("nj,pyj->pny", a, tb)
        total = float(np.sum(signs * proj))
        succ[k] = 0.5 + lam * scale * total
        jac[k] = scale * (tlam * total + lam * np.einsum("ny,pny->p", signs, tproj))
        if k + 1 < keep:
            mix = proj @ b / n
            tmix = (tproj @ b + np.einsum("ny,pyj->pnj", proj, tb)) / n
            ta = ts[:, None, None] * (a - mix)[None] + s * ta + (1.0 - s) * tmix
            a = s * a + (1.0 - s) * mix
    return succ, jac


_PARITY_SIGNS: dict[int, np.ndarray] = {}


def _parity_signs(n: int) -> np.ndarray:
    if n not in _PARITY_SIGNS:
        xs = bit_matrix(n)
        rows = [1.0 - 2.0 * ((xs @ np.array([int(c) for c in s])) % 2) for s in parity_set(n)]
        _PARITY_SIGNS[n] = np.array(rows)
    return _PARITY_SIGNS[n]


def po_residual(bloch: np.ndarray, n: int) -> float:
    """Sum over hidden parities of the norm of the signed average Bloch vector."""
    v = _parity_signs(n) @ bloch / 2 ** (n - 1)
    return float(np.sum(np.linalg.norm(v, axis=1)))


@dataclass(frozen=True)
class SearchResult:
    best_value: float
    best_parameters: np.ndarray
    restarts_used: int
    seed: int
    space: SearchSpace
    target: int
    violation: float
    all_values: tuple[float, ...] = field(default=())

    @property
    def decoded(self) -> Decoded:
        return decode(self.space, self.best_parameters)

    @property
    def successes(self) -> np.ndarray:
        d = self.decoded
        return bloch_chain_success(d.bloch, d.directions, d.lambdas)

    @property
    def po_residual(self) -> float:
        return po_residual(self.decoded.bloch, self.space.n)


def violation(space: SearchSpace, p: np.ndarray, target: int) -> float:
    """Total amount by which ``p`` breaks the Bloch-ball and floor constraints."""
    d = decode(space, p)
    succ = bloch_chain_success(d.bloch, d.directions[:target + 1], d.lambdas[:target + 1])
    v = float(np.sum(np.maximum(np.linalg.norm(d.bloch, axis=1) - 1.0, 0.0)))
    for s, f in zip(succ, space.floors[:target]):
        if f is not None:
            v += max(f - s, 0.0)
    return v


class _Problem:
    """Objective and constraints for SLSQP, sharing one chain evaluation per point."""

    def __init__(self, space: SearchSpace, target: int):
        self.space = space
        self.target = target
        self.keep = target + 1
        w = np.array(space.weights[:self.keep])
        w[target] = 1.0
        self.weights = w
        self.floored = [j for j, f in enumerate(space.floors[:target]) if f is not None]
        self.floor_vals = np.array([space.floors[j] for j in self.floored])
        self._key = None

    def _eval(self, p):
        key = p.tobytes()
        if key != self._key:
            self._succ, self._jac = chain_with_jacobian(self.space, p, self.keep)
            self._key = key
        return self._succ, self._jac

    def fun(self, p):
        succ, _ = self._eval(p)
        return -float(self.weights @ succ)

    def grad(self, p):
        _, jac = self._eval(p)
        return -(self.weights @ jac)

    def constraints(self) -> list[dict]:
        cons = []
        sp = self.space
        if sp.po_constrained:
            half = 2 ** (sp.n - 1)
            signs = _signs(sp.n)[:half]
            npp = sp.n_prep_parameters

            def ball(p):
                a = signs @ p[:npp].reshape(sp.n, 3)
                return 1.0 - np.sum(a * a, axis=1)

            def ball_jac(p):
                a = signs @ p[:npp].reshape(sp.n, 3)
                out = np.zeros((half, len(p)))
                # d|a_x|^2 / dc_{y,j} = 2 a_{x,j} sign_{x,y}
                out[:, :npp] = (-2.0 * signs[:, :, None] * a[:, None, :]).reshape(half, npp)
                return out

            cons.append({"type": "ineq", "fun": ball, "jac": ball_jac})
        if self.floored:
            cons.append({"type": "ineq",
                         "fun": lambda p: self._eval(p)[0][self.floored] - self.floor_vals,
                         "jac": lambda p: self._eval(p)[1][self.floored]})
        return cons


def _start(space: SearchSpace, rng: np.random.Generator) -> np.ndarray:
    x = rng.uniform(0.0, 2.0 * np.pi, space.n_parameters)
    npp = space.n_prep_parameters
    if space.po_constrained:
        x[:npp] = rng.normal(scale=1.0 / space.n, size=npp)
    elif space.mixed:
        x[2:npp:3] = rng.uniform(0.0, 1.0, space.n_preparations)
    if space.n_free_lambdas:
        x[-space.n_free_lambdas:] = rng.uniform(0.0, HALF_PI, space.n_free_lambdas)
    return x


def _one_restart(space: SearchSpace, target: int, rng: np.random.Generator,
                 maxiter: int) -> tuple[float, np.ndarray, float]:
    prob = _Problem(space, target)
    res = minimize(prob.fun, _start(space, rng), jac=prob.grad, method="SLSQP",
                   bounds=space.bounds(), constraints=prob.constraints(),
                   options={"maxiter": maxiter, "ftol": FTOL})
    x = res.x
    succ, _ = prob._eval(x)
    return float(succ[target]), x, violation(space, x, target)


def maximize_observer_success(space: SearchSpace, target_observer: int, seed: int = 0,
                              restarts: int = DEFAULT_RESTARTS, maxiter: int = MAXITER) -> SearchResult:
    """Best success probability of ``target_observer`` (1-based) over ``restarts`` local searches.

    Restart ``r`` starts from ``numpy.random.default_rng([seed, r])``, so a
    restart's outcome does not depend on the others. Restarts that end with
    constraint violation above :data:`FEASIBILITY_TOL` only win when no
    restart is feasible. With weights set, "best" refers to the weighted
    objective while ``best_value`` still reports the target's success.
    """
    if not 1 <= target_observer <= space.n_observers:
        raise ValueError(f"target observer {target_observer} outside 1..{space.n_observers}")
    if restarts < 1:
        raise ValueError("need at least one restart")
    t = target_observer - 1
    prob = _Problem(space, t)
    best = None
    values = []
    for r in range(restarts):
        val, x, viol = _one_restart(space, t, np.random.default_rng([seed, r]), maxiter)
        ok = viol <= FEASIBILITY_TOL
        values.append(val if ok else float("nan"))
        key = (ok, -prob.fun(x) if ok else -viol)
        if best is None or key > best[0]:
            best = (key, val, x, viol)
    _, val, x, viol = best
    return SearchResult(val, x, restarts, seed, space, target_observer, viol, tuple(values))


@dataclass(frozen=True)
class NoAdvantageReport:
    scenario: str
    observer: int
    max_found: float
    classical_bound: float
    lambdas_found: tuple[float, ...]
    successes_found: tuple[float, ...]
    violation: float
    seeds: tuple[int, ...]
    per_seed: tuple[float, ...]

    @property
    def margin(self) -> float:
        return self.classical_bound - self.max_found

    @property
    def confirmed(self) -> bool:
        return self.margin > 0


def no_advantage_space(tag, observer_index: int, free_lambdas: bool = False) -> SearchSpace:
    """Search space for the first observer expected to lose the advantage.

    Earlier observers must keep at least the classical bound. Their
    unsharpness sits at the minimal cascade values, or is left to the search
    with ``free_lambdas``. The target measures sharply.
    """
    sc = cf.get_scenario(tag)
    if sc.dim != 2:
        raise ValueError("no-advantage search is defined for qubit scenarios")
    bound = float(sc.classical_bound)
    k = observer_index
    cas = cf.min_lambda_cascade(sc, k - 1) if k > 1 else None
    if cas is not None and cas.feasible_length < k - 1:
        raise ValueError(f"observer {cas.blocked_at} of {sc.tag} already cannot reach the bound")
    earlier = (None,) * (k - 1) if free_lambdas else (cas.lambdas if cas else ())
    return SearchSpace(sc.n, tuple(earlier) + (1.0,), po_constrained=sc.parity_oblivious,
                       floors=(bound,) * (k - 1))


def verify_no_advantage(tag, observer_index: int | None = None, seeds: Sequence[int] = (0,),
                        restarts: int = 4, maxiter: int = MAXITER,
                        free_lambdas: bool = False) -> NoAdvantageReport:
    """Best success found for the first observer predicted to lose the advantage.

    ``observer_index`` defaults to one past the scenario's sharing limit.
    """
    sc = cf.get_scenario(tag)
    k = sc.max_sharing + 1 if observer_index is None else observer_index
    space = no_advantage_space(sc, k, free_lambdas)
    best = None
    per_seed = []
    for seed in seeds:
        res = maximize_observer_success(space, k, seed, restarts, maxiter)
        per_seed.append(res.best_value)
        if best is None or res.best_value > best.best_value:
            best = res
    return NoAdvantageReport(sc.tag, k, best.best_value, float(sc.classical_bound),
                             best.decoded.lambdas, tuple(best.successes), best.violation,
                             tuple(seeds), tuple(per_seed))


@dataclass(frozen=True)
class GeometryReport:
    tetra_deviation: float
    m_orthogonality: float
    direction_mismatch: float
    sum_m_norms: float
    rotation: np.ndarray

    def ok(self, tol: float = 1e-4, norm_tol: float = 1e-3) -> bool:
        return (self.tetra_deviation < tol and self.m_orthogonality < tol
                and self.direction_mismatch < tol
                and abs(self.sum_m_norms - 8 * math.sqrt(3)) < norm_tol)


_TETRA = ("000", "001", "010", "100")
# a_000 . a_x = +1/3 for the three neighbours, -1/3 between the neighbours
_TETRA_GRAM = np.array([[3, 1, 1, 1], [1, 3, -1, -1], [1, -1, 3, -1], [1, -1, -1, 3]]) / 3.0


def m_vectors(bloch: np.ndarray) -> np.ndarray:
    """``m_r = sum_x (-1)^{x_r} a_x`` for each question ``r`` (rows)."""
    n = int(round(math.log2(len(bloch))))
    return (1.0 - 2.0 * bit_matrix(n).T) @ bloch


def verify_optimal_geometry(result: SearchResult, tol: float = 1e-4) -> GeometryReport:
    """Check the optimal 3-bit pair geometry of a converged search.

    At the optimum ``a_000, a_001, a_010, a_100`` form a regular tetrahedron,
    the three ``m`` vectors are orthogonal with total length ``8 sqrt3``, and
    both observers measure along the ``m``-hat directions. The rotation that
    maps the ``m``-hat frame onto the coordinate axes is found by orthogonal
    Procrustes and both observers' directions are compared in that frame.

    Raises ``ValueError`` when the result is infeasible or does not reach
    the closed-form trade-off within ``tol``.
    """
    space = result.space
    if space.n != 3 or space.n_observers != 2 or space.floors[0] is None:
        raise ValueError("geometry check applies to a floored two-observer 3-bit search")
    target = cf.tradeoff_3bit_pair(space.floors[0])
    if result.violation > FEASIBILITY_TOL or abs(result.best_value - target) > tol:
        raise ValueError(f"search not converged: {result.best_value:.8f} vs optimum {target:.8f}")
    d = result.decoded
    idx = {x: i for i, x in enumerate(bitstrings(3))}
    tet = np.stack([d.bloch[idx[x]] for x in _TETRA])
    tetra_dev = float(np.max(np.abs(tet @ tet.T - _TETRA_GRAM)))
    m = m_vectors(d.bloch)
    norms = np.linalg.norm(m, axis=1)
    mhat = m / norms[:, None]
    ortho = float(np.max(np.abs(mhat @ mhat.T - np.eye(3))))
    rot, _ = orthogonal_procrustes(mhat, np.eye(3))
    frame = mhat @ rot
    mismatch = 0.0
    for b in d.directions:
        mismatch = max(mismatch, float(np.max(np.abs(b @ rot - frame))))
    return GeometryReport(tetra_dev, ortho, mismatch, float(np.sum(norms)), rot)

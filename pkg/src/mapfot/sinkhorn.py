"""Entropic relaxation: Sinkhorn-style sweeps on per-slice Gibbs kernels.

The fractional transport is ``Pi_t = diag(u_t) G_t diag(v_t)`` with one pair
of scaling vectors per slice.  A sweep projects onto the start marginal,
glues consecutive slices forward in time, projects onto the terminal
marginal, then glues backward.  Kernels are stored as per-edge arrays; the
products ``G v`` and ``G^T u`` are segment sums over the edge list.

Two numeric modes share the same update order: a linear mode and a
log-domain (stabilized) mode for small temperatures.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numba
import numpy as np
from scipy.special import logsumexp

from .errors import Diverged, NonPositiveEpsilon, SupportMismatch, TensorTooLarge
from .instance import Instance

STABILIZE_BELOW = 0.15
WINDOW = 20
FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class GibbsKernel:
    """Normalized kernel entries ``exp(-c/eps) / z_t`` on the edges of each slice."""

    log_g: np.ndarray  # (T, E)
    log_z: np.ndarray  # (T,)
    epsilon: float
    src: np.ndarray
    dst: np.ndarray
    n_vertices: int

    @property
    def g(self) -> np.ndarray:
        return np.exp(self.log_g)

    @property
    def z(self) -> np.ndarray:
        return np.exp(self.log_z)

    @property
    def horizon(self) -> int:
        return self.log_g.shape[0]

    def dense(self, t: int) -> np.ndarray:
        K = self.n_vertices
        out = np.zeros((K, K))
        out[self.src, self.dst] = np.exp(self.log_g[t - 1])
        return out


def float_costs(inst: Instance, T: int) -> np.ndarray:
    tab = inst.cost_table(T)
    vals = tab.values
    if vals.dtype == object:
        return np.array([[float(c) / tab.scale for c in row] for row in vals.tolist()], dtype=np.float64)
    return vals.astype(np.float64) / tab.scale


def gibbs_kernel(inst: Instance, T: int | None = None, epsilon: float = 0.2) -> GibbsKernel:
    T = inst.horizon if T is None else int(T)
    if not epsilon > 0:
        raise NonPositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    logits = -float_costs(inst, T) / epsilon
    log_z = logsumexp(logits, axis=1)
    return GibbsKernel(logits - log_z[:, None], log_z, float(epsilon), inst.src, inst.dst, inst.n_vertices)


@dataclass
class ScalingState:
    """Scalings ``u_t, v_t`` for ``t = 1..T`` (row ``t-1``), in log domain when stabilized."""

    u: np.ndarray  # (T, K)
    v: np.ndarray
    log_domain: bool
    sweep: int = 0

    def linear(self) -> tuple[np.ndarray, np.ndarray]:
        if self.log_domain:
            return np.exp(self.u), np.exp(self.v)
        return self.u, self.v


@dataclass
class ShadowTransport:
    slices: np.ndarray  # (T, E) fractional transport on the edge list
    trace: list[float]
    residual: float
    sweeps: int
    converged: bool
    epsilon: float
    stabilized: bool
    damping: float
    src: np.ndarray
    dst: np.ndarray
    n_vertices: int
    wall_time: float = 0.0
    state: ScalingState | None = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return self.slices.shape[0]

    def departures(self, t: int) -> np.ndarray:
        return np.bincount(self.src, weights=self.slices[t - 1], minlength=self.n_vertices)

    def arrivals(self, t: int) -> np.ndarray:
        return np.bincount(self.dst, weights=self.slices[t - 1], minlength=self.n_vertices)

    def summary(self) -> dict[str, Any]:
        return {"epsilon": self.epsilon, "damping": self.damping, "stabilized": self.stabilized,
                "sweeps": self.sweeps, "residual": self.residual, "converged": self.converged,
                "horizon": self.horizon}


@numba.njit(cache=True)
def _seg_sum(w, x, gather, order, ptr, out):
    for i in range(out.size):
        acc = 0.0
        for p in range(ptr[i], ptr[i + 1]):
            e = order[p]
            acc += w[e] * x[gather[e]]
        out[i] = acc


@numba.njit(cache=True)
def _seg_lse(w, x, gather, order, ptr, out):
    for i in range(out.size):
        m = -np.inf
        for p in range(ptr[i], ptr[i + 1]):
            e = order[p]
            y = w[e] + x[gather[e]]
            if y > m:
                m = y
        if m == -np.inf:
            out[i] = -np.inf
            continue
        acc = 0.0
        for p in range(ptr[i], ptr[i + 1]):
            e = order[p]
            acc += np.exp(w[e] + x[gather[e]] - m)
        out[i] = m + np.log(acc)


def _group(keys: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable").astype(np.int64)
    ptr = np.zeros(K + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=K), out=ptr[1:])
    return order, ptr


class _Ops:
    """Kernel-vector products as segment reductions over the edge list."""

    def __init__(self, kernel: GibbsKernel, log_domain: bool):
        self.K = kernel.n_vertices
        self.src = np.ascontiguousarray(kernel.src, dtype=np.int64)
        self.dst = np.ascontiguousarray(kernel.dst, dtype=np.int64)
        self.log = log_domain
        self.w = np.ascontiguousarray(kernel.log_g if log_domain else kernel.g)
        self.by_src = _group(self.src, self.K)
        self.by_dst = _group(self.dst, self.K)
        self._reduce = _seg_lse if log_domain else _seg_sum

    def gv(self, t: int, v: np.ndarray) -> np.ndarray:
        """[G_t v]_i over the edges leaving i."""
        out = np.empty(self.K)
        self._reduce(self.w[t - 1], np.ascontiguousarray(v), self.dst, *self.by_src, out)
        return out

    def gtu(self, t: int, u: np.ndarray) -> np.ndarray:
        """[G_t^T u]_j over the edges entering j."""
        out = np.empty(self.K)
        self._reduce(self.w[t - 1], np.ascontiguousarray(u), self.src, *self.by_dst, out)
        return out


class SinkhornMAPF:
    """Sweep state machine; :func:`run` drives it to convergence.

    ``boundary="strict"`` zeroes the start (terminal) scalings outside the
    robot (target) support at each boundary projection, so the boundary
    marginals hold exactly.  ``boundary="keep"`` leaves them at their previous
    values, which lets mass enter or leave at non-robot/non-target vertices.
    """

    def __init__(self, inst: Instance, T: int, epsilon: float, damping: float = 1.0,
                 stabilized: bool | None = None, boundary: str = "keep"):
        if not 0 < damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if T < 1:
            raise ValueError("horizon must be at least 1")
        if boundary not in ("strict", "keep"):
            raise ValueError(f"unknown boundary mode {boundary!r}")
        self.kernel = gibbs_kernel(inst, T, epsilon)
        self.log = (epsilon < STABILIZE_BELOW) if stabilized is None else bool(stabilized)
        self.ops = _Ops(self.kernel, self.log)
        self.T, self.K = T, inst.n_vertices
        self.damping = float(damping)
        self.boundary = boundary
        self.mu, self.nu = inst.mu.astype(np.float64), inst.nu.astype(np.float64)
        self.on_mu, self.on_nu = self.mu > 0, self.nu > 0
        one = 0.0 if self.log else 1.0
        self.u = np.full((T, self.K), one)
        self.v = np.full((T, self.K), one)
        self.sweep = 0
        # initial boundary normalization on the supports only; other entries stay at 1
        self._set_u1(self.ops.gv(1, self.v[0]), strict=False)
        self._set_vT(self.ops.gtu(T, self.u[T - 1]), strict=False)
        self._check()

    # ratio helpers: target / denominator on a mask, with 0 for a zero denominator
    def _ratio(self, target: np.ndarray, denom: np.ndarray) -> np.ndarray:
        if self.log:
            with np.errstate(divide="ignore"):
                lt = np.log(target)
            return np.where(np.isfinite(denom), lt - np.where(np.isfinite(denom), denom, 0.0), -np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(denom > 0, target / np.where(denom > 0, denom, 1.0), 0.0)

    def _zero(self):
        return -np.inf if self.log else 0.0

    def _set_u1(self, gv1, strict: bool):
        r = self._ratio(self.mu, gv1)
        self.u[0, self.on_mu] = r[self.on_mu]
        if strict:
            self.u[0, ~self.on_mu] = self._zero()

    def _set_vT(self, gtuT, strict: bool):
        r = self._ratio(self.nu, gtuT)
        self.v[-1, self.on_nu] = r[self.on_nu]
        if strict:
            self.v[-1, ~self.on_nu] = self._zero()

    def _check(self):
        bad = np.isnan(self.u).any() or np.isnan(self.v).any()
        if self.log:
            bad = bad or np.isposinf(self.u).any() or np.isposinf(self.v).any()
        else:
            bad = bad or not (np.isfinite(self.u).all() and np.isfinite(self.v).all())
        if bad:
            raise Diverged(f"non-finite scaling after sweep {self.sweep}"
                           + ("" if self.log else "; retry with the stabilized mode"))

    def _balance(self, a_side: np.ndarray, b_side: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Exponents (log) / factors (linear) moving side ``a`` up to meet ``b`` halfway, damped.

        A side whose own product is zero keeps its scaling, as does the
        partner of a zero side.
        """
        eta = self.damping
        if self.log:
            ok = np.isfinite(a_side) & np.isfinite(b_side)
            half = np.where(ok, 0.5 * (np.where(ok, b_side, 0.0) - np.where(ok, a_side, 0.0)), 0.0)
            # b side exactly zero: a side is driven to zero, b side is left alone
            drop = np.isfinite(a_side) & ~np.isfinite(b_side)
            fa = np.where(drop, -np.inf, eta * half)
            fb = -eta * half
            return fa, fb
        pos_a, pos_b = a_side > 0, b_side > 0
        ok = pos_a & pos_b
        with np.errstate(divide="ignore", invalid="ignore"):
            gam = np.where(ok, np.sqrt(np.where(ok, b_side, 1.0) / np.where(ok, a_side, 1.0)), 1.0)
        fa = np.where(pos_a & ~pos_b, 0.0, gam ** eta)
        fb = gam ** (-eta)
        return fa, fb

    def _scale(self, arr, t_row: int, factor):
        if self.log:
            arr[t_row] = arr[t_row] + factor
        else:
            arr[t_row] = arr[t_row] * factor

    def _mul(self, a, b):
        return a + b if self.log else a * b

    def project_start(self):
        self._set_u1(self.ops.gv(1, self.v[0]), strict=self.boundary == "strict")

    def forward(self):
        ops = self.ops
        for t in range(1, self.T):
            q_out = self._mul(self.v[t - 1], ops.gtu(t, self.u[t - 1]))
            q_in = self._mul(self.u[t], ops.gv(t + 1, self.v[t]))
            fv, fu = self._balance(q_out, q_in)
            self._scale(self.v, t - 1, fv)
            self._scale(self.u, t, fu)

    def project_terminal(self):
        self._set_vT(self.ops.gtu(self.T, self.u[-1]), strict=self.boundary == "strict")

    def backward(self):
        ops = self.ops
        for t in range(self.T - 1, 0, -1):
            qb_out = self._mul(self.u[t], ops.gv(t + 1, self.v[t]))
            qb_in = self._mul(self.v[t - 1], ops.gtu(t, self.u[t - 1]))
            fu, fv = self._balance(qb_out, qb_in)
            self._scale(self.u, t, fu)
            self._scale(self.v, t - 1, fv)

    def step(self) -> float:
        self.project_start()
        self.forward()
        self.project_terminal()
        self.backward()
        self.sweep += 1
        self._check()
        return self.residual()

    def linear_scalings(self) -> tuple[np.ndarray, np.ndarray]:
        if self.log:
            return np.exp(self.u), np.exp(self.v)
        return self.u, self.v

    def slices(self) -> np.ndarray:
        k = self.kernel
        if self.log:
            return np.exp(self.u[:, k.src] + k.log_g + self.v[:, k.dst])
        return self.u[:, k.src] * k.g * self.v[:, k.dst]

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """Row sums (departures) and column sums (arrivals) of every slice, linear domain."""
        rows = np.empty((self.T, self.K))
        cols = np.empty((self.T, self.K))
        for t in range(1, self.T + 1):
            rows[t - 1] = self._mul(self.u[t - 1], self.ops.gv(t, self.v[t - 1]))
            cols[t - 1] = self._mul(self.v[t - 1], self.ops.gtu(t, self.u[t - 1]))
        if self.log:
            return np.exp(rows), np.exp(cols)
        return rows, cols

    def residual(self) -> float:
        rows, cols = self.marginals()
        glue = float(np.abs(cols[:-1] - rows[1:]).max(axis=1).max()) if self.T > 1 else 0.0
        return glue + float(np.abs(rows[0] - self.mu).max()) + float(np.abs(cols[-1] - self.nu).max())

    def state(self) -> ScalingState:
        return ScalingState(self.u.copy(), self.v.copy(), self.log, self.sweep)


def stalled(trace: list[float], tol: float, window: int = WINDOW) -> bool:
    """Relative change of the residual across the trailing window is below ``tol``."""
    if trace and trace[-1] < FLOOR:
        return True
    if len(trace) <= window:
        return False
    old, new = trace[-1 - window], trace[-1]
    return abs(old - new) <= tol * max(abs(old), FLOOR)


def run(inst: Instance, T: int | None = None, epsilon: float = 0.2, damping: float = 1.0,
        max_sweeps: int = 1000, tol: float = 1e-3, stabilized: bool | None = None,
        boundary: str = "keep") -> ShadowTransport:
    """Sweep until the residual stalls over the trailing window, or ``max_sweeps``."""
    import time

    T = inst.horizon if T is None else int(T)
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    start = time.perf_counter()
    solver = SinkhornMAPF(inst, T, epsilon, damping, stabilized, boundary)
    trace: list[float] = []
    converged = False
    while solver.sweep < max_sweeps:
        trace.append(solver.step())
        if stalled(trace, tol):
            converged = True
            break
    k = solver.kernel
    return ShadowTransport(solver.slices(), trace, trace[-1], solver.sweep, converged, float(epsilon),
                           solver.log, float(damping), k.src, k.dst, k.n_vertices,
                           time.perf_counter() - start, solver.state())


# ---------------------------------------------------------------- dumps

def shadow_to_dict(shadow: ShadowTransport, threshold: float = 0.0) -> dict[str, Any]:
    slices = []
    for t in range(1, shadow.horizon + 1):
        row = shadow.slices[t - 1]
        idx = np.flatnonzero(row > threshold)
        slices.append({"t": t, "entries": [[int(shadow.src[e]), int(shadow.dst[e]), float(row[e])] for e in idx]})
    return {**shadow.summary(), "n_vertices": shadow.n_vertices, "slices": slices}


def save_shadow(shadow: ShadowTransport, path: str | Path, trace_path: str | Path | None = None) -> None:
    Path(path).write_text(json.dumps(shadow_to_dict(shadow), separators=(",", ":")) + "\n", encoding="utf-8")
    if trace_path is not None:
        save_trace(shadow, trace_path)


def save_trace(shadow: ShadowTransport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "residual"])
        for i, r in enumerate(shadow.trace, start=1):
            w.writerow([i, repr(float(r))])


def load_shadow(inst: Instance, path: str | Path) -> ShadowTransport:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    T = len(d["slices"])
    slices = np.zeros((T, inst.n_edges))
    index = inst.edge_index
    for s in d["slices"]:
        for i, j, x in s["entries"]:
            slices[int(s["t"]) - 1, index[(int(i), int(j))]] = x
    return ShadowTransport(slices, [], float(d["residual"]), int(d["sweeps"]), bool(d["converged"]),
                           float(d["epsilon"]), bool(d["stabilized"]), float(d["damping"]),
                           inst.src, inst.dst, inst.n_vertices)


# ---------------------------------------------------------------- KL witnesses

def _kl(p: np.ndarray, q: np.ndarray) -> float:
    p, q = np.asarray(p, float).ravel(), np.asarray(q, float).ravel()
    m = p > 0
    if np.any(q[m] <= 0):
        return math.inf
    return float(np.sum(p[m] * (np.log(p[m]) - np.log(q[m]))))


def path_tensor(initial: np.ndarray, transitions: list[np.ndarray]) -> np.ndarray:
    """Joint law of a Markov chain: ``initial[i0] * prod_t transitions[t][i_{t-1}, i_t]``."""
    P = np.asarray(initial, float)
    for M in transitions:
        P = P[..., :, None] * np.asarray(M, float)
    return P


def _chain(slices: list[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Initial law and row-normalized transitions of a sequence of joint slices."""
    init = slices[0].sum(axis=1)
    trans = []
    for S in slices:
        r = S.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            trans.append(np.where(r > 0, S / np.where(r > 0, r, 1.0), 0.0))
    return init, trans


def kl_decomposition_check(p_slices: list[np.ndarray], g_slices: list[np.ndarray]) -> tuple[float, float]:
    """KL between two Markov path laws, by full tensor vs by slice decomposition.

    Each argument lists the joint slices ``P_t`` (K x K, total mass 1, with
    consecutive slices glued).  The left side materializes both ``K^(T+1)``
    path tensors; the right side is
    ``sum_t KL(P_t | G_t) - sum_{t=1}^{T-1} KL(q_t | g_t)`` with ``q_t`` the
    intermediate marginals.
    """
    K = p_slices[0].shape[0]
    T = len(p_slices)
    if K ** (T + 1) > 10**4:
        raise TensorTooLarge(f"K^(T+1) = {K ** (T + 1)} entries exceeds 10^4")
    p0, pt = _chain(p_slices)
    g0, gt = _chain(g_slices)
    lhs = _kl(path_tensor(p0, pt), path_tensor(g0, gt))
    rhs = sum(_kl(P, G) for P, G in zip(p_slices, g_slices))
    for t in range(T - 1):
        rhs -= _kl(p_slices[t].sum(axis=0), g_slices[t].sum(axis=0))
    return lhs, rhs


def random_markov_slices(rng: np.random.Generator, K: int, T: int) -> list[np.ndarray]:
    """Glued joint slices of a random positive Markov chain."""
    q = rng.dirichlet(np.ones(K))
    out = []
    for _ in range(T):
        M = rng.dirichlet(np.ones(K), size=K)
        S = q[:, None] * M
        out.append(S)
        q = S.sum(axis=0)
    return out


def gibbs_chain_slices(kernel: GibbsKernel) -> list[np.ndarray]:
    """Glued joint slices of the Markov chain driven by the kernel's transitions."""
    K = kernel.n_vertices
    trans = []
    for t in range(1, kernel.horizon + 1):
        D = kernel.dense(t)
        r = D.sum(axis=1, keepdims=True)
        trans.append(np.where(r > 0, D / np.where(r > 0, r, 1.0), 0.0))
    q = np.full(K, 1.0 / K)
    out = []
    for M in trans:
        S = q[:, None] * M
        out.append(S)
        q = S.sum(axis=0)
    return out


def kl_gibbs_identity_check(pi: np.ndarray, costs: np.ndarray, epsilon: float, N: float,
                            kernel_slice: np.ndarray | None = None) -> tuple[float, float]:
    """``KL(Pi / N | G)`` directly and through the cost/entropy expansion.

    ``pi``, ``costs`` (and ``kernel_slice``, if given) are per-edge arrays of
    one slice.  The kernel is ``exp(-c/eps) / z`` unless supplied.
    """
    pi = np.asarray(pi, float)
    c = np.asarray(costs, float)
    if np.any(pi < 0):
        raise SupportMismatch("negative transport entry")
    logits = -c / epsilon
    log_z = float(logsumexp(logits))
    if kernel_slice is None:
        log_g = logits - log_z
    else:
        with np.errstate(divide="ignore"):
            log_g = np.log(np.asarray(kernel_slice, float))
    if np.any(pi[~np.isfinite(log_g)] > 0):
        raise SupportMismatch("transport has mass where the kernel is zero")
    p = pi / N
    m = p > 0
    lhs = float(np.sum(p[m] * (np.log(p[m]) - log_g[m])))
    rhs = (float(np.sum(pi[m] * np.log(pi[m]))) / N + float(np.sum(pi * c)) / (N * epsilon)
           + math.log(1.0 / N) + log_z)
    return lhs, rhs


__all__ = [
    "GibbsKernel", "ScalingState", "ShadowTransport", "SinkhornMAPF", "gibbs_kernel", "run", "stalled",
    "kl_decomposition_check", "kl_gibbs_identity_check", "path_tensor", "random_markov_slices",
    "gibbs_chain_slices", "save_shadow", "save_trace", "load_shadow", "shadow_to_dict",
]

"""Finite-horizon numerics for linear cocycles over explicit maps.

Trace convention: a :class:`CocycleTrace` holds points ``q_{-B}, ..., q_T``
and matrices ``A_k`` mapping the fiber at ``points[k]`` to the fiber at
``points[k + 1]``.  ``origin`` is the array index of ``q_0``.  Steps before
the origin are used by backward (past-determined) quantities, steps after it
by forward ones.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import exact
from . import polynomial as P
from .errors import NumericalFailure, SmallDivisor, UnresolvedFlag

CAT = ((2, 1), (1, 1))
CAT_EXPONENT = math.log((3 + math.sqrt(5)) / 2)


# -- systems ----------------------------------------------------------------

@dataclass(frozen=True)
class SystemDef:
    """A map with a cocycle over it.

    kind ``"toral"``: ``q -> M q mod 1`` with integer ``M``, ``|det M| = 1``.
    kind ``"polynomial"`` / ``"jet"``: ``q -> F(q)`` with rational polynomial
    components (a jet is a polynomial map read at its fixed point 0).
    The cocycle is the derivative unless ``cocycle`` names a twisted one.
    """

    kind: str
    dim: int
    matrix: Optional[Tuple[Tuple[int, ...], ...]] = None
    comps: Optional[Tuple[Dict[Tuple[int, ...], Fraction], ...]] = None
    cocycle: Optional[str] = None
    params: Tuple[Tuple[str, float], ...] = ()
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("toral", "polynomial", "jet"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        if self.kind == "toral":
            if self.matrix is None or len(self.matrix) != self.dim or any(len(r) != self.dim for r in self.matrix):
                raise ValueError("toral system needs a square integer matrix")
            if any(int(x) != x for r in self.matrix for x in r):
                raise ValueError("toral matrix must be integer")
            if abs(exact.det([[Fraction(x) for x in r] for r in self.matrix])) != 1:
                raise ValueError("toral automorphism needs |det| = 1")
        else:
            if self.comps is None or len(self.comps) != self.dim:
                raise ValueError("polynomial system needs one component per coordinate")
        if self.cocycle not in (None, "derivative", "twisted"):
            raise ValueError(f"unknown cocycle {self.cocycle!r}")

    @property
    def invertible(self) -> bool:
        return self.kind == "toral"

    def param(self, key, default):
        return dict(self.params).get(key, default)

    # maps
    def step(self, q):
        if self.kind == "toral":
            return tuple(sum(a * x for a, x in zip(row, q)) % 1 for row in self.matrix)
        return tuple(P.evaluate(c, q) if c else 0 * q[0] for c in self.comps)

    def step_inverse(self, q):
        if self.kind != "toral":
            raise NumericalFailure("inverse map only available for toral automorphisms")
        inv = exact.inverse([[Fraction(x) for x in r] for r in self.matrix])
        return tuple(sum(a * x for a, x in zip(row, q)) % 1 for row in inv)

    def derivative(self, q) -> np.ndarray:
        if self.kind == "toral":
            return np.array(self.matrix, dtype=float)
        qf = [float(x) for x in q]
        return np.array([[float(P.evaluate(P.derivative(c, j), qf)) if c else 0.0 for j in range(self.dim)]
                         for c in self.comps])

    def cocycle_matrix(self, q) -> np.ndarray:
        if self.cocycle == "twisted":
            return twisted_matrix(q, self)
        return self.derivative(q)

    def linear_part(self) -> List[List[Fraction]]:
        if self.kind == "toral":
            return [[Fraction(x) for x in r] for r in self.matrix]
        return [[Fraction(c.get(P.unit_exps(j, self.dim), 0)) for j in range(self.dim)] for c in self.comps]


def cat_map() -> SystemDef:
    return SystemDef("toral", 2, CAT, name="cat")


def twisted_cat(kappa: float = 0.3, beta: float = 0.5, shift: float = 0.0) -> SystemDef:
    """Upper-triangular cocycle over the cat map with smooth diagonal potentials."""
    return SystemDef("toral", 2, CAT, cocycle="twisted",
                     params=(("kappa", kappa), ("beta", beta), ("shift", shift)), name="twisted_cat")


def twisted_potentials(q, sys: SystemDef) -> Tuple[float, float]:
    k = sys.param("kappa", 0.3)
    s = sys.param("shift", 0.0)
    q1, q2 = float(q[0]), float(q[1])
    a = 1.0 + s + k * math.sin(2 * math.pi * q1)
    b = -1.0 + s + k * math.cos(2 * math.pi * (q1 + q2))
    return a, b


def twisted_matrix(q, sys: SystemDef) -> np.ndarray:
    a, b = twisted_potentials(q, sys)
    beta = sys.param("beta", 0.5)
    return np.array([[math.exp(a), beta * math.sin(2 * math.pi * float(q[1]))], [0.0, math.exp(b)]])


def polynomial_system(comps, name: str = "poly", kind: str = "polynomial") -> SystemDef:
    comps = tuple({tuple(e): Fraction(c) for e, c in comp.items()} for comp in comps)
    return SystemDef(kind, len(comps), comps=comps, name=name)


# -- traces ------------------------------------------------------------------

@dataclass
class CocycleTrace:
    points: np.ndarray      # (N + 1, d)
    matrices: np.ndarray    # (N, k, k)
    origin: int = 0
    precision: str = "double"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.matrices = np.asarray(self.matrices, dtype=float)
        if self.matrices.ndim != 3 or self.matrices.shape[1] != self.matrices.shape[2]:
            raise ValueError("matrices must have shape (T, k, k)")
        if len(self.matrices) < 1:
            raise ValueError("a trace needs at least one step")
        if self.points.ndim != 2 or len(self.points) != len(self.matrices) + 1:
            raise ValueError("need exactly one more point than matrices")
        if not 0 <= self.origin < len(self.points):
            raise ValueError("origin index out of range")

    @property
    def T(self) -> int:
        return len(self.matrices) - self.origin

    @property
    def fiber_dim(self) -> int:
        return self.matrices.shape[1]

    def forward(self) -> np.ndarray:
        return self.matrices[self.origin:]

    def backward(self) -> np.ndarray:
        return self.matrices[: self.origin]

    def shifted(self, k: int) -> "CocycleTrace":
        return CocycleTrace(self.points, self.matrices, self.origin + k, self.precision)

    def to_csv(self) -> str:
        d = self.points.shape[1]
        k = self.fiber_dim
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step"] + [f"q{i + 1}" for i in range(d)] + [f"a{i + 1}{j + 1}" for i in range(k) for j in range(k)])
        for n in range(len(self.points)):
            row = [n - self.origin] + [repr(float(x)) for x in self.points[n]]
            if n < len(self.matrices):
                row += [repr(float(x)) for x in self.matrices[n].ravel()]
            else:
                row += [""] * (k * k)
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, precision: str = "double") -> "CocycleTrace":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if not header or header[0] != "step":
            raise ValueError("trace CSV must start with a 'step' column")
        d = sum(1 for h in header if h.startswith("q"))
        kk = len(header) - 1 - d
        k = int(round(math.sqrt(kk)))
        if k * k != kk:
            raise ValueError("matrix columns are not a square count")
        steps = [int(r[0]) for r in body]
        if steps != list(range(steps[0], steps[0] + len(steps))):
            raise ValueError("steps must be consecutive")
        pts = np.array([[float(x) for x in r[1:1 + d]] for r in body])
        mats = np.array([[float(x) for x in r[1 + d:]] for r in body[:-1]]).reshape(-1, k, k)
        if any(x != "" for x in body[-1][1 + d:]):
            raise ValueError("last row must carry only the final point")
        return cls(pts, mats, origin=-steps[0], precision=precision)


def make_trace(sys: SystemDef, q0, T: int, back: int = 0, precision: str = "double") -> CocycleTrace:
    """Orbit of ``q0`` from step ``-back`` to ``T`` with the system's cocycle.

    Toral orbits are iterated exactly on rational points (the denominator is
    invariant under an integer matrix mod 1), so long traces do not drift.
    """
    if T < 1:
        raise ValueError("horizon must be >= 1")
    if sys.kind == "toral":
        q = tuple(Fraction(str(x)) if isinstance(x, float) else Fraction(x) for x in q0)
    else:
        q = tuple(float(x) for x in q0)
    pts = [q]
    for _ in range(back):
        pts.insert(0, sys.step_inverse(pts[0]))
    for _ in range(T):
        pts.append(sys.step(pts[-1]))
    mats = [sys.cocycle_matrix(p) for p in pts[:-1]]
    return CocycleTrace(np.array([[float(x) for x in p] for p in pts]), np.array(mats), origin=back,
                        precision=precision)


def constant_trace(A, T: int, back: int = 0) -> CocycleTrace:
    A = np.asarray(A, dtype=float)
    return CocycleTrace(np.zeros((T + back + 1, 1)), np.repeat(A[None], T + back, axis=0), origin=back)


# -- Lyapunov exponents ---------------------------------------------------------

def _qr_pos(Z):
    Q, R = np.linalg.qr(Z)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s, (R.T * s).T


def _mp_qr(Z, mp):
    """Modified Gram-Schmidt in mpmath (columns), returns Q, diag(R)."""
    n = Z.rows
    cols = [Z.column(j) for j in range(n)]
    qs, diag = [], []
    for j in range(n):
        v = cols[j]
        for q in qs:
            v = v - (q.T * v)[0] * q
        r = mp.norm(v)
        if r == 0:
            raise NumericalFailure("singular step matrix")
        qs.append(v / r)
        diag.append(r)
    Q = mp.matrix(n, n)
    for j, q in enumerate(qs):
        for i in range(n):
            Q[i, j] = q[i]
    return Q, diag


def lyapunov_qr(trace: CocycleTrace, burn_in: Optional[int] = None, precision: Optional[str] = None,
                return_history: bool = False):
    """Exponents from the forward QR recursion ``A_k Q_k = Q_{k+1} R_k``.

    The first ``burn_in`` steps (default ``T // 10``) only rotate ``Q`` into
    the Oseledets frame; exponents average ``log |R_kk|`` over the rest.
    """
    mats = trace.forward()
    T = len(mats)
    burn = T // 10 if burn_in is None else int(burn_in)
    if not 0 <= burn < T:
        raise ValueError("burn-in must leave at least one step")
    k = trace.fiber_dim
    precision = precision or trace.precision
    sums = np.zeros(k)
    hist = []
    if precision == "extended":
        import mpmath
        mp = mpmath.mp
        old = mp.dps
        mp.dps = 40
        try:
            Q = mp.eye(k)
            acc = [mp.mpf(0)] * k
            for n, A in enumerate(mats):
                if abs(np.linalg.det(A)) == 0:
                    raise NumericalFailure(f"singular step matrix at step {n}")
                Z = mp.matrix(A.tolist()) * Q
                Q, d = _mp_qr(Z, mp)
                if n >= burn:
                    acc = [a + mp.log(x) for a, x in zip(acc, d)]
            sums = np.array([float(a) for a in acc])
        finally:
            mp.dps = old
    else:
        Q = np.eye(k)
        for n, A in enumerate(mats):
            Q, R = _qr_pos(A @ Q)
            d = np.abs(np.diag(R))
            if np.any(d == 0):
                raise NumericalFailure(f"singular step matrix at step {n}")
            if n >= burn:
                sums += np.log(d)
                if return_history:
                    hist.append(sums / (n - burn + 1))
    ex = sums / (T - burn)
    out = np.sort(ex)[::-1]
    if return_history:
        return out, np.array(hist)
    return out


def log_det_average(trace: CocycleTrace, burn_in: Optional[int] = None) -> float:
    mats = trace.forward()
    burn = len(mats) // 10 if burn_in is None else burn_in
    return float(np.mean([math.log(abs(np.linalg.det(A))) for A in mats[burn:]]))


def snap_exponents(exponents: Sequence[float], profile: Sequence, tol: float) -> List[Fraction]:
    """Match estimates to a declared rational profile (same order) or refuse."""
    if len(exponents) != len(profile):
        raise NumericalFailure("exponent count does not match the declared profile")
    out = []
    for x, p in zip(exponents, profile):
        p = Fraction(p)
        if abs(float(x) - float(p)) > tol:
            raise NumericalFailure(f"exponent {x} is not within {tol} of declared weight {p}")
        out.append(p)
    return out


# -- Oseledets flags ---------------------------------------------------------------

def group_levels(exponents: Sequence[float], threshold: float) -> Tuple[List[List[int]], List[float]]:
    """Group sorted exponents into levels; returns index groups and the gaps between them."""
    ex = list(exponents)
    groups = [[0]]
    gaps = []
    for i in range(1, len(ex)):
        g = ex[i - 1] - ex[i]
        if g >= threshold:
            groups.append([i])
            gaps.append(g)
        else:
            groups[-1].append(i)
    return groups, gaps


def _start_frame(k: int) -> np.ndarray:
    # fixed generic orthogonal start so no direction is aligned with a flag by accident
    rng = np.random.default_rng(12345)
    Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    return Q


def forward_frames(mats: np.ndarray) -> List[np.ndarray]:
    """Orthonormal frames at ``q_0..q_t`` whose leading columns span the most contracting directions.

    Backward QR sweep with inverses: starting at ``q_t`` and pulling back,
    the frame at ``q_k`` has its first ``j`` columns close to the ``j``
    most contracting Oseledets directions of the future orbit.  Accuracy
    at ``q_k`` improves with the remaining horizon ``t - k``.
    """
    t = len(mats)
    k = mats.shape[1]
    Q = _start_frame(k)
    frames = [None] * (t + 1)
    frames[t] = Q
    for n in range(t - 1, -1, -1):
        Q, _ = _qr_pos(np.linalg.solve(mats[n], Q))
        frames[n] = Q
    return frames


def backward_frames(mats: np.ndarray) -> List[np.ndarray]:
    """Frames at ``q_0..q_t`` whose leading columns span the most expanding directions of the past."""
    k = mats.shape[1]
    Q = _start_frame(k)
    frames = [Q]
    for A in mats:
        Q, _ = _qr_pos(A @ Q)
        frames.append(Q)
    return frames


@dataclass
class FlagResult:
    exponents: List[float]
    levels: List[List[int]]
    gaps: List[float]
    unresolved: List[float]
    forward: List[np.ndarray]     # forward[i] basis of E^{<= lambda_i}, i over levels (top first)
    backward: List[np.ndarray]    # backward[i] basis of E^{>= lambda_i}
    conditioning: List[float]
    threshold: float

    @property
    def resolved(self) -> bool:
        return not self.unresolved

    def to_json(self) -> dict:
        return {
            "exponents": [float(x) for x in self.exponents],
            "levels": self.levels,
            "gaps": [float(g) for g in self.gaps],
            "unresolved_gaps": [float(g) for g in self.unresolved],
            "threshold": self.threshold,
            "forward": [B.T.tolist() for B in self.forward],
            "backward": [B.T.tolist() for B in self.backward],
            "conditioning": [float(c) for c in self.conditioning],
        }


def oseledets_flags(trace: CocycleTrace, t: Optional[int] = None, threshold: Optional[float] = None,
                    exponents: Optional[Sequence[float]] = None) -> FlagResult:
    """Forward flag ``E^{<= lambda_i}(q_0)`` and backward flag ``E^{>= lambda_i}(q_0)``.

    Levels whose gap to the next is below ``threshold`` (default ``10 / t``)
    are merged and listed in ``unresolved``; no flag is split across them.
    The backward flag needs ``t`` steps before the origin; if the trace has
    fewer it is computed from what is there.
    """
    fwd = trace.forward()
    t = len(fwd) if t is None else int(t)
    if not 1 <= t <= len(fwd):
        raise ValueError("horizon must satisfy 1 <= t <= T")
    threshold = 10.0 / t if threshold is None else float(threshold)
    if exponents is None:
        exponents = lyapunov_qr(CocycleTrace(trace.points[trace.origin:trace.origin + t + 1], fwd[:t]))
    exponents = list(exponents)
    groups, gaps = group_levels(exponents, threshold)
    unresolved = [exponents[i - 1] - exponents[i] for i in range(1, len(exponents))
                  if exponents[i - 1] - exponents[i] < threshold]
    k = trace.fiber_dim
    Qf = forward_frames(fwd[:t])[0]
    past = trace.backward()[-t:] if trace.origin else fwd[:0]
    Qb = backward_frames(past)[-1] if len(past) else None
    forward, backward, cond = [], [], []
    sizes = [len(g) for g in groups]
    for i in range(len(groups)):
        # E^{<= lambda_i}: the k - (dims above level i) most contracting directions
        above = sum(sizes[:i])
        forward.append(Qf[:, : k - above])
        if Qb is not None:
            backward.append(Qb[:, : above + sizes[i]])
    for i, g in enumerate(gaps):
        # angle conditioning of the split: exponentially small error ~ e^{-gap * t}
        cond.append(math.exp(-g * t))
    return FlagResult(exponents, groups, gaps, unresolved, forward, backward, cond, threshold)


def subspace_angle(A: np.ndarray, B: np.ndarray) -> float:
    """Largest principal angle between column spans of equal dimension."""
    qa, _ = np.linalg.qr(np.atleast_2d(A.T).T if A.ndim == 1 else A)
    qb, _ = np.linalg.qr(np.atleast_2d(B.T).T if B.ndim == 1 else B)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(math.acos(min(1.0, max(0.0, s.min()))))


def _intersect(A: np.ndarray, B: np.ndarray, m: int) -> np.ndarray:
    """Orthonormal basis of the ``m``-dimensional (approximate) intersection of two spans."""
    qa, _ = np.linalg.qr(A)
    qb, _ = np.linalg.qr(B)
    # directions in span(A) closest to span(B)
    u, s, vt = np.linalg.svd(qa.T @ qb)
    return qa @ u[:, :m]


# -- adapted norms --------------------------------------------------------------------

@dataclass
class AdaptedNorm:
    """Block-orthogonal epsilon-adapted norm along a trace window.

    ``bases[n][i]`` spans the i-th Oseledets block at window point ``n`` and
    ``grams[n][i]`` is the quadratic form on it in those coordinates:

        G_i(n) = B^T B + e^{2(lambda_i - eps)} C^{-T} G_i(n-1) C^{-1},

    the unit-step sum ``sum_s ||g_{-s} v||^2 e^{2(lambda_i - eps) s}`` back to
    the start of the trace.  The full norm is ``m * sum_i ||v_i||_i^2`` with
    ``m`` the number of blocks, which dominates the ambient norm.
    """

    eps: float
    exponents: List[float]
    blocks: List[List[int]]
    start: int
    bases: List[List[np.ndarray]] = field(repr=False)
    grams: List[List[np.ndarray]] = field(repr=False)
    cocycle: List[List[np.ndarray]] = field(repr=False)

    @property
    def nblocks(self) -> int:
        return len(self.blocks)

    def __len__(self):
        return len(self.bases)

    def block_exponent(self, i: int) -> float:
        return float(np.mean([self.exponents[j] for j in self.blocks[i]]))

    def components(self, n: int, v: np.ndarray) -> List[np.ndarray]:
        """Block coordinates of ``v`` at window point ``n``."""
        B = np.hstack(self.bases[n])
        c = np.linalg.solve(B, v)
        out, a = [], 0
        for Bi in self.bases[n]:
            out.append(c[a:a + Bi.shape[1]])
            a += Bi.shape[1]
        return out

    def block_norm(self, n: int, i: int, c: np.ndarray) -> float:
        return float(math.sqrt(c @ self.grams[n][i] @ c))

    def form(self, n: int) -> np.ndarray:
        B = np.hstack(self.bases[n])
        Binv = np.linalg.inv(B)
        G = np.zeros_like(B)
        a = 0
        for i, Bi in enumerate(self.bases[n]):
            m = Bi.shape[1]
            G[a:a + m, a:a + m] = self.grams[n][i]
            a += m
        return self.nblocks * Binv.T @ G @ Binv

    def norm(self, n: int, v: np.ndarray) -> float:
        return float(math.sqrt(v @ self.form(n) @ v))

    def envelope(self, n: int) -> float:
        """``sup ||v||_eps / ||v||`` at window point ``n``."""
        return float(math.sqrt(np.linalg.eigvalsh(self.form(n)).max()))

    def pull_block(self, n: int, i: int, c: np.ndarray, t: int = 1) -> np.ndarray:
        """Block coordinates of ``g_{-t} v`` at point ``n - t`` for ``v = B c`` at point ``n``."""
        for s in range(t):
            c = np.linalg.solve(self.cocycle[n - s][i], c)
        return c


def oseledets_splitting(trace: CocycleTrace, groups: List[List[int]], k0: int, k1: int) -> List[List[np.ndarray]]:
    """Block bases of the Oseledets splitting at array indices ``k0..k1``.

    Forward flags come from a backward sweep over the whole future of the
    trace, backward flags from a forward sweep over its whole past; the
    block is their intersection.
    """
    mats = trace.matrices
    k = trace.fiber_dim
    ff = forward_frames(mats)
    bf = backward_frames(mats)
    sizes = [len(g) for g in groups]
    out = []
    for n in range(k0, k1 + 1):
        blocks = []
        for i, m in enumerate(sizes):
            above = sum(sizes[:i])
            E_le = ff[n][:, : k - above]
            E_ge = bf[n][:, : above + m]
            blocks.append(_intersect(E_ge, E_le, m))
        out.append(blocks)
    return out


def adapted_norm(trace: CocycleTrace, eps: float, flags: Optional[FlagResult] = None,
                 burn_in: Optional[int] = None, exponents: Optional[Sequence[float]] = None) -> AdaptedNorm:
    """epsilon-adapted norm along the trace.

    The Oseledets splitting is estimated on the whole trace; the window
    drops ``burn_in`` points (default ``T // 10``, at least 20) at the
    far end where the forward flags have not converged.  Grams are
    accumulated from the start of the trace, so they are exact discretized
    sums and the one-step contraction inequality holds exactly.
    """
    n_steps = len(trace.matrices)
    if flags is None:
        if exponents is None:
            exponents = lyapunov_qr(CocycleTrace(trace.points, trace.matrices))
        thr = 10.0 / n_steps
        levels, gaps = group_levels(exponents, thr)
        unresolved = [exponents[i - 1] - exponents[i] for i in range(1, len(exponents))
                      if exponents[i - 1] - exponents[i] < thr]
        flags = FlagResult(list(exponents), levels, gaps, unresolved, [], [], [], thr)
    if flags.unresolved:
        raise UnresolvedFlag("adapted norm needs resolved flags; some exponent gaps are below threshold")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if flags.gaps and eps >= min(flags.gaps) / 2:
        raise ValueError(f"eps={eps} is not below half the smallest exponent gap {min(flags.gaps):.4g}")
    groups = flags.levels
    ex = list(flags.exponents)
    burn = max(20, n_steps // 10) if burn_in is None else int(burn_in)
    k1 = n_steps - burn
    if k1 < 1:
        raise ValueError("trace too short for the requested burn-in")
    split = oseledets_splitting(trace, groups, 0, k1)
    lam = [float(np.mean([ex[j] for j in g])) for g in groups]
    grams, cocyc_blocks = [], []
    G = [Bi.T @ Bi for Bi in split[0]]
    grams.append(G)
    cocyc_blocks.append([None] * len(groups))
    for n in range(1, k1 + 1):
        A = trace.matrices[n - 1]
        newG, Cs = [], []
        for i in range(len(groups)):
            Bp, Bn = split[n - 1][i], split[n][i]
            C = np.linalg.lstsq(Bn, A @ Bp, rcond=None)[0]
            Ci = np.linalg.inv(C)
            newG.append(Bn.T @ Bn + math.exp(2 * (lam[i] - eps)) * Ci.T @ G[i] @ Ci)
            Cs.append(C)
        G = newG
        grams.append(G)
        cocyc_blocks.append(Cs)
    return AdaptedNorm(eps, ex, groups, 0, split, grams, cocyc_blocks)


def contraction_check(an: AdaptedNorm, vectors: np.ndarray, rtol: float = 1e-9) -> dict:
    """Check ``||g_{-1} v_i||_{n-1} <= e^{-(lambda_i - eps)} ||v_i||_n`` blockwise.

    ``vectors`` has shape ``(m, k)``; every vector is split into Oseledets
    blocks at every window point ``n >= 1``.  Returns the worst ratio
    ``lhs / rhs`` and the number of violations beyond ``rtol``.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    worst, bad, checked = 0.0, 0, 0
    for n in range(1, len(an)):
        C = np.linalg.solve(np.hstack(an.bases[n]), V.T)
        a = 0
        for i, Bi in enumerate(an.bases[n]):
            m = Bi.shape[1]
            c = C[a:a + m]
            a += m
            p = np.linalg.solve(an.cocycle[n][i], c)
            rhs = math.exp(-(an.block_exponent(i) - an.eps)) * np.sqrt(np.einsum("ij,ik,kj->j", c, an.grams[n][i], c))
            lhs = np.sqrt(np.einsum("ij,ik,kj->j", p, an.grams[n - 1][i], p))
            ok = rhs > 0
            r = lhs[ok] / rhs[ok]
            if r.size:
                worst = max(worst, float(r.max()))
                bad += int((r > 1 + rtol).sum())
            checked += int(ok.sum())
    return {"worst_ratio": worst, "violations": bad, "checked": checked}


def geometric_closed_form(eps: float, horizon: Optional[int] = None) -> float:
    """``sum_{s=0}^{H} e^{-2 eps s}`` (``H = inf`` if ``horizon`` is None)."""
    q = math.exp(-2 * eps)
    if horizon is None:
        return 1.0 / (1.0 - q)
    return (1.0 - q ** (horizon + 1)) / (1.0 - q)


# -- temperedness -----------------------------------------------------------------------

@dataclass
class TemperedReport:
    tail_slope: float
    envelope_eps: float
    eps: float
    passes: bool
    n: int

    def to_json(self) -> dict:
        return {"tail_slope": self.tail_slope, "envelope_eps": self.envelope_eps, "eps": self.eps,
                "passes": self.passes, "samples": self.n}


def check_tempered(samples: Sequence[float], eps: float, times: Optional[Sequence[float]] = None) -> TemperedReport:
    """Tail growth rate of ``a(g_t q)`` along an orbit.

    ``tail_slope`` is ``max |a(t) - a(t_0)| / |t - t_0|`` over the second
    half of the samples, ``t_0`` the first sample time.  ``envelope_eps`` is
    the smallest ``eps`` for which ``B_0 e^{eps |t|}`` dominates
    ``e^{|a(t)|}`` everywhere, with ``B_0`` the largest value over the first
    tenth.  Passes iff ``tail_slope <= eps``.
    """
    raw = np.asarray(samples, dtype=float)
    a = np.abs(raw)
    if a.size < 10:
        raise ValueError("need at least 10 samples")
    t = np.arange(1, a.size + 1, dtype=float) if times is None else np.abs(np.asarray(times, dtype=float))
    half = a.size // 2
    dt = np.abs(t[half:] - t[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(dt > 0, np.abs(raw[half:] - raw[0]) / dt, 0.0)
    tail_slope = float(tail.max())
    logB0 = float(a[: max(1, a.size // 10)].max())
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(t > 0, (a - logB0) / t, 0.0)
    env = float(max(0.0, need.max()))
    return TemperedReport(tail_slope, env, float(eps), tail_slope <= eps, int(a.size))


# -- local stable manifolds -------------------------------------------------------------------

@dataclass
class StableManifoldJet:
    degree: int
    stable_dim: int
    coeffs: List[Dict[Tuple[int, ...], object]]   # h components (unstable coordinates) in stable variables
    mode: str
    frame: Optional[np.ndarray] = None             # columns: stable then unstable directions (float mode)
    residual: float = 0.0

    def to_json(self) -> dict:
        def enc(c):
            return str(c) if isinstance(c, Fraction) else float(c)
        return {
            "degree": self.degree,
            "mode": self.mode,
            "stable_dim": self.stable_dim,
            "h": [[{"exps": list(e), "coeff": enc(c)} for e, c in sorted(comp.items())] for comp in self.coeffs],
            "frame": None if self.frame is None else self.frame.tolist(),
            "residual": self.residual,
        }


def split_linear(L, rational: bool):
    """Return (stable indices, unstable indices) for a block-diagonal linear part."""
    n = len(L)
    idx_s, idx_u = [], []
    for i in range(n):
        d = L[i][i]
        (idx_s if abs(d) < 1 else idx_u).append(i)
    for i in idx_s:
        for j in idx_u:
            if L[i][j] or L[j][i]:
                raise NumericalFailure("linear part must not couple stable and unstable coordinates; "
                                       "use float mode, which diagonalizes first")
    return idx_s, idx_u


def local_stable_manifold(sys: SystemDef, degree: int, mode: str = "rational", tol: float = 1e-9) -> StableManifoldJet:
    """Taylor jet of the graph ``y = h(x)`` of the local stable manifold at the fixed point 0.

    Solves ``A_u h_m(x) - h_m(A_s x) = [h_{<m}(f_s(x, h(x))) - f_u(x, h_{<m}(x))]_m``
    degree by degree.  ``mode="rational"`` works exactly and needs the
    linear part to have the stable and unstable coordinates already
    separated; ``mode="float"`` diagonalizes the linear part first.
    """
    if degree < 2:
        raise ValueError("degree must be at least 2")
    n = sys.dim
    if sys.kind == "toral":
        comps = [{P.unit_exps(j, n): Fraction(a) for j, a in enumerate(row) if a} for row in sys.matrix]
    else:
        comps = [dict(c) for c in sys.comps]
        if any(P.zero_exps(n) in c for c in comps):
            raise NumericalFailure("the origin is not a fixed point")
    if mode == "rational":
        L = [[c.get(P.unit_exps(j, n), Fraction(0)) for j in range(n)] for c in comps]
        s_idx, u_idx = split_linear(L, True)
        frame = None
        g = comps
        zero = Fraction(0)
    elif mode == "float":
        L = np.array([[float(c.get(P.unit_exps(j, n), 0)) for j in range(n)] for c in comps])
        w, V = np.linalg.eig(L)
        if np.any(np.abs(w.imag) > 1e-12):
            raise NumericalFailure("complex eigenvalues are not supported in float mode")
        w, V = w.real, V.real
        order = np.argsort(np.abs(w))
        w, V = w[order], V[:, order]
        V = V / np.linalg.norm(V, axis=0)
        Vinv = np.linalg.inv(V)
        # g = V^{-1} f(V z)
        lin = [{P.unit_exps(j, n): float(V[i, j]) for j in range(n) if V[i, j] != 0} for i in range(n)]
        fz = [P.compose({e: float(c) for e, c in comp.items()}, lin, n) for comp in comps]
        g = []
        for i in range(n):
            acc = {}
            for j in range(n):
                if Vinv[i, j] != 0:
                    acc = P.add(acc, P.scale(fz[j], float(Vinv[i, j])))
            g.append({e: c for e, c in acc.items() if abs(c) > 1e-15})
        s_idx = [i for i in range(n) if abs(w[i]) < 1]
        u_idx = [i for i in range(n) if abs(w[i]) >= 1]
        frame = V
        zero = 0.0
        # clean the linear part to the exact diagonal
        for i in range(n):
            for j in range(n):
                e = P.unit_exps(j, n)
                if i == j:
                    g[i][e] = float(w[i])
                else:
                    g[i].pop(e, None)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    ns, nu = len(s_idx), len(u_idx)
    if ns == 0:
        raise NumericalFailure("fixed point has no stable directions")

    def restrict(p, h):
        """p(x, h(x)) as a polynomial in the stable variables, truncated at ``degree``."""
        subs = [None] * n
        for a, i in enumerate(s_idx):
            subs[i] = P.variable(a, ns, 1 if mode == "float" else Fraction(1))
        for b, i in enumerate(u_idx):
            subs[i] = h[b]
        return P.compose(p, subs, ns, max_degree=degree)

    As = [[g[i].get(P.unit_exps(j, n), zero) for j in s_idx] for i in s_idx]
    Au = [[g[i].get(P.unit_exps(j, n), zero) for j in u_idx] for i in u_idx]
    h: List[dict] = [{} for _ in range(nu)]
    for m in range(2, degree + 1):
        # right-hand side at degree m from the lower-order jet
        fs = [restrict(g[i], h) for i in s_idx]
        lhs_shift = [P.compose(hb, fs, ns, max_degree=m) for hb in h]
        fu = [restrict(g[i], h) for i in u_idx]
        rhs = [P.homogeneous_part(P.sub(a, b), m) for a, b in zip(lhs_shift, fu)]
        monos = list(P.monomials_of_degree(ns, m))
        # linear operator h_m -> Au h_m - h_m(As x) on coefficient vectors
        lin_s = [{P.unit_exps(j, ns): As[i][j] for j in range(ns) if As[i][j]} for i in range(ns)]
        cols = []
        for b in range(nu):
            for e in monos:
                basis_h = [dict() for _ in range(nu)]
                basis_h[b] = {e: 1 if mode == "float" else Fraction(1)}
                out = []
                for b2 in range(nu):
                    val = {}
                    for b3 in range(nu):
                        if Au[b2][b3] and basis_h[b3]:
                            val = P.add(val, P.scale(basis_h[b3], Au[b2][b3]))
                    comp = P.compose(basis_h[b2], lin_s, ns) if basis_h[b2] else {}
                    val = P.sub(val, comp)
                    out.extend(val.get(f, zero) for f in monos)
                cols.append(out)
        size = nu * len(monos)
        M = [[cols[c][r] for c in range(size)] for r in range(size)]
        rvec = [rhs[b].get(f, zero) for b in range(nu) for f in monos]
        diag_only = all(M[r][c] == 0 for r in range(size) for c in range(size) if r != c)
        if diag_only:
            sol = []
            for r in range(size):
                d = M[r][r]
                scale = max(1.0, abs(float(rvec[r])))
                if (mode == "rational" and d == 0) or (mode == "float" and abs(d) < tol * scale):
                    b, f = divmod(r, len(monos))
                    raise SmallDivisor(f"resonance at degree {m}, component {b}, monomial {monos[f]}: "
                                       f"divisor {d}", slot=(b, monos[f]), divisor=d)
                sol.append(rvec[r] / d)
        elif mode == "rational":
            try:
                sol = exact.solve(M, rvec)
            except ZeroDivisionError:
                raise SmallDivisor(f"homological operator singular at degree {m}", slot=(m,), divisor=0) from None
        else:
            Mf = np.array(M, dtype=float)
            smin = np.linalg.svd(Mf, compute_uv=False).min()
            if smin < tol:
                raise SmallDivisor(f"homological operator nearly singular at degree {m}", slot=(m,), divisor=smin)
            sol = list(np.linalg.solve(Mf, np.array(rvec, dtype=float)))
        for r, x in enumerate(sol):
            if x:
                b, f = divmod(r, len(monos))
                h[b][monos[f]] = x
    res = stable_manifold_residual(g, s_idx, u_idx, h, degree, mode)
    return StableManifoldJet(degree, ns, h, mode, frame, res)


def stable_manifold_residual(g, s_idx, u_idx, h, degree, mode) -> float:
    """Largest coefficient of degree <= ``degree`` in ``f_u(x, h(x)) - h(f_s(x, h(x)))``."""
    n = len(g)
    ns = len(s_idx)
    one = 1.0 if mode == "float" else Fraction(1)
    subs = [None] * n
    for a, i in enumerate(s_idx):
        subs[i] = P.variable(a, ns, one)
    for b, i in enumerate(u_idx):
        subs[i] = h[b]
    fs = [P.compose(g[i], subs, ns, max_degree=degree) for i in s_idx]
    fu = [P.compose(g[i], subs, ns, max_degree=degree) for i in u_idx]
    worst = 0.0
    for b in range(len(u_idx)):
        diff = P.sub(fu[b], P.compose(h[b], fs, ns, max_degree=degree))
        for c in diff.values():
            worst = max(worst, abs(float(c)))
    return worst


# -- leaf pairs for the cat map ------------------------------------------------------------

def cat_eigen() -> Tuple[float, float, np.ndarray, np.ndarray]:
    """``(mu_u, mu_s, v_u, v_s)`` for the cat matrix, unit eigenvectors."""
    r5 = math.sqrt(5)
    mu_u, mu_s = (3 + r5) / 2, (3 - r5) / 2
    v_u = np.array([1.0, (r5 - 1) / 2])
    v_s = np.array([1.0, -(1 + r5) / 2])
    return mu_u, mu_s, v_u / np.linalg.norm(v_u), v_s / np.linalg.norm(v_s)


def stable_leaf_pair(x0: Sequence, s: float, T: int) -> Tuple[np.ndarray, np.ndarray]:
    """Forward orbits of ``x`` and ``y = x + s v_s`` under the cat map, ``T + 1`` points each.

    ``x`` is iterated exactly in rationals; ``y_n = x_n + s mu_s^n v_s`` is
    written down in closed form, so the pair stays on one stable leaf.
    """
    _, mu_s, _, v_s = cat_eigen()
    x = tuple(Fraction(str(a)) if isinstance(a, float) else Fraction(a) for a in x0)
    xs = [x]
    sys = cat_map()
    for _ in range(T):
        xs.append(sys.step(xs[-1]))
    X = np.array([[float(a) for a in p] for p in xs])
    Y = np.array([(X[n] + s * mu_s ** n * v_s) % 1.0 for n in range(T + 1)])
    return X, Y


def cocycle_along(sys: SystemDef, points: np.ndarray) -> np.ndarray:
    return np.array([sys.cocycle_matrix(p) for p in points[:-1]])

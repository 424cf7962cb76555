"""Radial meshes for the truncated eigenvalue problem.

The continuum problem lives on all of space; the solver works on [0, R_max]
with R_max a multiple of the regime's feature radius (the balance radius
where drift cost and potential cost trade off, or a decay-based scale for
regimes without one).  Node spacing never shrinks outward and the ratio of
adjacent intervals stays within [1, 1.2]: a short geometric ramp resolves
the steep near-origin layer that a large beta*V(0) creates, a uniform core
covers [0, ~2 * feature radius], and a geometric tail reaches R_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import certificates
from .model import COMPACT_SUPPORT, ProblemSpec, build_coefficients

RATIO_CAP = 1.2
ORIGIN_RAMP_RATIO = 1.12


@dataclass(frozen=True)
class Grid:
    """Strictly increasing radii r_0 = 0 < ... < r_N = R_max."""

    nodes: np.ndarray
    kind: str  # "uniform" | "graded"
    R_max: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes[0] != 0.0:
            raise ValueError("grid must start at r = 0")
        h = np.diff(nodes)
        if np.any(h <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        ratios = h[1:] / h[:-1]
        if ratios.size and (ratios.min() < 1.0 - 1e-9 or ratios.max() > RATIO_CAP + 1e-9):
            raise ValueError(
                f"adjacent spacing ratio out of [1, {RATIO_CAP}]: "
                f"[{ratios.min():.6f}, {ratios.max():.6f}]"
            )

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.nodes.size - 1

    def descriptor(self) -> dict:
        return {"n": self.n, "R_max": float(self.R_max), "kind": self.kind}


@dataclass(frozen=True)
class GridOptions:
    n: int = 1024  # number of intervals
    rmax_mult: float = 4.0  # R_max as a multiple of the feature radius
    r_max: float | None = None  # explicit override of the truncation radius
    uniform: bool = False
    rmax_min: float | None = None  # default: 16 * R
    rmax_cap: float = 1e6
    core_fraction: float = 0.55  # share of intervals inside the concentration radius


def domain_scale(spec: ProblemSpec, beta: float) -> float:
    """Feature radius the truncation policy multiplies.

    Strong drift and the strict-gap moderate regime use the balance radius.
    The moderate plateau uses the radius where the potential cost stops
    dominating the 1/r geometry terms, (eta*beta)^(1/(eta-1)) for eta > 1.
    Weak drift (delta < 0) has no feature radius: the eigenvalue vanishes
    and the domain must simply be large enough that drift and potential
    costs at the boundary are negligible; the scale below targets ~1e-5.
    """
    b = max(beta, 1.0)
    ms = spec.m_star
    if spec.delta > 0:
        return certificates.balance_radius(spec, b)
    if spec.delta == 0.0:
        # the far-slope layer relaxes at rate ~rho for moderate drift; the
        # domain must bury it (8/rho per rmax_mult unit ~ e^-32 leakage)
        relax = 8.0 / spec.rho
        if spec.eta > 1.0 and spec.a < spec.d - 1.0 and spec.potential_kind != COMPACT_SUPPORT:
            return max(certificates.balance_radius(spec, b), relax)
        scale = max(spec.R, relax)
        if spec.potential_kind == COMPACT_SUPPORT and spec.R_prime is not None:
            # no potential beyond the support: the only far scale is the
            # slow sqrt(log beta) stand-off, covered by the relax floor
            return max(scale, 2.0 * spec.R_prime)
        if spec.eta > 1.0:
            scale = max(scale, (spec.eta * b) ** (1.0 / (spec.eta - 1.0)))
        # at the plateau the eigenvalue sits at the far-field balance point;
        # the slope-condition mismatch ~sqrt(2 beta) R^(-eta/2) biases lambda
        # by its square, so clear ~3e-6 at the base multiplier
        return max(scale, (2.0 * b * 3.3e5) ** (1.0 / spec.eta) / 4.0)
    # delta < 0: boundary cost (rho R^delta)^m*/m* + beta V(R) ~ tol at R_max;
    # normalized so that the default rmax_mult=4 hits the target radius
    tol = 1e-5
    r_drift = (ms * tol / spec.rho**ms) ** (1.0 / (spec.delta * ms))
    r_pot = (b / tol) ** (1.0 / spec.eta)
    return max(r_drift, r_pot, 4.0 * spec.R) / 4.0


def _origin_spacing(spec: ProblemSpec, beta: float, H: float) -> float:
    """Target first cell: a third of the near-origin gradient layer width."""
    if beta <= 0:
        return H
    v0 = float(build_coefficients(spec).potential(0.0))
    drive = beta * v0
    if drive <= 1.0:
        return H
    width = (spec.m * drive) ** (1.0 / spec.m) / drive
    return min(H, max(width / 3.0, 1e-7 * spec.R))


def _tail_ratio(H: float, n: int, length: float) -> float:
    """Solve H * sum_{j=1..n} q^j = length for q in (1, RATIO_CAP]."""

    def total(q):
        return H * q * (q**n - 1.0) / (q - 1.0)

    lo, hi = 1.0 + 1e-12, RATIO_CAP
    if total(hi) < length:
        raise ValueError("tail unreachable at ratio cap")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < length:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def build_grid(spec: ProblemSpec, beta: float, opts: GridOptions | None = None) -> Grid:
    """Build the solver mesh for (spec, beta) under the truncation policy."""
    opts = opts or GridOptions()
    if opts.n < 2:
        raise ValueError("grid needs at least 2 intervals")
    scale = domain_scale(spec, beta)
    if opts.r_max is not None:
        R_max = float(opts.r_max)
    else:
        rmax_min = opts.rmax_min if opts.rmax_min is not None else 16.0 * spec.R
        R_max = min(max(opts.rmax_mult * scale, rmax_min), opts.rmax_cap)
    if R_max <= spec.R:
        raise ValueError(
            f"truncation radius {R_max} does not clear the matching radius {spec.R}"
        )

    if opts.uniform:
        return Grid(nodes=np.linspace(0.0, R_max, opts.n + 1), kind="uniform", R_max=R_max)

    N = opts.n
    r_core = min(2.0 * scale, 0.5 * R_max)
    r_core = max(r_core, 2.0 * spec.R)
    n_core = max(int(opts.core_fraction * N), 8)

    for attempt in range(8):
        H = r_core / n_core
        h0 = _origin_spacing(spec, beta, H)
        if h0 >= H:
            kA = 0
            rampe = []
        else:
            kA = min(int(math.ceil(math.log(H / h0) / math.log(ORIGIN_RAMP_RATIO))), N // 4)
            rampe = [H * ORIGIN_RAMP_RATIO ** (i - kA) for i in range(kA)]
        lenA = sum(rampe)
        nB = max(n_core - kA, 1)
        nC = N - kA - nB
        body = lenA + nB * H
        if nC <= 0 or body >= R_max:
            # domain short relative to the core: uniform beyond the ramp
            nB = N - kA
            spacings = rampe + [H] * nB
            nodes = np.concatenate([[0.0], np.cumsum(spacings)])
            nodes *= R_max / nodes[-1]
            return Grid(nodes=nodes, kind="graded", R_max=R_max)
        tail_len = R_max - body
        if tail_len <= nC * H:
            # tail shorter than uniform continuation: absorb it uniformly
            nB = N - kA
            spacings = rampe + [H] * nB
            nodes = np.concatenate([[0.0], np.cumsum(spacings)])
            nodes *= R_max / nodes[-1]
            return Grid(nodes=nodes, kind="graded", R_max=R_max)
        try:
            q = _tail_ratio(H, nC, tail_len)
        except ValueError:
            # cap hit: hand intervals from the core to the tail and retry
            n_core = max(n_core // 2, 8)
            if attempt == 7:
                raise ValueError(
                    f"cannot reach R_max={R_max:.3g} with n={N} intervals "
                    f"under spacing ratio cap {RATIO_CAP}"
                )
            continue
        spacings = rampe + [H] * nB + [H * q**j for j in range(1, nC + 1)]
        nodes = np.concatenate([[0.0], np.cumsum(spacings)])
        nodes *= R_max / nodes[-1]
        return Grid(nodes=nodes, kind="graded", R_max=R_max)
    raise AssertionError("unreachable")


def refine(grid: Grid, factor: int = 2) -> Grid:
    """Split every interval `factor` ways (nested for uniform grids)."""
    nodes = grid.nodes
    pieces = [nodes[:1]]
    for i in range(nodes.size - 1):
        seg = np.linspace(nodes[i], nodes[i + 1], factor + 1)[1:]
        pieces.append(seg)
    return Grid(nodes=np.concatenate(pieces), kind=grid.kind, R_max=grid.R_max)

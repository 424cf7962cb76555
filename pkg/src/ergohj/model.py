"""Problem data for the ergodic viscous Hamilton-Jacobi eigenvalue lab.

The equation under study is

    lambda - Lap(phi) + b(x).D(phi) + (1/m)|D(phi)|^m - beta*V(x) = 0,   x in R^d,

with a radial inward drift and a radial decaying potential.  Outside a
matching ball of radius R the data are the closed forms

    b(x) = (rho + a/|x|) |x|^(delta-1) x,      V(x) = |x|^(-eta),

or, in the compactly supported variant, V is the same inverse power cut
off smoothly on [R, R'] and identically zero beyond R'.  Inside the ball
the literature only requires smoothness and strict positivity of V, so
this module supplies one fixed, reproducible extension:

* drift magnitude  b_r(r) = r * p(r^2)  with p quadratic, matching value,
  first and second derivative at r = R (odd in r, hence a smooth radial
  vector field with b_r(0) = 0);
* potential        V(r) = R^(-eta) * exp(a1*(r^2-R^2) + a2*(r^2-R^2)^2)
  with a1, a2 matching (log V)' and (log V)'' at R (even in r, strictly
  positive, C^2 across the seam).

Every report produced downstream embeds this extension so that finite-beta
eigenvalues, which do depend on the interior data, stay reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

INVERSE_POWER = "inverse_power"
COMPACT_SUPPORT = "compact_support"

#: relative tolerance for C^1/C^2 matching at the seams (closed forms, so
#: anything beyond rounding indicates a construction bug)
SEAM_TOL = 1e-10


class ConstructionError(RuntimeError):
    """Interior extension failed to match the outer closed form."""


def conjugate_exponent(m: float) -> float:
    """Return m/(m-1), the exponent conjugate to m (1/m + 1/m* = 1)."""
    if not m > 1.0:
        raise ValueError(f"conjugate exponent needs m > 1, got m={m}")
    return m / (m - 1.0)


@dataclass(frozen=True)
class ProblemSpec:
    """The tuple (m, d, delta, rho, a, eta, R) plus the potential variant.

    beta is deliberately not a field: it is the sweep variable and every
    downstream operation takes it as a runtime argument.
    """

    m: float
    d: int
    delta: float
    rho: float
    a: float
    eta: float
    R: float
    potential_kind: str = INVERSE_POWER
    R_prime: float | None = None

    @property
    def m_star(self) -> float:
        return conjugate_exponent(self.m)

    @property
    def lambda_plateau(self) -> float:
        """The moderate-drift ceiling rho^m* / m*."""
        ms = self.m_star
        return self.rho**ms / ms

    def to_dict(self) -> dict:
        out = {
            "m": self.m,
            "d": self.d,
            "delta": self.delta,
            "rho": self.rho,
            "a": self.a,
            "eta": self.eta,
            "R": self.R,
            "potential_kind": self.potential_kind,
        }
        if self.R_prime is not None:
            out["R_prime"] = self.R_prime
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemSpec":
        known = {f: data[f] for f in ("m", "delta", "rho", "a", "eta", "R") if f in data}
        spec = cls(
            d=int(data["d"]),
            potential_kind=str(data.get("potential_kind", INVERSE_POWER)),
            R_prime=data.get("R_prime"),
            **known,
        )
        return spec

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def validate_spec(spec: ProblemSpec) -> list[str]:
    """Check the spec invariants; return the (possibly empty) violation list.

    Never raises: each violation is a sentence naming the offending field.
    """
    violations = []
    if not spec.m > 1.0:
        violations.append("m must exceed 1")
    if not spec.rho > 0.0:
        violations.append("rho must be positive")
    if not spec.eta > 0.0:
        violations.append("eta must be positive")
    if not spec.R > 0.0:
        violations.append("R must be positive")
    if int(spec.d) != spec.d or spec.d < 1:
        violations.append("d must be a positive integer")
    if spec.potential_kind not in (INVERSE_POWER, COMPACT_SUPPORT):
        violations.append(
            f"potential_kind must be '{INVERSE_POWER}' or '{COMPACT_SUPPORT}'"
        )
    if spec.potential_kind == COMPACT_SUPPORT:
        if spec.R_prime is None:
            violations.append("R_prime is required for compact_support")
        elif not (spec.R_prime > spec.R):
            violations.append("R_prime must exceed R")
    if not violations and spec.m > 1.0:
        # derived conjugacy identity, checked to machine tolerance
        ms = conjugate_exponent(spec.m)
        if abs(1.0 / spec.m + 1.0 / ms - 1.0) > 1e-12:
            violations.append("conjugate exponent identity 1/m + 1/m* = 1 failed")
    return violations


def _require_valid(spec: ProblemSpec) -> None:
    violations = validate_spec(spec)
    if violations:
        raise ValueError("invalid ProblemSpec: " + "; ".join(violations))


def _smoothstep(t):
    """C^2 monotone polynomial step: 0 at t=0, 1 at t=1, flat ends."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_d1(t):
    t = np.clip(t, 0.0, 1.0)
    return 30.0 * t * t * (t - 1.0) ** 2


@dataclass(frozen=True)
class RadialCoefficients:
    """Evaluators for the radial drift magnitude and the potential.

    All parameters are plain floats so instances pickle cleanly and can be
    packed for the compiled kernels.  Methods accept scalars or arrays and
    are pure; negative radii raise.
    """

    delta: float
    rho: float
    a: float
    eta: float
    R: float
    potential_kind: str
    R_prime: float | None
    drift_poly: tuple[float, float, float]  # b_r = r*(p0 + p1 r^2 + p2 r^4) on [0,R]
    pot_log: tuple[float, float, float]  # log V = c + a1 s + a2 s^2, s = r^2-R^2

    # -- drift -----------------------------------------------------------

    def _drift_outer(self, r):
        return (self.rho + self.a / r) * r**self.delta

    def _drift_outer_d1(self, r):
        return self.rho * self.delta * r ** (self.delta - 1.0) + self.a * (
            self.delta - 1.0
        ) * r ** (self.delta - 2.0)

    def drift(self, r):
        """Radial drift magnitude b_r(r); the field is b_r(|x|) x/|x|."""
        r = _check_radius(r)
        p0, p1, p2 = self.drift_poly
        with np.errstate(divide="ignore", invalid="ignore"):
            outer = np.where(r > 0, self._drift_outer(np.where(r > 0, r, 1.0)), 0.0)
        r2 = r * r
        inner = r * (p0 + r2 * (p1 + r2 * p2))
        return _as_same(np.where(r >= self.R, outer, inner), r)

    def drift_d1(self, r):
        r = _check_radius(r)
        p0, p1, p2 = self.drift_poly
        with np.errstate(divide="ignore", invalid="ignore"):
            outer = np.where(
                r > 0, self._drift_outer_d1(np.where(r > 0, r, 1.0)), 0.0
            )
        r2 = r * r
        inner = p0 + r2 * (3.0 * p1 + 5.0 * p2 * r2)
        return _as_same(np.where(r >= self.R, outer, inner), r)

    def drift_d2(self, r):
        r = _check_radius(r)
        p0, p1, p2 = self.drift_poly
        d, a = self.delta, self.a
        with np.errstate(divide="ignore", invalid="ignore"):
            rr = np.where(r > 0, r, 1.0)
            outer = np.where(
                r > 0,
                self.rho * d * (d - 1.0) * rr ** (d - 2.0)
                + a * (d - 1.0) * (d - 2.0) * rr ** (d - 3.0),
                0.0,
            )
        inner = r * (6.0 * p1 + 20.0 * p2 * r * r)
        return _as_same(np.where(r >= self.R, outer, inner), r)

    def drift_integral(self, r):
        """B(r) = integral of b_r from 0 to r (closed form, both pieces)."""
        r = _check_radius(r)
        p0, p1, p2 = self.drift_poly
        r2 = r * r
        inner = r2 * (p0 / 2.0 + r2 * (p1 / 4.0 + r2 * p2 / 6.0))
        R = self.R
        B_R = R * R * (p0 / 2.0 + R * R * (p1 / 4.0 + R * R * p2 / 6.0))
        d = self.delta
        rr = np.maximum(r, R)
        if d == -1.0:
            rho_part = self.rho * np.log(rr / R)
        else:
            rho_part = self.rho * (rr ** (d + 1.0) - R ** (d + 1.0)) / (d + 1.0)
        if d == 0.0:
            a_part = self.a * np.log(rr / R)
        else:
            a_part = self.a * (rr**d - R**d) / d
        outer = B_R + rho_part + a_part
        return _as_same(np.where(r >= R, outer, inner), r)

    # -- potential -------------------------------------------------------

    def _pot_inner(self, r):
        c, a1, a2 = self.pot_log
        # only meaningful on [0, R]; clamp so branch-blind vector callers
        # cannot overflow the exponential
        s = np.minimum(r, self.R) ** 2 - self.R * self.R
        return np.exp(c + s * (a1 + a2 * s))

    def potential(self, r):
        """V(r) >= 0, strictly positive on [0, R]."""
        r = _check_radius(r)
        with np.errstate(divide="ignore", over="ignore"):
            rr = np.where(r > 0, r, 1.0)
            outer = np.where(r > 0, rr ** (-self.eta), np.inf)
        if self.potential_kind == COMPACT_SUPPORT:
            t = (self.R_prime - r) / (self.R_prime - self.R)
            outer = np.where(r >= self.R_prime, 0.0, outer * _smoothstep(t))
        return _as_same(np.where(r >= self.R, outer, self._pot_inner(r)), r)

    def potential_d1(self, r):
        r = _check_radius(r)
        with np.errstate(divide="ignore", over="ignore"):
            rr = np.where(r > 0, r, 1.0)
            pow_d1 = np.where(r > 0, -self.eta * rr ** (-self.eta - 1.0), 0.0)
        if self.potential_kind == COMPACT_SUPPORT:
            width = self.R_prime - self.R
            t = (self.R_prime - r) / width
            outer = np.where(
                r >= self.R_prime,
                0.0,
                pow_d1 * _smoothstep(t)
                - np.where(r > 0, rr ** (-self.eta), 0.0) * _smoothstep_d1(t) / width,
            )
        else:
            outer = pow_d1
        c, a1, a2 = self.pot_log
        s = r * r - self.R * self.R
        inner = self._pot_inner(r) * (2.0 * r * (a1 + 2.0 * a2 * s))
        return _as_same(np.where(r >= self.R, outer, inner), r)

    # -- diagnostics and serialization ------------------------------------

    def seam_mismatch(self) -> dict:
        """Relative mismatch of the two branch formulas evaluated at the seams.

        Both branches are closed forms, so the one-sided limits at r = R
        (and r = R' in the compact variant) can be compared exactly; any
        disagreement beyond rounding is a construction bug.
        """
        R = self.R
        p0, p1, p2 = self.drift_poly
        pairs = {
            "drift": (R * (p0 + R * R * (p1 + R * R * p2)), self._drift_outer(R)),
            "drift_d1": (
                p0 + R * R * (3.0 * p1 + 5.0 * p2 * R * R),
                self._drift_outer_d1(R),
            ),
            "potential": (float(self._pot_inner(R)), R ** (-self.eta)),
            "potential_d1": (
                float(self._pot_inner(R)) * 2.0 * R * self.pot_log[1],
                -self.eta * R ** (-self.eta - 1.0),
            ),
        }
        if self.potential_kind == COMPACT_SUPPORT:
            # cutoff value and slope both vanish at R' by design of the step
            Rp = self.R_prime
            width = Rp - self.R
            pairs["potential_Rp"] = (Rp ** (-self.eta) * float(_smoothstep(0.0)), 0.0)
            pairs["potential_d1_Rp"] = (
                -self.eta * Rp ** (-self.eta - 1.0) * float(_smoothstep(0.0))
                - Rp ** (-self.eta) * float(_smoothstep_d1(0.0)) / width,
                0.0,
            )
        out = {}
        for name, (lo, hi) in pairs.items():
            out[name] = abs(hi - lo) / max(abs(lo), abs(hi), 1.0)
        return out

    def extension_descriptor(self) -> dict:
        """Reproducibility record of the interior extension (for reports)."""
        return {
            "drift_poly": list(self.drift_poly),
            "pot_log": list(self.pot_log),
            "potential_kind": self.potential_kind,
            "R": self.R,
            "R_prime": self.R_prime,
        }

    def kernel_params(self) -> np.ndarray:
        """Flat parameter pack consumed by the compiled kernels."""
        return np.array(
            [
                self.delta,
                self.rho,
                self.a,
                self.eta,
                self.R,
                1.0 if self.potential_kind == COMPACT_SUPPORT else 0.0,
                self.R_prime if self.R_prime is not None else np.inf,
                *self.drift_poly,
                *self.pot_log,
            ],
            dtype=float,
        )


def _check_radius(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("radius must be nonnegative")
    return arr


def _as_same(values, template):
    if np.ndim(template) == 0:
        return float(values)
    return values


def build_coefficients(spec: ProblemSpec) -> RadialCoefficients:
    """Construct the smooth radial coefficients for a validated spec.

    Raises ConstructionError if the interior extension fails to match the
    outer closed form at R beyond SEAM_TOL (a bug, not bad input).
    """
    _require_valid(spec)
    R, rho, a, delta, eta = spec.R, spec.rho, spec.a, spec.delta, spec.eta

    b_R = (rho + a / R) * R**delta
    bp_R = rho * delta * R ** (delta - 1.0) + a * (delta - 1.0) * R ** (delta - 2.0)
    bpp_R = rho * delta * (delta - 1.0) * R ** (delta - 2.0) + a * (delta - 1.0) * (
        delta - 2.0
    ) * R ** (delta - 3.0)
    A = np.array(
        [
            [R, R**3, R**5],
            [1.0, 3.0 * R**2, 5.0 * R**4],
            [0.0, 6.0 * R, 20.0 * R**3],
        ]
    )
    p0, p1, p2 = np.linalg.solve(A, np.array([b_R, bp_R, bpp_R]))

    # log-space even extension of V: matches (log V)' = -eta/R and
    # (log V)'' = eta/R^2 at r = R
    a1 = -eta / (2.0 * R**2)
    a2 = eta / (4.0 * R**4)
    c = -eta * math.log(R)

    coeffs = RadialCoefficients(
        delta=delta,
        rho=rho,
        a=a,
        eta=eta,
        R=R,
        potential_kind=spec.potential_kind,
        R_prime=spec.R_prime,
        drift_poly=(float(p0), float(p1), float(p2)),
        pot_log=(float(c), float(a1), float(a2)),
    )

    mism = coeffs.seam_mismatch()
    worst = max(mism.values())
    if worst > SEAM_TOL:
        raise ConstructionError(
            f"interior extension mismatch {worst:.3e} at r=R exceeds {SEAM_TOL}"
        )
    return coeffs


def eval_drift(coeffs: RadialCoefficients, r, deriv: int = 0):
    """Pointwise b_r(r) (deriv=0) or its first/second derivative."""
    if deriv == 0:
        return coeffs.drift(r)
    if deriv == 1:
        return coeffs.drift_d1(r)
    if deriv == 2:
        return coeffs.drift_d2(r)
    raise ValueError(f"deriv must be 0, 1 or 2, got {deriv}")


def eval_potential(coeffs: RadialCoefficients, r, deriv: int = 0):
    """Pointwise V(r) >= 0 (deriv=0) or its first derivative."""
    if deriv == 0:
        return coeffs.potential(r)
    if deriv == 1:
        return coeffs.potential_d1(r)
    raise ValueError(f"deriv must be 0 or 1, got {deriv}")


# -- configuration files ---------------------------------------------------

_CONFIG_KEYS = ("m", "d", "delta", "rho", "a", "eta", "R", "potential_kind", "R_prime")


def parse_config_text(text: str) -> dict:
    """Parse a flat key = value table.

    Grammar: one `key = value` pair per line; blank lines and lines starting
    with `#` are ignored; values may be bare or single/double quoted; numbers
    are parsed as int, then float, otherwise kept as strings.  This accepts
    flat TOML scalar tables as written by hand.
    """
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
            out[key] = value[1:-1]
            continue
        try:
            out[key] = int(value)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def load_spec(path: str | Path) -> ProblemSpec:
    """Read a ProblemSpec from a flat key-value config file."""
    data = parse_config_text(Path(path).read_text())
    unknown = set(data) - set(_CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    missing = {"m", "d", "delta", "rho", "eta", "R"} - set(data)
    if missing:
        raise ValueError(f"missing config keys: {sorted(missing)}")
    data.setdefault("a", 0.0)
    spec = ProblemSpec.from_dict(data)
    _require_valid(spec)
    return spec


def spec_digest(spec: ProblemSpec) -> str:
    """Short stable hash of a spec, used in default report file names."""
    import hashlib

    return hashlib.sha256(spec.to_json().encode()).hexdigest()[:12]

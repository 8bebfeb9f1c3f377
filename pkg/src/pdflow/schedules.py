"""Time-scaling and Tikhonov schedule curves.

A ``Curve`` is either a power law ``c * t**r``, identically zero, or a user
oracle returning ``(value, derivative)``.  For power curves every hypothesis
of the convergence theorems is decided exactly by exponent arithmetic; user
curves are only checked numerically on a finite horizon and the report is
flagged "horizon-limited" so the booleans are never mistaken for proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Curve",
    "CurveDomainError",
    "RegimeReport",
    "validate_regimes",
    "validate_role",
    "integral",
    "cumulative_integral",
]

NUMERIC_HORIZON = 1.0e4  # [t0, H] window used for horizon-limited checks


class CurveDomainError(ValueError):
    """Curve evaluated left of its start time."""


@dataclass(frozen=True)
class Curve:
    """Scalar schedule t -> value with an exact derivative.

    family "power" means value = c * t**r (r is the signed exponent; a decaying
    Tikhonov schedule 3/t^1.6 is power(3, -1.6)). family "zero" is identically
    zero everywhere. family "user" wraps fn(t) -> (value, derivative).
    """

    family: str
    c: float = 0.0
    r: float = 0.0
    fn: Optional[Callable[[float], tuple[float, float]]] = None
    t0: float = 1.0
    label: str = ""

    @staticmethod
    def power(c: float, r: float, t0: float = 1.0) -> "Curve":
        return Curve(family="power", c=float(c), r=float(r), t0=float(t0))

    @staticmethod
    def constant(c: float) -> "Curve":
        return Curve(family="power", c=float(c), r=0.0, t0=0.0)

    @staticmethod
    def zero() -> "Curve":
        return Curve(family="zero")

    @staticmethod
    def user(fn, t0: float = 1.0, label: str = "user") -> "Curve":
        return Curve(family="user", fn=fn, t0=float(t0), label=label)

    def eval(self, t: float) -> tuple[float, float]:
        """Return (value, derivative) at t.  Raises CurveDomainError for t < t0."""
        if self.family == "zero":
            return 0.0, 0.0
        if t < self.t0:
            raise CurveDomainError(f"curve evaluated at t={t} < t0={self.t0}")
        if self.family == "power":
            v = self.c * t**self.r
            d = self.c * self.r * t ** (self.r - 1.0)
            return v, d
        return self.fn(t)

    def value(self, t: float) -> float:
        return self.eval(t)[0]

    def values(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.family == "zero":
            return np.zeros_like(ts)
        if np.any(ts < self.t0):
            raise CurveDomainError("sample times extend left of curve start")
        if self.family == "power":
            return self.c * ts**self.r
        return np.array([self.fn(t)[0] for t in ts])

    def derivatives(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.family == "zero":
            return np.zeros_like(ts)
        if self.family == "power":
            return self.c * self.r * ts ** (self.r - 1.0)
        return np.array([self.fn(t)[1] for t in ts])

    @property
    def is_power(self) -> bool:
        return self.family in ("power", "zero")

    def power_coeffs(self) -> tuple[float, float]:
        """(c, r) with value = c * t**r; the zero curve is (0, 0)."""
        if self.family == "zero" or (self.family == "power" and self.c == 0.0):
            return 0.0, 0.0
        if self.family == "power":
            return self.c, self.r
        raise ValueError("user curve has no power representation")


def validate_role(curve: Curve, role: str) -> None:
    """Check the structural assumptions on a schedule curve.

    role "beta": positive and nondecreasing (power: c > 0 and r >= 0).
    role "eps": nonnegative, nonincreasing (power: c >= 0 and r <= 0; zero ok).
    User curves cannot be checked symbolically and are accepted as-is.
    """
    if role == "beta":
        if curve.family == "zero":
            raise ValueError("time-scaling curve must be positive, got zero")
        if curve.family == "power" and (curve.c <= 0.0 or curve.r < 0.0):
            raise ValueError(
                f"time-scaling curve must have c > 0 and r >= 0, got c={curve.c}, r={curve.r}"
            )
    elif role == "eps":
        if curve.family == "power" and (curve.c < 0.0 or curve.r > 0.0):
            raise ValueError(
                f"regularization curve must have c >= 0 and r <= 0, got c={curve.c}, r={curve.r}"
            )
    else:
        raise ValueError(f"unknown curve role {role!r}")


# ---------------------------------------------------------------------------
# Regime validation
# ---------------------------------------------------------------------------


@dataclass
class RegimeReport:
    """Outcome of checking the rate/strong-convergence hypotheses.

    conditions holds the primitive booleans; thmXX_ok are their conjunctions.
    exact=False marks horizon-limited numerical checks (user curves), which
    are advisory only.
    """

    conditions: dict
    thm41_ok: bool
    thm42_ok: bool
    thm51_ok: bool
    thm43: Optional[dict]
    earliest_valid_t: float
    exact: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "conditions": dict(self.conditions),
            "thm41_ok": self.thm41_ok,
            "thm42_ok": self.thm42_ok,
            "thm51_ok": self.thm51_ok,
            "thm43": None if self.thm43 is None else dict(self.thm43),
            "earliest_valid_t": self.earliest_valid_t,
            "exact": self.exact,
            "notes": list(self.notes),
        }

    def summary(self) -> str:
        kind = "exact (power family)" if self.exact else "horizon-limited (advisory)"
        lines = [f"regime check [{kind}]"]
        for name, ok in self.conditions.items():
            lines.append(f"  {name:28s} {'ok' if ok else 'FAIL'}")
        lines.append(f"  earliest_valid_t             {self.earliest_valid_t:g}")
        lines.append(f"  rate hypotheses (bounded-energy)   {'ok' if self.thm41_ok else 'FAIL'}")
        lines.append(f"  minimizing-trajectory hypotheses   {'ok' if self.thm42_ok else 'FAIL'}")
        lines.append(f"  strong-convergence hypotheses      {'ok' if self.thm51_ok else 'FAIL'}")
        if self.thm43 is not None:
            c = self.thm43
            lines.append(
                f"  power-pair order: r1={c['r1']:g} r2={c['r2']:g} case={c['case']}"
                + (f" predicted gap order {c['predicted_order']}" if c["predicted_order"] else "")
            )
        for n in self.notes:
            lines.append(f"  note: {n}")
        return "\n".join(lines)


def _power_integrable_to_inf(c: float, r: float) -> bool:
    return c == 0.0 or r < -1.0


def _power_unbounded(c: float, r: float) -> bool:
    return c > 0.0 and r > 0.0


def validate_regimes(beta: Curve, eps: Curve, gamma: float, delta: float,
                     t0: Optional[float] = None) -> RegimeReport:
    """Decide the hypothesis sets of the rate and strong-convergence results.

    Power-family inputs are decided exactly: integrability of c*t^p to
    infinity iff p < -1, divergence to infinity iff the combined exponent is
    positive, and the growth bound beta' <= beta/delta holds from
    t = r*delta in closed form.  Anything involving a user curve falls back
    to a numerical sweep on [t0, 1e4] flagged horizon-limited.
    """
    if gamma <= 0.0 or delta <= 0.0:
        raise ValueError("gamma and delta must be positive")
    if t0 is None:
        t0 = max(beta.t0, eps.t0)
    notes: list[str] = []
    damping = (1.0 / delta) < gamma

    exact = beta.is_power and eps.is_power
    if exact:
        bc, br = beta.power_coeffs()
        ec, er = eps.power_coeffs()
        pc, pr = bc * ec, br + er
        beta_eps_integrable = _power_integrable_to_inf(pc, pr)
        eps_integrable = _power_integrable_to_inf(ec, er)
        beta_unbounded = _power_unbounded(bc, br)
        beta_eps_unbounded = _power_unbounded(pc, pr)
        # beta' <= beta/delta  <=>  r/t <= 1/delta  <=>  t >= r*delta
        earliest = max(t0, br * delta)
        growth_from_t0 = br * delta <= t0
    else:
        ts = np.geomspace(t0, max(NUMERIC_HORIZON, 10.0 * t0), 2000)
        bvals = beta.values(ts)
        bders = beta.derivatives(ts)
        evals_ = eps.values(ts)
        prod = bvals * evals_
        beta_eps_integrable = _tail_integrable(ts, prod)
        eps_integrable = _tail_integrable(ts, evals_)
        beta_unbounded = _tail_unbounded(ts, bvals)
        beta_eps_unbounded = _tail_unbounded(ts, prod)
        ok = bders <= bvals / delta + 1e-12 * np.maximum(1.0, np.abs(bvals))
        earliest = _first_time_holding(ts, ok)
        growth_from_t0 = bool(ok.all())
        notes.append(
            f"user curve present: conditions checked numerically on [{t0:g}, {ts[-1]:g}] only"
        )

    conditions = {
        "beta_eps_integrable": beta_eps_integrable,
        "eps_integrable": eps_integrable,
        "beta_unbounded": beta_unbounded,
        "beta_eps_unbounded": beta_eps_unbounded,
        "growth_bound_from_t0": growth_from_t0,
        "damping_margin": damping,
    }
    thm41_ok = beta_eps_integrable and growth_from_t0 and damping
    thm42_ok = eps_integrable and beta_unbounded and growth_from_t0 and damping
    thm51_ok = eps_integrable and beta_eps_unbounded and growth_from_t0 and damping

    if not growth_from_t0:
        notes.append(
            f"growth bound beta' <= beta/delta only holds from t = {earliest:g} > t0 = {t0:g}"
        )
    if eps.family == "zero" or (eps.is_power and eps.power_coeffs()[0] == 0.0):
        notes.append("eps is identically zero: strong-convergence hypotheses not applicable")

    thm43 = None
    if exact:
        bc, br = beta.power_coeffs()
        ec, er = eps.power_coeffs()
        if bc > 0.0 and ec > 0.0:
            r1, r2 = br, -er
            if 1.0 < r2 < r1 + 1.0:
                case, order = "1<r2<r1+1", f"t^-{r2 - 1.0:g}"
            elif r2 == r1 + 1.0 and r2 > 1.0:
                case, order = "r2=r1+1", f"ln(t)/t^{r1:g}"
            else:
                case, order = "out_of_range", None
            thm43 = {
                "r1": r1,
                "r2": r2,
                "case": case,
                "predicted_order": order,
                "growth_bound_from_t0": growth_from_t0,
            }

    return RegimeReport(
        conditions=conditions,
        thm41_ok=thm41_ok,
        thm42_ok=thm42_ok,
        thm51_ok=thm51_ok,
        thm43=thm43,
        earliest_valid_t=earliest,
        exact=exact,
        notes=notes,
    )


def _tail_exponent(ts, vals):
    """Local power-law exponent over the last decade; None for vanishing tails."""
    i_cut = int(np.searchsorted(ts, ts[-1] / 10.0))
    v0, v1 = vals[i_cut], vals[-1]
    if v0 <= 0.0 or v1 <= 0.0:
        return None
    return math.log(v1 / v0) / math.log(ts[-1] / ts[i_cut])


def _tail_integrable(ts, vals) -> bool:
    # advisory: the tail looks like t^p with p < -1
    p = _tail_exponent(ts, vals)
    if p is None:
        return True  # tail vanished
    return p < -1.0 - 1e-6


def _tail_unbounded(ts, vals) -> bool:
    # advisory: the tail grows (local exponent clearly positive, or at least
    # steady growth such as a logarithm)
    p = _tail_exponent(ts, vals)
    if p is None:
        return False
    return p > 1e-6 and vals[-1] > vals[0]


def _first_time_holding(ts, ok) -> float:
    # smallest grid time from which the condition holds for every later point
    idx = len(ok)
    for i in range(len(ok) - 1, -1, -1):
        if not ok[i]:
            break
        idx = i
    return float(ts[idx]) if idx < len(ok) else math.inf


# ---------------------------------------------------------------------------
# Integrals of schedule products
# ---------------------------------------------------------------------------

_PRODUCTS = ("beta_eps", "eps", "beta")


def _product_power(which, beta, eps):
    """(c, r) for the requested product if all factors are power curves, else None."""
    if which == "beta_eps":
        if beta.is_power and eps.is_power:
            bc, br = beta.power_coeffs()
            ec, er = eps.power_coeffs()
            return bc * ec, br + er
        return None
    curve = eps if which == "eps" else beta
    return curve.power_coeffs() if curve.is_power else None


def _product_fn(which, beta, eps):
    if which == "beta_eps":
        return lambda t: beta.value(t) * eps.value(t)
    curve = eps if which == "eps" else beta
    return curve.value


def _power_antiderivative(c, r, lo, hi):
    if c == 0.0:
        return 0.0
    if r == -1.0:
        return c * (math.log(hi) - math.log(lo))
    return c * (hi ** (r + 1.0) - lo ** (r + 1.0)) / (r + 1.0)


def integral(which: str, beta: Optional[Curve] = None, eps: Optional[Curve] = None,
             lo: float = 1.0, hi: float = math.inf) -> float:
    """Integral of beta*eps, eps, or beta over [lo, hi].

    Power families use the closed-form antiderivative; hi may be math.inf, in
    which case a divergent integral is reported as math.inf rather than a
    number.  User curves are integrated by adaptive Simpson quadrature
    (tolerance 1e-10) and require a finite hi.
    """
    if which not in _PRODUCTS:
        raise ValueError(f"unknown product {which!r}")
    if hi < lo:
        raise ValueError("integration bounds must satisfy hi >= lo")
    coeffs = _product_power(which, beta, eps)
    if coeffs is not None:
        c, r = coeffs
        if math.isinf(hi):
            if not _power_integrable_to_inf(c, r):
                return math.inf
            # r + 1 < 0 here, so the upper limit contributes nothing
            return 0.0 if c == 0.0 else -c * lo ** (r + 1.0) / (r + 1.0)
        return _power_antiderivative(c, r, lo, hi)
    if math.isinf(hi):
        raise ValueError("improper integral of a user curve is horizon-limited; pass finite hi")
    return _adaptive_simpson(_product_fn(which, beta, eps), lo, hi)


def cumulative_integral(which: str, ts, beta: Optional[Curve] = None,
                        eps: Optional[Curve] = None, lo: Optional[float] = None) -> np.ndarray:
    """Running integral from lo to each entry of ts (closed form for powers)."""
    ts = np.asarray(ts, dtype=float)
    if lo is None:
        lo = float(ts[0])
    coeffs = _product_power(which, beta, eps)
    if coeffs is not None:
        c, r = coeffs
        if c == 0.0:
            return np.zeros_like(ts)
        if r == -1.0:
            return c * (np.log(ts) - math.log(lo))
        return c * (ts ** (r + 1.0) - lo ** (r + 1.0)) / (r + 1.0)
    f = _product_fn(which, beta, eps)
    out = np.empty_like(ts)
    acc = _adaptive_simpson(f, lo, float(ts[0])) if ts[0] > lo else 0.0
    out[0] = acc
    for i in range(1, len(ts)):
        acc += _adaptive_simpson(f, float(ts[i - 1]), float(ts[i]))
        out[i] = acc
    return out


def _adaptive_simpson(f, a, b, tol=1e-10, max_depth=50):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return _simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + _simpson_rec(
        f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1
    )

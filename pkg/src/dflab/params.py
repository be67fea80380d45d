"""Physical parameters, derived constants and admissibility predicates.

All quantities here are plain floats computed from closed forms; nothing is
cached in a way that could go stale.  ``PhysParams`` exposes the reduced
couplings ``alpha_c = alpha / c`` and ``Z_c = Z / c`` as properties so they
can never disagree with the stored fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

SQRT3_2 = math.sqrt(3.0) / 2.0


class DomainError(ValueError):
    """A closed form was evaluated outside its domain."""


@dataclass(frozen=True)
class PhysParams:
    alpha: float
    c: float
    Z: float
    q: int

    def __post_init__(self):
        if not (self.alpha >= 0.0):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not (self.c > 0.0):
            raise ValueError(f"c must be > 0, got {self.c}")
        if not (self.Z >= 0.0):
            raise ValueError(f"Z must be >= 0, got {self.Z}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q}")
        object.__setattr__(self, "q", int(self.q))
        for name in ("alpha", "c", "Z"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def alpha_c(self) -> float:
        return self.alpha / self.c

    @property
    def Z_c(self) -> float:
        return self.Z / self.c

    def replace(self, **kw) -> "PhysParams":
        d = dict(alpha=self.alpha, c=self.c, Z=self.Z, q=self.q)
        d.update(kw)
        return PhysParams(**d)

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "c": self.c, "Z": self.Z, "q": self.q}


@dataclass(frozen=True)
class DerivedConstants:
    """Constants of the retraction theory for one parameter point and radius.

    ``kappa`` and ``lambda0`` are always finite.  The remaining constants need
    ``kappa < 1`` and ``lambda0 > 0``; when that fails they are NaN and
    ``defined`` is False.  Use :meth:`require` to turn that into an error.
    """

    kappa: float
    lambda0: float
    R: float
    a_const: float
    A_const: float
    L_const: float
    C_kl: float
    defined: bool
    kappa_ok: bool
    contraction_ok: bool

    def require(self) -> "DerivedConstants":
        if self.lambda0 <= 0.0:
            raise DomainError(f"lambda0 = {self.lambda0} <= 0")
        if 1.0 - self.kappa <= 0.0:
            raise DomainError(f"1 - kappa = {1.0 - self.kappa} <= 0")
        return self

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "lambda0": self.lambda0,
            "R": self.R,
            "a_const": self.a_const,
            "A_const": self.A_const,
            "L_const": self.L_const,
            "C_kl": self.C_kl,
            "defined": self.defined,
            "kappa_ok": self.kappa_ok,
            "contraction_ok": self.contraction_ok,
        }


def kappa_of(p: PhysParams) -> float:
    return 2.0 * (p.alpha_c * p.q + p.Z_c)


def lambda0_of(p: PhysParams) -> float:
    return 1.0 - max(p.alpha_c * p.q, p.Z_c)


def derive_constants(p: PhysParams, R: float) -> DerivedConstants:
    if not (R > 0.0):
        raise ValueError(f"R must be > 0, got {R}")
    kappa = kappa_of(p)
    lam0 = lambda0_of(p)
    nan = float("nan")
    if kappa >= 1.0 or lam0 <= 0.0:
        return DerivedConstants(kappa, lam0, R, nan, nan, nan, nan,
                                defined=False, kappa_ok=kappa < 1.0,
                                contraction_ok=False)
    a = math.pi * p.alpha_c / (4.0 * math.sqrt((1.0 - kappa) * lam0))
    L = 2.0 * a * R
    A = max(1.0 / (1.0 - L) if L < 1.0 else math.inf, (2.0 + a * p.q) / 2.0)
    C_kl = (5.0 * math.pi**2 / (4.0 * (1.0 - kappa) ** 2 * lam0**1.5 * (1.0 - L) ** 2)
            if L < 1.0 else math.inf)
    return DerivedConstants(kappa, lam0, R, a, A, L, C_kl, defined=True,
                            kappa_ok=True, contraction_ok=L < 1.0)


@dataclass(frozen=True)
class AssumptionStatus:
    holds: bool
    item1: bool
    item2: bool
    R: float
    R_low: float
    R_high: float
    reason: str
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "holds": self.holds,
            "item1": self.item1,
            "item2": self.item2,
            "R": self.R,
            "R_low": self.R_low,
            "R_high": self.R_high,
            "reason": self.reason,
        }


def assumption_interval(p: PhysParams) -> tuple[float, float]:
    """Open interval of admissible retraction radii (may be empty or NaN)."""
    kappa = kappa_of(p)
    lam0 = lambda0_of(p)
    slack = 1.0 - kappa - 0.25 * math.pi * p.alpha_c * p.q
    lo = p.q / math.sqrt(slack) if slack > 0.0 else math.inf
    if p.alpha_c == 0.0:
        hi = math.inf if (kappa < 1.0 and lam0 > 0.0) else math.nan
    elif kappa < 1.0 and lam0 > 0.0:
        hi = 2.0 * math.sqrt((1.0 - kappa) * lam0) / (math.pi * p.alpha_c)
    else:
        hi = math.nan
    return lo, hi


def check_assumption_1(d: DerivedConstants | None, p: PhysParams, R: float) -> AssumptionStatus:
    """Both items of the retraction-existence assumption for radius ``R``.

    ``d`` is accepted for interface symmetry; it is recomputed if None.
    """
    if d is None:
        d = derive_constants(p, R)
    item1 = d.kappa < 1.0 - 0.25 * math.pi * p.alpha_c * p.q
    lo, hi = assumption_interval(p)
    item2 = bool(item1 and lo < R < hi)
    if not item1:
        reason = "item (1) violated"
    elif not item2:
        reason = f"item (2) violated: R={R} not in ({lo}, {hi})"
    else:
        reason = "ok"
    return AssumptionStatus(bool(item1 and item2), bool(item1), item2, R, lo, hi, reason,
                            details={"kappa": d.kappa, "lambda0": d.lambda0})


def c_aux(a: float) -> float:
    return (-4.0 * abs(a) + math.sqrt(9.0 + 4.0 * a * a)) / 3.0


def mu_of(a: float) -> float:
    """Largest mu in [0, C_a^2] with mu + C_a^2 a^2 / (C_a^2 - mu) <= 1."""
    if not abs(a) < SQRT3_2:
        raise DomainError(f"|a| must be < sqrt(3)/2, got {a}")
    C2 = c_aux(a) ** 2
    if a == 0.0:
        return min(1.0, C2)
    # the left side increases on [0, C2) and blows up at C2, so the
    # constraint binds.  Solve for d = C2 - mu, which is small when a is:
    # d^2 + (1 - C2) d - C2 a^2 = 0, positive root in cancellation-free form
    s = math.sqrt(9.0 + 4.0 * a * a)
    one_minus_c = (4.0 * abs(a) - 4.0 * a * a / (3.0 + s)) / 3.0
    one_minus_c2 = one_minus_c * (2.0 - one_minus_c)
    d = 2.0 * C2 * a * a / (one_minus_c2 + math.sqrt(one_minus_c2**2 + 4.0 * C2 * a * a))
    return max(C2 - d, 0.0)


def check_ephf_condition(p: PhysParams, trace_g: float) -> bool:
    if not p.Z_c < SQRT3_2:
        raise DomainError(f"Z_c = {p.Z_c} must be < sqrt(3)/2")
    lhs = math.pi * p.alpha_c * (0.25 + max(trace_g, p.q)) + 4.0 * p.alpha_c * trace_g
    return lhs < mu_of(p.Z_c)


def default_radius(K: float, q: int) -> float:
    """R = 2 (1 + K^2) q with K an eigenfunction H^1 bound."""
    return 2.0 * (1.0 + K * K) * q


def assumption_stamp(p: PhysParams, R: float) -> dict:
    """Everything a report needs to say about the parameter regime."""
    d = derive_constants(p, R)
    st = check_assumption_1(d, p, R)
    out = {"assumption_1": st.as_dict(), "constants": d.as_dict()}
    try:
        out["ephf_condition"] = check_ephf_condition(p, float(p.q))
    except DomainError as exc:
        out["ephf_condition"] = False
        out["ephf_condition_error"] = str(exc)
    return out

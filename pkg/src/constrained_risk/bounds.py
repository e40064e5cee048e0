"""Constrained risk lower bounds.

All three forms read  R(est, P1) >= [sqrt(sep) - sqrt(affinity * budget)]_+^2
with the separation and budget interpreted per loss class:

* convex losses: sep = 2 ell(d/2), budget = bound on R(est, P0);
* generic non-decreasing losses: sep = ell(d/2), same budget;
* power losses ell(t) = t^k: sep = d, and ``delta_budget_k`` is the bound on
  E0 ||est - theta0||^k, i.e. delta^k rather than delta. For k > 2 the bound
  is [d - sqrt(affinity * delta^2)]_+^k with delta = delta_budget_k^(1/k).

An infinite affinity yields the trivial bound 0.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import divergence
from .errors import InvalidInputError
from .loss import CONVEX, GENERIC, POWER, separation

CONVEX_THM = "convex_thm1"
GENERIC_COR = "generic_cor1"
POWER_SMALL = "power_small_k"
POWER_LARGE = "power_large_k"


@dataclass(frozen=True)
class BoundReport:
    delta_sep: float
    delta_budget: float
    affinity: float
    value: float
    branch: str
    k: Optional[float] = None
    provenance: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        out = asdict(self)
        if not self.provenance:
            out.pop("provenance")
        return out


def hinge(x):
    return x if x > 0.0 else 0.0


def _check(delta_sep, affinity, delta_budget):
    if not delta_sep >= 0 or not delta_budget >= 0:
        raise InvalidInputError("separation and budget must be non-negative")
    if not affinity >= 1.0:
        raise InvalidInputError(f"affinity must be >= 1, got {affinity}")


def _two_point(delta_sep, affinity, delta_budget):
    if math.isinf(affinity):
        return 0.0
    return hinge(math.sqrt(delta_sep) - math.sqrt(affinity * delta_budget)) ** 2


def bound_convex(delta_sep, affinity, delta_budget):
    _check(delta_sep, affinity, delta_budget)
    return BoundReport(delta_sep, delta_budget, affinity,
                       _two_point(delta_sep, affinity, delta_budget), CONVEX_THM)


def bound_generic(delta_sep, affinity, delta_budget):
    _check(delta_sep, affinity, delta_budget)
    return BoundReport(delta_sep, delta_budget, affinity,
                       _two_point(delta_sep, affinity, delta_budget), GENERIC_COR)


def _power_small(sep, k, affinity, budget_k):
    return _two_point(sep ** k, affinity, budget_k)


def _power_large(sep, k, affinity, budget_k):
    delta_sq = budget_k ** (2.0 / k)
    if math.isinf(affinity):
        return 0.0
    return hinge(sep - math.sqrt(affinity * delta_sq)) ** k


def bound_power(sep, k, affinity, delta_budget_k):
    """Bound for ell(t) = t^k given E0 ||est - theta0||^k <= delta_budget_k."""
    if not k > 0 or not math.isfinite(k):
        raise InvalidInputError("k must be a positive finite real")
    _check(sep, affinity, delta_budget_k)
    if k < 2:
        value, branch = _power_small(sep, k, affinity, delta_budget_k), POWER_SMALL
    elif k > 2:
        value, branch = _power_large(sep, k, affinity, delta_budget_k), POWER_LARGE
    else:
        value = _power_small(sep, k, affinity, delta_budget_k)
        other = _power_large(sep, k, affinity, delta_budget_k)
        assert abs(value - other) <= 1e-12 * max(1.0, value), (value, other)
        branch = POWER_SMALL
    return BoundReport(sep, delta_budget_k, affinity, value, branch, k=float(k))


def bound_for_loss(loss, theta0, theta1, affinity, delta_budget):
    """Dispatch on the loss class given an already computed affinity."""
    sep = separation(loss, theta0, theta1)
    if loss.kind == POWER:
        return bound_power(sep, loss.k, affinity, delta_budget)
    if loss.kind == CONVEX:
        return bound_convex(sep, affinity, delta_budget)
    if loss.kind == GENERIC:
        return bound_generic(sep, affinity, delta_budget)
    raise InvalidInputError(f"unknown loss class {loss.kind!r}")


def bound_from_models(p1, p0, loss, delta_budget, method="quadrature", count=10**6, seed=0):
    """Lower bound on R(est, P1) for any est with R(est, P0) <= delta_budget.

    ``delta_budget`` is always the bound on the P0 risk under ``loss`` (for
    power losses this is delta^k). Equal models short-circuit to affinity 1.
    """
    if p1 == p0:
        aff = divergence.AffinityResult(1.0, "identical")
    else:
        aff = divergence.affinity(p1, p0, method=method, count=count, seed=seed)
    report = bound_for_loss(loss, p0.theta, p1.theta, aff.value, delta_budget)
    prov = {"loss": loss.name, "theta0": p0.theta, "theta1": p1.theta,
            "affinity": aff.to_dict()}
    for name, m in (("p0", p0), ("p1", p1)):
        if hasattr(m, "spec"):
            prov[name] = m.spec()
    return BoundReport(report.delta_sep, report.delta_budget, report.affinity, report.value,
                       report.branch, report.k, prov)

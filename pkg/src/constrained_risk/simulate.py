"""Monte Carlo risk of concrete estimators and the finite-sample-space oracle."""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import norm

from . import kernels
from ._seeding import RunningMoments, block_rng, block_sizes
from .bounds import bound_from_models
from .dist import Discrete, Gaussian, Product
from .errors import InfeasibleError, InvalidInputError
from .loss import CONVEX, POWER

MAX_ORACLE_SUPPORT = 64
VIOLATION_TOL = 1e-6
_ROWS_BUDGET = 1 << 22  # floats drawn per Monte Carlo block


@dataclass(frozen=True)
class Estimator:
    """A deterministic map from samples to estimates.

    ``fn`` is vectorised over rows: (reps, n) -> (reps,). Estimators that
    depend on the data only through the sample mean also carry ``mean_fn``,
    letting Gaussian products draw the mean directly. ``tau`` marks the
    thresholded-mean family handled by the compiled kernel (tau = 0 is the
    plain mean). Randomised estimators should append an auxiliary uniform
    coordinate to the data instead of drawing internally.
    """

    name: str
    fn: Callable = field(repr=False, compare=False)
    mean_fn: Optional[Callable] = field(default=None, repr=False, compare=False)
    tau: Optional[float] = None

    def __call__(self, sample):
        x = np.asarray(sample, dtype=float)
        return float(self.fn(x.reshape(1, -1))[0])


def sample_mean():
    return Estimator("mean", lambda x: np.mean(x, axis=-1), lambda m: m, tau=0.0)


def hodges_estimator(tau):
    """Sample mean thresholded to 0 when |mean| <= tau."""
    tau = float(tau)
    if not tau >= 0:
        raise InvalidInputError("tau must be non-negative")

    def shrink(m):
        return np.where(np.abs(m) > tau, m, 0.0)

    return Estimator(f"hodges:{tau:g}", lambda x: shrink(np.mean(x, axis=-1)), shrink, tau=tau)


def constant_estimator(value):
    value = float(value)
    return Estimator(f"const:{value:g}", lambda x: np.full(x.shape[0], value),
                     lambda m: np.full(np.shape(m), value))


def hodges_tau(n):
    """Default threshold n^(-1/4)."""
    return n ** -0.25


def hodges_zero_one_risk0(n, tau, sigma=1.0, loss_threshold=None):
    """P0(|est| >= loss_threshold) for the Hodges estimator under N(0, sigma^2)^n.

    Without ``loss_threshold`` this is P0(est != 0) = 2 Phi(-sqrt(n) tau / sigma).
    """
    cut = tau if loss_threshold is None else max(tau, loss_threshold)
    return 2.0 * norm.sf(math.sqrt(n) * cut / sigma)


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    std_error: float
    reps: int
    seed: object

    def to_dict(self):
        return {"mean": self.mean, "std_error": self.std_error, "reps": self.reps,
                "seed": self.seed}


def _as_product(model):
    return model if isinstance(model, Product) else Product(model, 1)


def mc_risk(est, model, loss, reps, seed, mean_shortcut=True):
    """Monte Carlo estimate of E[ell(|est - theta(model)|)].

    ``model`` is an n-fold product (a bare model means n = 1). Replications
    are drawn in blocks seeded by (seed, block index). For Gaussian products
    and mean-based estimators the sample mean is drawn directly from its
    exact N(mu, sigma^2/n) law unless ``mean_shortcut`` is False.
    """
    if reps < 100:
        raise InvalidInputError("mc_risk needs reps >= 100")
    model = _as_product(model)
    theta = model.theta
    direct_mean = (mean_shortcut and est.mean_fn is not None
                   and isinstance(model.base, Gaussian))
    if direct_mean:
        sizes = block_sizes(reps)
    else:
        sizes = block_sizes(reps, max(1, min(1 << 16, _ROWS_BUDGET // model.n)))
    use_kernel = est.tau is not None and loss.kernel is not None

    acc = RunningMoments()
    for b, size in enumerate(sizes):
        rng = block_rng(seed, b)
        if direct_mean:
            losses = loss(np.abs(est.mean_fn(model.sample_mean(rng, size)) - theta))
        else:
            x = model.sample(rng, size)
            if use_kernel:
                losses = kernels.estimator_losses(x, est.tau, theta, *loss.kernel)
            else:
                losses = loss(np.abs(est.fn(x) - theta))
        acc.add(losses)
    return RiskEstimate(acc.mean, acc.std_error, int(reps), seed)


# --- oracle ---------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    """Smallest P1 risk found subject to the P0 budget.

    ``exact`` is False when the per-coordinate search was a grid (non-convex
    losses); ``value`` is then an upper bound on the constrained minimum.
    """

    value: float
    v: np.ndarray = field(repr=False)
    risk0: float
    multiplier: float
    exact: bool


def _oracle_convex(loss):
    if loss.kind == CONVEX:
        return True
    return loss.kind == POWER and loss.k >= 1.0


def _run_oracle(p0, p1, D, delta, loss):
    convex = _oracle_convex(loss)
    if loss.kernel is not None:
        code, param = loss.kernel
        return kernels.oracle_batch(p0, p1, D, delta, code, param, convex), convex
    out = kernels.numpy_impl.oracle_batch_callable(p0, p1, D, delta, loss.fn, convex,
                                                   kernels.GRID_POINTS)
    return out, convex


def oracle_min_risk(p0, p1, theta0, theta1, loss, delta_budget):
    """Constrained minimum of R(v, P1) over estimates v: Z -> [theta0, theta1]
    with R(v, P0) <= delta_budget, on a finite sample space.

    Lagrangian relaxation: for a multiplier the problem splits over sample
    points; the multiplier is bisected until the budget binds.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if p0.ndim != 1 or p0.shape != p1.shape:
        raise InvalidInputError("p0 and p1 must be pmf vectors of equal length")
    if p0.size > MAX_ORACLE_SUPPORT:
        raise InvalidInputError(f"support larger than {MAX_ORACLE_SUPPORT}")
    if delta_budget < 0:
        raise InvalidInputError("budget must be non-negative")
    theta0, theta1 = float(theta0), float(theta1)
    l0 = float(loss(0.0))
    if theta0 == theta1:
        if delta_budget < l0 - 1e-12:
            raise InfeasibleError("budget below the minimal achievable P0 risk")
        return OracleResult(l0, np.full(p0.size, theta0), l0, 0.0, True)
    D = abs(theta1 - theta0)
    (s, r1, r0, lam, status), convex = _run_oracle(p0[None], p1[None], np.array([D]),
                                                   np.array([float(delta_budget)]), loss)
    if status[0] == kernels.STATUS_INFEASIBLE:
        raise InfeasibleError(f"budget {delta_budget} below the minimal P0 risk {l0}")
    v = theta0 + s[0] * (theta1 - theta0)
    return OracleResult(float(r1[0]), v, float(r0[0]), float(lam[0]), convex)


@dataclass
class ViolationReport:
    loss: str
    instances: int
    seed: object
    violations: int
    worst_margin: float
    max_budget_excess: float
    exact: bool
    records: list = field(default_factory=list)

    def to_dict(self):
        return {"loss": self.loss, "instances": self.instances, "seed": self.seed,
                "violations": self.violations, "worst_margin": self.worst_margin,
                "max_budget_excess": self.max_budget_excess, "exact": self.exact,
                "records": self.records}


def random_instances(count, seed, loss, m_max=8):
    """Random finite two-point problems: pmfs on 2..m_max points, theta0 != theta1
    in [-2, 2], budgets spread (cubed uniform) over [0, R(theta1, P0))."""
    rng = block_rng(seed, 0)
    sizes = rng.integers(2, m_max + 1, count)
    p0 = np.zeros((count, m_max))
    p1 = np.zeros((count, m_max))
    for i, m in enumerate(sizes):
        a, b = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
        p0[i, :m] = a / a.sum()
        p1[i, :m] = b / b.sum()
    theta0 = rng.uniform(-2.0, 2.0, count)
    gap = rng.uniform(1e-3, 2.0, count) * rng.choice([-1.0, 1.0], count)
    theta1 = theta0 + gap
    D = np.abs(theta1 - theta0)
    top = np.asarray(loss(D), dtype=float)
    l0 = float(loss(0.0))
    delta = l0 + (top - l0) * rng.random(count) ** 3
    return sizes, p0, p1, theta0, theta1, delta


def violation_search(instances, seed, loss, m_max=8, tol=VIOLATION_TOL):
    """Look for finite instances where the oracle beats the lower bound."""
    sizes, p0, p1, theta0, theta1, delta = random_instances(instances, seed, loss, m_max)
    D = np.abs(theta1 - theta0)
    (s, r1, r0, lam, status), exact = _run_oracle(p0, p1, D, delta, loss)
    records, worst = [], math.inf
    for i, m in enumerate(sizes):
        q0 = Discrete(tuple(range(m)), tuple(p0[i, :m]), float(theta0[i]))
        q1 = Discrete(tuple(range(m)), tuple(p1[i, :m]), float(theta1[i]))
        bound = bound_from_models(q1, q0, loss, float(delta[i])).value
        margin = float(r1[i]) - bound
        worst = min(worst, margin)
        if margin < -tol:
            records.append({"index": i, "p0": q0.pmf, "p1": q1.pmf, "theta0": q0.theta,
                            "theta1": q1.theta, "delta": float(delta[i]),
                            "oracle": float(r1[i]), "bound": bound})
    excess = float(np.max(r0 - delta)) if instances else 0.0
    return ViolationReport(loss.name, int(instances), seed, len(records), worst, excess, exact,
                           records)

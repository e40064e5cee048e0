"""Losses of the form L(v, P) = ell(||v - theta(P)||) and their separations."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, InvalidInputError

GENERIC = "generic"
CONVEX = "convex"
POWER = "power"
_KINDS = (GENERIC, CONVEX, POWER)

# kernel codes understood by the compiled oracle
KERNEL_POWER = 0
KERNEL_THRESHOLD = 1


@dataclass(frozen=True)
class LossFn:
    """A non-decreasing loss ell: [0, inf) -> [0, inf) with a declared class.

    ``kind`` is declared by the caller; call :meth:`validate` to have the
    declaration checked on sampled points. ``fn`` must accept numpy arrays.
    """

    kind: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    k: Optional[float] = None
    name: str = "custom"
    kernel: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidInputError(f"unknown loss class {self.kind!r}")
        if self.kind == POWER:
            if self.k is None or not self.k > 0:
                raise InvalidInputError("power losses need an exponent k > 0")

    def __call__(self, t):
        out = self.fn(np.asarray(t, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def validate(self, seed=0, samples=2000, tol=1e-9):
        """Check monotonicity, non-negativity and the declared class.

        Raises InvalidInputError on the first violated property.
        """
        rng = np.random.default_rng(seed)
        a = rng.exponential(2.0, samples)
        b = a + rng.exponential(2.0, samples)
        fa, fb = np.asarray(self.fn(a)), np.asarray(self.fn(b))
        if np.any(fa < -tol) or np.any(fb < -tol):
            raise InvalidInputError(f"loss {self.name} takes negative values")
        if np.any(fa > fb + tol * (1 + np.abs(fb))):
            raise InvalidInputError(f"loss {self.name} is not non-decreasing")
        if self.kind == CONVEX:
            mid = np.asarray(self.fn(0.5 * (a + b)))
            if np.any(mid > 0.5 * (fa + fb) + tol * (1 + np.abs(fb))):
                raise InvalidInputError(f"loss {self.name} is not midpoint convex")
        if self.kind == POWER:
            if not np.allclose(fa, a ** self.k, rtol=1e-12, atol=0):
                raise InvalidInputError(f"loss {self.name} is not t**{self.k}")
        return self


def squared():
    return LossFn(CONVEX, np.square, k=2.0, name="sq", kernel=(KERNEL_POWER, 2.0))


def absolute():
    return LossFn(POWER, np.abs, k=1.0, name="abs", kernel=(KERNEL_POWER, 1.0))


def power(k):
    k = float(k)
    return LossFn(POWER, lambda t: np.power(t, k), k=k, name=f"pow:{k:g}",
                  kernel=(KERNEL_POWER, k))


def threshold(tau):
    """Zero-one loss ell(t) = 1{t >= tau}."""
    tau = float(tau)
    if not tau >= 0:
        raise InvalidInputError("threshold must be non-negative")
    return LossFn(GENERIC, lambda t: np.where(t >= tau, 1.0, 0.0), name=f"thresh:{tau:g}",
                  kernel=(KERNEL_THRESHOLD, tau))


def custom(fn, kind=GENERIC, k=None, name="custom", check=False):
    loss = LossFn(kind, fn, k=k, name=name)
    return loss.validate() if check else loss


def parse_loss(spec):
    """Parse ``sq``, ``abs``, ``pow:<k>`` or ``thresh:<tau>`` (case-sensitive)."""
    if spec == "sq":
        return squared()
    if spec == "abs":
        return absolute()
    head, _, arg = spec.partition(":")
    if head in ("pow", "thresh") and arg:
        try:
            value = float(arg)
        except ValueError:
            raise ConfigError(f"malformed loss spec {spec!r}") from None
        try:
            return power(value) if head == "pow" else threshold(value)
        except InvalidInputError as exc:
            raise ConfigError(f"malformed loss spec {spec!r}: {exc}") from None
    raise ConfigError(f"malformed loss spec {spec!r}")


def _as_points(v, theta):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if v.shape != theta.shape or v.ndim != 1:
        raise InvalidInputError(f"dimension mismatch: {v.shape} vs {theta.shape}")
    return v, theta


def loss_value(loss, v, theta):
    """ell(||v - theta||) with the Euclidean norm."""
    v, theta = _as_points(v, theta)
    return float(loss(np.linalg.norm(v - theta)))


def separation(loss, theta0, theta1):
    """Separation entering the bound for this loss class.

    convex: 2 ell(d/2); generic: ell(d/2); power: d, where d = ||theta0 - theta1||.
    """
    a, b = _as_points(theta0, theta1)
    d = float(np.linalg.norm(a - b))
    if loss.kind == POWER:
        return d
    half = float(loss(0.5 * d))
    return 2.0 * half if loss.kind == CONVEX else half

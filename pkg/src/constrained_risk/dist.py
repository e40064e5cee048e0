"""Statistical models: Gaussian location family, finite discrete laws,
n-fold products and smoothly tilted perturbations of a base law.

Every model exposes ``theta`` (the parameter, the mean unless overridden),
``logpdf``/``pdf``, ``sample(rng, size)`` and, for continuous models, an
integration ``domain``. Gaussians are integrated over mean +/- 12 sd; the
neglected tail mass is 2*Phi(-12) < 4e-33, far below every tolerance here.
"""

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigError, InvalidInputError, NumericError

GAUSS_HALF_WIDTH = 12.0
QUAD_TOL = 1e-9
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# --- the tilting function -------------------------------------------------

def phi(u):
    """Logistic tilt 2 / (1 + exp(-2u)), written as 1 + tanh(u) to avoid overflow."""
    out = 1.0 + np.tanh(u)
    return float(out) if np.ndim(out) == 0 else out


def log_phi(u):
    u = np.asarray(u, dtype=float)
    out = math.log(2.0) - np.logaddexp(0.0, -2.0 * u)
    return float(out) if out.ndim == 0 else out


def phi_prime(u):
    return 1.0 - np.tanh(u) ** 2


def phi_second(u):
    th = np.tanh(u)
    return -2.0 * th * (1.0 - th ** 2)


@lru_cache(maxsize=None)
def phi_smoothness():
    """max |phi''| over the real line, located numerically (about 0.7698).

    phi'' is odd, so searching u >= 0 suffices; |phi'| peaks at 1 at u = 0.
    """
    res = optimize.minimize_scalar(lambda u: -abs(phi_second(u)), bounds=(0.0, 3.0),
                                   method="bounded", options={"xatol": 1e-12})
    return float(-res.fun)


# --- quadrature -----------------------------------------------------------

def integrate_1d(f, lo, hi, points=None, tol=QUAD_TOL):
    """Adaptive Gauss-Kronrod integral of ``f`` over [lo, hi].

    Returns ``(value, abs_error)``; raises NumericError when the error
    estimate exceeds ``tol * max(1, |value|)``.
    """
    pts = None
    if points is not None:
        pts = sorted({float(p) for p in points if lo < p < hi}) or None
    value, err = integrate.quad(lambda z: float(f(z)), lo, hi, points=pts, epsabs=tol * 1e-3,
                                epsrel=1e-12, limit=500)
    if not np.isfinite(value) or err > tol * max(1.0, abs(value)):
        raise NumericError("quadrature did not converge", value=value, error=err, lo=lo, hi=hi)
    return value, err


# --- models ---------------------------------------------------------------

class Model:
    """Common interface. Subclasses are frozen dataclasses."""

    discrete = False

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    def expect(self, f, tol=QUAD_TOL):
        """(E[f(Z)], abs error) by exact summation or quadrature."""
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError

    @property
    def sd(self):
        mean, _ = self.expect(lambda z: z)
        second, _ = self.expect(lambda z: z * z)
        return math.sqrt(max(second - mean ** 2, 0.0))


@dataclass(frozen=True)
class Gaussian(Model):
    mean: float
    var: float

    def __post_init__(self):
        if not self.var > 0:
            raise InvalidInputError("variance must be positive")

    @property
    def theta(self):
        return float(self.mean)

    @property
    def sd(self):
        return math.sqrt(self.var)

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        return -0.5 * (z - self.mean) ** 2 / self.var - 0.5 * math.log(self.var) - _LOG_SQRT_2PI

    def domain(self):
        h = GAUSS_HALF_WIDTH * self.sd
        return self.mean - h, self.mean + h

    def expect(self, f, tol=QUAD_TOL):
        lo, hi = self.domain()
        return integrate_1d(lambda z: f(z) * self.pdf(z), lo, hi, points=[self.mean], tol=tol)

    def sample(self, rng, size):
        return rng.normal(self.mean, self.sd, size)

    def spec(self):
        return f"gauss:{self.mean:g}:{self.var:g}"


@dataclass(frozen=True)
class Discrete(Model):
    """Finite law on the real line. ``theta`` defaults to the mean."""

    support: tuple
    pmf: tuple
    theta_override: Optional[float] = None
    discrete = True

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        p = np.asarray(self.pmf, dtype=float)
        if s.ndim != 1 or s.shape != p.shape or s.size == 0:
            raise InvalidInputError("support and pmf must be equal-length 1-d sequences")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidInputError("pmf must be non-negative and sum to 1 within 1e-12")
        if len(np.unique(s)) != s.size:
            raise InvalidInputError("support points must be distinct")
        object.__setattr__(self, "support", tuple(float(x) for x in s))
        object.__setattr__(self, "pmf", tuple(float(x) for x in p))

    @property
    def points(self):
        return np.asarray(self.support)

    @property
    def probs(self):
        return np.asarray(self.pmf)

    @property
    def theta(self):
        if self.theta_override is not None:
            return float(self.theta_override)
        return float(np.dot(self.points, self.probs))

    def _index(self, z):
        z = np.asarray(z, dtype=float)
        order = np.argsort(self.points)
        pos = np.clip(np.searchsorted(self.points[order], z), 0, len(order) - 1)
        idx = order[pos]
        return idx, self.points[idx] == z

    def pdf(self, z):
        idx, hit = self._index(z)
        return np.where(hit, self.probs[idx], 0.0)

    def logpdf(self, z):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(z))

    def expect(self, f, tol=QUAD_TOL):
        return float(math.fsum(self.probs * np.asarray(f(self.points), dtype=float))), 0.0

    def sample(self, rng, size):
        return rng.choice(self.points, size=size, p=self.probs)

    def spec(self):
        return f"discrete[{len(self.support)}]"


@dataclass(frozen=True)
class Product(Model):
    """n i.i.d. copies of ``base``; theta is the base parameter."""

    base: Model
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError("product size n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))

    @property
    def theta(self):
        return self.base.theta

    def logpdf(self, z):
        """Joint log-density of rows of shape (..., n)."""
        return np.sum(self.base.logpdf(z), axis=-1)

    def sample(self, rng, size):
        size = (size,) if np.ndim(size) == 0 else tuple(size)
        draws = self.base.sample(rng, int(np.prod(size)) * self.n)
        return np.asarray(draws).reshape(size + (self.n,))

    def sample_mean(self, rng, count):
        """Draws of the sample mean; exact N(mu, s^2/n) shortcut for Gaussian bases."""
        if isinstance(self.base, Gaussian):
            return rng.normal(self.base.mean, self.base.sd / math.sqrt(self.n), count)
        return self.sample(rng, count).mean(axis=-1)

    def spec(self):
        return f"{self.base.spec()}^n:{self.n}"


# --- scores and tilting ---------------------------------------------------

@dataclass(frozen=True)
class Score:
    """A perturbation direction g with caller-declared E0[g] and E0[g^2]."""

    fn: Callable = field(repr=False, compare=False)
    mean: float = 0.0
    second_moment: float = 1.0
    name: str = "custom"

    def __call__(self, z):
        return self.fn(np.asarray(z, dtype=float))

    def scaled(self, c):
        fn = self.fn
        return Score(lambda z: c * fn(z), c * self.mean, c * c * self.second_moment,
                     f"{c:g}*{self.name}")


_STANDARD_SCORES = {
    "id": lambda u: u,
    "hermite2": lambda u: (u * u - 1.0) / math.sqrt(2.0),
    "mix": lambda u: (u + u * u - 1.0) / math.sqrt(3.0),
}


def builtin_score(name, base):
    """Built-in scores evaluated on the standardized variable (z - mean)/sd.

    Under a Gaussian base all three have mean 0 and second moment 1. For
    other bases the moments are computed, not assumed.
    """
    if name not in _STANDARD_SCORES:
        raise ConfigError(f"unknown score {name!r}; expected one of {sorted(_STANDARD_SCORES)}")
    h = _STANDARD_SCORES[name]
    mu = base.mean if isinstance(base, Gaussian) else base.expect(lambda z: z)[0]
    sd = base.sd
    fn = lambda z: h((z - mu) / sd)  # noqa: E731
    if isinstance(base, Gaussian):
        return Score(fn, 0.0, 1.0, name)
    m1, _ = base.expect(fn)
    m2, _ = base.expect(lambda z: fn(z) ** 2)
    return Score(fn, m1, m2, name)


def score_moments(base, g):
    m1, _ = base.expect(g)
    m2, _ = base.expect(lambda z: g(z) ** 2)
    return m1, m2


def validate_score(base, g, tol=1e-6):
    """Reject a score whose declared moments disagree with quadrature by > tol."""
    m1, m2 = score_moments(base, g)
    if abs(m1 - g.mean) > tol or abs(m2 - g.second_moment) > tol:
        raise InvalidInputError(
            f"score {g.name}: declared moments ({g.mean}, {g.second_moment}) "
            f"but computed ({m1:.3g}, {m2:.3g})")
    return m1, m2


def influence_pairing(base, influence, g):
    """E0[influence(Z) g(Z)], the first-order slope of t -> theta(P_{t,g})."""
    value, _ = base.expect(lambda z: influence(z) * g(z))
    return value


def mean_influence(base):
    """Influence function of the mean functional, z - E0[Z]."""
    mu = base.theta
    return lambda z: np.asarray(z, dtype=float) - mu


def in_G0(base, g, influence=None, tol=1e-8):
    """Membership in the non-trivial perturbation set: E0 g = 0, E0 g^2 <= 1, pairing != 0."""
    influence = influence if influence is not None else mean_influence(base)
    m1, m2 = score_moments(base, g)
    pairing = influence_pairing(base, influence, g)
    return abs(m1) <= tol and m2 <= 1.0 + tol and abs(pairing) > tol


def tilt_normalizer(base, g, t, tol=QUAD_TOL):
    """C_t = E0[phi(t g(Z))], exact for discrete bases."""
    value, err = base.expect(lambda z: phi(t * g(z)), tol=tol)
    if err > tol:
        raise NumericError("tilt normalizer error above tolerance", value=value, error=err)
    return value


@dataclass(frozen=True)
class Tilted(Model):
    """dP_t(z) = phi(t g(z)) dP0(z) / C_t.

    ``C_t`` and ``theta`` (the tilted mean) are computed at construction.
    ``phi_K`` defaults to max |phi''|.
    """

    base: Model
    g: Score
    t: float
    phi_K: Optional[float] = None
    check_score: bool = True
    C_t: float = field(init=False)
    theta: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.base, Product):
            raise InvalidInputError("tilt the marginal, then take the product")
        if self.check_score:
            validate_score(self.base, self.g)
        if self.phi_K is None:
            object.__setattr__(self, "phi_K", phi_smoothness())
        c = tilt_normalizer(self.base, self.g, self.t)
        if not c > 0:
            raise NumericError("non-positive tilt normalizer", value=c)
        object.__setattr__(self, "C_t", c)
        mean, _ = self.base.expect(lambda z: z * phi(self.t * self.g(z)) / c)
        object.__setattr__(self, "theta", float(mean))

    @property
    def discrete(self):
        return self.base.discrete

    def weight(self, z):
        """Likelihood ratio dP_t/dP0 at z."""
        return phi(self.t * self.g(z)) / self.C_t

    def logpdf(self, z):
        return log_phi(self.t * self.g(z)) + self.base.logpdf(z) - math.log(self.C_t)

    def domain(self):
        return self.base.domain()

    @property
    def points(self):
        return self.base.points

    @property
    def probs(self):
        return self.base.probs * self.weight(self.base.points)

    def expect(self, f, tol=QUAD_TOL):
        return self.base.expect(lambda z: f(z) * self.weight(z), tol=tol)

    def sample(self, rng, size):
        size = (size,) if np.ndim(size) == 0 else tuple(size)
        draws, _ = rejection_sample(self, int(np.prod(size)), rng)
        return draws.reshape(size)

    def spec(self):
        return f"tilt:{self.base.spec()}:{self.g.name}:{self.t:g}"


def tilt_density(m, z):
    return m.pdf(z)


MIN_ACCEPTANCE = 0.25
_CHECK_AFTER = 10_000


def rejection_sample(m, count, rng):
    """Draw ``count`` points from a tilted model.

    Proposals come from the base and are accepted with probability
    phi(t g(z)) / 2 <= 1, so the acceptance rate is C_t / 2.
    Returns ``(samples, acceptance_rate)``.
    """
    chunks, got, accepted, proposed = [], 0, 0, 0
    while got < count:
        batch = max(1024, int(2.2 * (count - got)))
        z = np.asarray(m.base.sample(rng, batch), dtype=float)
        u = rng.random(batch)
        keep = z[u < 0.5 * phi(m.t * m.g(z))]
        proposed += batch
        accepted += keep.size
        if proposed >= _CHECK_AFTER and accepted < MIN_ACCEPTANCE * proposed:
            raise NumericError("tilted sampler acceptance rate below 0.25",
                               accepted=accepted, proposed=proposed)
        take = keep[: count - got]
        chunks.append(take)
        got += take.size
    out = np.concatenate(chunks) if chunks else np.empty(0)
    return out, accepted / proposed if proposed else float("nan")


def tilt_sample(m, count, seed):
    rng = np.random.default_rng(seed)
    draws, _ = rejection_sample(m, count, rng)
    return draws


# --- spec strings ---------------------------------------------------------

def load_discrete(path):
    try:
        data = json.loads(Path(path).read_text())
        return Discrete(tuple(data["support"]), tuple(data["pmf"]), data.get("theta"))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load discrete model from {path}: {exc}") from None


def parse_model(spec):
    """Parse a model spec string.

    ``gauss:<mean>:<var>``, ``tilt:<base>:<g-name>:<t>``,
    ``discrete:<file.json>`` (or a bare ``*.json`` path), any of which may be
    followed by ``^n:<n>`` for an n-fold product.
    """
    spec = spec.strip()
    if "^n:" in spec:
        inner, _, n = spec.rpartition("^n:")
        try:
            return Product(parse_model(inner), int(n))
        except (ValueError, InvalidInputError):
            raise ConfigError(f"malformed product size in {spec!r}") from None
    if spec.startswith("gauss:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"malformed gaussian spec {spec!r}")
        try:
            return Gaussian(float(parts[1]), float(parts[2]))
        except (ValueError, InvalidInputError):
            raise ConfigError(f"malformed gaussian spec {spec!r}") from None
    if spec.startswith("tilt:"):
        body = spec[len("tilt:"):]
        parts = body.rsplit(":", 2)
        if len(parts) != 3:
            raise ConfigError(f"malformed tilt spec {spec!r}")
        base = parse_model(parts[0])
        try:
            t = float(parts[2])
        except ValueError:
            raise ConfigError(f"malformed tilt parameter in {spec!r}") from None
        return Tilted(base, builtin_score(parts[1], base), t)
    if spec.startswith("discrete:"):
        return load_discrete(spec[len("discrete:"):])
    if spec.endswith(".json"):
        return load_discrete(spec)
    raise ConfigError(f"unrecognized model spec {spec!r}")

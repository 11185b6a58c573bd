"""Observables and closed-form quantities for IDLA on the cylinder."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from numba import njit

from .lattice import CardinalityMismatch, Cluster, Grid, IDLAError, Site, check_width
from .rng import RngStream, next_double, reset_stream


class DomainError(IDLAError, ValueError):
    pass


class MissingSnapshot(IDLAError, KeyError):
    pass


# harmonic function psi

def solve_qn(n: int) -> float:
    """Positive root of cosh(q / n) = 2 - cos(2 pi / n)."""
    n = check_width(n)
    c = 2.0 - math.cos(2.0 * math.pi / n)
    # acosh(c) = log1p((c - 1) + sqrt((c - 1)(c + 1))) is accurate for c near 1
    e = c - 1.0
    return n * math.log1p(e + math.sqrt(e * (c + 1.0)))


def psi(s: tuple[int, int], n: int, q: float | None = None) -> float:
    q = solve_qn(n) if q is None else q
    x, y = s
    return math.exp(q * y / n) * math.sin(2.0 * math.pi * x / n)


def psi_array(x: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    q = solve_qn(n)
    return np.exp(q * np.asarray(y, float) / n) * np.sin(2.0 * np.pi * np.asarray(x, float) / n)


def _partial_rows(a: Cluster | Grid) -> tuple[int, int, np.ndarray]:
    """(base, first level, occupancy rows above base) for either representation."""
    if isinstance(a, Grid):
        first, occ = a.partial_rows()
        return a.base, first, occ
    occ = np.zeros((len(a.rows), a.n), dtype=np.uint8)
    for i, r in enumerate(a.rows):
        for x in range(a.n):
            occ[i, x] = r >> x & 1
    return a.base, a.base + 1, occ


def imbalance(a: Cluster | Grid, reference_level: int = 0) -> float:
    """u_A = (1/N) * sum of psi over A, with psi measured from ``reference_level``.

    Full rows contribute exactly zero, so only rows above the filled base are summed.
    """
    n = a.n
    _, first, occ = _partial_rows(a)
    if occ.shape[0] == 0:
        return 0.0
    q = solve_qn(n)
    levels = np.arange(first, first + occ.shape[0]) - reference_level
    s = np.sin(2.0 * np.pi * np.arange(n) / n)
    return float(np.exp(q * levels / n) @ (occ @ s)) / n


# test functions

_PROFILE_RE = re.compile(r"^(exp|poly|bump)=(.+)$")


@dataclass(frozen=True)
class Profile:
    """A real multiplier of y: ``exp=c`` (e^{c y}), ``poly=c0;c1;..``, ``bump=a;b``."""

    spec: str = ""

    def __post_init__(self):
        if self.spec and not _PROFILE_RE.match(self.spec):
            raise ValueError(f"unknown profile {self.spec!r}")
        if self.spec:
            self._params()

    def _params(self) -> tuple[str, list[float]]:
        kind, args = _PROFILE_RE.match(self.spec).groups()
        vals = [float(v) for v in args.split(";")]
        if kind == "exp" and len(vals) != 1:
            raise ValueError("exp profile takes one parameter")
        if kind == "bump" and (len(vals) != 2 or not vals[0] < vals[1]):
            raise ValueError("bump profile takes a;b with a < b")
        return kind, vals

    @property
    def constant(self) -> bool:
        return not self.spec

    def __call__(self, y: float) -> float:
        if not self.spec:
            return 1.0
        kind, v = self._params()
        if kind == "exp":
            return math.exp(v[0] * y)
        if kind == "poly":
            return sum(c * y**i for i, c in enumerate(v))
        a, b = v
        if not a < y < b:
            return 0.0
        u = (2.0 * y - a - b) / (b - a)
        return math.exp(-1.0 / (1.0 - u * u))

    def integral(self, lo: float, hi: float) -> float:
        if not self.spec:
            return hi - lo
        kind, v = self._params()
        if kind == "exp":
            c = v[0]
            return hi - lo if c == 0 else (math.exp(c * hi) - math.exp(c * lo)) / c
        if kind == "poly":
            return sum(c * (hi ** (i + 1) - lo ** (i + 1)) / (i + 1) for i, c in enumerate(v))
        from scipy.integrate import quad

        a, b = v
        lo2, hi2 = max(lo, a), min(hi, b)
        if lo2 >= hi2:
            return 0.0
        val, _ = quad(self, lo2, hi2, epsabs=1e-13, epsrel=1e-11, limit=200)
        return val


@dataclass(frozen=True)
class Mode:
    k: int
    coef: complex
    profile: Profile = field(default_factory=Profile)

    def alpha(self, y: float) -> complex:
        return self.coef * self.profile(y)


@dataclass(frozen=True)
class TestFunction:
    """phi(x, y) = sum_k alpha_k(y) e^{2 pi i k x} with alpha_{-k} = conj(alpha_k)."""

    __test__ = False  # not a pytest class

    modes: tuple[Mode, ...]

    def __post_init__(self):
        ks = [m.k for m in self.modes]
        if len(set(ks)) != len(ks):
            raise ValueError("duplicate mode")
        by_k = {m.k: m for m in self.modes}
        for m in self.modes:
            partner = by_k.get(-m.k)
            if partner is None:
                raise ValueError(f"mode {m.k} has no conjugate partner {-m.k}")
            if partner.profile != m.profile or abs(partner.coef - m.coef.conjugate()) > 1e-12:
                raise ValueError(f"modes {m.k} and {-m.k} are not conjugate")

    @classmethod
    def parse(cls, text: str) -> "TestFunction":
        """Parse ``k:re,im[@profile]`` tokens separated by whitespace."""
        modes = []
        for tok in text.split():
            m = re.fullmatch(r"(-?\d+):([^,@]+),([^,@]+)(?:@(.+))?", tok)
            if m is None:
                raise ValueError(f"bad mode literal {tok!r}")
            k, re_, im, prof = m.groups()
            modes.append(Mode(int(k), complex(float(re_), float(im)), Profile(prof or "")))
        if not modes:
            raise ValueError("empty test function")
        return cls(tuple(modes))

    @classmethod
    def sin(cls, k: int = 1) -> "TestFunction":
        return cls((Mode(k, -0.5j), Mode(-k, 0.5j)))

    @classmethod
    def cos(cls, k: int = 1) -> "TestFunction":
        return cls((Mode(k, 0.5 + 0j), Mode(-k, 0.5 + 0j)))

    @classmethod
    def constant(cls, c: float = 1.0) -> "TestFunction":
        return cls((Mode(0, complex(c, 0.0)),))

    def __call__(self, x: float, y: float) -> float:
        return sum(m.alpha(y) * np.exp(2j * np.pi * m.k * x) for m in self.modes).real

    def literal(self) -> str:
        out = []
        for m in self.modes:
            s = f"{m.k}:{m.coef.real:g},{m.coef.imag:g}"
            if m.profile.spec:
                s += "@" + m.profile.spec
            out.append(s)
        return " ".join(out)


def discrepancy_functional(
    a: Cluster | Grid,
    t: int,
    phi: TestFunction,
    vertical_shift: float = 0.0,
    reference_level: int = 0,
) -> float:
    """D_{N,T}(phi): integral of N(1_{A_N} - 1_{y <= T/N^2}) against phi(x, y - shift).

    Site (x, y) fills the cell ((x-1)/N, x/N] x ((y-1)/N, y/N] with y measured from
    ``reference_level``; ``A`` must contain every level up to ``reference_level``
    and exactly ``T`` sites above it.
    """
    n = a.n
    base, first, occ = _partial_rows(a)
    if base < reference_level:
        raise ValueError("cluster must contain the reference half-cylinder")
    count = (base - reference_level) * n + int(occ.sum())
    if count != t:
        raise CardinalityMismatch(f"cluster has {count} sites above level {reference_level}, T = {t}")
    levels = np.arange(first, first + occ.shape[0]) - reference_level
    xs = np.arange(n)
    total = 0.0 + 0.0j
    for m in phi.modes:
        if m.k == 0:
            # full rows plus partial rows, minus the strip below T/N^2
            acc = m.profile.integral(-vertical_shift, (base - reference_level) / n - vertical_shift)
            for lev, c in zip(levels, occ.sum(axis=1)):
                if c:
                    acc += c / n * m.profile.integral((lev - 1) / n - vertical_shift, lev / n - vertical_shift)
            acc -= m.profile.integral(-vertical_shift, t / n**2 - vertical_shift)
            total += n * m.coef * acc
            continue
        w = 2j * np.pi * m.k
        xk = (np.exp(w * xs / n) - np.exp(w * (xs - 1) / n)) / w
        rows = occ @ xk
        if m.profile.constant:
            ys = np.full(len(levels), 1.0 / n)
        else:
            ys = np.array([m.profile.integral((lev - 1) / n - vertical_shift, lev / n - vertical_shift) for lev in levels])
        total += n * m.coef * complex(rows @ ys)
    return float(total.real)


def gff_variance(phi: TestFunction, y0: float = 1.0, stationary: bool = False) -> float:
    if not stationary and y0 <= 0:
        raise DomainError("y0 must be positive for the flat-start variance")
    v = 0.0
    for m in phi.modes:
        if m.k == 0:
            continue
        k = abs(m.k)
        if stationary:
            v += abs(m.alpha(0.0)) ** 2 / (4.0 * math.pi * k)
        else:
            v += abs(m.alpha(y0)) ** 2 * (-math.expm1(-4.0 * math.pi * k * y0)) / (4.0 * math.pi * k)
    return v


# maximal fluctuations

@dataclass(frozen=True)
class FluctuationReport:
    t: int
    inner_ok: bool
    outer_ok: bool
    max_overshoot: int
    max_undershoot: int
    overshoot: float  # h(A) - t/N, floored at 0
    undershoot: float  # t/N - k_A, floored at 0

    @property
    def max_fluctuation(self) -> int:
        return max(self.max_overshoot, self.max_undershoot)


def fluctuation_check(a: Cluster | Grid, t: int, n: int | None = None, threshold: float = math.inf) -> FluctuationReport:
    """Compare A with the ideal rectangle R_{t/N}.

    Integer fields use the level floor(t/N); the real fields use t/N itself.
    ``threshold`` is the b log N tolerance for the inner and outer flags.
    """
    n = a.n if n is None else n
    if isinstance(a, Grid):
        k, h = a.base, a.top
    else:
        k, h = a.max_filled_level(), a.height()
    ideal = t / n
    level = t // n
    inner = k >= math.floor(ideal - threshold) if math.isfinite(threshold) else True
    outer = h <= math.floor(ideal + threshold) if math.isfinite(threshold) else True
    return FluctuationReport(
        t,
        bool(inner),
        bool(outer),
        max(0, h - level),
        max(0, level - k),
        max(0.0, h - ideal),
        max(0.0, ideal - k),
    )


# early and late points

@dataclass(frozen=True)
class EarlyLateReport:
    t: int
    m: int
    l: int
    early: tuple[Site, ...]
    late: tuple[Site, ...]

    @property
    def any(self) -> bool:
        return bool(self.early or self.late)


def required_snapshot_times(t: int, n: int) -> list[int]:
    """Checkpoint times that make detect_early_late answerable at time t."""
    return list(range(0, t + 1, n)) + ([t] if t % n else [])


def detect_early_late(snapshots: Mapping[int, Cluster], m: int, l: int, t: int | None = None) -> EarlyLateReport:
    """m-early sites of A(t) and l-late sites of R_{t/N} from checkpointed clusters.

    Early candidates are occupied sites with y >= 0 and (y - m)N >= 0; when that
    time is at least t, monotonicity makes the site early.  Late candidates are
    sites of R_{t/N} with y >= 0 and (y + l)N <= t.
    """
    if not snapshots:
        raise MissingSnapshot("no snapshots")
    t = max(snapshots) if t is None else t
    if t not in snapshots:
        raise MissingSnapshot(t)
    at = snapshots[t]
    n = at.n

    def snap(s: int) -> Cluster:
        if s not in snapshots:
            raise MissingSnapshot(s)
        return snapshots[s]

    early = []
    for y in range(max(m, 0), at.height() + 1):
        s = (y - m) * n
        row = at.row_mask(y)
        if not row:
            continue
        ref = None if s >= t else snap(s)
        for x in range(n):
            if row >> x & 1 and (ref is None or ref.is_occupied((x, y))):
                early.append(Site(x, y))
    late = []
    for y in range(0, t // n + 1):
        s = (y + l) * n
        if s > t:
            break
        ref = snap(s)
        for x in range(n):
            if not ref.is_occupied((x, y)):
                late.append(Site(x, y))
    return EarlyLateReport(t, m, l, tuple(early), tuple(late))


# a priori and excess-height constants

def log_apriori_moment_bound(k: int, t: int, h0: int, n: int) -> float:
    j = k - h0
    if j <= 0:
        raise DomainError("need k > h0")
    if t == 0:
        return -math.inf
    return -(j - 1) * math.log(n) + j * math.log(t) - math.lgamma(j + 1)


def apriori_moment_bound(k: int, t: int, h0: int, n: int) -> float:
    """Upper bound (1/N)^{k-h0-1} t^{k-h0} / (k-h0)! on E|A(t) ∩ {y = k}|."""
    lb = log_apriori_moment_bound(k, t, h0, n)
    if lb > 709.0:
        return math.inf
    return math.exp(lb)


def excess_constants(n: int, eta: float = 0.5) -> tuple[float, int, int]:
    """(n*, E*, Delta) with n* = 20 N ln N, E* = ceil(2 n* N ln(N/(1-eta))), Delta = ceil(2 N^2 E*) + 1."""
    n = check_width(n)
    if not 0.0 < eta < 1.0:
        raise DomainError("eta must lie in (0, 1)")
    n_star = 20.0 * n * math.log(n)
    e_star = math.ceil(2.0 * n_star * n * math.log(n / (1.0 - eta)))
    delta = 2 * n * n * e_star + 1
    return n_star, e_star, delta


def excess_bound_min_n(eta: float = 0.5, upto: int = 4096) -> int:
    """Smallest N0 such that E* > 40 (N ln N)^2 for every N0 <= N <= upto."""
    n0 = None
    for n in range(upto, 2, -1):
        _, e_star, _ = excess_constants(n, eta)
        if e_star > 40.0 * (n * math.log(n)) ** 2:
            n0 = n
        else:
            break
    if n0 is None:
        raise DomainError("inequality fails at the top of the range")
    return n0


# auxiliary reflected walk, in units of 1/N

def reflected_walk_drift(n: int, eta: Fraction | float) -> Fraction | float:
    """E[X_{i+1} - X_i | X_i > 0], expanded from the transition law."""
    up = (1 - eta) / n if isinstance(eta, Fraction) else (1.0 - eta) / n
    one_n = Fraction(1, n) if isinstance(eta, Fraction) else 1.0 / n
    return up * (1 - one_n) + (1 - up) * (-one_n)


@njit(cache=True, nogil=True)
def _reflected_walk(st, n, p_up, barrier, max_steps, stop_at_zero, x0):
    x = x0
    steps = 0
    zeros = 1 if x0 == 0 else 0
    while steps < max_steps:
        if x == 0:
            x = n - 1
        elif next_double(st) < p_up:
            x += n - 1
        else:
            x -= 1
        steps += 1
        if x >= barrier:
            return True, steps, zeros
        if x == 0:
            zeros += 1
            if stop_at_zero:
                return False, steps, zeros
    return False, steps, zeros


@njit(cache=True, nogil=True)
def _reflected_path(st, n, p_up, steps, out):
    x = 0
    out[0] = 0
    for i in range(steps):
        if x == 0:
            x = n - 1
        elif next_double(st) < p_up:
            x += n - 1
        else:
            x -= 1
        out[i + 1] = x


def _barrier_units(n: int, e_star_scaled) -> int:
    if e_star_scaled <= 0:
        raise DomainError("barrier must be positive")
    return math.ceil(Fraction(e_star_scaled) * n) if not isinstance(e_star_scaled, float) else math.ceil(e_star_scaled * n - 1e-12)


def simulate_reflected_walk(
    n: int,
    eta: float,
    e_star_scaled,
    max_steps: int,
    rng: RngStream,
    stop_at_zero: bool = True,
    start: Fraction | float = 0,
) -> tuple[bool, int, int]:
    """Run X (reflecting at 0, jumps 1-1/N w.p. (1-eta)/N, else -1/N) until the barrier.

    With ``stop_at_zero`` the run also ends when X returns to 0 after leaving it.
    Returns (barrier hit first, steps taken, visits to 0).
    """
    p_up = (1.0 - eta) / n
    if not 0.0 < p_up < 1.0:
        raise DomainError("up-step probability must lie in (0, 1)")
    x0 = round(Fraction(start).limit_denominator(10 * n) * n) if not isinstance(start, float) else round(start * n)
    hit, steps, zeros = _reflected_walk(rng.state, n, p_up, _barrier_units(n, e_star_scaled), max_steps, stop_at_zero, x0)
    return bool(hit), int(steps), int(zeros)


def reflected_walk_path(n: int, eta: float, steps: int, rng: RngStream) -> np.ndarray:
    """The path X_0 = 0, X_1, ..., X_steps in units of 1/N (integers)."""
    out = np.empty(steps + 1, dtype=np.int64)
    _reflected_path(rng.state, n, (1.0 - eta) / n, steps, out)
    return out


def barrier_before_zero_probability(n: int, eta: float, barrier, excursions: int, rng: RngStream) -> float:
    """Fraction of excursions from 1 - 1/N that reach the barrier before 0."""
    p_up = (1.0 - eta) / n
    b = _barrier_units(n, barrier)
    hits = 0
    for _ in range(excursions):
        hit, _, _ = _reflected_walk(rng.state, n, p_up, b, 1 << 62, True, n - 1)
        hits += hit
    return hits / excursions


# statistical helpers used by tests and experiments

def g_test(observed: Mapping, expected: Mapping, total: int | None = None) -> tuple[float, float, int]:
    """Likelihood-ratio goodness of fit; returns (G, p-value, degrees of freedom).

    Cells with negligible expected mass are pooled into one.
    """
    from scipy.stats import chi2

    total = sum(observed.values()) if total is None else total
    keys = set(observed) | set(expected)
    obs, exp = [], []
    pooled_o, pooled_e = 0.0, 0.0
    for k in keys:
        e = float(expected.get(k, 0.0)) * total
        o = float(observed.get(k, 0))
        if e < 5.0:
            pooled_o += o
            pooled_e += e
        else:
            obs.append(o)
            exp.append(e)
    if pooled_e > 0 or pooled_o > 0:
        obs.append(pooled_o)
        exp.append(max(pooled_e, 1e-300))
    obs_a, exp_a = np.array(obs), np.array(exp)
    mask = obs_a > 0
    g = 2.0 * float(np.sum(obs_a[mask] * np.log(obs_a[mask] / exp_a[mask])))
    dof = max(len(obs) - 1, 1)
    return g, float(chi2.sf(g, dof)), dof


def mann_kendall(values: Sequence[float]) -> tuple[float, float]:
    """One-sided Mann-Kendall test for an increasing trend; returns (S, p-value)."""
    from scipy.stats import norm

    x = np.asarray(values, float)
    n = len(x)
    s = 0.0
    for i in range(n - 1):
        s += np.sign(x[i + 1 :] - x[i]).sum()
    _, counts = np.unique(x, return_counts=True)
    var = (n * (n - 1) * (2 * n + 5) - sum(c * (c - 1) * (2 * c + 5) for c in counts)) / 18.0
    if var <= 0:
        return s, 1.0
    z = (s - 1) / math.sqrt(var) if s > 0 else (s + 1) / math.sqrt(var) if s < 0 else 0.0
    return s, float(norm.sf(z))

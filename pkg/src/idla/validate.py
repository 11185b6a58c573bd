"""Oracle-backed self-check battery behind ``idla validate``.

Every check reports its measured value next to its tolerance.  A failing
check makes the command exit with status 1.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import _kernels as K
from .dynamics import sample_final_clusters, smash_sum
from .lattice import Cluster, Grid
from .oracle import (
    DEFAULT_DEPTH,
    exact_cluster_distribution,
    exact_exit_distribution,
    exact_smash_distribution,
    level_kernel,
)
from .rng import LANE_MISC, LANE_SMASH, RngFamily, RngStream
from .statistics import apriori_moment_bound, g_test, psi_array, solve_qn
from .walk import (
    ReturnDistribution,
    precompute_return_distribution,
    sample_horizontal_gaps,
    sample_tau1_batch,
    settle_samples,
)

G_LEVEL = 1e-3
CORRUPT_EPS = 0.2  # size of the deliberate error injected by the negative-control hook


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: str
    tolerance: str
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: measured {self.measured}; tolerance {self.tolerance} ({self.seconds:.1f}s)"


@dataclass(frozen=True)
class ValidateOptions:
    seed: int = 0
    samples: int = 100_000
    mgf_samples: int = 1_000_000
    moment_runs: int = 2000
    corrupt_return: bool = False


def _rd(n: int, opts: ValidateOptions) -> ReturnDistribution:
    rd = precompute_return_distribution(n)
    return rd.corrupted(CORRUPT_EPS) if opts.corrupt_return else rd


def _counts(arr: np.ndarray) -> dict[tuple[int, int], int]:
    out: dict[tuple[int, int], int] = {}
    for x, y in arr:
        k = (int(x), int(y))
        out[k] = out.get(k, 0) + 1
    return out


# individual checks; each returns (passed, measured, tolerance)

def check_return_distribution(opts: ValidateOptions):
    worst = 0.0
    for n in range(3, 9):
        oracle = np.asarray(level_kernel(n, -1, 400))[0]
        worst = max(worst, float(np.abs(_rd(n, opts).probs - oracle).max()))
    return worst < 1e-9, f"max |p - oracle| = {worst:.3e} over N=3..8", "< 1e-9"


_SETTLE_CASES = (
    # (cluster sites above base, start); the first case exits right after
    # return excursions, so it is the most sensitive to the return law
    ((), (0, 0)),
    (((0, 1), (1, 1), (0, 2)), (0, 0)),
    (((0, 1), (1, 1), (0, 2)), (2, -3)),
    (((1, 1),), (1, 1)),
)


def check_settle_vs_oracle(opts: ValidateOptions, contract: bool):
    worst_p, details = 1.0, []
    for i, (pts, start) in enumerate(_SETTLE_CASES):
        a = Cluster.from_sites(3, pts)
        exact = exact_exit_distribution(a, start)
        rd = _rd(3, opts)
        key = RngFamily(opts.seed, 100 + i + (10 if contract else 0), LANE_MISC).key
        # the uncontracted walk rejects down-steps at the oracle's truncation level,
        # so both sides describe the same chain (and the walk's run time is finite)
        floor = None if contract else -DEFAULT_DEPTH
        obs = _counts(settle_samples(a, start, opts.samples, key, contract, rd, floor=floor))
        _, p, _ = g_test(obs, exact)
        worst_p = min(worst_p, p)
        details.append(f"{p:.3g}")
    return worst_p > G_LEVEL, f"G-test p = [{', '.join(details)}]", f"each p > {G_LEVEL:g}"


def check_cluster_law(opts: ValidateOptions, shifted: bool):
    rd = _rd(3, opts)
    a0 = Cluster.flat(3)
    worst_p, details = 1.0, []
    # for t <= 3 the shifted law is an image of the plain one; t = 4 is the
    # first time the shifted chain releases a walker from a translated frame
    for t in (1, 2, 3, 4) if shifted else (1, 2, 3):
        exact = exact_cluster_distribution(a0, t, shifted=shifted)
        obs = sample_final_clusters(a0, t, opts.samples, opts.seed + 17 * t, shifted, rd)
        _, p, _ = g_test(obs, exact)
        worst_p = min(worst_p, p)
        details.append(f"t={t}: p={p:.3g} ({len(exact)} clusters)")
    return worst_p > G_LEVEL, "; ".join(details), f"each p > {G_LEVEL:g}"


def check_smash_order(opts: ValidateOptions):
    a = Cluster.from_sites(3, [(0, 1), (2, 1)])
    pts = [(0, 1), (1, 0), (0, 2)]
    laws = [exact_smash_distribution(a, perm, depth=20, exact=True) for perm in itertools.permutations(pts)]
    same = all(law == laws[0] for law in laws[1:])
    total = sum(laws[0].values(), Fraction(0))
    ok = same and total == 1
    return ok, f"{len(laws)} orders identical: {same}, total mass {total}", "exact rational equality"


def check_smash_sampler(opts: ValidateOptions):
    a = Cluster.from_sites(3, [(0, 1), (2, 1)])
    pts = [(0, 1), (1, 0), (0, 2)]
    exact = exact_smash_distribution(a, pts)
    n_runs = opts.samples // 5
    obs: dict[Cluster, int] = {}
    for r in range(n_runs):
        c = smash_sum(a, pts, RngFamily(opts.seed, r, LANE_SMASH))
        obs[c] = obs.get(c, 0) + 1
    _, p, _ = g_test(obs, exact)
    return p > G_LEVEL, f"G-test p = {p:.3g} over {n_runs} runs", f"p > {G_LEVEL:g}"


def check_psi_harmonic(opts: ValidateOptions):
    worst = 0.0
    for n in (3, 4, 8, 16, 64, 256):
        x = np.arange(n)[:, None]
        y = np.arange(-n, n + 1)[None, :]
        c = psi_array(x, y, n)
        lap = (
            psi_array(x + 1, y, n) + psi_array(x - 1, y, n)
            + psi_array(x, y + 1, n) + psi_array(x, y - 1, n) - 4.0 * c
        )
        scale = np.exp(solve_qn(n) * np.abs(y) / n)
        worst = max(worst, float(np.abs(lap / scale).max()))
    return worst < 1e-10, f"max |Laplacian psi| / e^(q|y|/N) = {worst:.3e}", "< 1e-10"


def check_qn(opts: ValidateOptions):
    worst = 0.0
    for n in (3, 4, 5, 8, 16, 64, 256, 1024, 4096):
        q = solve_qn(n)
        worst = max(worst, abs(math.cosh(q / n) - (2.0 - math.cos(2.0 * math.pi / n))))
    return worst < 1e-12, f"max |cosh(q/N) - (2 - cos(2pi/N))| = {worst:.3e}", "< 1e-12"


def check_mgf(opts: ValidateOptions):
    tau = sample_tau1_batch(opts.mgf_samples, RngStream(opts.seed, (0, 1), LANE_MISC))
    m = float(np.mean(0.8 ** tau.astype(float)))
    return abs(m - 0.5) <= 0.005, f"E[0.8^tau] = {m:.5f} over {tau.size} samples", "0.5 +- 0.005"


def check_gaps(opts: ValidateOptions):
    g = sample_horizontal_gaps(opts.mgf_samples, RngStream(opts.seed, (0, 2), LANE_MISC))
    m = float(np.mean(np.exp2(-g.astype(float))))
    se = float(np.std(np.exp2(-g.astype(float)))) / math.sqrt(g.size)
    return abs(m - 1 / 3) <= 4 * se, f"E[2^-G] = {m:.5f} (SE {se:.1e})", "1/3 within 4 SE"


def check_apriori(opts: ValidateOptions):
    n, times, levels = 8, (8, 16, 32, 64, 128), range(1, 8)
    rd = _rd(n, opts)
    sums = np.zeros((len(times), len(levels)))
    st = np.zeros(4, dtype=np.uint64)
    none = np.empty((0, 2), dtype=np.int64)
    for r in range(opts.moment_runs):
        g = Grid.from_cluster(Cluster.flat(n), headroom=max(times) + 8)
        key = RngFamily(opts.seed, r, LANE_MISC + 1).key
        done = 0
        for i, t in enumerate(times):
            K.run_particles(g.occ, g.cnt, g.meta, g.n, rd.lam, rd.costab, rd.cdf, key, done, t - done, False, none, st)
            done = t
            for j, k in enumerate(levels):
                sums[i, j] += _level_count(g, k)
    mu = sums / opts.moment_runs
    worst = -math.inf
    for i, t in enumerate(times):
        for j, k in enumerate(levels):
            b = apriori_moment_bound(k, t, 0, n)
            worst = max(worst, mu[i, j] / b)
    return worst <= 1.0, f"max mu_k(t) / bound = {worst:.3f} over {len(times) * len(levels)} (t, k) pairs", "<= 1"


def _level_count(g: Grid, k: int) -> int:
    if k <= g.base:
        return g.n
    return sum(1 for x in range(g.n) if g.is_occupied((x, k)))


CHECKS: dict[str, Callable[[ValidateOptions], tuple]] = {
    "return_distribution_vs_oracle": check_return_distribution,
    "settle_contracted_vs_oracle": lambda o: check_settle_vs_oracle(o, True),
    "settle_uncontracted_vs_oracle": lambda o: check_settle_vs_oracle(o, False),
    "cluster_law_N3_t<=3": lambda o: check_cluster_law(o, False),
    "shifted_cluster_law_N3_t<=4": lambda o: check_cluster_law(o, True),
    "smash_order_invariance_exact": check_smash_order,
    "smash_sampler_vs_oracle": check_smash_sampler,
    "psi_harmonicity": check_psi_harmonic,
    "q_N_residual": check_qn,
    "mgf_first_passage": check_mgf,
    "horizontal_gap_law": check_gaps,
    "apriori_moment_bound_N8": check_apriori,
}


def run_checks(opts: ValidateOptions, only: list[str] | None = None) -> list[CheckResult]:
    out = []
    for name, fn in CHECKS.items():
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            ok, measured, tol = fn(opts)
        except Exception as e:  # a crash is a failed check, reported like one
            ok, measured, tol = False, f"error {type(e).__name__}: {e}", "no exception"
        out.append(CheckResult(name, bool(ok), measured, tol, time.perf_counter() - t0))
    return out

"""Seeded, replicate-parallel experiments producing long-format records.

Every replicate is a pure function of ``(config, N, replicate)``; its random
streams are derived from ``(seed, lane, N, replicate)``.  Replicates run on a
thread pool (the kernels release the GIL) and the records are sorted before
writing, so output bytes do not depend on the thread count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .dynamics import ChainState, water_level_coupling
from .lattice import CardinalityMismatch, Cluster, check_width
from .rng import (
    LANE_CHAIN,
    LANE_CHAIN_B,
    LANE_INIT_A,
    LANE_INIT_B,
    LANE_PAIRS,
    LANE_WATER,
    RngFamily,
)
from .statistics import (
    TestFunction,
    discrepancy_functional,
    fluctuation_check,
    gff_variance,
    imbalance,
    mann_kendall,
    psi_array,
)

SCHEMA = 1
COLUMNS = ("experiment", "N", "param", "replicate", "t", "observable", "value", "stream")
SUMMARY = -1  # replicate index of aggregate rows


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: tuple[int, ...] = (32,)
    steps: int | None = None
    replicates: int = 100
    seed: int = 0
    eta: float = 0.5
    delta: float = 0.02
    phi: str = "1:0,-0.5 -1:0,0.5"
    burnin_mult: float = 20.0
    out: str | None = None
    fmt: str = "csv"
    threads: int = 1
    checkpoint_every: int | None = None
    # experiment-specific knobs
    d: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    alpha: float = 0.05
    y0: float = 1.0
    stationary: bool = False
    b: float = 2.0
    samples: int = 10
    init_mult: float = 1.0
    log_time: bool = False

    def validate(self) -> "ExperimentConfig":
        try:
            for n in self.n:
                check_width(n)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if not self.n:
            raise ConfigError("need at least one width")
        if self.replicates < 0:
            raise ConfigError("replicates must be >= 0")
        if self.steps is not None and self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if not 0.0 < self.eta < 1.0:
            raise ConfigError("eta must lie in (0, 1)")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if self.burnin_mult < 0 or self.init_mult < 0 or self.alpha < 0:
            raise ConfigError("multipliers must be >= 0")
        if self.y0 <= 0:
            raise ConfigError("y0 must be positive")
        if self.fmt not in ("csv", "jsonl"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ConfigError("checkpoint-every must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if any(x < 0 for x in self.d):
            raise ConfigError("d values must be >= 0")
        try:
            TestFunction.parse(self.phi)
        except ValueError as e:
            raise ConfigError(f"bad --phi: {e}") from None
        return self


@dataclass(frozen=True)
class Record:
    experiment: str
    n: int
    param: str
    replicate: int
    t: int
    observable: str
    value: float | int | str
    stream: str

    def __post_init__(self):
        # numpy scalars would otherwise leak their repr into the CSV
        object.__setattr__(self, "value", _fmt(self.value))

    def key(self):
        return (self.experiment, self.n, self.param, self.replicate, self.t, self.observable)


def family(seed: int, lane: int, n: int, replicate: int) -> RngFamily:
    """Stream family of one replicate; the width is folded into the lane."""
    return RngFamily(seed, replicate, lane * 4096 + n)


def log_n(n: int) -> float:
    return math.log(n)


def burn_in_steps(cfg: ExperimentConfig, n: int) -> int:
    return int(math.ceil(cfg.burnin_mult * n * n * log_n(n)))


# replicate bodies

def _fmt(v) -> float | int | str:
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return str(v)


def fluctuations_replicate(cfg: ExperimentConfig, n: int, rep: int, param: str = "") -> list[Record]:
    fam = family(cfg.seed, LANE_CHAIN, n, rep)
    t_end = cfg.steps if cfg.steps is not None else n * n
    times = set([t_end])
    if cfg.checkpoint_every:
        times.update(range(cfg.checkpoint_every, t_end + 1, cfg.checkpoint_every))
    if cfg.log_time:
        times.add(int(round(n * n * log_n(n))))
    state = ChainState(Cluster.flat(n), fam)
    out = []
    thr = cfg.b * log_n(n)
    for t in sorted(times):
        state.advance(t - state.t)
        r = fluctuation_check(state.grid, t, n, thr)
        for name, v in (
            ("overshoot", r.max_overshoot),
            ("undershoot", r.max_undershoot),
            ("max_fluctuation", r.max_fluctuation),
            ("inner_ok", r.inner_ok),
            ("outer_ok", r.outer_ok),
            ("height", state.grid.top),
        ):
            out.append(Record("fluctuations", n, param, rep, t, name, _fmt(v), fam.label()))
    return out


def fluctuations_summary(cfg: ExperimentConfig, records: list[Record]) -> list[Record]:
    out = []
    groups: dict[tuple[int, int], list[Record]] = {}
    for r in records:
        if r.observable in ("max_fluctuation", "overshoot", "undershoot"):
            groups.setdefault((r.n, r.t), []).append(r)
    for (n, t), rs in sorted(groups.items()):
        for obs in ("max_fluctuation", "overshoot", "undershoot"):
            v = np.array([r.value for r in rs if r.observable == obs], float)
            if v.size == 0:
                continue
            out.append(Record("fluctuations", n, "", SUMMARY, t, f"mean_{obs}", float(v.mean()), ""))
            out.append(Record("fluctuations", n, "", SUMMARY, t, f"max_{obs}", float(v.max()), ""))
        v = np.array([r.value for r in rs if r.observable == "max_fluctuation"], float)
        out.append(Record("fluctuations", n, "", SUMMARY, t, "mean_max_fluctuation_over_logN", float(v.mean() / log_n(n)), ""))
    return out


def stationary_cluster(cfg: ExperimentConfig, n: int, rep: int, lane: int) -> ChainState:
    state = ChainState(Cluster.flat(n), family(cfg.seed, lane, n, rep), shifted=True)
    state.advance(burn_in_steps(cfg, n))
    return state


def stationary_replicate(cfg: ExperimentConfig, n: int, rep: int, param: str = "") -> list[Record]:
    state = stationary_cluster(cfg, n, rep, LANE_CHAIN)
    lab = state.family.label()
    spacing = cfg.checkpoint_every or n * n
    out = []
    for i in range(cfg.samples):
        if i:
            state.advance(spacing)
        g = state.grid
        h = g.top
        card = int(g.row_counts().sum())
        t = state.t
        out.append(Record("stationary", n, param, rep, t, "height", h, lab))
        out.append(Record("stationary", n, param, rep, t, "h_over_logN", h / log_n(n), lab))
        out.append(Record("stationary", n, param, rep, t, "excess", h - card / n, lab))
        out.append(Record("stationary", n, param, rep, t, "imbalance", imbalance(g), lab))
    # independent burn-in for the stationarity gate
    gate = stationary_cluster(cfg, n, rep, LANE_CHAIN_B)
    out.append(Record("stationary", n, param, rep, gate.t, "imbalance_gate", imbalance(gate.grid), gate.family.label()))
    return out


def stationary_summary(cfg: ExperimentConfig, records: list[Record]) -> list[Record]:
    from scipy.stats import ks_2samp

    out = []
    for n in sorted({r.n for r in records}):
        rs = [r for r in records if r.n == n]
        hl = np.array([r.value for r in rs if r.observable == "h_over_logN"], float)
        hs = np.array([r.value for r in rs if r.observable == "height"], float)
        ex = np.array([r.value for r in rs if r.observable == "excess"], float)
        if hl.size == 0:
            continue
        first_t = {}
        for r in rs:
            if r.observable == "imbalance":
                first_t[r.replicate] = min(first_t.get(r.replicate, r.t), r.t)
        ua = np.array([r.value for r in rs if r.observable == "imbalance" and r.t == first_t[r.replicate]], float)
        ub = np.array([r.value for r in rs if r.observable == "imbalance_gate"], float)
        ks_p = float(ks_2samp(ua, ub).pvalue) if ua.size and ub.size else float("nan")
        for name, v in (
            ("q50_h_over_logN", float(np.quantile(hl, 0.5))),
            ("q99_h_over_logN", float(np.quantile(hl, 0.99))),
            ("max_height", float(hs.max())),
            ("min_excess", float(ex.min())),
            ("mean_excess", float(ex.mean())),
            ("stationarity_ks_p", ks_p),
            ("stationarity_gate", int(ks_p > 1e-3)),
        ):
            out.append(Record("stationary", n, "", SUMMARY, 0, name, v, ""))
    return out


def _matched_initial_pair(cfg: ExperimentConfig, n: int, rep: int) -> tuple[Cluster, Cluster]:
    """Two short shifted-chain runs, each extended by up to 50N particles.

    Returns the states at the extension times (i, j) with equal cardinality
    above level 0 and smallest i + j (ties broken by smaller i).
    """
    steps = int(math.ceil(cfg.init_mult * n * n))
    budget = 50 * n
    chains = []
    for lane in (LANE_INIT_A, LANE_INIT_B):
        c = ChainState(Cluster.flat(n), family(cfg.seed, lane, n, rep), shifted=True)
        c.advance(steps)
        start = c.copy()
        hist = [int(c.grid.row_counts().sum())]
        for _ in range(budget):
            c.advance(1)
            hist.append(int(c.grid.row_counts().sum()))
        chains.append((start, hist))
    (sa, ha), (sb, hb) = chains
    first_b: dict[int, int] = {}
    for j, v in enumerate(hb):
        first_b.setdefault(v, j)
    best = None
    for i, v in enumerate(ha):
        j = first_b.get(v)
        if j is not None and (best is None or i + j < sum(best)):
            best = (i, j)
    if best is None:
        raise CardinalityMismatch(f"no common cardinality within {budget} extra steps (|A0| = {ha[0]}, |A0'| = {hb[0]})")
    sa.advance(best[0])
    sb.advance(best[1])
    return sa.cluster, sb.cluster


def coupling_replicate(cfg: ExperimentConfig, n: int, rep: int, param: str = "") -> list[Record]:
    lab = family(cfg.seed, LANE_CHAIN, n, rep).label()
    out = []
    try:
        a0, a0p = _matched_initial_pair(cfg, n, rep)
    except CardinalityMismatch as e:
        for d in cfg.d:
            out.append(Record("coupling", n, f"d={d:g}", rep, 0, "error", f"CardinalityMismatch: {e}", lab))
        return out
    h0 = max(a0.height(), a0p.height())
    fam = family(cfg.seed, LANE_CHAIN, n, rep)
    for d in cfg.d:
        t_water = h0 * n + int(round(d * n * n * log_n(n)))
        res = water_level_coupling(a0, a0p, t_water, fam)
        p = f"d={d:g}"
        for name, v in (
            ("coupled", res.coupled),
            ("pairs_met", res.pairs_met),
            ("pairs_total", res.pairs_total),
            ("h0", h0),
        ):
            out.append(Record("coupling", n, p, rep, t_water, name, _fmt(v), lab))
    return out


def coupling_summary(cfg: ExperimentConfig, records: list[Record]) -> list[Record]:
    out = []
    for n in sorted({r.n for r in records}):
        freqs = []
        outcomes = []
        for d in cfg.d:
            p = f"d={d:g}"
            v = [r.value for r in records if r.n == n and r.param == p and r.observable == "coupled"]
            errs = sum(1 for r in records if r.n == n and r.param == p and r.observable == "error")
            f = float(np.mean(v)) if v else float("nan")
            freqs.append(f)
            outcomes.append(v)
            out.append(Record("coupling", n, p, SUMMARY, 0, "coupling_frequency", f, ""))
            out.append(Record("coupling", n, p, SUMMARY, 0, "replicates_ok", len(v), ""))
            out.append(Record("coupling", n, p, SUMMARY, 0, "replicates_error", errs, ""))
        s, pv = mann_kendall(freqs)
        out.append(Record("coupling", n, "", SUMMARY, 0, "mann_kendall_S", s, ""))
        out.append(Record("coupling", n, "", SUMMARY, 0, "mann_kendall_p", pv, ""))
        s2, pv2 = grouped_trend_test(outcomes)
        out.append(Record("coupling", n, "", SUMMARY, 0, "replicate_trend_S", s2, ""))
        out.append(Record("coupling", n, "", SUMMARY, 0, "replicate_trend_p", pv2, ""))
    return out


def grouped_trend_test(groups: Sequence[Sequence[float]]) -> tuple[float, float]:
    """Mann-Kendall statistic over replicate outcomes ordered by group.

    Only pairs from different groups are scored, the grouped (Jonckheere) form
    of the test; returns (S, one-sided p-value for an increasing trend).
    """
    from scipy.stats import norm

    vals = np.concatenate([np.asarray(g, float) for g in groups]) if groups else np.array([])
    grp = np.concatenate([np.full(len(g), i) for i, g in enumerate(groups)]) if groups else np.array([])
    s = 0.0
    for i, g in enumerate(groups):
        gi = np.asarray(g, float)
        later = vals[grp > i]
        if gi.size and later.size:
            s += float(np.sign(later[None, :] - gi[:, None]).sum())
    # tie-corrected variance with ties both in groups and in values
    n = len(vals)
    if n < 2:
        return s, 1.0
    sizes = np.array([len(g) for g in groups], dtype=float)
    _, vcounts = np.unique(vals, return_counts=True)
    vcounts = vcounts.astype(float)  # products of these overflow int64 at a few thousand values

    def a(c):
        return np.sum(c * (c - 1) * (2 * c + 5))

    def b2(c):
        return np.sum(c * (c - 1) * (c - 2))

    def c2(c):
        return np.sum(c * (c - 1))

    var = (n * (n - 1) * (2 * n + 5) - a(sizes) - a(vcounts)) / 18.0
    var += b2(sizes) * b2(vcounts) / (9.0 * n * (n - 1) * (n - 2)) if n > 2 else 0.0
    var += c2(sizes) * c2(vcounts) / (2.0 * n * (n - 1))
    if var <= 0:
        return s, 1.0
    z = (s - np.sign(s)) / math.sqrt(var)
    return s, float(norm.sf(z))


def imbalance_replicate(cfg: ExperimentConfig, n: int, rep: int, param: str = "") -> list[Record]:
    a = stationary_cluster(cfg, n, rep, LANE_INIT_A)
    b = stationary_cluster(cfg, n, rep, LANE_INIT_B)
    lab = a.family.label()
    u0 = imbalance(a.grid) - imbalance(b.grid)
    out = [Record("imbalance", n, param, rep, 0, "u0", u0, lab)]
    big = abs(u0) > cfg.delta
    out.append(Record("imbalance", n, param, rep, 0, "abs_u0_gt_delta", int(big), lab))
    if not big:
        return out
    steps = int(round(cfg.alpha * n * n))
    # evolve both clusters (unshifted) with independent walks and track u exactly
    ca = ChainState(a.cluster, family(cfg.seed, LANE_CHAIN, n, rep))
    cb = ChainState(b.cluster, family(cfg.seed, LANE_CHAIN_B, n, rep))
    sa = np.empty((steps, 2), dtype=np.int64)
    sb = np.empty((steps, 2), dtype=np.int64)
    ca.advance(steps, sa)
    cb.advance(steps, sb)
    du = (psi_array(sa[:, 0], sa[:, 1], n) - psi_array(sb[:, 0], sb[:, 1], n)) / n
    u = u0 + np.cumsum(du)
    u_end = float(u[-1]) if steps else u0
    crossed = bool(np.any(np.sign(u) != np.sign(u0))) if steps else False
    out.append(Record("imbalance", n, param, rep, steps, "u_end", u_end, lab))
    out.append(Record("imbalance", n, param, rep, steps, "u_end_direct", imbalance(ca.grid) - imbalance(cb.grid), lab))
    out.append(Record("imbalance", n, param, rep, steps, "sign_changed_end", int(np.sign(u_end) != np.sign(u0)), lab))
    out.append(Record("imbalance", n, param, rep, steps, "crossed_any_time", int(crossed), lab))
    out.append(Record("imbalance", n, param, rep, steps, "mean_increment", float(du.mean()) if steps else 0.0, lab))
    ce = cfg.checkpoint_every or max(1, steps // 5)
    for t in range(ce, steps + 1, ce):
        out.append(Record("imbalance", n, param, rep, t, "u", float(u[t - 1]), lab))
    return out


def imbalance_summary(cfg: ExperimentConfig, records: list[Record]) -> list[Record]:
    out = []
    for n in sorted({r.n for r in records}):
        rs = [r for r in records if r.n == n]
        big = np.array([r.value for r in rs if r.observable == "abs_u0_gt_delta"], float)
        if big.size == 0:
            continue
        p = float(big.mean())
        se = float(math.sqrt(max(p * (1 - p), 1e-300) / big.size))
        sc = np.array([r.value for r in rs if r.observable == "sign_changed_end"], float)
        cr = np.array([r.value for r in rs if r.observable == "crossed_any_time"], float)
        # pooled increments of u: per pair mean increment weighted equally
        inc = np.array([r.value for r in rs if r.observable == "mean_increment"], float)
        for name, v in (
            ("p_abs_u0_gt_delta", p),
            ("p_se", se),
            ("floor_half_minus_10delta", 0.5 - 10 * cfg.delta),
            ("pairs_evolved", int(sc.size)),
            ("fraction_sign_changed_end", float(sc.mean()) if sc.size else float("nan")),
            ("fraction_crossed_any_time", float(cr.mean()) if cr.size else float("nan")),
            ("mean_increment", float(inc.mean()) if inc.size else float("nan")),
            ("mean_increment_se", float(inc.std(ddof=1) / math.sqrt(inc.size)) if inc.size > 1 else float("nan")),
        ):
            out.append(Record("imbalance", n, "", SUMMARY, 0, name, v, ""))
    return out


def gff_replicate(cfg: ExperimentConfig, n: int, rep: int, param: str = "") -> list[Record]:
    phi = TestFunction.parse(cfg.phi)
    fam = family(cfg.seed, LANE_CHAIN, n, rep)
    if cfg.stationary:
        t = cfg.steps if cfg.steps is not None else burn_in_steps(cfg, n)
        shift = t / n**2
    else:
        t = cfg.steps if cfg.steps is not None else int(round(cfg.y0 * n * n))
        shift = 0.0
    state = ChainState(Cluster.flat(n), fam)
    state.advance(t)
    v = discrepancy_functional(state.grid, t, phi, shift)
    return [Record("gff", n, param, rep, t, "D", v, fam.label())]


def anderson_darling_normal(x: np.ndarray) -> tuple[float, float]:
    """A^2 for normality with estimated mean and variance, and its approximate p-value.

    The p-value uses the modified statistic A*^2 = A^2 (1 + 0.75/n + 2.25/n^2)
    and the piecewise exponential fit of D'Agostino and Stephens (1986).
    """
    from scipy.stats import anderson

    n = len(x)
    a2 = float(anderson(x, "norm").statistic)
    a = a2 * (1.0 + 0.75 / n + 2.25 / n**2)
    if a >= 0.6:
        p = math.exp(1.2937 - 5.709 * a + 0.0186 * a * a)
    elif a >= 0.34:
        p = math.exp(0.9177 - 4.279 * a - 1.38 * a * a)
    elif a >= 0.2:
        p = 1.0 - math.exp(-8.318 + 42.796 * a - 59.938 * a * a)
    else:
        p = 1.0 - math.exp(-13.436 + 101.14 * a - 223.73 * a * a)
    return a2, min(max(p, 0.0), 1.0)


def gff_summary(cfg: ExperimentConfig, records: list[Record]) -> list[Record]:
    phi = TestFunction.parse(cfg.phi)
    v_th = gff_variance(phi, cfg.y0, cfg.stationary)
    out = []
    for n in sorted({r.n for r in records}):
        x = np.array([r.value for r in records if r.n == n and r.observable == "D"], float)
        if x.size < 2:
            continue
        mean, var = float(x.mean()), float(x.var(ddof=1))
        se = math.sqrt(var / x.size)
        rows = [
            ("mean", mean),
            ("se", se),
            ("variance", var),
            ("variance_theory", v_th),
            ("variance_rel_err", (var - v_th) / v_th if v_th else float("nan")),
        ]
        if x.size >= 8 and var > 0:
            a2, p = anderson_darling_normal(x)
            rows += [("anderson_darling", a2), ("anderson_darling_p", p)]
        for name, v in rows:
            out.append(Record("gff", n, "", SUMMARY, 0, name, v, ""))
    return out


@dataclass(frozen=True)
class Experiment:
    name: str
    replicate: Callable[[ExperimentConfig, int, int, str], list[Record]]
    summary: Callable[[ExperimentConfig, list[Record]], list[Record]]


EXPERIMENTS = {
    "fluctuations": Experiment("fluctuations", fluctuations_replicate, fluctuations_summary),
    "stationary": Experiment("stationary", stationary_replicate, stationary_summary),
    "coupling": Experiment("coupling", coupling_replicate, coupling_summary),
    "imbalance": Experiment("imbalance", imbalance_replicate, imbalance_summary),
    "gff": Experiment("gff", gff_replicate, gff_summary),
}


def run_experiment(name: str, cfg: ExperimentConfig) -> list[Record]:
    """All records (replicates plus summary rows) of one experiment, sorted."""
    cfg.validate()
    exp = EXPERIMENTS[name]
    tasks = [(n, rep) for n in cfg.n for rep in range(cfg.replicates)]

    def work(task):
        return exp.replicate(cfg, task[0], task[1], "")

    if cfg.threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            chunks = list(pool.map(work, tasks))
    else:
        chunks = [work(t) for t in tasks]
    records = [r for c in chunks for r in c]
    if records:
        records += exp.summary(cfg, records)
    records.sort(key=Record.key)
    return records


def rerun_record(name: str, cfg: ExperimentConfig, rec: Record) -> list[Record]:
    """Recompute the replicate that produced ``rec``; the result contains ``rec`` again."""
    return EXPERIMENTS[name].replicate(cfg, rec.n, rec.replicate, rec.param if name != "coupling" else "")


# output

def _value_text(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def header_line(name: str, cfg: ExperimentConfig) -> str:
    stamp = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return f"# idla schema={SCHEMA} experiment={name} seed={cfg.seed} generated={stamp}"


def render(name: str, cfg: ExperimentConfig, records: Iterable[Record]) -> str:
    buf = io.StringIO()
    if cfg.fmt == "csv":
        buf.write(header_line(name, cfg) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([r.experiment, r.n, r.param, r.replicate, r.t, r.observable, _value_text(r.value), r.stream])
    else:
        stamp = header_line(name, cfg)[2:]
        buf.write(json.dumps({"header": stamp, "schema": SCHEMA, "columns": list(COLUMNS)}) + "\n")
        for r in records:
            row = dict(zip(COLUMNS, (r.experiment, r.n, r.param, r.replicate, r.t, r.observable, r.value, r.stream)))
            buf.write(json.dumps(row) + "\n")
    return buf.getvalue()


def read_records(text: str) -> list[Record]:
    """Parse the output of :func:`render` (either format)."""
    lines = text.splitlines()
    out = []
    if lines and lines[0].startswith("#"):
        rows = csv.reader(lines[2:])
        for row in rows:
            e, n, p, rep, t, obs, v, s = row
            out.append(Record(e, int(n), p, int(rep), int(t), obs, _parse_value(v), s))
    else:
        for line in lines[1:]:
            d = json.loads(line)
            out.append(Record(d["experiment"], d["N"], d["param"], d["replicate"], d["t"], d["observable"], d["value"], d["stream"]))
    return out


def _parse_value(v: str):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v

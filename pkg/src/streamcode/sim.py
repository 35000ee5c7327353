"""Loss-rate experiments over stochastic erasure channels.

Every code in a config sees the same erasure trace at each grid point.  The
trace seed is derived from the master seed, the trial index and the channel
model only, so the bad-state trajectory is shared across the epsilon grid as
well and curves are coupled rather than independently noisy.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import channel as ch
from .code import CodeSpec, parse_code
from .decode import EpisodeCache, run
from .errors import ParameterError
from .metrics import bound_curve, tradeoff_table

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "SimRow",
    "SimReport",
    "LOSS_CSV_HEADER",
    "BUNDLES",
    "default_eps_grid",
    "derive_seed",
    "run_experiment",
    "figure_bundle",
    "tradeoff_csv",
]

LOSS_CSV_HEADER = (
    "model,alpha,beta,n_states,epsilon,code,u,v,delta,T,R_num,R_den,channel_len,"
    "master_seed,uncoded_loss,coded_loss,stderr,bursts_observed,max_burst"
)
DEFAULT_MASTER_SEED = 20240601
MIN_CHANNEL_LEN = 10_000

_TAG_TRACE, _TAG_SOURCE = 11, 12


def default_eps_grid(points: int = 10, lo: float = 1e-3, hi: float = 2e-2) -> tuple[float, ...]:
    return tuple(float(f"{x:.6g}") for x in np.geomspace(lo, hi, points))


def derive_seed(master_seed: int, *tags: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), *(int(t) for t in tags)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    model: str  # "ge" or "fritchman"
    alpha: float
    beta: float
    codes: tuple[str, ...]
    eps_grid: tuple[float, ...] = field(default_factory=default_eps_grid)
    n_states: int = 2  # total chain states; Gilbert-Elliott always has 2
    channel_length: int = 1_000_000
    trials: int = 1
    master_seed: int = DEFAULT_MASTER_SEED
    field_m: int | None = None

    def __post_init__(self):
        if self.model not in ("ge", "fritchman"):
            raise ParameterError(f"unknown channel model {self.model!r}")
        if self.model == "ge" and self.n_states != 2:
            raise ParameterError("the Gilbert-Elliott model has exactly 2 states")
        if self.model == "fritchman" and self.n_states < 2:
            raise ParameterError("a Fritchman chain needs at least 2 states")
        if not self.eps_grid:
            raise ParameterError("empty epsilon grid")
        for e in self.eps_grid:
            if not 0 < e < 1:
                raise ParameterError(f"epsilon values must lie in (0, 1), got {e}")
        if self.channel_length < MIN_CHANNEL_LEN:
            raise ParameterError(f"channel_length must be >= {MIN_CHANNEL_LEN}")
        if self.trials < 1:
            raise ParameterError("trials must be positive")
        if not self.codes:
            raise ParameterError("no codes given")

    def channel(self, eps: float):
        if self.model == "ge":
            return ch.GilbertElliottParams(self.alpha, self.beta, eps)
        return ch.FritchmanParams(self.n_states - 1, self.alpha, self.beta, eps)

    def specs(self) -> list[CodeSpec]:
        return [parse_code(c, m=self.field_m, seed=self.master_seed) for c in self.codes]

    def trace(self, eps: float, trial: int = 0):
        seed = derive_seed(self.master_seed, _TAG_TRACE, trial)
        params = self.channel(eps)
        if self.model == "ge":
            return ch.ge_trace(params, self.channel_length, seed)
        return ch.fritchman_trace(params, self.channel_length, seed)


@dataclass(frozen=True)
class SimRow:
    epsilon: float
    code: CodeSpec
    uncoded_loss: float
    coded_loss: float
    stderr: float
    bursts_observed: int
    max_burst: int
    lost_packets: int
    total_packets: int
    runtime: float = 0.0


def _g6(x: float) -> str:
    return f"{x:.6g}"


@dataclass
class SimReport:
    config: ExperimentConfig
    rows: list[SimRow] = field(default_factory=list)

    def cell(self, code: str, eps: float) -> SimRow:
        for r in self.rows:
            if r.code.code_id == code and r.epsilon == eps:
                return r
        raise KeyError((code, eps))

    def to_csv(self) -> str:
        c = self.config
        lines = [LOSS_CSV_HEADER]
        for r in self.rows:
            s = r.code
            cells = [
                c.model, _g6(c.alpha), _g6(c.beta), c.n_states, _g6(r.epsilon),
                s.code_id.replace(",", ";"), s.u, s.v, s.delta, s.T,
                s.rate.numerator, s.rate.denominator, c.channel_length * c.trials,
                c.master_seed, _g6(r.uncoded_loss), _g6(r.coded_loss), _g6(r.stderr),
                r.bursts_observed, r.max_burst,
            ]
            lines.append(",".join(str(x) for x in cells))
        return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, progress=None, jobs: int = 1) -> SimReport:
    """Sweep the epsilon grid, decoding every code on each shared trace.

    With ``jobs > 1`` codes are spread over worker processes; the result is
    identical to a serial run.
    """
    if jobs > 1 and len(config.codes) > 1:
        return _run_parallel(config, jobs)
    specs = config.specs()
    caches = {id(s): EpisodeCache() for s in specs}
    source_seed = derive_seed(config.master_seed, _TAG_SOURCE)
    report = SimReport(config)
    for eps in config.eps_grid:
        traces = [config.trace(eps, i) for i in range(config.trials)]
        total = sum(t.length for t in traces)
        erased = sum(int(t.erased.sum()) for t in traces)
        bursts = [ch.burst_lengths(t.erased) for t in traces]
        n_bursts = int(sum(b.size for b in bursts))
        max_burst = int(max((b.max() for b in bursts if b.size), default=0))
        for spec in specs:
            t0 = time.perf_counter()
            lost = sum(run(spec, t, source_seed, caches[id(spec)]).lost_packets for t in traces)
            p = lost / total
            row = SimRow(
                epsilon=eps,
                code=spec,
                uncoded_loss=erased / total,
                coded_loss=p,
                stderr=math.sqrt(p * (1 - p) / total),
                bursts_observed=n_bursts,
                max_burst=max_burst,
                lost_packets=lost,
                total_packets=total,
                runtime=time.perf_counter() - t0,
            )
            report.rows.append(row)
            log.info("eps=%g %s lost=%d (%.2fs)", eps, spec.code_id, lost, row.runtime)
            if progress:
                progress(row)
    return report


def _one_code(config):
    return run_experiment(config).rows


def _run_parallel(config, jobs):
    from concurrent.futures import ProcessPoolExecutor

    parts = [replace(config, codes=(c,)) for c in config.codes]
    with ProcessPoolExecutor(max_workers=min(jobs, len(parts))) as pool:
        per_code = list(pool.map(_one_code, parts))
    report = SimReport(config)
    for i in range(len(config.eps_grid)):
        for rows in per_code:
            report.rows.append(rows[i])
    return report


def tradeoff_csv(rates=(0.5, 0.6, 0.7), T: int = 80) -> str:
    """Achievable closed-form pairs next to the outer bound, per rate."""
    lines = ["kind,R,T,delta,cT,dT,bound_dT,slack"]
    for R in rates:
        for row in tradeoff_table(R, T):
            lines.append(
                f"achievable,{_g6(float(row.R))},{T},{row.delta},{row.cT},{row.dT},"
                f"{_g6(float(row.bound_dT))},{_g6(float(row.slack))}"
            )
        for cT, bd in bound_curve(R, T):
            lines.append(f"bound,{_g6(float(R))},{T},,{cT},,{_g6(float(bd))},")
    return "\n".join(lines) + "\n"


# name -> (model, alpha, beta, n_states, codes)
BUNDLES = {
    "ge_t12": ("ge", 5e-4, 0.5, 2, (
        "uncoded", "rlc:k=12,n=23,T=12", "maxspan:B=11,T=12",
        "erlc:u=11,v=1,delta=10,T=12", "erlc:u=11,v=1,delta=11,T=12")),
    "ge_t50": ("ge", 1e-5, 0.1, 2, (
        "uncoded", "rlc:k=50,n=99,T=50", "maxspan:B=49,T=50",
        "erlc:u=49,v=1,delta=36,T=50", "erlc:u=49,v=1,delta=44,T=50")),
    "fritch_t40": ("fritchman", 1e-5, 0.5, 9, (
        "uncoded", "rlc:k=40,n=79,T=40", "maxspan:B=39,T=40",
        "erlc:u=39,v=1,delta=32,T=40", "erlc:u=39,v=1,delta=36,T=40")),
    "fritch_t80": ("fritchman", 1e-5, 0.5, 20, (
        "uncoded", "rlc:k=80,n=159,T=80", "maxspan:B=79,T=80",
        "erlc:u=79,v=1,delta=48,T=80", "erlc:u=79,v=1,delta=52,T=80",
        "erlc:u=79,v=1,delta=60,T=80")),
}
BUNDLE_NAMES = tuple(BUNDLES) + ("tradeoff",)


def bundle_config(name: str, channel_length: int = 1_000_000, master_seed: int = DEFAULT_MASTER_SEED,
                  eps_grid=None, field_m=None) -> ExperimentConfig:
    if name not in BUNDLES:
        raise ParameterError(f"unknown bundle {name!r}; choose from {', '.join(BUNDLE_NAMES)}")
    model, a, b, ns, codes = BUNDLES[name]
    return ExperimentConfig(model, a, b, codes, tuple(eps_grid or default_eps_grid()), ns,
                            channel_length, 1, master_seed, field_m)


def burst_histogram_csv(config: ExperimentConfig) -> str:
    """Burst lengths of the pure Markov channel (no good-state losses)."""
    tr = _bad_state_trace(config)
    return ch.histogram_csv(ch.burst_histogram(tr), config.channel(0.0).burst_pmf)


def _bad_state_trace(config):
    seed = derive_seed(config.master_seed, _TAG_TRACE, 0)
    params = config.channel(0.0)
    fn = ch.ge_trace if config.model == "ge" else ch.fritchman_trace
    return fn(params, config.channel_length, seed)


def figure_bundle(name: str, out_dir, channel_length: int = 1_000_000,
                  master_seed: int = DEFAULT_MASTER_SEED, eps_grid=None, field_m=None,
                  header: str = "") -> list[Path]:
    """Write the CSV files for one named figure set; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if name == "tradeoff":
        path = out / "tradeoff.csv"
        path.write_text(header + tradeoff_csv(), encoding="utf-8")
        return [path]
    cfg = bundle_config(name, channel_length, master_seed, eps_grid, field_m)
    loss = out / f"{name}_loss.csv"
    hist = out / f"{name}_bursts.csv"
    loss.write_text(header + run_experiment(cfg).to_csv(), encoding="utf-8")
    hist.write_text(header + burst_histogram_csv(cfg), encoding="utf-8")
    return [loss, hist]

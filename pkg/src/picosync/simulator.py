"""Epoch-level simulation of decentralized time alignment.

One epoch visits every edge in lexicographic order, running a half-duplex
two-way exchange per edge in its own TDMA slot, then applies a single
synchronous consensus update and lets every clock drift for
``epoch_duration`` seconds. Ground-truth offsets are read at the same
instant the exchanges happen, so measured and true series share indexing.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cache
from itertools import combinations

import numpy as np

from .channel import LinkChannel
from .clock import ClockState, advance, init_clocks, true_offset
from .config import CABLE_DELAY, ExperimentConfig
from .consensus import (
    TopologyGraph,
    consensus_increments,
    metropolis_hastings_weights,
    threshold_crossing,
)
from .estimation import BiasLut, load_or_build_lut
from .twtt import DEFAULT_TURNAROUND, ExchangeFailed, Transceiver, Transmission, exchange
from .waveform import (
    TwoToneWaveform,
    crlb_variance,
    es_over_n0,
    generate_two_tone,
    mean_square_bandwidth,
    network_crlb,
)

log = logging.getLogger(__name__)

SLOT_LENGTH = 2 * DEFAULT_TURNAROUND


class InsufficientTrials(ValueError):
    pass


class TdmaViolation(RuntimeError):
    pass


def node_positions(n: int, spacing: float) -> np.ndarray:
    """Nodes evenly on a circle with ``spacing`` metres between neighbours."""
    if n == 1:
        return np.zeros((1, 2))
    radius = spacing / (2 * np.sin(np.pi / n))
    ang = 2 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(ang), np.sin(ang)])


def build_channels(
    cfg: ExperimentConfig, graph: TopologyGraph, rng: np.random.Generator
) -> dict[tuple[int, int], LinkChannel]:
    mean, spread = cfg.link_snr_mean, cfg.link_snr_spread
    snrs = rng.uniform(mean - spread, mean + spread, size=len(graph.edges)) if spread else None
    pos = node_positions(graph.n, cfg.node_spacing)
    channels = {}
    for k, (i, j) in enumerate(graph.edges):
        snr = float(snrs[k]) if snrs is not None else mean
        if cfg.link_delay is not None:
            ch = LinkChannel((i, j), cfg.link_delay, snr, cfg.carrier_freq)
        elif cfg.link_profile == "cabled":
            ch = LinkChannel((i, j), CABLE_DELAY, snr, cfg.carrier_freq)
        else:
            ch = LinkChannel.from_positions(i, j, pos[i], pos[j], snr, cfg.carrier_freq)
        channels[(i, j)] = ch
    return channels


def make_waveform(cfg: ExperimentConfig) -> TwoToneWaveform:
    return generate_two_tone(cfg.tone_separation, cfg.pulse_duration, cfg.rise_fall, cfg.sample_rate)


@cache
def _cached_lut(descriptor, grid, guard) -> BiasLut:
    sep, fs, tp, rf = descriptor
    return load_or_build_lut(generate_two_tone(sep, tp, rf, fs), None, grid, guard=guard)


def lut_for(cfg: ExperimentConfig, waveform: TwoToneWaveform, cache_dir=None) -> BiasLut:
    if cache_dir is not None:
        return load_or_build_lut(waveform, cache_dir, cfg.lut_grid, guard=cfg.guard_samples)
    return _cached_lut(waveform.descriptor, cfg.lut_grid, cfg.guard_samples)


@dataclass
class SimState:
    clocks: list[ClockState]
    graph: TopologyGraph
    mixing: np.ndarray
    channels: dict[tuple[int, int], LinkChannel]
    transceiver: Transceiver | None
    rng: np.random.Generator
    iteration: int = 0
    true_time: float = 0.0

    def node_offsets(self) -> np.ndarray:
        return np.array([c.offset(self.true_time) for c in self.clocks])


@dataclass
class IterationRecord:
    measured: np.ndarray  # (E,) Delta_ji per edge (i < j); NaN if not measured
    valid: np.ndarray  # (E,) bool
    truth: np.ndarray  # (E,) ground-truth Delta_ji
    truth_pairs: np.ndarray  # (P,) ground truth for every node pair
    node_offsets: np.ndarray  # (n,) clock reading minus true time
    snr_estimates_db: np.ndarray  # (E,) mean of the two directions
    delay_estimates: np.ndarray  # (E,)
    consensus_applied: bool
    transmissions: list[Transmission] = field(default_factory=list)


def check_tdma(transmissions: list[Transmission]) -> None:
    """Raise if any two bursts overlap in true time."""
    bursts = sorted(transmissions, key=lambda b: b.start)
    for a, b in zip(bursts, bursts[1:]):
        if b.start < a.end:
            raise TdmaViolation(f"node {b.tx_node} transmits while node {a.tx_node} is on air")


def init_state(cfg: ExperimentConfig, rng: np.random.Generator, lut: BiasLut | None = None,
               waveform: TwoToneWaveform | None = None) -> SimState:
    graph = cfg.graph()
    clock_rng, link_rng, noise_rng = rng.spawn(3)
    clocks = init_clocks(
        graph.n,
        clock_rng,
        bias_range=cfg.bias_range,
        drift_diffusion=cfg.drift_diffusion,
        jitter_std=cfg.jitter_std,
        freq_offset_ppb=cfg.freq_offset_ppb,
    )
    channels = build_channels(cfg, graph, link_rng)
    transceiver = None
    if cfg.measurement == "signal":
        waveform = waveform or make_waveform(cfg)
        lut = lut or lut_for(cfg, waveform)
        transceiver = Transceiver(
            waveform, lut, guard=cfg.guard_samples, detection_threshold_db=cfg.detection_threshold_db
        )
    return SimState(clocks, graph, metropolis_hastings_weights(graph), channels, transceiver, noise_rng)


def _sync_active(cfg: ExperimentConfig, k: int) -> bool:
    if not cfg.consensus:
        return False
    return cfg.sync_stop_iteration is None or k < cfg.sync_stop_iteration


def run_epoch(state: SimState, cfg: ExperimentConfig) -> tuple[SimState, IterationRecord]:
    g = state.graph
    n_e = len(g.edges)
    t = state.true_time
    offsets = state.node_offsets()
    truth = np.array([true_offset(state.clocks[i], state.clocks[j], t) for i, j in g.edges])
    truth_pairs = np.array([offsets[j] - offsets[i] for i, j in combinations(range(g.n), 2)])

    measured = np.full(n_e, np.nan)
    valid = np.zeros(n_e, dtype=bool)
    snr_est = np.full(n_e, np.nan)
    delay_est = np.full(n_e, np.nan)
    bursts: list[Transmission] = []
    active = _sync_active(cfg, state.iteration)
    if active:
        for e, (i, j) in enumerate(g.edges):
            ch = state.channels[(i, j)]
            if cfg.measurement == "exact":
                measured[e], valid[e] = truth[e], True
                snr_est[e], delay_est[e] = ch.snr_db, ch.propagation_delay
                continue
            try:
                res = exchange(
                    state.clocks[i], state.clocks[j], ch, state.transceiver,
                    t + e * SLOT_LENGTH, state.rng,
                )
            except ExchangeFailed as exc:
                log.debug("iteration %d edge %s skipped: %s", state.iteration, (i, j), exc)
                continue
            measured[e], valid[e] = res.offset, True
            snr_est[e] = float(np.mean(res.snr_estimates_db))
            delay_est[e] = 0.5 * (res.quad.forward_flight + res.quad.reverse_flight)
            bursts.extend(res.transmissions)
        check_tdma(bursts)

        # failed exchanges contribute zero offset, i.e. the edge sits out this round
        d = np.zeros((g.n, g.n))
        for e, (i, j) in enumerate(g.edges):
            if valid[e]:
                d[j, i] = measured[e]
                d[i, j] = -measured[e]
        inc = consensus_increments(d, state.mixing)
        for c, delta in zip(state.clocks, inc):
            c.software_correction += float(delta)

    record = IterationRecord(
        measured, valid, truth, truth_pairs, offsets, snr_est, delay_est, active, bursts
    )
    state.clocks = [advance(c, cfg.epoch_duration) for c in state.clocks]
    state.true_time = t + cfg.epoch_duration
    state.iteration += 1
    return state, record


@dataclass
class ExperimentRecord:
    trial: int
    edges: tuple[tuple[int, int], ...]
    pairs: tuple[tuple[int, int], ...]
    link_snr_db: np.ndarray
    link_delay: np.ndarray
    measured: np.ndarray  # (K, E)
    valid: np.ndarray
    truth: np.ndarray
    truth_pairs: np.ndarray  # (K, P)
    node_offsets: np.ndarray  # (K, n)
    snr_estimates_db: np.ndarray
    delay_estimates: np.ndarray
    consensus_applied: np.ndarray  # (K,)

    @property
    def iterations(self) -> int:
        return self.measured.shape[0]

    def max_pairwise_truth(self) -> np.ndarray:
        """Largest |true offset| over all node pairs, per iteration."""
        return np.max(np.abs(self.truth_pairs), axis=1)

    def estimation_error(self) -> np.ndarray:
        return self.measured - self.truth


def run_trial(cfg: ExperimentConfig, trial: int, seed_seq: np.random.SeedSequence,
              lut: BiasLut | None = None) -> ExperimentRecord:
    rng = np.random.default_rng(seed_seq)
    state = init_state(cfg, rng, lut)
    recs = []
    for _ in range(cfg.iterations):
        state, rec = run_epoch(state, cfg)
        recs.append(rec)
    g = state.graph

    def stack(name):
        return np.array([getattr(r, name) for r in recs])

    return ExperimentRecord(
        trial=trial,
        edges=g.edges,
        pairs=tuple(combinations(range(g.n), 2)),
        link_snr_db=np.array([state.channels[e].snr_db for e in g.edges]),
        link_delay=np.array([state.channels[e].propagation_delay for e in g.edges]),
        measured=stack("measured"),
        valid=stack("valid"),
        truth=stack("truth"),
        truth_pairs=stack("truth_pairs"),
        node_offsets=stack("node_offsets"),
        snr_estimates_db=stack("snr_estimates_db"),
        delay_estimates=stack("delay_estimates"),
        consensus_applied=stack("consensus_applied"),
    )


def _run_trial_args(args):
    return run_trial(*args)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[ExperimentRecord]
    waveform_msb: float

    @property
    def edges(self):
        return self.records[0].edges

    def link_crlb_variances(self) -> np.ndarray:
        """Per-trial, per-link delay bounds from the configured link SNRs, (T, E)."""
        cfg = self.config
        return np.array([
            [crlb_variance(self.waveform_msb, es_over_n0(s, cfg.pulse_duration, cfg.sample_rate))
             for s in r.link_snr_db]
            for r in self.records
        ])

    def network_crlb_std(self, estimated: bool = False) -> float:
        """Square root of the link-averaged delay bound.

        With ``estimated`` the bound uses each link's mean estimated SNR.
        """
        if estimated:
            cfg = self.config
            snr = np.nanmean(np.array([r.snr_estimates_db for r in self.records]), axis=1)
            var = [crlb_variance(self.waveform_msb, es_over_n0(s, cfg.pulse_duration, cfg.sample_rate))
                   for s in snr.ravel() if np.isfinite(s)]
        else:
            var = self.link_crlb_variances().ravel()
        return float(np.sqrt(network_crlb(var)))

    def precision(self, series: str = "measured") -> "PrecisionSummary":
        return precision_accuracy(self.records, series, self.config.settle_iteration)

    def summary(self) -> dict:
        cfg = self.config
        out: dict = {
            "name": cfg.name,
            "trials": len(self.records),
            "iterations": cfg.iterations,
            "edges": [list(e) for e in self.edges],
            "network_crlb_std_s": self.network_crlb_std(),
            "mean_estimated_snr_db": float(np.nanmean([r.snr_estimates_db for r in self.records])),
        }
        max_truth = np.array([r.max_pairwise_truth() for r in self.records])
        after = max_truth[:, min(20, cfg.iterations - 1):]
        out["truth_max_pairwise_after_20_s"] = [float(v) for v in after.max(axis=1)]
        mean_abs_truth = np.mean(np.abs(np.array([r.truth for r in self.records])), axis=0).max(axis=1)
        out["truth_convergence_iteration"] = threshold_crossing(mean_abs_truth, cfg.convergence_threshold)
        out["failed_exchanges"] = int(sum(
            (~r.valid & r.consensus_applied[:, None]).sum() for r in self.records
        ))
        if len(self.records) < 2:
            out["std_defined"] = False
            for key in ("final_precision_s", "final_accuracy_s", "mean_precision_after_settle_s",
                        "worst_precision_after_settle_s", "convergence_iteration"):
                out[key] = None
            return out
        p = self.precision()
        out.update(
            std_defined=True,
            final_precision_s=float(p.precision[-1]),
            final_accuracy_s=float(p.accuracy[-1]),
            mean_precision_after_settle_s=p.mean_precision_after(),
            worst_precision_after_settle_s=p.worst_precision_after(),
            network_std_after_settle_s=p.network_std_after(),
            convergence_iteration=threshold_crossing(p.accuracy, cfg.convergence_threshold),
        )
        return out


def trial_seeds(cfg: ExperimentConfig) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(cfg.seed).spawn(cfg.trials)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, lut_cache=None) -> ExperimentResult:
    """Run ``cfg.trials`` independent trials (in up to ``jobs`` processes)."""
    cfg.validate()
    waveform = make_waveform(cfg)
    lut = lut_for(cfg, waveform, lut_cache) if cfg.measurement == "signal" else None
    tasks = [(cfg, k, s, lut) for k, s in enumerate(trial_seeds(cfg))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_trial_args, tasks))
    else:
        records = [run_trial(*t) for t in tasks]
    return ExperimentResult(cfg, records, mean_square_bandwidth(waveform))


@dataclass(frozen=True)
class PrecisionSummary:
    """Across-trial statistics of per-edge offsets, one value per iteration."""

    precision: np.ndarray  # mean over edges of the across-trial std
    accuracy: np.ndarray  # precision + mean over edges of |across-trial mean|
    bias: np.ndarray  # mean over edges of |across-trial mean|
    edge_std: np.ndarray  # (K, E)
    edge_mean: np.ndarray  # (K, E)
    settle_iteration: int = 40

    def _tail(self, values: np.ndarray, after: int | None) -> np.ndarray:
        k = self.settle_iteration if after is None else after
        tail = values[min(k, len(values) - 1):]
        return tail

    def mean_precision_after(self, after: int | None = None) -> float:
        return float(np.mean(self._tail(self.precision, after)))

    def worst_precision_after(self, after: int | None = None) -> float:
        return float(np.max(self._tail(self.precision, after)))

    def network_std_after(self, after: int | None = None) -> float:
        """Root of the edge-averaged variance, averaged over the settled iterations."""
        return float(np.mean(np.sqrt(np.nanmean(self._tail(self.edge_std, after) ** 2, axis=1))))


def precision_accuracy(records, series: str = "measured", settle_iteration: int = 40) -> PrecisionSummary:
    """Precision and accuracy of ``series`` ("measured" or "truth") across trials."""
    if len(records) < 2:
        raise InsufficientTrials("precision needs at least two trials")
    data = np.array([getattr(r, series) for r in records])  # (T, K, E)
    with np.errstate(invalid="ignore"):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            mean = np.nanmean(data, axis=0)
            std = np.nanstd(data, axis=0, ddof=1)
    prec = np.nanmean(std, axis=1)
    bias = np.nanmean(np.abs(mean), axis=1)
    return PrecisionSummary(prec, prec + bias, bias, std, mean, settle_iteration)


@dataclass
class SweepPoint:
    value: float
    result: ExperimentResult
    mean_precision_s: float
    worst_precision_s: float
    network_std_s: float
    crlb_std_s: float  # link-averaged delay bound (configured SNRs)
    crlb_std_estimated_s: float  # same bound from estimated SNRs
    mean_estimated_snr_db: float


def run_sweep(cfg: ExperimentConfig, jobs: int = 1, lut_cache=None) -> list[SweepPoint]:
    """Run one experiment per value of ``cfg.sweep_axis``."""
    cfg.validate()
    if not cfg.sweep_axis:
        raise ValueError("configuration has no sweep axis")
    points = []
    for v in cfg.sweep_values:
        sub = cfg.replace(**{cfg.sweep_axis: float(v)}, sweep_axis="", sweep_values=[])
        res = run_experiment(sub, jobs, lut_cache)
        p = res.precision()
        points.append(SweepPoint(
            value=float(v),
            result=res,
            mean_precision_s=p.mean_precision_after(),
            worst_precision_s=p.worst_precision_after(),
            network_std_s=p.network_std_after(),
            crlb_std_s=res.network_crlb_std(),
            crlb_std_estimated_s=res.network_crlb_std(estimated=True),
            mean_estimated_snr_db=float(np.nanmean([r.snr_estimates_db for r in res.records])),
        ))
    return points


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])

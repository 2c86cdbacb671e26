"""Seeded Monte Carlo BER estimation.

Randomness is counter-based: trial ``t`` at SNR index ``k`` owns the Philox
counter range ``[t*K, (t+1)*K)`` under a key derived from ``(seed, k)``,
where ``K`` is a fixed per-trial budget.  A contiguous run of trials is
therefore one contiguous Philox stream, so blocks are generated in a
single call while every trial's draws stay independent of block size,
execution order and worker count.

Per trial the stream is consumed as: uncorrelated channel ``G'``
(``N_r x N``), noise (``N_r``), then the information bits.  Normals come
from a Box-Muller transform so the word budget is fixed; FA-IM and FAG-IM
runs with the same geometry and ``N_r`` therefore see identical channel
and noise draws.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import correlate
from .config import SimulationConfig
from .detectors import detect
from .errors import ConfigError, NumericalError

log = logging.getLogger(__name__)

_WORDS_PER_COUNTER = 4
_U53 = 2.0 ** -53


def snr_to_noise_variance(snr_db: float, config: SimulationConfig | None = None, *,
                          G: int | None = None, convention: str | None = None) -> float:
    """Noise variance for an SNR in dB.

    ``total_tx_energy`` (default): ``N0 = G / 10^(snr/10)``, i.e. the SNR is
    the total transmit energy per channel use over ``N0``.  ``per_symbol``:
    ``N0 = 1 / 10^(snr/10)``.  ``+inf`` maps to ``N0 = 0``.
    """
    if config is not None:
        G = config.scheme.n_active if G is None else G
        convention = convention or config.snr_convention
    G = 1 if G is None else G
    convention = convention or "total_tx_energy"
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ValueError(f"invalid SNR {snr_db}")
    if snr_db == math.inf:
        return 0.0
    scale = {"total_tx_energy": G, "per_symbol": 1}.get(convention)
    if scale is None:
        raise ValueError(f"unknown SNR convention {convention!r}")
    return scale / 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class TrialLayout:
    n_rx: int
    n_ports: int
    n_bits: int

    @property
    def normal_words(self) -> int:
        # one uniform word per real normal
        return 2 * self.n_rx * self.n_ports + 2 * self.n_rx

    @property
    def bit_words(self) -> int:
        return -(-self.n_bits // 64)

    @property
    def counters(self) -> int:
        return -(-(self.normal_words + self.bit_words) // _WORDS_PER_COUNTER)


def _key(seed: int, snr_index: int) -> np.ndarray:
    return np.random.SeedSequence([seed, snr_index]).generate_state(2, np.uint64)


def trial_words(seed: int, snr_index: int, start: int, count: int, layout: TrialLayout) -> np.ndarray:
    """Raw 64-bit words of trials ``start .. start+count-1``, shape ``(count, 4*K)``."""
    K = layout.counters
    bitgen = np.random.Philox(key=_key(seed, snr_index), counter=[start * K, 0, 0, 0])
    return bitgen.random_raw(count * K * _WORDS_PER_COUNTER).reshape(count, K * _WORDS_PER_COUNTER)


def _box_muller(words: np.ndarray) -> np.ndarray:
    """Pairs of uint64 words -> CN(0, 1) samples (one complex value per pair)."""
    u = ((words >> np.uint64(11)).astype(np.float64) + 1.0) * _U53  # in (0, 1]
    u1, u2 = u[..., 0::2], u[..., 1::2]
    radius = np.sqrt(-np.log(u1))  # = sqrt(-2 ln u1) * sqrt(1/2)
    angle = 2.0 * np.pi * u2
    return radius * (np.cos(angle) + 1j * np.sin(angle))


@dataclass
class TrialDraws:
    g: np.ndarray  # uncorrelated channel, (B, N_r, N)
    noise: np.ndarray  # CN(0, 1) noise before scaling, (B, N_r)
    bits: np.ndarray  # (B, SE)


def draw_trials(seed: int, snr_index: int, start: int, count: int, layout: TrialLayout) -> TrialDraws:
    words = trial_words(seed, snr_index, start, count, layout)
    nr, n = layout.n_rx, layout.n_ports
    normals = _box_muller(words[:, : layout.normal_words])
    g = normals[:, : nr * n].reshape(count, nr, n)
    noise = normals[:, nr * n :]
    bw = words[:, layout.normal_words : layout.normal_words + layout.bit_words]
    j = np.arange(layout.n_bits)
    shifts = (63 - j % 64).astype(np.uint64)
    bits = ((bw[:, j // 64] >> shifts) & np.uint64(1)).astype(np.uint8)
    return TrialDraws(g, noise, bits)


def layout_for(config: SimulationConfig) -> TrialLayout:
    return TrialLayout(config.N_r, config.scheme.n_ports, config.scheme.bits_per_frame)


@dataclass
class BlockResult:
    """Per-frame bit-error counts of every detector for a run of trials."""

    start: int
    errors: dict[str, np.ndarray]

    @property
    def frames(self) -> int:
        return len(next(iter(self.errors.values()))) if self.errors else 0


def run_block(config: SimulationConfig, snr_index: int, start: int, count: int) -> BlockResult:
    """Simulate trials ``start .. start+count-1`` at ``config.snr_db[snr_index]``.

    Every detector sees the same bits, channel and noise of each trial.
    """
    scheme = config.scheme
    N0 = snr_to_noise_variance(config.snr_db[snr_index], config)
    d = draw_trials(config.seed, snr_index, start, count, layout_for(config))
    H = correlate(d.g, config.correlation)
    frame = scheme.encode(d.bits)
    y = (H @ frame.x[..., None])[..., 0] + math.sqrt(N0) * d.noise
    errors = {}
    for name in config.detectors:
        try:
            result = detect(name, y, H, N0, scheme, **config.detector_options(name))
        except (NumericalError, ConfigError) as exc:
            raise type(exc)(f"{exc} [detector {name}, snr_db={config.snr_db[snr_index]}, "
                            f"trials {start}..{start + count - 1}, seed {config.seed}]") from exc
        errors[name] = np.count_nonzero(result.bits != d.bits, axis=-1).astype(np.int32)
    return BlockResult(start, errors)


def run_trial(config: SimulationConfig, trial: int, snr_index: int) -> dict[str, int]:
    """Bit errors of each detector on a single trial."""
    block = run_block(config, snr_index, trial, 1)
    return {name: int(e[0]) for name, e in block.errors.items()}


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    detector: str
    bit_errors: int
    bits_sent: int
    frames: int
    wall_time_s: float
    config_digest: str
    snr_convention: str

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_sent if self.bits_sent else 0.0

    def row(self) -> dict:
        return dict(snr_db=self.snr_db, detector=self.detector, ber=self.ber, bit_errors=self.bit_errors,
                    bits_sent=self.bits_sent, frames=self.frames, wall_time_s=round(self.wall_time_s, 3),
                    config_digest=self.config_digest, snr_convention=self.snr_convention)


@dataclass
class PointResult:
    """All per-frame error counts gathered at one SNR point."""

    snr_db: float
    errors: dict[str, np.ndarray]
    wall_time_s: float

    @property
    def frames(self) -> int:
        return len(next(iter(self.errors.values()))) if self.errors else 0

    def bit_errors(self, detector: str) -> int:
        return int(self.errors[detector].sum())


def _done(totals: dict[str, int], frames: int, config: SimulationConfig) -> bool:
    return frames >= config.max_frames or all(v >= config.min_bit_errors for v in totals.values())


def _block_job(args):
    return run_block(*args)


def simulate_point(config: SimulationConfig, snr_index: int, executor: ProcessPoolExecutor | None = None,
                   workers: int = 1) -> PointResult:
    """Simulate blocks in trial order until every detector has ``min_bit_errors``
    errors or ``max_frames`` frames have run.

    The stopping decision is taken after each block in order, so the result
    does not depend on how many blocks run concurrently.
    """
    t0 = time.perf_counter()
    totals = {name: 0 for name in config.detectors}
    parts: dict[str, list[np.ndarray]] = {name: [] for name in config.detectors}
    frames = 0
    next_start = 0
    while not _done(totals, frames, config):
        wave = []
        for _ in range(max(1, workers) if executor else 1):
            count = min(config.block_size, config.max_frames - next_start)
            if count <= 0:
                break
            wave.append((config, snr_index, next_start, count))
            next_start += count
        blocks = executor.map(_block_job, wave) if executor else map(_block_job, wave)
        for block in blocks:
            if _done(totals, frames, config):
                break
            for name, e in block.errors.items():
                parts[name].append(e)
                totals[name] += int(e.sum())
            frames += block.frames
    errors = {name: np.concatenate(p) if p else np.zeros(0, np.int32) for name, p in parts.items()}
    return PointResult(config.snr_db[snr_index], errors, time.perf_counter() - t0)


def run_sweep(config: SimulationConfig, workers: int = 1, points: list[PointResult] | None = None) -> list[BerRecord]:
    """BER records for every (SNR, detector) pair, in SNR order.

    If ``points`` is a list, the raw :class:`PointResult` of each SNR is
    appended to it (handy for paired comparisons between detectors).
    """
    if "samp" in config.detectors:
        log.info("S-AMP hyperparameters: damping=%g T_max=%d eps_th=%g init=%s decision=%s",
                 config.damping, config.T_max, config.eps_th, config.init, config.decision)
    log.info("stopping rule: min_bit_errors=%d max_frames=%d", config.min_bit_errors, config.max_frames)
    records = []
    executor = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for k, snr in enumerate(config.snr_db):
            point = simulate_point(config, k, executor, workers)
            if points is not None:
                points.append(point)
            for name in config.detectors:
                records.append(BerRecord(
                    snr_db=snr, detector=name, bit_errors=point.bit_errors(name),
                    bits_sent=point.frames * config.scheme.bits_per_frame, frames=point.frames,
                    wall_time_s=point.wall_time_s, config_digest=config.digest,
                    snr_convention=config.snr_convention,
                ))
                log.info("snr=%g %s ber=%.3e (%d errors, %d frames)", snr, name,
                         records[-1].ber, records[-1].bit_errors, point.frames)
    finally:
        if executor:
            executor.shutdown()
    return records

"""Constellations and the FAG-IM / FA-IM bit mappers.

Bit words are MSB first.  A FAG-IM word is split into ``G`` consecutive
chunks, one per group; each chunk holds ``log2(P)`` port-select bits then
``log2(M)`` symbol bits.  A FA-IM word holds ``floor(log2(C(N, G)))``
combination bits followed by ``G`` symbol chunks, assigned to the active
ports in ascending order.

Both schemes work on batches: ``bits`` may carry any leading shape and the
outputs keep it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import ConfigError
from .geometry import FluidAntennaGeometry, GroupingPlan, _is_power_of_two

# largest FA-IM combination table we are willing to materialize
MAX_COMBINATION_TABLE = 1 << 20


def bits_to_int(bits: np.ndarray) -> np.ndarray:
    """Integer value of bit vectors along the last axis (MSB first)."""
    bits = np.asarray(bits, dtype=np.int64)
    n = bits.shape[-1]
    if n == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    weights = np.left_shift(np.int64(1), np.arange(n - 1, -1, -1, dtype=np.int64))
    return bits @ weights


def int_to_bits(values, n: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def _gray_inverse(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift >>= 1
    return b


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy constellation; ``points[k]`` carries label ``k``."""

    name: str
    points: np.ndarray

    def __post_init__(self):
        if not _is_power_of_two(len(self.points)):
            raise ConfigError(f"constellation order {len(self.points)} is not a power of 2")

    @property
    def M(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return self.M.bit_length() - 1

    @property
    def energy(self) -> np.ndarray:
        return np.abs(self.points) ** 2

    def labels_to_bits(self, labels) -> np.ndarray:
        return int_to_bits(labels, self.bits_per_symbol)

    def demap(self, values) -> np.ndarray:
        """Nearest-point labels; ties go to the lowest label."""
        values = np.asarray(values)
        return np.argmin(np.abs(values[..., None] - self.points), axis=-1)

    @classmethod
    def from_name(cls, name: str) -> "Constellation":
        key = name.lower()
        if key == "bpsk":
            return cls("bpsk", np.array([1.0 + 0j, -1.0 + 0j]))
        if key in ("qpsk", "qam4") or key.startswith("qam"):
            try:
                M = 4 if key == "qpsk" else int(key[3:])
            except ValueError:
                raise ConfigError(f"unknown constellation {name!r}") from None
            return cls(f"qam{M}", square_qam(M))
        raise ConfigError(f"unknown constellation {name!r}")


def square_qam(M: int) -> np.ndarray:
    """Gray-labelled square QAM; the first half of a label drives the in-phase axis."""
    k = M.bit_length() - 1
    if M < 4 or not _is_power_of_two(M) or k % 2:
        raise ConfigError(f"square QAM needs M = 4**n, got {M}")
    half = k // 2
    m = 1 << half
    labels = np.arange(M)
    i_level = _gray_inverse(labels >> half)
    q_level = _gray_inverse(labels & (m - 1))
    points = (2 * i_level - (m - 1)) + 1j * (2 * q_level - (m - 1))
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def spectral_efficiency_fagim(G: int, P: int, M: int) -> int:
    if not (_is_power_of_two(P) and _is_power_of_two(M)):
        raise ConfigError(f"P={P} and M={M} must be powers of 2")
    if G < 1:
        raise ConfigError("G must be >= 1")
    return G * ((P.bit_length() - 1) + (M.bit_length() - 1))


def combination_index_bits(N: int, G: int) -> int:
    """floor(log2(C(N, G))), exact for any size."""
    return math.comb(N, G).bit_length() - 1


def spectral_efficiency_faim(N: int, G: int, M: int) -> int:
    if not 1 <= G <= N:
        raise ConfigError(f"need 1 <= G <= N, got G={G}, N={N}")
    if not _is_power_of_two(M):
        raise ConfigError(f"M={M} must be a power of 2")
    return combination_index_bits(N, G) + G * (M.bit_length() - 1)


@lru_cache(maxsize=32)
def combination_table(N: int, G: int) -> np.ndarray:
    """The ``2**floor(log2 C(N, G))`` addressable port combinations, 1-based.

    Combinations are taken in lexicographic order, and each one not yet
    listed is followed by its successive cyclic shifts (every port index
    advanced by one, modulo ``N``) before moving on.  Row ``r`` is the
    combination selected by index bits of value ``r``.
    """
    count = 1 << combination_index_bits(N, G)
    if count > MAX_COMBINATION_TABLE:
        raise ConfigError(f"FA-IM table of {count} combinations exceeds {MAX_COMBINATION_TABLE}")
    seen: set[tuple[int, ...]] = set()
    rows: list[tuple[int, ...]] = []
    for combo in itertools.combinations(range(N), G):
        if combo in seen:
            continue
        shifted = combo
        while shifted not in seen:
            seen.add(shifted)
            rows.append(shifted)
            if len(rows) == count:
                table = np.array(rows, dtype=np.int64) + 1
                table.setflags(write=False)
                return table
            shifted = tuple(sorted((p + 1) % N for p in shifted))
    raise AssertionError("unreachable: C(N, G) >= table size")


def _port_masks(active: np.ndarray) -> np.ndarray:
    return np.bitwise_or.reduce(np.left_shift(np.uint64(1), (active - 1).astype(np.uint64)), axis=-1)


@dataclass(frozen=True)
class TransmissionFrame:
    bits: np.ndarray
    active: np.ndarray  # 1-based port indices, one per group / ascending for FA-IM
    labels: np.ndarray  # constellation labels carried by the active ports
    symbols: np.ndarray
    x: np.ndarray


class FagimScheme:
    """One active port per group, each carrying an M-ary symbol."""

    mode = "fagim"

    def __init__(self, plan: GroupingPlan, constellation: Constellation):
        self.plan = plan
        self.constellation = constellation
        self.index_bits = plan.P.bit_length() - 1
        self.symbol_bits = constellation.bits_per_symbol
        self.bits_per_frame = spectral_efficiency_fagim(plan.G, plan.P, constellation.M)

    @property
    def n_ports(self) -> int:
        return self.plan.N

    @property
    def n_active(self) -> int:
        return self.plan.G

    @property
    def positions(self) -> np.ndarray:
        return self.plan.coordinates

    @property
    def n_candidates(self) -> int:
        return 1 << self.bits_per_frame

    def split(self, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bit words -> (active ports, symbol labels), each ``(..., G)``."""
        bits = np.asarray(bits)
        if bits.shape[-1] != self.bits_per_frame:
            raise ValueError(f"expected {self.bits_per_frame} bits, got {bits.shape[-1]}")
        chunks = bits.reshape(*bits.shape[:-1], self.plan.G, self.index_bits + self.symbol_bits)
        port_label = bits_to_int(chunks[..., : self.index_bits]) + 1
        labels = bits_to_int(chunks[..., self.index_bits :])
        active = np.arange(self.plan.G) * self.plan.P + port_label
        return active, labels

    def encode(self, bits: np.ndarray) -> TransmissionFrame:
        bits = np.asarray(bits, dtype=np.uint8)
        active, labels = self.split(bits)
        symbols = self.constellation.points[labels]
        x = np.zeros((*bits.shape[:-1], self.plan.N), dtype=complex)
        np.put_along_axis(x, active - 1, symbols, axis=-1)
        return TransmissionFrame(bits, active, labels, symbols, x)

    def decode(self, active: np.ndarray, labels: np.ndarray) -> np.ndarray:
        active = np.asarray(active, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        P = self.plan.P
        group = (active - 1) // P
        if np.any(group != np.arange(self.plan.G)):
            raise ValueError("FAG-IM decode needs exactly one active port per group, in group order")
        port_bits = int_to_bits((active - 1) % P, self.index_bits)
        sym_bits = int_to_bits(labels, self.symbol_bits)
        chunks = np.concatenate([port_bits, sym_bits], axis=-1)
        return chunks.reshape(*chunks.shape[:-2], self.bits_per_frame)

    def all_words(self) -> np.ndarray:
        return int_to_bits(np.arange(self.n_candidates), self.bits_per_frame)


class FaimScheme:
    """G ports out of N selected jointly through a combination table."""

    mode = "faim"

    def __init__(self, geometry: FluidAntennaGeometry, G: int, constellation: Constellation):
        self.geometry = geometry
        self.G = G
        self.constellation = constellation
        self.bits_per_frame = spectral_efficiency_faim(geometry.N, G, constellation.M)
        self.index_bits = combination_index_bits(geometry.N, G)
        self.symbol_bits = constellation.bits_per_symbol
        self.table = combination_table(geometry.N, G)

    @property
    def n_ports(self) -> int:
        return self.geometry.N

    @property
    def n_active(self) -> int:
        return self.G

    @cached_property
    def positions(self) -> np.ndarray:
        return self.geometry.column_major_coordinates()

    @property
    def n_candidates(self) -> int:
        return 1 << self.bits_per_frame

    @cached_property
    def _mask_lookup(self) -> tuple[np.ndarray, np.ndarray]:
        if self.geometry.N > 64:
            raise ConfigError("FA-IM decoding supports at most 64 ports")
        masks = _port_masks(self.table)
        order = np.argsort(masks)
        return masks[order], order

    def split(self, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        bits = np.asarray(bits)
        if bits.shape[-1] != self.bits_per_frame:
            raise ValueError(f"expected {self.bits_per_frame} bits, got {bits.shape[-1]}")
        rank = bits_to_int(bits[..., : self.index_bits])
        active = self.table[rank]
        sym = bits[..., self.index_bits :].reshape(*bits.shape[:-1], self.G, self.symbol_bits)
        return active, bits_to_int(sym)

    def encode(self, bits: np.ndarray) -> TransmissionFrame:
        bits = np.asarray(bits, dtype=np.uint8)
        active, labels = self.split(bits)
        symbols = self.constellation.points[labels]
        x = np.zeros((*bits.shape[:-1], self.geometry.N), dtype=complex)
        np.put_along_axis(x, active - 1, symbols, axis=-1)
        return TransmissionFrame(bits, active, labels, symbols, x)

    def rank(self, active: np.ndarray) -> np.ndarray:
        """Table rank of each combination; combinations outside the
        addressable table map to the last addressable rank."""
        keys, order = self._mask_lookup
        masks = _port_masks(np.asarray(active, dtype=np.int64))
        pos = np.clip(np.searchsorted(keys, masks), 0, len(keys) - 1)
        found = keys[pos] == masks
        return np.where(found, order[pos], len(keys) - 1)

    def decode(self, active: np.ndarray, labels: np.ndarray) -> np.ndarray:
        active = np.asarray(active, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        order = np.argsort(active, axis=-1, kind="stable")
        active = np.take_along_axis(active, order, axis=-1)
        labels = np.take_along_axis(labels, order, axis=-1)
        rank_bits = int_to_bits(self.rank(active), self.index_bits)
        sym_bits = int_to_bits(labels, self.symbol_bits)
        sym_bits = sym_bits.reshape(*sym_bits.shape[:-2], self.G * self.symbol_bits)
        return np.concatenate([rank_bits, sym_bits], axis=-1)

    def all_words(self) -> np.ndarray:
        return int_to_bits(np.arange(self.n_candidates), self.bits_per_frame)


def _single_frame(frame: TransmissionFrame) -> TransmissionFrame:
    return TransmissionFrame(
        frame.bits,
        tuple(int(i) for i in frame.active),
        tuple(int(s) for s in frame.labels),
        frame.symbols,
        frame.x,
    )


def encode_fagim(bits, plan: GroupingPlan, constellation: Constellation) -> TransmissionFrame:
    """Map one FAG-IM bit word to its sparse transmit vector."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("encode_fagim takes a single bit word; use FagimScheme.encode for batches")
    return _single_frame(FagimScheme(plan, constellation).encode(bits))


def encode_faim(bits, N: int, G: int, constellation: Constellation) -> TransmissionFrame:
    """Map one FA-IM bit word on an ``N``-port antenna to its transmit vector."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("encode_faim takes a single bit word; use FaimScheme.encode for batches")
    geometry = FluidAntennaGeometry(N1=N, N2=1, W1=0.0, W2=0.0)
    return _single_frame(FaimScheme(geometry, G, constellation).encode(bits))


def decode_frame(active, symbols, scheme: FagimScheme | FaimScheme) -> np.ndarray:
    """Recover the bit word from detected ports and symbols.

    ``symbols`` may be integer constellation labels or complex values; the
    latter are sliced to the nearest constellation point.
    """
    symbols = np.asarray(symbols)
    if np.iscomplexobj(symbols) or np.issubdtype(symbols.dtype, np.floating):
        symbols = scheme.constellation.demap(symbols)
    return scheme.decode(active, symbols)


def make_scheme(mode: str, plan: GroupingPlan, constellation: Constellation):
    if mode == "fagim":
        return FagimScheme(plan, constellation)
    if mode == "faim":
        return FaimScheme(plan.geometry, plan.G, constellation)
    raise ConfigError(f"unknown system mode {mode!r}")

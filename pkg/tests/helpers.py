"""Shared test utilities."""

import numpy as np

from fagim.detectors import AmpState, structured_posterior

from fagim.geometry import FluidAntennaGeometry, GroupingPlan
from fagim.modem import Constellation, FagimScheme, FaimScheme


def index_table_schemes():
    """1D antenna with N=4 ports and G=2, BPSK."""
    plan = GroupingPlan(FluidAntennaGeometry(4, 1, 1.0, 0.0), 2, 1)
    bpsk = Constellation.from_name("bpsk")
    return FagimScheme(plan, bpsk), FaimScheme(plan.geometry, 2, bpsk)


def fagim_word(index_bits, sym_labels, scheme):
    """Assemble a FAG-IM bit word from per-group index bits and symbol labels."""
    parts = []
    for g, label in enumerate(sym_labels):
        ib = index_bits[g * scheme.index_bits:(g + 1) * scheme.index_bits]
        parts += list(ib) + [int(b) for b in np.binary_repr(label, scheme.symbol_bits)]
    return np.array(parts, dtype=np.uint8)


def faim_word(index_bits, sym_labels, scheme):
    parts = list(index_bits)
    for label in sym_labels:
        parts += [int(b) for b in np.binary_repr(label, scheme.symbol_bits)]
    return np.array(parts, dtype=np.uint8)


def symbolic_pattern(x, s1, s2):
    """Transmit vector written with the placeholders 's1', 's2' and 0."""
    names = {complex(s1): "s1", complex(s2): "s2"}
    return [0 if v == 0 else names.get(complex(v), "?") for v in x]


INDEX_TABLE = {
    # index bits: (FA-IM pattern, FAG-IM pattern)
    (0, 0): (["s1", "s2", 0, 0], ["s1", 0, "s2", 0]),
    (0, 1): ([0, "s1", "s2", 0], ["s1", 0, 0, "s2"]),
    (1, 0): ([0, 0, "s1", "s2"], [0, "s1", "s2", 0]),
    (1, 1): (["s1", 0, 0, "s2"], [0, "s1", 0, "s2"]),
}


def undamped_iteration(state, y, H, absH2, nv, points, G, P, onsager=True):
    """Undamped updates written straight from the scalar equations, in the
    same floating-point operation order as the library (Delta dropped)."""
    V_new = (absH2 @ state.v[..., None])[..., 0]
    correction = V_new * (y - state.Z) / (nv + state.V) if onsager else 0.0
    Z_new = (H @ state.x[..., None])[..., 0] - correction
    inv = 1.0 / (nv + V_new)
    Sigma = 1.0 / (inv[:, None, :] @ absH2)[:, 0, :]
    R = state.x + Sigma * ((((y - Z_new) * inv)[:, None, :]) @ np.conj(H))[:, 0, :]
    x, v, q = structured_posterior(R, Sigma, points, G, P)
    return AmpState(x=x, v=v, V=V_new, Z=Z_new, Sigma=Sigma, R=R, q=q)

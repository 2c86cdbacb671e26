import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fagim.errors import ConfigError
from fagim.geometry import FluidAntennaGeometry, GroupingPlan
from fagim.modem import (
    Constellation,
    FagimScheme,
    FaimScheme,
    bits_to_int,
    combination_table,
    decode_frame,
    encode_faim,
    encode_fagim,
    int_to_bits,
    make_scheme,
    spectral_efficiency_faim,
    spectral_efficiency_fagim,
    square_qam,
)

from helpers import INDEX_TABLE, faim_word, fagim_word, symbolic_pattern, index_table_schemes


@pytest.mark.parametrize("G,P,M,se", [(4, 4, 4, 16), (2, 4, 2, 6), (1, 1, 2, 1)])
def test_se_fagim(G, P, M, se):
    assert spectral_efficiency_fagim(G, P, M) == se


@pytest.mark.parametrize("N,G,M,se", [(16, 4, 2, 14), (8, 2, 2, 6), (4, 4, 2, 4)])
def test_se_faim(N, G, M, se):
    assert spectral_efficiency_faim(N, G, M) == se


def test_se_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        spectral_efficiency_fagim(2, 3, 2)
    with pytest.raises(ConfigError):
        spectral_efficiency_faim(4, 5, 2)


@pytest.mark.parametrize("name,M", [("bpsk", 2), ("qpsk", 4), ("qam4", 4), ("qam16", 16), ("qam64", 64)])
def test_constellations_have_unit_energy(name, M):
    c = Constellation.from_name(name)
    assert c.M == M
    assert np.mean(c.energy) == pytest.approx(1.0, abs=1e-12)
    assert len(set(np.round(c.points, 12))) == M


def test_bpsk_points():
    assert Constellation.from_name("bpsk").points.tolist() == [1, -1]


@pytest.mark.parametrize("M", [4, 16, 64])
def test_qam_is_gray_labelled(M):
    pts = square_qam(M)
    dmin = min(abs(a - b) for a, b in itertools.combinations(pts, 2))
    for a, b in itertools.combinations(range(M), 2):
        if abs(abs(pts[a] - pts[b]) - dmin) < 1e-9:
            assert bin(a ^ b).count("1") == 1


def test_unknown_constellation():
    for name in ("psk8", "qam8", "qamx"):
        with pytest.raises(ConfigError):
            Constellation.from_name(name)


def test_demap_prefers_lowest_label_on_ties():
    bpsk = Constellation.from_name("bpsk")
    assert bpsk.demap(0.0) == 0
    assert bpsk.demap(-0.3) == 1


def test_bit_helpers_roundtrip():
    v = np.arange(64)
    assert np.array_equal(bits_to_int(int_to_bits(v, 6)), v)
    assert int_to_bits(5, 3).tolist() == [1, 0, 1]


@pytest.mark.parametrize("index_bits", list(INDEX_TABLE))
def test_table_i_fagim(index_bits):
    fagim, _ = index_table_schemes()
    qam = Constellation.from_name("qam4")
    scheme = FagimScheme(fagim.plan, qam)
    s1, s2 = 1, 2
    frame = scheme.encode(fagim_word(index_bits, (s1, s2), scheme))
    assert symbolic_pattern(frame.x, qam.points[s1], qam.points[s2]) == INDEX_TABLE[index_bits][1]


@pytest.mark.parametrize("index_bits", list(INDEX_TABLE))
def test_table_i_faim(index_bits):
    _, faim = index_table_schemes()
    qam = Constellation.from_name("qam4")
    scheme = FaimScheme(faim.geometry, 2, qam)
    s1, s2 = 3, 1
    frame = scheme.encode(faim_word(index_bits, (s1, s2), scheme))
    assert symbolic_pattern(frame.x, qam.points[s1], qam.points[s2]) == INDEX_TABLE[index_bits][0]


@pytest.mark.parametrize("index_bits", list(INDEX_TABLE))
def test_table_i_rows_decode_to_their_index_bits(index_bits):
    fagim, faim = index_table_schemes()
    for scheme, word in ((fagim, fagim_word(index_bits, (0, 1), fagim)), (faim, faim_word(index_bits, (1, 0), faim))):
        frame = scheme.encode(word)
        bits = decode_frame(frame.active, frame.symbols, scheme)
        assert np.array_equal(bits, word)


def test_single_word_encoders():
    bpsk = Constellation.from_name("bpsk")
    plan = GroupingPlan(FluidAntennaGeometry(4, 1, 1.0, 0.0), 2, 1)
    frame = encode_fagim([0, 0, 0, 0], plan, bpsk)
    assert frame.active == (1, 3) and frame.labels == (0, 0)
    assert frame.x.tolist() == [1, 0, 1, 0]
    frame = encode_faim([1, 1, 0, 1], 4, 2, bpsk)
    assert frame.active == (1, 4)
    assert frame.x.tolist() == [1, 0, 0, -1]
    with pytest.raises(ValueError):
        encode_fagim(np.zeros((2, 4)), plan, bpsk)


def test_faim_with_all_ports_active():
    frame = encode_faim([0, 1, 1, 0], 4, 4, Constellation.from_name("bpsk"))
    assert frame.active == (1, 2, 3, 4)
    assert combination_table(4, 4).tolist() == [[1, 2, 3, 4]]


def test_combination_table_is_injective_and_sorted():
    for N, G in [(8, 2), (16, 4), (8, 3), (5, 2)]:
        table = combination_table(N, G)
        assert len(table) == 2 ** (math.comb(N, G).bit_length() - 1)
        assert len({tuple(r) for r in table}) == len(table)
        assert np.all(np.diff(table, axis=1) > 0)
        assert table.min() >= 1 and table.max() <= N


def test_combination_table_cyclic_orbits():
    # 4 ports, pairs: the first orbit is {1,2} and its cyclic shifts
    assert combination_table(4, 2).tolist() == [[1, 2], [2, 3], [3, 4], [1, 4]]


def test_wrong_word_length():
    fagim, faim = index_table_schemes()
    with pytest.raises(ValueError):
        fagim.encode(np.zeros(3, dtype=np.uint8))
    with pytest.raises(ValueError):
        faim.encode(np.zeros(5, dtype=np.uint8))


def test_fagim_decode_rejects_two_ports_in_one_group():
    fagim, _ = index_table_schemes()
    with pytest.raises(ValueError):
        fagim.decode(np.array([1, 2]), np.array([0, 0]))


def test_faim_decode_clamps_unaddressable_combination():
    # C(5,2)=10 -> 8 addressable rows
    scheme = FaimScheme(FluidAntennaGeometry(5, 1, 1.0, 0.0), 2, Constellation.from_name("bpsk"))
    listed = {tuple(r) for r in scheme.table}
    missing = next(c for c in itertools.combinations(range(1, 6), 2) if c not in listed)
    bits = scheme.decode(np.array(missing), np.array([0, 0]))
    assert bits_to_int(bits[: scheme.index_bits]) == len(scheme.table) - 1


def test_make_scheme():
    plan = GroupingPlan(FluidAntennaGeometry(2, 4, 2, 4), 1, 2)
    bpsk = Constellation.from_name("bpsk")
    assert make_scheme("fagim", plan, bpsk).bits_per_frame == 6
    assert make_scheme("faim", plan, bpsk).bits_per_frame == 6
    with pytest.raises(ConfigError):
        make_scheme("mimo", plan, bpsk)


def _schemes():
    configs = [
        ((4, 1, 1, 0), (2, 1), "bpsk"),
        ((2, 4, 2, 4), (1, 2), "bpsk"),
        ((2, 4, 2, 4), (1, 2), "qam4"),
        ((4, 4, 1.6, 1.6), (2, 2), "bpsk"),
        ((8, 1, 3, 0), (4, 1), "qam4"),
    ]
    out = []
    for geo, (G1, G2), name in configs:
        plan = GroupingPlan(FluidAntennaGeometry(*geo), G1, G2)
        c = Constellation.from_name(name)
        out += [FagimScheme(plan, c), FaimScheme(plan.geometry, plan.G, c)]
    return out


@pytest.mark.parametrize("scheme", _schemes(), ids=lambda s: f"{s.mode}-{s.bits_per_frame}")
def test_exhaustive_roundtrip_and_structure(scheme):
    words = scheme.all_words()
    frame = scheme.encode(words)
    assert np.array_equal(scheme.decode(frame.active, frame.labels), words)
    assert np.all(np.count_nonzero(frame.x, axis=-1) == scheme.n_active)
    if scheme.mode == "fagim":
        P = scheme.plan.P
        per_group = np.count_nonzero(frame.x.reshape(len(words), scheme.plan.G, P), axis=-1)
        assert np.all(per_group == 1)
    # distinct words give distinct transmit vectors
    assert len({v.tobytes() for v in frame.x}) == len(words)
    # uniform words: average energy G
    assert np.mean(np.sum(np.abs(frame.x) ** 2, axis=-1)) == pytest.approx(scheme.n_active)


@settings(max_examples=40)
@given(st.integers(0, 2**30), st.sampled_from(["bpsk", "qam4", "qam16"]))
def test_random_roundtrip_large_config(seed, name):
    plan = GroupingPlan(FluidAntennaGeometry(4, 8, 2, 4), 2, 2)  # G=4, P=8
    c = Constellation.from_name(name)
    rng = np.random.default_rng(seed)
    for scheme in (FagimScheme(plan, c), FaimScheme(plan.geometry, plan.G, c)):
        bits = rng.integers(0, 2, (16, scheme.bits_per_frame), dtype=np.uint8)
        frame = scheme.encode(bits)
        assert np.array_equal(decode_frame(frame.active, frame.symbols, scheme), bits)

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from v2vbeam import phy
from v2vbeam.errors import InputError


@pytest.fixture(scope="module")
def codebook():
    return phy.build_dft_codebook(16, 64, math.pi / 2)


def _scalar_power(channel, cb, P=1.0):
    """|sum_l alpha_l f^H a_l|^2 with explicit element loops."""
    out = []
    for k, panel in enumerate(phy.PANELS):
        for m in range(cb.beams_per_panel):
            f = cb.vectors[k, m]
            acc = 0j
            for path in channel.per_panel[panel]:
                inner = 0j
                for e in range(cb.num_antennas):
                    a_e = cmath.exp(1j * math.pi * e * math.sin(path.azimuth) * math.cos(path.elevation))
                    inner += f[e].conjugate() * a_e
                acc += path.gain * inner
            out.append(abs(acc) ** 2 * P)
    return np.array(out)


def test_steering_vector_cases():
    assert np.allclose(phy.steering_vector(4, 0.0, 0.0), np.ones(4))
    assert np.allclose(phy.steering_vector(7, 0.4, math.pi / 2), np.ones(7), atol=1e-12)
    assert np.allclose(phy.steering_vector(2, math.pi / 6, 0.0), [1, 1j], atol=1e-12)


def test_codebook_invariants(codebook):
    assert codebook.size == 256
    assert np.allclose(np.linalg.norm(codebook.vectors, axis=-1), 1.0, atol=1e-12)
    for k in range(4):
        assert np.all(np.diff(codebook.angles[k]) > 0)


def test_codebook_matched_filter_gain(codebook):
    for m in (0, 17, 32, 63):
        theta = codebook.angles[0, m]
        gain = abs(np.vdot(codebook.vectors[0, m], phy.steering_vector(16, theta))) ** 2
        assert gain == pytest.approx(16.0, abs=1e-9)


def test_adjacent_beam_crossover_below_peak(codebook):
    for m in range(63):
        a_next = phy.steering_vector(16, codebook.angles[0, m + 1])
        cross = abs(np.vdot(codebook.vectors[0, m], a_next)) ** 2 / 16
        assert cross < 1.0


def test_codebook_rejects_bad_q():
    with pytest.raises(InputError):
        phy.build_dft_codebook(16, 0)


def test_ring_covers_circle_without_duplicates(codebook):
    angles = codebook.merged_angles_deg()
    assert len(np.unique(np.round(angles, 9))) == 256
    pos = codebook.ring_positions()
    assert sorted(pos.tolist()) == list(range(256))
    ring_angles = np.empty(256)
    ring_angles[pos] = angles
    assert np.all(np.diff(ring_angles) > 0)


def test_codebook_json_round_trip(codebook):
    back = phy.Codebook.from_json(codebook.to_json())
    assert np.array_equal(back.vectors, codebook.vectors)
    assert np.array_equal(back.angles, codebook.angles)


def test_receive_power_empty_channel(codebook):
    assert np.array_equal(phy.receive_power(phy.Channel.empty(16), codebook), np.zeros(256))


def test_receive_power_boresight_los(codebook):
    ch = phy.Channel.empty(16)
    ch.per_panel["front"].append(phy.PathComponent(1.0 + 0j, 0.0, 0.0))
    p = phy.receive_power(ch, codebook, 1.0, 0.0)
    assert p.max() == pytest.approx(16.0, abs=1e-9)
    assert phy.optimal_beam(p).panel == "front"


def test_receive_power_matches_scalar_loop(codebook):
    ch = phy.Channel.empty(16)
    ch.per_panel["back"].append(phy.PathComponent(0.3 - 0.7j, 0.21, 0.05))
    ch.per_panel["back"].append(phy.PathComponent(0.1 + 0.05j, -0.5, 0.0))
    ch.per_panel["left"].append(phy.PathComponent(-0.2j, 0.7, 0.0))
    assert np.allclose(phy.receive_power(ch, codebook, 2.0), _scalar_power(ch, codebook, 2.0),
                       atol=1e-9, rtol=0)


def test_receive_power_rejects_mismatched_antennas(codebook):
    with pytest.raises(InputError):
        phy.receive_power(phy.Channel.empty(8), codebook)


def test_noiseless_power_ignores_seed(codebook):
    ch = phy.Channel.empty(16)
    ch.per_panel["right"].append(phy.PathComponent(0.5j, 0.3))
    assert np.array_equal(phy.receive_power(ch, codebook, rng_seed=1),
                          phy.receive_power(ch, codebook, rng_seed=2))
    noisy = phy.receive_power(ch, codebook, noise_std=0.1, rng_seed=1)
    assert not np.array_equal(noisy, phy.receive_power(ch, codebook))


def test_optimal_beam_cases():
    onehot = np.zeros(256)
    onehot[37] = 1.0
    assert phy.optimal_beam(onehot).flat_index == 37
    assert phy.optimal_beam(np.full(256, 3.0)).flat_index == 0
    with pytest.raises(InputError):
        phy.optimal_beam(np.array([1.0, np.nan, 0.0, 0.0]))
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.random(256)
        best, best_i = -1.0, -1
        for i, x in enumerate(v):
            if x > best:
                best, best_i = x, i
        assert phy.optimal_beam(v).flat_index == best_i


def test_global_beam_index_layout():
    b = phy.GlobalBeamIndex.from_flat(130, 64)
    assert (b.panel, b.local_index) == ("back", 2)
    assert phy.GlobalBeamIndex.from_local("left", 5, 64).flat_index == 3 * 64 + 5


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(phy.PANELS), st.floats(-0.78, 0.78), st.floats(0.1, 5.0),
       st.floats(-math.pi, math.pi))
def test_los_selects_nearby_beam_in_its_panel(panel, theta, mag, phase):
    cb = phy.build_dft_codebook(16, 64)
    ch = phy.Channel.empty(16)
    ch.per_panel[panel].append(phy.PathComponent(mag * cmath.exp(1j * phase), theta))
    p = phy.receive_power(ch, cb)
    best = phy.optimal_beam(p)
    assert best.panel == panel
    k = phy.PANELS.index(panel)
    spacing = np.max(np.diff(cb.angles[k]))
    assert abs(cb.angles[k, best.local_index] - theta) <= spacing
    # argmax invariance under positive gain scaling
    assert phy.optimal_beam(phy.receive_power(ch.scaled(7.3), cb)).flat_index == best.flat_index


def test_matched_single_path_peak_power():
    cb = phy.build_dft_codebook(16, 64)
    alpha = 0.4 - 1.1j
    ch = phy.Channel.empty(16)
    ch.per_panel["left"].append(phy.PathComponent(alpha, float(cb.angles[3, 20])))
    p = phy.receive_power(ch, cb, symbol_power=2.5)
    assert p.max() == pytest.approx(16 * 2.5 * abs(alpha) ** 2, abs=1e-9)
    assert p.argmax() == 3 * 64 + 20

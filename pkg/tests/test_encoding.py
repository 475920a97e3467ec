import itertools
import random

import pytest

from tschsim import kernels
from tschsim.agent import (AgentConfig, BinConfig, NeighborStats, StatsError, bin_distance,
                           bin_interarrival, decode_state, encode_state, extract_features,
                           kernel_params)

BINS = BinConfig()


def test_state_space_size_and_extremes():
    assert BINS.n_states == 640
    assert encode_state(0, 0, 0, 0, BINS) == 0
    assert encode_state(9, 3, 3, 3, BINS) == 639


def test_encode_decode_bijection():
    seen = set()
    for combo in itertools.product(range(10), range(4), range(4), range(4)):
        s = encode_state(*combo, BINS)
        assert decode_state(s, BINS) == combo
        seen.add(s)
    assert seen == set(range(640))


def test_encode_clips_out_of_range_inputs():
    assert encode_state(12, 7, 9, 5, BINS) == 639
    assert encode_state(-1, -2, 0, 0, BINS) == 0
    with pytest.raises(ValueError):
        decode_state(640, BINS)


@pytest.mark.parametrize("ratio,expected", [(0.0, 0), (0.95, 4), (1.99, 9), (2.0, 9), (7.5, 9)])
def test_interarrival_bins(ratio, expected):
    assert bin_interarrival(ratio, 10, 2.0) == expected


@pytest.mark.parametrize("d,expected", [(0.0, 0), (0.49, 0), (0.5, 1), (1.5, 2), (2.0, 3), (9.0, 3)])
def test_distance_bins(d, expected):
    assert bin_distance(d, 1.0, 4) == expected


def _stats(last, mu, var, exp):
    return NeighborStats(last_asn=last, mu=mu, var=var, expected_asn=exp, receptions=4)


def test_single_fresh_neighbor_at_expected_instant():
    cfg = AgentConfig()
    f = extract_features([_stats(1000, 100.0, 0.0, 1000.0)], 1000, cfg)
    assert (f.mean_bin, f.short_count, f.dmin_bin, f.near_count) == (0, 1, 0, 1)
    assert f.p_any == pytest.approx(0.999)
    assert f.overdue == 0


def test_counts_are_capped():
    cfg = AgentConfig()
    hood = [_stats(1000, 100.0, 0.0, 1000.0) for _ in range(5)]
    f = extract_features(hood, 1000, cfg)
    assert f.short_count == 3 and f.near_count == 3


def test_overdue_neighbor_flagged():
    cfg = AgentConfig()
    # sigma clamps up to beta*mu = 5, so overdue from elapsed >= 110
    f = extract_features([_stats(1000, 100.0, 0.0, 1100.0)], 1110, cfg)
    assert f.overdue == 1
    f = extract_features([_stats(1000, 100.0, 0.0, 1100.0)], 1109, cfg)
    assert f.overdue == 0


def test_empty_neighborhood_rejected():
    with pytest.raises(StatsError):
        extract_features([], 10, AgentConfig())


def test_compiled_and_python_kernels_agree():
    cfg = AgentConfig()
    params = kernel_params(cfg)
    rng = random.Random(11)
    for _ in range(3000):
        hood = []
        for _ in range(rng.randint(1, 6)):
            mu = rng.uniform(5, 3000)
            last = rng.randint(0, 10 ** 6)
            exp = last + mu * rng.randint(1, 3)
            hood.append(_stats(last, mu, rng.uniform(0, (0.7 * mu) ** 2), exp))
        asn = max(h.last_asn for h in hood) + rng.randint(1, 8000)
        flat = [v for h in hood for v in (h.last_asn, h.mu, h.var, h.expected_asn)]
        ref = extract_features(hood, asn, cfg)
        py = kernels.python_neighbor_features(float(asn), flat, params)
        fast = kernels.neighbor_features(float(asn), flat, params)
        assert tuple(ref[:4]) == tuple(py[:4]) == tuple(fast[:4])
        assert ref.overdue == py[5] == fast[5]
        assert ref.p_any == pytest.approx(py[4], rel=1e-12)
        assert fast[4] == pytest.approx(py[4], rel=1e-12)


def test_backend_is_reported():
    assert kernels.BACKEND in ("python", "cython")
    if kernels.compiled_available():
        assert kernels.BACKEND == "cython" or kernels.forced_python()

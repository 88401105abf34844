import json
import math

import numpy as np
import pytest

from qsfl.exceptions import CapExceeded, ConfigError
from qsfl.model import (
    RAYLEIGH,
    SourceModel,
    SystemConfig,
    db_to_linear,
    enumerate_frames,
    frame_table,
    load_config,
    make_source_d,
    make_source_g,
    make_source_u,
    parse_config,
    source_by_name,
)


def test_source_u_mean_variance():
    src = make_source_u()
    assert src.num_states == 9
    # 1 + (0 + 1 + 4 + ... + 64) / 9
    assert src.mean_variance == pytest.approx(1.0 + 204.0 / 9.0, rel=1e-15)
    assert abs(src.mean_variance - 23.67) <= 0.01


def test_source_g_and_d():
    g = make_source_g()
    assert sum(g.pmf) == pytest.approx(1.0)
    assert all(v > 0 for v in g.variances)
    d = make_source_d()
    assert d.num_states == 1 and d.mean_variance == pytest.approx(23.66)


def test_source_by_name():
    assert source_by_name("u").variances == make_source_u().variances
    with pytest.raises(ConfigError):
        source_by_name("Z")


@pytest.mark.parametrize("variances,pmf", [((1.0, 2.0), (0.5, 0.6)), ((1.0, -2.0), (0.5, 0.5)), ((1.0,), (0.5, 0.5)), ((), ())])
def test_source_validation(variances, pmf):
    with pytest.raises(ValueError):
        SourceModel(variances, pmf)


@pytest.mark.parametrize("kw", [dict(frame_blocks=0), dict(frame_blocks=2, bandwidth_ratio=0.5),
                                dict(frame_blocks=2, buffer_cap=0.0), dict(frame_blocks=2, power_budget=-1.0),
                                dict(frame_blocks=1.5)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        SystemConfig(**kw)


def test_config_helpers():
    cfg = SystemConfig(2, 1.0, math.inf, 1000.0)
    assert cfg.unbounded
    assert cfg.power_db == pytest.approx(30.0)
    assert cfg.with_power_db(40.0).power_budget == pytest.approx(1e4)
    assert cfg.replace(buffer_cap=4.0).buffer_cap == 4.0


def test_enumerate_frames_sums_to_one_and_sorts():
    src = SourceModel((1.0, 9.0, 4.0), (0.2, 0.3, 0.5))
    frames = enumerate_frames(src, 3)
    assert len(frames) == 27
    assert math.fsum(f.probability for f in frames) == pytest.approx(1.0, abs=1e-15)
    for f in frames:
        assert list(f.sorted_variances) == sorted(f.sorted_variances, reverse=True)


def test_stable_tie_order():
    src = SourceModel((2.0, 2.0), (0.5, 0.5))
    f = enumerate_frames(src, 2)[0]
    assert f.order == (0, 1)


def test_merged_table_matches_full_enumeration():
    src = make_source_u()
    full = frame_table(src, 3, merge=False)
    merged = frame_table(src, 3)
    assert len(merged) < len(full)
    g = lambda V: np.exp(np.log(V).mean(axis=1))
    assert merged.expect(g(merged.variances)) == pytest.approx(full.expect(g(full.variances)), rel=1e-13)


def test_frame_cap():
    with pytest.raises(CapExceeded):
        enumerate_frames(make_source_u(), 4, cap=1000)


def test_rayleigh_channel():
    assert RAYLEIGH.outage_probability(0.0) == 0.0
    assert RAYLEIGH.survival(1.0) == pytest.approx(math.exp(-1.0))


def test_parse_config(tmp_path):
    src, cfg = parse_config({"source": "U", "K": 2, "b": 2, "B_max": "inf", "P_bar_dB": 30})
    assert cfg.unbounded and cfg.power_budget == pytest.approx(db_to_linear(30.0))
    src, cfg = parse_config({"source": {"variances": [1, 4], "pmf": [0.5, 0.5]}, "K": 1, "B_max": 3})
    assert cfg.buffer_cap == 3.0 and src.mean_variance == 2.5
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"source": "D", "K": 1}))
    assert load_config(path)[1].frame_blocks == 1


@pytest.mark.parametrize("doc", [{"K": 2}, {"source": "U"}, {"source": "U", "K": 2, "B_max": 0},
                                 {"source": "U", "K": "2"}, {"source": "U", "K": 2, "B_max": "big"},
                                 {"source": 3, "K": 1}, []])
def test_parse_config_rejects(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_load_config_missing(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")

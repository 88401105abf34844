import math

import pytest

from qsfl.asymptotics import (
    FitResult,
    GainKind,
    default_fit_grid,
    estimate_exponent,
    fit_multiplexing_gain,
    power_gain_empirical,
    power_gain_formula,
    rsnr_db,
    saturation_distortion,
)
from qsfl.exceptions import MissingFit, Unachievable
from qsfl.model import SystemConfig
from qsfl.schemes import make_scheme


def test_saturation_needs_finite_cap(source_u):
    with pytest.raises(ValueError):
        saturation_distortion(source_u, 2, math.inf)
    assert saturation_distortion(source_u, 2, 4.0) < saturation_distortion(source_u, 2, 2.0)


def test_rsnr(source_u):
    assert rsnr_db(source_u, source_u.mean_variance) == 0.0


def test_default_grids():
    assert list(default_fit_grid("copacr")) == [30.0 + 2 * i for i in range(16)]
    assert list(default_fit_grid("CRCP")) == [40.0 + 2 * i for i in range(11)]


def test_fit_guards(source_u):
    cfg = SystemConfig(2)
    with pytest.raises(ValueError):
        fit_multiplexing_gain("SCORPA", source_u, cfg)
    with pytest.raises(ValueError):
        fit_multiplexing_gain("CRCP", source_u, cfg.replace(buffer_cap=4.0))
    with pytest.raises(ValueError):
        fit_multiplexing_gain("CRCP", source_u, cfg, grid_dB=[40.0, 50.0])


def test_crcp_fit_near_one_half(source_u):
    fit = fit_multiplexing_gain("CRCP", source_u, SystemConfig(2))
    assert fit.slope == pytest.approx(0.5, abs=0.02)
    assert fit.fit_range_dB == (40.0, 60.0)


def test_exponent_probe_order(source_u):
    with pytest.raises(ValueError):
        estimate_exponent("SCORPA", source_u, SystemConfig(2), probes_dB=(60.0, 50.0))


def test_scorpa_exponent_is_b(source_u):
    assert estimate_exponent("SCORPA", source_u, SystemConfig(2, 2.0)) == pytest.approx(2.0, rel=0.01)


def test_gain_formula_needs_fits(source_u):
    cfg = SystemConfig(2)
    with pytest.raises(MissingFit):
        power_gain_formula("G1", source_u, cfg, 40.0)
    with pytest.raises(MissingFit):
        power_gain_formula(GainKind.G3, source_u, cfg, 40.0)


def test_g1_simplified_term(source_u):
    fit = FitResult(0.9, -1.8, 0.0, (30.0, 60.0))
    g = power_gain_formula("G1", source_u, SystemConfig(2), 40.0, copacr_fit=fit)
    assert g.simplified_dB == pytest.approx(0.1 * 40.0)
    assert g.which is GainKind.G1


def test_empirical_gain_identity_and_unreachable(source_u):
    cfg = SystemConfig(2, 1.0, 4.0)
    same = power_gain_empirical("SCORPA", "SCORPA", 10.0, source_u, cfg)
    assert same.gain_dB == 0.0
    cap = make_scheme("SCORPA", cfg.with_power_db(100.0)).fit(source_u).rsnr_db_
    with pytest.raises(Unachievable):
        power_gain_empirical("SCORPA", "COPACR", cap + 1.0, source_u, cfg)

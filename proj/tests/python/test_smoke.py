import json
import math

import numpy as np
import pytest

import ionsense as ionx


def test_spring_constants():
    k = ionx.spring_constants(ionx.IonSpecies.yb174(), ionx.TrapConfig())
    assert k.k_zn_per_nm[0] == pytest.approx(29.22, rel=5e-3)
    assert k.k_zn_per_nm[1] == pytest.approx(7.29, rel=5e-3)
    assert k.k_zn_per_nm[2] == pytest.approx(7.83, rel=5e-3)
    assert k.strong_axis == 0
    lo, hi = k.weak_bracket_zn_per_nm
    assert lo < hi


def test_light_force_round_trip():
    laser = ionx.LaserConfig()
    rate = ionx.scattering_rate(laser)
    force = ionx.light_pressure_force_zn(rate, laser.wavelength_nm)
    assert force == pytest.approx(27.3, rel=0.01)
    s = ionx.saturation_for_force(force, laser)
    assert s == pytest.approx(1.0, rel=1e-9)


def test_render_fit_closure():
    scene = ionx.Scene.make(ionx.OpticsConfig(), 200000.0)
    cam = ionx.CameraConfig()
    img = ionx.render_frame(scene, cam, seed=7)
    assert img.shape == (cam.roi_height, cam.roi_width)
    assert img.sum() > 100000

    fit = ionx.fit_gaussian_2d(img, cam.object_pixel_nm(395.9))
    assert fit.converged
    sigma_ref = ionx.beam_geometry(ionx.OpticsConfig()).sigma_psf_nm()
    assert fit.cx_nm == pytest.approx(0.0, abs=3.0)
    assert fit.cy_nm == pytest.approx(0.0, abs=3.0)
    assert fit.sigma_x_nm == pytest.approx(sigma_ref, rel=0.05)


def test_render_determinism():
    scene = ionx.Scene.make(ionx.OpticsConfig(), 50000.0)
    cam = ionx.CameraConfig()
    a = ionx.render_frame(scene, cam, seed=11, frame_index=3)
    b = ionx.render_frame(scene, cam, seed=11, frame_index=3)
    assert np.array_equal(a, b)
    c = ionx.render_frame(scene, cam, seed=12, frame_index=3)
    assert not np.array_equal(a, c)


def test_reproduction_json():
    cfg = ionx.RunConfig()
    names = ionx.reproduction_case_names()
    assert "spring-constants" in names
    table = json.loads(ionx.run_reproduction_json("beam-geometry", cfg))
    rows = {r["quantity"]: r for r in table["rows"]}
    assert rows["waist w0"]["computed"] == pytest.approx(184.0, abs=0.5)
    with pytest.raises(ValueError):
        ionx.run_reproduction_json("nonsense", cfg)


def test_series_analysis():
    cfg = ionx.RunConfig()
    cfg.camera.exposure_s = 1.0
    cfg.chop.integration_time_s = 1.0
    cfg.chop.n_cycles = 4
    cfg.chop.applied_displacement_nm = [0.0, 20.0, 0.0]
    scene = ionx.Scene.make(cfg.optics, 100000.0)
    series = ionx.simulate_chopped_series(scene, cfg.camera, ionx.DriftModel(),
                                          cfg.chop, seed=5, threads=2)
    assert len(series) == 9
    springs = ionx.spring_constants(cfg.ion, cfg.trap)
    report = json.loads(ionx.analyze_series_json(series, springs))
    dy = report["axes"]["y"]["mean_differential_nm"]
    assert dy == pytest.approx(20.0, abs=2.0)
    assert report["axes"]["y"]["force_zn"] == pytest.approx(springs.k_zn_per_nm[1] * 20.0, rel=0.1)


def test_quantum_limits():
    geom = ionx.beam_geometry(ionx.OpticsConfig())
    lim = ionx.centroid_limit(geom, 2.4e6)
    assert lim.working_nm == pytest.approx(0.119, abs=0.002)
    assert lim.cramer_rao_nm == pytest.approx(lim.working_nm / 2)
    assert ionx.width_relative_limit(2.0) == pytest.approx(0.5)
    direct, stated, chain = ionx.focus_limit(ionx.OpticsConfig(), 1e6)
    assert stated / direct == pytest.approx(math.pi * 0.64)
    assert chain == pytest.approx(direct / 2)

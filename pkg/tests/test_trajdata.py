import numpy as np
import pytest

from perllab.errors import ArgError, LengthError, SamplingError, SchemaError
from perllab.physics import CALIBRATED_PARAMS
from perllab.trajdata import (
    ConstantProfile,
    RampProfile,
    SineProfile,
    SynthConfig,
    TrajectoryRecord,
    load_csv,
    make_windows,
    split,
    synth_generate,
    write_csv,
)

P = CALIBRATED_PARAMS


def make_records(n, dt=0.1):
    return [
        TrajectoryRecord(t=i * dt, v_f=10.0 + 0.01 * i, a_f=0.1 * np.sin(i), v_l=10.0, a_l=0.0, spacing=20.0)
        for i in range(n)
    ]


# --- csv io -------------------------------------------------------------------

def test_roundtrip(tmp_path):
    path = tmp_path / "traj.csv"
    records = make_records(50)
    write_csv(records, path)
    loaded = load_csv(path)
    assert len(loaded) == 50
    for a, b in zip(records, loaded):
        for c in ("t", "v_f", "a_f", "v_l", "a_l", "spacing"):
            # fields carry 9 significant digits
            assert getattr(b, c) == pytest.approx(getattr(a, c), rel=1e-8)


def test_load_small_file(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("t,v_f,a_f,v_l,a_l,spacing\n0,10,0,10,0,20\n0.1,10,0,10,0,20\n0.2,10,0,10,0,20\n")
    assert len(load_csv(path)) == 3


def test_missing_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("t,v_f,a_f,v_l,a_l\n0,10,0,10,0\n")
    with pytest.raises(SchemaError) as exc:
        load_csv(path)
    assert "spacing" in str(exc.value)


def test_nonuniform_dt(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "t,v_f,a_f,v_l,a_l,spacing\n0,10,0,10,0,20\n0.1,10,0,10,0,20\n0.3,10,0,10,0,20\n"
    )
    with pytest.raises(SamplingError) as exc:
        load_csv(path)
    assert exc.value.row == 3


def test_bad_spacing_row(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("t,v_f,a_f,v_l,a_l,spacing\n0,10,0,10,0,20\n0.1,10,0,10,0,-2\n")
    with pytest.raises(ValueError) as exc:
        load_csv(path)
    assert "row 2" in str(exc.value)


def test_non_finite_field(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("t,v_f,a_f,v_l,a_l,spacing\n0,10,nan,10,0,20\n")
    with pytest.raises(ValueError):
        load_csv(path)


# --- windows -------------------------------------------------------------------

def test_window_counts():
    assert len(make_windows(make_records(100), 30)) == 70
    assert len(make_windows(make_records(31), 30)) == 1
    with pytest.raises(LengthError):
        make_windows(make_records(30), 30)


def test_window_contents():
    records = make_records(40)
    windows = make_windows(records, 30)
    w = windows[3]
    assert w.features.shape == (30, 5)
    assert w.features[0, 0] == records[3].v_f
    assert w.features[-1, 4] == records[32].spacing
    assert w.label == records[33].a_f


def test_window_translation_consistency():
    records = make_records(60)
    full = make_windows(records, 20)
    shifted = make_windows(records[1:], 20)
    for j in range(len(shifted)):
        np.testing.assert_array_equal(shifted[j].features, full[j + 1].features)
        assert shifted[j].label == full[j + 1].label


# --- split ----------------------------------------------------------------------

def test_split_sizes_and_partition():
    data = list(range(100))
    tr, va, te = split(data, (0.7, 0.15, 0.15), seed=1)
    assert (len(tr), len(va), len(te)) == (70, 15, 15)
    assert sorted(tr + va + te) == data


def test_split_deterministic():
    data = list(range(40))
    assert split(data, (0.5, 0.25, 0.25), seed=9) == split(data, (0.5, 0.25, 0.25), seed=9)


def test_split_bad_fractions():
    with pytest.raises(ArgError):
        split(list(range(10)), (0.5, 0.2, 0.2), seed=0)


# --- synthetic generator ----------------------------------------------------------

def test_synth_equilibrium_constant_leader():
    cfg = SynthConfig(duration=60.0, leader_profile=ConstantProfile(15.0), idm=P, seed=0)
    recs = synth_generate(cfg)
    assert len(recs) == 600
    assert max(abs(r.a_f) for r in recs) <= 1e-3


def test_synth_deterministic_bytes(tmp_path):
    cfg = SynthConfig(
        duration=20.0, leader_profile=SineProfile(15.0, 3.0, 30.0), idm=P,
        accel_noise_sigma=0.1, seed=11,
    )
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(synth_generate(cfg), p1)
    write_csv(synth_generate(cfg), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_synth_long_run_is_collision_free():
    cfg = SynthConfig(
        duration=600.0, leader_profile=SineProfile(15.0, 3.0, 40.0), idm=P,
        accel_noise_sigma=0.1, seed=3,
    )
    recs = synth_generate(cfg)
    assert len(recs) >= 5970
    assert all(r.spacing > 0 for r in recs)


def test_synth_windows_satisfy_invariants():
    cfg = SynthConfig(
        duration=30.0, leader_profile=SineProfile(14.0, 2.0, 25.0), idm=P,
        accel_noise_sigma=0.05, seed=5,
    )
    windows = make_windows(synth_generate(cfg), 30)
    for w in windows[::50]:
        assert np.all(np.isfinite(w.features))
        assert np.all(w.features[:, 4] > 0)


def test_synth_physics_mse_matches_noise_floor():
    from perllab.perl import physics_predictions, windows_to_arrays

    sigma = 0.1
    cfg = SynthConfig(
        duration=300.0, leader_profile=SineProfile(15.0, 3.0, 40.0), idm=P,
        accel_noise_sigma=sigma, seed=7,
    )
    windows = make_windows(synth_generate(cfg), 30)
    phys = physics_predictions(windows, P)
    _, y = windows_to_arrays(windows)
    mse = float(np.mean((phys - y) ** 2))
    assert mse == pytest.approx(sigma**2, rel=0.3)


def test_ramp_profile_speeds():
    prof = RampProfile(((0.0, 5.0), (10.0, 10.0)))
    t = np.array([0.0, 5.0, 10.0, 20.0])
    np.testing.assert_allclose(prof.speeds(t), [5.0, 7.5, 10.0, 10.0])


def test_sine_profile_validates_amplitude():
    with pytest.raises(ArgError):
        SineProfile(10.0, 12.0, 30.0).speeds(np.zeros(3))

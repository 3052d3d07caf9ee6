import numpy as np
import pytest
from scipy import stats

from trigflow.errors import ConfigError
from trigflow.toysim import FIELDS, HR_THRESHOLD, ToyIgnitionConfig, toy_sim_step

CFG = ToyIgnitionConfig()
FMM_FIELDS = FIELDS[1:]


def fingerprint(fields):
    """Moment vector per field via scipy, concatenated."""
    out = []
    for name in FMM_FIELDS:
        x = fields[name].data
        var = np.var(x)
        out += [np.mean(x), var, stats.skew(x) if var else 0.0, stats.kurtosis(x, fisher=False) if var else 0.0]
    return np.array(out)


def rel(a, b):
    return np.linalg.norm(a - b) / (np.linalg.norm(b) + 1e-12)


@pytest.fixture(scope="module")
def fingerprints():
    return {(t, r): fingerprint(toy_sim_step(CFG, t, r))
            for t in range(150, CFG.steps) for r in range(CFG.ranks)}


def test_deterministic_in_seed_step_rank():
    a, b = toy_sim_step(CFG, 7, 2), toy_sim_step(CFG, 7, 2)
    assert all(np.array_equal(a[k].data, b[k].data) for k in FIELDS)
    c = toy_sim_step(ToyIgnitionConfig(noise_seed=1), 7, 2)
    assert not np.array_equal(a["Y1"].data, c["Y1"].data)


def test_fields_and_shapes():
    f = toy_sim_step(CFG, 0, 0)
    assert set(f) == set(FIELDS) and all(v.dims == (16, 16, 16) for v in f.values())


def test_quiet_at_start():
    assert all(toy_sim_step(CFG, 0, r)["HeatRelease"].data.max() < HR_THRESHOLD for r in range(CFG.ranks))


def test_heat_release_crosses_threshold_at_onset_only_on_ignition_rank():
    onset = CFG.onset_step
    # analytic crossing of hr_peak * exp(g (t - t0)) over the threshold
    expected = CFG.ignition_step - int(np.floor(np.log(CFG.hr_peak / HR_THRESHOLD) / CFG.hr_growth))
    assert onset == expected
    for t in range(CFG.steps):
        for r in range(CFG.ranks):
            above = toy_sim_step(CFG, t, r)["HeatRelease"].data.max() > HR_THRESHOLD
            assert above == (r == CFG.ignition_rank and onset <= t <= CFG.ignition_step + 2), (t, r)


def test_metrics_cross_only_on_ignition(fingerprints):
    period = 5
    candidates = [t for t in range(201, CFG.steps) if t % period == 0]
    for t in range(150, CFG.steps):
        mean = np.mean([fingerprints[(t, r)] for r in range(CFG.ranks)], axis=0)
        for r in range(CFG.ranks):
            m1 = rel(fingerprints[(t, r)], mean)
            if r != CFG.ignition_rank:
                assert m1 < 0.7, (t, r, m1)
            elif t == CFG.ignition_step:
                assert m1 > 0.7
    for t in candidates[1:]:
        for r in range(CFG.ranks):
            m2 = rel(fingerprints[(t, r)], fingerprints[(t - period, r)])
            if r != CFG.ignition_rank:
                assert m2 < 0.7
            elif t == CFG.ignition_step:
                assert m2 > 0.7


@pytest.mark.parametrize("kw", [
    {"ignition_rank": 4}, {"ignition_step": 220}, {"ranks": 0}, {"grid_per_rank": (1, 16, 16)},
    {"hr_growth": 0.0}, {"hr_peak": 1e-4},
])
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        toy_sim_step(ToyIgnitionConfig(**kw), 0, 0)


def test_step_outside_run():
    with pytest.raises(ConfigError):
        toy_sim_step(CFG, CFG.steps, 0)

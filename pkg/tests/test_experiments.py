from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from sparse_trotter import cli
from sparse_trotter.experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    config_from_dict,
    load_config,
    output_paths,
    read_csv,
    run,
    scheme_schedule,
    sweep,
    write_csv,
)

DATA = Path(__file__).parent / "data"
CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))

GOLDEN_CONFIG = {
    "model": {"kind": "TFI", "L": 6, "J": 1.0, "h": 1.0},
    "scheme": "stochastic", "k": 3, "dt": 0.1, "mu": 0.3, "sigma": 0.1,
    "t_end": 3.0, "ensemble_size": 4, "base_seed": 7,
}


def cfg(**kw) -> ExperimentConfig:
    base = dict(kind="XY", L=6, scheme="uniform", t_end=2.0)
    return ExperimentConfig(**{**base, **kw}).validate()


# -- configs -----------------------------------------------------------------

def test_nested_model_block():
    c = config_from_dict({"model": {"kind": "TFI", "L": 8, "h": 0.5}, "scheme": "sparse",
                          "k": 2, "n": 4, "t_end": 2.0})
    assert (c.kind, c.L, c.h, c.n) == ("TFI", 8, 0.5, 4)


@pytest.mark.parametrize("data, field", [
    ({"kind": "XY", "L": 6, "scheme": "uniform"}, "t_end"),
    ({"kind": "XY", "L": 6, "scheme": "uniform", "t_end": 1, "bogus": 1}, "bogus"),
    ({"kind": "XY", "L": 6, "scheme": "sparse", "t_end": 1, "k": 2}, "n"),
    ({"kind": "XY", "L": 6, "scheme": "sparse", "t_end": 1, "k": 2, "n": 3}, "n"),
    ({"kind": "XY", "L": 6, "scheme": "sparse", "t_end": 1, "k": 4, "n": 2}, "k"),
    ({"kind": "XY", "L": 6, "scheme": "uniform", "t_end": 1, "h": 0.3}, "model.h"),
    ({"kind": "Ising", "L": 6, "scheme": "uniform", "t_end": 1}, "model.kind"),
    ({"kind": "TFI", "L": 6, "scheme": "stochastic", "t_end": 1, "k": 2}, "mu"),
    ({"kind": "TFI", "L": 6, "scheme": "uniform", "t_end": -1}, "t_end"),
    ({"kind": "TFI", "L": 6, "scheme": "uniform", "t_end": 1, "observables": ["energy"]}, "observables"),
])
def test_config_diagnostics_name_the_field(data, field):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    assert any(p.startswith(field) for p in info.value.problems), info.value.problems


def test_sweep_block_expansion(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"kind": "XY", "L": 6}, "scheme": "sparse", "k": 2, "n": 2,
                                "t_end": 2.0, "sweep": {"param": "n", "values": [2, 4]}}))
    base, members = load_config(path)
    assert [m.n for m in members] == [2, 4]
    assert [m.label for m in members] == ["n=2", "n=4"]
    path.write_text(json.dumps({"kind": "XY", "L": 6, "scheme": "uniform", "t_end": 1.0,
                                "sweep": {"param": "L", "values": [4]}}))
    with pytest.raises(ConfigError):
        load_config(path)


def test_grid_covers_t_end_with_whole_steps():
    model = cfg().model()
    assert scheme_schedule(cfg(dt=0.3), model).t_end == pytest.approx(2.1)
    assert scheme_schedule(cfg(dt=0.2), model).N == 10
    sparse = scheme_schedule(cfg(scheme="sparse", k=2, n=6, dt=0.1), model)
    assert sparse.t_end == pytest.approx(2.4)
    short = scheme_schedule(cfg(scheme="sparse", k=2, n=4, dt=0.1, t_end=0.1), model)
    assert short.N == 4


@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_shipped_configs_load(path):
    base, members = load_config(path)
    assert base.t_end == 10.0 or base.L <= 8
    assert all(m.L == base.L for m in members)


# -- runs ----------------------------------------------------------------------

def test_self_comparison_is_perfect():
    res = run(cfg(kind="TFI", h=1.0, dt=0.1, t_end=1.0))
    assert len(res.times) == 11
    np.testing.assert_allclose(res.fidelity, 1.0, atol=1e-12)
    assert res.max_magnetization_deviation < 1e-12
    assert res.max_correlation_deviation < 1e-12
    assert res.interconnect_uses == 0


def test_sweep_reuses_reference_without_changing_results():
    members = [cfg(scheme="sparse", k=2, n=2, label="a"), cfg(dt=0.2, label="b"),
               cfg(scheme="stochastic", k=2, mu=0.3, sigma=0.1, ensemble_size=3, label="c")]
    together = sweep(members)
    for member, res in zip(members, together):
        alone = run(member)
        np.testing.assert_allclose(res.times, alone.times, atol=0)
        np.testing.assert_allclose(res.fidelity, alone.fidelity, atol=1e-12)
        np.testing.assert_allclose(res.magnetization, alone.magnetization, atol=1e-12)
        np.testing.assert_allclose(res.reference_correlation, alone.reference_correlation, atol=1e-12)


def test_sparse_snapshots_at_macro_boundaries():
    res = run(cfg(scheme="sparse", k=2, n=4, dt=0.1, t_end=2.0))
    np.testing.assert_allclose(res.times, [0, 0.4, 0.8, 1.2, 1.6, 2.0])
    assert res.fidelity[0] == pytest.approx(1.0)
    assert res.interconnect_uses == 5


def test_snapshot_stride():
    every_other = run(cfg(dt=0.2, snapshot_stride=2))
    np.testing.assert_allclose(every_other.times, [0, 0.4, 0.8, 1.2, 1.6, 2.0])
    ends = run(cfg(dt=0.3, snapshot_stride=0))
    np.testing.assert_allclose(ends.times, [0, 2.1])


def test_ensemble_statistics_and_order_independence():
    c = cfg(kind="TFI", h=0.5, scheme="stochastic", k=3, mu=0.3, sigma=0.1, ensemble_size=12, base_seed=3)
    res = run(c)
    assert res.seeds == list(range(3, 15))
    assert res.ensemble_fidelity.shape == (12, 2)
    finals = res.ensemble_fidelity[:, -1]
    assert res.fidelity[-1] == pytest.approx(finals.mean(), abs=1e-15)
    assert res.fidelity_std[-1] == pytest.approx(finals.std(), abs=1e-15)
    shuffled = np.random.default_rng(0).permutation(finals)
    assert shuffled.mean() == pytest.approx(res.fidelity[-1], abs=3 * finals.std() / np.sqrt(12) + 1e-15)
    threaded = run(dataclasses.replace(c, threads=3))
    np.testing.assert_array_equal(threaded.ensemble_fidelity, res.ensemble_fidelity)


def test_noiseless_ensemble_has_zero_spread():
    res = run(cfg(scheme="stochastic", k=2, mu=0.4, sigma=0.0, ensemble_size=5))
    assert res.fidelity_std[-1] == 0
    sparse = run(cfg(scheme="sparse", k=2, n=4, dt=0.1))
    assert res.fidelity[-1] == pytest.approx(sparse.fidelity[-1], abs=1e-12)


# -- CSV -----------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    res = run(cfg(kind="TFI", h=2.0, dt=0.2, correlation_site=2))
    write_csv(res, tmp_path / "r.csv")
    back = read_csv(tmp_path / "r.csv")
    header = (tmp_path / "r.csv").read_text().splitlines()[0].split(",")
    assert header == ["time", *[f"m_{i}" for i in range(6)], *[f"chi_2_{i}" for i in range(6)], "fidelity"]
    assert back.correlation_site == 2
    for name in ("times", "magnetization", "correlation", "fidelity"):
        np.testing.assert_allclose(getattr(back, name), getattr(res, name), rtol=1e-12, atol=1e-12)


def test_empty_result_is_header_only(tmp_path):
    empty = ExperimentResult(None, np.zeros(0), fidelity=np.zeros(0),
                             magnetization=np.zeros((0, 4)))
    write_csv(empty, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "time,m_0,m_1,m_2,m_3,fidelity\n"
    assert len(read_csv(tmp_path / "e.csv").times) == 0


def test_csv_write_error_names_path(tmp_path):
    res = ExperimentResult(None, np.zeros(0))
    with pytest.raises(OSError, match="missing"):
        write_csv(res, tmp_path / "missing" / "x.csv")


def test_golden_stochastic_csv(tmp_path):
    res = run(config_from_dict(GOLDEN_CONFIG))
    write_csv(res, tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_bytes() == (DATA / "stochastic_L6.csv").read_bytes()


def test_output_paths():
    assert output_paths("out/run.csv") == (Path("out/run.csv"), Path("out/run.meta.json"))
    assert output_paths("out/run.csv", "n=4")[0] == Path("out/run_n=4.csv")
    assert output_paths("out/run", "sigma 0.1")[0] == Path("out/run_sigma_0.1.csv")


# -- command line --------------------------------------------------------------

def write_config(tmp_path, **extra) -> Path:
    path = tmp_path / "c.json"
    data = {"model": {"kind": "XY", "L": 6}, "scheme": "uniform", "dt": 0.2, "t_end": 1.0, **extra}
    path.write_text(json.dumps(data))
    return path


def test_cli_run(tmp_path, capsys):
    path = write_config(tmp_path)
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o.csv")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert Path(out["csv"]).exists()
    assert (tmp_path / "o.meta.json").exists()
    assert len(read_csv(tmp_path / "o.csv").times) == 6


def test_cli_seed_override(tmp_path, capsys):
    path = write_config(tmp_path, scheme="stochastic", k=2, mu=0.3, sigma=0.1, ensemble_size=2)
    assert cli.main(["run", str(path), "--seed", "11", "--threads", "2"]) == 0
    meta = json.loads((tmp_path / "c.meta.json").read_text())
    assert meta["seeds"] == [11, 12]
    assert meta["config"]["threads"] == 2


def test_cli_sweep(tmp_path, capsys):
    path = write_config(tmp_path, sweep={"param": "dt", "values": [0.2, 0.5]})
    assert cli.main(["sweep", str(path)]) == 0
    summary = (tmp_path / "c_summary.csv").read_text().splitlines()
    assert len(summary) == 3
    assert (tmp_path / "c_dt=0.5.csv").exists()


def test_cli_creates_output_directory(tmp_path, capsys):
    path = write_config(tmp_path, output=str(tmp_path / "deep" / "dir" / "r.csv"))
    assert cli.main(["run", str(path)]) == 0
    assert (tmp_path / "deep" / "dir" / "r.meta.json").exists()


def test_cli_sweep_without_block_fails(tmp_path, capsys):
    assert cli.main(["sweep", str(write_config(tmp_path))]) == 2
    assert "sweep" in capsys.readouterr().err


def test_cli_config_error(tmp_path, capsys):
    path = write_config(tmp_path, scheme="sparse")
    assert cli.main(["run", str(path)]) == 2
    assert "n:" in capsys.readouterr().err


def test_cli_bad_json(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert cli.main(["run", str(path)]) == 2


def test_cli_io_error(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "nope.json")]) == 3
    assert "nope.json" in capsys.readouterr().err

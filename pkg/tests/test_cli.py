import csv
import io
import json
import math
from pathlib import Path

import pytest

from opo_lab import cli
from opo_lab.config import RunConfig, from_dict, load
from opo_lab.errors import ConfigError, NormalizationError
from opo_lab.opo import OpoParams, output_moments

ROOT = Path(__file__).resolve().parents[1]
DEFAULT = ROOT / "configs" / "default.json"
GOLDEN = Path(__file__).parent / "golden"


def run(tmp_path, *args, config=None, env=None, monkeypatch=None):
    out = tmp_path / "out.csv"
    argv = list(args) + ["--out", str(out)]
    if config is not None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    code = cli.main(argv)
    return code, out


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def small(**kw):
    base = dict(nodes=31, grid=128, map_grid=64, alpha_values=[1.0, 3.0], sigma_values=[0.2, 0.8])
    base.update(kw)
    return base


def test_shipped_config_is_the_default():
    assert load(DEFAULT) == RunConfig()
    cfg = RunConfig()
    assert (cfg.alpha, cfg.sigma, cfg.d, cfg.eta_in, cfg.eta_esc) == (2.0, math.pi / 4, 0.4, 0.01, 0.93)


@pytest.mark.parametrize("command,golden", [("opo-moments", "opo_moments_default.csv"),
                                            ("indirect", "indirect_default.csv")])
def test_golden_files_byte_identical(tmp_path, command, golden):
    out = tmp_path / "x.csv"
    assert cli.main([command, "--config", str(DEFAULT), "--out", str(out)]) == 0
    assert out.read_bytes() == (GOLDEN / golden).read_bytes()


def test_opo_moments_rows(tmp_path):
    code, out = run(tmp_path, "opo-moments")
    assert code == 0
    table = rows(out)
    ref = output_moments(OpoParams(0.4, 0.01, 0.93), 2.0)
    on_axis = [r for r in table if float(r["d"]) == 0.4 and float(r["phi_in"]) == 0.0][0]
    assert float(on_axis["alpha_q_tilde"]) == ref.alpha_q_tilde
    assert float(on_axis["sigma2_p"]) == ref.sigma2_p
    for r in table:
        if float(r["d"]) == 0.0:
            assert float(r["sigma2_q"]) == float(r["sigma2_p"]) == 0.5
    phi_out = [float(r["phi_out"]) for r in table if float(r["d"]) == 0.4]
    assert max(abs(b - a) for a, b in zip(phi_out, phi_out[1:])) < math.pi


def test_csv_format(tmp_path):
    code, out = run(tmp_path, "indirect")
    raw = out.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    assert raw.splitlines()[0] == b"alpha,sigma,var_seed,var_dephased,var_opo"
    first = raw.splitlines()[1].split(b",")
    assert all(float(v) == float(repr(float(v))) for v in first)


def test_phase_dist(tmp_path):
    code, out = run(tmp_path, "phase-dist", "--grid", "128", "--nodes", "31")
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["phi", "p0", "pD", "pout"]
    assert len(table) == 128 and float(table[-1]["phi"]) == math.pi


def test_hwhm_map_writes_both_panels(tmp_path):
    code, out = run(tmp_path, "hwhm-map", config=small(map_d_values=[0.2]))
    assert code == 0
    assert list(rows(out)[0]) == ["alpha", "sigma", "gamma_D", "gamma_out"]
    bottom = rows(cli.sibling_path(out, "_by_d"))
    assert list(bottom[0]) == ["alpha", "gamma_0", "gamma_S", "d"] and len(bottom) == 2


def test_thresholds_json(tmp_path):
    code, out = run(tmp_path, "thresholds", config=small(sigma_range=[0.0, 0.3], alpha_range=[1.0, 3.0]))
    assert code == 0
    doc = json.loads(out.read_text())
    assert {"config_hash", "version", "alpha_th", "sigma_th_direct", "d_th", "sigma_th_indirect",
            "diagnostics"} <= set(doc)
    assert doc["d_th"] == pytest.approx(0.52108599554, abs=1e-10)
    assert doc["sigma_th_indirect"] == pytest.approx(0.3375031497, abs=1e-9)
    lo, hi = doc["diagnostics"]["alpha_th"]["bracket"]
    assert lo <= doc["alpha_th"] <= hi


def test_thresholds_report_missing_bracket(tmp_path):
    code, out = run(tmp_path, "thresholds", config=small(alpha_range=[3.0, 4.0], sigma_range=[0.5, 0.6]))
    doc = json.loads(out.read_text())
    assert code == 0 and doc["alpha_th"] is None and "error" in doc["diagnostics"]["alpha_th"]


def test_fisher_tables(tmp_path):
    code, out = run(tmp_path, "fisher", config=small(alpha=0.2, r_values=[0.5, 1.0], scan_points=16))
    assert code == 0
    top = rows(out)
    assert list(top[0]) == ["r", "N", "H_nl", "F_nl", "phi_max", "branch"]
    assert all(float(r["F_nl"]) <= float(r["H_nl"]) for r in top)
    assert len(rows(cli.sibling_path(out, "_phi_scan"))) == 32


def test_noisy_fisher_threads_do_not_change_output(tmp_path, monkeypatch):
    cfg = small(alpha=0.2, n_values=[20.0, 40.0], sigma_values=[0.39269908169872414])
    code, out = run(tmp_path, "noisy-fisher", config=cfg)
    serial = out.read_bytes()
    monkeypatch.setenv("OPO_LAB_THREADS", "3")
    code2, out2 = run(tmp_path, "noisy-fisher", config=cfg)
    assert code == code2 == 0 and out2.read_bytes() == serial
    table = rows(out2)
    assert list(table[0]) == ["N", "sigma", "F_n", "F_nl", "epsilon", "H_UB"]
    assert float(table[0]["N"]) == pytest.approx(20.0, rel=1e-10)


def test_mc_validate_default_config_passes(tmp_path):
    code, out = run(tmp_path, "mc-validate")
    doc = json.loads(out.read_text())
    assert code == 0 and doc["all_pass"], doc["checks"]
    assert doc["rng"]["algorithm"] == "numpy.random.PCG64"


def test_seed_flag_changes_hash(tmp_path):
    a = RunConfig().with_overrides(seed=1).digest()
    assert a != RunConfig().digest() and a == RunConfig(seed=1).digest()


def test_config_errors_exit_2(tmp_path):
    assert run(tmp_path, "indirect", config={"alpha": 2.0, "colour": "red"})[0] == 2
    assert run(tmp_path, "indirect", config={"d": 1.5})[0] == 2
    assert run(tmp_path, "indirect", config={"nodes": 200})[0] == 2
    assert run(tmp_path, "indirect", config={"d_values": {"start": 0}})[0] == 2
    assert cli.main(["indirect", "--config", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(ConfigError):
        from_dict({"grid": 2.5})


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    def broken(cfg):
        raise NormalizationError("lost mass")

    monkeypatch.setitem(cli.COMMANDS, "phase-dist", broken)
    assert run(tmp_path, "phase-dist")[0] == 3
    # an unreachable photon number leaves the pump bisection without a bracket
    assert run(tmp_path, "noisy-fisher", config=small(alpha=0.2, n_values=[1e9]))[0] == 3


def test_bad_thread_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("OPO_LAB_THREADS", "many")
    assert run(tmp_path, "indirect")[0] == 2

"""Config files, sweep drivers, CSV artifacts, and CLI exit codes."""
import numpy as np
import pytest
from scipy import stats as sp_stats

from twabort.cli import main
from twabort.errors import AccuracyError, ConfigError
from twabort.experiments import (CurveResult, ExperimentConfig, chi_square_fit,
                                 config_items, default_config, load_config,
                                 parse_grid, run_calibrate, run_mesa,
                                 run_sweep_kappa, run_sweep_snr,
                                 run_sweep_sin2psi, run_validate)

# small but statistically meaningful counts keep this module fast
FAST = dict(trials_threshold=2_000, trials_pd=500, pfa_target=1e-2)


def fast_config(**overrides):
    return ExperimentConfig(**{**FAST, **overrides})


def test_parse_grid_forms():
    assert parse_grid("0:30:2") == tuple(float(v) for v in range(0, 31, 2))
    assert parse_grid("1, 2.5, 7") == (1.0, 2.5, 7.0)
    assert parse_grid("0.25:1.0:0.25") == (0.25, 0.5, 0.75, 1.0)
    with pytest.raises(ConfigError):
        parse_grid("0:10")
    with pytest.raises(ConfigError):
        parse_grid("5:1:1")


def test_default_config_round_trips_through_file(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(
        "[scenario]\nn = 10\nl = 30\neps = 0.5\n\n"
        "[montecarlo]\npfa = 1e-2\nseed = 77\n\n"
        "[detectors]\nlist = glrt-i, aed\n\n"
        "[sweep]\nsnr_grid = 5, 10\n", encoding="utf-8")
    cfg = load_config(str(path))
    assert (cfg.n, cfg.l, cfg.eps) == (10, 30, 0.5)
    assert cfg.pfa_target == 1e-2 and cfg.base_seed == 77
    assert cfg.detectors == ("glrt-i", "aed")
    assert cfg.snr_grid == (5.0, 10.0)
    # untouched fields keep their defaults
    assert cfg.p == default_config().p


def test_unknown_key_is_rejected_with_location(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[scenario]\nn = 12\nmystery = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match=r"bad\.ini:3.*mystery"):
        load_config(str(path))
    path.write_text("[nonsense]\nx = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config(str(path))


def test_bad_values_are_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[scenario]\nn = twelve\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(path))
    path.write_text("[detectors]\nlist = glrt-i, blorp\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="blorp"):
        load_config(str(path))
    path.write_text("[sweep]\nsin2psi_grid = 0, 0.5, 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="sin2psi"):
        load_config(str(path))
    path.write_text("[sweep]\nsnr_grid = 10, 5, 20\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="strictly increasing"):
        load_config(str(path))


def test_config_hash_tracks_content():
    a = config_items(default_config(), "calibrate")
    b = config_items(default_config(), "calibrate")
    assert a == b
    c = config_items(ExperimentConfig(base_seed=2), "calibrate")
    assert a != c


def test_calibrate_csv_is_byte_stable():
    cfg = fast_config(detectors=("glrt-i", "2s-glrt-i", "abort-i"))
    first = run_calibrate(cfg).to_csv()
    second = run_calibrate(cfg).to_csv()
    assert first == second
    lines = [l for l in first.splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    assert header[0] == "detector"
    by_name = {row.split(",")[0]: row.split(",") for row in lines[1:]}
    # the two-step detector has no closed form: analytic cells stay empty
    idx_analytic = header.index("threshold_analytic")
    assert by_name["2S-GLRT-I"][idx_analytic] == ""
    assert by_name["GLRT-I"][idx_analytic] != ""
    for row in lines[1:]:
        assert float(row.split(",")[header.index("threshold_mc")]) > 0


def test_csv_cells_use_fixed_precision():
    cfg = fast_config(detectors=("glrt-i",))
    result = run_calibrate(cfg)
    data_line = result.to_csv().splitlines()[-1]
    cell = data_line.split(",")[1]
    assert cell == "1.00000000e-02"


def test_kappa_sweep_reference_rows_are_flat():
    cfg = fast_config(kappa_grid=(0.5, 1.0, 2.0), cos2theta_values=(1.0,),
                      snr_db=17.0)
    result = run_sweep_kappa(cfg)
    lines = [l.split(",") for l in result.to_csv().splitlines()
             if l and not l.startswith("#")]
    header, rows = lines[0], lines[1:]
    det_idx = header.index("detector")
    pd_idx = header.index("pd_mc")
    glrt_pds = {row[pd_idx] for row in rows if row[det_idx] == "GLRT-I"}
    assert len(glrt_pds) == 1  # one flat reference value repeated per kappa
    tw_rows = [row for row in rows if row[det_idx].startswith("T-W-ABORT")]
    assert len(tw_rows) == 3


def test_chi_square_fit_accepts_true_law(central_params):
    a = central_params.l - central_params.n + central_params.p + central_params.q + 1
    b = central_params.n - central_params.p - central_params.q
    samples = sp_stats.beta(a, b).rvs(20_000, random_state=1234)
    from twabort import pdf_beta_h0
    statistic, critical = chi_square_fit(samples, lambda v: pdf_beta_h0(v, central_params))
    assert statistic < critical
    # a wrong law must be rejected decisively
    bad, critical = chi_square_fit(samples, lambda v: pdf_beta_h0(v, central_params.__class__(
        n=central_params.n, l=central_params.l + 6, p=central_params.p, q=central_params.q)))
    assert bad > critical


def test_validate_passes_and_scale_zero_fails():
    cfg = fast_config()
    report = run_validate(cfg)
    assert report.passed, report.render()
    rendered = report.render()
    assert "OVERALL PASS" in rendered and "loss_density_normalization" in rendered
    broken = run_validate(cfg, tolerance_scale=0.0)
    assert not broken.passed


def _rows_by_axis(result, axis):
    idx = {name: i for i, name in enumerate(result.columns)}
    table = {}
    for row in result.rows:
        table.setdefault(row[idx[axis]], {})[row[idx["detector"]]] = row
    return table, idx


def test_snr_sweep_curve_relations():
    """On matched signals the family curves sit close together and ordered.

    The robust four (GLRT-I, 2S-GLRT-I, ABORT-I, tunable at 0.8) stay within
    a small band of one another through the steep part of the curve, while
    the selective pair never beats the GLRT-I anywhere.
    """
    cfg = fast_config(snr_grid=(8.0, 10.0, 12.0, 14.0, 16.0, 18.0),
                      trials_threshold=20_000, trials_pd=5_000, pfa_target=1e-3)
    table, idx = _rows_by_axis(run_sweep_snr(cfg), "snr_db")
    robust_four = ("GLRT-I", "2S-GLRT-I", "ABORT-I", "T-W-ABORT-I(kappa=0.8)")
    for snr, dets in table.items():
        for row in dets.values():
            assert 0.0 <= row[idx["pd_mc"]] <= 1.0
        mc = [dets[name][idx["pd_mc"]] for name in robust_four]
        if all(0.2 <= v <= 0.9 for v in mc):
            assert max(mc) - min(mc) <= 0.08
        glrt_an = dets["GLRT-I"][idx["pd_analytic"]]
        assert abs(dets["T-W-ABORT-I(kappa=0.8)"][idx["pd_analytic"]] - glrt_an) <= 0.02
        assert dets["W-ABORT-I"][idx["pd_analytic"]] <= glrt_an
        assert dets["T-W-ABORT-I(kappa=2.5)"][idx["pd_analytic"]] <= glrt_an


def test_sin2psi_sweep_is_monotone():
    cfg = fast_config(sin2psi_grid=(0.2, 0.4, 0.6, 0.8, 1.0),
                      trials_threshold=20_000, trials_pd=5_000, pfa_target=1e-3,
                      detectors=("glrt-i", "abort-i"))
    table, idx = _rows_by_axis(run_sweep_sin2psi(cfg), "sin2psi")
    for name in ("GLRT-I", "ABORT-I"):
        analytic = [table[v][name][idx["pd_analytic"]] for v in sorted(table)]
        assert all(b > a for a, b in zip(analytic, analytic[1:]))
        mc = [table[v][name][idx["pd_mc"]] for v in sorted(table)]
        se = [table[v][name][idx["pd_mc_se"]] for v in sorted(table)]
        for k in range(len(mc) - 1):
            slack = 2.0 * (se[k] ** 2 + se[k + 1] ** 2) ** 0.5
            assert mc[k + 1] >= mc[k] - slack
        gaps = [abs(a - m) for a, m in zip(analytic, mc)]
        assert max(gaps) <= 0.03


def test_mesa_matched_row_agrees_with_snr_sweep():
    common = dict(trials_threshold=20_000, trials_pd=5_000, pfa_target=1e-3,
                  detectors=("glrt-i", "w-abort-i"), snr_grid=(12.0, 16.0))
    mesa_cfg = fast_config(cos2theta_grid=(1.0,), **common)
    snr_cfg = fast_config(**common)
    mesa_table, m_idx = _rows_by_axis(run_mesa(mesa_cfg), "snr_db")
    snr_table, s_idx = _rows_by_axis(run_sweep_snr(snr_cfg), "snr_db")
    for snr in (12.0, 16.0):
        for name in ("GLRT-I", "W-ABORT-I"):
            a = mesa_table[snr][name]
            b = snr_table[snr][name]
            assert a[m_idx["pd_analytic"]] == pytest.approx(b[s_idx["pd_analytic"]],
                                                            abs=1e-9)
            se = (a[m_idx["pd_mc_se"]] ** 2 + b[s_idx["pd_mc_se"]] ** 2) ** 0.5
            assert abs(a[m_idx["pd_mc"]] - b[s_idx["pd_mc"]]) <= 4.0 * se + 1e-9


def test_selectivity_ordering_under_strong_mismatch():
    # strongly mismatched signal at 25 dB: larger exponents reject harder
    from twabort import (AnalyticParams, DetectorKind, DetectorSpec,
                         invert_threshold, pd_for)
    central = AnalyticParams(12, 24, 1, 2)
    rho_snr = 10.0 ** 2.5
    params = AnalyticParams(12, 24, 1, 2, rho_eff=rho_snr * 0.8 * 0.3,
                            delta2=rho_snr * 0.8 * 0.7)
    abort = DetectorSpec(DetectorKind.ABORT_I)
    wabort = DetectorSpec(DetectorKind.W_ABORT_I)
    tw25 = DetectorSpec(DetectorKind.T_W_ABORT_I, 2.5)
    values = [pd_for(det, invert_threshold(det, 1e-3, central), params)
              for det in (tw25, wabort, abort)]
    assert values[0] <= values[1] <= values[2]


def test_cli_calibrate_writes_csv(tmp_path):
    out = tmp_path / "cal.csv"
    code = main(["calibrate", "--out", str(out), "--trials-threshold", "2000",
                 "--trials-pd", "500", "--pfa", "1e-2"])
    assert code == 0
    text = out.read_text(encoding="utf-8")
    assert text.startswith("# config_hash = ")
    assert "GLRT-I" in text
    # byte stability end to end
    out2 = tmp_path / "cal2.csv"
    assert main(["calibrate", "--out", str(out2), "--trials-threshold", "2000",
                 "--trials-pd", "500", "--pfa", "1e-2"]) == 0
    assert out2.read_bytes() == out.read_bytes()


def test_cli_exit_code_for_config_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nwat = 1\n", encoding="utf-8")
    assert main(["calibrate", "--config", str(bad)]) == 1
    assert main(["calibrate", "--pfa", "2.0"]) == 1
    assert main(["no-such-command"]) == 1
    assert main(["calibrate", "--trials-threshold", "100", "--pfa", "1e-3"]) == 1


def test_cli_exit_code_for_numeric_failures(monkeypatch):
    import twabort.cli as cli_mod

    def explode(cfg):
        raise AccuracyError("quadrature failure", estimate=0.0)

    monkeypatch.setitem(cli_mod.RUNNERS, "calibrate", explode)
    assert main(["calibrate"]) == 2


def test_cli_validate_exit_codes(tmp_path):
    out = tmp_path / "report.txt"
    args = ["validate", "--trials-threshold", "2000", "--trials-pd", "500",
            "--pfa", "1e-2", "--out", str(out)]
    assert main(args) == 0
    assert "OVERALL PASS" in out.read_text(encoding="utf-8")
    assert main(args + ["--tolerance-scale", "0"]) == 3

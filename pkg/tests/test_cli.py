import csv
import io
import json
import math

import numpy as np
import pytest

from indisim.cli import format_value, main, records_from_csv, records_to_csv
from indisim.environment import flip_expectation, werner
from indisim.pipeline import read_env_file, write_env_file
from indisim.spectral import FilterShape
from indisim.tomography import simulate_counts

V = FilterShape("rectangular", 810.0, 2.7).width


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestFormat:
    @pytest.mark.parametrize(
        "x,expect",
        [
            (1.0, "1.0"),
            (-0.0, "0.0"),
            (1 / 3, "0.333333333333"),
            (2.0 / 3e-9, "666666666.667"),
            (1e-20, "1e-20"),
            (None, ""),
            (3, "3"),
            (True, "1"),
        ],
    )
    def test_values(self, x, expect):
        assert format_value(x) == expect

    def test_round_trips_at_twelve_digits(self, rng):
        for x in rng.standard_normal(200) * 10.0 ** rng.integers(-8, 8, 200):
            s = format_value(x)
            assert float(s) == float(f"{x:.12g}")


class TestHom:
    def test_default_scan(self, capsys):
        code, out, _ = run(capsys, "hom")
        assert code == 0
        assert out.splitlines()[0] == "delay_ps,D,P_C,R_rel"
        r = rows(out)
        assert len(r) == 16
        delays = [float(x["delay_ps"]) for x in r]
        assert delays == sorted(delays)
        assert float(r[0]["D"]) == 1.0
        assert float(r[0]["R_rel"]) == 0.0

    def test_reference_row_is_sinc(self, capsys):
        _, out, _ = run(capsys, "hom", "--delays", "2")
        D = float(rows(out)[0]["D"])
        assert D == pytest.approx(math.sin(2 * V) / (2 * V), abs=1e-6)
        assert abs(D) < 0.02

    def test_rows_ordered_even_if_input_is_not(self, capsys):
        _, out, _ = run(capsys, "hom", "--delays", "0.3,-0.2,0.1")
        assert [float(x["delay_ps"]) for x in rows(out)] == [-0.2, 0.1, 0.3]

    def test_lf_and_no_trailing_blank(self, capsys):
        _, out, _ = run(capsys, "hom", "--delays", "0,1")
        assert "\r" not in out
        assert out.endswith("\n") and not out.endswith("\n\n")


class TestTransfer:
    def test_default_phases_and_means(self, capsys):
        code, out, _ = run(capsys, "transfer", "--delays", "0.1,0.5")
        assert code == 0
        r = rows(out)
        assert [float(x["theta_deg"]) for x in r[:7]] == [0, 30, 60, 90, 120, 150, 180]
        assert r[7]["row_type"] == "mean" and r[7]["theta_deg"] == ""
        for block in (r[:8], r[8:]):
            mean = np.mean([float(x["overlap"]) for x in block[:7]])
            assert float(block[7]["overlap"]) == pytest.approx(mean, abs=1e-12)

    def test_overlap_for_known_D(self, capsys):
        _, out, _ = run(capsys, "transfer", "--env", f"product:{math.sqrt(0.9)!r}", "--thetas", "45")
        r = rows(out)[0]
        assert float(r["D"]) == pytest.approx(0.9, abs=1e-12)
        assert float(r["overlap"]) == pytest.approx(0.95, abs=1e-11)

    def test_truncated_env_route(self, capsys):
        _, out, _ = run(capsys, "transfer", "--env", "spdc:4", "--delays", "0.58", "--thetas", "0,90")
        for r in rows(out):
            assert float(r["fidelity_vs_theory"]) == pytest.approx(1.0, abs=1e-11)

    def test_erase_matches_transfer(self, capsys):
        _, a, _ = run(capsys, "transfer", "--env", "spdc:3", "--delays", "0.2,0.6")
        _, b, _ = run(capsys, "erase", "--env", "spdc:3", "--delays", "0.2,0.6")
        for x, y in zip(rows(a), rows(b)):
            assert float(x["overlap"]) == pytest.approx(float(y["overlap"]), abs=1e-12)


class TestTomo:
    ARGS = ("tomo", "--delays", "0,0.3", "--thetas", "0,60", "--counts", "1e6", "--seed", "7")

    def test_byte_identical(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main([*self.ARGS, "--out", str(a)]) == 0
        assert main([*self.ARGS, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_output(self, capsys):
        _, a, _ = run(capsys, *self.ARGS)
        _, b, _ = run(capsys, *self.ARGS[:-1], "8")
        assert a != b

    def test_grand_average(self, capsys):
        _, out, _ = run(capsys, *self.ARGS)
        r = rows(out)
        assert len(r) == 5
        grand = r[-1]
        assert grand["row_type"] == "grand"
        assert float(grand["fidelity"]) >= 0.999
        fids = [float(x["fidelity"]) for x in r[:-1]]
        assert float(grand["fidelity_std"]) == pytest.approx(np.std(fids, ddof=1), rel=1e-9)

    def test_singlet_with_compensation(self, capsys):
        _, out, _ = run(capsys, "tomo", "--env", "singlet", "--compensate-sign", "--repeats", "3")
        for r in rows(out)[:-1]:
            assert float(r["overlap"]) == pytest.approx(1.0, abs=3e-3)

    def test_strict_non_convergence(self, capsys):
        code, _, err = run(capsys, *self.ARGS, "--max-iters", "1", "--strict")
        assert code == 3
        assert "converge" in err

    def test_manifest_rerun(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        assert main([*self.ARGS, "--out", str(out)]) == 0
        man = json.loads((tmp_path / "t.csv.manifest.json").read_text())
        assert man["seed"] == 7
        assert man["version"]
        assert man["derived"]["v_rad_per_ps"] == pytest.approx(V)
        again = tmp_path / "again.csv"
        assert main(["tomo", "--config", str(tmp_path / "t.csv.manifest.json"), "--out", str(again)]) == 0
        assert again.read_bytes() == out.read_bytes()


class TestFig2:
    def test_outputs(self, tmp_path, capsys):
        out = tmp_path / "fig.csv"
        code = main(["fig2", "--counts", "0", "--mode-overlap", "0.964", "--out", str(out)])
        assert code == 0
        main_rows = rows(out.read_text())
        assert len(main_rows) == 16
        for r in main_rows:
            D = float(r["D"])
            assert float(r["overlap_theory"]) == pytest.approx((1 + D) / 2, abs=1e-11)
            assert float(r["overlap_mean"]) == pytest.approx((1 + D) / 2, abs=1e-11)
        inset = rows((tmp_path / "fig_inset.csv").read_text())
        assert min(float(r["R_rel"]) for r in inset) == pytest.approx(0.036, abs=1e-6)
        assert (tmp_path / "fig.csv.manifest.json").exists()
        assert (tmp_path / "fig_inset.csv.manifest.json").exists()

    def test_needs_out(self, capsys):
        code, _, err = run(capsys, "fig2")
        assert code == 2
        assert "out" in err


class TestConfig:
    @pytest.mark.parametrize(
        "argv,field",
        [
            (["--fwhm-nm", "-2.7"], "fwhm_nm"),
            (["--mode-overlap", "1.5"], "mode_overlap"),
            (["--delays", ""], "delays"),
            (["--delays", "0:1:x"], "delays"),
            (["--filter", "triangle"], "filter"),
            (["--env", "bogus"], "env"),
            (["--efficiencies", "0,1"], "efficiencies"),
            (["--reference-delay", "0.1"], "reference delay"),
        ],
    )
    def test_rejections_name_the_field(self, capsys, argv, field):
        code, out, err = run(capsys, "hom", *argv)
        assert code == 2
        assert field in err
        assert out == ""

    def test_file_and_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# sweep\ndelays = 0,0.2\nfwhm_nm=5.4\n")
        _, out, _ = run(capsys, "hom", "--config", str(cfg))
        assert len(rows(out)) == 2
        _, out2, _ = run(capsys, "hom", "--config", str(cfg), "--fwhm-nm", "2.7")
        assert float(rows(out2)[1]["D"]) != float(rows(out)[1]["D"])
        _, ref, _ = run(capsys, "hom", "--delays", "0,0.2")
        assert out2 == ref

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("wavelength=810\n")
        code, _, err = run(capsys, "hom", "--config", str(cfg))
        assert code == 2
        assert "wavelength" in err

    def test_linspace_delays(self, capsys):
        _, out, _ = run(capsys, "hom", "--delays=-1:1:5")
        assert [float(r["delay_ps"]) for r in rows(out)] == [-1.0, -0.5, 0.0, 0.5, 1.0]


class TestEnvFile:
    def test_round_trip(self, tmp_path, rng):
        env = werner(3, -0.4)
        path = tmp_path / "env.txt"
        write_env_file(env, path)
        back = read_env_file(path)
        np.testing.assert_array_equal(back.rho, env.rho)

    def test_cli_uses_file(self, tmp_path, capsys):
        path = tmp_path / "env.txt"
        write_env_file(werner(2, -0.4), path)
        _, out, _ = run(capsys, "transfer", "--env", f"file:{path}", "--thetas", "0")
        assert float(rows(out)[0]["D"]) == pytest.approx(-0.4, abs=1e-12)

    def test_malformed(self, tmp_path, capsys):
        path = tmp_path / "env.txt"
        path.write_text("d=2\n1,0\n")
        code, _, _ = run(capsys, "transfer", "--env", f"file:{path}")
        assert code == 2


def test_count_records_round_trip():
    recs = simulate_counts(np.eye(2) / 2, 1e4, seed=3, efficiencies=(0.9, 0.8))
    text = records_to_csv(recs)
    assert text.splitlines()[0] == "basis_label,outcome_index,counts,efficiency"
    back = records_from_csv(text)
    assert back == recs

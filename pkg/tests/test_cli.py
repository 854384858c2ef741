import csv
import io
import json

import numpy as np
import pytest

from schmidt_witness.cli import ENV_OUTPUT_DIR, main, threshold_rows
from schmidt_witness.witness_io import (
    WitnessFile, WitnessSchemaError, builtin_wtilde_path, from_dict, load_witness, save_witness,
    to_dict, wtilde_file,
)
from schmidt_witness.witnesses import build_Wtilde

# reference thresholds to three decimals: (d, k) -> (|C|_k, |C|_k^R)
TABLE = {
    (4, 1): (0.500, 0.530), (4, 2): (0.707, 0.715), (4, 3): (0.866, 0.866), (4, 4): (1.0, 1.0),
    (7, 1): (0.714, 0.734), (7, 4): (0.869, 0.869), (11, 9): (0.966, 0.966),
    (11, 10): (0.983, 0.983),
}


@pytest.fixture(autouse=True)
def _cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestThresholds:
    def test_rows(self):
        rows = {(r["d"], r["k"]): r for r in threshold_rows([4, 7, 11])}
        for key, (ck, ckr) in TABLE.items():
            assert round(rows[key]["C_k"], 3) == ck
            assert round(rows[key]["C_k_R"], 3) == ckr
        for d in (4, 7, 11):
            assert abs(rows[(d, d)]["C_k"] - 1) < 1e-12 and abs(rows[(d, d)]["C_k_R"] - 1) < 1e-9

    def test_command_csv(self, capsys):
        code, out, _ = run(capsys, "thresholds", "--d", "4", "--digits", "3")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert rows[0]["C_k"] == "0.500" and rows[0]["C_k_R"] == "0.530"
        assert len(rows) == 4

    def test_command_json(self, capsys):
        code, out, _ = run(capsys, "thresholds", "--d", "5", "--format", "json")
        assert code == 0 and len(json.loads(out)) == 5


class TestPlan:
    def test_forged(self, capsys):
        code, out, _ = run(capsys, "plan", "--d", "4", "--type", "forged")
        assert code == 0 and len(out.strip().split("\n")) == 1 + 16

    def test_standard(self, capsys):
        code, out, _ = run(capsys, "plan", "--d", "7", "--type", "standard")
        assert code == 0 and len(out.strip().split("\n")) == 1 + 91

    def test_forged_d3_error(self, capsys):
        code, _, err = run(capsys, "plan", "--d", "3")
        assert code == 1 and "d = 3" in err


class TestCertify:
    def test_shipped_d7_k5(self, capsys):
        code, out, _ = run(capsys, "certify", "wtilde:7", "--k", "5")
        rep = json.loads(out)
        assert code == 0
        assert round(rep["proven_bound"], 3) == -0.915
        assert rep["status"] == "proved"

    def test_conjectured_exit(self, capsys):
        code, out, _ = run(capsys, "certify", "wtilde:7", "--k", "2")
        assert code == 2 and json.loads(out)["status"] == "conjectured"

    def test_missing_k(self, capsys):
        code, _, err = run(capsys, "certify", "wtilde:4")
        assert code == 1 and "k" in err

    def test_schema_error_path(self, capsys, tmp_path):
        data = to_dict(wtilde_file(4))
        data["coefficients"][3]["re"] = "oops"
        (tmp_path / "bad.json").write_text(json.dumps(data))
        code, _, err = run(capsys, "certify", "bad.json", "--k", "2")
        assert code == 1 and "coefficients[3].re" in err


class TestForge:
    def test_d4_k3(self, capsys, tmp_path):
        code, out, _ = run(capsys, "forge", "--d", "4", "--k", "3", "--mask", "linear",
                           "--target", "phi-plus", "--out", "w.json", "--trace", "t.json")
        assert code == 0
        wf = load_witness(tmp_path / "w.json")
        assert abs(wf.threshold_C + 0.866) < 5e-3
        assert wf.certificate["status"] == "proved"
        assert json.loads((tmp_path / "t.json").read_text())["records"]
        # the written file certifies again from disk
        code, out, _ = run(capsys, "certify", "w.json")
        assert code == 0

    def test_d3_k2_conjectured(self, capsys, tmp_path):
        code, _, _ = run(capsys, "forge", "--d", "3", "--k", "2", "--mask", "linear", "--out", "w.json")
        assert code == 2
        assert load_witness(tmp_path / "w.json").certificate["status"] == "conjectured"

    @pytest.mark.slow
    def test_full_mask_not_worse(self, capsys, tmp_path):
        run(capsys, "forge", "--d", "4", "--k", "3", "--out", "lin.json")
        code, _, _ = run(capsys, "forge", "--d", "4", "--k", "3", "--mask", "full", "--out", "full.json")
        assert code in (0, 2)
        assert load_witness(tmp_path / "full.json").threshold_C >= \
            load_witness(tmp_path / "lin.json").threshold_C - 1e-12

    def test_config(self, capsys, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"d": 4, "k": 3, "out": "cfg.json"}))
        code, _, _ = run(capsys, "forge", "--config", "c.json")
        assert code == 0 and (tmp_path / "cfg.json").exists()

    def test_config_unknown_key(self, capsys, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"d": 4, "k": 3, "bogus": 1}))
        code, _, err = run(capsys, "forge", "--config", "c.json")
        assert code == 1 and "bogus" in err

    def test_invalid_k(self, capsys):
        code, _, _ = run(capsys, "forge", "--d", "3", "--k", "3")
        assert code == 1

    def test_usage_error(self, capsys):
        code, _, _ = run(capsys, "forge", "--d", "3")
        assert code == 1

    def test_env_output_dir(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "outdir"))
        code, _, _ = run(capsys, "plan", "--d", "4", "--out", "plan.csv")
        assert code == 0 and (tmp_path / "outdir" / "plan.csv").exists()


class TestOtherCommands:
    def test_noise(self, capsys):
        code, out, _ = run(capsys, "noise", "--d", "4", "--grid", "3", "--mode", "both")
        assert code == 0 and len(out.strip().split("\n")) == 1 + 2 * 3 * 3

    def test_noise_critical(self, capsys):
        code, out, _ = run(capsys, "noise", "--d", "4", "--critical", "--mode", "conjectured")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and abs(float(rows[2]["eps_wtilde"]) - 0.1429) < 1e-4

    def test_seesaw(self, capsys):
        code, out, _ = run(capsys, "seesaw", "wtilde:4", "--k", "1", "--restarts", "20")
        res = json.loads(out)
        assert code == 0 and abs(res["best_value"] + 0.5) < 1e-3

    def test_seesaw_reproducible(self, capsys):
        a = run(capsys, "seesaw", "wtilde:5", "--k", "2", "--restarts", "5", "--seed", "3")[1]
        b = run(capsys, "seesaw", "wtilde:5", "--k", "2", "--restarts", "5", "--seed", "3")[1]
        assert a == b

    def test_export(self, capsys, tmp_path):
        code, _, _ = run(capsys, "export-wtilde", "--d", "4", "5", "--out-dir", "x")
        assert code == 0
        assert (tmp_path / "x" / "wtilde_d5.json").read_text() == builtin_wtilde_path(5).read_text()


class TestWitnessIO:
    @pytest.mark.parametrize("d", range(3, 12))
    def test_shipped_exact(self, d):
        wf = load_witness(builtin_wtilde_path(d))
        assert np.array_equal(wf.operator, build_Wtilde(d))
        assert wf.fractions

    def test_round_trip_exact(self, tmp_path, rng):
        W = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
        W = W + W.conj().T
        save_witness(WitnessFile(W, 3, 2, -0.4), tmp_path / "w.json")
        back = load_witness(tmp_path / "w.json")
        assert np.array_equal(back.operator, W)
        assert back.k == 2 and back.threshold_C == -0.4

    def test_fraction_consistency(self):
        data = to_dict(wtilde_file(4))
        data["coefficients"][0]["re_frac"] = [1, 3]
        with pytest.raises(WitnessSchemaError, match=r"coefficients\[0\]\.re_frac"):
            from_dict(data)

    def test_non_hermitian(self):
        data = {"d": 2, "coefficients": [{"i": 0, "j": 0, "k": 0, "l": 1, "re": 1.0}]}
        with pytest.raises(WitnessSchemaError, match="coefficients"):
            from_dict(data)

    def test_index_range(self):
        data = {"d": 2, "coefficients": [{"i": 0, "j": 0, "k": 0, "l": 2, "re": 1.0}]}
        with pytest.raises(WitnessSchemaError, match=r"coefficients\[0\]\.l"):
            from_dict(data)

    def test_missing_field(self):
        with pytest.raises(WitnessSchemaError, match="coefficients"):
            from_dict({"d": 3})

    def test_bad_format(self):
        with pytest.raises(WitnessSchemaError, match="format"):
            from_dict({"format": "other", "d": 3, "coefficients": []})

"""CLI subcommands, config validation, checkpoints, and file formats."""
import json
import os

import numpy as np
import pytest

from ghdo import cli, oracle
from ghdo.errors import CheckpointError, InputError
from ghdo.fileio import (
    load_checkpoint,
    load_lindblad,
    read_dense_matrix,
    save_checkpoint,
    write_dense_matrix,
)
from ghdo.models import NetworkAghdo, from_classical
from ghdo.network import NetworkSpec


@pytest.fixture
def run_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        """
[model]
sites = 3
local_rank = 2
feature_densities = [3]
init_width = 0.05
seed = 12

[physics]
V = 2.0
g = 0.0
gamma = 1.0
periodic = true

[tdvp]
dt = 1e-2
regularization = 1e-3
samples_per_step = 256
alpha = 0.5
max_steps = 250
convergence_window = 100
convergence_tol = 5e-3
cg_tol = 1e-5
cg_max_iters = 100

[output]
directory = "OUTDIR"
checkpoint_interval = 100
estimate_samples = 4096
""".replace("OUTDIR", str(tmp_path / "out"))
    )
    return path


class TestConfig:
    def test_unknown_key_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("[physics]\ngama = 1.0\n")
        code = cli.main(["oracle", "--config", str(bad)])
        assert code == 2
        assert "physics.gama" in capsys.readouterr().err

    def test_unknown_section_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("[plumbing]\nx = 1\n")
        assert cli.main(["oracle", "--config", str(bad)]) == 2

    def test_range_validation(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[model]\nsites = 0\n")
        assert cli.main(["oracle", "--config", str(bad)]) == 2

    def test_override_flags(self):
        cfg = cli.load_config(None, ["physics.g=1.5", "model.sites=2", "tdvp.alpha=adaptive"])
        assert cfg["physics"]["g"] == 1.5
        assert cfg["model"]["sites"] == 2
        assert cfg["tdvp"]["alpha"] == "adaptive"

    def test_malformed_override(self):
        with pytest.raises(cli.ConfigError):
            cli.load_config(None, ["nonsense"])


class TestOracleCommand:
    def test_single_qubit_value(self, capsys):
        code = cli.main(["oracle", "--set", "model.sites=1", "--set", "physics.g=1.0",
                         "--set", "physics.V=0.0"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["magnetization"]["z"] == pytest.approx(-1 / 3, abs=1e-9)
        assert doc["magnetization"]["x"] == pytest.approx(0.0, abs=1e-9)

    def test_decay_chain(self, capsys):
        code = cli.main(["oracle", "--set", "model.sites=3", "--set", "physics.g=0.0"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["magnetization"]["z"] == pytest.approx(-1.0, abs=1e-9)

    def test_deterministic_output(self, capsys):
        args = ["oracle", "--set", "model.sites=2", "--set", "physics.g=0.9"]
        cli.main(args)
        first = capsys.readouterr().out
        cli.main(args)
        second = capsys.readouterr().out
        assert first == second


class TestCheckpoints:
    def test_network_roundtrip(self, tmp_path):
        spec = NetworkSpec(sites=3, local_rank=2, feature_densities=(4, 2), init_width=0.03, seed=7)
        model = NetworkAghdo.random(spec)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, model, rng_seed=11)
        loaded, seed = load_checkpoint(path)
        assert seed == 11
        assert loaded.spec == spec
        np.testing.assert_array_equal(loaded.params, model.params)

    def test_tabulated_roundtrip(self, tmp_path):
        model = from_classical(np.array([0.1, 0.2, 0.3, 0.4]))
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, model)
        loaded, _ = load_checkpoint(path)
        for a, b in zip(loaded.tables, model.tables):
            np.testing.assert_allclose(a, b, atol=1e-15)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "ckpt.json"
        path.write_text(json.dumps({"version": "ghdo-ckpt-0", "kind": "network"}))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_unreadable_rejected(self, tmp_path):
        path = tmp_path / "ckpt.json"
        path.write_text("not json")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)


class TestMatrixFormat:
    def test_roundtrip(self, tmp_path, rng):
        mat = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
        path = tmp_path / "m.txt"
        write_dense_matrix(path, mat)
        np.testing.assert_array_equal(read_dense_matrix(path), mat)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("nope 2 2\n")
        with pytest.raises(InputError):
            read_dense_matrix(path)


class TestOperatorFile:
    def test_loads_custom_model(self, tmp_path):
        doc = {
            "sites": 2,
            "hamiltonian": [
                {"support": [0], "matrix_re": [[0.0, 0.65], [0.65, 0.0]]},
            ],
            "jumps": [
                {"support": [1], "matrix_re": [[0.0, 1.0], [0.0, 0.0]]},
            ],
        }
        path = tmp_path / "ops.json"
        path.write_text(json.dumps(doc))
        lind = load_lindblad(path)
        assert lind.sites == 2
        assert len(lind.hamiltonian_terms) == 1
        assert len(lind.jump_operators) == 1

    def test_oracle_uses_operator_file(self, tmp_path, capsys):
        # single qubit with g = 1: operators_file route must agree with TFIM route
        doc = {
            "sites": 1,
            "hamiltonian": [{"support": [0], "matrix_re": [[0.0, 0.5], [0.5, 0.0]]}],
            "jumps": [{"support": [0], "matrix_re": [[0.0, 1.0], [0.0, 0.0]]}],
        }
        path = tmp_path / "ops.json"
        path.write_text(json.dumps(doc))
        code = cli.main(["oracle", "--set", "model.sites=1",
                         "--set", f"physics.operators_file={path}"])
        assert code == 0
        doc_out = json.loads(capsys.readouterr().out)
        assert doc_out["magnetization"]["z"] == pytest.approx(-1 / 3, abs=1e-9)


class TestVerifyCommand:
    def test_unknown_suite_exits_2(self):
        assert cli.main(["verify", "not-a-suite"]) == 2

    def test_fixedpoint_suite_passes(self, capsys):
        assert cli.main(["verify", "tdvp-fixedpoint"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out


class TestRunAndEstimate:
    def test_run_dark_state_and_estimate(self, run_config, tmp_path, capsys):
        code = cli.main(["run", "--config", str(run_config)])
        assert code == 0
        out_dir = tmp_path / "out"
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["steps"] >= 100
        assert summary["estimates"]["mag_z"]["mean"] == pytest.approx(-1.0, abs=0.005)

        csv_text = (out_dir / "diagnostics.csv").read_text().splitlines()
        assert csv_text[0].startswith("step,time,alpha,mag_x,mag_y,mag_z,purity")
        assert len(csv_text) == summary["steps"] + 1

        capsys.readouterr()
        code = cli.main(["estimate", str(out_dir / "checkpoint.json"),
                         "--samples", "2048", "--alpha", "0.5"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mag_z"]["mean"] == pytest.approx(-1.0, abs=0.01)

    def test_estimate_classical_checkpoint_entropy(self, tmp_path, capsys):
        """Uniform classical state: S2 equals the number of sites."""
        n_sites = 3
        model = from_classical(np.full(2**n_sites, 2.0**-n_sites))
        path = tmp_path / "uniform.json"
        save_checkpoint(path, model)
        code = cli.main(["estimate", str(path), "--samples", "20000", "--alpha", "0.5"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert abs(doc["renyi2"]["mean"] - n_sites) <= 3 * doc["renyi2"]["std_error"] + 0.05

    def test_estimate_pure_checkpoint_entropy(self, tmp_path, capsys):
        spec = NetworkSpec(sites=3, local_rank=1, feature_densities=(3,), init_width=0.05, seed=3)
        model = NetworkAghdo.random(spec)
        path = tmp_path / "pure.json"
        save_checkpoint(path, model)
        code = cli.main(["estimate", str(path), "--samples", "20000", "--alpha", "0.8"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert abs(doc["renyi2"]["mean"]) <= 3 * doc["renyi2"]["std_error"] + 0.02

    def test_estimate_random_checkpoint_matches_dense(self, tmp_path, capsys):
        spec = NetworkSpec(sites=3, local_rank=2, feature_densities=(4,), init_width=0.06, seed=9)
        model = NetworkAghdo.random(spec)
        path = tmp_path / "rand.json"
        save_checkpoint(path, model)
        code = cli.main(["estimate", str(path), "--samples", "30000", "--alpha", "0.5"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        rho = oracle.dense_from_model(model)
        mags = oracle.dense_magnetizations(rho, 3)
        for axis in ("x", "y", "z"):
            block = doc[f"mag_{axis}"]
            assert abs(block["mean"] - mags[axis]) <= 3 * block["std_error"] + 1e-3
        s2 = oracle.dense_renyi2(rho)
        assert abs(doc["renyi2"]["mean"] - s2) <= 3 * doc["renyi2"]["std_error"] + 0.02

    def test_dump_samples(self, tmp_path, capsys):
        model = from_classical(np.array([0.25, 0.25, 0.25, 0.25]))
        path = tmp_path / "m.json"
        save_checkpoint(path, model)
        dump = tmp_path / "samples.tsv"
        code = cli.main(["estimate", str(path), "--samples", "50", "--alpha", "0.5",
                        "--dump-samples", str(dump)])
        assert code == 0
        lines = dump.read_text().splitlines()
        assert lines[0].split("\t") == ["sigma", "eta", "weight", "log_rho_re", "log_rho_im", "log_p_alpha"]
        assert len(lines) == 51
        capsys.readouterr()

    def test_run_warm_start(self, run_config, tmp_path, capsys):
        code = cli.main(["run", "--config", str(run_config),
                         "--set", "tdvp.max_steps=5"])
        assert code == 0
        capsys.readouterr()
        ckpt = tmp_path / "out" / "checkpoint.json"
        code = cli.main(["run", "--config", str(run_config),
                         "--set", "tdvp.max_steps=3",
                         "--init-checkpoint", str(ckpt)])
        assert code == 0
        capsys.readouterr()

import filecmp
import json
from pathlib import Path

import pytest

from pat.cli import main

REPO_CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TINY_TRAIN = """
algorithm = PAT
episodes = 3
warmup_episodes = 1
eval_every = 2
eval_episodes = 1
seeds = 7
env.kind = grid_treasure
env.width = 5
env.height = 5
env.agents = 2
env.max_steps = 10
agent.d_hidden = 8
agent.bptt_window = 3
agent.net_widths = 16
agent.batch_size = 8
ats.heads = 2
ats.d_query = 4
ats.d_value = 8
ats.batch_size = 4
"""


@pytest.fixture
def tiny_cfg(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_TRAIN)
    return path


def test_validate_config_accepts_every_shipped_example():
    for cfg in sorted(REPO_CONFIGS.glob("*.cfg")):
        assert main(["validate-config", "--config", str(cfg), "--quiet"]) == 0, cfg.name


def test_validate_config_rejects_unknown_key(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("mystery = 1\n")
    assert main(["validate-config", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "unknown config key" in err
    assert "Traceback" not in err


def test_missing_config_file_is_exit_2(tmp_path, capsys):
    assert main(["validate-config", "--config", str(tmp_path / "absent.cfg")]) == 2
    assert "error:" in capsys.readouterr().err


def test_train_twice_produces_identical_output_trees(tiny_cfg, tmp_path):
    for name in ("a", "b"):
        assert main(["train", "--config", str(tiny_cfg),
                     "--out", str(tmp_path / name), "--quiet"]) == 0
    compare = filecmp.dircmp(tmp_path / "a", tmp_path / "b")

    def assert_identical(dc):
        assert not dc.diff_files, dc.diff_files
        assert not dc.left_only and not dc.right_only
        for sub in dc.subdirs.values():
            assert_identical(sub)

    assert_identical(compare)


def test_seed_count_flag_overrides_seed_list(tiny_cfg, tmp_path):
    assert main(["train", "--config", str(tiny_cfg), "--out", str(tmp_path / "run"),
                 "--seeds", "2", "--quiet"]) == 0
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["seeds"] == [0, 1]
    assert (tmp_path / "run" / "seed_1" / "metrics.csv").exists()


def test_set_override_wins_over_file(tiny_cfg, tmp_path):
    assert main(["train", "--config", str(tiny_cfg), "--out", str(tmp_path / "run"),
                 "--set", "episodes=2", "--quiet"]) == 0
    lines = (tmp_path / "run" / "seed_7" / "metrics.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 2


def test_oracle_prints_hand_computed_value(capsys):
    assert main(["oracle", "--config", str(REPO_CONFIGS / "oracle_3x3.cfg")]) == 0
    printed = float(capsys.readouterr().out.strip())
    g = 0.95
    expected = -0.01 + g * 0.99 + g**2 * (-0.01) + g**3 * 9.99
    assert printed == pytest.approx(expected, abs=1e-6)


def test_oracle_on_multi_agent_spec_is_usage_error(tiny_cfg, capsys):
    assert main(["oracle", "--config", str(tiny_cfg)]) == 2
    assert "single-agent" in capsys.readouterr().err


def test_eval_subcommand_reads_snapshots(tiny_cfg, tmp_path, capsys):
    assert main(["train", "--config", str(tiny_cfg), "--out", str(tmp_path / "run"),
                 "--quiet"]) == 0
    assert main(["eval", "--config", str(tiny_cfg), "--snapshots", str(tmp_path / "run"),
                 "--out", str(tmp_path / "evalout"), "--episodes", "2", "--quiet"]) == 0
    payload = json.loads((tmp_path / "evalout" / "eval_summary.json").read_text())
    assert payload["episodes"] == 2
    assert "7" in payload["per_seed"]


def test_eval_with_missing_snapshots_is_exit_2(tiny_cfg, tmp_path, capsys):
    assert main(["eval", "--config", str(tiny_cfg), "--snapshots", str(tmp_path / "none"),
                 "--out", str(tmp_path / "evalout")]) == 2
    assert "no snapshots" in capsys.readouterr().err


def test_transfer_dimension_mismatch_is_exit_2(tiny_cfg, tmp_path, capsys):
    assert main(["train", "--config", str(tiny_cfg), "--out", str(tmp_path / "run"),
                 "--quiet"]) == 0
    snap = tmp_path / "run" / "seed_7" / "snapshots" / "shared_attention.params"
    code = main(["transfer", "--config", str(tiny_cfg), "--out", str(tmp_path / "t"),
                 "--set", f"ats.pretrained={snap}", "--set", "agent.d_hidden=12",
                 "--quiet"])
    assert code == 2
    err = capsys.readouterr().err
    assert "d_model" in err and "Traceback" not in err


def test_transfer_without_pretrained_is_exit_2(tiny_cfg, tmp_path, capsys):
    assert main(["transfer", "--config", str(tiny_cfg), "--out", str(tmp_path / "t")]) == 2
    assert "ats.pretrained" in capsys.readouterr().err


def test_outputs_stay_inside_out_dir(tiny_cfg, tmp_path):
    workdir = tmp_path / "cwd"
    workdir.mkdir()
    out = tmp_path / "only_here"
    import os

    before = set(os.listdir(tmp_path))
    assert main(["train", "--config", str(tiny_cfg), "--out", str(out), "--quiet"]) == 0
    after = set(os.listdir(tmp_path))
    assert after - before == {"only_here"}

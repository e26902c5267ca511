import os
import subprocess
import sys
import time
from pathlib import Path

import pytest

from reveuler import __version__
from reveuler.cli import EXIT_CONFIG, EXIT_CONTRACT, EXIT_OK, main, resolve_config
from reveuler.config import PRESETS, ConfigError, list_presets, parse_config, preset_text


def test_parse_comments_and_defaults():
    cfg = parse_config("# header\n\nn = 17   # trailing\nR=3\nflip_leray = yes\nmms_n = 17, 25\n")
    assert cfg.n == 17 and cfg.R == 3.0 and cfg.flip_leray and cfg.mms_n == (17, 25)


@pytest.mark.parametrize(
    "text,key",
    [("n = 16", "n"), ("n = 7", "n"), ("bogus = 1", "bogus"), ("nu = -1", "nu"), ("k = 1", "k"), ("flip_burgers = maybe", "flip_burgers")],
)
def test_parse_errors_name_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_presets_parse():
    for name in PRESETS:
        cfg = parse_config(preset_text(name))
        assert cfg.n % 2 == 1
    kink = parse_config(preset_text("kink-k2"))
    assert kink.k == 2 and 3.0 < kink.beta0 < 3.25
    assert set(PRESETS) >= {"singular-default", "lipschitz-boundary", "kink-k2"}
    listing = list_presets()
    assert all(name in listing for name in PRESETS)


def test_fingerprint_tracks_content():
    a = parse_config("n = 17")
    b = parse_config("n = 17\noutput_dir = elsewhere")
    c = parse_config("n = 19")
    assert a.fingerprint == b.fingerprint != c.fingerprint


def test_resolve_prefers_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "smoke").mkdir()
    assert resolve_config("smoke").n == 17
    (tmp_path / "mine.cfg").write_text("n = 11\n")
    assert resolve_config("mine.cfg").n == 11
    with pytest.raises(ConfigError):
        resolve_config("missing.cfg")


def test_version_and_presets(capsys):
    assert main(["version"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == __version__
    assert main(["presets"]) == EXIT_OK
    assert "smoke" in capsys.readouterr().out


def test_even_n_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n = 16\n")
    assert main(["run", str(cfg), "-o", str(tmp_path / "out")]) == EXIT_CONFIG
    assert "'n'" in capsys.readouterr().err


def _csvs(d: Path):
    return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))}


@pytest.fixture(scope="module")
def smoke_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    t0 = time.perf_counter()
    code1 = main(["run", "smoke", "-o", str(root / "a")])
    elapsed = time.perf_counter() - t0
    code2 = main(["run", "smoke", "-o", str(root / "b")])
    return root, code1, code2, elapsed


@pytest.mark.slow
def test_smoke_passes_quickly(smoke_runs):
    root, code1, code2, elapsed = smoke_runs
    assert code1 == EXIT_OK and code2 == EXIT_OK
    assert elapsed < 60
    assert (root / "a" / "summary.txt").read_text().rstrip().endswith("overall PASS")


@pytest.mark.slow
def test_smoke_outputs_deterministic(smoke_runs):
    root = smoke_runs[0]
    a, b = _csvs(root / "a"), _csvs(root / "b")
    assert a and a == b
    fp = (root / "a" / "fingerprint.txt").read_text().strip()
    for name, blob in a.items():
        first = blob.decode().splitlines()[0]
        assert first.startswith(f"# fingerprint {fp}") and "units" in first, name


@pytest.mark.slow
def test_flipped_sign_fails_contract(tmp_path):
    text = preset_text("smoke") + "\nflip_leray = true\n"
    cfg = tmp_path / "flip.cfg"
    cfg.write_text(text)
    assert main(["run", str(cfg), "-o", str(tmp_path / "out")]) == EXIT_CONTRACT


def test_env_output_dir(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("profile = surrogate\nR = 2\nn = 9\nT = 0.1\nn_steps = 2\nK_max = 3\nrecursion = true\n")
    env = dict(os.environ, REVEULER_OUTPUT_DIR=str(tmp_path / "envout"))
    proc = subprocess.run([sys.executable, "-m", "reveuler.cli", "run", str(cfg)], env=env, capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
    assert (tmp_path / "envout" / "norms.csv").is_file()

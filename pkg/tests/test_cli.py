import json
import shutil
import subprocess
import sys

import pytest

from movies import moving_nuclei
from ssfkymo.cli import EXIT_OK, EXIT_STAGE, EXIT_VALIDATION, main
from ssfkymo.volume import save_volume

SMALL = {"n_per_class": 4, "n_tracks": 5, "dims": [32, 32, 20]}


def write_config(path, **overrides):
    cfg = {"mode": "synthetic", "synthetic": SMALL, "seed": 3, "output_dir": str(path.parent / "out")}
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


def test_run_all_artifacts(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    assert main(["run-all", "--config", str(cfg)]) == EXIT_OK
    out = tmp_path / "out"
    for ch in ("velocity", "random"):
        for name in (f"distances_{ch}.csv", f"embedding_{ch}.csv", f"embedding_{ch}.svg", f"csf_{ch}.json"):
            assert (out / name).is_file(), name
    header = (out / "embedding_velocity.csv").read_text().splitlines()[0]
    assert header == "item_id,label,k1,k2,k3"
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert "csf_velocity.json" in manifest["artifacts"]
    stats = json.loads((out / "stats_random_vs_velocity.json").read_text())
    assert stats["n"] == 12


def test_missing_input_exits_before_compute(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "cfg.json",
        mode="volumes",
        volumes=[{"path": "nope_a.vol"}, {"path": "nope_b.vol"}],
        channels=["ERK"],
    )
    assert main(["run-all", "--config", str(cfg)]) == EXIT_VALIDATION
    assert "missing" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()
    assert main(["ncd", "--manifest", str(tmp_path / "absent.json"), "--out", str(tmp_path / "d.csv")]) == EXIT_VALIDATION


def test_unknown_config_key(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", colour="blue")
    assert main(["run-all", "--config", str(cfg)]) == EXIT_VALIDATION


@pytest.mark.skipif(shutil.which("false") is None, reason="needs false")
def test_stage_failure_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", compressor={"executable": "false"})
    assert main(["run-all", "--config", str(cfg)]) == EXIT_STAGE
    assert "stage ncd" in capsys.readouterr().err


def test_print_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    assert main(["run-all", "--config", str(cfg), "--k", "2", "--print-config"]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["k"] == 2 and printed["synthetic"] == SMALL
    assert not (tmp_path / "out").exists()


def test_stages_compose_to_run_all(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    assert main(["run-all", "--config", str(cfg)]) == EXIT_OK
    ref = tmp_path / "out"
    step = tmp_path / "steps"
    c = str(cfg)
    assert main(["synth-bench", "--config", c, "--out-dir", str(step / "kymographs")]) == EXIT_OK
    qdir = step / "quantized" / "velocity"
    assert main(["kymo", "--config", c, "--manifest", str(step / "kymographs" / "manifest.json"), "--channel", "velocity", "--out-dir", str(qdir)]) == EXIT_OK
    qman = str(qdir / "quantized_velocity.json")
    assert main(["ncd", "--manifest", qman, "--out", str(step / "d.csv")]) == EXIT_OK
    assert main(["embed", "--distances", str(step / "d.csv"), "--manifest", qman, "--out", str(step / "e.csv")]) == EXIT_OK
    assert main(["csf", "--embedding", str(step / "e.csv"), "--out", str(step / "csf.json")]) == EXIT_OK
    assert (step / "d.csv").read_bytes() == (ref / "distances_velocity.csv").read_bytes()
    assert (step / "e.csv").read_bytes() == (ref / "embedding_velocity.csv").read_bytes()
    assert (step / "csf.json").read_bytes() == (ref / "csf_velocity.json").read_bytes()


@pytest.mark.filterwarnings("ignore::ssfkymo.exceptions.DegenerateSpreadWarning")
def test_volume_mode(tmp_path):
    entries = []
    for i in range(4):
        act = (0.2, 0.8) if i % 2 == 0 else (0.7, 0.3)
        vol = moving_nuclei(n_frames=5, activation=act)
        path = tmp_path / f"m{i}.vol"
        save_volume(vol, path)
        entries.append({"path": path.name, "label": i % 2, "name": f"m{i}"})
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mode": "volumes", "volumes": entries, "channels": ["ERK"], "output_dir": "out"}))
    assert main(["run-all", "--config", str(cfg), "--output-dir", str(tmp_path / "out")]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "kymographs" / "m0.tracks.csv").is_file()
    assert (out / "csf_ERK.json").is_file() and (out / "csf_velocity.json").is_file()
    assert main(["detect", "--volume", str(tmp_path / "m0.vol"), "--out", str(tmp_path / "t.csv")]) == EXIT_OK
    assert (tmp_path / "t.csv").read_text().startswith("track_id,")


def test_phantom_sweep_command(tmp_path):
    out = tmp_path / "sweep.csv"
    argv = ["phantom-sweep", "--levels", "[0, 0.5, 1]", "--trials", "3", "--out", str(out), "--svg", str(tmp_path / "s.svg")]
    assert main(argv) == EXIT_OK
    assert len(out.read_text().splitlines()) == 4
    assert (tmp_path / "s.svg").read_text().startswith("<svg")


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "ssfkymo.cli", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and "0.1.0" in done.stdout

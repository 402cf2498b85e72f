"""Drives every CLI subcommand end to end against a tiny synthetic dataset."""
import csv
import json
import subprocess
import sys
import tempfile
from pathlib import Path

BINARY = Path(sys.argv[1])


def run(*args, expect=0):
    proc = subprocess.run([str(BINARY), *args], capture_output=True, text=True)
    if proc.returncode != expect:
        raise AssertionError(
            f"{' '.join(map(str, args))} -> {proc.returncode} (expected {expect})\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}")
    return proc


def main():
    config = {
        "data": {"n_cell_lines": 1, "n_drugs": 2, "images_per_condition": 12, "seed": 5},
        "optimizer": {"epochs": 1, "batch_size": 32},
        "split": {"val_fraction": 0.25, "seed": 5},
        "cluster": {"n_neighbors": [5], "min_cluster_size": [5]},
        "probe": {"learning_rates": [0.01], "momentums": [0.0], "weight_decays": [0.0],
                  "epochs": 5, "hidden_units": 32},
    }
    with tempfile.TemporaryDirectory() as tmp_str:
        tmp = Path(tmp_str)
        cfg_path = tmp / "config.json"
        cfg_path.write_text(json.dumps(config))

        # generate-data
        run("generate-data", "--profile", "desk", "--config", cfg_path, "--out", tmp / "data")
        manifest = json.loads((tmp / "data" / "manifest.json").read_text())
        assert manifest["n"] == 1 * (2 * 5 + 4) * 12, manifest

        # train one setup
        run("train", "--profile", "desk", "--config", cfg_path, "--setup", "WSL,aug,one_crop",
            "--data", tmp / "data", "--out", tmp / "runs")
        runs = [p for p in (tmp / "runs").iterdir() if p.is_dir()]
        assert len(runs) == 1
        record = json.loads((runs[0] / "record.json").read_text())
        assert not record["failed"]

        # train --all resumes the finished run and adds the other 15
        run("train", "--profile", "desk", "--config", cfg_path, "--all",
            "--data", tmp / "data", "--out", tmp / "runs")
        runs = [p for p in (tmp / "runs").iterdir() if p.is_dir()]
        assert len(runs) == 16, f"expected 16 runs, got {len(runs)}"

        # embed from one checkpoint
        ckpt = runs[0] / "checkpoint.ckpt"
        run("embed", "--profile", "desk", "--config", cfg_path, "--checkpoint", ckpt,
            "--data", tmp / "data-missing", "--out", tmp / "emb",
            expect=2)  # missing dataset -> data error
        run("embed", "--profile", "desk", "--config", cfg_path, "--checkpoint", ckpt,
            "--data", tmp / "data", "--out", tmp / "emb")
        emb_manifest = json.loads((tmp / "emb" / "manifest.json").read_text())
        assert emb_manifest["latent_dim"] == 128

        # eval-similarity with explicit drug names and kind
        run("eval-similarity", "--profile", "desk", "--config", cfg_path,
            "--embeddings", tmp / "emb", "--drug1", "drug00", "--drug2", "drug01",
            "--control", "DMSO", "--kind", "euclidean", "--seed", "5")
        with open(tmp / "emb" / "similarity.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows and rows[0]["kind"] == "euclidean"

        # eval-probe and eval-cluster
        run("eval-probe", "--profile", "desk", "--config", cfg_path, "--embeddings", tmp / "emb")
        assert (tmp / "emb" / "probe_metrics.csv").exists()
        run("eval-cluster", "--profile", "desk", "--config", cfg_path, "--embeddings", tmp / "emb")
        assert (tmp / "emb" / "cluster_selected.csv").exists()

        # ingest: rebuild a dataset from image files
        import numpy as np  # noqa: PLC0415
        img_dir = tmp / "pngs"
        img_dir.mkdir()
        run("generate-data", "--profile", "desk", "--config", cfg_path, "--out", tmp / "data2")
        # write the first 4 crops back out as png via python (no image lib: use the harness f32)
        raw = np.fromfile(tmp / "data2" / "images.f32", dtype="<f4").reshape(-1, 64, 64)
        import struct, zlib  # noqa: PLC0415

        def write_png(path, a):
            h, w = a.shape
            raw8 = (a * 255).astype("u1")
            lines = b"".join(b"\x00" + raw8[r].tobytes() for r in range(h))
            comp = zlib.compress(lines)
            def chunk(kind, payload):
                return (struct.pack(">I", len(payload)) + kind + payload +
                        struct.pack(">I", zlib.crc32(kind + payload)))
            path.write_bytes(b"\x89PNG\r\n\x1a\n" +
                             chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)) +
                             chunk(b"IDAT", comp) + chunk(b"IEND", b""))

        with open(tmp / "data2" / "meta.csv") as fh:
            meta_rows = list(csv.DictReader(fh))
        ingest_meta = tmp / "ingest_meta.csv"
        with open(ingest_meta, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "cell_line", "drug", "concentration_level",
                             "time_point", "label", "replicate", "filename"])
            for i in range(4):
                name = f"crop{i}.png"
                write_png(img_dir / name, raw[i])
                m = meta_rows[i]
                writer.writerow([m["sample_id"], m["cell_line"], m["drug"],
                                 m["concentration_level"], m["time_point"], m["label"],
                                 m["replicate"], name])
        run("ingest", "--images", img_dir, "--meta", ingest_meta, "--out", tmp / "ingested")
        ing = json.loads((tmp / "ingested" / "manifest.json").read_text())
        assert ing["n"] == 4

        # full pipeline + report over its runs
        run("run", "--profile", "desk", "--config", cfg_path, "--out", tmp / "pipe")
        assert (tmp / "pipe" / "report" / "summary.csv").exists()
        run("report", "--profile", "desk", "--config", cfg_path,
            "--runs", tmp / "pipe" / "runs", "--out", tmp / "report2")
        with open(tmp / "report2" / "summary.csv") as fh:
            assert len(list(csv.reader(fh))) == 41  # header + 40 rows

        # usage and data-error exit codes
        run("train", "--profile", "desk", expect=2)  # neither --setup nor --all -> data error
        run("embed", expect=1)  # missing required options -> usage error
        proc = subprocess.run([str(BINARY), "no-such-command"], capture_output=True)
        assert proc.returncode != 0

    print("cli smoke ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Batch pipeline: detect -> ssf -> kymograph -> quantize -> ncd -> embed -> csf -> stats.

Each stage reads and writes plain files (``.vol`` pairs, CSV, JSON, SVG) so
it can be run on its own from the command line; :func:`run` chains them and
records a SHA-256 digest of every artifact in ``run_manifest.json``.
"""
import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .embedding import csf_compression, csf_rkhs, embed
from .exceptions import ConfigurationError, StageError, UndefinedTestError
from .kymograph import (
    build_kymograph,
    downsample_xy,
    load_kymograph,
    load_quantized,
    quantize_cohort,
    render_projection,
    save_kymograph,
    save_quantized,
    write_pgm,
)
from .log_filter import max_response
from .ncd import DistanceMatrix, get_compressor, pairwise_matrix
from .ssf import activation_sweep, write_sweep_csv
from .stats import pearson, wilcoxon_signed_rank
from .svg import line_svg, scatter_svg
from .synth import SyntheticSpec, generate_benchmark, write_corpus
from .tracking import cell_velocity, detect_movie, link_tracks, write_tracks_csv
from .volume import load_volume, radius_to_pixels

log = logging.getLogger(__name__)

DEFAULT_RADII_UM = [4.0, 4.5, 5.0, 5.5, 6.0]
NON_RESULT_KEYS = ("output_dir", "workers")


@dataclass
class PipelineConfig:
    mode: str = "synthetic"
    synthetic: dict = field(default_factory=dict)
    volumes: list = field(default_factory=list)
    nuclear_channel: str = "H2B"
    channels: list = field(default_factory=list)
    velocity: bool = True
    radii_um: list = field(default_factory=lambda: list(DEFAULT_RADII_UM))
    threshold: float = 0.01
    polarity: str = "bright"
    gate_px: float = 10.0
    downsample: bool = False
    min_radius_px: Optional[float] = None
    compressor: object = "lzma"
    symmetrize: bool = False
    k: Optional[int] = None
    output_dir: str = "ssfkymo-out"
    seed: int = 0
    workers: int = 1

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
        cfg = cls.from_dict(data)
        base = Path(path).parent
        for v in cfg.volumes:
            if not Path(v["path"]).is_absolute():
                v["path"] = str(base / v["path"])
        return cfg

    def validate(self):
        if self.mode not in ("synthetic", "volumes"):
            raise ConfigurationError(f"mode must be 'synthetic' or 'volumes', got {self.mode!r}")
        if not self.radii_um or any(r <= 0 for r in self.radii_um):
            raise ConfigurationError("radii_um must be a non-empty list of positive values")
        if self.gate_px <= 0:
            raise ConfigurationError("gate_px must be positive")
        if self.k is not None and self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if self.mode == "synthetic":
            try:
                SyntheticSpec(**_synthetic_kwargs(self.synthetic, self.seed))
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"bad synthetic spec: {exc}") from None
        else:
            if len(self.volumes) < 2:
                raise ConfigurationError("volumes mode needs at least two volumes")
            for v in self.volumes:
                if "path" not in v:
                    raise ConfigurationError(f"volume entry without path: {v}")
                for p in (Path(v["path"]), Path(v["path"] + ".json")):
                    if not p.exists():
                        raise ConfigurationError(f"input file missing: {p}")
        if self.downsample and self.mode == "synthetic" and self.min_radius_px is None:
            raise ConfigurationError("downsample in synthetic mode needs min_radius_px")
        if isinstance(self.compressor, dict) and self.compressor.get("type", "external") == "external":
            get_compressor(self.compressor)
        return self

    def to_dict(self):
        return asdict(self)

    def digest(self):
        """SHA-256 of the settings that affect results.

        ``output_dir`` and ``workers`` are left out so a rerun elsewhere, or
        with more threads, carries the same digest.
        """
        d = {k: v for k, v in self.to_dict().items() if k not in NON_RESULT_KEYS}
        return sha256_bytes(json.dumps(d, sort_keys=True).encode())


def _synthetic_kwargs(d, seed):
    kw = dict(d)
    kw.setdefault("seed", seed)
    for key in ("class_means", "dims"):
        if key in kw:
            kw[key] = tuple(kw[key])
    return kw


def sha256_bytes(b):
    return hashlib.sha256(b).hexdigest()


def sha256_file(path):
    return sha256_bytes(Path(path).read_bytes())


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


# -- stage: phantom sweep -------------------------------------------------


def phantom_sweep_stage(out_csv, levels=None, trials=100, seed=0, svg=None):
    levels = list(np.round(np.linspace(0.0, 1.0, 11), 10)) if levels is None else list(levels)
    rows = activation_sweep(levels, trials, seed)
    write_sweep_csv(rows, out_csv)
    x = [r.activation for r in rows]
    a, b = np.polyfit(x, [r.ssf_mean for r in rows], 1)
    rho, p = pearson(x, [r.ssf_mean for r in rows])
    summary = {"slope": float(a), "intercept": float(b), "pearson_r": rho, "pearson_p": p}
    if svg:
        Path(svg).write_text(
            line_svg(
                x,
                {
                    "ground truth": x,
                    "SSF": ([r.ssf_mean for r in rows], [r.ssf_stderr for r in rows]),
                },
                title="SSF vs planted activation",
            )
        )
    return rows, summary


# -- stage: inputs -> real-valued kymographs -------------------------------


def synthetic_corpus_stage(cfg, out_dir):
    spec = SyntheticSpec(**_synthetic_kwargs(cfg.synthetic, cfg.seed))
    items = generate_benchmark(spec)
    write_corpus(items, out_dir, spec)
    return Path(out_dir) / "manifest.json"


def volume_kymographs(volume, cfg, name):
    """Detect, track and write SSF / velocity kymographs for one volume."""
    frames = detect_movie(volume, cfg.nuclear_channel, cfg.radii_um, cfg.threshold, cfg.polarity)
    tracks = link_tracks(frames, cfg.gate_px)
    X, Y, Z, _, T = volume.dims
    dims = (X, Y, Z, T) if Z > 1 else (X, Y, T)
    spacing = np.asarray(volume.spacing)[: 3 if Z > 1 else 2]
    radii_px = [np.atleast_1d(radius_to_pixels(r, spacing)) for r in cfg.radii_um]
    channels = cfg.channels or [c for c in volume.channel_names if c != cfg.nuclear_channel]
    kymos = {}
    for ch in channels:
        records = []
        for t in range(T):
            at_t = [r for tr in tracks for r in tr.records if r.coord.t == t]
            if not at_t:
                continue
            resp = max_response(volume.frame(ch, t), radii_px).data
            for rec in at_t:
                c = rec.coord
                idx = (c.x, c.y, c.z) if Z > 1 else (c.x, c.y)
                records.append((c, float(resp[idx])))
        kymos[ch] = build_kymograph(records, dims, channel=ch, name=name, provenance=[name, f"ssf:{ch}"])
    if cfg.velocity:
        records = [(r.coord, cell_velocity(tr, r.coord.t)) for tr in tracks if len(tr) > 1 for r in tr.records]
        kymos["velocity"] = build_kymograph(records, dims, channel="velocity", name=name, provenance=[name, "velocity"])
    return tracks, kymos


def volumes_corpus_stage(cfg, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    channels = set()
    for i, v in enumerate(cfg.volumes):
        name = v.get("name") or Path(v["path"]).stem
        try:
            vol = load_volume(v["path"])
            tracks, kymos = volume_kymographs(vol, cfg, name)
        except Exception as exc:
            raise StageError("detect", f"{name}: {exc}") from exc
        write_tracks_csv(tracks, out / f"{name}.tracks.csv")
        files = {}
        for ch, k in sorted(kymos.items()):
            fname = f"{name}.{ch}.vol"
            save_kymograph(k, out / fname)
            files[ch] = fname
            channels.add(ch)
        entries.append({"name": name, "label": v.get("label", i), "seed": None, "files": files})
    manifest = {"kind": "kymograph_corpus", "spec": None, "channels": sorted(channels), "items": entries}
    write_json(out / "manifest.json", manifest)
    return out / "manifest.json"


# -- stage: quantize --------------------------------------------------------


def read_manifest(path):
    path = Path(path)
    try:
        m = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"manifest not found: {path}") from None
    return m, path.parent


def quantize_stage(corpus_manifest, channel, out_dir, downsample=False, min_radius_px=None):
    """Quantize one channel of a corpus as a cohort; write u8 kymographs."""
    m, base = read_manifest(corpus_manifest)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items = [it for it in m["items"] if channel in it["files"]]
    if not items:
        raise ConfigurationError(f"no items carry channel {channel!r}")
    kymos = [load_kymograph(base / it["files"][channel]) for it in items]
    if downsample:
        kymos = [downsample_xy(k, min_radius_px) for k in kymos]
    quantized = quantize_cohort(kymos)
    entries = []
    for it, q in zip(items, quantized):
        q.name = it["name"]
        fname = f"{it['name']}.{channel}.q.vol"
        save_quantized(q, out / fname)
        write_pgm(out / f"{it['name']}.{channel}.pgm", render_projection(q))
        entries.append({"name": it["name"], "label": it["label"], "file": fname})
    qm = {
        "kind": "quantized_cohort",
        "channel": channel,
        "cohort_stats": [float(s) for s in quantized[0].cohort_stats],
        "items": entries,
    }
    path = out / f"quantized_{channel}.json"
    write_json(path, qm)
    return path


def load_cohort(quantized_manifest):
    m, base = read_manifest(quantized_manifest)
    qs = [load_quantized(base / it["file"]) for it in m["items"]]
    for it, q in zip(m["items"], qs):
        q.name = it["name"]
    return qs, [it["label"] for it in m["items"]], m


# -- stage: ncd / embed / csf / stats ---------------------------------------


def ncd_stage(quantized_manifest, out_csv, compressor="lzma", workers=1, symmetrize=False):
    qs, _, _ = load_cohort(quantized_manifest)
    dm = pairwise_matrix(qs, get_compressor(compressor), n_jobs=workers, symmetrize=symmetrize)
    dm.to_csv(out_csv)
    return dm


def labels_by_name(quantized_manifest):
    m, _ = read_manifest(quantized_manifest)
    return {it["name"]: it["label"] for it in m["items"]}


def write_embedding_csv(path, e, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item_id", "label"] + [f"k{i + 1}" for i in range(e.n_components)])
        for name, label, row in zip(e.item_ids, labels, e.points):
            w.writerow([name, label] + [repr(float(v)) for v in row])


def read_embedding_csv(path):
    from .embedding import Embedding

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    ids = [r[0] for r in body]
    labels = [_parse_label(r[1]) for r in body]
    pts = np.array([[float(v) for v in r[2:]] for r in body])
    return Embedding(pts, np.array([]), float("nan"), ids), labels


def _parse_label(s):
    try:
        return int(s)
    except ValueError:
        return s


def embed_stage(distances_csv, out_csv, k=None, labels=None, svg=None, title=""):
    dm = DistanceMatrix.from_csv(distances_csv)
    if labels is None:
        labels = [0] * dm.n
    elif isinstance(labels, dict):
        labels = [labels[i] for i in dm.item_ids]
    k = k or max(1, len(set(labels)))
    e = embed(dm, k)
    write_embedding_csv(out_csv, e, labels)
    if svg:
        Path(svg).write_text(scatter_svg(e.points, labels, title=title))
    return e, labels


def csf_stage(embedding_csv, out_json):
    e, labels = read_embedding_csv(embedding_csv)
    report = csf_rkhs(e, labels)
    write_json(out_json, report.to_dict())
    return report


def csf_compression_stage(quantized_manifest, out_json, compressor="lzma"):
    qs, labels, _ = load_cohort(quantized_manifest)
    groups = {}
    for q, l in zip(qs, labels):
        groups.setdefault(l, []).append(q)
    report = csf_compression([groups[k] for k in sorted(groups, key=str)], get_compressor(compressor))
    write_json(out_json, report.to_dict())
    return report


def _per_item(csf_json):
    d = json.loads(Path(csf_json).read_text())
    return {r["item_id"]: r["deficiency"] for r in d["per_item"]}


def stats_stage(csf_a, csf_b, out_json=None, test="wilcoxon"):
    """Paired comparison of per-item deficiencies of two CSF reports."""
    a, b = _per_item(csf_a), _per_item(csf_b)
    ids = [i for i in a if i in b]
    if test == "wilcoxon":
        stat, p = wilcoxon_signed_rank([(a[i], b[i]) for i in ids])
        result = {"test": "wilcoxon_signed_rank", "statistic": stat, "p": p}
    elif test == "pearson":
        r, p = pearson([a[i] for i in ids], [b[i] for i in ids])
        result = {"test": "pearson", "r": r, "p": p}
    else:
        raise ConfigurationError(f"unknown test {test!r}")
    result.update(
        {
            "n": len(ids),
            "a": Path(csf_a).name,
            "b": Path(csf_b).name,
            "median_a": float(np.median([a[i] for i in ids])),
            "median_b": float(np.median([b[i] for i in ids])),
        }
    )
    if out_json:
        write_json(out_json, result)
    return result


# -- run-all ------------------------------------------------------------------


def _stage(name, fn, *args, **kwargs):
    log.info("stage %s", name)
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


def run(cfg):
    """Execute the whole pipeline; returns the run manifest dict."""
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_dir = out / "kymographs"
    if cfg.mode == "synthetic":
        corpus = _stage("synth", synthetic_corpus_stage, cfg, corpus_dir)
    else:
        corpus = _stage("detect", volumes_corpus_stage, cfg, corpus_dir)
    m, _ = read_manifest(corpus)
    min_r = cfg.min_radius_px
    if cfg.downsample and min_r is None and cfg.mode == "volumes":
        spacing = load_volume(cfg.volumes[0]["path"]).spacing
        min_r = float(min(cfg.radii_um)) / spacing[0]

    summary = {}
    for ch in m["channels"]:
        qdir = out / "quantized" / ch
        qpath = _stage("quantize", quantize_stage, corpus, ch, qdir, cfg.downsample, min_r)
        dcsv = out / f"distances_{ch}.csv"
        dm = _stage("ncd", ncd_stage, qpath, dcsv, cfg.compressor, cfg.workers, cfg.symmetrize)
        ecsv = out / f"embedding_{ch}.csv"
        labels = labels_by_name(qpath)
        _stage("embed", embed_stage, dcsv, ecsv, cfg.k, labels, out / f"embedding_{ch}.svg", ch)
        report = _stage("csf", csf_stage, ecsv, out / f"csf_{ch}.json")
        summary[ch] = {
            "csf": list(report.overall),
            "csf_items": list(report.overall_items),
            "self_ncd_bound": dm.self_ncd_bound,
        }
    channels = list(m["channels"])
    for i, a in enumerate(channels):
        for b in channels[i + 1 :]:
            target = out / f"stats_{a}_vs_{b}.json"
            try:
                stats_stage(out / f"csf_{a}.json", out / f"csf_{b}.json", target)
            except UndefinedTestError as exc:
                # too few items for the test; keep the run, say why
                write_json(target, {"test": "wilcoxon_signed_rank", "undefined": str(exc)})
    write_json(out / "summary.json", summary)

    artifacts = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "run_manifest.json")
    manifest = {
        "package": "ssfkymo",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "artifacts": {str(p.relative_to(out)): sha256_file(p) for p in artifacts},
    }
    write_json(out / "run_manifest.json", manifest)
    return manifest

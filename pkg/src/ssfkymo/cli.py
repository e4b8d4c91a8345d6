"""Command-line entry point: ``ssfkymo <subcommand> ...``.

Exit codes are 0 on success, 2 when inputs or configuration fail validation
(checked before any compute), and 3 when a stage fails while running.
"""
import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__, pipeline
from .exceptions import ConfigurationError, SSFError, StageError
from .kymograph import save_kymograph
from .pipeline import PipelineConfig
from .tracking import detect_movie, link_tracks, write_tracks_csv
from .volume import load_volume

log = logging.getLogger("ssfkymo")

EXIT_OK, EXIT_VALIDATION, EXIT_STAGE = 0, 2, 3


def _value(text):
    """Parse a flag value as JSON when possible, else keep the string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise ConfigurationError(f"input file missing: {p}")


def build_config(args):
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {}
    for f in fields(PipelineConfig):
        v = getattr(args, f"cfg_{f.name}", None)
        if v is not None:
            overrides[f.name] = v
    for key, v in overrides.items():
        setattr(cfg, key, v)
    return cfg


def cmd_run_all(args):
    cfg = build_config(args)
    if args.print_config:
        print(json.dumps(cfg.to_dict(), indent=1, sort_keys=True))
        return EXIT_OK
    cfg.validate()
    manifest = pipeline.run(cfg)
    print(f"wrote {len(manifest['artifacts'])} artifacts to {cfg.output_dir} (config {manifest['config_sha256'][:12]})")
    return EXIT_OK


def cmd_phantom_sweep(args):
    _, summary = pipeline.phantom_sweep_stage(args.out, args.levels, args.trials, args.seed, args.svg)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_synth_bench(args):
    cfg = build_config(args)
    cfg.mode = "synthetic"
    cfg.validate()
    path = pipeline._stage("synth", pipeline.synthetic_corpus_stage, cfg, args.out_dir)
    print(path)
    return EXIT_OK


def cmd_detect(args):
    _require(args.volume)
    cfg = build_config(args)
    vol = load_volume(args.volume)
    try:
        frames = detect_movie(vol, cfg.nuclear_channel, cfg.radii_um, cfg.threshold, cfg.polarity)
        tracks = link_tracks(frames, cfg.gate_px)
    except Exception as exc:
        raise StageError("detect", f"{args.volume}: {exc}") from exc
    write_tracks_csv(tracks, args.out)
    print(f"{len(tracks)} tracks -> {args.out}")
    return EXIT_OK


def cmd_kymo(args):
    if args.volume:
        # one volume -> real-valued kymographs for every configured channel
        _require(args.volume)
        cfg = build_config(args)
        name = Path(args.volume).stem
        vol = load_volume(args.volume)
        tracks, kymos = pipeline._stage("kymo", pipeline.volume_kymographs, vol, cfg, name)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for ch, k in sorted(kymos.items()):
            save_kymograph(k, out / f"{name}.{ch}.vol")
        print(f"{len(kymos)} kymographs -> {out}")
        return EXIT_OK
    _require(args.manifest)
    cfg = build_config(args)
    if cfg.downsample and cfg.min_radius_px is None:
        raise ConfigurationError("--downsample needs --min-radius-px")
    path = pipeline._stage(
        "quantize", pipeline.quantize_stage, args.manifest, args.channel, args.out_dir, cfg.downsample, cfg.min_radius_px
    )
    print(path)
    return EXIT_OK


def cmd_ncd(args):
    _require(args.manifest)
    dm = pipeline._stage("ncd", pipeline.ncd_stage, args.manifest, args.out, _value(args.compressor), args.workers, args.symmetrize)
    print(f"{dm.n}x{dm.n} matrix -> {args.out} (max self-NCD {dm.self_ncd_bound:.4f})")
    return EXIT_OK


def cmd_embed(args):
    _require(args.distances, args.manifest)
    labels = pipeline.labels_by_name(args.manifest) if args.manifest else None
    e, _ = pipeline._stage("embed", pipeline.embed_stage, args.distances, args.out, args.k, labels, args.svg, args.title)
    print(f"K={e.n_components} embedding -> {args.out} (negative mass {e.discarded_negative_mass + 0.0:.3g})")
    return EXIT_OK


def cmd_csf(args):
    if args.embedding:
        _require(args.embedding)
        report = pipeline._stage("csf", pipeline.csf_stage, args.embedding, args.out)
    elif args.manifest:
        _require(args.manifest)
        report = pipeline._stage("csf", pipeline.csf_compression_stage, args.manifest, args.out, _value(args.compressor))
    else:
        raise ConfigurationError("csf needs --embedding or --manifest")
    m, s = report.overall
    print(f"CSF [{m:.4g}, {s:.4g}] -> {args.out}")
    return EXIT_OK


def cmd_stats(args):
    _require(args.a, args.b)
    result = pipeline._stage("stats", pipeline.stats_stage, args.a, args.b, args.out, args.test)
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def _add_config_flags(p):
    p.add_argument("--config", help="JSON pipeline config; flags below override its keys")
    for f in fields(PipelineConfig):
        p.add_argument(
            "--" + f.name.replace("_", "-"),
            dest=f"cfg_{f.name}",
            type=_value,
            metavar="VALUE",
            help=f"override config key {f.name!r} (JSON literal or string)",
        )


def make_parser():
    parser = argparse.ArgumentParser(prog="ssfkymo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-all", help="run the whole pipeline from a config")
    _add_config_flags(p)
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    p.set_defaults(func=cmd_run_all)

    p = sub.add_parser("phantom-sweep", help="SSF and cytonuclear ratio across planted activation levels")
    p.add_argument("--levels", type=_value, default=None, help="JSON list of activation levels (default 0..1 step 0.1)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="sweep CSV")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_phantom_sweep)

    p = sub.add_parser("synth-bench", help="write the constant-velocity benchmark corpus")
    _add_config_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth_bench)

    p = sub.add_parser("detect", help="detect and link nuclei in one volume; write tracks CSV")
    _add_config_flags(p)
    p.add_argument("--volume", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("kymo", help="build kymographs from a volume, or quantize a corpus channel")
    _add_config_flags(p)
    p.add_argument("--volume", help="build real-valued kymographs from this volume")
    p.add_argument("--manifest", help="corpus manifest.json to quantize")
    p.add_argument("--channel", default="velocity")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_kymo)

    p = sub.add_parser("ncd", help="pairwise NCD matrix of a quantized cohort")
    p.add_argument("--manifest", required=True, help="quantized_<channel>.json")
    p.add_argument("--out", required=True)
    p.add_argument("--compressor", default="lzma", help="name or JSON descriptor")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--symmetrize", action="store_true")
    p.set_defaults(func=cmd_ncd)

    p = sub.add_parser("embed", help="classical MDS of a distance matrix")
    p.add_argument("--distances", required=True)
    p.add_argument("--manifest", help="quantized manifest providing labels")
    p.add_argument("--k", type=int, help="dimensions (default: number of labels)")
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--title", default="")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("csf", help="cluster structure function")
    p.add_argument("--embedding", help="embedding CSV (RKHS form)")
    p.add_argument("--manifest", help="quantized manifest (compression form)")
    p.add_argument("--compressor", default="lzma")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_csf)

    p = sub.add_parser("stats", help="paired test between two CSF reports")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--test", choices=("wilcoxon", "pearson"), default="wilcoxon")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: stage {exc.stage} failed: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ConfigurationError, SSFError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

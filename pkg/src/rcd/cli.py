"""Command-line entry point: ``rcd <command> [flags]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from PIL import Image

from . import ensemble as ens
from .dataset import Manifest, SampleRecord, load_manifest, save_manifest, scan_market_layout
from .errors import ConfigError, RcdError
from .evaluation import evaluate
from .imgcore import RngStream, load_image, save_image
from .losses import DEFAULT_MARGIN, id_loss, mine_hard_triplets, read_feature_csv, triplet_loss
from .sampler import BatchSpec, sample_batch
from .transforms import PRESETS, AugmentConfig, plan_global, plan_local, plan_rcd, render

log = logging.getLogger("rcd")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# RngStream domains keep per-image, per-batch and statistics streams disjoint
DOMAIN_IMAGE, DOMAIN_BATCH, DOMAIN_STATS, DOMAIN_SAMPLER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    d = AugmentConfig()
    g = p.add_argument_group("transform configuration")
    g.add_argument("--preset", choices=sorted(PRESETS), help="start from a named configuration; explicit flags override it")
    g.add_argument("--mode", choices=["grayscale", "sketch"], help=f"color-free intermediary (default: {d.mode})")
    g.add_argument("--p", type=float, help=f"global transform probability (default: {d.p}, the tuned value for whole-image dropout)")
    g.add_argument("--pr", type=float, help=f"local transform probability (default: {d.p_r}, the tuned value for rectangle dropout)")
    g.add_argument("--sl", type=float, help=f"minimum rectangle area ratio (default: {d.s_l})")
    g.add_argument("--sh", type=float, help=f"maximum rectangle area ratio (default: {d.s_h})")
    g.add_argument("--r1", type=float, help=f"minimum rectangle aspect ratio h/w (default: {d.r_1})")
    g.add_argument("--r2", type=float, help=f"maximum rectangle aspect ratio h/w (default: {d.r_2:.4f})")
    g.add_argument("--retry-cap", type=int, help=f"rectangle sampling attempts before giving up (default: {d.retry_cap})")
    g.add_argument(
        "--combine", action=argparse.BooleanOptionalAction, default=None,
        help="global first, local only if global did not fire; --no-combine draws both independently (default: on)",
    )
    g.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")


def _config_from_args(args) -> AugmentConfig:
    cfg = PRESETS[args.preset] if args.preset else AugmentConfig()
    changes = {
        "mode": args.mode, "p": args.p, "p_r": args.pr, "s_l": args.sl, "s_h": args.sh,
        "r_1": args.r1, "r_2": args.r2, "retry_cap": args.retry_cap, "combine": args.combine,
    }
    changes = {k: v for k, v in changes.items() if v is not None}
    return cfg.with_(seed=args.seed, **changes)


def _add_corpus_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    src = p.add_mutually_exclusive_group(required=required)
    src.add_argument("--in-dir", type=Path, help="directory of <pid>_c<cam>*.jpg|png images")
    src.add_argument("--manifest", type=Path, help="JSON-Lines manifest")


def _resolve(record: SampleRecord, base: Path | None) -> Path:
    path = Path(record.path)
    if base is not None and not path.is_absolute():
        return base / path
    return path


def _load_corpus(args) -> tuple[Manifest, Path | None]:
    """Manifest plus the directory its relative paths resolve against (None: as given)."""
    if args.in_dir is not None:
        return scan_market_layout(args.in_dir), None
    if args.manifest is not None:
        return load_manifest(args.manifest), args.manifest.parent
    return None, None


def _threads() -> int:
    raw = os.environ.get("RCD_THREADS")
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"RCD_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"RCD_THREADS must be >= 1, got {n}")
    return n


# --- commands ----------------------------------------------------------------


def cmd_augment(args) -> int:
    cfg = _config_from_args(args)
    if args.batch_size < 1:
        raise UsageError("--batch-size must be >= 1")
    manifest, base = _load_corpus(args)
    names = [Path(r.path).stem + ".png" for r in manifest]
    if len(set(names)) != len(names):
        raise RcdError("input manifest has colliding file names; output names would clash")
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    batch_fired = {}
    if args.per_batch:
        n_batches = math.ceil(len(manifest) / args.batch_size)
        for b in range(n_batches):
            batch_fired[b] = plan_global(cfg, RngStream(cfg.seed, b, DOMAIN_BATCH)).global_fired

    def work(i: int) -> SampleRecord:
        rec = manifest.records[i]
        img = load_image(_resolve(rec, base))
        rng = RngStream(cfg.seed, i, DOMAIN_IMAGE)
        override = batch_fired.get(i // args.batch_size) if args.per_batch else None
        outcome = render(img, plan_rcd(img.width, img.height, cfg, rng, override), cfg.mode)
        save_image(outcome.image, out_dir / names[i])
        meta = {
            "source": rec.path,
            "applied": outcome.applied,
            "kind": outcome.kind,
            "region": None if outcome.region is None else outcome.region.as_list(),
            "seed": cfg.seed,
            "stream_id": i,
        }
        return SampleRecord(names[i], rec.identity, rec.camera, i, meta)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        records = list(pool.map(work, range(len(manifest))))
    save_manifest(Manifest(records), out_dir / "manifest.jsonl")
    applied = sum(r.meta["applied"] for r in records)
    log.info("augmented %d images, %d changed", len(records), applied)
    print(json.dumps({"images": len(records), "applied": applied, "manifest": str(out_dir / "manifest.jsonl")}))
    return EXIT_OK


def cmd_batch(args) -> int:
    spec = BatchSpec(args.k, args.m, args.seed)
    manifest, _ = _load_corpus(args)
    for b in range(args.count):
        batch = sample_batch(manifest, spec, RngStream(spec.seed, b, DOMAIN_SAMPLER))
        entries = [{"slot": i, "path": r.path, "identity": r.identity, "camera": r.camera} for r, i in batch.entries]
        print(json.dumps({"batch": b, "entries": entries}, separators=(",", ":")))
    return EXIT_OK


def cmd_loss(args) -> int:
    records = read_feature_csv(args.features)
    selections = mine_hard_triplets(records)
    out = {"anchors": len(selections), "margin": args.margin, "triplet": triplet_loss(selections, args.margin)}
    if args.paper_literal:
        out["triplet_paper_literal"] = triplet_loss(selections, args.margin, paper_literal=True)
    if all(r.probs is not None for r in records):
        out["id"] = id_loss(records)
        out["total"] = out["triplet"] + out["id"]
    else:
        out["id"] = out["total"] = None
    print(json.dumps(out))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.max_rank < 1:
        raise UsageError("--max-rank must be >= 1")
    result = evaluate(read_feature_csv(args.query), read_feature_csv(args.gallery), args.max_rank, not args.no_cam_filter)
    text = json.dumps(result.to_dict())
    if args.output:
        args.output.write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_ensemble(args) -> int:
    F = ens.load_vote_matrix(args.votes)
    if (args.k is None) != (args.swap is None):
        raise UsageError("--k and --swap must be given together")
    g = None
    if args.swap is not None:
        g = ens.parse_vote_line(args.swap, 1, "--swap")
    print(json.dumps(ens.report(F, args.k, g).to_dict()))
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    for e in args.err_base + args.err_dev:
        if not 0.0 <= e <= 1.0:
            raise UsageError(f"error rates must lie in [0, 1], got {e}")
    rows = ens.sweep(args.n, args.m, args.err_base, args.err_dev, args.trials, RngStream(args.seed, 0, DOMAIN_STATS))
    print("null model: components err i.i.d. per instance; the deviated component replaces component 0", file=sys.stderr)
    sys.stdout.write(ens.format_sweep_csv(rows))
    return EXIT_OK


STATS_HEADER = "transform,configured_p,empirical_p,trials,ci95"


def firing_stats(cfg: AugmentConfig, trials: int, dims: list[tuple[int, int]]) -> list[tuple[str, float, float, int, float]]:
    """Empirical firing rates of the global, local and configured pipelines.

    Each transform uses its own stream; trial ``t`` uses image size ``dims[t % len(dims)]``.
    ``ci95`` is the normal-approximation 95% half-width around the configured probability.
    """
    if trials <= 0:
        return []
    rows = []
    planners = [
        ("ggt", cfg.p, lambda w, h, rng: plan_global(cfg, rng)),
        ("lgt", cfg.p_r, lambda w, h, rng: plan_local(w, h, cfg, rng)),
        ("rcd", cfg.any_fire_probability, lambda w, h, rng: plan_rcd(w, h, cfg, rng)),
    ]
    for row, (name, configured, plan) in enumerate(planners):
        rng = RngStream(cfg.seed, row, DOMAIN_STATS)
        fired = 0
        for t in range(trials):
            w, h = dims[t % len(dims)]
            fired += plan(w, h, rng).kind != "none"
        ci = 1.96 * math.sqrt(configured * (1 - configured) / trials)
        rows.append((name, configured, fired / trials, trials, ci))
    return rows


def cmd_stats(args) -> int:
    cfg = _config_from_args(args)
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    dims = [(args.width, args.height)]
    if args.in_dir is not None or args.manifest is not None:
        manifest, base = _load_corpus(args)
        dims = []
        for rec in manifest:
            with Image.open(_resolve(rec, base)) as im:
                dims.append(im.size)
    lines = [STATS_HEADER]
    for name, conf, emp, n, ci in firing_stats(cfg, args.trials, dims):
        lines.append(f"{name},{conf!r},{emp!r},{n},{ci!r}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rcd", description="Random color dropout augmentation and ReID tooling.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("augment", help="apply color dropout to a corpus")
    _add_corpus_flags(p)
    p.add_argument("--out-dir", type=Path, required=True)
    _add_config_flags(p)
    p.add_argument("--per-batch", action="store_true", help="one global draw per batch of --batch-size images instead of per image")
    p.add_argument("--batch-size", type=int, default=64, help="batch size for --per-batch (default: 64)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("batch", help="sample identity-balanced K x M batches")
    _add_corpus_flags(p)
    p.add_argument("--k", type=int, default=16, help="identities per batch (default: 16)")
    p.add_argument("--m", type=int, default=4, help="images per identity (default: 4)")
    p.add_argument("--count", type=int, default=1, help="number of batches (default: 1)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("loss", help="hard-mined triplet, ID and total loss for a feature CSV")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help=f"triplet margin (default: {DEFAULT_MARGIN})")
    p.add_argument("--paper-literal", action="store_true", help="also report the unhinged margin + d_pos + d_neg variant")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="CMC and mAP for query/gallery feature CSVs")
    p.add_argument("--query", type=Path, required=True)
    p.add_argument("--gallery", type=Path, required=True)
    p.add_argument("--max-rank", type=int, default=50)
    p.add_argument("--no-cam-filter", action="store_true", help="keep same-identity same-camera gallery entries")
    p.add_argument("--output", type=Path, help="also write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ensemble", help="majority-vote error report for a vote-matrix file")
    p.add_argument("--votes", type=Path, required=True)
    p.add_argument("--k", type=int, help="component to replace")
    p.add_argument("--swap", help="replacement votes, space-separated +1/-1")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("sweep", help="Monte-Carlo table of how often a component swap helps")
    p.add_argument("--n", type=_int_list, default=[3, 5, 7], help="ensemble sizes (default: 3,5,7)")
    p.add_argument("--m", type=int, default=20, help="instances per trial (default: 20)")
    p.add_argument("--err-base", type=_float_list, default=[0.2, 0.3, 0.4])
    p.add_argument("--err-dev", type=_float_list, default=[0.0, 0.2, 0.3, 0.4])
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="empirical firing rates of the transforms")
    _add_corpus_flags(p, required=False)
    _add_config_flags(p)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--width", type=int, default=64, help="image width when no corpus is given (default: 64)")
    p.add_argument("--height", type=int, default=128, help="image height when no corpus is given (default: 128)")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"rcd {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RcdError, OSError, ValueError) as exc:
        print(f"rcd {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

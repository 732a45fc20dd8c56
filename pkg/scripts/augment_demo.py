"""Augment a small synthetic Market-style corpus and write a side-by-side contact sheet."""

import argparse
import json
import tempfile
from pathlib import Path

import numpy as np

from rcd.cli import main as rcd_main
from rcd.dataset import load_manifest
from rcd.imgcore import ImageBuffer, load_image, save_image


def synthetic_person(gen, w=64, h=128):
    # torso/legs blocks in random colors on a noisy background
    img = gen.integers(80, 120, (h, w, 3), dtype=np.uint8)
    img[h // 8 : h // 2, w // 4 : 3 * w // 4] = gen.integers(0, 256, 3)
    img[h // 2 : 7 * h // 8, w // 4 : 3 * w // 4] = gen.integers(0, 256, 3)
    img[: h // 8, 3 * w // 8 : 5 * w // 8] = (200, 160, 130)
    return ImageBuffer(img)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("augment_demo"))
    ap.add_argument("--mode", choices=["grayscale", "sketch"], default="grayscale")
    ap.add_argument("--pr", type=float, default=0.7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    gen = np.random.default_rng(args.seed)
    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp)
        for pid in range(1, 9):
            for cam in (1, 2):
                save_image(synthetic_person(gen), src / f"{pid:04d}_c{cam}s1_000001_00.png")
        code = rcd_main(["augment", "--in-dir", str(src), "--out-dir", str(args.out / "images"),
                         "--mode", args.mode, "--pr", str(args.pr), "--seed", str(args.seed)])
        if code:
            raise SystemExit(code)

        manifest = load_manifest(args.out / "images" / "manifest.jsonl")
        tiles = []
        for rec in manifest:
            before = load_image(src / rec.meta["source"]).pixels
            after = load_image(args.out / "images" / rec.path).pixels
            tiles.append(np.concatenate([before, after], axis=1))
    rows = [np.concatenate(tiles[i : i + 4], axis=1) for i in range(0, len(tiles), 4)]
    save_image(ImageBuffer(np.concatenate(rows, axis=0)), args.out / "contact_sheet.png")
    kinds = [r.meta["kind"] for r in manifest]
    print(json.dumps({k: kinds.count(k) for k in sorted(set(kinds))}))


if __name__ == "__main__":
    main()

"""Adapter command line: the engine's extractor protocol plus --images input.

Verbs::

    deepfa-adapter [global flags] train   --features in.dfa --labels l.csv
                                          --model dir --epochs N --lr R
                                          --momentum M --seed S
    deepfa-adapter [global flags] extract --model dir --features in.dfa --out out.dfa
    deepfa-adapter [global flags] predict --model dir --features in.dfa --out probs.csv

``train`` alternatively accepts ``--images <dir>`` (with ids in the labels
CSV naming files inside the directory); the adapter owns decoding and
resizing, the engine never sees pixels. Global flags: ``--geometry HxWxC``
(otherwise square grayscale/RGB is inferred), ``--arch compact|vgg16``,
``--pretrained``, ``--freeze-features``, ``--batch-size``, ``--image-size``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from .model import build_model, infer_geometry, load_model, save_model
from .train import predict_probabilities, train_network
from .wire import (
    WireError,
    read_features,
    read_labels,
    write_features,
    write_probabilities,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepfa-adapter")
    parser.add_argument("--geometry", default=None,
                        help="input geometry HxWxC (inferred when square)")
    parser.add_argument("--arch", default="compact", choices=["compact", "vgg16"])
    parser.add_argument("--pretrained", action="store_true",
                        help="load ImageNet weights (vgg16 only; needs a "
                             "warm download cache)")
    parser.add_argument("--freeze-features", action="store_true",
                        help="freeze the convolutional stack, train the head only")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--image-size", type=int, default=32,
                        help="square resize applied to --images inputs")

    sub = parser.add_subparsers(dest="verb", required=True)

    t = sub.add_parser("train")
    t.add_argument("--features", type=Path)
    t.add_argument("--images", type=Path)
    t.add_argument("--labels", required=True, type=Path)
    t.add_argument("--model", required=True, type=Path)
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("extract")
    e.add_argument("--model", required=True, type=Path)
    e.add_argument("--features", type=Path)
    e.add_argument("--images", type=Path)
    e.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("predict")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--features", type=Path)
    p.add_argument("--images", type=Path)
    p.add_argument("--out", required=True, type=Path)

    return parser


def _load_images(directory: Path, ids: list[str], size: int) -> np.ndarray:
    """Decode and resize images named by ``ids`` into flat float rows in [0,1]."""
    from PIL import Image

    rows = []
    for sid in ids:
        path = directory / sid
        if not path.exists():
            raise WireError(f"{directory}: no image file for id {sid!r}")
        with Image.open(path) as img:
            img = img.convert("RGB").resize((size, size))
            rows.append(np.asarray(img, dtype=np.float32).reshape(-1) / 255.0)
    return np.stack(rows)


def _training_inputs(args) -> tuple[np.ndarray, tuple[int, int, int], list[str], list[str]]:
    ids, names, _ = read_labels(args.labels)
    if (args.features is None) == (args.images is None):
        raise WireError("provide exactly one of --features or --images")
    if args.images is not None:
        flat = _load_images(args.images, ids, args.image_size)
        geometry = (args.image_size, args.image_size, 3)
    else:
        flat = read_features(args.features)
        if flat.shape[0] != len(ids):
            raise WireError(
                f"{args.labels}: {len(ids)} labels for {flat.shape[0]} feature rows")
        geometry = infer_geometry(flat.shape[1], args.geometry)
    return flat, geometry, ids, names


def _inference_inputs(args, manifest) -> torch.Tensor:
    h, w, c = manifest["geometry"]
    if (args.features is None) == (args.images is None):
        raise WireError("provide exactly one of --features or --images")
    if args.images is not None:
        ids = sorted(p.name for p in Path(args.images).iterdir() if p.is_file())
        flat = _load_images(args.images, ids, h)
    else:
        flat = read_features(args.features)
    if flat.shape[1] != h * w * c:
        raise WireError(
            f"feature width {flat.shape[1]} does not match model geometry "
            f"{h}x{w}x{c}")
    return _to_images(flat, (h, w, c))


def _to_images(flat: np.ndarray, geometry: tuple[int, int, int]) -> torch.Tensor:
    h, w, c = geometry
    x = torch.from_numpy(np.ascontiguousarray(flat, dtype=np.float32))
    return x.reshape(-1, h, w, c).permute(0, 3, 1, 2).contiguous()


def cmd_train(args) -> None:
    flat, geometry, _, names = _training_inputs(args)
    classes = sorted(set(names))
    labels = torch.tensor([classes.index(n) for n in names], dtype=torch.long)
    images = _to_images(flat, geometry)
    h, w, c = geometry

    torch.manual_seed(args.seed)
    model = build_model(args.arch, c, h, w, len(classes),
                        pretrained=args.pretrained)
    if args.freeze_features:
        for param in model.features.parameters():
            param.requires_grad_(False)
    train_network(model, images, labels, epochs=args.epochs, lr=args.lr,
                  momentum=args.momentum, batch_size=args.batch_size,
                  seed=args.seed)
    save_model(args.model, model, arch=args.arch, classes=classes,
               geometry=geometry, seed=args.seed)


def cmd_extract(args) -> None:
    model, manifest = load_model(args.model)
    images = _inference_inputs(args, manifest)
    with torch.no_grad():
        feats = model.pooled_features(images).numpy()
    write_features(args.out, feats)


def cmd_predict(args) -> None:
    model, manifest = load_model(args.model)
    images = _inference_inputs(args, manifest)
    probs = predict_probabilities(model, images)
    write_probabilities(args.out, probs)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        {"train": cmd_train, "extract": cmd_extract, "predict": cmd_predict}[args.verb](args)
    except Exception as exc:
        print(f"deepfa-adapter {args.verb} error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

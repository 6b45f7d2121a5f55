#!/usr/bin/env python3
"""Convert PyTorch weights into srtgan weight files.

    convert_weights.py vgg16 --out vgg16.srtg [--state-dict vgg16.pth | --pretrained | --random-seed N]
    convert_weights.py lpips --lin vgg.pth --out lpips_vgg.bin

`vgg16` keeps the first four stages of torchvision's VGG-16 `features`
(relu1_2 .. relu4_3). `--pretrained` downloads the ImageNet weights through
torchvision. `lpips` reads the linear heads of an LPIPS-VGG checkpoint
(`lin{k}.model.1.weight`) and keeps the first four, matching the taps.
"""

import argparse
import json
import struct
import sys

import numpy as np

VGG_CONVS = [0, 2, 5, 7, 10, 12, 14, 17, 19, 21]
VGG_WIDTHS = [64, 128, 256, 512]


def write_archive(path, header, arrays):
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(b"SRTGARCH")
        f.write(struct.pack("<II", 1, len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            a = np.ascontiguousarray(arrays[name], dtype="<f4")
            enc = name.encode()
            f.write(struct.pack("<I", len(enc)))
            f.write(enc)
            f.write(struct.pack("<BI", 0, a.ndim))
            f.write(struct.pack(f"<{a.ndim}Q", *a.shape))
            f.write(a.tobytes())


def write_lpips(path, layers):
    with open(path, "wb") as f:
        f.write(b"SRTLPIPS")
        f.write(struct.pack("<II", 1, len(layers)))
        for w in layers:
            w = np.asarray(w, dtype="<f4").reshape(-1)
            if (w < 0).any() or not np.isfinite(w).all():
                sys.exit("lpips weights must be finite and non-negative")
            f.write(struct.pack("<I", w.size))
            f.write(w.tobytes())


def vgg16(args):
    import torch
    import torchvision

    if args.state_dict:
        sd = torch.load(args.state_dict, map_location="cpu")
    else:
        if args.random_seed is not None:
            torch.manual_seed(args.random_seed)
        weights = torchvision.models.VGG16_Weights.IMAGENET1K_V1 if args.pretrained else None
        sd = torchvision.models.vgg16(weights=weights).state_dict()
    arrays = {}
    for i in VGG_CONVS:
        for part in ("weight", "bias"):
            key = f"features.{i}.{part}"
            if key not in sd:
                sys.exit(f"state dict has no `{key}`")
            arrays[f"vgg.{key}"] = sd[key].detach().cpu().numpy()
    header = {
        "kind": "weights",
        "network": "vgg",
        "config": {"widths": VGG_WIDTHS, "imagenet_normalize": True},
    }
    write_archive(args.out, header, arrays)


def lpips(args):
    import torch

    sd = torch.load(args.lin, map_location="cpu")
    layers = []
    for k in range(4):
        key = f"lin{k}.model.1.weight"
        if key not in sd:
            sys.exit(f"checkpoint has no `{key}`")
        layers.append(sd[key].detach().cpu().numpy())
    for w, c in zip(layers, VGG_WIDTHS):
        if w.size != c:
            sys.exit(f"expected {c} channels, found {w.size}")
    write_lpips(args.out, layers)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="cmd", required=True)
    v = sub.add_parser("vgg16", help="torchvision VGG-16 features")
    v.add_argument("--out", required=True)
    src = v.add_mutually_exclusive_group(required=True)
    src.add_argument("--state-dict")
    src.add_argument("--pretrained", action="store_true")
    src.add_argument("--random-seed", type=int, help="random weights, for smoke tests")
    v.set_defaults(func=vgg16)
    lp = sub.add_parser("lpips", help="LPIPS-VGG linear heads")
    lp.add_argument("--lin", required=True)
    lp.add_argument("--out", required=True)
    lp.set_defaults(func=lpips)
    args = p.parse_args()
    args.func(args)


if __name__ == "__main__":
    main()

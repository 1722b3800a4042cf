#!/usr/bin/env python3
"""Build IDX-format MNIST fixture files from the `mnist` npm package.

The npm package (github.com/cazala/mnist) bundles 10,000 MNIST digits as
JSON arrays of intensities in [0, 1] rounded to three decimals. This script
converts them back to 8-bit pixels, interleaves the per-digit lists with a
fixed permutation and writes:

    train-images-idx3-ubyte / train-labels-idx1-ubyte   (first 8,000)
    t10k-images-idx3-ubyte  / t10k-labels-idx1-ubyte    (last 2,000)

Usage:
    tools/prepare_mnist.py [--package DIR] [--out data/mnist]

Without --package the script runs `npm pack mnist` in a temp directory.
"""
import argparse
import json
import pathlib
import struct
import subprocess
import tarfile
import tempfile

import numpy as np

N_TRAIN = 8000


def fetch_package(workdir: pathlib.Path) -> pathlib.Path:
    subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL)
    tgz = next(workdir.glob("mnist-*.tgz"))
    with tarfile.open(tgz) as tf:
        tf.extractall(workdir)
    return workdir / "package"


def write_idx(path: pathlib.Path, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for dim in array.shape:
            f.write(struct.pack(">I", dim))
        f.write(array.tobytes())


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--package", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/mnist"))
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        pkg = args.package or fetch_package(pathlib.Path(tmp))
        images, labels = [], []
        for digit in range(10):
            raw = json.loads((pkg / "src" / "digits" / f"{digit}.json").read_text())["data"]
            arr = np.rint(np.asarray(raw, dtype=np.float64) * 255.0).clip(0, 255)
            arr = arr.reshape(-1, 28, 28).astype(np.uint8)
            images.append(arr)
            labels.append(np.full(arr.shape[0], digit, dtype=np.uint8))

    images = np.concatenate(images)
    labels = np.concatenate(labels)
    perm = np.random.RandomState(20191111).permutation(len(labels))
    images, labels = images[perm], labels[perm]

    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "train-images-idx3-ubyte", images[:N_TRAIN])
    write_idx(args.out / "train-labels-idx1-ubyte", labels[:N_TRAIN])
    write_idx(args.out / "t10k-images-idx3-ubyte", images[N_TRAIN:])
    write_idx(args.out / "t10k-labels-idx1-ubyte", labels[N_TRAIN:])
    print(f"wrote {N_TRAIN} train / {len(labels) - N_TRAIN} test digits to {args.out}")


if __name__ == "__main__":
    main()

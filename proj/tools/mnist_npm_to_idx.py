#!/usr/bin/env python3
"""Convert the digit JSON shipped in the `mnist` npm package into IDX files.

The npm package (https://www.npmjs.com/package/mnist) bundles 10 000 MNIST
digits as 784-float arrays rounded to three decimals.  Pixels are mapped back
to bytes with round(v * 255), shuffled with a fixed seed, and split 7000/3000
into the usual train-*/t10k-* file names (gzip-compressed).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_npm_to_idx.py package/src/digits data/mnist
"""

import argparse
import gzip
import json
import pathlib
import struct

import numpy as np


def write_images(path, images):
    n, rows, cols = images.shape
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=7000)
    ap.add_argument("--seed", type=int, default=20200615)
    args = ap.parse_args()

    images, labels = [], []
    for digit in range(10):
        with open(pathlib.Path(args.digits_dir) / f"{digit}.json") as f:
            flat = np.asarray(json.load(f)["data"], dtype=np.float64)
        block = np.clip(np.rint(flat.reshape(-1, 28, 28) * 255.0), 0, 255)
        images.append(block)
        labels.append(np.full(block.shape[0], digit))
    images = np.concatenate(images)
    labels = np.concatenate(labels)

    order = np.random.default_rng(args.seed).permutation(len(labels))
    images, labels = images[order], labels[order]

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = args.train
    write_images(out / "train-images-idx3-ubyte.gz", images[:k])
    write_labels(out / "train-labels-idx1-ubyte.gz", labels[:k])
    write_images(out / "t10k-images-idx3-ubyte.gz", images[k:])
    write_labels(out / "t10k-labels-idx1-ubyte.gz", labels[k:])
    print(f"wrote {k} train / {len(labels) - k} test digits to {out}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Build IDX-format MNIST files from the 10,000-digit sample shipped in the
`mnist` npm package (MIT, Juan Cazala).

The package stores each digit class as a flat list of 28x28 intensities in
[0,1] rounded to three decimals; they are mapped back to bytes with
round(v * 255). Samples are shuffled with a fixed seed and split into a
training file and a test file in the standard IDX layout (gzip-compressed).

    python3 tools/fetch_mnist_subset.py --out data/mnist
    python3 tools/fetch_mnist_subset.py --tarball mnist-1.1.0.tgz --out data/mnist
"""
import argparse
import gzip
import json
import random
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path


def write_idx_images(path, images):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tarball", help="local mnist-<ver>.tgz; fetched with `npm pack` if omitted")
    ap.add_argument("--out", default="data/mnist")
    ap.add_argument("--train", type=int, default=6000)
    ap.add_argument("--seed", type=int, default=20180101)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        tarball = args.tarball
        if tarball is None:
            subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True,
                           stdout=subprocess.DEVNULL)
            tarball = str(Path(tmp) / "mnist-1.1.0.tgz")
        with tarfile.open(tarball) as tar:
            tar.extractall(tmp)
        samples = []
        for digit in range(10):
            data = json.loads((Path(tmp) / "package/src/digits" / f"{digit}.json").read_text())["data"]
            assert len(data) % 784 == 0
            for k in range(len(data) // 784):
                px = [min(255, max(0, round(v * 255))) for v in data[k * 784:(k + 1) * 784]]
                samples.append((px, digit))

    random.Random(args.seed).shuffle(samples)
    train, test = samples[:args.train], samples[args.train:]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx_images(out / "train-images-idx3-ubyte.gz", [s[0] for s in train])
    write_idx_labels(out / "train-labels-idx1-ubyte.gz", [s[1] for s in train])
    write_idx_images(out / "t10k-images-idx3-ubyte.gz", [s[0] for s in test])
    write_idx_labels(out / "t10k-labels-idx1-ubyte.gz", [s[1] for s in test])
    print(f"wrote {len(train)} train / {len(test)} test examples to {out}")


if __name__ == "__main__":
    main()

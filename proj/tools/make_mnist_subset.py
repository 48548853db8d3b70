#!/usr/bin/env python3
"""Build the 3-class MNIST subset (digits 0/1/2) used by the desk-scale runs.

Source: the `mnist` npm package (src/digits/<d>.json), which ships 10000 MNIST
digits as 784-float rows normalized to [0,1]. Pixels are mapped back to bytes
with round(v * 255) and written as IDX files.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist012
"""
import json
import struct
import sys
from pathlib import Path

DIGITS = (0, 1, 2)
TRAIN_PER_CLASS = 800


def write_images(path, rows):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for r in rows:
            f.write(bytes(r))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for d in DIGITS:
        data = json.loads((src / f"{d}.json").read_text())["data"]
        rows = [
            [min(255, max(0, round(v * 255))) for v in data[i:i + 784]]
            for i in range(0, len(data), 784)
        ]
        train += [(k, d, r) for k, r in enumerate(rows[:TRAIN_PER_CLASS])]
        test += [(k, d, r) for k, r in enumerate(rows[TRAIN_PER_CLASS:])]
    # interleave classes so prefixes stay balanced
    train.sort(key=lambda p: (p[0], p[1]))
    train = [(r, d) for _, d, r in train]
    test = [(r, d) for _, d, r in test]
    for name, items in (("train", train), ("test", test)):
        write_images(dst / f"{name}-images-idx3-ubyte", [r for r, _ in items])
        write_labels(dst / f"{name}-labels-idx1-ubyte", [l for _, l in items])
        print(name, len(items))


if __name__ == "__main__":
    main()

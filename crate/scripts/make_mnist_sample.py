#!/usr/bin/env python3
"""Build the bundled MNIST sample in IDX format.

Source: the `mnist` npm package (https://www.npmjs.com/package/mnist, MIT),
which ships 10,000 MNIST digits as JSON arrays of pixel/255 values rounded
to three decimals. Rounding is lossless at 8-bit resolution, so the original
bytes are recovered with round(v * 255).

Usage: make_mnist_sample.py <path-to-npm-package>/src/digits <out-dir>
"""
import gzip
import json
import os
import random
import struct
import sys

TRAIN_PER_DIGIT = 800


def write_idx(prefix, samples):
    images = bytearray(struct.pack(">IIII", 0x803, len(samples), 28, 28))
    labels = bytearray(struct.pack(">II", 0x801, len(samples)))
    for digit, pixels in samples:
        images.extend(pixels)
        labels.append(digit)
    for name, payload in (("images-idx3-ubyte", images), ("labels-idx1-ubyte", labels)):
        path = f"{prefix}-{name}.gz"
        # mtime=0 keeps the archive byte-stable across regenerations
        with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
            gz.write(payload)


def main():
    src, out = sys.argv[1], sys.argv[2]
    train, test = [], []
    for digit in range(10):
        data = json.load(open(os.path.join(src, f"{digit}.json")))["data"]
        assert len(data) % 784 == 0
        for i in range(len(data) // 784):
            px = bytes(round(v * 255) for v in data[i * 784:(i + 1) * 784])
            (train if i < TRAIN_PER_DIGIT else test).append((digit, px))
    rng = random.Random(20170831)
    rng.shuffle(train)
    rng.shuffle(test)
    os.makedirs(out, exist_ok=True)
    write_idx(os.path.join(out, "train"), train)
    write_idx(os.path.join(out, "t10k"), test)
    print(f"train={len(train)} test={len(test)}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into IDX.

The package stores 10000 MNIST digits as 784 floats in [0,1] (three decimals)
per image, grouped by label. This rebuilds 8-bit pixels, interleaves the
digits with a fixed permutation and writes gzipped IDX image/label files.

usage: npm_mnist_to_idx.py <package/src/digits> <out_prefix>
"""
import gzip
import json
import random
import struct
import sys


def main():
    src, prefix = sys.argv[1], sys.argv[2]
    records = []
    for digit in range(10):
        with open(f"{src}/{digit}.json") as fh:
            flat = json.load(fh)["data"]
        for i in range(0, len(flat), 784):
            pix = bytes(min(255, max(0, round(v * 255))) for v in flat[i:i + 784])
            records.append((pix, digit))
    random.Random(0).shuffle(records)
    n = len(records)
    with gzip.GzipFile(f"{prefix}-images-idx3-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">IIII", 0x803, n, 28, 28))
        for pix, _ in records:
            fh.write(pix)
    with gzip.GzipFile(f"{prefix}-labels-idx1-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">II", 0x801, n))
        fh.write(bytes(d for _, d in records))


if __name__ == "__main__":
    main()

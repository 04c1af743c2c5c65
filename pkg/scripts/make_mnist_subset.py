"""Write the 5000-sample MNIST subset bundled with mlxtend as IDX files.

Usage: python3 scripts/make_mnist_subset.py mnist_5k.csv.gz data/mnist5k

The CSV holds 784 pixel columns followed by the label.
"""

import gzip
import sys
from pathlib import Path

import numpy as np

from optbench.data import encode_idx_images, encode_idx_labels


def main(src: str, dest: str) -> None:
    with gzip.open(src, "rt") as fh:
        table = np.loadtxt(fh, delimiter=",", dtype=np.int64)
    pixels = table[:, :-1].reshape(-1, 28, 28).astype(np.uint8)
    labels = table[:, -1].astype(np.uint8)
    out = Path(dest)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train-images-idx3-ubyte").write_bytes(encode_idx_images(pixels))
    (out / "train-labels-idx1-ubyte").write_bytes(encode_idx_labels(labels))
    print(f"wrote {len(labels)} samples to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:3])

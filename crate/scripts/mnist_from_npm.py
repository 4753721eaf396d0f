#!/usr/bin/env python3
"""Build MNIST IDX files from the digits bundled in the `mnist` npm package.

The package (cazala/mnist, MIT) ships 10,000 handwritten digits as JSON
arrays of 784 floats rounded to three decimals of byte/255; bytes are
recovered as round(v * 255). Digits are shuffled with a fixed seed and
written as train/t10k IDX pairs under the output directory.

    python3 scripts/mnist_from_npm.py [--package DIR] [--out data/mnist]

Without --package the tarball is fetched with `npm pack mnist@1.1.0`.
"""

import argparse
import json
import random
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path

TEST_COUNT = 2000


def fetch_package(workdir: Path) -> Path:
    subprocess.run(["npm", "pack", "mnist@1.1.0", "--silent"], cwd=workdir, check=True)
    tgz = next(workdir.glob("mnist-*.tgz"))
    with tarfile.open(tgz) as tar:
        tar.extractall(workdir)
    return workdir / "package"


def load_digits(package: Path):
    items = []
    for digit in range(10):
        data = json.loads((package / "src" / "digits" / f"{digit}.json").read_text())["data"]
        if len(data) % 784:
            raise SystemExit(f"digit {digit}: {len(data)} values is not a multiple of 784")
        for off in range(0, len(data), 784):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in data[off : off + 784])
            items.append((pixels, digit))
    return items


def write_idx(items, images_path: Path, labels_path: Path):
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(items), 28, 28))
        for pixels, _ in items:
            f.write(pixels)
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", 2049, len(items)))
        f.write(bytes(label for _, label in items))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--package", type=Path)
    ap.add_argument("--out", type=Path, default=Path("data/mnist"))
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        package = args.package or fetch_package(Path(tmp))
        items = load_digits(package)
    random.Random(args.seed).shuffle(items)
    test, train = items[:TEST_COUNT], items[TEST_COUNT:]
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(train, args.out / "train-images-idx3-ubyte", args.out / "train-labels-idx1-ubyte")
    write_idx(test, args.out / "t10k-images-idx3-ubyte", args.out / "t10k-labels-idx1-ubyte")
    print(f"wrote {len(train)} train and {len(test)} test digits to {args.out}")


if __name__ == "__main__":
    main()

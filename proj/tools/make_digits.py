#!/usr/bin/env python3
"""Export the 8x8 digits set to the project's text tensor format.

Writes data/digits_{train,val,test}.txt with a 60/20/20 split under a fixed
shuffle seed. Pixel values are stored as raw integers 0..16; loaders divide by
the header scale to get inputs in [0, 1]. Rerunning reproduces the files
byte-for-byte.
"""

import os

import numpy as np
from sklearn.datasets import load_digits


def write_split(path, name, images, labels):
    with open(path, "w") as out:
        out.write("# xbar dataset v1\n")
        out.write(f"split {name}\n")
        out.write(f"count {len(labels)}\n")
        out.write("dims 64\n")
        out.write("classes 10\n")
        out.write("scale 16\n")
        for img, lab in zip(images, labels):
            row = " ".join(str(int(p)) for p in img.reshape(-1))
            out.write(f"{int(lab)} {row}\n")


def main():
    digits = load_digits()
    rng = np.random.RandomState(0)
    order = rng.permutation(len(digits.target))
    images = digits.images[order]
    labels = digits.target[order]

    n = len(labels)
    n_train = int(n * 0.6)
    n_val = int(n * 0.2)

    here = os.path.dirname(os.path.abspath(__file__))
    data_dir = os.path.join(here, "..", "data")
    os.makedirs(data_dir, exist_ok=True)
    write_split(os.path.join(data_dir, "digits_train.txt"), "train",
                images[:n_train], labels[:n_train])
    write_split(os.path.join(data_dir, "digits_val.txt"), "validation",
                images[n_train:n_train + n_val], labels[n_train:n_train + n_val])
    write_split(os.path.join(data_dir, "digits_test.txt"), "test",
                images[n_train + n_val:], labels[n_train + n_val:])
    print(f"wrote {n_train}/{n_val}/{n - n_train - n_val} samples")


if __name__ == "__main__":
    main()

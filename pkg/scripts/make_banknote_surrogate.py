"""Regenerate src/devann/data/banknote_surrogate.csv.

The real UCI banknote-authentication file (1372 rows, 762 genuine / 610
forged) is not redistributed here. This script writes a synthetic stand-in
with the same row counts, column layout and rough class-conditional moments so
the classification task has comparable difficulty. Point ``dataset_path`` at
the real file to use it instead.
"""
import sys
from pathlib import Path

import numpy as np

N_GENUINE, N_FORGED = 762, 610
# variance, skewness, curtosis, entropy of the wavelet-transformed image
MEANS = {0: [2.277, 4.257, 0.797, -1.148], 1: [-1.868, -0.994, 2.148, -1.247]}
STDS = {0: [2.019, 5.139, 3.239, 2.125], 1: [1.881, 5.404, 5.262, 2.071]}
CORR = np.array([
    [1.0, 0.2, -0.3, 0.2],
    [0.2, 1.0, -0.7, 0.3],
    [-0.3, -0.7, 1.0, 0.2],
    [0.2, 0.3, 0.2, 1.0],
])


def generate(seed: int = 1372) -> list[str]:
    rng = np.random.default_rng(seed)
    lines = []
    for label, n in ((0, N_GENUINE), (1, N_FORGED)):
        sd = np.asarray(STDS[label])
        cov = CORR * np.outer(sd, sd)
        rows = rng.multivariate_normal(MEANS[label], cov, size=n)
        lines.extend(",".join(f"{v:.5f}" for v in row) + f",{label}" for row in rows)
    return lines


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "src" / "devann" / "data" / "banknote_surrogate.csv")
    out.write_text("\n".join(generate()) + "\n")
    print(f"wrote {out}")

"""Tip separation of weighted clasps over a grid of opening parameters."""

import dataclasses
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
from _config import parse  # noqa: E402

from claspforge import clasp_core as cc  # noqa: E402


@dataclasses.dataclass
class Config:
    """Tabulate G(tau_1, tau_2) - 1, the excess over the unit strut."""

    n: int = 9
    lo: float = 0.2
    tol: float = 1e-10


def main(cfg: Config):
    taus = np.linspace(cfg.lo, 1.0, cfg.n)
    print("tau_1\\tau_2 " + " ".join(f"{t:7.3f}" for t in taus))
    for t1 in taus:
        row = [cc.tip_gap(cc.ClaspParams(t1, t2), tol=cfg.tol) - 1.0 for t2 in taus]
        print(f"{t1:11.3f} " + " ".join(f"{100 * v:6.2f}%" for v in row))
    print(f"\nC(1,1): gap {cc.tip_gap(cc.ClaspParams(1.0, 1.0), tol=cfg.tol):.8f}")


if __name__ == "__main__":
    main(parse(Config))

"""Empirical criticality margin: how strongly random length-reducing fields shorten struts."""

import dataclasses
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
from _config import parse  # noqa: E402

from claspforge import constructions as C  # noqa: E402
from claspforge import criticality as K  # noqa: E402
from claspforge import geometry as g  # noqa: E402


@dataclasses.dataclass
class Config:
    """Probe simple clasps at several spacings and Fourier degrees."""

    tau: float = 1.0
    hs: list = dataclasses.field(default_factory=lambda: [0.04, 0.02, 0.01])
    degrees: list = dataclasses.field(default_factory=lambda: [2, 4, 8])
    trials: int = 100
    seed: int = 0


def main(cfg: Config):
    link = C.build_simple_clasp(cfg.tau)
    print(f"{'h':>6} {'degree':>6} {'margin':>8} {'median':>8} {'all<0':>6}")
    for h in cfg.hs:
        s = g.sample_link(link, h)
        struts = K.find_struts(link, samples=s)
        for deg in cfg.degrees:
            r = K.criticality_probe(link, cfg.trials, cfg.seed, samples=s, struts=struts, degree=deg)
            print(f"{h:6g} {deg:6d} {-r.value:8.4f} {-np.median(r.trial_minima):8.4f} {str(r.all_negative):>6}")


if __name__ == "__main__":
    main(parse(Config))

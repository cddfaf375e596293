"""Thickness, strut counts and timings over one configuration of every family."""

import dataclasses
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from _config import parse  # noqa: E402

from claspforge import constructions as C  # noqa: E402
from claspforge import criticality as K  # noqa: E402
from claspforge import geometry as g  # noqa: E402

CONFIGS = [
    ("simple_clasp", {"tau": 1.0}),
    ("weighted_clasp", {"tau_1": 0.5, "tau_2": 0.8}),
    ("parallel_clasp", {"k": 3, "l": 2, "m": 1, "tau": 1.0}),
    ("parallel_clasp", {"k": 2, "l": 2, "m": 2, "tau": 1.5}),
    ("split_config", {"m": 2, "tau": 1.0}),
    ("split_config", {"m": 1, "tau": 1.0}),
    ("chained_clasp", {"tau": 0.8}),
    ("chained_clasp", {"tau": 1.0, "d": 2.0, "middles": 2}),
    ("granny", {"n": 2, "tau": 0.8}),
]


@dataclasses.dataclass
class Config:
    """Compare the brute-force and tree thickness paths and count struts."""

    h: float = 0.01
    tol: float = 1e-4


def main(cfg: Config):
    print(f"{'family':16} {'params':38} {'nodes':>6} {'brute-1':>9} {'tree-1':>9} {'struts':>6} {'iso':>3} {'sec':>5}")
    for fam, params in CONFIGS:
        t0 = time.perf_counter()
        link = C.build(C.FamilySpec(fam, params))
        s = g.sample_link(link, cfg.h)
        tb = K.gehring_thickness(link, samples=s, method="brute")
        tt = K.gehring_thickness(link, samples=s, method="kdtree")
        struts = K.find_struts(link, tol=cfg.tol, samples=s, thickness=tb)
        iso = sum(x.isolated for x in struts)
        dt = time.perf_counter() - t0
        print(f"{fam:16} {str(params):38} {sum(map(len, s)):6d} {tb - 1:9.1e} {tt - 1:9.1e} {len(struts):6d} {iso:3d} {dt:5.2f}")


if __name__ == "__main__":
    main(parse(Config))

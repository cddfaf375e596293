"""Balance residual of weighted clasps as the node spacing shrinks."""

import dataclasses
import itertools
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from _config import parse  # noqa: E402

from claspforge import constructions as C  # noqa: E402
from claspforge import criticality as K  # noqa: E402


@dataclasses.dataclass
class Config:
    """Residual max-norm and per-spacing density for each h, with a mismatched-weight control."""

    taus: list = dataclasses.field(default_factory=lambda: [0.5, 0.8, 1.0])
    hs: list = dataclasses.field(default_factory=lambda: [0.04, 0.02, 0.01])
    control_weights: list = dataclasses.field(default_factory=lambda: [1.0, 1.0])


def study(link, hs):
    reps = [K.balance_solve(link, h) for h in hs]
    cells = [f"{r.residual_max:9.2e}" for r in reps]
    ratios = [f"{a.residual_max / b.residual_max:5.2f}" for a, b in zip(reps, reps[1:])]
    return cells, ratios, reps


def main(cfg: Config):
    hs = sorted(cfg.hs, reverse=True)
    print(f"{'config':24} " + " ".join(f"h={h:<7g}" for h in hs) + "  ratios")
    for t1, t2 in itertools.product(cfg.taus, cfg.taus):
        cells, ratios, reps = study(C.build_weighted_clasp(t1, t2), hs)
        neg = sum(int((r.measure < 0).sum()) for r in reps)
        print(f"C({t1:g},{t2:g}){'':14} " + " ".join(cells) + "  " + " ".join(ratios) + (f"  NEGATIVE {neg}" if neg else ""))
    t1, t2 = cfg.taus[0], cfg.taus[1 % len(cfg.taus)]
    link = C.build_weighted_clasp(t1, t2, weights=cfg.control_weights)
    cells, ratios, reps = study(link, hs)
    print(f"control C({t1:g},{t2:g}) w={cfg.control_weights} " + " ".join(cells) + "  " + " ".join(ratios))
    print("control density " + " ".join(f"{r.residual_density:.3f}" for r in reps))


if __name__ == "__main__":
    main(parse(Config))

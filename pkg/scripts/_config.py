"""Turn a dataclass of defaults into command-line overrides."""

import argparse
import dataclasses


def parse(cls, argv=None):
    ap = argparse.ArgumentParser(description=cls.__doc__)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        if isinstance(default, (list, tuple)):
            kind = type(default[0]) if default else str
            ap.add_argument(f"--{f.name.replace('_', '-')}", type=kind, nargs="+", default=list(default))
        else:
            ap.add_argument(f"--{f.name.replace('_', '-')}", type=type(default), default=default)
    return cls(**vars(ap.parse_args(argv)))

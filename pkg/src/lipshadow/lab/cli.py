"""Command line entry point: ``lipshadow <subcommand> [options]``.

Exit status is 0 when every verdict passes, 2 when a verdict fails and 1 on
usage or runtime errors.
"""
import argparse
import sys

from ..errors import ContractError
from .config import ExperimentConfig, from_mapping, load_config, merge
from .runner import run

SUBCOMMANDS = {
    "lipschitz": "lipschitz",
    "mane": "mane",
    "gain": "gain",
    "replay-lemma2": "replay",
    "extract-limit": "limit",
}


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _params(text):
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected k=v, got {item!r}")
        out[key.strip()] = float(value)
    return out


def _d(text):
    return text if text == "auto" else float(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="lipshadow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML file; command line flags override it")
        p.add_argument("--system")
        p.add_argument("--params", type=_params, help="k=v,k=v")
        p.add_argument("--seed", type=int)
        p.add_argument("--window", type=_ints, help="comma separated window lengths")
        p.add_argument("--d-grid", dest="d_grid", type=_floats)
        p.add_argument("--trials", type=int)
        p.add_argument("--out")
        p.add_argument("--point", type=_floats, help="comma separated coordinates")
        p.add_argument("--n", type=int)
        p.add_argument("--L", type=float)
        p.add_argument("--d", type=_d, help="defect size or 'auto'")
        p.add_argument("--n-grid", dest="n_grid", type=_ints)
        p.add_argument("--noise", choices=("uniform", "upstream"))
        p.add_argument("--pattern", choices=("constant", "periodic", "random"))
        p.add_argument("--expect", choices=("stable", "unstable"))
    return parser


def make_config(args):
    kind = SUBCOMMANDS[args.command]
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.config:
        base = load_config(args.config)
        if base.kind != kind:
            raise ContractError(f"config file is for {base.kind!r}, not {kind!r}")
        return merge(base, **overrides)
    return from_mapping({"kind": kind, **{k: v for k, v in overrides.items() if v is not None}})


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = make_config(args)
        manifest = run(config)
    except (ContractError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for v in manifest.verdicts:
        status = "PASS" if v["passed"] else "FAIL"
        detail = f"  [{v['detail']}]" if v["detail"] else ""
        print(f"{status}  {v['name']}{detail}")
    return 0 if manifest.passed else 2


if __name__ == "__main__":
    sys.exit(main())

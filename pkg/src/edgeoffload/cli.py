"""
Command line entry point::

    edgeoffload <command> --config cfg.json [--seed N] --out DIR [--meta-params psi.json]

Commands: train, decide, meta-train, sweep-convergence, compare-schemes,
meta-study, oracle.  Each writes CSV tables, ``summary.json`` and
``manifest.json`` into ``--out``.  Failures print one JSON line on stderr,
``{"error": <category>, "message": ...}``, and exit with a category code.
"""

import argparse
import json
import sys

from . import experiments as ex
from .meta_trainer import MetaParams

COMMANDS = {
    "train": (ex.TRAIN_DEFAULTS, ex.run_train, True),
    "decide": (ex.DECIDE_DEFAULTS, ex.run_decide, False),
    "meta-train": (ex.META_TRAIN_DEFAULTS, ex.run_meta_train, False),
    "sweep-convergence": (ex.SWEEP_DEFAULTS, ex.run_convergence_sweep, False),
    "compare-schemes": (ex.COMPARE_DEFAULTS, ex.run_scheme_comparison, False),
    "meta-study": (ex.META_STUDY_DEFAULTS, ex.run_meta_study, True),
    "oracle": (ex.ORACLE_DEFAULTS, ex.run_oracle, False),
}

EXIT_CODES = {"config": 2, "validation": 3, "io": 4}


def build_parser():
    parser = argparse.ArgumentParser(prog="edgeoffload")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config; defaults are used for missing keys")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--meta-params", help="meta-parameter checkpoint used to initialise engines")
    return parser


def _fail(category, message):
    print(json.dumps({"error": category, "message": str(message)}), file=sys.stderr)
    return EXIT_CODES[category]


def main(argv=None):
    args = build_parser().parse_args(argv)
    defaults, runner, takes_meta = COMMANDS[args.command]
    try:
        raw = {}
        if args.config:
            with open(args.config) as fh:
                raw = json.load(fh)
        cfg = ex.resolve_config(raw, defaults, args.seed)
        kwargs = {}
        if args.meta_params:
            if not takes_meta:
                raise ex.ConfigError(f"{args.command} does not accept --meta-params")
            kwargs["meta_params"] = MetaParams.load(args.meta_params)
        result = runner(cfg, **kwargs)
        manifest = ex.write_result(result, args.out)
    except (ex.ConfigError, json.JSONDecodeError) as exc:
        return _fail("config", exc)
    except OSError as exc:
        return _fail("io", exc)
    except (ValueError, TypeError, KeyError) as exc:
        return _fail("validation", exc)
    print(json.dumps({"out": args.out, "artifacts": manifest["artifacts"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

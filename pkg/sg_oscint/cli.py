"""Command-line front end; every sub-command becomes one handler event."""
import argparse
import json
import sys

from . import handler
from .utils import dump_json, setup_config, setup_logger, write_csv

config = setup_config()
logger = setup_logger(__name__, config)


def load_job(path):
    with open(path) as f:
        return json.load(f)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sg-oscint",
        description="Tempered oscillatory integrals and global wave fronts",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a JSON job config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="artifact directory")
    run.add_argument("--threads", type=int, default=None)

    fio = commands.add_parser("fio-apply", help="apply an FIO job")
    fio.add_argument("--config", required=True)
    fio.add_argument("--out", required=True, help="CSV of output samples")
    fio.add_argument("--threads", type=int, default=None)

    kg = commands.add_parser("kg", help="Klein-Gordon evolution")
    kg.add_argument("--t", type=float, required=True)
    kg.add_argument("--mass", type=float, default=1.0)
    kg.add_argument("--c", type=float, default=1.0)
    kg.add_argument("--f", default="gauss")
    kg.add_argument("--grid", default="-4:4:81")
    kg.add_argument("--out", default=None, help="CSV of u(t, x)")
    kg.add_argument("--threads", type=int, default=None)

    catalog = commands.add_parser("catalog", help="list catalog entries")
    catalog.add_argument(
        "--check", choices=("ft-support", "timelike-decay"), default=None
    )
    return parser


def _event(args):
    if args.command == "run":
        event = load_job(args.config)
        if args.out:
            event["out"] = args.out
    elif args.command == "fio-apply":
        event = load_job(args.config)
        event["command"] = "fio-apply"
    elif args.command == "kg":
        event = {
            "command": "kg",
            "t": args.t,
            "mass": args.mass,
            "c": args.c,
            "f": args.f,
            "grid": args.grid,
        }
    else:
        event = {"command": "catalog"}
        if args.check:
            event["check"] = args.check
    if getattr(args, "threads", None):
        event["threads"] = args.threads
    return event


def main(argv=None):
    args = build_parser().parse_args(argv)
    response = handler(_event(args))
    tables = response.get("tables", {})
    csv_out = getattr(args, "out", None) if args.command != "run" else None
    if csv_out and response["statusCode"] == 0:
        write_csv(tables["u"], csv_out)
    print(dump_json(response["body"]))
    return response["statusCode"]


if __name__ == "__main__":
    sys.exit(main())

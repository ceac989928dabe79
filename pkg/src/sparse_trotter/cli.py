"""Command line entry point: ``sparse-trotter run|sweep CONFIG``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    load_config,
    output_paths,
    summary,
    sweep,
    write_csv,
    write_metadata,
)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparse-trotter",
                                description="Sparse Trotterization experiments on distributed spin chains.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run one configuration"),
                       ("sweep", "run every member of the config's sweep block")):
        s = sub.add_parser(name, help=text)
        s.add_argument("config", help="JSON config file")
        s.add_argument("--seed", type=int, help="override base_seed of stochastic runs")
        s.add_argument("--out", help="output CSV path (overrides the config's output)")
        s.add_argument("--threads", type=int, help="worker threads for ensembles")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args) -> dict:
    o = {}
    if args.seed is not None:
        o["base_seed"] = args.seed
    if args.threads is not None:
        o["threads"] = args.threads
    if args.out is not None:
        o["output"] = args.out
    return o


def _write(result, base: str, label: str | None) -> Path:
    csv_path, meta_path = output_paths(base, label)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(result, csv_path)
    write_metadata(result, meta_path)
    return csv_path


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        base, members = load_config(args.config)
        o = _overrides(args)
        base = dataclasses.replace(base, **o).validate()
        out = base.output or str(Path(args.config).with_suffix(".csv"))
        if args.command == "run":
            result = sweep([base])[0]
            path = _write(result, out, None)
            print(json.dumps({"csv": str(path), **summary(result)}))
            return 0
        if not members:
            raise ConfigError(["sweep: config has no sweep block"])
        members = [dataclasses.replace(m, **o).validate() for m in members]
        results = sweep(members)
        rows = []
        for res in results:
            path = _write(res, out, res.config.label)
            rows.append({"csv": str(path), **summary(res)})
        summary_path = output_paths(out, "summary")[0]
        keys = list(dict.fromkeys(k for r in rows for k in r))
        with summary_path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, keys, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        print(json.dumps({"summary": str(summary_path), "members": len(rows)}))
        return 0
    except ConfigError as exc:
        print(f"sparse-trotter: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"sparse-trotter: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

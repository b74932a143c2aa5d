"""Command-line entry point for the batch pipeline and the HTTP service.

Exit codes: 0 success, 1 usage error, 2 data/artifact error, 3 internal error.
"""

from __future__ import annotations

import argparse
import socket
import sys

from .errors import TrustnbrError
from .forest import DEFAULT_PARAMS
from .pipeline import casebase, experiment, explain, load_session, prepare, train
from .service import create_app
from .synthetic import write_surrogate_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1 for usage
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="trustnbr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic benchmark CSV")
    p.add_argument("out_csv")
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("prepare", help="load, split, and normalize a CSV")
    p.add_argument("csv")
    p.add_argument("--label", required=True, help="name of the binary label column")
    p.add_argument("--out", required=True, help="artifact output directory")
    p.add_argument("--fractions", default="0.5,0.25,0.25", help="train,test,production fractions")
    p.add_argument("--seed", type=int, default=7, help="split seed")
    p.add_argument("--impute-mean", action="store_true", help="fill missing numeric cells with the column mean")

    p = sub.add_parser("train", help="train the forest on prepared artifacts")
    p.add_argument("dir")
    p.add_argument("--trees", type=int, default=DEFAULT_PARAMS["n_trees"])
    p.add_argument("--max-depth", type=int, default=DEFAULT_PARAMS["max_depth"])
    p.add_argument("--min-leaf", type=int, default=DEFAULT_PARAMS["min_leaf"])
    p.add_argument("--features-per-split", default=DEFAULT_PARAMS["features_per_split"])
    p.add_argument("--seed", type=int, default=13)

    p = sub.add_parser("explain", help="compute contribution vectors for the case instances")
    p.add_argument("dir")
    p.add_argument("--background-size", type=int, default=128)
    p.add_argument("--background-seed", type=int, default=29)

    p = sub.add_parser("casebase", help="assemble the case base container")
    p.add_argument("dir")

    p = sub.add_parser("experiment", help="run the simulated-analyst grid sweep")
    p.add_argument("dir")
    p.add_argument("--k-max", type=int, default=100)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--epsilon-divisor", type=float, default=10.0)

    p = sub.add_parser("serve", help="serve prepared artifacts over HTTP")
    p.add_argument("dir")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--debug-truth", action="store_true", help="expose alert ground truth on /debug/truth")

    return parser


def _parse_fractions(raw: str) -> tuple[float, float, float]:
    parts = raw.split(",")
    if len(parts) != 3:
        raise UsageError(f"--fractions needs three comma-separated numbers, got {raw!r}")
    try:
        f = tuple(float(p) for p in parts)
    except ValueError:
        raise UsageError(f"--fractions must be numeric, got {raw!r}") from None
    return f  # range/sum validation happens in the dataset module


def _parse_features_per_split(raw):
    if raw in ("sqrt", "log2", "all", None):
        return raw
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise UsageError(f"--features-per-split must be an integer, 'sqrt', 'log2', or 'all', got {raw!r}") from None


def _check_port_free(host: str, port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise TrustnbrError(f"cannot bind {host}:{port}: {exc}") from None
    finally:
        probe.close()


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "synth":
        path = write_surrogate_csv(args.out_csv, n_rows=args.rows, seed=args.seed)
        print(f"wrote {path}")
        return EXIT_OK

    if args.command == "prepare":
        cached = prepare(
            args.csv,
            args.out,
            label_column=args.label,
            fractions=_parse_fractions(args.fractions),
            seed=args.seed,
            impute_mean=args.impute_mean,
        )
        print(f"prepare: {'cached' if cached else 'done'} -> {args.out}")
        return EXIT_OK

    if args.command == "train":
        params = {
            "n_trees": args.trees,
            "max_depth": args.max_depth,
            "min_leaf": args.min_leaf,
            "features_per_split": _parse_features_per_split(args.features_per_split),
        }
        cached = train(args.dir, params, seed=args.seed)
        print(f"train: {'cached' if cached else 'done'}")
        return EXIT_OK

    if args.command == "explain":
        cached = explain(args.dir, background_size=args.background_size, background_seed=args.background_seed)
        print(f"explain: {'cached' if cached else 'done'}")
        return EXIT_OK

    if args.command == "casebase":
        cached = casebase(args.dir)
        print(f"casebase: {'cached' if cached else 'done'}")
        return EXIT_OK

    if args.command == "experiment":
        cached = experiment(
            args.dir,
            k_max=args.k_max,
            threshold=args.threshold,
            epsilon_divisor=args.epsilon_divisor,
        )
        print(f"experiment: {'cached' if cached else 'done'}")
        return EXIT_OK

    if args.command == "serve":
        import uvicorn

        _check_port_free(args.host, args.port)
        bundle = load_session(args.dir, threshold=args.threshold)
        app = create_app(bundle=bundle, enable_truth=args.debug_truth)
        print(f"serving {len(bundle.alert_set)} alerts on http://{args.host}:{args.port}")
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return EXIT_OK

    raise UsageError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _dispatch(args)
    except UsageError as exc:
        if str(exc):
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrustnbrError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

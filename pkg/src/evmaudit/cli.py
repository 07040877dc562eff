"""Command-line interface.

    evmaudit analyze <file|hex>     one contract, text or JSON report
    evmaudit batch <dir>            a corpus: reports, stats, CSV, figures
    evmaudit fetch <address>        pull deployed code over JSON-RPC

Exit codes: 0 clean, 1 findings present, 2 input or transport error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .batch import run_batch, write_reports
from .cfg import to_dot
from .config import AnalyzerConfig, load_config
from .defects import analyze, analyze_artifacts
from .features import features_to_json
from .report import DefectReport
from .rpc import IngestionError, ProtocolError, RpcEndpoint, fetch_code

EXIT_CLEAN = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evmaudit",
        description="Detect common defects in EVM runtime bytecode.",
    )
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser("analyze", help="analyze one bytecode file or hex string")
    p_analyze.add_argument("source", help="path to a .hex/.bin file, or a hex string")
    p_analyze.add_argument("--json", action="store_true", help="emit the JSON report")
    p_analyze.add_argument("--dot", metavar="OUT", help="also write the CFG as DOT")
    p_analyze.add_argument("--features", metavar="OUT",
                           help="also write the feature dump (calls/loops/functions) as JSON")
    p_analyze.add_argument("--timeout", type=float, help="per-contract timeout (s)")
    p_analyze.add_argument("--include-timestamp-bid", action="store_true",
                           help="treat TIMESTAMP like the other block fields")

    p_batch = sub.add_parser("batch", help="analyze every *.hex/*.bin in a directory")
    p_batch.add_argument("directory")
    p_batch.add_argument("--out", default="evmaudit-out", help="output directory")
    p_batch.add_argument("--jobs", type=int, help="parallel workers")
    p_batch.add_argument("--timeout", type=float, help="per-contract timeout (s)")
    p_batch.add_argument("--json", action="store_true",
                         help="print aggregate stats as JSON to stdout")
    p_batch.add_argument("--no-figures", action="store_true",
                         help="skip rendering the census figures")

    p_fetch = sub.add_parser("fetch", help="fetch deployed runtime bytecode")
    p_fetch.add_argument("address", help="20-byte contract address (0x...)")
    p_fetch.add_argument("--rpc", required=True, help="JSON-RPC endpoint URL")
    p_fetch.add_argument("--timeout", type=float, default=10.0)
    p_fetch.add_argument("--retries", type=int, default=2)
    p_fetch.add_argument("--analyze", action="store_true",
                         help="analyze the fetched code instead of printing it")
    p_fetch.add_argument("--json", action="store_true")
    return parser


def _load_source(source: str) -> bytes | str:
    path = Path(source)
    if path.exists():
        if path.suffix == ".bin":
            data = path.read_bytes()
            try:
                return data.decode("ascii")
            except UnicodeDecodeError:
                return data
        return path.read_text()
    if source.endswith((".hex", ".bin")) or "/" in source:
        raise FileNotFoundError(f"no such file: {source}")
    return source


def _emit_report(report: DefectReport, as_json: bool) -> int:
    if as_json:
        print(report.to_json())
    else:
        print(report.to_text(), end="")
    return EXIT_FINDINGS if report.findings else EXIT_CLEAN


def _cmd_analyze(args: argparse.Namespace, config: AnalyzerConfig) -> int:
    config = config.override(
        timeout_s=args.timeout,
        include_timestamp_in_bid=True if args.include_timestamp_bid else None,
    )
    try:
        code = _load_source(args.source)
        report, analysis = analyze_artifacts(code, config)
        if args.dot:
            Path(args.dot).write_text(to_dot(analysis.cfg))
        if args.features:
            import json

            dump = features_to_json(analysis.call_sites, analysis.loops, analysis.functions)
            Path(args.features).write_text(json.dumps(dump, indent=2, sort_keys=True) + "\n")
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return _emit_report(report, args.json or config.output == "json")


def _cmd_batch(args: argparse.Namespace, config: AnalyzerConfig) -> int:
    config = config.override(jobs=args.jobs, timeout_s=args.timeout)
    directory = Path(args.directory)
    if not directory.is_dir():
        print(f"error: not a directory: {directory}", file=sys.stderr)
        return EXIT_ERROR
    stats, reports = run_batch(directory, config)
    paths = write_reports(args.out, stats, reports)
    if not args.no_figures:
        from .figures import render_corpus_figures

        render_corpus_figures(stats, reports, Path(args.out) / "figures")
    if args.json or config.output == "json":
        import json

        print(json.dumps(stats.as_dict(), indent=2, sort_keys=True))
    else:
        print(f"analyzed {stats.contracts_total} distinct contracts "
              f"({stats.files_skipped} files skipped)")
        for kind, count in stats.per_defect_counts.items():
            print(f"  {kind.value:5s} {count}")
        print(f"reports written to {paths['dir']}")
    return EXIT_FINDINGS if stats.contracts_with_any else EXIT_CLEAN


def _cmd_fetch(args: argparse.Namespace, config: AnalyzerConfig) -> int:
    endpoint = RpcEndpoint(args.rpc, timeout=args.timeout, retries=args.retries)
    try:
        code = fetch_code(endpoint, args.address)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (IngestionError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not code:
        print(f"{args.address}: no code deployed (externally-owned account)",
              file=sys.stderr)
        print("0x")
        return EXIT_CLEAN
    if args.analyze:
        report = analyze(code, config, address=args.address)
        return _emit_report(report, args.json)
    print("0x" + code.hex())
    return EXIT_CLEAN


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else AnalyzerConfig()
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.command == "analyze":
        return _cmd_analyze(args, config)
    if args.command == "batch":
        return _cmd_batch(args, config)
    return _cmd_fetch(args, config)


if __name__ == "__main__":
    sys.exit(main())

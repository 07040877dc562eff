"""Corpus batch runner: analyze a directory of bytecode files and aggregate.

Files are deduplicated by code hash before analysis, per-contract failures
and timeouts never abort the batch, and the aggregate statistics are
independent of file order and worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import AnalyzerConfig
from .defects import analyze
from .disasm import parse_bytecode
from .report import DefectKind, DefectReport, code_hash

BYTECODE_SUFFIXES = (".hex", ".bin")


@dataclass(slots=True)
class CorpusStats:
    contracts_total: int = 0
    per_defect_counts: dict[DefectKind, int] = field(
        default_factory=lambda: {kind: 0 for kind in DefectKind}
    )
    contracts_with_any: int = 0
    multi_defect_histogram: dict[int, int] = field(default_factory=dict)
    mean_instructions: float = 0.0
    mean_cyclomatic: float = 0.0
    files_skipped: int = 0

    def as_dict(self) -> dict:
        return {
            "contracts_total": self.contracts_total,
            "per_defect_counts": {k.value: v for k, v in self.per_defect_counts.items()},
            "contracts_with_any": self.contracts_with_any,
            "multi_defect_histogram": {
                str(k): v for k, v in sorted(self.multi_defect_histogram.items())
            },
            "mean_instructions": round(self.mean_instructions, 3),
            "mean_cyclomatic": round(self.mean_cyclomatic, 3),
            "files_skipped": self.files_skipped,
        }


def aggregate(reports: list[DefectReport], files_skipped: int = 0) -> CorpusStats:
    """Fold per-contract reports into corpus statistics. A contract counts at
    most once per defect kind, however many findings of that kind it has."""
    stats = CorpusStats(files_skipped=files_skipped)
    stats.contracts_total = len(reports)
    for report in reports:
        kinds = report.kinds
        for kind in kinds:
            stats.per_defect_counts[kind] += 1
        stats.multi_defect_histogram[len(kinds)] = (
            stats.multi_defect_histogram.get(len(kinds), 0) + 1
        )
        if kinds:
            stats.contracts_with_any += 1
    if reports:
        stats.mean_instructions = sum(r.instructions_total for r in reports) / len(reports)
        stats.mean_cyclomatic = sum(r.cyclomatic_complexity for r in reports) / len(reports)
    return stats


def _read_bytecode(path: Path) -> bytes:
    if path.suffix == ".bin":
        data = path.read_bytes()
        # .bin files may still hold hex text; treat printable hex as such
        try:
            return parse_bytecode(data.decode("ascii"))
        except (UnicodeDecodeError, ValueError):
            return data
    return parse_bytecode(path.read_text())


def _analyze_one(args: tuple[bytes, AnalyzerConfig]) -> DefectReport:
    code, config = args
    return analyze(code, config)


def collect_corpus(directory: str | Path) -> tuple[dict[str, bytes], int]:
    """Distinct bytecodes in a directory keyed by code hash, plus the count
    of files that could not be read or parsed."""
    root = Path(directory)
    corpus: dict[str, bytes] = {}
    skipped = 0
    for path in sorted(root.iterdir()):
        if not path.is_file() or path.suffix not in BYTECODE_SUFFIXES:
            continue
        try:
            code = _read_bytecode(path)
        except (OSError, ValueError):
            skipped += 1
            continue
        corpus.setdefault(code_hash(code), code)
    return corpus, skipped


def run_batch(
    directory: str | Path,
    config: AnalyzerConfig | None = None,
) -> tuple[CorpusStats, list[DefectReport]]:
    """Analyze every distinct *.hex / *.bin bytecode under `directory`.

    Reports come back sorted by code hash, so the result does not depend on
    filesystem order or on the worker count.
    """
    config = config or AnalyzerConfig()
    corpus, skipped = collect_corpus(directory)
    ordered = [corpus[h] for h in sorted(corpus)]
    if config.jobs > 1 and len(ordered) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            reports = list(pool.map(_analyze_one, [(code, config) for code in ordered]))
    else:
        reports = [analyze(code, config) for code in ordered]
    reports.sort(key=lambda r: r.code_hash)
    return aggregate(reports, files_skipped=skipped), reports


def write_reports(
    outdir: str | Path,
    stats: CorpusStats,
    reports: list[DefectReport],
) -> dict[str, Path]:
    """Write one JSON per contract (named by code hash), aggregate stats
    JSON, and a delimited per-contract summary. Returns the paths written,
    keyed by role."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for report in reports:
        (out / f"{report.code_hash}.json").write_text(report.to_json() + "\n")
    stats_path = out / "stats.json"
    stats_path.write_text(json.dumps(stats.as_dict(), indent=2, sort_keys=True) + "\n")
    csv_path = out / "summary.csv"
    csv_path.write_text(render_summary_csv(reports))
    return {"stats": stats_path, "summary": csv_path, "dir": out}


def render_summary_csv(reports: list[DefectReport]) -> str:
    header = ["code_hash", "instructions", "coverage", "cyclomatic_complexity",
              "timed_out", "defect_kinds", "finding_count"]
    rows = [",".join(header)]
    for r in sorted(reports, key=lambda x: x.code_hash):
        kinds = ";".join(sorted(k.value for k in r.kinds))
        rows.append(",".join([
            r.code_hash,
            str(r.instructions_total),
            f"{r.coverage:.6f}",
            str(r.cyclomatic_complexity),
            str(int(r.timed_out)),
            kinds,
            str(len(r.findings)),
        ]))
    return "\n".join(rows) + "\n"

"""Findings and the per-contract report, with JSON and text renderings."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum


class DefectKind(str, Enum):
    TSD = "TSD"    # transaction-origin permission checks
    DUEI = "DuEI"  # revert-on-failure money call inside a loop
    SBE = "SBE"    # strict balance equality in a branch
    RE = "RE"      # reentrant money call guarded by unwritten storage
    NC = "NC"      # money call in a loop with no size limit
    GC = "GC"      # accepts Ether with no way to move it out
    UEC = "UEC"    # unchecked external call result
    BID = "BID"    # branching on block information


# fixed severity mapping: 1 is most severe
IMPACT_LEVEL: dict[DefectKind, int] = {
    DefectKind.TSD: 1,
    DefectKind.RE: 1,
    DefectKind.DUEI: 2,
    DefectKind.SBE: 2,
    DefectKind.NC: 2,
    DefectKind.GC: 3,
    DefectKind.UEC: 3,
    DefectKind.BID: 3,
}

KIND_ORDER = list(DefectKind)


@dataclass(frozen=True, slots=True)
class Finding:
    kind: DefectKind
    sites: tuple[int, ...]
    note: str = ""

    @property
    def impact_level(self) -> int:
        return IMPACT_LEVEL[self.kind]

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "impact_level": self.impact_level,
            "sites": list(self.sites),
            "note": self.note,
        }


def code_hash(code: bytes) -> str:
    """Stable identity for a piece of bytecode (used to name and dedup
    reports)."""
    return hashlib.sha256(code).hexdigest()


@dataclass(slots=True)
class DefectReport:
    code_hash: str
    findings: list[Finding]
    coverage: float
    instructions_total: int
    cyclomatic_complexity: int
    duration_ms: float
    timed_out: bool
    aborts: dict[str, int]
    address: str | None = None

    @property
    def kinds(self) -> set[DefectKind]:
        return {f.kind for f in self.findings}

    def has(self, kind: DefectKind) -> bool:
        return kind in self.kinds

    def as_dict(self, include_volatile: bool = True) -> dict:
        out = {
            "code_hash": self.code_hash,
            "findings": [f.as_dict() for f in self.findings],
            "coverage": round(self.coverage, 6),
            "instructions_total": self.instructions_total,
            "cyclomatic_complexity": self.cyclomatic_complexity,
            "timed_out": self.timed_out,
            "aborts": dict(sorted(self.aborts.items())),
        }
        if self.address is not None:
            out["address"] = self.address
        if include_volatile:
            out["duration_ms"] = round(self.duration_ms, 3)
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent, sort_keys=True)

    def canonical_json(self) -> str:
        """Deterministic rendering: wall-clock duration is left out so two
        runs over the same bytecode compare byte-identical."""
        return json.dumps(self.as_dict(include_volatile=False), sort_keys=True)

    def to_text(self) -> str:
        lines = [f"contract {self.code_hash[:16]}…"]
        lines.append(
            f"  instructions={self.instructions_total}"
            f"  coverage={self.coverage:.1%}"
            f"  complexity={self.cyclomatic_complexity}"
            f"  time={self.duration_ms:.1f}ms"
            + ("  TIMED-OUT" if self.timed_out else "")
        )
        if not self.findings:
            lines.append("  no defects found")
        for f in sorted(self.findings, key=lambda x: (KIND_ORDER.index(x.kind), x.sites)):
            where = ", ".join(hex(s) for s in f.sites[:8])
            lines.append(f"  [{f.kind.value}] impact {f.impact_level} at {where}: {f.note}")
        return "\n".join(lines) + "\n"

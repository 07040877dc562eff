"""The eight defect rules, applied over the CFG, stack events, and features.

Each rule is a pure function of the completed analysis; `analyze` runs the
whole pipeline on raw bytecode and assembles the report. Rules never raise on
strange inputs — a contract the executor could not fully explore simply
yields fewer events to match on, mirrored by the abort tallies in the report.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .cfg import (
    BasicBlock,
    CallSite,
    Cfg,
    ExecutionResult,
    ExitType,
    StackEventLog,
    build_blocks,
    cyclomatic_complexity,
    execute,
)
from .config import AnalyzerConfig
from .disasm import Instruction, decode, parse_bytecode
from .features import (
    CallKind,
    FunctionInfo,
    LoopInfo,
    annotate_payable,
    classify_calls,
    detect_functions,
    detect_loops,
    jumpi_conditions,
)
from .report import DefectKind, DefectReport, Finding, code_hash
from .symbolic import (
    Apply,
    Concrete,
    SymbolicValue,
    contains_any_tag,
    contains_node,
    contains_tag,
    fold,
    render,
    slot_ids,
    walk,
)

BLOCK_INFO_TAGS = frozenset({"BLOCKHASH", "COINBASE", "NUMBER", "DIFFICULTY", "GASLIMIT"})

_ADDRESS_TAGS = ("CALLER", "ORIGIN", "SLOAD")
_ADDR_MIN = 1 << 32
_ADDR_MAX = 1 << 160


def _plain(expr: SymbolicValue) -> str:
    return render(expr, ids=False)


def _keep_note(sites: dict[int, str], offset: int, note: str) -> None:
    """One note per evidence offset; the lexicographically smallest candidate
    wins so the choice never depends on path-exploration order."""
    current = sites.get(offset)
    if current is None or note < current:
        sites[offset] = note


@dataclass(slots=True)
class Analysis:
    """Everything the rules consume, computed once per contract."""

    code: bytes
    instrs: list[Instruction]
    blocks: list[BasicBlock]
    cfg: Cfg
    events: StackEventLog
    call_sites: list[CallSite]
    loops: list[LoopInfo]
    functions: list[FunctionInfo]
    execution: ExecutionResult
    config: AnalyzerConfig = field(default_factory=AnalyzerConfig)

    def money_sites(self) -> list[CallSite]:
        return [s for s in self.call_sites if s.kind is not CallKind.NO_MONEY]


def _address_like(expr: SymbolicValue) -> bool:
    """Plausible address operand: a constant in the 160-bit range that is too
    large to be a selector or small enum, or a value derived from an account
    read (caller, origin, storage)."""
    expr = fold(expr)
    if isinstance(expr, Concrete):
        return _ADDR_MIN <= expr.value < _ADDR_MAX
    return any(contains_tag(expr, tag) for tag in _ADDRESS_TAGS)


def detect_tsd(analysis: Analysis) -> list[Finding]:
    """Permission checks against the transaction origin: an EQ over an ORIGIN
    read whose other operand looks like an address."""
    sites: dict[int, str] = {}
    for ins in analysis.instrs:
        if ins.mnemonic != "EQ":
            continue
        for event in analysis.events.at(ins.offset):
            result = event.after[-1] if event.after else None
            if not (isinstance(result, Apply) and result.tag == "EQ"):
                continue
            a, b = result.args
            for origin_side, other in ((a, b), (b, a)):
                if contains_tag(origin_side, "ORIGIN") and _address_like(other):
                    _keep_note(sites, ins.offset, f"tx origin compared with {_plain(other)}")
                    break
    return [
        Finding(DefectKind.TSD, (off,), note)
        for off, note in sorted(sites.items())
    ]


def detect_duei(analysis: Analysis) -> list[Finding]:
    """A money call inside a loop whose failure branch exits to a halting
    block: one externally-broken transfer wedges the whole loop forever."""
    sites: dict[int, str] = {}
    money_blocks = {s.containing_block for s in analysis.money_sites()}
    for loop in analysis.loops:
        for block_id in sorted(loop.body):
            if block_id not in money_blocks:
                continue
            block = analysis.cfg.block(block_id)
            if block.exit_type is not ExitType.CONDITIONAL:
                continue
            for dst, _ in analysis.cfg.successors(block_id):
                if analysis.cfg.block(dst).exit_type is ExitType.TERMINAL:
                    _keep_note(
                        sites,
                        block.last.offset,
                        f"loop at block {loop.head} halts when the transfer in "
                        f"block {block_id} fails",
                    )
                    break
    return [Finding(DefectKind.DUEI, (off,), note) for off, note in sorted(sites.items())]


def detect_sbe(analysis: Analysis) -> list[Finding]:
    """Branching on an exact balance comparison; forced Ether (selfdestruct
    deposits) makes the equality unreachable."""
    sites: dict[int, str] = {}
    cond_map = jumpi_conditions(analysis.events, analysis.instrs)
    for offset, conds in cond_map.items():
        for cond in conds:
            if any(
                isinstance(node, Apply) and node.tag == "EQ" and contains_tag(node, "BALANCE")
                for node in walk(cond)
            ):
                _keep_note(sites, offset, f"branch on {_plain(cond)}")
    return [Finding(DefectKind.SBE, (off,), note) for off, note in sorted(sites.items())]


def _function_entry_blocks(analysis: Analysis) -> set[int]:
    return {fn.entry_block for fn in analysis.functions}


def detect_re(analysis: Analysis) -> list[Finding]:
    """A gas-unlimited money call still guarded by a storage slot that has
    not been written on the path: the callee can re-enter before the guard
    is invalidated."""
    sites: dict[int, str] = {}
    entries = _function_entry_blocks(analysis)
    for site in analysis.call_sites:
        if site.kind is not CallKind.GAS_UNLIMITED_MONEY:
            continue
        start = 0
        for index, block_id in enumerate(site.path):
            if block_id in entries:
                start = index
        guard_slots: set[SymbolicValue] = set()
        for index, cond in site.path_condition_exprs:
            if index >= start:
                guard_slots |= slot_ids(cond)
        stale = sorted(
            (s for s in guard_slots if s not in site.storage_writes_before),
            key=_plain,
        )
        if stale:
            _keep_note(
                sites,
                site.offset,
                f"call guarded by slot {_plain(stale[0])} not yet written",
            )
    return [Finding(DefectKind.RE, (off,), note) for off, note in sorted(sites.items())]


def detect_nc(analysis: Analysis) -> list[Finding]:
    """Money call inside a loop whose iteration count is not limited: gas
    cost grows with the loop until the function can never complete."""
    findings: dict[int, str] = {}
    for loop in analysis.loops:
        if loop.size_limited:
            continue
        offsets = sorted(
            s.offset
            for s in analysis.money_sites()
            if s.containing_block in loop.body
        )
        if offsets:
            _keep_note(
                findings,
                offsets[0],
                f"unbounded loop at block {loop.head} repeats a transfer",
            )
    return [Finding(DefectKind.NC, (off,), note) for off, note in sorted(findings.items())]


def detect_gc(analysis: Analysis) -> list[Finding]:
    """Contract can receive Ether (some payable function) but has no money
    call and no SELFDESTRUCT anywhere: funds that arrive are stuck.

    Bytecode without a single JUMPDEST has no real function structure — the
    lone degenerate entry "function" is an artifact of total decoding, not a
    payable surface — so such blobs are never reported greedy."""
    if not any(ins.mnemonic == "JUMPDEST" for ins in analysis.instrs):
        return []
    payable = [fn for fn in analysis.functions if fn.is_payable]
    if not payable:
        return []
    if analysis.money_sites():
        return []
    if any(ins.mnemonic == "SELFDESTRUCT" for ins in analysis.instrs):
        return []
    entry_offsets = tuple(
        sorted(analysis.cfg.block(fn.entry_block).start_offset for fn in payable)
    )
    return [Finding(
        DefectKind.GC,
        entry_offsets,
        "accepts Ether but has no transfer and no selfdestruct",
    )]


def detect_uec(analysis: Analysis) -> list[Finding]:
    """Call sites whose boolean result is never inspected by an ISZERO on any
    traversal: a silently failed call corrupts the following logic."""
    iszero_args: list[SymbolicValue] = []
    for ins in analysis.instrs:
        if ins.mnemonic != "ISZERO":
            continue
        for event in analysis.events.at(ins.offset):
            if event.before:
                iszero_args.append(event.before[-1])

    by_offset: dict[int, list[CallSite]] = {}
    for site in analysis.call_sites:
        by_offset.setdefault(site.offset, []).append(site)

    sites: dict[int, str] = {}
    for offset, group in sorted(by_offset.items()):
        for site in group:
            site.result_checked = any(
                contains_node(arg, site.result_symbol) for arg in iszero_args
            )
        if not any(site.result_checked for site in group):
            sites[offset] = f"{group[0].family} result is never checked"
    return [Finding(DefectKind.UEC, (off,), note) for off, note in sorted(sites.items())]


def detect_bid(analysis: Analysis) -> list[Finding]:
    """Branch conditions influenced by miner-controlled block fields."""
    tags = set(BLOCK_INFO_TAGS)
    if analysis.config.include_timestamp_in_bid:
        tags.add("TIMESTAMP")
    sites: dict[int, str] = {}
    cond_map = jumpi_conditions(analysis.events, analysis.instrs)
    for offset, conds in cond_map.items():
        for cond in conds:
            if contains_any_tag(cond, tags):
                _keep_note(sites, offset, f"branch on block field in {_plain(cond)}")
    return [Finding(DefectKind.BID, (off,), note) for off, note in sorted(sites.items())]


_RULES = (
    detect_tsd,
    detect_duei,
    detect_sbe,
    detect_re,
    detect_nc,
    detect_gc,
    detect_uec,
    detect_bid,
)


def run_analysis(
    code: bytes | str,
    config: AnalyzerConfig | None = None,
    branch_rng=None,
) -> Analysis:
    """Decode, execute, and derive features; no rules applied yet."""
    config = config or AnalyzerConfig()
    raw = parse_bytecode(code)
    instrs = decode(raw)
    blocks = build_blocks(instrs)
    deadline = time.monotonic() + config.timeout_s if config.timeout_s else None
    execution = execute(blocks, instrs, config, branch_rng=branch_rng, deadline=deadline)
    classify_calls(execution.call_sites)
    loops = detect_loops(execution.cfg, execution.events, instrs)
    functions = detect_functions(blocks, execution.cfg, execution.events, instrs)
    annotate_payable(functions, execution.cfg, execution.events, instrs)
    return Analysis(
        code=raw,
        instrs=instrs,
        blocks=blocks,
        cfg=execution.cfg,
        events=execution.events,
        call_sites=execution.call_sites,
        loops=loops,
        functions=functions,
        execution=execution,
        config=config,
    )


def analyze_artifacts(
    code: bytes | str,
    config: AnalyzerConfig | None = None,
    address: str | None = None,
    branch_rng=None,
) -> tuple[DefectReport, Analysis]:
    """Full pipeline, returning the report together with the analysis
    artifacts (CFG, events, features) for inspection or export."""
    started = time.perf_counter()
    analysis = run_analysis(code, config, branch_rng=branch_rng)
    findings: list[Finding] = []
    for rule in _RULES:
        findings.extend(rule(analysis))
    findings.sort(key=lambda f: (f.kind.value, f.sites))
    duration_ms = (time.perf_counter() - started) * 1000.0
    report = DefectReport(
        code_hash=code_hash(analysis.code),
        findings=findings,
        coverage=analysis.execution.coverage.coverage,
        instructions_total=len(analysis.instrs),
        cyclomatic_complexity=cyclomatic_complexity(analysis.cfg),
        duration_ms=duration_ms,
        timed_out=analysis.execution.timed_out,
        aborts=analysis.execution.aborts.as_dict(),
        address=address,
    )
    return report, analysis


def analyze(
    code: bytes | str,
    config: AnalyzerConfig | None = None,
    address: str | None = None,
    branch_rng=None,
) -> DefectReport:
    """Full pipeline: bytecode in, defect report out. Never raises on odd
    bytecode; a malformed hex string is the caller's problem (ValueError)."""
    return analyze_artifacts(code, config, address, branch_rng)[0]

"""Basic blocks, symbolic stack-machine execution, and CFG recovery.

Jump targets live on the stack, so the control-flow graph cannot be read off
the instruction stream; it is recovered by depth-first symbolic execution of
every path from the entry block. Conditional branches are both explored unless
the condition folds to a concrete value, in which case the impossible side is
pruned. An unconditional jump whose target stays symbolic ends that path and
is tallied, not raised.

Every instruction execution appends a stack event (the symbolic stack before
and after), which is the raw material for the downstream feature and defect
passes. Coverage counts distinct instruction offsets executed at least once.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from random import Random

from .config import AnalyzerConfig
from .disasm import Instruction
from .opcodes import DUP1, SWAP1, OpcodeSpec, is_push, opcode_spec
from .symbolic import (
    Apply,
    Concrete,
    ExprBuilder,
    Symbol,
    SymbolicValue,
    fold,
    is_statically_false,
)

STACK_LIMIT = 1024

# environment reads that are fixed for a whole execution: memoized per analysis
_ENV_NULLARY = frozenset({
    "ADDRESS", "ORIGIN", "CALLER", "CALLVALUE", "CALLDATASIZE", "CODESIZE",
    "GASPRICE", "RETURNDATASIZE", "COINBASE", "TIMESTAMP", "NUMBER",
    "DIFFICULTY", "GASLIMIT",
})
# one-operand reads memoized by their folded operand
_ENV_UNARY = frozenset({"BALANCE", "EXTCODESIZE", "EXTCODEHASH", "BLOCKHASH", "CALLDATALOAD"})

_COPY_OPS = frozenset({"CALLDATACOPY", "CODECOPY", "RETURNDATACOPY", "EXTCODECOPY"})

CALL_FAMILY = frozenset({"CALL", "CALLCODE", "DELEGATECALL", "STATICCALL"})
# these two have no value operand
_NO_VALUE_CALLS = frozenset({"DELEGATECALL", "STATICCALL"})

_ALU = frozenset({
    "ADD", "MUL", "SUB", "DIV", "SDIV", "MOD", "SMOD", "ADDMOD", "MULMOD",
    "EXP", "SIGNEXTEND", "LT", "GT", "SLT", "SGT", "EQ", "ISZERO", "AND",
    "OR", "XOR", "NOT", "BYTE", "SHL", "SHR", "SAR",
})


class ExitType(str, Enum):
    UNCONDITIONAL = "unconditional"
    CONDITIONAL = "conditional"
    TERMINAL = "terminal"
    FALL = "fall"


class EdgeKind(str, Enum):
    CONDITIONAL_JUMP = "conditional_jump"
    UNCONDITIONAL_JUMP = "unconditional_jump"
    FALL = "fall"


@dataclass(slots=True)
class BasicBlock:
    id: int
    start_offset: int
    end_offset: int
    instructions: list[Instruction]
    exit_type: ExitType

    @property
    def last(self) -> Instruction:
        return self.instructions[-1]

    def starts_with_jumpdest(self) -> bool:
        return self.instructions[0].mnemonic == "JUMPDEST"


@dataclass(frozen=True, slots=True, order=True)
class Edge:
    src: int
    dst: int
    kind: EdgeKind


@dataclass(slots=True)
class Cfg:
    blocks: list[BasicBlock]
    edges: set[Edge]
    entry: int | None

    def block(self, block_id: int) -> BasicBlock:
        return self.blocks[block_id]

    def successors(self, block_id: int) -> list[tuple[int, EdgeKind]]:
        return sorted((e.dst, e.kind) for e in self.edges if e.src == block_id)


@dataclass(frozen=True, slots=True)
class StackEvent:
    offset: int
    before: tuple[SymbolicValue, ...]
    after: tuple[SymbolicValue, ...]


class StackEventLog:
    """Recorded symbolic stack snapshots, keyed by instruction offset."""

    __slots__ = ("events", "cond_cache")

    def __init__(self) -> None:
        self.events: dict[int, list[StackEvent]] = {}
        self.cond_cache: dict[int, list] | None = None

    def add(self, event: StackEvent) -> None:
        self.cond_cache = None
        bucket = self.events.get(event.offset)
        if bucket is None:
            self.events[event.offset] = [event]
        else:
            bucket.append(event)

    def at(self, offset: int) -> list[StackEvent]:
        return self.events.get(offset, [])

    def offsets(self) -> set[int]:
        return set(self.events)

    def __iter__(self):
        for bucket in self.events.values():
            yield from bucket

    def __len__(self) -> int:
        return sum(len(bucket) for bucket in self.events.values())


@dataclass(frozen=True, slots=True)
class CoverageStats:
    instructions_total: int
    instructions_executed: int
    coverage: float


@dataclass(slots=True)
class AbortTally:
    """Per-path terminations that are tallied rather than raised.

    `underflow` also counts stack overflow; `unresolved_jump` covers both
    symbolic targets and concrete targets that are not a JUMPDEST.
    """

    underflow: int = 0
    unresolved_jump: int = 0
    visit_limit: int = 0
    step_budget: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "underflow": self.underflow,
            "unresolved_jump": self.unresolved_jump,
            "visit_limit": self.visit_limit,
            "step_budget": self.step_budget,
        }


@dataclass(slots=True)
class CallSite:
    """One dynamic traversal of a CALL-family instruction."""

    offset: int
    family: str
    gas_expr: SymbolicValue
    recipient_expr: SymbolicValue
    value_expr: SymbolicValue | None
    containing_block: int
    path_condition_exprs: tuple[tuple[int, SymbolicValue], ...]  # (path index, condition)
    storage_writes_before: frozenset[SymbolicValue]
    result_symbol: Symbol
    path: tuple[int, ...]
    result_checked: bool = False
    kind: "object | None" = None  # CallKind, filled by the feature pass


class StackFault(Exception):
    """Stack underflow or overflow on the current path."""


@dataclass(slots=True)
class MachineState:
    stack: list[SymbolicValue] = field(default_factory=list)
    memory: dict[SymbolicValue, SymbolicValue] = field(default_factory=dict)
    storage_writes: set[SymbolicValue] = field(default_factory=set)
    path: list[int] = field(default_factory=list)
    visit_counts: dict[int, int] = field(default_factory=dict)
    path_conds: list[tuple[int, SymbolicValue]] = field(default_factory=list)

    def clone(self) -> "MachineState":
        return MachineState(
            stack=list(self.stack),
            memory=dict(self.memory),
            storage_writes=set(self.storage_writes),
            path=list(self.path),
            visit_counts=dict(self.visit_counts),
            path_conds=list(self.path_conds),
        )

    def push(self, value: SymbolicValue) -> None:
        if len(self.stack) >= STACK_LIMIT:
            raise StackFault("stack overflow")
        self.stack.append(value)

    def pop(self) -> SymbolicValue:
        if not self.stack:
            raise StackFault("stack underflow")
        return self.stack.pop()


@dataclass(slots=True)
class ExecutionResult:
    cfg: Cfg
    events: StackEventLog
    coverage: CoverageStats
    call_sites: list[CallSite]
    aborts: AbortTally
    timed_out: bool


def build_blocks(instrs: list[Instruction]) -> list[BasicBlock]:
    """Partition instructions into basic blocks.

    A block starts at offset 0, at every JUMPDEST, and right after every
    jump or terminal instruction; its exit type comes from its last
    instruction.
    """
    if not instrs:
        return []
    leaders = {instrs[0].offset}
    boundary_after = False
    for ins in instrs:
        if boundary_after or ins.mnemonic == "JUMPDEST":
            leaders.add(ins.offset)
        spec = opcode_spec(ins.opcode)
        boundary_after = spec.is_terminal or spec.is_jump.value != "none"

    blocks: list[BasicBlock] = []
    run: list[Instruction] = []
    for ins in instrs:
        if ins.offset in leaders and run:
            blocks.append(_finish_block(len(blocks), run))
            run = []
        run.append(ins)
    blocks.append(_finish_block(len(blocks), run))
    return blocks


def _finish_block(block_id: int, run: list[Instruction]) -> BasicBlock:
    last = run[-1]
    spec = opcode_spec(last.opcode)
    if last.mnemonic == "JUMP":
        exit_type = ExitType.UNCONDITIONAL
    elif last.mnemonic == "JUMPI":
        exit_type = ExitType.CONDITIONAL
    elif spec.is_terminal:
        exit_type = ExitType.TERMINAL
    else:
        exit_type = ExitType.FALL
    return BasicBlock(block_id, run[0].offset, last.offset, run, exit_type)


def _mload(state: MachineState, offset: SymbolicValue, builder: ExprBuilder) -> SymbolicValue:
    value = state.memory.get(offset)
    if value is None:
        value = builder.fresh_symbol("MEM", (offset,))
        # cache so repeated reads of an untouched cell agree within the path
        state.memory[offset] = value
    return value


def _sha3_value(
    state: MachineState,
    offset: SymbolicValue,
    size: SymbolicValue,
    builder: ExprBuilder,
) -> SymbolicValue:
    """Hash results are opaque symbols keyed by the hashed words, so two
    hashes of structurally equal content (e.g. the same mapping key and slot)
    are the same node."""
    if isinstance(offset, Concrete) and isinstance(size, Concrete) and size.value <= 512:
        words = []
        for delta in range(0, size.value, 32):
            words.append(_mload(state, fold(Apply("ADD", (offset, Concrete(delta)))), builder))
        return builder.memo_symbol("SHA3", tuple(words))
    return builder.fresh_symbol("SHA3", (offset, size))


def step(
    state: MachineState,
    instr: Instruction,
    builder: ExprBuilder,
    spec: "OpcodeSpec | None" = None,
) -> tuple | None:
    """Execute one instruction against the symbolic machine state.

    Returns a control effect for the executor: ("jump", dest), ("jumpi",
    dest, cond), ("terminal",), ("call", family, gas, to, value, result), or
    None for plain data flow. Raises StackFault on stack misuse.
    """
    m = instr.mnemonic
    op = instr.opcode
    if spec is None:
        spec = opcode_spec(op)
    if len(state.stack) < spec.pops:
        raise StackFault(f"{m} needs {spec.pops} items, have {len(state.stack)}")

    if is_push(op):
        state.push(Concrete(instr.immediate or 0))
        return None
    if DUP1 <= op < DUP1 + 16:
        state.push(state.stack[-(op - DUP1 + 1)])
        return None
    if SWAP1 <= op < SWAP1 + 16:
        n = op - SWAP1 + 1
        state.stack[-1], state.stack[-(n + 1)] = state.stack[-(n + 1)], state.stack[-1]
        return None

    if m in _ALU:
        args = tuple(state.pop() for _ in range(spec.pops))
        state.push(builder.apply(m, args))
        return None
    if m == "POP":
        state.pop()
        return None
    if m == "SHA3":
        offset, size = fold(state.pop()), fold(state.pop())
        state.push(_sha3_value(state, offset, size, builder))
        return None
    if m in _ENV_NULLARY:
        state.push(builder.memo_symbol(m))
        return None
    if m in _ENV_UNARY:
        arg = fold(state.pop())
        state.push(builder.memo_symbol(m, (arg,)))
        return None
    if m == "SLOAD":
        slot = fold(state.pop())
        state.push(builder.memo_symbol("SLOAD", (slot,)))
        return None
    if m == "SSTORE":
        slot = fold(state.pop())
        state.pop()
        state.storage_writes.add(slot)
        return None
    if m == "MLOAD":
        state.push(_mload(state, fold(state.pop()), builder))
        return None
    if m in ("MSTORE", "MSTORE8"):
        offset = fold(state.pop())
        state.memory[offset] = state.pop()
        return None
    if m == "PC":
        state.push(Concrete(instr.offset))
        return None
    if m in ("GAS", "MSIZE"):
        state.push(builder.fresh_symbol(m))
        return None
    if m == "JUMPDEST":
        return None
    if m == "JUMP":
        return ("jump", fold(state.pop()))
    if m == "JUMPI":
        dest = fold(state.pop())
        cond = fold(state.pop())
        return ("jumpi", dest, cond)
    if m in CALL_FAMILY:
        gas = fold(state.pop())
        to = fold(state.pop())
        value = fold(state.pop()) if m not in _NO_VALUE_CALLS else None
        for _ in range(4):  # in offset/size, out offset/size
            state.pop()
        result = builder.fresh_symbol("CALLRESULT")
        state.push(result)
        return ("call", m, gas, to, value, result)
    if m in ("CREATE", "CREATE2"):
        for _ in range(spec.pops):
            state.pop()
        state.push(builder.fresh_symbol("CREATE"))
        return None
    if m in _COPY_OPS or m.startswith("LOG"):
        for _ in range(spec.pops):
            state.pop()
        return None
    if spec.is_terminal:
        for _ in range(spec.pops):
            state.pop()
        return ("terminal",)

    # anything unclassified: honor the arity and stay opaque
    for _ in range(spec.pops):
        state.pop()
    for _ in range(spec.pushes):
        state.push(builder.fresh_symbol(m))
    return None


def _resolve_target(dest: SymbolicValue, by_start: dict[int, BasicBlock]) -> BasicBlock | None:
    if not isinstance(dest, Concrete):
        return None
    target = by_start.get(dest.value)
    if target is None or not target.starts_with_jumpdest():
        return None
    return target


def execute(
    blocks: list[BasicBlock],
    instrs: list[Instruction],
    config: AnalyzerConfig | None = None,
    builder: ExprBuilder | None = None,
    branch_rng: Random | None = None,
    deadline: float | None = None,
) -> ExecutionResult:
    """Enumerate paths depth-first from the entry block, recording stack
    events, call sites, and resolved jump edges.

    `branch_rng` shuffles branch exploration order (the results must not
    depend on it); `deadline` is an absolute time.monotonic() cutoff.
    """
    config = config or AnalyzerConfig()
    builder = builder or ExprBuilder(config.depth_cap)
    log = StackEventLog()
    aborts = AbortTally()
    call_sites: list[CallSite] = []
    edges: set[Edge] = set()
    cfg = Cfg(blocks=blocks, edges=edges, entry=0 if blocks else None)
    timed_out = False

    if blocks:
        by_start = {b.start_offset: b for b in blocks}
        specs = {
            b.id: [opcode_spec(i.opcode) for i in b.instructions] for b in blocks
        }
        steps = 0
        # prune exact re-encounters: a block entered again with an identical
        # machine state would replay an already-recorded subtree, so the
        # cached verdict is reused and the duplicate path is dropped
        seen_states: set = set()
        frames: list[tuple[BasicBlock, MachineState]] = [(blocks[0], MachineState())]
        while frames:
            if deadline is not None and time.monotonic() > deadline:
                timed_out = True
                break
            if steps >= config.step_budget:
                aborts.step_budget += 1
                break
            block, state = frames.pop()
            visits = state.visit_counts.get(block.id, 0)
            if visits >= config.visit_limit:
                aborts.visit_limit += 1
                continue
            fingerprint = (
                block.id,
                tuple(state.stack),
                frozenset(state.memory.items()),
                frozenset(state.storage_writes),
            )
            if fingerprint in seen_states:
                continue
            seen_states.add(fingerprint)
            state.visit_counts[block.id] = visits + 1
            state.path.append(block.id)

            effect: tuple = ("fall",)
            path_died = False
            for instr, spec in zip(block.instructions, specs[block.id]):
                if steps >= config.step_budget:
                    aborts.step_budget += 1
                    path_died = True
                    break
                before = tuple(state.stack)
                try:
                    eff = step(state, instr, builder, spec)
                except StackFault:
                    aborts.underflow += 1
                    path_died = True
                    break
                steps += 1
                log.add(StackEvent(instr.offset, before, tuple(state.stack)))
                if eff is not None:
                    if eff[0] == "call":
                        _, family, gas, to, value, result = eff
                        call_sites.append(CallSite(
                            offset=instr.offset,
                            family=family,
                            gas_expr=gas,
                            recipient_expr=to,
                            value_expr=value,
                            containing_block=block.id,
                            path_condition_exprs=tuple(state.path_conds),
                            storage_writes_before=frozenset(state.storage_writes),
                            result_symbol=result,
                            path=tuple(state.path),
                        ))
                    else:
                        effect = eff
            if path_died:
                continue

            next_block = blocks[block.id + 1] if block.id + 1 < len(blocks) else None
            if effect[0] == "terminal":
                continue
            if effect[0] == "jump":
                target = _resolve_target(effect[1], by_start)
                if target is None:
                    aborts.unresolved_jump += 1
                    continue
                edges.add(Edge(block.id, target.id, EdgeKind.UNCONDITIONAL_JUMP))
                frames.append((target, state))
            elif effect[0] == "jumpi":
                dest, cond = effect[1], effect[2]
                branches: list[tuple[BasicBlock, MachineState]] = []
                if not is_statically_false(cond):
                    target = _resolve_target(dest, by_start)
                    if target is None:
                        aborts.unresolved_jump += 1
                    else:
                        edges.add(Edge(block.id, target.id, EdgeKind.CONDITIONAL_JUMP))
                        taken = state.clone()
                        taken.path_conds.append((len(taken.path) - 1, cond))
                        branches.append((target, taken))
                fall_infeasible = isinstance(cond, Concrete) and cond.value != 0
                if not fall_infeasible and next_block is not None:
                    edges.add(Edge(block.id, next_block.id, EdgeKind.FALL))
                    fallen = state.clone()
                    fallen.path_conds.append(
                        (len(fallen.path) - 1, builder.apply("ISZERO", (cond,)))
                    )
                    branches.append((next_block, fallen))
                if branch_rng is not None:
                    branch_rng.shuffle(branches)
                frames.extend(branches)
            else:  # fall through
                if next_block is not None:
                    edges.add(Edge(block.id, next_block.id, EdgeKind.FALL))
                    frames.append((next_block, state))

    total = len(instrs)
    executed = len(log.offsets())
    ratio = executed / total if total else 1.0
    return ExecutionResult(cfg, log, CoverageStats(total, executed, ratio),
                           call_sites, aborts, timed_out)


def cyclomatic_complexity(cfg: Cfg) -> int:
    """E - N + 2 over the connected graph reachable from the entry.

    Decoded-but-unreachable blocks (dead code, metadata trailers) are not
    part of the control-flow graph the formula assumes, so they do not
    count toward N. An empty graph counts as 1.
    """
    if not cfg.blocks or cfg.entry is None:
        return 1
    succs: dict[int, list[int]] = {}
    for e in cfg.edges:
        succs.setdefault(e.src, []).append(e.dst)
    reachable = {cfg.entry}
    queue = [cfg.entry]
    while queue:
        for dst in succs.get(queue.pop(), ()):
            if dst not in reachable:
                reachable.add(dst)
                queue.append(dst)
    edges = sum(1 for e in cfg.edges if e.src in reachable)
    return edges - len(reachable) + 2


def to_dot(cfg: Cfg) -> str:
    """Graphviz text form: blocks labeled with offset range and exit type."""
    lines = ["digraph cfg {", "  node [shape=box fontname=monospace];"]
    for b in cfg.blocks:
        label = f"B{b.id}\\n[{b.start_offset:#x}..{b.end_offset:#x}]\\n{b.exit_type.value}"
        lines.append(f'  b{b.id} [label="{label}"];')
    for e in sorted(cfg.edges):
        lines.append(f'  b{e.src} -> b{e.dst} [label="{e.kind.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def cfg_to_json(cfg: Cfg) -> dict:
    return {
        "entry": cfg.entry,
        "blocks": [
            {
                "id": b.id,
                "start_offset": b.start_offset,
                "end_offset": b.end_offset,
                "exit_type": b.exit_type.value,
                "instructions": [str(i) for i in b.instructions],
            }
            for b in cfg.blocks
        ],
        "edges": [
            {"from": e.src, "to": e.dst, "kind": e.kind.value} for e in sorted(cfg.edges)
        ],
    }

"""Behavioral features feeding the defect rules.

Three families:
  * call classification — does a CALL-family site move Ether, and is its gas
    operand pinned to the 2300 stipend that transfer()/send() push;
  * loop detection — DFS over the recovered CFG flags any block revisited on
    the current traversal as a loop head (with the verdict cache that skips
    re-descending finished subtrees), then pulls the storage slot bounding the
    loop out of its conditional exit;
  * function discovery — selector comparisons in the dispatcher region (all
    blocks before the first JUMPDEST) name the functions, and the entry guard
    CALLVALUE/ISZERO/branch-to-revert decides payability.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .cfg import (
    BasicBlock,
    CallSite,
    Cfg,
    EdgeKind,
    ExitType,
    StackEventLog,
)
from .disasm import Instruction
from .symbolic import (
    Apply,
    Concrete,
    Symbol,
    SymbolicValue,
    COMPARISON_OPS,
    contains_literal,
    contains_tag,
    fold,
    node_count,
    render,
    slot_ids,
    walk,
)

GAS_STIPEND = 2300
SELECTOR_MAX = 1 << 32


class CallKind(str, Enum):
    NO_MONEY = "NoMoney"
    GAS_LIMITED_MONEY = "GasLimitedMoney"
    GAS_UNLIMITED_MONEY = "GasUnlimitedMoney"


@dataclass(slots=True)
class LoopInfo:
    head: int
    body: frozenset[int]
    bound_slot: SymbolicValue | None = None
    size_limited: bool = False


@dataclass(slots=True)
class FunctionInfo:
    selector: int | None
    entry_block: int
    is_payable: bool = True
    is_fallback: bool = False


def classify_call(site: CallSite) -> CallKind:
    """Total classification of one call site.

    A concrete zero value (or no value operand at all) moves no Ether. Any
    other value — including a symbolic one, which defaults to "could be
    positive" — is a money call, gas-limited when the literal 2300 stipend
    appears in the gas operand and gas-unlimited otherwise.
    """
    value = site.value_expr
    if value is None:
        return CallKind.NO_MONEY
    value = fold(value)
    if isinstance(value, Concrete) and value.value == 0:
        return CallKind.NO_MONEY
    if contains_literal(site.gas_expr, GAS_STIPEND):
        return CallKind.GAS_LIMITED_MONEY
    return CallKind.GAS_UNLIMITED_MONEY


def classify_calls(sites: list[CallSite]) -> None:
    for site in sites:
        site.kind = classify_call(site)


def jumpi_conditions(
    log: StackEventLog, instrs: list[Instruction]
) -> dict[int, list[SymbolicValue]]:
    """Distinct condition expressions per JUMPI offset, in a deterministic
    order. JUMPI pops target then condition, so the condition sits second
    from the top in the before-snapshot. Cached on the log until it grows.
    """
    if log.cond_cache is not None:
        return log.cond_cache
    out: dict[int, list[SymbolicValue]] = {}
    for ins in instrs:
        if ins.mnemonic != "JUMPI":
            continue
        conds = {e.before[-2] for e in log.at(ins.offset) if len(e.before) >= 2}
        if conds:
            out[ins.offset] = sorted(conds, key=lambda c: render(c, ids=False))
    log.cond_cache = out
    return out


def block_exit_conditions(
    block: BasicBlock, cond_map: dict[int, list[SymbolicValue]]
) -> list[SymbolicValue]:
    if block.exit_type is not ExitType.CONDITIONAL:
        return []
    return cond_map.get(block.last.offset, [])


def detect_loops(
    cfg: Cfg,
    log: StackEventLog | None = None,
    instrs: list[Instruction] | None = None,
) -> list[LoopInfo]:
    """DFS the CFG from the entry; a block met again on the current traversal
    is a loop head and the stack segment from it onward is the body.

    Finished blocks are never re-descended (the cycle-free verdict is cached),
    which keeps traversal linear, and — deliberately — keeps the known
    over-approximation on shared subroutine blocks: a block reached from two
    return sites looks like a cycle even when no execution loops through it.

    When the stack-event log is supplied, each loop also gets its bound slot
    (the storage slot read in the loop's conditional exit) and a size_limited
    flag (true when that same slot is compared again at another conditional
    exit inside the loop).
    """
    if cfg.entry is None:
        return []
    adjacency = {b.id: [dst for dst, _ in cfg.successors(b.id)] for b in cfg.blocks}
    GRAY, BLACK = 1, 2
    color: dict[int, int] = {}
    position: dict[int, int] = {}
    trail: list[int] = []
    bodies: dict[int, set[int]] = {}

    stack: list[tuple[int, int]] = [(cfg.entry, 0)]
    color[cfg.entry] = GRAY
    position[cfg.entry] = 0
    trail.append(cfg.entry)
    while stack:
        node, idx = stack[-1]
        succs = adjacency[node]
        if idx < len(succs):
            stack[-1] = (node, idx + 1)
            nxt = succs[idx]
            mark = color.get(nxt)
            if mark is None:
                color[nxt] = GRAY
                position[nxt] = len(trail)
                trail.append(nxt)
                stack.append((nxt, 0))
            elif mark == GRAY:
                segment = trail[position[nxt]:]
                bodies.setdefault(nxt, set()).update(segment)
            # BLACK: verdict already cached, skip
        else:
            stack.pop()
            color[node] = BLACK
            trail.pop()

    loops = [LoopInfo(head, frozenset(body)) for head, body in sorted(bodies.items())]
    if log is not None and instrs is not None:
        cond_map = jumpi_conditions(log, instrs)
        for loop in loops:
            _annotate_loop_bound(loop, cfg, cond_map)
    return loops


def _sload_candidates(cond: SymbolicValue) -> list[tuple[int, int, str, SymbolicValue]]:
    """Every SLOAD in the tree as (-depth, node count, rendering, slot); the
    natural ordering of that tuple prefers the innermost, then the smallest."""
    found: list[tuple[int, int, str, SymbolicValue]] = []

    def visit(node: SymbolicValue, depth: int) -> None:
        if isinstance(node, (Symbol, Apply)):
            if node.tag == "SLOAD" and node.args:
                slot = fold(node.args[0])
                found.append((-depth, node_count(node), render(slot, ids=False), slot))
            for a in node.args:
                visit(a, depth + 1)

    visit(cond, 0)
    return found


def _compared_slots(cond: SymbolicValue) -> set[SymbolicValue]:
    """Slots of SLOADs sitting under a comparison operator in the tree."""
    out: set[SymbolicValue] = set()
    for node in walk(cond):
        if isinstance(node, Apply) and node.tag in COMPARISON_OPS:
            out |= slot_ids(node)
    return out


def _annotate_loop_bound(
    loop: LoopInfo, cfg: Cfg, cond_map: dict[int, list[SymbolicValue]]
) -> None:
    head_block = cfg.block(loop.head)
    ordered = [head_block] + [cfg.block(i) for i in sorted(loop.body) if i != loop.head]
    bound: SymbolicValue | None = None
    for block in ordered:
        candidates = [
            c
            for cond in block_exit_conditions(block, cond_map)
            for c in _sload_candidates(cond)
        ]
        if candidates:
            bound = min(candidates)[3]
            break
    loop.bound_slot = bound
    if bound is None:
        loop.size_limited = False
        return
    checking_offsets = set()
    for block in ordered:
        if block.exit_type is not ExitType.CONDITIONAL:
            continue
        for cond in cond_map.get(block.last.offset, []):
            if bound in _compared_slots(cond):
                checking_offsets.add(block.last.offset)
    loop.size_limited = len(checking_offsets) >= 2


def _first_jumpdest_offset(instrs: list[Instruction]) -> int | None:
    for ins in instrs:
        if ins.mnemonic == "JUMPDEST":
            return ins.offset
    return None


def _selector_from_condition(cond: SymbolicValue) -> int | None:
    """Match the dispatcher comparison EQ(selector, calldata-derived) in
    either operand order; DIV- and SHR-based extraction both qualify because
    the calldata read stays in the tree."""
    matches = []
    for node in walk(cond):
        if not (isinstance(node, Apply) and node.tag == "EQ"):
            continue
        a, b = (fold(node.args[0]), fold(node.args[1]))
        for const, other in ((a, b), (b, a)):
            if (
                isinstance(const, Concrete)
                and const.value < SELECTOR_MAX
                and contains_tag(other, "CALLDATALOAD")
            ):
                matches.append(const.value)
    return min(matches) if matches else None


def detect_functions(
    blocks: list[BasicBlock],
    cfg: Cfg,
    log: StackEventLog,
    instrs: list[Instruction],
) -> list[FunctionInfo]:
    """Recover function entries from the selector dispatcher.

    Every conditional jump before the first JUMPDEST that compares a
    constant against calldata starts a function at its jump target; a miss
    on all of them lands in the fallback, which starts at that first
    JUMPDEST. Without any dispatcher the whole contract is one fallback-like
    function at the entry block.
    """
    if not blocks:
        return []
    first_dest = _first_jumpdest_offset(instrs)
    if first_dest is None:
        return [FunctionInfo(None, 0, is_fallback=True)]

    cond_map = jumpi_conditions(log, instrs)
    functions: list[FunctionInfo] = []
    seen: set[int] = set()
    dispatch_blocks = [b for b in blocks if b.start_offset < first_dest]
    for block in dispatch_blocks:
        if block.exit_type is not ExitType.CONDITIONAL:
            continue
        found = [
            sel
            for cond in cond_map.get(block.last.offset, [])
            if (sel := _selector_from_condition(cond)) is not None
        ]
        selector = min(found) if found else None
        if selector is None or selector in seen:
            continue
        targets = [dst for dst, kind in cfg.successors(block.id)
                   if kind is EdgeKind.CONDITIONAL_JUMP]
        if not targets:
            continue
        seen.add(selector)
        functions.append(FunctionInfo(selector, targets[0]))

    fallback_block = next((b for b in blocks if b.start_offset == first_dest), None)
    if not functions and fallback_block is None:
        return [FunctionInfo(None, 0, is_fallback=True)]
    if fallback_block is not None:
        functions.append(FunctionInfo(None, fallback_block.id, is_fallback=True))
    elif not any(f.is_fallback for f in functions):
        functions.append(FunctionInfo(None, 0, is_fallback=True))
    return functions


def _guard_block(fn: FunctionInfo, cfg: Cfg) -> BasicBlock | None:
    """First conditional block along the single-successor chain from the
    function entry; the non-payable guard lives there when present."""
    block = cfg.block(fn.entry_block)
    for _ in range(4):
        if block.exit_type is ExitType.CONDITIONAL:
            return block
        succs = [dst for dst, _ in cfg.successors(block.id)]
        if len(succs) != 1:
            return None
        block = cfg.block(succs[0])
    return None


def _iszero_parity(cond: SymbolicValue) -> int:
    """Number of ISZERO wrappers between the root and the CALLVALUE read."""
    depth = 0
    node = cond
    while isinstance(node, Apply) and node.tag == "ISZERO":
        depth += 1
        node = node.args[0]
    return depth


def is_payable(
    fn: FunctionInfo,
    cfg: Cfg,
    log: StackEventLog,
    instrs: list[Instruction],
) -> bool:
    """A function rejects Ether only when its entry guards the call value:
    CALLVALUE through ISZERO feeding a JUMPI whose failing branch halts in a
    REVERT/INVALID block. Anything else accepts Ether."""
    block = _guard_block(fn, cfg)
    if block is None:
        return True
    cond_map = jumpi_conditions(log, instrs)
    guards = [
        c
        for c in cond_map.get(block.last.offset, [])
        if contains_tag(c, "CALLVALUE") and contains_tag(c, "ISZERO")
    ]
    if not guards:
        return True
    guard = min(guards, key=lambda c: render(c, ids=False))
    # odd ISZERO nesting means the jump is the value-is-zero (accepting)
    # branch and the fall is the failing one; even means the opposite
    failing_kind = EdgeKind.FALL if _iszero_parity(guard) % 2 == 1 else EdgeKind.CONDITIONAL_JUMP
    for dst, kind in cfg.successors(block.id):
        if kind is not failing_kind:
            continue
        target = cfg.block(dst)
        if target.exit_type is ExitType.TERMINAL and target.last.mnemonic in ("REVERT", "INVALID"):
            return False
    return True


def annotate_payable(
    functions: list[FunctionInfo],
    cfg: Cfg,
    log: StackEventLog,
    instrs: list[Instruction],
) -> None:
    for fn in functions:
        fn.is_payable = is_payable(fn, cfg, log, instrs)


def features_to_json(
    call_sites: list[CallSite],
    loops: list[LoopInfo],
    functions: list[FunctionInfo],
) -> dict:
    """Debug dump of the three features for one contract."""
    grouped: dict[int, list[CallSite]] = {}
    for site in call_sites:
        grouped.setdefault(site.offset, []).append(site)
    sites = []
    for offset, group in sorted(grouped.items()):
        site = group[0]
        sites.append({
            "offset": offset,
            "family": site.family,
            "kind": site.kind.value if site.kind else None,
            "gas": render(site.gas_expr),
            "value": render(site.value_expr) if site.value_expr is not None else None,
            "block": site.containing_block,
            "result_checked": any(s.result_checked for s in group),
        })
    return {
        "call_sites": sites,
        "loops": [
            {
                "head": loop.head,
                "body": sorted(loop.body),
                "bound_slot": render(loop.bound_slot) if loop.bound_slot is not None else None,
                "size_limited": loop.size_limited,
            }
            for loop in loops
        ],
        "functions": [
            {
                "selector": f"{fn.selector:#010x}" if fn.selector is not None else None,
                "entry_block": fn.entry_block,
                "is_payable": fn.is_payable,
                "is_fallback": fn.is_fallback,
            }
            for fn in functions
        ],
    }

"""EVM instruction set table: stack arity, jump kind, and terminality per opcode.

The table covers the Constantinople-era instruction set (SHL/SHR/SAR, CREATE2,
EXTCODEHASH, STATICCALL, DELEGATECALL, RETURNDATASIZE/COPY included). Byte
values outside it decode as INVALID.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class JumpKind(Enum):
    NONE = "none"
    UNCONDITIONAL = "unconditional"
    CONDITIONAL = "conditional"


@dataclass(frozen=True, slots=True)
class OpcodeSpec:
    mnemonic: str
    pops: int
    pushes: int
    is_terminal: bool = False
    is_jump: JumpKind = JumpKind.NONE


# value -> (mnemonic, pops, pushes)
_BASE = {
    0x00: ("STOP", 0, 0),
    0x01: ("ADD", 2, 1),
    0x02: ("MUL", 2, 1),
    0x03: ("SUB", 2, 1),
    0x04: ("DIV", 2, 1),
    0x05: ("SDIV", 2, 1),
    0x06: ("MOD", 2, 1),
    0x07: ("SMOD", 2, 1),
    0x08: ("ADDMOD", 3, 1),
    0x09: ("MULMOD", 3, 1),
    0x0A: ("EXP", 2, 1),
    0x0B: ("SIGNEXTEND", 2, 1),
    0x10: ("LT", 2, 1),
    0x11: ("GT", 2, 1),
    0x12: ("SLT", 2, 1),
    0x13: ("SGT", 2, 1),
    0x14: ("EQ", 2, 1),
    0x15: ("ISZERO", 1, 1),
    0x16: ("AND", 2, 1),
    0x17: ("OR", 2, 1),
    0x18: ("XOR", 2, 1),
    0x19: ("NOT", 1, 1),
    0x1A: ("BYTE", 2, 1),
    0x1B: ("SHL", 2, 1),
    0x1C: ("SHR", 2, 1),
    0x1D: ("SAR", 2, 1),
    0x20: ("SHA3", 2, 1),
    0x30: ("ADDRESS", 0, 1),
    0x31: ("BALANCE", 1, 1),
    0x32: ("ORIGIN", 0, 1),
    0x33: ("CALLER", 0, 1),
    0x34: ("CALLVALUE", 0, 1),
    0x35: ("CALLDATALOAD", 1, 1),
    0x36: ("CALLDATASIZE", 0, 1),
    0x37: ("CALLDATACOPY", 3, 0),
    0x38: ("CODESIZE", 0, 1),
    0x39: ("CODECOPY", 3, 0),
    0x3A: ("GASPRICE", 0, 1),
    0x3B: ("EXTCODESIZE", 1, 1),
    0x3C: ("EXTCODECOPY", 4, 0),
    0x3D: ("RETURNDATASIZE", 0, 1),
    0x3E: ("RETURNDATACOPY", 3, 0),
    0x3F: ("EXTCODEHASH", 1, 1),
    0x40: ("BLOCKHASH", 1, 1),
    0x41: ("COINBASE", 0, 1),
    0x42: ("TIMESTAMP", 0, 1),
    0x43: ("NUMBER", 0, 1),
    0x44: ("DIFFICULTY", 0, 1),
    0x45: ("GASLIMIT", 0, 1),
    0x50: ("POP", 1, 0),
    0x51: ("MLOAD", 1, 1),
    0x52: ("MSTORE", 2, 0),
    0x53: ("MSTORE8", 2, 0),
    0x54: ("SLOAD", 1, 1),
    0x55: ("SSTORE", 2, 0),
    0x56: ("JUMP", 1, 0),
    0x57: ("JUMPI", 2, 0),
    0x58: ("PC", 0, 1),
    0x59: ("MSIZE", 0, 1),
    0x5A: ("GAS", 0, 1),
    0x5B: ("JUMPDEST", 0, 0),
    0xF0: ("CREATE", 3, 1),
    0xF1: ("CALL", 7, 1),
    0xF2: ("CALLCODE", 7, 1),
    0xF3: ("RETURN", 2, 0),
    0xF4: ("DELEGATECALL", 6, 1),
    0xF5: ("CREATE2", 4, 1),
    0xFA: ("STATICCALL", 6, 1),
    0xFD: ("REVERT", 2, 0),
    0xFE: ("INVALID", 0, 0),
    0xFF: ("SELFDESTRUCT", 1, 0),
}

_TERMINAL = {"STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"}

PUSH1 = 0x60
PUSH32 = 0x7F
DUP1 = 0x80
SWAP1 = 0x90
LOG0 = 0xA0

INVALID_SPEC = OpcodeSpec("INVALID", 0, 0, is_terminal=True)


def _build_table() -> dict[int, OpcodeSpec]:
    table: dict[int, OpcodeSpec] = {}
    for value, (name, pops, pushes) in _BASE.items():
        jump = JumpKind.NONE
        if name == "JUMP":
            jump = JumpKind.UNCONDITIONAL
        elif name == "JUMPI":
            jump = JumpKind.CONDITIONAL
        table[value] = OpcodeSpec(name, pops, pushes, name in _TERMINAL, jump)
    for n in range(32):
        table[PUSH1 + n] = OpcodeSpec(f"PUSH{n + 1}", 0, 1)
    for n in range(16):
        table[DUP1 + n] = OpcodeSpec(f"DUP{n + 1}", n + 1, n + 2)
        table[SWAP1 + n] = OpcodeSpec(f"SWAP{n + 1}", n + 2, n + 2)
    for n in range(5):
        table[LOG0 + n] = OpcodeSpec(f"LOG{n}", n + 2, 0)
    return table


OPCODES: dict[int, OpcodeSpec] = _build_table()

MNEMONIC_TO_BYTE: dict[str, int] = {spec.mnemonic: value for value, spec in OPCODES.items()}


def opcode_spec(opcode: int) -> OpcodeSpec:
    """Spec for a one-byte opcode value; undefined bytes map to INVALID."""
    return OPCODES.get(opcode, INVALID_SPEC)


def is_push(opcode: int) -> bool:
    return PUSH1 <= opcode <= PUSH32


def push_width(opcode: int) -> int:
    """Immediate width in bytes of a PUSH opcode (1..32)."""
    return opcode - PUSH1 + 1

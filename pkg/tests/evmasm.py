"""Tiny two-pass assembler for hand-building bytecode fixtures.

Tokens:
    "MNEMONIC"      plain opcode by name
    "@name"         bind a label here and emit a JUMPDEST
    ">name"         PUSH2 of the label's offset
    int             PUSH of minimal width
    (value, width)  PUSH of an explicit width in bytes
"""

from __future__ import annotations

from evmaudit.opcodes import MNEMONIC_TO_BYTE, PUSH1


def _push_bytes(value: int, width: int) -> bytes:
    return bytes([PUSH1 + width - 1]) + value.to_bytes(width, "big")


def _min_width(value: int) -> int:
    return max(1, (value.bit_length() + 7) // 8)


def asm(*tokens) -> bytes:
    labels: dict[str, int] = {}
    offset = 0
    for tok in tokens:
        if isinstance(tok, str) and tok.startswith("@"):
            labels[tok[1:]] = offset
            offset += 1  # JUMPDEST
        elif isinstance(tok, str) and tok.startswith(">"):
            offset += 3  # PUSH2 xx xx
        elif isinstance(tok, str):
            offset += 1
        elif isinstance(tok, int):
            offset += 1 + _min_width(tok)
        else:
            value, width = tok
            offset += 1 + width

    out = bytearray()
    for tok in tokens:
        if isinstance(tok, str) and tok.startswith("@"):
            out.append(MNEMONIC_TO_BYTE["JUMPDEST"])
        elif isinstance(tok, str) and tok.startswith(">"):
            name = tok[1:]
            if name not in labels:
                raise KeyError(f"undefined label {name!r}")
            out += _push_bytes(labels[name], 2)
        elif isinstance(tok, str):
            out.append(MNEMONIC_TO_BYTE[tok])
        elif isinstance(tok, int):
            out += _push_bytes(tok, _min_width(tok))
        else:
            value, width = tok
            out += _push_bytes(value, width)
    return bytes(out)

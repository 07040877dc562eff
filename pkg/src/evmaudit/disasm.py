"""Linear-sweep disassembler for EVM runtime bytecode.

PUSH immediates are skipped, never re-interpreted as opcodes. A PUSH whose
immediate runs past the end of the code is zero-padded on the right, matching
mainstream client behavior (deployed bytecode routinely ends in a metadata
trailer that truncates mid-instruction).
"""

from __future__ import annotations

from dataclasses import dataclass

from .opcodes import is_push, opcode_spec, push_width


@dataclass(frozen=True, slots=True)
class Instruction:
    offset: int
    opcode: int
    mnemonic: str
    immediate: int | None = None

    @property
    def size(self) -> int:
        """Total encoded size: opcode byte plus immediate bytes."""
        return 1 + (push_width(self.opcode) if is_push(self.opcode) else 0)

    def encode(self) -> bytes:
        out = bytes([self.opcode])
        if is_push(self.opcode):
            out += (self.immediate or 0).to_bytes(push_width(self.opcode), "big")
        return out

    def __str__(self) -> str:
        if self.immediate is not None:
            return f"{self.offset:#06x}: {self.mnemonic} {self.immediate:#x}"
        return f"{self.offset:#06x}: {self.mnemonic}"


def parse_bytecode(source: bytes | str) -> bytes:
    """Accept raw bytes, or hex text with optional 0x prefix and whitespace.

    Raises ValueError on non-hex input or odd nibble counts.
    """
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    text = "".join(source.split())
    if text.startswith(("0x", "0X")):
        text = text[2:]
    if len(text) % 2 != 0:
        raise ValueError("hex bytecode has an odd number of digits")
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise ValueError(f"invalid hex bytecode: {exc}") from exc


def decode(code: bytes | str) -> list[Instruction]:
    """Decode bytecode into instructions with exact byte offsets.

    Total function: undefined bytes become INVALID instructions and a
    truncated trailing PUSH is zero-padded.
    """
    data = parse_bytecode(code)
    out: list[Instruction] = []
    pc = 0
    while pc < len(data):
        op = data[pc]
        spec = opcode_spec(op)
        if is_push(op):
            width = push_width(op)
            raw = data[pc + 1 : pc + 1 + width]
            imm = int.from_bytes(raw.ljust(width, b"\x00"), "big")
            out.append(Instruction(pc, op, spec.mnemonic, imm))
            pc += 1 + width
        else:
            out.append(Instruction(pc, op, spec.mnemonic))
            pc += 1
    return out

"""Disassembler: decoding, opcode table, round-trip properties."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from evmaudit.disasm import Instruction, decode, parse_bytecode
from evmaudit.opcodes import JumpKind, opcode_spec


def test_decode_push_add_sequence():
    instrs = decode("0x6070604001")
    assert [(i.mnemonic, i.offset, i.immediate) for i in instrs] == [
        ("PUSH1", 0, 0x70),
        ("PUSH1", 2, 0x40),
        ("ADD", 4, None),
    ]


def test_decode_empty():
    assert decode(b"") == []
    assert decode("0x") == []


def test_truncated_push_zero_padded():
    instrs = decode(bytes([0x61, 0xFF]))
    assert len(instrs) == 1
    assert instrs[0].mnemonic == "PUSH2"
    assert instrs[0].immediate == 0xFF00
    assert instrs[0].offset == 0


def test_unknown_bytes_decode_as_invalid():
    instrs = decode(bytes([0x0C, 0x21, 0xEF]))
    assert all(i.mnemonic == "INVALID" for i in instrs)
    # the original byte value is preserved for re-encoding
    assert [i.opcode for i in instrs] == [0x0C, 0x21, 0xEF]


def test_immediates_never_reinterpreted():
    # PUSH2 whose immediate contains the JUMPDEST byte 0x5b
    instrs = decode(bytes([0x61, 0x5B, 0x5B, 0x00]))
    assert [i.mnemonic for i in instrs] == ["PUSH2", "STOP"]


def test_opcode_spec_add():
    spec = opcode_spec(0x01)
    assert (spec.mnemonic, spec.pops, spec.pushes) == ("ADD", 2, 1)


def test_opcode_spec_jumpi():
    spec = opcode_spec(0x57)
    assert spec.pops == 2
    assert spec.is_jump is JumpKind.CONDITIONAL


def test_opcode_spec_call_reads_seven():
    spec = opcode_spec(0xF1)
    assert (spec.mnemonic, spec.pops, spec.pushes) == ("CALL", 7, 1)


def test_opcode_spec_undefined_is_terminal_invalid():
    spec = opcode_spec(0xFE)
    assert spec.mnemonic == "INVALID"
    assert spec.is_terminal
    assert opcode_spec(0x0C).mnemonic == "INVALID"


def test_parse_bytecode_accepts_prefix_and_whitespace():
    assert parse_bytecode(" 0x60 70\n60 40 01 ") == bytes.fromhex("6070604001")
    assert parse_bytecode(b"\x60\x01") == b"\x60\x01"


def test_parse_bytecode_rejects_bad_hex():
    with pytest.raises(ValueError):
        parse_bytecode("0x123")  # odd nibbles
    with pytest.raises(ValueError):
        parse_bytecode("0xzz")


@given(st.binary(max_size=300))
def test_roundtrip_up_to_trailing_zero_pad(data):
    instrs = decode(data)
    encoded = b"".join(i.encode() for i in instrs)
    assert encoded[: len(data)] == data
    tail = encoded[len(data):]
    assert tail == b"\x00" * len(tail)  # only a padded final PUSH may extend


@given(st.binary(max_size=300))
def test_offsets_partition_input(data):
    instrs = decode(data)
    expected = 0
    for ins in instrs:
        assert ins.offset == expected
        expected += ins.size
    assert expected >= len(data)
    if instrs:
        # covered length exceeds the input only via the final truncated PUSH
        assert expected - len(data) < 32


@given(st.binary(max_size=200))
def test_decode_is_pure(data):
    assert decode(data) == decode(data)


def test_instruction_str():
    assert "PUSH1 0x70" in str(Instruction(0, 0x60, "PUSH1", 0x70))

"""evmaudit: defect detection for EVM runtime bytecode.

Pipeline: decode -> basic blocks -> symbolic execution (CFG + stack events)
-> behavioral features -> eight defect rules -> report.
"""

from .cfg import (
    BasicBlock,
    CallSite,
    Cfg,
    CoverageStats,
    EdgeKind,
    ExitType,
    StackEvent,
    StackEventLog,
    build_blocks,
    cyclomatic_complexity,
    execute,
    step,
    to_dot,
)
from .config import AnalyzerConfig, load_config
from .defects import Analysis, analyze, analyze_artifacts, run_analysis
from .disasm import Instruction, decode, parse_bytecode
from .features import (
    CallKind,
    FunctionInfo,
    LoopInfo,
    classify_call,
    detect_functions,
    detect_loops,
    features_to_json,
    is_payable,
)
from .opcodes import OpcodeSpec, opcode_spec
from .report import DefectKind, DefectReport, Finding, IMPACT_LEVEL, code_hash
from .rpc import IngestionError, ProtocolError, RpcEndpoint, fetch_code
from .symbolic import (
    Apply,
    Concrete,
    ExprBuilder,
    Symbol,
    SymbolicValue,
    contains_literal,
    contains_tag,
    fold,
    is_statically_false,
    render,
    slot_ids,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyzerConfig",
    "Analysis",
    "Apply",
    "BasicBlock",
    "CallKind",
    "CallSite",
    "Cfg",
    "Concrete",
    "CoverageStats",
    "DefectKind",
    "DefectReport",
    "EdgeKind",
    "ExitType",
    "ExprBuilder",
    "Finding",
    "FunctionInfo",
    "IMPACT_LEVEL",
    "IngestionError",
    "Instruction",
    "LoopInfo",
    "OpcodeSpec",
    "ProtocolError",
    "RpcEndpoint",
    "StackEvent",
    "StackEventLog",
    "Symbol",
    "SymbolicValue",
    "analyze",
    "analyze_artifacts",
    "build_blocks",
    "classify_call",
    "code_hash",
    "contains_literal",
    "contains_tag",
    "cyclomatic_complexity",
    "decode",
    "detect_functions",
    "detect_loops",
    "execute",
    "features_to_json",
    "fetch_code",
    "fold",
    "is_payable",
    "is_statically_false",
    "load_config",
    "parse_bytecode",
    "render",
    "run_analysis",
    "slot_ids",
    "step",
    "to_dot",
]

"""Call classification, loop detection, function discovery, payability."""

from __future__ import annotations

from random import Random

from evmaudit.cfg import CallSite
from evmaudit.defects import run_analysis
from evmaudit.features import CallKind, classify_call, detect_loops
from evmaudit.symbolic import Apply, Concrete, Symbol
from tests.contracts import (
    SEL_DEPOSIT,
    SEL_WITHDRAW,
    duei_defective,
    nc_defective,
    shared_subroutine,
    two_function_dispatcher,
)
from tests.evmasm import asm
from tests.oracles import make_cfg, oracle_loop_heads, random_reducible_cfg


def _site(gas, value, family="CALL") -> CallSite:
    return CallSite(
        offset=0,
        family=family,
        gas_expr=gas,
        recipient_expr=Symbol("CALLER", 1),
        value_expr=value,
        containing_block=0,
        path_condition_exprs=(),
        storage_writes_before=frozenset(),
        result_symbol=Symbol("CALLRESULT", 99),
        path=(0,),
    )


def test_classify_gas_limited_money():
    site = _site(gas=Concrete(2300), value=Symbol("SLOAD", 2, (Concrete(0),)))
    assert classify_call(site) is CallKind.GAS_LIMITED_MONEY


def test_classify_stipend_inside_expression():
    gas = Apply("SUB", (Symbol("GAS", 1), Concrete(2300)))
    assert classify_call(_site(gas, Concrete(10**18))) is CallKind.GAS_LIMITED_MONEY


def test_classify_zero_value_is_no_money():
    assert classify_call(_site(Symbol("GAS", 1), Concrete(0))) is CallKind.NO_MONEY


def test_classify_missing_value_is_no_money():
    site = _site(Symbol("GAS", 1), None, family="DELEGATECALL")
    assert classify_call(site) is CallKind.NO_MONEY
    site = _site(Symbol("GAS", 1), None, family="STATICCALL")
    assert classify_call(site) is CallKind.NO_MONEY


def test_classify_symbolic_value_defaults_to_unlimited_money():
    gas = Apply("SUB", (Symbol("GAS", 1), Concrete(34)))
    value = Symbol("SLOAD", 2, (Concrete(1),))
    assert classify_call(_site(gas, value)) is CallKind.GAS_UNLIMITED_MONEY


def test_every_site_gets_exactly_one_kind():
    for value in (None, Concrete(0), Concrete(5), Symbol("SLOAD", 1, (Concrete(0),))):
        kind = classify_call(_site(Symbol("GAS", 9), value))
        assert isinstance(kind, CallKind)


# --- loops ---------------------------------------------------------------------


def test_self_edge_is_smallest_loop():
    analysis = run_analysis(asm("@l", ">l", "JUMP"))
    loops = analysis.loops
    assert len(loops) == 1
    assert loops[0].head == 0
    assert loops[0].body == frozenset({0})


def test_counted_storage_loop_bound_and_limit():
    analysis = run_analysis(duei_defective())
    loops = analysis.loops
    assert len(loops) == 1
    assert loops[0].bound_slot == Concrete(0)
    assert loops[0].size_limited        # the body re-checks slot 0


def test_unchecked_storage_loop_is_unlimited():
    analysis = run_analysis(nc_defective())
    loops = analysis.loops
    assert len(loops) == 1
    assert loops[0].bound_slot == Concrete(0)
    assert not loops[0].size_limited


def test_shared_subroutine_flagged_as_loop():
    # deliberate over-approximation: the unioned CFG has a cycle through the
    # subroutine although no execution revisits it
    analysis = run_analysis(shared_subroutine())
    heads = {l.head for l in analysis.loops}
    sub_block = [b.id for b in analysis.cfg.blocks
                 if any(i.mnemonic == "POP" for i in b.instructions)]
    assert sub_block and sub_block[0] in heads


def test_loop_heads_match_bruteforce_on_random_reducible_cfgs():
    rng = Random(5)
    for _ in range(40):
        n, edges = random_reducible_cfg(rng)
        cfg = make_cfg(n, edges)
        ours = {l.head for l in detect_loops(cfg)}
        assert ours == oracle_loop_heads(n, edges)


def test_loop_heads_have_incoming_back_edge():
    for builder in (duei_defective, nc_defective, shared_subroutine):
        analysis = run_analysis(builder())
        for loop in analysis.loops:
            incoming = {e.src for e in analysis.cfg.edges if e.dst == loop.head}
            assert incoming & loop.body


def test_acyclic_cfg_has_no_loops():
    analysis = run_analysis(asm("CALLVALUE", ">t", "JUMPI", "STOP", "@t", "STOP"))
    assert analysis.loops == []


# --- functions and payability -----------------------------------------------


def test_dispatcher_functions_and_selectors():
    analysis = run_analysis(two_function_dispatcher())
    selectors = {f.selector for f in analysis.functions if f.selector is not None}
    assert selectors == {SEL_DEPOSIT, SEL_WITHDRAW}
    fallbacks = [f for f in analysis.functions if f.is_fallback]
    assert len(fallbacks) == 1
    assert fallbacks[0].selector is None


def test_dispatcher_payability():
    analysis = run_analysis(two_function_dispatcher())
    by_sel = {f.selector: f for f in analysis.functions}
    assert by_sel[SEL_DEPOSIT].is_payable       # no value guard
    assert not by_sel[SEL_WITHDRAW].is_payable  # guard reverts on value


def test_no_jumpdest_yields_single_entry_function():
    analysis = run_analysis(asm(0, 0, "ADD", "STOP"))
    assert len(analysis.functions) == 1
    assert analysis.functions[0].entry_block == 0
    assert analysis.functions[0].selector is None


def test_no_dispatcher_yields_fallback_at_first_jumpdest():
    analysis = run_analysis(asm(">fb", "JUMP", "@fb", "STOP"))
    assert len(analysis.functions) == 1
    fn = analysis.functions[0]
    assert fn.is_fallback
    assert analysis.cfg.block(fn.entry_block).starts_with_jumpdest()


def _guarded(failing_terminal: bool) -> bytes:
    tail = (0, "DUP1", "REVERT") if failing_terminal else (1, 0, "SSTORE", "STOP")
    return asm(
        ">fb", "JUMP",
        "@fb", "CALLVALUE", "ISZERO", ">ok", "JUMPI",
        *tail,
        "@ok", "STOP",
    )


def test_guard_with_reverting_branch_is_not_payable():
    analysis = run_analysis(_guarded(failing_terminal=True))
    assert not analysis.functions[0].is_payable


def test_guard_with_nonterminal_branch_stays_payable():
    analysis = run_analysis(_guarded(failing_terminal=False))
    assert analysis.functions[0].is_payable


def test_removing_guard_flips_to_payable():
    guarded = run_analysis(_guarded(failing_terminal=True))
    unguarded = run_analysis(asm(">fb", "JUMP", "@fb", "STOP"))
    assert not guarded.functions[0].is_payable
    assert unguarded.functions[0].is_payable


def test_functions_nonempty_for_any_nonempty_contract():
    from tests.contracts import fixture_corpus

    for code in fixture_corpus().values():
        analysis = run_analysis(code)
        assert len(analysis.functions) >= 1
        fallbacks = [f for f in analysis.functions if f.is_fallback]
        assert len(fallbacks) <= 1

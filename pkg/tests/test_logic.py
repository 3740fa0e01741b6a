"""Formula parsing, evaluation, CNF conversion, and the DPLL solver, checked
against an independent truth-table oracle."""

import random

import pytest

from conftest import brute_eval, brute_models, random_formula
from pprvari.logic import (
    AUX_PREFIX, And, ExprSyntaxError, FALSE, Implies, Not, Or, TRUE,
    Var, VarEq, atoms, enumerate_models, eval_partial, eval_total, parse_expr,
    render_expr, sat, to_cnf,
)


# ---------------------------------------------------------------------------
# Parsing

def test_parse_dm_enum_test():
    assert parse_expr("Pipe == Pipe2", "dm") == VarEq("Pipe", "Pipe2")


def test_parse_true_literal():
    assert parse_expr("true", "dm") is TRUE
    assert parse_expr("false", "dm") is FALSE


def test_parse_cdc_qualified_implication():
    f = parse_expr(
        "shiftfork_product#Lock1 => shiftfork_product#Pipe2 || shiftfork_product#Pipe3",
        "cdc")
    assert f == Implies(
        Var("shiftfork_product#Lock1"),
        Or((Var("shiftfork_product#Pipe2"), Var("shiftfork_product#Pipe3"))))


def test_parse_cdc_simple_rule():
    f = parse_expr("shiftfork_product#Pipe2 => shiftfork_process#Pipe2", "cdc")
    assert f == Implies(Var("shiftfork_product#Pipe2"), Var("shiftfork_process#Pipe2"))


def test_parse_ppr_word_operators():
    f = parse_expr("Lock1 implies Pipe2 OR Pipe3", "ppr")
    assert f == Implies(Var("Lock1"), Or((Var("Pipe2"), Var("Pipe3"))))


def test_parse_ppr_precedence_not_and_or_implies():
    f = parse_expr("NOT a AND b OR c implies d", "ppr")
    assert f == Implies(Or((And((Not(Var("a")), Var("b"))), Var("c"))), Var("d"))


def test_parse_parentheses_override():
    f = parse_expr("a && (b || c)", "dm")
    assert f == And((Var("a"), Or((Var("b"), Var("c")))))


def test_parse_reports_position():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("a && ", "dm")
    assert err.value.pos == 5


def test_parse_rejects_trailing_tokens():
    with pytest.raises(ExprSyntaxError):
        parse_expr("a b", "dm")


def test_render_round_trips():
    rng = random.Random(7)
    names = ["a", "b", "c", "d"]
    for _ in range(50):
        f = random_formula(rng, names)
        assert parse_expr(render_expr(f, "dm"), "dm") == f
        assert parse_expr(render_expr(f, "ppr"), "ppr") == f


# ---------------------------------------------------------------------------
# Three-valued evaluation

def test_or_short_circuits_on_true():
    assert eval_partial(Or((Var("X"), Var("Y"))), {"X": True}) is True


def test_implies_with_only_antecedent_known_is_unknown():
    assert eval_partial(Implies(Var("X"), Var("Y")), {"X": True}) is None


def test_false_literal_under_empty_assignment():
    assert eval_partial(FALSE, {}) is False


def test_and_false_dominates_unknown():
    assert eval_partial(And((Var("X"), Var("Y"))), {"X": False}) is False


def test_eval_partial_total_matches_classical():
    rng = random.Random(13)
    names = ["p", "q", "r"]
    for _ in range(100):
        f = random_formula(rng, names)
        assignment = {n: rng.random() < 0.5 for n in names}
        assert eval_partial(f, assignment) == brute_eval(f, assignment)


def test_eval_total_raises_on_missing_variable():
    with pytest.raises(ValueError, match="unassigned"):
        eval_total(And((Var("p"), Var("q"))), {"p": True})


def test_vareq_atoms_are_independent():
    f = And((VarEq("Pipe", "Pipe2"), Not(VarEq("Pipe", "Pipe3"))))
    assert eval_partial(f, {"Pipe=Pipe2": True, "Pipe=Pipe3": False}) is True


# ---------------------------------------------------------------------------
# CNF

def test_var_becomes_unit_clause():
    cnf = to_cnf(Var("X"))
    assert cnf.clauses == [[1]]
    assert cnf.var_table == {"X": 1}


def test_implication_becomes_single_clause_without_auxiliaries():
    cnf = to_cnf(Implies(Var("X"), Var("Y")))
    assert cnf.clauses == [[-1, 2]]
    assert all(not name.startswith(AUX_PREFIX) for name in cnf.var_table)


def test_cnf_models_match_brute_force():
    rng = random.Random(99)
    names = ["v0", "v1", "v2", "v3", "v4", "v5"]
    for _ in range(60):
        f = random_formula(rng, names, depth=3)
        cnf = to_cnf(f)
        for name in names:
            cnf.var_table.setdefault(name, len(cnf.var_table) + 1)
        models, truncated = enumerate_models(cnf, names, limit=1 << 12)
        assert not truncated
        expected = brute_models(f, names)
        key = lambda m: tuple(m[v] for v in names)
        assert sorted(models, key=key) == expected


# ---------------------------------------------------------------------------
# Satisfiability

def test_contradiction_is_unsat():
    cnf = to_cnf(And((Var("X"), Not(Var("X")))))
    assert sat(cnf) is None


def shift_fork_product_formula():
    """Hand-built formula of the shift-fork product feature tree."""
    mandatory = ["Barrel", "Screw", "Jack1", "Ring1", "O_Ring", "Fork", "Pipe", "Lock"]
    parts = [Var("root")]
    for m in mandatory:
        parts += [Implies(Var("root"), Var(m)), Implies(Var(m), Var("root"))]
    for parent, children, style in [
        ("Barrel", ["Barrel1_1", "Barrel1_2"], "plain"),
        ("Fork", ["Fork3", "Fork4", "Fork5"], "plain"),
        ("Pipe", ["Pipe8", "Pipe3", "Pipe2"], "alt"),
        ("Lock", ["Lock1", "Lock2", "Lock3"], "alt"),
    ]:
        for c in children:
            parts.append(Implies(Var(c), Var(parent)))
        if style == "alt":
            parts.append(Implies(Var(parent), Or(tuple(Var(c) for c in children))))
            for i in range(len(children)):
                for j in range(i + 1, len(children)):
                    parts.append(Not(And((Var(children[i]), Var(children[j])))))
    # mandatory leaves: Barrel1_1 and all three forks; Barrel1_2 stays optional
    parts.append(Implies(Var("Barrel"), Var("Barrel1_1")))
    for c in ("Fork3", "Fork4", "Fork5"):
        parts.append(Implies(Var("Fork"), Var(c)))
    parts += [
        Implies(Var("Lock1"), Or((Var("Pipe2"), Var("Pipe3")))),
        Implies(Var("Lock2"), Var("Pipe3")),
        Implies(Var("Lock3"), Var("Pipe8")),
        Implies(Or((Var("Pipe2"), Var("Pipe8"))), Var("Barrel1_2")),
    ]
    return And(tuple(parts))


def test_shift_fork_lock2_forces_pipe3():
    cnf = to_cnf(shift_fork_product_formula())
    witness = sat(cnf, {"Lock2": True, "root": True})
    assert witness is not None
    assert witness["Pipe3"] is True


def test_shift_fork_lock3_with_pipe3_is_unsat():
    cnf = to_cnf(shift_fork_product_formula())
    assert sat(cnf, {"Lock3": True, "Pipe3": True, "root": True}) is None


def test_sat_rejects_unknown_assumption():
    cnf = to_cnf(Var("X"))
    with pytest.raises(ValueError, match="unknown assumption"):
        sat(cnf, {"Y": True})


def test_sat_agrees_with_brute_force_up_to_twelve_variables():
    rng = random.Random(4242)
    names = [f"x{i}" for i in range(12)]
    for _ in range(40):
        f = random_formula(rng, names, depth=4)
        expected = bool(brute_models(f, sorted(atoms(f)) or ["x0"]))
        if not atoms(f):
            continue
        got = sat(to_cnf(f)) is not None
        assert got == expected


def test_sat_is_deterministic():
    f = shift_fork_product_formula()
    first = sat(to_cnf(f))
    for _ in range(3):
        assert sat(to_cnf(f)) == first


# ---------------------------------------------------------------------------
# Model enumeration

def test_enumerate_unsat_is_empty():
    cnf = to_cnf(And((Var("X"), Not(Var("X")))))
    models, truncated = enumerate_models(cnf, ["X"], limit=10)
    assert models == [] and not truncated


def test_enumerate_or_has_three_models():
    cnf = to_cnf(Or((Var("X"), Var("Y"))))
    models, truncated = enumerate_models(cnf, ["X", "Y"], limit=10)
    assert len(models) == 3 and not truncated
    assert models == brute_models(Or((Var("X"), Var("Y"))), ["X", "Y"])


def test_enumerate_shift_fork_concrete_features_has_six_models():
    concrete = ["Barrel1_1", "Barrel1_2", "Screw", "Jack1", "Ring1", "O_Ring",
                "Fork3", "Fork4", "Fork5", "Pipe8", "Pipe3", "Pipe2",
                "Lock1", "Lock2", "Lock3"]
    f = shift_fork_product_formula()
    cnf = to_cnf(f)
    models, truncated = enumerate_models(cnf, concrete, limit=100)
    assert not truncated
    assert len(models) == 6
    # cross-check against the oracle projected to the same variables
    all_vars = sorted(atoms(f))
    projected = {tuple(m[v] for v in concrete) for m in brute_models(f, all_vars)}
    assert len(projected) == 6


def test_enumerate_respects_limit_and_flags_truncation():
    cnf = to_cnf(Or((Var("X"), Var("Y"))))
    models, truncated = enumerate_models(cnf, ["X", "Y"], limit=2)
    assert len(models) == 2 and truncated


def test_enumerate_order_is_deterministic():
    cnf = to_cnf(Or((Var("X"), Var("Y"))))
    a = enumerate_models(cnf, ["X", "Y"], limit=10)
    b = enumerate_models(cnf, ["X", "Y"], limit=10)
    assert a == b

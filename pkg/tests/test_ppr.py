"""DSL parsing, serialization round-trips, validation, and constraint
evaluation against truth-table oracles."""

import itertools
import random

import pytest

from conftest import brute_eval
from pprvari.logic import Implies, Or, Var
from pprvari.ppr import (
    ConstraintDef, PprModel, PprParseError,
    concrete_members, eval_constraint, parse_ppr, validate_model, write_ppr,
)

# A compact case-study excerpt (abstract pipe, one pipe variant, abstract
# lock, one lock variant, insert/weld steps, a welding robot pair, and the
# lock-pipe constraint).  Referenced ids that the excerpt leaves out are
# stubbed so the model validates.
EXCERPT = '''
Product "Pipe": { name: "Abstract Pipe", isAbstract: true }
Product "Pipe2": { name: "Pipe 2",
  implements: ["Pipe"],
  excludes: [ "Pipe3", "Pipe8" ]
}

Product "Lock": { name: "Abstract Lock", isAbstract: true,
  requires: ["Pipe"]
}
Product "Lock1": { name: "Lock 1",
  implements: ["Lock"], excludes: [ "Lock2", "Lock3" ]
}

Process "InsertPipe": { name: "InsertPipe", isAbstract: true }
Process "InsertPipe2": { name: "InsertPipe2",
  implements: ["InsertPipe"],
  inputs: [ {productId: "Pipe2"} ],
  outputs: [ {OP1: {productId: "Pipe2"}} ],
  resources: [ { resourceId: "Linefeeds" } ]
}
Process "WeldLock": { name: "WeldLock", isAbstract: true,
  requires: [ "InsertLock", "InsertPipe" ],
  inputs: [ {productId: "Lock"}, {productId: "Pipe"} ],
  outputs: [ {OP2: {productId: "ForkProduct"}}],
  resources: [ {resourceId: "WeldingRobot"} ]
}
Process "WeldLock1": { name: "WeldLock1",
  implements: [ "WeldLock" ], inputs: [ "Lock1" ]
}

Resource "WeldingRobot": { name: "WeldingRobot",
  isAbstract: true }
Resource "LaserWeldingRobot_01":{ name: "LaserWeldingRobot_01",
  implements: [ "LaserWeldingRobots" ]
}

Constraint "C1": {
  definition: "Lock1,Pipe2,Pipe3 -> Lock1 implies Pipe2 OR Pipe3"
}
'''

STUBS = '''
Product "Pipe3": { name: "Pipe 3", implements: ["Pipe"], excludes: ["Pipe2", "Pipe8"] }
Product "Pipe8": { name: "Pipe 8", implements: ["Pipe"], excludes: ["Pipe2", "Pipe3"] }
Product "Lock2": { name: "Lock 2", implements: ["Lock"], excludes: ["Lock1", "Lock3"] }
Product "Lock3": { name: "Lock 3", implements: ["Lock"], excludes: ["Lock1", "Lock2"] }
Product "ForkProduct": { name: "ForkProduct" }
Process "InsertLock": { name: "InsertLock", isAbstract: true }
Resource "Linefeeds": { name: "Linefeeds", isAbstract: true }
Resource "LaserWeldingRobots": { name: "LaserWeldingRobots", isAbstract: true,
  implements: ["WeldingRobot"] }
'''


def test_excerpt_parses_to_expected_units():
    model, warnings = parse_ppr(EXCERPT)
    assert list(model.products) == ["Pipe", "Pipe2", "Lock", "Lock1"]
    assert list(model.processes) == ["InsertPipe", "InsertPipe2", "WeldLock", "WeldLock1"]
    assert list(model.resources) == ["WeldingRobot", "LaserWeldingRobot_01"]
    assert list(model.constraints) == ["C1"]
    assert model.products["Pipe"].is_abstract
    assert model.products["Pipe2"].implements == ["Pipe"]
    assert model.processes["InsertPipe2"].inputs == ["Pipe2"]
    assert model.processes["InsertPipe2"].outputs == [("OP1", "Pipe2")]
    assert model.processes["InsertPipe2"].required_resources == ["Linefeeds"]
    assert model.processes["WeldLock1"].inputs == ["Lock1"]  # bare-string form
    c1 = model.constraints["C1"]
    assert c1.scope == ["Lock1", "Pipe2", "Pipe3"]
    assert c1.expr == Implies(Var("Lock1"), Or((Var("Pipe2"), Var("Pipe3"))))


def test_empty_source_gives_empty_model():
    model, warnings = parse_ppr("")
    assert not model.products and not model.processes and not model.resources
    assert not model.constraints and not model.attribute_defs
    assert warnings == []


def test_unresolved_reference_is_a_validation_diagnostic():
    model, _ = parse_ppr('Product "P": { name: "P", implements: ["Q"] }')
    diagnostics = validate_model(model)
    assert any("unresolved reference 'Q'" in d.message for d in diagnostics)
    assert all(d.unit_id == "P" for d in diagnostics)


def test_duplicate_id_is_a_parse_error():
    with pytest.raises(PprParseError, match="duplicate"):
        parse_ppr('Product "P": { name: "a" }\nProduct "P": { name: "b" }')


def test_unknown_keyword_is_a_syntax_error():
    with pytest.raises(PprParseError) as err:
        parse_ppr('Gादget "X": { }')
    assert any(d.severity == "error" for d in err.value.diagnostics)


def test_unbalanced_braces_is_a_syntax_error():
    with pytest.raises(PprParseError):
        parse_ppr('Product "P": { name: "P"')


def test_unknown_property_becomes_attribute_with_warning():
    model, warnings = parse_ppr('Process "W": { name: "W", deltaFile: "!DLock1" }')
    assert model.processes["W"].attributes == {"deltaFile": "!DLock1"}
    assert any("deltaFile" in w.message and w.severity == "warning" for w in warnings)


def test_line_comments_are_ignored():
    model, _ = parse_ppr('// heading\nProduct "P": { name: "P" } // tail\n')
    assert list(model.products) == ["P"]


# ---------------------------------------------------------------------------
# write_ppr round-trips

def test_write_empty_model_is_empty():
    assert write_ppr(PprModel()) == ""


def test_excerpt_round_trips():
    model, _ = parse_ppr(EXCERPT)
    text = write_ppr(model)
    again, _ = parse_ppr(text)
    assert again == model


def test_round_trip_is_stable():
    model, _ = parse_ppr(EXCERPT + STUBS)
    once = write_ppr(model)
    twice = write_ppr(parse_ppr(once)[0])
    assert once == twice


def test_delta_attribute_survives_round_trip():
    text = 'Process "WeldLock1": { name: "WeldLock1", deltaFile: "!DLock1" }'
    model, _ = parse_ppr(text)
    assert 'deltaFile: "!DLock1"' in write_ppr(model)
    again, _ = parse_ppr(write_ppr(model))
    assert again == model


def test_declaration_order_is_preserved():
    ids = [f"U{i}" for i in range(12)]
    text = "\n".join(f'Product "{u}": {{ name: "{u}" }}' for u in ids)
    model, _ = parse_ppr(text)
    assert list(model.products) == ids
    assert list(parse_ppr(write_ppr(model))[0].products) == ids


# ---------------------------------------------------------------------------
# Validation

def test_excerpt_with_stubs_validates_cleanly():
    model, _ = parse_ppr(EXCERPT + STUBS)
    assert validate_model(model) == []


def test_self_implementing_product_is_a_cycle():
    model, _ = parse_ppr('Product "Pipe2": { name: "P", implements: ["Pipe2"] }')
    diagnostics = validate_model(model)
    assert any("cycle" in d.message and d.rule == "product implements" for d in diagnostics)


def test_category_mismatch_is_reported():
    text = '''
    Product "Thing": { name: "Thing" }
    Process "Step": { name: "Step", resources: [ {resourceId: "Thing"} ] }
    '''
    model, _ = parse_ppr(text)
    diagnostics = validate_model(model)
    assert any("does not name a resource" in d.message for d in diagnostics)


def test_excludes_symmetry_is_materialized_on_parse():
    model, _ = parse_ppr('''
    Product "A": { name: "A", excludes: ["B"] }
    Product "B": { name: "B" }
    ''')
    assert "A" in model.products["B"].excludes
    assert validate_model(model) == []


def test_children_on_processes_is_rejected():
    model, _ = parse_ppr('Process "S": { name: "S", children: ["T"] }\nProcess "T": { name: "T" }')
    diagnostics = validate_model(model)
    assert any("only valid on products" in d.message for d in diagnostics)


# ---------------------------------------------------------------------------
# Constraint evaluation

def c1() -> ConstraintDef:
    model, _ = parse_ppr(EXCERPT)
    return model.constraints["C1"]


def test_c1_true_when_pipe3_selected():
    assert eval_constraint(c1(), {"Lock1": True, "Pipe2": False, "Pipe3": True}) is True


def test_c1_vacuous_when_lock1_unselected():
    assert eval_constraint(c1(), {"Lock1": False, "Pipe2": False, "Pipe3": False}) is True


def test_c1_false_when_no_pipe_selected():
    assert eval_constraint(c1(), {"Lock1": True, "Pipe2": False, "Pipe3": False}) is False


def test_eval_constraint_requires_total_scope():
    with pytest.raises(ValueError, match="unassigned"):
        eval_constraint(c1(), {"Lock1": True})


def test_eval_constraint_matches_truth_table_oracle():
    rng = random.Random(31)
    constraint = c1()
    for bits in itertools.product([False, True], repeat=3):
        assignment = dict(zip(constraint.scope, bits))
        assert eval_constraint(constraint, assignment) == brute_eval(constraint.expr, assignment)


# ---------------------------------------------------------------------------
# concrete_members

def test_pipe_members_in_declaration_order(shiftfork_model):
    assert concrete_members(shiftfork_model, "Pipe") == ["Pipe8", "Pipe3", "Pipe2"]


def test_abstract_without_implementers_has_no_members():
    model, _ = parse_ppr('Product "A": { name: "A", isAbstract: true }')
    assert concrete_members(model, "A") == []


def test_members_are_transitive():
    model, _ = parse_ppr('''
    Product "A": { name: "A", isAbstract: true }
    Product "B": { name: "B", isAbstract: true, implements: ["A"] }
    Product "C": { name: "C", implements: ["B"] }
    ''')
    assert concrete_members(model, "A") == ["C"]


def test_concrete_members_rejects_non_abstract():
    model, _ = parse_ppr('Product "A": { name: "A" }')
    with pytest.raises(ValueError, match="not abstract"):
        concrete_members(model, "A")


def test_concrete_members_rejects_unknown_id():
    with pytest.raises(KeyError):
        concrete_members(PprModel(), "nope")

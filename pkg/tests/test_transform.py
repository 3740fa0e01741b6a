"""Derivation of the three models and the cross-model rules, anchored on the
shift-fork worked example plus structural identities on generated models."""

import random

from conftest import random_ppr_model
from pprvari.logic import render_expr
from pprvari.transform import (
    component_products, model_statistics, portfolio_products, transform,
)
from pprvari.vmodels import GROUP_ALTERNATIVE, GROUP_OR, MANDATORY, OPTIONAL


# ---------------------------------------------------------------------------
# Product feature model

def test_alternative_groups_match_the_reference_tree(shiftfork_output):
    fm = shiftfork_output.product_fm
    assert fm.features["Pipe"].group == GROUP_ALTERNATIVE
    assert fm.children("Pipe") == ["Pipe8", "Pipe3", "Pipe2"]
    assert fm.features["Lock"].group == GROUP_ALTERNATIVE
    assert fm.children("Lock") == ["Lock1", "Lock2", "Lock3"]


def test_cross_tree_constraints_match_the_reference_four(shiftfork_output):
    rendered = {render_expr(c) for c in shiftfork_output.product_fm.constraints}
    assert rendered == {
        "Lock1 => Pipe2 || Pipe3",
        "Lock2 => Pipe3",
        "Lock3 => Pipe8",
        "Pipe2 || Pipe8 => Barrel1_2",
    }


def test_part_coverage_drives_optionality(shiftfork_output):
    fm = shiftfork_output.product_fm
    assert fm.features["Barrel1_1"].variability == MANDATORY
    assert fm.features["Barrel1_2"].variability == OPTIONAL
    for fid in ("Screw", "Jack1", "Ring1", "O_Ring", "Fork3", "Fork4", "Fork5",
                "Barrel", "Fork", "Pipe", "Lock"):
        assert fm.features[fid].variability == MANDATORY, fid


def test_abstract_products_become_abstract_features(shiftfork_output):
    fm = shiftfork_output.product_fm
    for fid in ("Barrel", "Fork", "Pipe", "Lock"):
        assert fm.features[fid].abstract
    assert fm.features[fm.root].abstract


def test_portfolio_and_intermediates_stay_out_of_the_tree(shiftfork_model, shiftfork_output):
    assert portfolio_products(shiftfork_model) == {"ShiftFork1", "ShiftFork2", "ShiftFork3", "ShiftFork4"}
    fm = shiftfork_output.product_fm
    for absent in ("ShiftFork1", "ShiftFork2", "ShiftFork3", "ShiftFork4", "ForkProduct"):
        assert absent not in fm.features


def test_feature_count_identity_on_the_sample(shiftfork_model, shiftfork_output):
    components = component_products(shiftfork_model)
    assert len(components) == 19
    assert len(shiftfork_output.product_fm.features) == len(components) + 1 == 20


def test_empty_model_gives_root_only_models():
    from pprvari.ppr import PprModel
    out = transform(PprModel(), "empty")
    assert list(out.product_fm.features) == ["empty_product"]
    assert list(out.resource_fm.features) == ["empty_resource"]
    assert out.process_dm.decisions == {}
    assert out.cdcs == []


# ---------------------------------------------------------------------------
# Process decision model

def test_insertpipe2_row_matches_the_reference_rows(shiftfork_output):
    dm = shiftfork_output.process_dm
    d = dm.decisions["InsertPipe2"]
    assert render_expr(d.visibility) == "Pipe == Pipe2"
    assert [render_expr(r) for r in d.rules] == ["InsertPipe2 => InsertPipe"]
    assert d.question == "Install InsertPipe2?"


def test_decision_count_identity_on_the_sample(shiftfork_model, shiftfork_output):
    components = component_products(shiftfork_model)
    expected = len(components) + len(shiftfork_model.processes)
    assert len(shiftfork_output.process_dm.decisions) == expected == 55


def test_abstract_processes_have_literal_false_visibility(shiftfork_output):
    from pprvari.logic import FALSE
    dm = shiftfork_output.process_dm
    for pid in ("InsertPipe", "InsertLock", "InstallLock", "WeldLock"):
        assert dm.decisions[pid].visibility is FALSE


def test_product_decisions_are_hidden_and_typed(shiftfork_output):
    from pprvari.logic import FALSE
    dm = shiftfork_output.process_dm
    pipe = dm.decisions["Pipe"]
    assert pipe.is_enum and pipe.range == ["Pipe8", "Pipe3", "Pipe2"]
    assert pipe.visibility is FALSE
    barrel = dm.decisions["Barrel1_2"]
    assert not barrel.is_enum and barrel.visibility is FALSE


def test_every_concrete_feature_id_is_a_decision_id(shiftfork_output):
    fm = shiftfork_output.product_fm
    dm = shiftfork_output.process_dm
    for f in fm.features.values():
        if f.id != fm.root and not f.abstract:
            assert f.id in dm.decisions


def test_product_constraints_become_rules_over_enum_atoms(shiftfork_output):
    dm = shiftfork_output.process_dm
    lock_rules = [render_expr(r) for r in dm.decisions["Lock"].rules]
    assert "Lock == Lock1 => Pipe == Pipe2 || Pipe == Pipe3" in lock_rules
    assert "Lock == Lock2 => Pipe == Pipe3" in lock_rules
    assert "Lock == Lock3 => Pipe == Pipe8" in lock_rules
    pipe_rules = [render_expr(r) for r in dm.decisions["Pipe"].rules]
    assert "Pipe == Pipe2 || Pipe == Pipe8 => Barrel1_2" in pipe_rules


def test_visibility_orders_inputs_before_predecessors(shiftfork_output):
    d = shiftfork_output.process_dm.decisions["PressBarrel1_2"]
    assert render_expr(d.visibility) == "Barrel1_2 && InsertBarrel1_2 && InsertPipe"


def test_model_without_processes_keeps_product_decisions(shiftfork_model):
    # without processes, ForkProduct is no longer an output-only intermediate,
    # so the component set grows by one
    from pprvari.ppr import PprModel
    stripped = PprModel(products=shiftfork_model.products,
                        constraints=shiftfork_model.constraints)
    out = transform(stripped, "shiftfork")
    assert len(out.process_dm.decisions) == len(component_products(stripped)) == 20
    assert all(d.id in out.product_fm.features for d in out.process_dm.decisions.values())


# ---------------------------------------------------------------------------
# Resource feature model

def test_resource_tree_matches_the_reference_layout(shiftfork_output):
    fm = shiftfork_output.resource_fm
    assert fm.features["Linefeeds"].group == GROUP_OR
    assert fm.children("Linefeeds") == ["LF_4", "LF_3"]
    assert fm.features["Linefeeds"].variability == OPTIONAL
    # sole implementers become mandatory children
    assert fm.features["SC_70"].variability == MANDATORY
    assert fm.features["LaserWeldingRobot_01"].variability == MANDATORY
    assert fm.features["WeldingRobots"].group == GROUP_OR
    assert fm.children("WeldingRobots") == ["LaserWeldingRobots", "UltrasonicWeldingRobots"]
    assert fm.features["MediumPartsPressinRobots"].group == GROUP_OR


def test_resource_count_identity_on_the_sample(shiftfork_model, shiftfork_output):
    assert len(shiftfork_output.resource_fm.features) == len(shiftfork_model.resources) + 1 == 17


def test_resource_tree_height(shiftfork_output):
    fm = shiftfork_output.resource_fm
    assert max(fm.depth(fid) for fid in fm.features) == 3


# ---------------------------------------------------------------------------
# Cross-model rules

def test_reference_rule_examples_are_derived(shiftfork_output):
    rendered = [r.render() for r in shiftfork_output.cdcs]
    assert "shiftfork_product#Pipe2 => shiftfork_process#Pipe2" in rendered
    assert "shiftfork_product#Pipe2 => shiftfork_process#InsertPipe2" in rendered
    assert "shiftfork_process#WeldLock => shiftfork_resource#WeldingRobots" in rendered
    assert ("shiftfork_product#Lock1 => shiftfork_product#Pipe2 || shiftfork_product#Pipe3"
            in rendered)


def test_rule_order_is_feature_then_input_then_resource_then_constraint(shiftfork_output):
    rendered = [r.render() for r in shiftfork_output.cdcs]
    a = rendered.index("shiftfork_product#Pipe2 => shiftfork_process#Pipe2")
    b = rendered.index("shiftfork_product#Pipe2 => shiftfork_process#InsertPipe2")
    c = rendered.index("shiftfork_process#WeldLock => shiftfork_resource#WeldingRobots")
    d = rendered.index("shiftfork_product#Lock1 => shiftfork_product#Pipe2 || shiftfork_product#Pipe3")
    assert a < b < c < d


def test_model_without_cross_references_has_no_rules():
    from pprvari.ppr import PprModel, Product
    model = PprModel()
    model.products["P"] = Product(id="P", name="P")
    out = transform(model, "m")
    assert [r.render() for r in out.cdcs] == ["m_product#P => m_process#P"]
    model2 = PprModel()
    out2 = transform(model2, "m")
    assert out2.cdcs == []


def test_every_rule_resolves_right_after_derivation(shiftfork_model, shiftfork_output):
    from pprvari.vmodels import resolve_cdcs
    missing = resolve_cdcs(shiftfork_output.cdcs, {
        "shiftfork_product": set(shiftfork_output.product_fm.features),
        "shiftfork_process": set(shiftfork_output.process_dm.decisions),
        "shiftfork_resource": set(shiftfork_output.resource_fm.features),
    })
    assert missing == []


# ---------------------------------------------------------------------------
# Statistics

def test_statistics_on_the_sample(shiftfork_model, shiftfork_output):
    report = model_statistics(shiftfork_model, shiftfork_output)
    assert report.ppr["n_products"] == 24
    assert report.ppr["n_product_components"] == 19
    assert report.ppr["n_processes"] == 36
    assert report.ppr["n_resources"] == 16
    assert report.product_fm["n_features"] == 20
    assert report.product_fm["n_xor"] == 2
    assert report.product_fm["n_or"] == 0
    assert report.product_fm["n_configs"] == 6
    assert report.product_fm["tree_height"] == 2
    assert report.process_dm["n_decisions"] == 55
    assert report.resource_fm["n_features"] == 17
    assert report.resource_fm["tree_height"] == 3
    assert report.n_cdc_rules == len(shiftfork_output.cdcs)


def test_statistics_on_the_empty_model():
    from pprvari.ppr import PprModel
    out = transform(PprModel(), "empty")
    report = model_statistics(PprModel(), out)
    assert report.ppr == {
        "n_products": 0, "n_product_components": 0, "n_processes": 0,
        "n_resources": 0, "n_constraints": 0,
    }
    assert report.product_fm["n_features"] == 1
    assert report.product_fm["n_configs"] == 1
    assert report.resource_fm["n_features"] == 1
    assert report.n_cdc_rules == 0


def test_visibility_count_matches_a_recount(shiftfork_model, shiftfork_output):
    from pprvari.logic import FALSE, TRUE
    report = model_statistics(shiftfork_model, shiftfork_output)
    recount = sum(
        1 for d in shiftfork_output.process_dm.decisions.values()
        if d.visibility not in (TRUE, FALSE))
    assert report.process_dm["n_visibility"] == recount == 32


# ---------------------------------------------------------------------------
# Count identities on generated models

def test_count_identities_on_generated_models():
    rng = random.Random(1234)
    for i in range(50):
        model, _ = random_ppr_model(rng)
        out = transform(model, f"gen{i}")
        components = component_products(model)
        assert len(out.product_fm.features) == len(components) + 1
        assert len(out.process_dm.decisions) == len(components) + len(model.processes)
        assert len(out.resource_fm.features) == len(model.resources) + 1
        concrete = [f for f in out.product_fm.features.values()
                    if f.id != out.product_fm.root and not f.abstract]
        for f in concrete:
            assert f.id in out.process_dm.decisions


def test_transformation_is_deterministic(shiftfork_model):
    from pprvari.vmodels import cdc_write, dm_write, fm_write
    first = transform(shiftfork_model, "shiftfork")
    second = transform(shiftfork_model, "shiftfork")
    assert fm_write(first.product_fm) == fm_write(second.product_fm)
    assert dm_write(first.process_dm) == dm_write(second.process_dm)
    assert fm_write(first.resource_fm) == fm_write(second.resource_fm)
    assert cdc_write(first.cdcs) == cdc_write(second.cdcs)

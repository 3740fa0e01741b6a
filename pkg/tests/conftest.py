"""Shared fixtures: the bundled sample, independent brute-force oracles, and
seeded random model generators used by the property suites."""

from __future__ import annotations

import itertools
import random

import pytest

from pprvari.engine import StagedSession, Workspace
from pprvari.logic import And, Bool, Formula, Implies, Not, Or, Var, VarEq, atom_key
from pprvari.ppr import (
    ConstraintDef, PprModel, Process, Product, Resource, parse_ppr,
)
from pprvari.samples import shift_fork_ppr_path
from pprvari.transform import transform
from pprvari.vmodels import mandatory_closure


# ---------------------------------------------------------------------------
# Independent oracle: classical evaluation and brute-force enumeration.
# Deliberately written from scratch; the production code never calls this.

def brute_eval(f: Formula, assignment: dict) -> bool:
    if isinstance(f, Bool):
        return f.value
    if isinstance(f, (Var, VarEq)):
        return assignment[atom_key(f)]
    if isinstance(f, Not):
        return not brute_eval(f.child, assignment)
    if isinstance(f, And):
        return all(brute_eval(c, assignment) for c in f.children)
    if isinstance(f, Or):
        return any(brute_eval(c, assignment) for c in f.children)
    if isinstance(f, Implies):
        return (not brute_eval(f.lhs, assignment)) or brute_eval(f.rhs, assignment)
    raise TypeError(f)


def brute_models(f: Formula, variables: list) -> list:
    """All satisfying total assignments over `variables`, sorted."""
    models = []
    for bits in itertools.product([False, True], repeat=len(variables)):
        assignment = dict(zip(variables, bits))
        if brute_eval(f, assignment):
            models.append(assignment)
    models.sort(key=lambda m: tuple(m[v] for v in variables))
    return models


# ---------------------------------------------------------------------------
# Random formulas

def random_formula(rng: random.Random, variables: list, depth: int = 3) -> Formula:
    if depth == 0 or rng.random() < 0.3:
        v = Var(rng.choice(variables))
        return Not(v) if rng.random() < 0.3 else v
    kind = rng.choice(["and", "or", "implies", "not"])
    if kind == "not":
        return Not(random_formula(rng, variables, depth - 1))
    if kind == "implies":
        return Implies(random_formula(rng, variables, depth - 1),
                       random_formula(rng, variables, depth - 1))
    parts = tuple(random_formula(rng, variables, depth - 1)
                  for _ in range(rng.randint(2, 3)))
    return And(parts) if kind == "and" else Or(parts)


# ---------------------------------------------------------------------------
# The bundled shift-fork sample

@pytest.fixture(scope="session")
def shiftfork_model():
    model, _ = parse_ppr(shift_fork_ppr_path().read_text(encoding="utf-8"))
    return model


@pytest.fixture(scope="session")
def shiftfork_output(shiftfork_model):
    return transform(shiftfork_model, "shiftfork")


@pytest.fixture()
def shiftfork_session(shiftfork_model, shiftfork_output):
    ws = Workspace(ppr=shiftfork_model, name="shiftfork", output=shiftfork_output)
    return StagedSession.create(ws)


def canonical_selection(product_fm) -> set:
    """The documented walk-through configuration: Pipe2 + Lock1 (+ forced Barrel1_2)."""
    return mandatory_closure(product_fm, {"Pipe2", "Lock1", "Barrel1_2"})


CANONICAL_RESOURCES = {"LF_4", "SC_70", "LaserWeldingRobot_01", "PR_04"}


def run_canonical_walk(session) -> list:
    """Drive the session through the {Pipe2, Lock1} exploration; returns the
    visible-set batches."""
    violations = session.set_product_config(canonical_selection(session.workspace.product_fm))
    assert violations == []
    batches = []
    while True:
        visible = session.visible_decisions()
        if not visible:
            break
        batches.append(list(visible))
        for decision_id in visible:
            session.take_decision(decision_id, True)
    return batches


# ---------------------------------------------------------------------------
# Random PPR models (always valid, always transformable)

def random_ppr_model(rng: random.Random) -> tuple:
    """Returns (model, valid_product_selection).

    Shape: a few alternative groups (abstract product + excluding options),
    free parts, one optional sub-assembly, and two or three portfolio variants
    whose part lists drive optionality.  Processes form a two-layer DAG:
    insert steps per part, then assembly steps requiring earlier steps.
    """
    model = PprModel()
    groups = []
    for g in range(rng.randint(1, 3)):
        head = f"G{g}"
        options = [f"G{g}X{i}" for i in range(rng.randint(2, 4))]
        model.products[head] = Product(id=head, name=head, is_abstract=True)
        for opt in options:
            model.products[opt] = Product(
                id=opt, name=opt, implements=[head],
                excludes=[o for o in options if o != opt])
        groups.append((head, options))

    frees = [f"P{i}" for i in range(rng.randint(2, 5))]
    for pid in frees:
        model.products[pid] = Product(id=pid, name=pid)

    # one part unique to each portfolio variant keeps the variants pairwise
    # non-subsumed; the always-shared frees[0] keeps them overlapping
    n_variants = rng.randint(2, 3)
    uniques = [f"U{v}" for v in range(n_variants)]
    for pid in uniques:
        model.products[pid] = Product(id=pid, name=pid)

    sub_parts = []
    if rng.random() < 0.6:
        model.products["Assembly"] = Product(
            id="Assembly", name="Assembly", is_abstract=True,
            children=["A1", "A2"])
        sub_parts = ["A1", "A2"]
        for pid in sub_parts:
            model.products[pid] = Product(id=pid, name=pid)

    # Portfolio variants: each picks one option per group and a subset of the
    # free parts; the first variant carries everything (so sub-assemblies are
    # subsumed and every part is coverable).
    picks = []
    for v in range(n_variants):
        pick = {head: rng.choice(options) for head, options in groups}
        picks.append(pick)
    variant_children = []
    for v, pick in enumerate(picks):
        children = list(pick.values())
        children.append(uniques[v])
        children += [p for p in frees if v == 0 or p == frees[0] or rng.random() < 0.7]
        children += sub_parts if (v == 0 or rng.random() < 0.5) else []
        variant_children.append(children)
        model.products[f"V{v}"] = Product(id=f"V{v}", name=f"V{v}", children=children)

    # Constraints satisfied by variant 0's bill of materials.
    chosen = set(variant_children[0])
    all_parts = [p for head, options in groups for p in options] + frees + sub_parts
    for i in range(rng.randint(0, 2)):
        lhs = rng.choice(all_parts)
        consequent_pool = sorted(chosen)
        rhs = rng.choice(consequent_pool)
        if lhs in chosen and rhs not in chosen:
            continue
        cid = f"C{i}"
        model.constraints[cid] = ConstraintDef(
            cid, [lhs, rhs], Implies(Var(lhs), Var(rhs)))

    # Resources: a couple of or-groups.
    resource_groups = []
    for r in range(rng.randint(1, 3)):
        head = f"RG{r}"
        members = [f"RG{r}M{i}" for i in range(rng.randint(1, 3))]
        model.resources[head] = Resource(id=head, name=head, is_abstract=True)
        for m in members:
            model.resources[m] = Resource(id=m, name=m, implements=[head])
        resource_groups.append(head)

    # Layer 1: one insert step per concrete part (variant steps per group option).
    layer1 = []
    for head, options in groups:
        abstract_id = f"Ins{head}"
        model.processes[abstract_id] = Process(id=abstract_id, name=abstract_id, is_abstract=True)
        for opt in options:
            pid = f"Ins{opt}"
            model.processes[pid] = Process(
                id=pid, name=pid, implements=[abstract_id], inputs=[opt],
                required_resources=[rng.choice(resource_groups)])
        layer1.append(abstract_id)
    for part in frees + sub_parts:
        pid = f"Ins{part}"
        model.processes[pid] = Process(
            id=pid, name=pid, inputs=[part],
            required_resources=[rng.choice(resource_groups)] if rng.random() < 0.7 else [])
        layer1.append(pid)

    # Layer 2: assembly steps requiring earlier steps.
    for i in range(rng.randint(1, 3)):
        pid = f"Asm{i}"
        part = rng.choice(frees)
        predecessors = rng.sample(layer1, k=min(len(layer1), rng.randint(1, 2)))
        model.processes[pid] = Process(
            id=pid, name=pid, inputs=[part], requires=predecessors,
            required_resources=[rng.choice(resource_groups)] if rng.random() < 0.5 else [])

    # Valid selection: variant 0's parts.
    selection = set(variant_children[0])
    from pprvari.ppr import _normalize_excludes
    _normalize_excludes(model)
    return model, selection


def random_workspace(rng: random.Random):
    model, selection = random_ppr_model(rng)
    output = transform(model, "sample")
    ws = Workspace(ppr=model, name="sample", output=output)
    return ws, selection

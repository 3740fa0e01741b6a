"""Derivation of the three variability models and their cross-model rules.

One validated PPR model fans out into:

* a product feature model -- structure from ``implements``/``children``,
  alternative groups detected from pairwise exclusions, optionality derived
  from portfolio coverage (a part carried by every final product is mandatory);
* a process decision model -- one Boolean decision per process plus hidden
  product decisions that the configuration-space reduction presets;
* a resource feature model -- implementer sets become or-groups, a sole
  implementer becomes a mandatory child;
* cross-model rules linking the three.

All outputs are deterministic: same input, byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .logic import Formula, Implies, Not, And, Or, Var, VarEq, and_, or_, FALSE, TRUE, atoms
from .ppr import PprModel, validate_model, write_ppr
from .vmodels import (
    Decision, DecisionModel, Feature, FeatureModel, CdcRule,
    GROUP_ALTERNATIVE, GROUP_OR, MANDATORY, OPTIONAL,
    cdc_write, count_configurations, dm_write, fm_write, resolve_cdcs,
)


class TransformError(ValueError):
    pass


@dataclass
class TransformOutput:
    product_fm: FeatureModel
    process_dm: DecisionModel
    resource_fm: FeatureModel
    cdcs: list
    warnings: list = field(default_factory=list)


@dataclass
class StatsReport:
    ppr: dict
    product_fm: dict
    process_dm: dict
    resource_fm: dict
    n_cdc_rules: int


# ---------------------------------------------------------------------------
# Product classification

def portfolio_products(ppr: PprModel) -> set:
    """Final (sellable) products: maximal composites that share parts with one
    another.  A composite subsumed by another composite's part list is a
    sub-assembly and stays in the feature tree; the portfolio members stay out
    of the tree and their part coverage decides optionality instead."""
    containers = [p for p in ppr.products.values() if p.children]
    subsumed = set()
    for x in containers:
        for y in containers:
            if x.id != y.id and set(x.children) <= set(y.children):
                subsumed.add(x.id)
                break
    maximal = [p for p in containers if p.id not in subsumed]
    out = set()
    for x in maximal:
        for y in maximal:
            if x.id != y.id and set(x.children) & set(y.children):
                out.add(x.id)
                break
    return out


def intermediate_products(ppr: PprModel) -> set:
    """Products that exist only as process outputs and play no structural role."""
    inputs = {pid for proc in ppr.processes.values() for pid in proc.inputs}
    outputs = {pid for proc in ppr.processes.values() for _, pid in proc.outputs}
    structural = set()
    for p in ppr.products.values():
        if p.implements or p.children or p.excludes or p.requires:
            structural.add(p.id)
        for rel in (p.implements, p.children, p.excludes, p.requires):
            structural.update(rel)
    for c in ppr.constraints.values():
        structural.update(c.scope)
    return {
        p.id for p in ppr.products.values()
        if p.id in outputs and p.id not in inputs and p.id not in structural
    }


def component_products(ppr: PprModel) -> list:
    """Products that become features, in declaration order."""
    skip = portfolio_products(ppr) | intermediate_products(ppr)
    return [p.id for p in ppr.products.values() if p.id not in skip]


# ---------------------------------------------------------------------------
# Shared tree building

def _assign_parents(units: dict, included: list, warnings: list, model_id: str) -> dict:
    """Feature parent for every included unit; multi-parent implements falls
    back to the root and is recorded as an attribute."""
    parents: dict = {}
    extra_attrs: dict = {}
    included_set = set(included)
    for uid in included:
        unit = units[uid]
        impl = [p for p in unit.implements if p in included_set]
        if len(impl) == 1:
            parents[uid] = impl[0]
            continue
        if len(impl) > 1:
            warnings.append(
                f"{model_id}: {uid} implements several parents ({', '.join(impl)}); "
                "kept as feature attribute"
            )
            extra_attrs[uid] = {"implements": ",".join(impl)}
        owner = next((o for o in included if uid in units[o].children), None)
        parents[uid] = owner  # None means root
    return parents, extra_attrs


def _implementer_groups(units: dict, included: list, parents: dict) -> dict:
    """abstract parent id -> ordered implementer children (via implements only)."""
    groups: dict = {}
    for uid in included:
        parent = parents.get(uid)
        if parent is not None and parent in units[uid].implements:
            groups.setdefault(parent, []).append(uid)
    return {pid: members for pid, members in groups.items() if units[pid].is_abstract}


def _pairwise_excluding(units: dict, members: list) -> bool:
    if len(members) < 2:
        return False
    for i, a in enumerate(members):
        for b in members[i + 1:]:
            if b not in units[a].excludes:
                return False
    return True


# ---------------------------------------------------------------------------
# Product feature model

def to_product_fm(ppr: PprModel, name: str) -> tuple:
    """Product feature model plus transformation warnings."""
    warnings: list = []
    root_id = f"{name}_product"
    fm = FeatureModel(model_id=root_id, root=root_id)
    fm.features[root_id] = Feature(id=root_id, name=root_id, abstract=True)

    included = component_products(ppr)
    parents, extra_attrs = _assign_parents(ppr.products, included, warnings, root_id)
    groups = _implementer_groups(ppr.products, included, parents)

    for uid in included:
        unit = ppr.products[uid]
        attributes = dict(unit.attributes)
        attributes.update(extra_attrs.get(uid, {}))
        fm.features[uid] = Feature(
            id=uid, name=unit.name, abstract=unit.is_abstract,
            parent=parents.get(uid) or root_id, attributes=attributes,
        )

    for parent_id, members in groups.items():
        mixed = [c for c in fm.children(parent_id) if c not in members]
        if mixed:
            warnings.append(
                f"{root_id}: {parent_id} mixes implementers and parts; no group formed")
            continue
        if len(members) < 2:
            continue
        fm.features[parent_id].group = (
            GROUP_ALTERNATIVE if _pairwise_excluding(ppr.products, members) else GROUP_OR
        )

    _derive_product_variability(ppr, fm, included)

    # Cross-tree constraints: requires, unabsorbed excludes, then PPR constraints
    # over all-product scopes, each in declaration order.
    included_set = set(included)
    for uid in included:
        for target in ppr.products[uid].requires:
            if target in included_set:
                fm.constraints.append(Implies(Var(uid), Var(target)))
    seen_pairs = set()
    for uid in included:
        for other in ppr.products[uid].excludes:
            if other not in included_set:
                continue
            pair = tuple(sorted((uid, other)))
            if pair in seen_pairs:
                continue
            seen_pairs.add(pair)
            parent = fm.features[uid].parent
            absorbed = (
                fm.features[parent].group == GROUP_ALTERNATIVE
                and fm.features[other].parent == parent
            )
            if not absorbed:
                fm.constraints.append(Not(And((Var(uid), Var(other)))))
    for c in ppr.constraints.values():
        if c.scope and all(v in ppr.products for v in c.scope):
            if all(v in included_set for v in c.scope):
                fm.constraints.append(c.expr)
            else:
                warnings.append(f"{root_id}: constraint {c.id} touches non-component products; skipped")
    fm.check()
    return fm, warnings


def _derive_product_variability(ppr: PprModel, fm: FeatureModel, included: list) -> None:
    """Optionality from portfolio coverage: a feature is mandatory when every
    final product carries a part from its subtree; with no portfolio products
    everything defaults to mandatory."""
    portfolio = [ppr.products[pid] for pid in portfolio_products(ppr)]
    for uid in included:
        feature = fm.features[uid]
        parent = fm.features[feature.parent]
        if parent.group is not None:
            feature.variability = OPTIONAL  # ignored inside groups, kept canonical
            continue
        if not portfolio:
            feature.variability = MANDATORY
            continue
        subtree = set(fm.subtree(uid))
        covered_by_all = all(subtree.intersection(p.children) for p in portfolio)
        feature.variability = MANDATORY if covered_by_all else OPTIONAL


# ---------------------------------------------------------------------------
# Process decision model

def _alternative_group_of(fm: FeatureModel, feature_id: str) -> str | None:
    parent = fm.features[feature_id].parent
    if parent is not None and fm.features[parent].group == GROUP_ALTERNATIVE:
        return parent
    return None


def _product_atom(fm: FeatureModel, product_id: str) -> Formula:
    """Condition stating that a product takes part in the configured product."""
    group = _alternative_group_of(fm, product_id)
    if group is not None:
        return VarEq(group, product_id)
    if fm.features[product_id].group == GROUP_ALTERNATIVE:
        members = fm.children(product_id)
        return or_([VarEq(product_id, m) for m in members])
    return Var(product_id)


def _translate_product_formula(fm: FeatureModel, f: Formula) -> Formula:
    if isinstance(f, Var):
        return _product_atom(fm, f.name) if f.name in fm.features else f
    if isinstance(f, Not):
        return Not(_translate_product_formula(fm, f.child))
    if isinstance(f, And):
        return And(tuple(_translate_product_formula(fm, c) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(_translate_product_formula(fm, c) for c in f.children))
    if isinstance(f, Implies):
        return Implies(_translate_product_formula(fm, f.lhs), _translate_product_formula(fm, f.rhs))
    return f


def to_process_dm(ppr: PprModel, name: str, product_fm: FeatureModel) -> DecisionModel:
    """One Boolean decision per process; hidden product decisions feed the
    visibility conditions and carry the translated product constraints."""
    dm = DecisionModel(model_id=f"{name}_process")

    # Product decisions, never shown (visibility false): enumerations for
    # alternative groups, Booleans for everything else.
    for fid, feature in product_fm.features.items():
        if fid == product_fm.root:
            continue
        if feature.group == GROUP_ALTERNATIVE:
            dm.decisions[fid] = Decision(
                id=fid, question=f"Which {fid} types?",
                range=list(product_fm.children(fid)), visibility=FALSE,
            )
        else:
            dm.decisions[fid] = Decision(
                id=fid, question=f"Install {fid}?", visibility=FALSE,
            )

    for proc in ppr.processes.values():
        if proc.is_abstract:
            dm.decisions[proc.id] = Decision(
                id=proc.id, question=f"Install {proc.id}?", visibility=FALSE,
            )
            continue
        conditions = []
        for input_id in proc.inputs:
            if input_id in product_fm.features:
                conditions.append(_product_atom(product_fm, input_id))
        for pred in proc.requires:
            conditions.append(Var(pred))
        dm.decisions[proc.id] = Decision(
            id=proc.id, question=f"Install {proc.id}?",
            visibility=and_(conditions) if conditions else TRUE,
        )

    # Rules: a concrete process pulls in the abstract steps it implements.
    for proc in ppr.processes.values():
        if proc.is_abstract:
            continue
        for parent in proc.implements:
            if parent in dm.decisions:
                dm.decisions[proc.id].rules.append(Implies(Var(proc.id), Var(parent)))

    # All-product PPR constraints become rules, attached to the decision of
    # the first variable (its enumeration group when it sits in one).
    for c in ppr.constraints.values():
        if not c.scope or not all(v in product_fm.features for v in c.scope):
            continue
        translated = _translate_product_formula(product_fm, c.expr)
        first = atoms(translated)[0].split("=", 1)[0]
        if first in dm.decisions:
            dm.decisions[first].rules.append(translated)
    dm.check()
    return dm


# ---------------------------------------------------------------------------
# Resource feature model

def to_resource_fm(ppr: PprModel, name: str) -> tuple:
    warnings: list = []
    root_id = f"{name}_resource"
    fm = FeatureModel(model_id=root_id, root=root_id)
    fm.features[root_id] = Feature(id=root_id, name=root_id, abstract=True)

    included = [r.id for r in ppr.resources.values()]
    parents, extra_attrs = _assign_parents(ppr.resources, included, warnings, root_id)
    groups = _implementer_groups(ppr.resources, included, parents)

    for uid in included:
        unit = ppr.resources[uid]
        attributes = dict(unit.attributes)
        attributes.update(extra_attrs.get(uid, {}))
        fm.features[uid] = Feature(
            id=uid, name=unit.name, abstract=unit.is_abstract,
            parent=parents.get(uid) or root_id,
            variability=OPTIONAL,
            attributes=attributes,
        )

    # Implementer sets of two or more become or-groups (a resource group means
    # "at least one will execute the step"); a sole implementer is a mandatory
    # child of its optional parent.
    for parent_id, members in groups.items():
        if len(members) >= 2:
            fm.features[parent_id].group = GROUP_OR
        else:
            fm.features[members[0]].variability = MANDATORY

    for uid in included:
        for target in ppr.resources[uid].requires:
            if target in fm.features:
                fm.constraints.append(Implies(Var(uid), Var(target)))
    for c in ppr.constraints.values():
        if c.scope and all(v in ppr.resources for v in c.scope):
            fm.constraints.append(c.expr)
    fm.check()
    return fm, warnings


# ---------------------------------------------------------------------------
# Cross-model rules

def qualify(model_id: str, element_id: str) -> str:
    return f"{model_id}#{element_id}"


def _qualify_formula(ppr: PprModel, name: str, f: Formula) -> Formula:
    if isinstance(f, Var):
        category = ppr.category_of(f.name)
        if category is None:
            return f
        return Var(qualify(f"{name}_{category}", f.name))
    if isinstance(f, Not):
        return Not(_qualify_formula(ppr, name, f.child))
    if isinstance(f, And):
        return And(tuple(_qualify_formula(ppr, name, c) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(_qualify_formula(ppr, name, c) for c in f.children))
    if isinstance(f, Implies):
        return Implies(_qualify_formula(ppr, name, f.lhs), _qualify_formula(ppr, name, f.rhs))
    return f


def derive_cdcs(ppr: PprModel, name: str, product_fm: FeatureModel,
                process_dm: DecisionModel, resource_fm: FeatureModel) -> list:
    """Cross-model rules, in a fixed order:

    (a) concrete product feature => same-named product decision,
    (b) concrete product feature => concrete process decisions consuming it,
    (c) process decision => required resource feature,
    (d) every PPR constraint over qualified references.
    """
    pm, dm, rm = f"{name}_product", f"{name}_process", f"{name}_resource"
    rules: list = []
    concrete_features = [
        fid for fid, f in product_fm.features.items()
        if fid != product_fm.root and not f.abstract
    ]
    for fid in concrete_features:
        rules.append(CdcRule(Var(qualify(pm, fid)), Var(qualify(dm, fid))))
    for proc in ppr.processes.values():
        if proc.is_abstract:
            continue
        for input_id in proc.inputs:
            if input_id in concrete_features:
                rules.append(CdcRule(Var(qualify(pm, input_id)), Var(qualify(dm, proc.id))))
    for proc in ppr.processes.values():
        for resource_id in proc.required_resources:
            if resource_id in resource_fm.features:
                rules.append(CdcRule(Var(qualify(dm, proc.id)), Var(qualify(rm, resource_id))))
    for c in ppr.constraints.values():
        qualified = _qualify_formula(ppr, name, c.expr)
        if isinstance(qualified, Implies):
            rules.append(CdcRule(qualified.lhs, qualified.rhs))
        else:
            rules.append(CdcRule(TRUE, qualified))
    return rules


# ---------------------------------------------------------------------------
# Entry point and statistics

def transform(ppr: PprModel, name: str) -> TransformOutput:
    problems = [d for d in validate_model(ppr) if d.severity == "error"]
    if problems:
        raise TransformError("model does not validate: " + "; ".join(d.render() for d in problems))
    product_fm, w1 = to_product_fm(ppr, name)
    process_dm = to_process_dm(ppr, name, product_fm)
    resource_fm, w2 = to_resource_fm(ppr, name)
    cdcs = derive_cdcs(ppr, name, product_fm, process_dm, resource_fm)
    out = TransformOutput(product_fm, process_dm, resource_fm, cdcs, warnings=w1 + w2)
    missing = resolve_cdcs(cdcs, {
        product_fm.model_id: set(product_fm.features),
        process_dm.model_id: set(process_dm.decisions),
        resource_fm.model_id: set(resource_fm.features),
    })
    if missing:
        raise TransformError(f"derived rules do not resolve: {missing}")
    return out


def _fm_stats(fm: FeatureModel, with_configs: bool, config_limit: int) -> dict:
    n_xor = sum(1 for f in fm.features.values() if f.group == GROUP_ALTERNATIVE and fm.children(f.id))
    n_or = sum(1 for f in fm.features.values() if f.group == GROUP_OR and fm.children(f.id))
    n_tree = sum(
        1 for f in fm.features.values()
        if f.parent is not None and fm.features[f.parent].group is None
    )
    height = max((fm.depth(fid) for fid in fm.features), default=0)
    stats = {
        "n_features": len(fm.features),
        "n_xor": n_xor,
        "n_or": n_or,
        "n_tree": n_tree,
        "tree_height": height,
        "n_constraints": len(fm.constraints),
    }
    if with_configs:
        count, truncated = count_configurations(fm, config_limit)
        stats["n_configs"] = count
        stats["configs_truncated"] = truncated
    return stats


def model_statistics(ppr: PprModel, out: TransformOutput, config_limit: int = 100000) -> StatsReport:
    components = component_products(ppr)
    n_requires = sum(len(u.requires) for _, u in ppr.all_units())
    n_excludes = sum(len(u.excludes) for _, u in ppr.all_units())
    ppr_stats = {
        "n_products": len(ppr.products),
        "n_product_components": len(components),
        "n_processes": len(ppr.processes),
        "n_resources": len(ppr.resources),
        # constraint definitions plus every directed requires/excludes edge
        "n_constraints": len(ppr.constraints) + n_requires + n_excludes,
    }
    dm_stats = {
        "n_decisions": len(out.process_dm.decisions),
        "n_rules": sum(len(d.rules) for d in out.process_dm.decisions.values()),
        # only non-literal visibility conditions count
        "n_visibility": sum(
            1 for d in out.process_dm.decisions.values() if d.visibility not in (TRUE, FALSE)
        ),
    }
    return StatsReport(
        ppr=ppr_stats,
        product_fm=_fm_stats(out.product_fm, True, config_limit),
        process_dm=dm_stats,
        resource_fm=_fm_stats(out.resource_fm, False, config_limit),
        n_cdc_rules=len(out.cdcs),
    )


def stats_to_json(report: StatsReport) -> str:
    return json.dumps(asdict(report), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Workspace layout: one directory holding the source model, the generated
# artifacts and (optionally) deltas plus session snapshots.

WORKSPACE_FILES = ("product.fm", "process.dm", "resource.fm", "links.cdc")


def write_workspace(ppr: PprModel, name: str, out_dir: Path) -> TransformOutput:
    out = transform(ppr, name)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "model.ppr").write_text(write_ppr(ppr), encoding="utf-8")
    (out_dir / "product.fm").write_text(fm_write(out.product_fm), encoding="utf-8")
    (out_dir / "process.dm").write_text(dm_write(out.process_dm), encoding="utf-8")
    (out_dir / "resource.fm").write_text(fm_write(out.resource_fm), encoding="utf-8")
    (out_dir / "links.cdc").write_text(cdc_write(out.cdcs), encoding="utf-8")
    (out_dir / "stats.json").write_text(stats_to_json(model_statistics(ppr, out)), encoding="utf-8")
    return out

"""Staged configuration: product selection, guided process exploration with
automatic configuration-space reduction, resource preselection, and the
permutation metric that quantifies the reduction.

A session walks forward through the stages product -> process -> resource ->
done.  The product selection presets the hidden product decisions of the
process decision model; visibility conditions then unfold the explorable
process steps batch by batch, and the recorded queue of taken decisions is the
production sequence.  Finishing the process stage preselects resource groups
from the cross-model rules; the final resource selection is validated against
the resource feature model and every cross-model rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .logic import Formula, Implies, Var, VarEq, eval_partial, render_expr
from .ppr import PprModel
from .transform import TransformOutput
from .vmodels import (
    DmAssignment, DmConfiguration, FmConfiguration,
    dm_atoms, dm_atoms_total, expand_selection, product_config_digest,
    resolve_cdcs, validate_fm_config,
)

STAGE_PRODUCT = "product"
STAGE_PROCESS = "process"
STAGE_RESOURCE = "resource"
STAGE_DONE = "done"


class EngineError(RuntimeError):
    pass


class StageError(EngineError):
    """Operation does not apply to the session's current stage."""


class DecisionError(EngineError):
    """Decision not visible, value out of range, or a rule was violated."""


@dataclass
class Workspace:
    ppr: PprModel
    name: str
    output: TransformOutput

    @property
    def product_fm(self):
        return self.output.product_fm

    @property
    def process_dm(self):
        return self.output.process_dm

    @property
    def resource_fm(self):
        return self.output.resource_fm

    @property
    def cdcs(self):
        return self.output.cdcs


@dataclass
class SpaceMetric:
    n: int
    r: int
    full_space: int
    stage_sizes: list
    reduced_space: int

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "full_space": str(self.full_space),
            "stage_sizes": list(self.stage_sizes),
            "reduced_space": str(self.reduced_space),
        }


@dataclass
class ResourcePreselection:
    required: list = field(default_factory=list)        # single features, must be selected
    required_groups: list = field(default_factory=list)  # at least one member each
    locked: list = field(default_factory=list)          # never referenced, stay deselected
    checks: list = field(default_factory=list)          # non-atomic consequents, validated later


def permutations(n: int, r: int) -> int:
    """Exact n!/(n-r)! as an arbitrary-precision integer."""
    if n < 0 or r < 0:
        raise ValueError("n and r must be non-negative")
    if r > n:
        raise ValueError(f"r={r} exceeds n={n}")
    return math.perm(n, r)


@dataclass
class StagedSession:
    workspace: Workspace
    stage: str = STAGE_PRODUCT
    product_cfg: FmConfiguration | None = None
    process_cfg: DmConfiguration | None = None
    resource_preselection: ResourcePreselection | None = None
    resource_cfg: FmConfiguration | None = None
    metrics_cache: SpaceMetric | None = None

    # -- construction -------------------------------------------------------

    @staticmethod
    def create(workspace: Workspace) -> "StagedSession":
        missing = resolve_cdcs(workspace.cdcs, {
            workspace.product_fm.model_id: set(workspace.product_fm.features),
            workspace.process_dm.model_id: set(workspace.process_dm.decisions),
            workspace.resource_fm.model_id: set(workspace.resource_fm.features),
        })
        if missing:
            refs = ", ".join(f"{m}#{e}" for m, e in missing)
            raise EngineError(f"workspace is inconsistent, unresolved references: {refs}")
        return StagedSession(workspace=workspace)

    # -- product stage ------------------------------------------------------

    def set_product_config(self, selected) -> list:
        """Returns violations (empty on success); success advances the stage
        and presets the process decision model."""
        if self.stage != STAGE_PRODUCT:
            raise StageError(f"product configuration is closed in stage {self.stage!r}")
        fm = self.workspace.product_fm
        cfg = FmConfiguration(model_id=fm.model_id, selected=set(selected))
        violations = validate_fm_config(fm, cfg)
        if violations:
            return violations
        cfg.selected = expand_selection(fm, cfg.selected)
        self.product_cfg = cfg
        self.stage = STAGE_PROCESS
        self.reduce_process_dm()
        return []

    # -- process stage ------------------------------------------------------

    def reduce_process_dm(self) -> list:
        """Preset the hidden product decisions from the product selection.

        Selected features preset their decision true, everything else false;
        alternative groups collapse onto the selected option so only matching
        process variants can ever become visible.
        """
        assert self.product_cfg is not None
        fm = self.workspace.product_fm
        dm = self.workspace.process_dm
        selected = self.product_cfg.selected
        cfg = DmConfiguration(
            model_id=dm.model_id,
            product_digest=product_config_digest(self.product_cfg),
        )
        seq = 0
        for decision in dm.decisions.values():
            if decision.id not in fm.features:
                continue  # process decisions have no preset
            if decision.is_enum:
                chosen = [opt for opt in decision.range if opt in selected]
                if chosen:
                    cfg.assignments.append(DmAssignment(decision.id, chosen[0], "preset", seq))
                    seq += 1
            else:
                cfg.assignments.append(
                    DmAssignment(decision.id, decision.id in selected, "preset", seq))
                seq += 1
        self.process_cfg = cfg
        self.metrics_cache = None
        return list(cfg.assignments)

    def _assigned_ids(self) -> set:
        return {a.decision for a in self.process_cfg.assignments}

    def visible_decisions(self) -> list:
        """Unassigned decisions whose visibility currently evaluates true,
        in document order.  Literal-false visibilities never show up; they are
        selectable only through rule propagation."""
        if self.stage != STAGE_PROCESS:
            raise StageError(f"no decisions to take in stage {self.stage!r}")
        return self._visible(self.workspace.process_dm, self.process_cfg.assignments)

    @staticmethod
    def _visible(dm, assignments) -> list:
        atoms = dm_atoms(dm, assignments)
        taken = {a.decision for a in assignments}
        out = []
        for decision in dm.decisions.values():
            if decision.id in taken:
                continue
            if eval_partial(decision.visibility, atoms) is True:
                out.append(decision.id)
        return out

    def take_decision(self, decision_id: str, value) -> list:
        """Record one user decision; returns the propagation log.

        Rules whose antecedent became true and whose consequent is a single
        positive literal fire automatically; any other rule that evaluates to
        false rolls the step back and raises.
        """
        if self.stage != STAGE_PROCESS:
            raise StageError(f"no decisions to take in stage {self.stage!r}")
        dm = self.workspace.process_dm
        decision = dm.decisions.get(decision_id)
        if decision is None:
            raise DecisionError(f"unknown decision {decision_id!r}")
        if decision_id not in self.visible_decisions():
            raise DecisionError(f"decision {decision_id!r} is not visible")
        if decision.is_enum:
            if value not in decision.range:
                raise DecisionError(f"{value!r} is not an option of {decision_id!r}")
        elif not isinstance(value, bool):
            raise DecisionError(f"decision {decision_id!r} takes true or false")

        checkpoint = len(self.process_cfg.assignments)
        self.process_cfg.assignments.append(
            DmAssignment(decision_id, value, "user", self.process_cfg.next_seq()))
        try:
            propagated = self._propagate()
        except DecisionError:
            del self.process_cfg.assignments[checkpoint:]
            raise
        return propagated

    def _propagate(self) -> list:
        dm = self.workspace.process_dm
        log = []
        changed = True
        while changed:
            changed = False
            atoms = dm_atoms(dm, self.process_cfg.assignments)
            assigned = self._assigned_ids()
            for decision in dm.decisions.values():
                for rule in decision.rules:
                    target = self._propagation_target(rule)
                    if target is not None:
                        target_id, target_value = target
                        if target_id in assigned:
                            continue
                        if eval_partial(rule.lhs, atoms) is True:
                            self.process_cfg.assignments.append(DmAssignment(
                                target_id, target_value, "propagated", self.process_cfg.next_seq()))
                            log.append((target_id, target_value))
                            changed = True
                            atoms = dm_atoms(dm, self.process_cfg.assignments)
                            assigned = self._assigned_ids()
        # validate-only pass over every rule
        atoms = dm_atoms(dm, self.process_cfg.assignments)
        for decision in dm.decisions.values():
            for rule in decision.rules:
                if eval_partial(rule, atoms) is False:
                    raise DecisionError(f"rule violated: {render_expr(rule)}")
        return log

    def _propagation_target(self, rule: Formula):
        """(decision, value) when the rule's consequent is one positive literal."""
        if not isinstance(rule, Implies):
            return None
        dm = self.workspace.process_dm
        rhs = rule.rhs
        if isinstance(rhs, Var) and rhs.name in dm.decisions and not dm.decisions[rhs.name].is_enum:
            return rhs.name, True
        if isinstance(rhs, VarEq) and rhs.name in dm.decisions and dm.decisions[rhs.name].is_enum:
            return rhs.name, rhs.option
        return None

    def rollback(self, count: int):
        """Undo the last `count` user decisions and everything they propagated."""
        if self.stage != STAGE_PROCESS:
            raise StageError(f"nothing to roll back in stage {self.stage!r}")
        if count < 0:
            raise DecisionError("rollback count must be non-negative")
        user_seqs = [a.seq for a in self.process_cfg.assignments if a.origin == "user"]
        if count > len(user_seqs):
            raise DecisionError(f"cannot roll back {count} decisions, only {len(user_seqs)} taken")
        if count == 0:
            return self
        cutoff = user_seqs[-count]
        self.process_cfg.assignments = [
            a for a in self.process_cfg.assignments if a.seq < cutoff]
        return self

    def production_sequence(self) -> list:
        assert self.process_cfg is not None
        return [a.decision for a in self.process_cfg.assignments if a.origin != "preset"]

    def finish_process(self, force: bool = False) -> list:
        """Close the process stage; returns the production sequence.

        Without `force` every currently visible decision must be taken.  With
        `force` only the steps demanded by the cross-model rules (selected
        product => process decision) must already be true.
        """
        if self.stage != STAGE_PROCESS:
            raise StageError(f"process stage already closed in stage {self.stage!r}")
        pending = self.visible_decisions()
        if pending and not force:
            raise DecisionError("decisions still pending: " + ", ".join(pending))
        if force:
            missing = self._required_unsatisfied()
            if missing:
                raise DecisionError("required process decisions unassigned: " + ", ".join(missing))
        sequence = self.production_sequence()
        self.stage = STAGE_RESOURCE
        self.reduce_resource_fm()
        return sequence

    def _required_unsatisfied(self) -> list:
        dm_id = self.workspace.process_dm.model_id
        atoms = self._combined_atoms(resource_selected=set())
        missing = []
        for rule in self.workspace.cdcs:
            if eval_partial(rule.lhs, atoms) is not True:
                continue
            rhs = rule.rhs
            if isinstance(rhs, Var) and rhs.name.startswith(dm_id + "#"):
                if eval_partial(rhs, atoms) is not True:
                    missing.append(rhs.name.split("#", 1)[1])
        return missing

    # -- resource stage -----------------------------------------------------

    def reduce_resource_fm(self) -> ResourcePreselection:
        """Fire process => resource rules: preselect single features, mark
        groups required, and lock every feature no fired rule touches."""
        assert self.process_cfg is not None
        rm = self.workspace.resource_fm
        rm_id = rm.model_id
        atoms = self._combined_atoms(resource_selected=None)
        pre = ResourcePreselection()
        referenced: set = set()
        for rule in self.workspace.cdcs:
            rhs_refs = [a for a in _formula_atom_names(rule.rhs)]
            if not rhs_refs or not all(r.startswith(rm_id + "#") for r in rhs_refs):
                continue
            if eval_partial(rule.lhs, atoms) is not True:
                continue
            if isinstance(rule.rhs, Var):
                fid = rule.rhs.name.split("#", 1)[1]
                feature = rm.features[fid]
                subtree = rm.subtree(fid)
                has_choice = feature.abstract or len(subtree) > 1
                if has_choice:
                    if fid not in pre.required_groups:
                        pre.required_groups.append(fid)
                else:
                    if fid not in pre.required:
                        pre.required.append(fid)
                referenced.update(subtree)
                referenced.update(rm.ancestors(fid))
            else:
                pre.checks.append(rule)
                for name in rhs_refs:
                    fid = name.split("#", 1)[1].split("=", 1)[0]
                    referenced.update(rm.subtree(fid))
                    referenced.update(rm.ancestors(fid))
        referenced.add(rm.root)
        pre.locked = [fid for fid in rm.features if fid not in referenced]
        conflict = [fid for fid in pre.required if fid in pre.locked]
        if conflict:
            raise EngineError(f"contradictory resource requirements for: {', '.join(conflict)}")
        self.resource_preselection = pre
        return pre

    def set_resource_config(self, selected) -> list:
        """Validate the resource pick against the feature model, the
        preselection, and every cross-model rule; success completes the session."""
        if self.stage != STAGE_RESOURCE:
            raise StageError(f"resource configuration is closed in stage {self.stage!r}")
        rm = self.workspace.resource_fm
        pre = self.resource_preselection
        expanded = expand_selection(rm, set(selected))
        cfg = FmConfiguration(model_id=rm.model_id, selected=expanded)
        violations = validate_fm_config(rm, FmConfiguration(rm.model_id, set(expanded)))
        for fid in pre.required:
            if fid not in expanded:
                violations.append(f"required resource {fid} not selected")
        for fid in pre.locked:
            if fid in set(selected):
                violations.append(f"resource {fid} is locked out by the process configuration")
        for gid in pre.required_groups:
            members = set(rm.subtree(gid))
            if not any(m in expanded for m in members):
                violations.append(f"required resource group {gid} has no selected member")
        atoms = self._combined_atoms(resource_selected=expanded)
        for rule in self.workspace.cdcs:
            if eval_total_or_false(rule.formula(), atoms) is False:
                violations.append(f"cross-model rule violated: {rule.render()}")
        if violations:
            return violations
        self.resource_cfg = cfg
        self.stage = STAGE_DONE
        return []

    # -- evaluation helpers --------------------------------------------------

    def _combined_atoms(self, resource_selected) -> dict:
        """Total assignment over all three models, keyed by model#element.

        resource_selected None means "resource stage not decided yet": those
        atoms stay unknown.  A set (possibly empty) makes them total.
        """
        ws = self.workspace
        atoms: dict = {}
        selected = self.product_cfg.selected if self.product_cfg else set()
        for fid in ws.product_fm.features:
            atoms[f"{ws.product_fm.model_id}#{fid}"] = fid in selected
        dm_vals = dm_atoms_total(ws.process_dm, self.process_cfg.assignments if self.process_cfg else [])
        for key, val in dm_vals.items():
            atoms[f"{ws.process_dm.model_id}#{key}"] = val
        if resource_selected is not None:
            for fid in ws.resource_fm.features:
                atoms[f"{ws.resource_fm.model_id}#{fid}"] = fid in resource_selected
        return atoms

    # -- metric --------------------------------------------------------------

    def sequence_space(self) -> SpaceMetric:
        """Permutation metric: the unreduced space over every decision that can
        become visible under the presets, against the staged factorial sum.

        Stages replay the canonical exploration: take everything currently
        visible, let the rules propagate, repeat until nothing unlocks.
        """
        if self.stage == STAGE_PRODUCT:
            raise StageError("metric requires the process stage")
        if self.metrics_cache is not None:
            return self.metrics_cache
        dm = self.workspace.process_dm
        assignments = [a for a in self.process_cfg.assignments if a.origin == "preset"]
        seq = assignments[-1].seq + 1 if assignments else 0
        stage_sizes = []
        while True:
            visible = self._visible(dm, assignments)
            if not visible:
                break
            stage_sizes.append(len(visible))
            for did in visible:
                assignments.append(DmAssignment(did, True, "user", seq))
                seq += 1
                seq, assignments = _propagate_simulation(dm, assignments, seq)
        n = sum(stage_sizes)
        metric = SpaceMetric(
            n=n, r=n,
            full_space=permutations(n, n),
            stage_sizes=stage_sizes,
            reduced_space=sum(math.factorial(s) for s in stage_sizes) if stage_sizes else 1,
        )
        self.metrics_cache = metric
        return metric

    # -- snapshots -----------------------------------------------------------

    def to_snapshot(self) -> str:
        data = {
            "stage": self.stage,
            "product_selected": sorted(self.product_cfg.selected) if self.product_cfg else None,
            "assignments": [
                {"decision": a.decision, "value": a.value, "origin": a.origin, "seq": a.seq}
                for a in self.process_cfg.assignments
            ] if self.process_cfg else None,
            "resource_selected": sorted(self.resource_cfg.selected) if self.resource_cfg else None,
        }
        return json.dumps(data, indent=2) + "\n"

    @staticmethod
    def from_snapshot(workspace: Workspace, text: str) -> "StagedSession":
        """Rebuild a session by replaying the snapshot through the engine."""
        data = json.loads(text)
        session = StagedSession.create(workspace)
        if data.get("product_selected") is None:
            return session
        violations = session.set_product_config(set(data["product_selected"]))
        if violations:
            raise EngineError("snapshot product configuration invalid: " + "; ".join(violations))
        recorded = data.get("assignments") or []
        for entry in recorded:
            if entry["origin"] != "user":
                continue
            value = entry["value"]
            session.take_decision(entry["decision"], value)
        replayed = [
            {"decision": a.decision, "value": a.value, "origin": a.origin, "seq": a.seq}
            for a in session.process_cfg.assignments
        ]
        if replayed != recorded:
            raise EngineError("snapshot does not replay to the recorded queue")
        if data["stage"] in (STAGE_RESOURCE, STAGE_DONE):
            session.finish_process()
        if data["stage"] == STAGE_DONE:
            violations = session.set_resource_config(set(data["resource_selected"] or []))
            if violations:
                raise EngineError("snapshot resource configuration invalid: " + "; ".join(violations))
        return session


def _propagate_simulation(dm, assignments, seq):
    """Single-positive-literal propagation used by the metric simulation."""
    changed = True
    while changed:
        changed = False
        atoms = dm_atoms(dm, assignments)
        assigned = {a.decision for a in assignments}
        for decision in dm.decisions.values():
            for rule in decision.rules:
                if not isinstance(rule, Implies):
                    continue
                rhs = rule.rhs
                if isinstance(rhs, Var) and rhs.name in dm.decisions \
                        and not dm.decisions[rhs.name].is_enum and rhs.name not in assigned:
                    if eval_partial(rule.lhs, atoms) is True:
                        assignments.append(DmAssignment(rhs.name, True, "propagated", seq))
                        seq += 1
                        changed = True
                        atoms = dm_atoms(dm, assignments)
                        assigned = {a.decision for a in assignments}
    return seq, assignments


def _formula_atom_names(f: Formula) -> list:
    from .logic import atoms as logic_atoms
    return [key.split("=", 1)[0] for key in logic_atoms(f)]


def eval_total_or_false(f: Formula, atoms: dict):
    """Evaluation where unassigned atoms count as false (closed-world check)."""
    result = eval_partial(f, atoms)
    if result is not None:
        return result
    closed = dict(atoms)
    from .logic import atoms as logic_atoms
    for key in logic_atoms(f):
        closed.setdefault(key, False)
    return eval_partial(f, closed)

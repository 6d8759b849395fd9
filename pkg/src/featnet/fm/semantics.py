"""Configuration validity checking directly against the extended semantics.

This module is the semantic oracle: it evaluates every relation (mandatory,
groups, cardinality, instance ordering, cross-tree constraints) over the
hierarchical configuration, without going through the Boolean flattening.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..logic import Formula, evaluate, format_formula
from .model import (
    Configuration,
    Excludes,
    Feature,
    FeatureModel,
    Propositional,
    Ref,
    RefPlan,
    Requires,
    UnknownPathError,
    Value,
    format_value,
    index_tuples,
    instance_path_for,
    instance_paths,
    instance_segment,
    parse_instance_path,
    plan_constraint,
)


@dataclass(frozen=True, slots=True)
class Violation:
    relation: str
    subject: str
    message: str


@dataclass
class ValidityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def add(self, relation: str, subject: str, message: str) -> None:
        self.violations.append(Violation(relation, subject, message))


@dataclass(frozen=True, slots=True)
class Diagnostic:
    kind: str
    subject: str
    message: str


def check_configuration(model: FeatureModel, config: Configuration) -> ValidityReport:
    """Report every violated relation; unknown paths raise UnknownPathError."""
    report = ValidityReport()
    selected = config.selections
    steps_by_path: dict[str, list] = {}
    for path in sorted(selected):
        steps_by_path[path] = parse_instance_path(model, path)

    for binding_path in config.binding_map:
        instance, _, attr_name = binding_path.rpartition(".")
        if not instance or not attr_name:
            raise UnknownPathError(f"malformed attribute binding path '{binding_path}'")
        steps = parse_instance_path(model, instance)
        feature = steps[-1][0]
        attribute = feature.attribute(attr_name)  # raises if undeclared
        value = config.binding_map[binding_path]
        if value not in attribute.domain:
            raise UnknownPathError(
                f"value {format_value(value)} is outside the domain of "
                f"'{feature.path}.{attr_name}'")

    _check_structure(model, config, steps_by_path, report)
    _check_attributes(model, config, steps_by_path, report)
    for constraint in model.constraints:
        _check_cross_constraint(model, config, constraint, report)
    return report


def _check_structure(model: FeatureModel, config: Configuration,
                     steps_by_path: dict[str, list], report: ValidityReport) -> None:
    selected = config.selections
    for path, steps in steps_by_path.items():
        parent_path = path.rsplit("/", 1)[0] if "/" in path else ""
        if parent_path and parent_path not in selected:
            report.add("parent", path, f"'{path}' is selected without its parent")
        feature, index = steps[-1]
        if index is not None and index > 1:
            predecessor = _sibling_path(path, feature, index - 1)
            if predecessor not in selected:
                report.add("instance-ordering", path,
                           f"instance {index} of '{feature.path}' is enabled "
                           f"without instance {index - 1}")

    # group and cardinality relations, per selected parent instance
    parent_instances = [("", model.root)] + [
        (path, steps[-1][0]) for path, steps in steps_by_path.items()
    ]
    for parent_path, parent in parent_instances:
        if not parent.children:
            continue
        counts = {
            child.name: _count_selected(parent_path, child, selected)
            for child in parent.children
        }
        subject = parent_path or model.root.name
        if parent.group == "alternative":
            total = sum(counts.values())
            if total != 1:
                report.add("alternative", subject,
                           f"alternative group under '{subject}' has {total} "
                           f"selected children, expected exactly 1")
        elif parent.group == "or":
            if sum(counts.values()) < 1:
                report.add("or-group", subject,
                           f"or group under '{subject}' has no selected child")
        else:
            for child in parent.children:
                count = counts[child.name]
                if count < child.cardinality.min:
                    if child.cardinality.max == 1:
                        report.add("mandatory", subject,
                                   f"mandatory child '{child.name}' of '{subject}' "
                                   f"is not selected")
                    else:
                        report.add("cardinality", subject,
                                   f"'{child.name}' under '{subject}' has {count} "
                                   f"instances, needs at least {child.cardinality.min}")


def _sibling_path(path: str, feature: Feature, index: int) -> str:
    prefix = path.rsplit("/", 1)[0] + "/" if "/" in path else ""
    return f"{prefix}{feature.name}#{index}"


def _count_selected(parent_path: str, child: Feature, selected: frozenset[str]) -> int:
    prefix = f"{parent_path}/" if parent_path else ""
    if not child.is_multi:
        return 1 if f"{prefix}{child.name}" in selected else 0
    return sum(1 for k in range(1, child.cardinality.max + 1)
               if f"{prefix}{child.name}#{k}" in selected)


def _check_attributes(model: FeatureModel, config: Configuration,
                      steps_by_path: dict[str, list], report: ValidityReport) -> None:
    bindings = config.binding_map
    for path, steps in steps_by_path.items():
        feature = steps[-1][0]
        for attribute in feature.attributes:
            if f"{path}.{attribute.name}" not in bindings:
                report.add("attribute", path,
                           f"selected '{path}' has no value for attribute "
                           f"'{attribute.name}'")
    for binding_path in bindings:
        instance = binding_path.rpartition(".")[0]
        if instance not in config.selections:
            report.add("attribute", binding_path,
                       f"attribute '{binding_path}' is bound but '{instance}' "
                       f"is not selected")


# -- cross-tree constraints ----------------------------------------------------

def _ref_instances(model: FeatureModel, plan: RefPlan, context: dict[str, int]):
    """Concrete instance paths a reference denotes within one replica."""
    base = dict(context)
    base.update(dict(plan.pins))
    for free_indices in index_tuples(plan.free):
        indices = dict(base)
        indices.update(free_indices)
        yield instance_path_for(model, plan.feature, indices)


def _atom_true(config: Configuration, path: str, ref: Ref) -> bool:
    if path not in config.selections:
        return False
    if ref.attribute is None:
        return True
    return config.binding_map.get(f"{path}.{ref.attribute}") == ref.value


def _check_cross_constraint(model: FeatureModel, config: Configuration,
                            constraint, report: ValidityReport) -> None:
    plan = plan_constraint(model, constraint)
    for context in index_tuples(plan.joint):
        if isinstance(constraint, Requires):
            source_plan, target_plan = plan.refs
            for source_path in _ref_instances(model, source_plan, context):
                if source_path not in config.selections:
                    continue
                if not any(_target_satisfied(config, path, constraint)
                           for path in _ref_instances(model, target_plan, context)):
                    report.add(constraint.kind, source_path,
                               f"'{source_path}' requires "
                               f"'{constraint.target.text()}'"
                               + (f" with {dict(constraint.bindings)}"
                                  if constraint.bindings else ""))
        elif isinstance(constraint, Excludes):
            left_plan, right_plan = plan.refs
            for left_path in _ref_instances(model, left_plan, context):
                if left_path not in config.selections:
                    continue
                for right_path in _ref_instances(model, right_plan, context):
                    if right_path in config.selections:
                        report.add("excludes", left_path,
                                   f"'{left_path}' excludes '{right_path}'")
        else:
            assert isinstance(constraint, Propositional)
            values = {}
            for ref_plan in plan.refs:
                path = next(iter(_ref_instances(model, ref_plan, context)))
                values[ref_plan.ref] = _atom_true(config, path, ref_plan.ref)
            ok = evaluate(constraint.formula, atom_value=lambda ref: values[ref])
            if not ok:
                text = format_formula(constraint.formula, lambda r: r.text())
                where = ", ".join(f"{f.name}#{k}" for f, k in
                                  zip(plan.joint, context.values())) or "top level"
                report.add("propositional", where,
                           f"constraint '{text}' violated at {where}")


def _target_satisfied(config: Configuration, path: str, constraint: Requires) -> bool:
    if path not in config.selections:
        return False
    return all(config.binding_map.get(f"{path}.{name}") == value
               for name, value in constraint.bindings)


# -- model diagnostics and brute-force enumeration ------------------------------

def validate_model(model: FeatureModel, exhaustive_atom_limit: int = 14) -> list[Diagnostic]:
    """Structural diagnostics plus, for small models, an exhaustive dead/unsat check."""
    diagnostics: list[Diagnostic] = []
    for feature in model.features():
        if feature.group in ("alternative", "or") and len(feature.children) < 2:
            diagnostics.append(Diagnostic(
                "group-arity", feature.path or feature.name,
                f"{feature.group} group under '{feature.path or feature.name}' "
                f"has {len(feature.children)} child(ren), expected at least 2"))
        names = [a.name for a in feature.attributes]
        for name in sorted({n for n in names if names.count(n) > 1}):
            diagnostics.append(Diagnostic(
                "duplicate-attribute", feature.path or feature.name,
                f"attribute '{name}' declared twice on "
                f"'{feature.path or feature.name}'"))

    atoms = model_atoms(model)
    if len(atoms) <= exhaustive_atom_limit:
        configs = enumerate_configurations(model)
        if not configs:
            diagnostics.append(Diagnostic(
                "unsatisfiable", model.root.name,
                "the model has no valid configuration"))
        else:
            alive: set[str] = set()
            for config in configs:
                alive.update(config.selections)
            for path, feature in instance_paths(model):
                if path not in alive:
                    diagnostics.append(Diagnostic(
                        "dead", path,
                        f"instance '{path}' is selectable in no valid configuration"))
    return diagnostics


def model_atoms(model: FeatureModel) -> list[str]:
    """Instance-path and attribute-value atoms at declared bounds."""
    atoms: list[str] = []
    for path, feature in instance_paths(model):
        atoms.append(path)
        for attribute in feature.attributes:
            for value in attribute.domain:
                atoms.append(f"{path}.{attribute.name}={format_value(value)}")
    return atoms


def enumerate_configurations(model: FeatureModel,
                             limit: int | None = None) -> list[Configuration]:
    """Brute-force the full truth table over atoms, filtering with
    check_configuration. Exponential; intended for small models and tests."""
    paths = instance_paths(model)
    valid: list[Configuration] = []
    choices: list[list[tuple[str, Value] | None]] = []
    # per instance: unselected, or selected with one value combination per attribute
    for path, feature in paths:
        per_attr = [[(f"{path}.{a.name}", v) for v in a.domain] for a in feature.attributes]
        combos: list = [None]
        for combo in itertools.product(*per_attr):
            combos.append(combo)
        choices.append((path, combos))

    for assignment in itertools.product(*(combos for _, combos in choices)):
        selections = []
        bindings = {}
        for (path, _), choice in zip(choices, assignment):
            if choice is None:
                continue
            selections.append(path)
            for binding_path, value in choice:
                bindings[binding_path] = value
        config = Configuration.create(selections, bindings)
        if check_configuration(model, config).valid:
            valid.append(config)
            if limit is not None and len(valid) > limit:
                raise OverflowError(f"more than {limit} valid configurations")
    valid.sort(key=lambda c: sorted(c.atoms))
    return valid

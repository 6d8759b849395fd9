"""Attributed, cardinality-based feature models.

A model is a tree of features. Each feature decomposes its children as a
plain "and" group (children carry their own cardinalities), an "alternative"
group (exactly one child when the parent is selected) or an "or" group (at
least one child). Features with a maximum cardinality above one are
multi-features: they may be instantiated several times, and instance k can
only be enabled together with all instances below k.

Instance paths name concrete feature instances, e.g.
``block#2/cell#1/input1/convolution``: multi-feature segments carry a 1-based
``#k`` index, singleton segments are bare. Attribute bindings are addressed as
``<instance path>.<attribute>=<value>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Union

from ..logic import Formula, atoms as formula_atoms

Value = Union[int, float, str]


class ModelError(Exception):
    """Structural problem in a feature model definition."""


class UnknownPathError(Exception):
    """An instance path or attribute reference does not exist in the model."""


def format_value(value: Value) -> str:
    if isinstance(value, bool):  # guard: bools are ints
        raise TypeError("boolean attribute values are not supported")
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True, slots=True)
class Cardinality:
    min: int
    max: int

    def __post_init__(self) -> None:
        if self.min < 0:
            raise ModelError(f"cardinality minimum must be non-negative, got {self.min}")
        if self.max < 1:
            raise ModelError(f"cardinality maximum must be positive, got {self.max}")
        if self.min > self.max:
            raise ModelError(f"empty cardinality interval [{self.min}..{self.max}]")


@dataclass(frozen=True, slots=True)
class Attribute:
    name: str
    domain: tuple[Value, ...]

    def __post_init__(self) -> None:
        if not self.domain:
            raise ModelError(f"attribute '{self.name}' has an empty domain")
        if len(set(map(format_value, self.domain))) != len(self.domain):
            raise ModelError(f"attribute '{self.name}' has duplicate domain values")


@dataclass(frozen=True)
class Feature:
    name: str
    path: str  # full path from (and excluding) the root; "" for the root itself
    cardinality: Cardinality
    group: str  # decomposition of the children: "and" | "alternative" | "or"
    children: tuple[Feature, ...]
    attributes: tuple[Attribute, ...]

    def __post_init__(self) -> None:
        if self.group not in ("and", "alternative", "or"):
            raise ModelError(f"unknown group kind '{self.group}'")
        seen = set()
        for child in self.children:
            if child.name in seen:
                raise ModelError(f"duplicate sibling name '{child.name}' under '{self.name}'")
            seen.add(child.name)

    @property
    def is_multi(self) -> bool:
        return self.cardinality.max > 1

    def attribute(self, name: str) -> Attribute:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        raise UnknownPathError(f"feature '{self.path or self.name}' has no attribute '{name}'")


@dataclass(frozen=True, slots=True)
class Ref:
    """Reference to a feature (optionally an attribute value) in a constraint.

    ``segments`` are (name, pin) pairs as written, resolved against the model
    by suffix matching. Pins fix the instance index of a multi-feature level.
    """

    segments: tuple[tuple[str, int | None], ...]
    attribute: str | None = None
    value: Value | None = None

    def text(self) -> str:
        path = "/".join(n if k is None else f"{n}#{k}" for n, k in self.segments)
        if self.attribute is None:
            return path
        return f"{path}.{self.attribute}={format_value(self.value)}"


@dataclass(frozen=True, slots=True)
class Requires:
    source: Ref
    target: Ref
    bindings: tuple[tuple[str, Value], ...] = ()

    @property
    def kind(self) -> str:
        return "requiresWithAttributes" if self.bindings else "requires"


@dataclass(frozen=True, slots=True)
class Excludes:
    left: Ref
    right: Ref

    kind = "excludes"


@dataclass(frozen=True, slots=True)
class Propositional:
    formula: Formula  # leaves are logic.Atom(Ref)

    kind = "propositional"


CrossConstraint = Union[Requires, Excludes, Propositional]


def constraint_refs(constraint: CrossConstraint) -> list[Ref]:
    if isinstance(constraint, Requires):
        return [constraint.source, constraint.target]
    if isinstance(constraint, Excludes):
        return [constraint.left, constraint.right]
    return list(formula_atoms(constraint.formula))


@dataclass
class FeatureModel:
    root: Feature
    constraints: tuple[CrossConstraint, ...] = ()

    def __post_init__(self) -> None:
        self._by_path: dict[str, Feature] = {}
        self._parents: dict[str, Feature] = {}

        def index(feature: Feature) -> None:
            self._by_path[feature.path] = feature
            for child in feature.children:
                self._parents[child.path] = feature
                index(child)

        index(self.root)
        for constraint in self.constraints:
            plan_constraint(self, constraint)  # raises on dangling/ambiguous references

    # -- structure ---------------------------------------------------------

    def features(self) -> Iterator[Feature]:
        stack = [self.root]
        while stack:
            feature = stack.pop()
            yield feature
            stack.extend(reversed(feature.children))

    def feature_at(self, path: str) -> Feature:
        try:
            return self._by_path[path]
        except KeyError:
            raise UnknownPathError(f"no feature at path '{path}'") from None

    def parent_of(self, feature: Feature) -> Feature | None:
        return self._parents.get(feature.path)

    def ancestry(self, feature: Feature) -> list[Feature]:
        """Ancestors from just below the root down to the feature itself."""
        chain: list[Feature] = []
        node: Feature | None = feature
        while node is not None and node is not self.root:
            chain.append(node)
            node = self._parents.get(node.path)
        chain.reverse()
        return chain

    def multi_chain(self, feature: Feature) -> list[Feature]:
        """Multi-feature ancestors (self included) ordered root-to-leaf."""
        return [f for f in self.ancestry(feature) if f.is_multi]

    # -- reference resolution ----------------------------------------------

    def resolve(self, ref: Ref) -> Feature:
        """Resolve a suffix reference to the unique feature it names."""
        names = [name for name, _ in ref.segments]
        matches = []
        for feature in self._by_path.values():
            if feature is self.root:
                continue
            parts = feature.path.split("/")
            if len(parts) >= len(names) and parts[-len(names):] == names:
                matches.append(feature)
        if not matches:
            raise UnknownPathError(f"constraint reference '{ref.text()}' matches no feature")
        if len(matches) > 1:
            paths = ", ".join(sorted(f.path for f in matches))
            raise ModelError(f"constraint reference '{ref.text()}' is ambiguous ({paths})")
        feature = matches[0]
        parts = feature.path.split("/")
        offset = len(parts) - len(names)
        for i, (name, pin) in enumerate(ref.segments):
            if pin is None:
                continue
            segment_feature = self._by_path["/".join(parts[: offset + i + 1])]
            if not segment_feature.is_multi:
                raise ModelError(
                    f"reference '{ref.text()}' pins '{name}' which is not a multi-feature")
            if not 1 <= pin <= segment_feature.cardinality.max:
                raise ModelError(
                    f"reference '{ref.text()}' pins '{name}#{pin}' outside "
                    f"[1..{segment_feature.cardinality.max}]")
        if ref.attribute is not None:
            attr = feature.attribute(ref.attribute)
            if ref.value not in attr.domain:
                raise ModelError(
                    f"reference '{ref.text()}' uses a value outside the domain of "
                    f"'{feature.path}.{ref.attribute}'")
        return feature

    def ref_pins(self, ref: Ref) -> dict[str, int]:
        """Map multi-feature path -> pinned index for the pins in a ref."""
        feature = self.resolve(ref)
        parts = feature.path.split("/")
        offset = len(parts) - len(ref.segments)
        pins: dict[str, int] = {}
        for i, (name, pin) in enumerate(ref.segments):
            if pin is not None:
                pins["/".join(parts[: offset + i + 1])] = pin
        return pins


@dataclass(frozen=True)
class Configuration:
    """A complete selection of feature instances plus attribute bindings.

    ``selections`` holds instance paths; ``bindings`` holds
    (attribute instance path, value) pairs sorted by path.
    """

    selections: frozenset[str]
    bindings: tuple[tuple[str, Value], ...]
    model_key: str | None = field(default=None, compare=False)

    @staticmethod
    def create(selections: Iterator[str] | frozenset[str] | list[str],
               bindings: Mapping[str, Value] | None = None,
               model_key: str | None = None) -> Configuration:
        items = tuple(sorted((bindings or {}).items(), key=lambda kv: path_sort_key(kv[0])))
        return Configuration(frozenset(selections), items, model_key)

    @cached_property
    def binding_map(self) -> dict[str, Value]:
        return dict(self.bindings)

    @cached_property
    def atoms(self) -> frozenset[str]:
        """Selected instance paths plus attribute-value atoms."""
        bound = {f"{path}={format_value(value)}" for path, value in self.bindings}
        return frozenset(self.selections) | bound


def path_sort_key(path: str) -> tuple:
    """Order instance paths structurally (block#10 after block#2)."""
    key: list[tuple[str, int]] = []
    attr = ""
    if "." in path.split("/")[-1]:
        path, attr = path.rsplit(".", 1)
    for segment in path.split("/"):
        if "#" in segment:
            name, _, idx = segment.partition("#")
            key.append((name, int(idx)))
        else:
            key.append((segment, 0))
    return (tuple(key), attr)


def split_segments(path: str) -> list[tuple[str, int | None]]:
    segments: list[tuple[str, int | None]] = []
    for segment in path.split("/"):
        if "#" in segment:
            name, _, idx = segment.partition("#")
            if not idx.isdigit() or int(idx) < 1:
                raise UnknownPathError(f"bad instance index in '{path}'")
            segments.append((name, int(idx)))
        else:
            segments.append((segment, None))
    return segments


def parse_instance_path(model: FeatureModel, path: str) -> list[tuple[Feature, int | None]]:
    """Validate an instance path and return its (feature, index) steps.

    Multi-feature segments must carry an index within the declared maximum;
    singleton segments must not carry one.
    """
    steps: list[tuple[Feature, int | None]] = []
    parent = model.root
    prefix = ""
    for name, idx in split_segments(path):
        prefix = name if not prefix else f"{prefix}/{name}"
        child = next((c for c in parent.children if c.name == name), None)
        if child is None:
            raise UnknownPathError(f"'{path}': no feature '{prefix}'")
        if child.is_multi:
            if idx is None:
                raise UnknownPathError(f"'{path}': multi-feature '{prefix}' needs an instance index")
            if idx > child.cardinality.max:
                raise UnknownPathError(
                    f"'{path}': index {idx} exceeds maximum {child.cardinality.max} of '{prefix}'")
        elif idx is not None:
            raise UnknownPathError(f"'{path}': '{prefix}' is not a multi-feature")
        steps.append((child, idx))
        parent = child
    return steps


def instance_segment(feature: Feature, index: int) -> str:
    return f"{feature.name}#{index}" if feature.is_multi else feature.name


@dataclass(frozen=True)
class RefPlan:
    """A constraint reference with its instance structure worked out."""

    ref: Ref
    feature: Feature
    chain: tuple[Feature, ...]  # multi-feature ancestors (self included), root first
    pins: tuple[tuple[str, int], ...]  # multi-feature path -> pinned index
    free: tuple[Feature, ...]  # chain members neither pinned nor in the joint context


@dataclass(frozen=True)
class ConstraintPlan:
    """How a cross-tree constraint quantifies over feature instances.

    The constraint is replicated once per index tuple of ``joint`` (the
    multi-feature ancestors shared by all references and pinned by none).
    Remaining unpinned multi-levels of a reference are quantified per role:
    universally for requires-sources and excludes operands, existentially for
    requires-targets. References in propositional formulas must not have any.
    """

    joint: tuple[Feature, ...]
    refs: tuple[RefPlan, ...]


def plan_constraint(model: FeatureModel, constraint: CrossConstraint) -> ConstraintPlan:
    refs = constraint_refs(constraint)
    raw: list[tuple[Ref, Feature, list[Feature], dict[str, int]]] = []
    for ref in refs:
        feature = model.resolve(ref)
        raw.append((ref, feature, model.multi_chain(feature), model.ref_pins(ref)))
    shared_paths: set[str] | None = None
    for _, _, chain, pins in raw:
        unpinned = {f.path for f in chain if f.path not in pins}
        shared_paths = unpinned if shared_paths is None else shared_paths & unpinned
    shared_paths = shared_paths or set()
    joint = tuple(sorted((model.feature_at(p) for p in shared_paths),
                         key=lambda f: f.path.count("/")))
    plans = []
    for ref, feature, chain, pins in raw:
        free = tuple(f for f in chain if f.path not in pins and f.path not in shared_paths)
        plans.append(RefPlan(ref, feature, tuple(chain), tuple(sorted(pins.items())), free))
    plan = ConstraintPlan(joint, tuple(plans))
    if isinstance(constraint, Propositional):
        for ref_plan in plan.refs:
            if ref_plan.free:
                names = ", ".join(f.path for f in ref_plan.free)
                raise ModelError(
                    f"reference '{ref_plan.ref.text()}' in a propositional constraint is "
                    f"ambiguous over instances of: {names}; pin them with '#k'")
    return plan


def instance_path_for(model: FeatureModel, feature: Feature, indices: Mapping[str, int]) -> str:
    """Concrete instance path for a feature given indices for every
    multi-feature ancestor (keyed by feature path)."""
    segments = []
    for ancestor in model.ancestry(feature):
        if ancestor.is_multi:
            segments.append(f"{ancestor.name}#{indices[ancestor.path]}")
        else:
            segments.append(ancestor.name)
    return "/".join(segments)


def index_tuples(features: tuple[Feature, ...],
                 limit: Mapping[str, int] | None = None) -> Iterator[dict[str, int]]:
    """All index assignments for the given multi-features (cartesian)."""
    limit = limit or {}

    def rec(i: int, acc: dict[str, int]) -> Iterator[dict[str, int]]:
        if i == len(features):
            yield dict(acc)
            return
        feature = features[i]
        top = limit.get(feature.path, feature.cardinality.max)
        for k in range(1, top + 1):
            acc[feature.path] = k
            yield from rec(i + 1, acc)
        acc.pop(feature.path, None)

    yield from rec(0, {})


def instance_paths(model: FeatureModel, bounds: Mapping[str, int] | None = None) -> list[tuple[str, Feature]]:
    """Every possible instance path, depth-first, with its feature.

    ``bounds`` optionally lowers the unfolded instance count per multi-feature
    (keyed by feature path); the declared maximum is used otherwise.
    """
    bounds = bounds or {}
    result: list[tuple[str, Feature]] = []

    def limit(feature: Feature) -> int:
        return bounds.get(feature.path, feature.cardinality.max)

    def walk(feature: Feature, prefix: str) -> None:
        for child in feature.children:
            for k in range(1, limit(child) + 1):
                segment = instance_segment(child, k)
                path = segment if not prefix else f"{prefix}/{segment}"
                result.append((path, child))
                walk(child, path)

    walk(model.root, "")
    return result

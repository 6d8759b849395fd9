"""Propositional formulas and CNF conversion.

Formula leaves are either integer variables (``Lit``, 1-based indices, used by
the flattened Boolean model) or opaque payloads (``Atom``, used by the feature
model's cross-tree constraints before variables exist).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping


class Formula:
    """Base node. Operators build binary And/Or/Implies; use all_of/any_of for n-ary."""

    __slots__ = ()

    def __and__(self, other: Formula) -> Formula:
        return And((self, other))

    def __or__(self, other: Formula) -> Formula:
        return Or((self, other))

    def __invert__(self) -> Formula:
        return Not(self)

    def __rshift__(self, other: Formula) -> Formula:
        return Implies(self, other)


@dataclass(frozen=True, slots=True)
class Lit(Formula):
    var: int
    negated: bool = False

    def __post_init__(self) -> None:
        if self.var < 1:
            raise ValueError("variable indices are 1-based")

    def signed(self) -> int:
        return -self.var if self.negated else self.var


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    """Leaf carrying a non-variable payload (e.g. a feature reference)."""

    payload: Any


@dataclass(frozen=True, slots=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True, slots=True)
class Or(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True, slots=True)
class Implies(Formula):
    antecedent: Formula
    consequent: Formula


@dataclass(frozen=True, slots=True)
class Iff(Formula):
    left: Formula
    right: Formula


TRUE = And(())
FALSE = Or(())


def all_of(children: Iterable[Formula]) -> Formula:
    items = tuple(children)
    return items[0] if len(items) == 1 else And(items)


def any_of(children: Iterable[Formula]) -> Formula:
    items = tuple(children)
    return items[0] if len(items) == 1 else Or(items)


def exactly_one(children: Iterable[Formula]) -> Formula:
    """At-least-one disjunction plus pairwise exclusions."""
    items = tuple(children)
    parts: list[Formula] = [any_of(items)]
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            parts.append(Not(And((items[i], items[j]))))
    return all_of(parts)


def map_atoms(formula: Formula, fn: Callable[[Any], Formula]) -> Formula:
    """Return a copy with every Atom leaf replaced by fn(payload)."""
    if isinstance(formula, Atom):
        return fn(formula.payload)
    if isinstance(formula, Lit):
        return formula
    if isinstance(formula, Not):
        return Not(map_atoms(formula.child, fn))
    if isinstance(formula, And):
        return And(tuple(map_atoms(c, fn) for c in formula.children))
    if isinstance(formula, Or):
        return Or(tuple(map_atoms(c, fn) for c in formula.children))
    if isinstance(formula, Implies):
        return Implies(map_atoms(formula.antecedent, fn), map_atoms(formula.consequent, fn))
    if isinstance(formula, Iff):
        return Iff(map_atoms(formula.left, fn), map_atoms(formula.right, fn))
    raise TypeError(formula)


def atoms(formula: Formula) -> list[Any]:
    """Atom payloads in left-to-right order (with duplicates)."""
    found: list[Any] = []

    def walk(f: Formula) -> None:
        if isinstance(f, Atom):
            found.append(f.payload)
        elif isinstance(f, Not):
            walk(f.child)
        elif isinstance(f, (And, Or)):
            for c in f.children:
                walk(c)
        elif isinstance(f, Implies):
            walk(f.antecedent)
            walk(f.consequent)
        elif isinstance(f, Iff):
            walk(f.left)
            walk(f.right)

    walk(formula)
    return found


def evaluate(formula: Formula, assignment: Mapping[int, bool] | None = None,
             atom_value: Callable[[Any], bool] | None = None) -> bool:
    """Evaluate under a total assignment of Lit vars and/or an Atom valuation."""
    if isinstance(formula, Lit):
        assert assignment is not None
        value = assignment[formula.var]
        return not value if formula.negated else value
    if isinstance(formula, Atom):
        assert atom_value is not None
        return atom_value(formula.payload)
    if isinstance(formula, Not):
        return not evaluate(formula.child, assignment, atom_value)
    if isinstance(formula, And):
        return all(evaluate(c, assignment, atom_value) for c in formula.children)
    if isinstance(formula, Or):
        return any(evaluate(c, assignment, atom_value) for c in formula.children)
    if isinstance(formula, Implies):
        return (not evaluate(formula.antecedent, assignment, atom_value)) or \
            evaluate(formula.consequent, assignment, atom_value)
    if isinstance(formula, Iff):
        return evaluate(formula.left, assignment, atom_value) == \
            evaluate(formula.right, assignment, atom_value)
    raise TypeError(formula)


def format_formula(formula: Formula, atom_fmt: Callable[[Any], str]) -> str:
    """Render with minimal parentheses; precedence ! > & > | > '=>' > '<=>'."""
    def render(f: Formula, parent_prec: int) -> str:
        if isinstance(f, Atom):
            return atom_fmt(f.payload)
        if isinstance(f, Lit):
            return f"{'!' if f.negated else ''}v{f.var}"
        if isinstance(f, Not):
            return "!" + render(f.child, 5)
        if isinstance(f, And):
            text, prec = " & ".join(render(c, 4) for c in f.children), 4
        elif isinstance(f, Or):
            text, prec = " | ".join(render(c, 3) for c in f.children), 3
        elif isinstance(f, Implies):
            text, prec = f"{render(f.antecedent, 3)} => {render(f.consequent, 2)}", 2
        elif isinstance(f, Iff):
            text, prec = f"{render(f.left, 2)} <=> {render(f.right, 2)}", 1
        else:
            raise TypeError(f)
        return f"({text})" if prec < parent_prec else text

    return render(formula, 0)


@dataclass
class CnfFormula:
    """Clause list over signed 1-based variable indices.

    Variables 1..num_model_vars belong to the source Boolean model; anything
    above is an internal definition variable introduced by the conversion.
    """

    clauses: list[tuple[int, ...]]
    num_vars: int
    num_model_vars: int

    def is_satisfied_by(self, assignment: Mapping[int, bool]) -> bool:
        return all(
            any(assignment[abs(lit)] == (lit > 0) for lit in clause)
            for clause in self.clauses
        )


class _CnfBuilder:
    def __init__(self, num_model_vars: int) -> None:
        self.clauses: list[tuple[int, ...]] = []
        self.next_var = num_model_vars + 1
        self._defs: dict[Formula, int] = {}

    def fresh(self) -> int:
        v = self.next_var
        self.next_var += 1
        return v

    def emit(self, *lits: int) -> None:
        self.clauses.append(tuple(lits))

    def define(self, f: Formula) -> int:
        """Signed literal equisatisfiable with f (full biconditional definitions)."""
        if isinstance(f, Lit):
            return f.signed()
        if isinstance(f, Not):
            return -self.define(f.child)
        if isinstance(f, Implies):
            return self.define(Or((Not(f.antecedent), f.consequent)))
        cached = self._defs.get(f)
        if cached is not None:
            return cached
        if isinstance(f, And):
            lits = [self.define(c) for c in f.children]
            if not lits:
                aux = self.fresh()
                self.emit(aux)  # empty conjunction is true
            else:
                aux = self.fresh()
                for lit in lits:
                    self.emit(-aux, lit)
                self.emit(aux, *[-lit for lit in lits])
        elif isinstance(f, Or):
            lits = [self.define(c) for c in f.children]
            aux = self.fresh()
            if not lits:
                self.emit(-aux)  # empty disjunction is false
            else:
                for lit in lits:
                    self.emit(aux, -lit)
                self.emit(-aux, *lits)
        elif isinstance(f, Iff):
            a = self.define(f.left)
            b = self.define(f.right)
            aux = self.fresh()
            self.emit(-aux, -a, b)
            self.emit(-aux, a, -b)
            self.emit(aux, a, b)
            self.emit(aux, -a, -b)
        else:
            raise TypeError(f"cannot convert leaf {f!r}")
        self._defs[f] = aux
        return aux

    def assert_true(self, f: Formula) -> None:
        if isinstance(f, Lit):
            self.emit(f.signed())
        elif isinstance(f, Not):
            self.assert_false(f.child)
        elif isinstance(f, And):
            for c in f.children:
                self.assert_true(c)
        elif isinstance(f, Or):
            if not f.children:
                self.emit()  # trivially unsatisfiable input
                return
            self.emit(*[self.define(c) for c in f.children])
        elif isinstance(f, Implies):
            self.assert_true(Or((Not(f.antecedent), f.consequent)))
        elif isinstance(f, Iff):
            self.assert_true(Implies(f.left, f.right))
            self.assert_true(Implies(f.right, f.left))
        else:
            raise TypeError(f"unexpected leaf in constraint: {f!r}")

    def assert_false(self, f: Formula) -> None:
        if isinstance(f, Lit):
            self.emit(-f.signed())
        elif isinstance(f, Not):
            self.assert_true(f.child)
        elif isinstance(f, Or):
            for c in f.children:
                self.assert_false(c)
        elif isinstance(f, And):
            if not f.children:
                self.emit()
                return
            self.emit(*[-self.define(c) for c in f.children])
        elif isinstance(f, Implies):
            self.assert_true(f.antecedent)
            self.assert_false(f.consequent)
        elif isinstance(f, Iff):
            self.emit(self.define(f.left), self.define(f.right))
            self.emit(-self.define(f.left), -self.define(f.right))
        else:
            raise TypeError(f"unexpected leaf in constraint: {f!r}")


def formulas_to_cnf(constraints: Iterable[Formula], num_model_vars: int) -> CnfFormula:
    """Equisatisfiable CNF; model-variable assignments satisfying the input
    formulas extend uniquely to CNF models (definition variables are forced)."""
    builder = _CnfBuilder(num_model_vars)
    for f in constraints:
        builder.assert_true(f)
    return CnfFormula(builder.clauses, builder.next_var - 1, num_model_vars)


def extend_assignment(cnf: CnfFormula, model_assignment: Mapping[int, bool]) -> dict[int, bool] | None:
    """Extend an assignment of model variables to internal variables by unit
    propagation; None if the clause set is contradicted. Test helper."""
    assign: dict[int, bool] = dict(model_assignment)
    changed = True
    while changed:
        changed = False
        for clause in cnf.clauses:
            unassigned = [lit for lit in clause if abs(lit) not in assign]
            satisfied = any(assign.get(abs(lit)) == (lit > 0) for lit in clause)
            if satisfied:
                continue
            if not unassigned:
                return None
            if len(unassigned) == 1:
                lit = unassigned[0]
                assign[abs(lit)] = lit > 0
                changed = True
    for v in range(1, cnf.num_vars + 1):
        assign.setdefault(v, False)
    return assign if cnf.is_satisfied_by(assign) else None

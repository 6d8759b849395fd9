"""Parser and printer for the plain-text feature model DSL.

Grammar sketch::

    model       := root-block constraints-block*
    root-block  := 'root' NAME '{' body '}'
    body        := (child | group | attr)*
    child       := ('mandatory' | 'optional')? NAME ('[' INT '..' INT ']')? ('{' body '}')? ';'?
    group       := ('alternative' | 'or') '{' (NAME ('{' body '}')? ';'?)* '}'
    attr        := 'attr' NAME 'in' '{' value (',' value)* '}' ';'
    constraints := 'constraints' '{' (statement ';')* '}'
    statement   := ref 'requires' ref ('(' NAME '=' value (',' NAME '=' value)* ')')?
                 | ref 'excludes' ref
                 | formula
    formula     := iff over atoms with '!', '&', '|', '=>', '<=>' and parentheses
    atom        := ref ('.' NAME '=' value)?
    ref         := segment ('/' segment)*  ; segment := NAME ('#' INT)?

Unbounded cardinalities (``*``) are rejected. ``//`` starts a line comment.
Group children implicitly have cardinality [0..1]; selection is governed by
the group semantics. A feature may use a single decomposition kind: either
plain children or one alternative/or group.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..logic import And, Atom, Formula, Iff, Implies, Not, Or, format_formula
from .model import (
    Attribute,
    Cardinality,
    Configuration,
    Excludes,
    Feature,
    FeatureModel,
    ModelError,
    Propositional,
    Ref,
    Requires,
    Value,
    format_value,
    path_sort_key,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<number>-?\d+\.\d+|-?\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct><=>|=>|\.\.|[{}()\[\],;=#/.!&|*])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"root", "mandatory", "optional", "alternative", "or", "attr", "in",
             "constraints", "requires", "excludes"}


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str  # 'number' | 'name' | 'punct' | 'eof'
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        token_text = match.group()
        if kind != "ws":
            tokens.append(_Token(kind, token_text, line, match.start() - line_start + 1))
        newlines = token_text.count("\n")
        if newlines:
            line += newlines
            line_start = match.start() + token_text.rfind("\n") + 1
        pos = match.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = _tokenize(text)
        self.index = 0

    # -- token helpers -------------------------------------------------------

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def error(self, message: str) -> ParseError:
        tok = self.current
        return ParseError(message, tok.line, tok.column)

    def advance(self) -> _Token:
        tok = self.current
        self.index += 1
        return tok

    def at(self, text: str) -> bool:
        return self.current.text == text and self.current.kind in ("punct", "name")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> _Token:
        if not self.at(text):
            raise self.error(f"expected '{text}', found '{self.current.text or 'end of input'}'")
        return self.advance()

    def expect_name(self, what: str = "identifier") -> str:
        tok = self.current
        if tok.kind != "name" or tok.text in _KEYWORDS:
            raise self.error(f"expected {what}, found '{tok.text or 'end of input'}'")
        self.advance()
        return tok.text

    def expect_int(self) -> int:
        tok = self.current
        if tok.kind != "number" or "." in tok.text or tok.text.startswith("-"):
            raise self.error(f"expected a non-negative integer, found '{tok.text}'")
        self.advance()
        return int(tok.text)

    # -- model ---------------------------------------------------------------

    def parse_model(self) -> FeatureModel:
        self.expect("root")
        name = self.expect_name("root feature name")
        self.expect("{")
        children, attributes, group = self.parse_body(path="")
        self.expect("}")
        constraints: list = []
        while self.accept("constraints"):
            self.expect("{")
            while not self.at("}"):
                constraints.append(self.parse_constraint())
                self.expect(";")
            self.expect("}")
        if self.current.kind != "eof":
            raise self.error(f"unexpected trailing input '{self.current.text}'")
        root = Feature(name, "", Cardinality(1, 1), group, tuple(children), tuple(attributes))
        return FeatureModel(root, tuple(constraints))

    def parse_body(self, path: str) -> tuple[list[Feature], list[Attribute], str]:
        children: list[Feature] = []
        attributes: list[Attribute] = []
        group = "and"
        saw_group = False
        while not self.at("}"):
            if self.at("attr"):
                attributes.append(self.parse_attribute())
            elif self.at("alternative") or self.at("or"):
                if saw_group or children:
                    raise self.error("a feature may have a single decomposition "
                                     "(plain children or one group)")
                group = self.advance().text
                saw_group = True
                self.expect("{")
                while not self.at("}"):
                    children.append(self.parse_group_child(path))
                self.expect("}")
            elif self.current.kind == "name" or self.at("mandatory") or self.at("optional"):
                if saw_group:
                    raise self.error("plain children cannot follow a group")
                children.append(self.parse_child(path))
            else:
                raise self.error(f"unexpected '{self.current.text}' in feature body")
        return children, attributes, group

    def parse_child(self, parent_path: str) -> Feature:
        modifier: str | None = None
        if self.at("mandatory") or self.at("optional"):
            modifier = self.advance().text
        name = self.expect_name("feature name")
        cardinality: Cardinality | None = None
        if self.accept("["):
            low = self.expect_int()
            self.expect("..")
            if self.at("*"):
                raise self.error("unbounded cardinality '*' is not supported")
            high = self.expect_int()
            self.expect("]")
            if modifier is not None:
                raise self.error("an explicit cardinality cannot be combined "
                                 "with mandatory/optional")
            try:
                cardinality = Cardinality(low, high)
            except ModelError as exc:
                raise self.error(str(exc)) from None
        if cardinality is None:
            cardinality = Cardinality(0, 1) if modifier == "optional" else Cardinality(1, 1)
        return self.finish_feature(name, parent_path, cardinality)

    def parse_group_child(self, parent_path: str) -> Feature:
        name = self.expect_name("feature name")
        return self.finish_feature(name, parent_path, Cardinality(0, 1))

    def finish_feature(self, name: str, parent_path: str, cardinality: Cardinality) -> Feature:
        path = name if not parent_path else f"{parent_path}/{name}"
        children: list[Feature] = []
        attributes: list[Attribute] = []
        group = "and"
        if self.accept("{"):
            children, attributes, group = self.parse_body(path)
            self.expect("}")
        self.accept(";")
        try:
            return Feature(name, path, cardinality, group, tuple(children), tuple(attributes))
        except ModelError as exc:
            raise self.error(str(exc)) from None

    def parse_attribute(self) -> Attribute:
        self.expect("attr")
        name = self.expect_name("attribute name")
        self.expect("in")
        self.expect("{")
        domain = [self.parse_value()]
        while self.accept(","):
            domain.append(self.parse_value())
        self.expect("}")
        self.expect(";")
        return Attribute(name, tuple(domain))

    def parse_value(self) -> Value:
        tok = self.current
        if tok.kind == "number":
            self.advance()
            return float(tok.text) if "." in tok.text else int(tok.text)
        if tok.kind == "name" and tok.text not in _KEYWORDS:
            self.advance()
            return tok.text
        raise self.error(f"expected an attribute value, found '{tok.text}'")

    # -- constraints ---------------------------------------------------------

    def parse_constraint(self):
        start = self.index
        if self.current.kind == "name" and self.current.text not in _KEYWORDS:
            ref = self.parse_ref(allow_attribute=False)
            if self.accept("requires"):
                target = self.parse_ref(allow_attribute=False)
                bindings: list[tuple[str, Value]] = []
                if self.accept("("):
                    while True:
                        attr_name = self.expect_name("attribute name")
                        self.expect("=")
                        bindings.append((attr_name, self.parse_value()))
                        if not self.accept(","):
                            break
                    self.expect(")")
                return Requires(ref, target, tuple(bindings))
            if self.accept("excludes"):
                return Excludes(ref, self.parse_ref(allow_attribute=False))
            self.index = start  # plain formula starting with a reference
        return Propositional(self.parse_iff())

    def parse_ref(self, allow_attribute: bool = True) -> Ref:
        segments: list[tuple[str, int | None]] = []
        while True:
            name = self.expect_name("feature name")
            pin: int | None = None
            if self.accept("#"):
                pin = self.expect_int()
                if pin < 1:
                    raise self.error("instance indices are 1-based")
            segments.append((name, pin))
            if not self.accept("/"):
                break
        attribute: str | None = None
        value: Value | None = None
        if allow_attribute and self.accept("."):
            attribute = self.expect_name("attribute name")
            self.expect("=")
            value = self.parse_value()
        return Ref(tuple(segments), attribute, value)

    def parse_iff(self) -> Formula:
        left = self.parse_implies()
        while self.accept("<=>"):
            left = Iff(left, self.parse_implies())
        return left

    def parse_implies(self) -> Formula:
        left = self.parse_or()
        if self.accept("=>"):
            return Implies(left, self.parse_implies())
        return left

    def parse_or(self) -> Formula:
        parts = [self.parse_and()]
        while self.accept("|"):
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_and(self) -> Formula:
        parts = [self.parse_unary()]
        while self.accept("&"):
            parts.append(self.parse_unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_unary(self) -> Formula:
        if self.accept("!"):
            return Not(self.parse_unary())
        if self.accept("("):
            inner = self.parse_iff()
            self.expect(")")
            return inner
        return Atom(self.parse_ref())


def parse_fm(text: str) -> FeatureModel:
    """Parse a feature model document; raises ParseError / ModelError."""
    return _Parser(text).parse_model()


# -- printing ----------------------------------------------------------------

def _print_value_list(values: tuple[Value, ...]) -> str:
    return ", ".join(format_value(v) for v in values)


def _print_feature(feature: Feature, indent: int, out: list[str], in_group: bool) -> None:
    pad = "    " * indent
    card = feature.cardinality
    if in_group:
        head = feature.name
    elif card.max > 1 or card.min > 1:
        head = f"{feature.name} [{card.min}..{card.max}]"
    elif card.min == 0:
        head = f"optional {feature.name}"
    else:
        head = f"mandatory {feature.name}"
    body: list[str] = []
    for attr in feature.attributes:
        body.append(f"{pad}    attr {attr.name} in {{{_print_value_list(attr.domain)}}};")
    if feature.children and feature.group != "and":
        body.append(f"{pad}    {feature.group} {{")
        for child in feature.children:
            _print_feature(child, indent + 2, body, in_group=True)
        body.append(f"{pad}    }}")
    else:
        for child in feature.children:
            _print_feature(child, indent + 1, body, in_group=False)
    if body:
        out.append(f"{pad}{head} {{")
        out.extend(body)
        out.append(f"{pad}}}")
    else:
        out.append(f"{pad}{head};")


def _print_formula(f: Formula) -> str:
    return format_formula(f, lambda ref: ref.text())


def print_fm(model: FeatureModel) -> str:
    """Render a model back to DSL text; reparsing yields an equal model."""
    out: list[str] = [f"root {model.root.name} {{"]
    for attr in model.root.attributes:
        out.append(f"    attr {attr.name} in {{{_print_value_list(attr.domain)}}};")
    if model.root.children and model.root.group != "and":
        out.append(f"    {model.root.group} {{")
        for child in model.root.children:
            _print_feature(child, 2, out, in_group=True)
        out.append("    }")
    else:
        for child in model.root.children:
            _print_feature(child, 1, out, in_group=False)
    out.append("}")
    if model.constraints:
        out.append("")
        out.append("constraints {")
        for constraint in model.constraints:
            if isinstance(constraint, Requires):
                line = f"{constraint.source.text()} requires {constraint.target.text()}"
                if constraint.bindings:
                    args = ", ".join(f"{n}={format_value(v)}" for n, v in constraint.bindings)
                    line += f"({args})"
            elif isinstance(constraint, Excludes):
                line = f"{constraint.left.text()} excludes {constraint.right.text()}"
            else:
                line = _print_formula(constraint.formula)
            out.append(f"    {line};")
        out.append("}")
    return "\n".join(out) + "\n"


# -- configuration files -------------------------------------------------------

def parse_config(text: str) -> Configuration:
    """Read a configuration file: one instance path per line, attribute
    bindings in braces (``path {attr=value, ...}``)."""
    selections: list[str] = []
    bindings: dict[str, Value] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        match = re.fullmatch(r"(?P<path>[^\s{]+)\s*(?:\{(?P<attrs>[^}]*)\})?", line)
        if match is None:
            raise ParseError("expected 'path' or 'path {attr=value, ...}'", lineno, 1)
        path = match.group("path")
        selections.append(path)
        attrs = match.group("attrs")
        if attrs:
            for part in attrs.split(","):
                if "=" not in part:
                    raise ParseError(f"bad attribute binding '{part.strip()}'", lineno, 1)
                name, _, value_text = part.partition("=")
                bindings[f"{path}.{name.strip()}"] = _parse_value_text(value_text.strip(), lineno)
    return Configuration.create(selections, bindings)


def _parse_value_text(text: str, lineno: int) -> Value:
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if re.fullmatch(r"-?\d+\.\d+", text):
        return float(text)
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", text):
        return text
    raise ParseError(f"bad attribute value '{text}'", lineno, 1)


def print_config(config: Configuration) -> str:
    """Canonical text form: structurally sorted paths, sorted attributes."""
    per_instance: dict[str, list[tuple[str, Value]]] = {}
    for binding_path, value in config.bindings:
        path, _, name = binding_path.rpartition(".")
        per_instance.setdefault(path, []).append((name, value))
    lines = []
    for path in sorted(config.selections, key=path_sort_key):
        attrs = per_instance.get(path)
        if attrs:
            rendered = ", ".join(f"{n}={format_value(v)}" for n, v in sorted(attrs))
            lines.append(f"{path} {{{rendered}}}")
        else:
            lines.append(path)
    return "\n".join(lines) + "\n"

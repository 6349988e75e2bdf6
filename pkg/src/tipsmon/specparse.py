"""Parser and formatter for the five-field step format and its safety clauses.

The safety mini-language, one clause per rule, clauses joined by ";":

    proximity   not too close to NAME [ "(" NUMBER "mm" ")" ]
    force       max force NUMBER "N" on NAME
                do not overstretch NAME [ "(" NUMBER "x" ")" ]
    clips       clips ":" INT proximal "," INT distal on NAME [ before cut ]
    foreign     no foreign objects
    completion  free and retrieve NAME [ via pouch ]
    suture      suture only within REGION of NAME

Names are resolved like the authoring auto-completion: a written name resolves
iff the completion of the written text is unique or contains an exact
case-insensitive match. Omitted numeric parameters take the defaults below;
the canonical formatter always writes them out explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import catalog as catalog_mod
from .model import (
    ClipLayout,
    Completion,
    Finding,
    ForceLimit,
    NoForeignBodies,
    ProcedureSpec,
    Proximity,
    SafetyRule,
    Simlet,
    SutureRegionRule,
    TaskStep,
    ToolSpec,
    validate_spec,
)

DEFAULT_PROXIMITY_MM = 5.0
DEFAULT_FORCE_VESSEL_N = 2.0
DEFAULT_FORCE_OTHER_N = 5.0
DEFAULT_STRETCH_RATIO = 1.5


class SafetyParseError(ValueError):
    """Syntax or name-resolution failure, positioned within the parsed text.

    `column` and `token` are 1-based; both may be None for field-level errors
    that have no position inside a safety clause.
    """

    def __init__(self, message: str, column: Optional[int] = None, token: Optional[int] = None):
        self.message = message
        self.column = column
        self.token = token
        where = f" at token {token} (column {column})" if token is not None else ""
        super().__init__(f"{message}{where}")


def default_force_limit(simlet: Simlet) -> float:
    if simlet.force_threshold is not None:
        return simlet.force_threshold
    return DEFAULT_FORCE_VESSEL_N if simlet.kind in ("vessel", "duct") else DEFAULT_FORCE_OTHER_N


def default_stretch_limit(simlet: Simlet) -> float:
    if simlet.stretch_threshold is not None:
        return simlet.stretch_threshold
    return DEFAULT_STRETCH_RATIO


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_PUNCT = "():,"


@dataclass(frozen=True)
class _Token:
    text: str
    column: int  # 1-based position in the full safety text
    index: int  # 1-based token number within the clause


def _tokenize(text: str, offset: int) -> list:
    """Split one clause into word/number/punctuation tokens with positions."""
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(_Token(ch, offset + i + 1, len(tokens) + 1))
            i += 1
            continue
        j = i
        while j < len(text) and not text[j].isspace() and text[j] not in _PUNCT:
            j += 1
        tokens.append(_Token(text[i:j], offset + i + 1, len(tokens) + 1))
        i = j
    return tokens


class _ClauseParser:
    def __init__(self, tokens: list, clause_offset: int, catalog, tool_id: Optional[str]):
        self.tokens = tokens
        self.pos = 0
        self.clause_offset = clause_offset
        self.catalog = catalog
        self.tool_id = tool_id

    # -- token plumbing ----------------------------------------------------

    def _error(self, message: str, token: Optional[_Token] = None):
        if token is None:
            token = self.tokens[self.pos] if self.pos < len(self.tokens) else None
        if token is None:
            last = self.tokens[-1]
            raise SafetyParseError(message, last.column + len(last.text), last.index + 1)
        raise SafetyParseError(message, token.column, token.index)

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> _Token:
        tok = self.peek()
        if tok is None:
            self._error("unexpected end of clause")
        self.pos += 1
        return tok

    def expect(self, literal: str) -> _Token:
        tok = self.peek()
        if tok is None or tok.text != literal:
            self._error(f"expected '{literal}'", tok)
        return self.take()

    def number(self) -> float:
        tok = self.take()
        try:
            value = float(tok.text)
        except ValueError:
            self._error("expected a number", tok)
        if value <= 0:
            self._error("number must be positive", tok)
        return value

    def integer(self) -> int:
        tok = self.take()
        try:
            value = int(tok.text)
        except ValueError:
            self._error("expected an integer", tok)
        if value < 0:
            self._error("count must be non-negative", tok)
        return value

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    # -- names -------------------------------------------------------------

    def name_until(self, stop_words: Sequence[str] = ()) -> tuple:
        """Consume name tokens until a stop word, '(' or the clause end."""
        parts = []
        first: Optional[_Token] = None
        while not self.at_end():
            tok = self.peek()
            if tok.text == "(" or tok.text in stop_words:
                break
            if tok.text in _PUNCT:
                self._error("unexpected punctuation in name", tok)
            if first is None:
                first = tok
            parts.append(self.take().text)
        if not parts:
            self._error("expected a name")
        return " ".join(parts), first

    def resolve(self, written: str, token: _Token, want: str):
        """Resolve a written name through the catalog auto-completion."""
        candidates = catalog_mod.complete(self.catalog, written)
        exact = [n for n in candidates if n.casefold() == written.casefold()]
        if exact:
            name = exact[0]
        elif len(candidates) == 1:
            name = candidates[0]
        elif not candidates:
            self._error(f"unknown name '{written}'", token)
        else:
            shown = ", ".join(candidates[:4])
            self._error(f"ambiguous name '{written}' (completions: {shown})", token)
        entries = self.catalog.entries_by_name(name)
        if len(entries) != 1:
            self._error(f"ambiguous name '{written}'", token)
        entry = entries[0]
        if want == "anatomy" and not isinstance(entry, Simlet):
            self._error(f"'{name}' is a tool, not anatomy", token)
        if want == "tool" and not isinstance(entry, ToolSpec):
            self._error(f"'{name}' is anatomy, not a tool", token)
        return entry

    def anatomy(self, stop_words: Sequence[str] = ()) -> Simlet:
        written, token = self.name_until(stop_words)
        return self.resolve(written, token, "anatomy")

    # -- clause grammar ----------------------------------------------------

    def parse(self) -> SafetyRule:
        head = self.peek()
        if head is None:
            self._error("empty clause")
        rule = {
            "not": self._proximity,
            "max": self._max_force,
            "do": self._overstretch,
            "clips": self._clips,
            "no": self._foreign,
            "free": self._completion,
            "suture": self._suture,
        }.get(head.text)
        if rule is None:
            self._error(
                "expected a safety clause (not/max/do/clips/no/free/suture)", head
            )
        parsed = rule()
        if not self.at_end():
            self._error("unexpected trailing input")
        return parsed

    def _proximity(self) -> Proximity:
        self.expect("not")
        self.expect("too")
        self.expect("close")
        self.expect("to")
        simlet = self.anatomy()
        distance = DEFAULT_PROXIMITY_MM
        if not self.at_end():
            self.expect("(")
            distance = self.number()
            self.expect("mm")
            self.expect(")")
        return Proximity(
            tool_id=self.tool_id or "",
            protected_anatomy_id=simlet.id,
            min_distance=distance,
        )

    def _max_force(self) -> ForceLimit:
        self.expect("max")
        self.expect("force")
        force = self.number()
        self.expect("N")
        self.expect("on")
        simlet = self.anatomy()
        return ForceLimit(anatomy_id=simlet.id, max_force=force, max_stretch=None)

    def _overstretch(self) -> ForceLimit:
        self.expect("do")
        self.expect("not")
        self.expect("overstretch")
        simlet = self.anatomy()
        stretch = default_stretch_limit(simlet)
        if not self.at_end():
            self.expect("(")
            stretch = self.number()
            self.expect("x")
            self.expect(")")
        return ForceLimit(
            anatomy_id=simlet.id,
            max_force=default_force_limit(simlet),
            max_stretch=stretch,
        )

    def _clips(self) -> ClipLayout:
        self.expect("clips")
        self.expect(":")
        proximal = self.integer()
        self.expect("proximal")
        self.expect(",")
        distal = self.integer()
        self.expect("distal")
        self.expect("on")
        simlet = self.anatomy(stop_words=("before",))
        precede = False
        if not self.at_end():
            self.expect("before")
            self.expect("cut")
            precede = True
        return ClipLayout(
            vessel_id=simlet.id,
            required_proximal=proximal,
            required_distal=distal,
            must_precede_cut=precede,
        )

    def _foreign(self) -> NoForeignBodies:
        self.expect("no")
        self.expect("foreign")
        self.expect("objects")
        return NoForeignBodies()

    def _completion(self) -> Completion:
        self.expect("free")
        self.expect("and")
        self.expect("retrieve")
        simlet = self.anatomy(stop_words=("via",))
        via_pouch = False
        if not self.at_end():
            self.expect("via")
            self.expect("pouch")
            via_pouch = True
        return Completion(
            target_anatomy_id=simlet.id,
            must_be_freed=True,
            must_be_retrieved_via_pouch=via_pouch,
        )

    def _suture(self) -> SutureRegionRule:
        self.expect("suture")
        self.expect("only")
        self.expect("within")
        region_parts = []
        region_token = None
        while not self.at_end() and self.peek().text != "of":
            tok = self.take()
            if region_token is None:
                region_token = tok
            region_parts.append(tok.text)
        if not region_parts:
            self._error("expected a region name")
        self.expect("of")
        simlet = self.anatomy()
        region = " ".join(region_parts)
        known = {r.region_id.casefold(): r.region_id for r in simlet.suture_regions}
        resolved = known.get(region.casefold())
        if resolved is None:
            self._error(f"unknown suture region '{region}' on '{simlet.name}'", region_token)
        return SutureRegionRule(anatomy_id=simlet.id, region_id=resolved)


def parse_safety(text: str, catalog, tool_id: Optional[str] = None) -> list:
    """Parse a ";"-separated safety clause list into typed rules.

    Proximity rules bind to `tool_id` (the enclosing step's tool). Either the
    whole text parses or a positioned SafetyParseError is raised.
    """
    rules = []
    offset = 0
    clauses = text.split(";")
    if text.strip() == "":
        return rules
    for clause in clauses:
        tokens = _tokenize(clause, offset)
        if not tokens:
            raise SafetyParseError("empty clause", offset + 1, 1)
        parser = _ClauseParser(tokens, offset, catalog, tool_id)
        rules.append(parser.parse())
        offset += len(clause) + 1  # account for the ';'
    return rules


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------


def _resolve_field(catalog, written: str, want: str):
    candidates = catalog_mod.complete(catalog, written)
    exact = [n for n in candidates if n.casefold() == written.casefold()]
    if exact:
        name = exact[0]
    elif len(candidates) == 1:
        name = candidates[0]
    elif not candidates:
        raise SafetyParseError(f"unknown name '{written}'")
    else:
        raise SafetyParseError(f"ambiguous name '{written}' (completions: {', '.join(candidates[:4])})")
    entries = catalog.entries_by_name(name)
    if len(entries) != 1:
        raise SafetyParseError(f"ambiguous name '{written}'")
    entry = entries[0]
    if want == "anatomy" and not isinstance(entry, Simlet):
        raise SafetyParseError(f"'{name}' is a tool, not anatomy")
    if want == "tool" and not isinstance(entry, ToolSpec):
        raise SafetyParseError(f"'{name}' is anatomy, not a tool")
    return entry


def parse_step(fields: Sequence[str], catalog, index: int = 1) -> TaskStep:
    """Parse one (action, anatomy, tool, safety, comment) record."""
    if len(fields) != 5:
        raise SafetyParseError(f"expected five fields, got {len(fields)}")
    action, anatomy_text, tool_text, safety_text, comment = fields
    if not action.strip():
        raise SafetyParseError("action must be nonempty")
    simlet = _resolve_field(catalog, anatomy_text.strip(), "anatomy")
    tool = _resolve_field(catalog, tool_text.strip(), "tool")
    rules = parse_safety(safety_text, catalog, tool_id=tool.id)
    return TaskStep(
        index=index,
        action=action.strip(),
        anatomy_id=simlet.id,
        tool_id=tool.id,
        safety=tuple(rules),
        safety_text=safety_text,
        comment=comment,
    )


def _fmt(x: float) -> str:
    return f"{x:g}"


def format_rule(rule: SafetyRule, catalog) -> str:
    """Canonical clause text; numeric parameters always written explicitly."""
    simlets = catalog.simlets

    def name(sid: str) -> str:
        return simlets[sid].name

    if isinstance(rule, Proximity):
        return f"not too close to {name(rule.protected_anatomy_id)} ({_fmt(rule.min_distance)} mm)"
    if isinstance(rule, ForceLimit):
        if rule.max_stretch is None:
            return f"max force {_fmt(rule.max_force)} N on {name(rule.anatomy_id)}"
        return f"do not overstretch {name(rule.anatomy_id)} ({_fmt(rule.max_stretch)} x)"
    if isinstance(rule, NoForeignBodies):
        return "no foreign objects"
    if isinstance(rule, ClipLayout):
        text = (
            f"clips: {rule.required_proximal} proximal, {rule.required_distal} distal "
            f"on {name(rule.vessel_id)}"
        )
        return text + " before cut" if rule.must_precede_cut else text
    if isinstance(rule, Completion):
        text = f"free and retrieve {name(rule.target_anatomy_id)}"
        return text + " via pouch" if rule.must_be_retrieved_via_pouch else text
    return f"suture only within {rule.region_id} of {name(rule.anatomy_id)}"


def format_step(step: TaskStep, catalog) -> tuple:
    """Canonical five-field text such that parse_step(format_step(s)) keeps
    the action, resolved ids, and rules of s exactly."""
    return (
        step.action,
        catalog.simlets[step.anatomy_id].name,
        catalog.tools[step.tool_id].name,
        "; ".join(format_rule(r, catalog) for r in step.safety),
        step.comment,
    )


# ---------------------------------------------------------------------------
# Instruction pages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstructionPage:
    step_index: int
    heading: str
    body: str
    callouts: tuple


def _callout(rule: SafetyRule, catalog) -> str:
    simlets = catalog.simlets

    def name(sid: str) -> str:
        return simlets[sid].name

    if isinstance(rule, Proximity):
        return f"Keep ≥ {_fmt(rule.min_distance)} mm from {name(rule.protected_anatomy_id)}"
    if isinstance(rule, ForceLimit):
        if rule.max_stretch is None:
            return f"Apply at most {_fmt(rule.max_force)} N on {name(rule.anatomy_id)}"
        return f"Do not stretch {name(rule.anatomy_id)} beyond {_fmt(rule.max_stretch)}x"
    if isinstance(rule, NoForeignBodies):
        return "Leave no foreign objects in the body"
    if isinstance(rule, ClipLayout):
        text = (
            f"Place {rule.required_proximal} proximal and {rule.required_distal} "
            f"distal clips on {name(rule.vessel_id)}"
        )
        return text + " before cutting" if rule.must_precede_cut else text
    if isinstance(rule, Completion):
        text = f"Free and retrieve {name(rule.target_anatomy_id)}"
        return text + " via the pouch" if rule.must_be_retrieved_via_pouch else text
    return f"Suture only within {rule.region_id} of {name(rule.anatomy_id)}"


def generate_instructions(spec: ProcedureSpec, catalog) -> list:
    """One page per step, plus the completion callout on the final page."""
    pages = []
    for step in spec.steps:
        anatomy = catalog.simlets[step.anatomy_id].name
        tool = catalog.tools[step.tool_id].name
        callouts = tuple(_callout(r, catalog) for r in step.safety)
        if step.index == len(spec.steps):
            callouts = callouts + (_callout(spec.completion_rule, catalog),)
        pages.append(
            InstructionPage(
                step_index=step.index,
                heading=f"Step {step.index}: {step.action}",
                body=f"{step.action} {anatomy} using {tool}",
                callouts=callouts,
            )
        )
    return pages


def page_markdown(page: InstructionPage) -> str:
    lines = [f"# {page.heading}", "", page.body, ""]
    for callout in page.callouts:
        lines.append(f"> {callout}")
    if page.callouts:
        lines.append("")
    return "\n".join(lines)


def write_instruction_pages(spec: ProcedureSpec, catalog, out_dir) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for page in generate_instructions(spec, catalog):
        path = out_dir / f"step_{page.step_index:02d}.md"
        path.write_text(page_markdown(page), encoding="utf-8")
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Spec documents (authoring file format)
# ---------------------------------------------------------------------------


class SpecLoadError(ValueError):
    """A spec document that does not parse or validate; carries findings."""

    def __init__(self, findings: list):
        self.findings = findings
        details = "; ".join(
            f"step {f.step}: {f.message}" if f.step else f.message for f in findings
        )
        super().__init__(f"invalid spec: {details}")


def parse_spec_document(doc, catalog) -> tuple:
    """Parse an authoring document into (ProcedureSpec | None, findings).

    Findings carry the 1-based step index and the column inside the safety
    text where a clause failed, mirroring what the authoring UI renders.
    """
    findings: list = []
    if not isinstance(doc, dict):
        return None, [Finding("spec document must be a JSON object")]
    title = doc.get("title")
    catalog_ref = doc.get("catalog")
    completion_text = doc.get("completion")
    raw_steps = doc.get("steps")
    if not isinstance(title, str) or not title:
        findings.append(Finding("missing or empty 'title'"))
    if not isinstance(catalog_ref, str):
        findings.append(Finding("missing 'catalog' reference"))
    if not isinstance(raw_steps, list) or not raw_steps:
        findings.append(Finding("'steps' must be a nonempty array"))
        return None, findings

    completion = None
    if not isinstance(completion_text, str) or not completion_text.strip():
        findings.append(Finding("missing 'completion' clause"))
    else:
        try:
            rules = parse_safety(completion_text, catalog)
        except SafetyParseError as err:
            findings.append(Finding(f"completion clause: {err.message}", None, err.column))
        else:
            if len(rules) == 1 and isinstance(rules[0], Completion):
                completion = rules[0]
            else:
                findings.append(Finding("'completion' must be a single free-and-retrieve clause"))

    steps = []
    for i, raw in enumerate(raw_steps):
        idx = i + 1
        if not isinstance(raw, dict):
            findings.append(Finding("step must be an object", idx))
            continue
        fields = tuple(str(raw.get(k, "")) for k in ("action", "anatomy", "tool", "safety", "comment"))
        try:
            steps.append(parse_step(fields, catalog, index=idx))
        except SafetyParseError as err:
            findings.append(Finding(err.message, idx, err.column))

    if findings or completion is None or len(steps) != len(raw_steps):
        return None, findings
    spec = ProcedureSpec(
        title=title,
        catalog_ref=catalog_ref,
        steps=tuple(steps),
        completion_rule=completion,
    )
    findings.extend(validate_spec(spec, catalog))
    return spec, findings


def format_spec_document(spec: ProcedureSpec, catalog) -> dict:
    """Canonical authoring document for a spec (inverse of parse_spec_document)."""
    steps = []
    for step in spec.steps:
        action, anatomy, tool, safety, comment = format_step(step, catalog)
        steps.append(
            {"action": action, "anatomy": anatomy, "tool": tool, "safety": safety, "comment": comment}
        )
    return {
        "title": spec.title,
        "catalog": spec.catalog_ref,
        "completion": format_rule(spec.completion_rule, catalog),
        "steps": steps,
    }


def load_spec_file(path, catalog) -> ProcedureSpec:
    """Load and strictly validate a spec document; raise SpecLoadError otherwise."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise SpecLoadError([Finding(f"malformed spec document: {err}")]) from err
    spec, findings = parse_spec_document(doc, catalog)
    if findings or spec is None:
        raise SpecLoadError(findings or [Finding("spec document did not parse")])
    return spec

"""
Instance and mechanism files.

Both formats are line based: a versioned header, then one keyword per line
followed by its arguments. Blank lines and text after '#' are ignored.
Objects are referred to by name everywhere; agents by their index. Parsed
records are validated through pydantic models, whose errors are reported
as `ParseError` with the offending line and field.
"""

from enum import StrEnum
from pathlib import Path
from typing import Any, Sequence

import pydantic
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mechkit.blocks import decompose
from mechkit.constraint import Constraint, ConstraintKind, Suballocation, builtin_constraint, project
from mechkit.exceptions import ArgumentError, ParseError
from mechkit.logger import log
from mechkit.mechanisms import (
    CompromiserAssignment,
    ConstraintTraversing,
    Extend,
    Gsd,
    GsdOrdering,
    LocalDictatorship,
    Mechanism,
    SerialDictatorship,
    TabulatedMechanism,
)
from mechkit.preferences import Preference, Profile, preference_space

INSTANCE_HEADER = "mechkit-instance v1"
MECHANISM_HEADER = "mechkit-mechanism v1"

_RESERVED = set(",:>|#")


class MechanismType(StrEnum):
    SERIAL_DICTATORSHIP = "serial_dictatorship"
    GSD = "gsd"
    LOCAL_DICTATORSHIP = "local_dictatorship"
    CONSTRAINT_TRAVERSING = "constraint_traversing"
    EXTEND = "extend"
    TABLE = "table"


class InstanceFile(BaseModel):
    """A validated instance: agents, object names and the constraint."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    agents: int = Field(ge=1)
    objects: list[str] = Field(min_length=1)
    kind: ConstraintKind
    feasible: list[tuple[str, ...]] = Field(default_factory=list)

    @field_validator("objects")
    @classmethod
    def _names(cls, objects: list[str]) -> list[str]:
        if len(set(objects)) != len(objects):
            raise ValueError("object names must be unique")
        for name in objects:
            if _RESERVED & set(name) or name == "-":
                raise ValueError(f"object name {name!r} uses a reserved character")
        return objects

    @model_validator(mode="after")
    def _feasible_matches_kind(self) -> "InstanceFile":
        if self.kind is ConstraintKind.CUSTOM:
            if not self.feasible:
                raise ValueError("explicit constraint lists no feasible allocations")
            known = set(self.objects)
            for allocation in self.feasible:
                if len(allocation) != self.agents:
                    raise ValueError(f"allocation {' '.join(allocation)} does not have {self.agents} entries")
                unknown = [x for x in allocation if x not in known]
                if unknown:
                    raise ValueError(f"unknown objects {unknown}")
        elif self.feasible:
            raise ValueError(f"feasible lines are only allowed with an explicit constraint, not {self.kind}")
        return self

    @property
    def n(self) -> int:
        return self.agents

    @property
    def m(self) -> int:
        return len(self.objects)

    def object_index(self, name: str) -> int:
        try:
            return self.objects.index(name)
        except ValueError as e:
            raise ParseError(f"unknown object {name!r}") from e

    def constraint(self) -> Constraint:
        allocations = None
        if self.kind is ConstraintKind.CUSTOM:
            allocations = [[self.object_index(x) for x in a] for a in self.feasible]
        try:
            return builtin_constraint(self.kind, self.n, self.m, allocations)
        except ArgumentError as e:
            raise ParseError(str(e), field="constraint") from e


class MechanismFile(BaseModel):
    """A validated mechanism description; objects still referred to by name.

    Attributes:
        order: Agent priority (serial dictatorship, GSD default, extend continuation).
        overrides: Next agent per suballocation key "agent:object,...".
        dictators: Dictator per block label.
        compromisers: Compromising agents per allocation "object,object,...".
        default_compromiser: Compromiser of unlisted infeasible allocations.
        agents: Agents served by the sub-mechanism of an extension.
        sub: Path of the sub-mechanism file, relative to this file.
        entries: Allocation "object,..." per profile "a>b>c|c>b>a".
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    type: MechanismType
    order: list[int] = Field(default_factory=list)
    overrides: dict[str, int] = Field(default_factory=dict)
    dictators: dict[str, int] = Field(default_factory=dict)
    compromisers: dict[str, list[int]] = Field(default_factory=dict)
    default_compromiser: int | None = None
    agents: list[int] = Field(default_factory=list)
    sub: str | None = None
    entries: dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _parameters_match_type(self) -> "MechanismFile":
        needed = {
            MechanismType.SERIAL_DICTATORSHIP: ["order"],
            MechanismType.GSD: ["order"],
            MechanismType.LOCAL_DICTATORSHIP: [],
            MechanismType.CONSTRAINT_TRAVERSING: [],
            MechanismType.EXTEND: ["agents", "sub", "order"],
            MechanismType.TABLE: ["entries"],
        }[self.type]
        missing = [name for name in needed if not getattr(self, name)]
        if missing:
            raise ValueError(f"{self.type} needs {', '.join(missing)}")
        if self.type is MechanismType.CONSTRAINT_TRAVERSING and not (
            self.compromisers or self.default_compromiser is not None
        ):
            raise ValueError("constraint_traversing needs compromiser lines or a default-compromiser")
        return self


def _records(text: str, header: str) -> list[tuple[int, str, list[str]]]:
    records = []
    seen_header = False
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not seen_header:
            if line != header:
                raise ParseError(f"expected header '{header}', found '{line}'", line=number)
            seen_header = True
            continue
        keyword, *rest = line.split()
        records.append((number, keyword, rest))
    if not seen_header:
        raise ParseError(f"missing header '{header}'", line=1)
    return records


def _validate(model: type[BaseModel], data: dict[str, Any], lines: dict[tuple, int]) -> Any:
    try:
        return model.model_validate(data)
    except pydantic.ValidationError as e:
        error = e.errors()[0]
        loc = tuple(error["loc"])
        field = ".".join(str(part) for part in loc) or None
        line = next((lines[loc[:k]] for k in range(len(loc), 0, -1) if loc[:k] in lines), None)
        message = error["msg"].removeprefix("Value error, ")
        raise ParseError(message, line=line, field=field) from e


def _single(number: int, keyword: str, rest: list[str], count: int = 1) -> list[str]:
    if len(rest) != count:
        raise ParseError(f"'{keyword}' takes {count} argument(s), got {len(rest)}", line=number, field=keyword)
    return rest


def _integer(number: int, field: str, text: str) -> int:
    try:
        return int(text)
    except ValueError as e:
        raise ParseError(f"expected an agent index, got {text!r}", line=number, field=field) from e


def parse_instance(text: str) -> InstanceFile:
    """
    Parse the text of an instance file.

    Args:
        text: File contents.

    Returns:
        InstanceFile: The validated instance.

    Raises:
        ParseError: With the line and field of the first problem.
    """
    data: dict[str, Any] = {}
    lines: dict[tuple, int] = {}
    feasible: list[tuple[str, ...]] = []
    for number, keyword, rest in _records(text, INSTANCE_HEADER):
        if keyword == "agents":
            (value,) = _single(number, keyword, rest)
            data["agents"] = value
            lines[("agents",)] = number
        elif keyword == "objects":
            data["objects"] = rest
            lines[("objects",)] = number
        elif keyword == "constraint":
            (kind,) = _single(number, keyword, rest)
            data["kind"] = ConstraintKind.CUSTOM.value if kind == "explicit" else kind
            lines[("kind",)] = number
            lines[()] = number
        elif keyword == "feasible":
            lines[("feasible", len(feasible))] = number
            feasible.append(tuple(rest))
        else:
            raise ParseError(f"unknown keyword '{keyword}'", line=number, field=keyword)
    if feasible:
        data["feasible"] = feasible
    return _validate(InstanceFile, data, lines)


def load_instance(path: str | Path) -> InstanceFile:
    log.debug("Loading instance %s", path)
    return parse_instance(Path(path).read_text(encoding="utf-8"))


def parse_mechanism(text: str) -> MechanismFile:
    """Parse the text of a mechanism file."""
    data: dict[str, Any] = {}
    lines: dict[tuple, int] = {}
    overrides: dict[str, int] = {}
    dictators: dict[str, int] = {}
    compromisers: dict[str, list[int]] = {}
    entries: dict[str, str] = {}
    for number, keyword, rest in _records(text, MECHANISM_HEADER):
        if keyword == "type":
            (data["type"],) = _single(number, keyword, rest)
            lines[("type",)] = number
            lines[()] = number
        elif keyword in ("order", "agents"):
            data[keyword] = [_integer(number, keyword, x) for x in rest]
            lines[(keyword,)] = number
        elif keyword == "override":
            key, agent = _single(number, keyword, rest, 2)
            key = "" if key == "-" else key
            overrides[key] = _integer(number, keyword, agent)
            lines[("overrides", key)] = number
        elif keyword == "dictator":
            label, agent = _single(number, keyword, rest, 2)
            dictators[label] = _integer(number, keyword, agent)
            lines[("dictators", label)] = number
        elif keyword == "compromiser":
            if len(rest) < 2:
                raise ParseError("'compromiser' takes an allocation and at least one agent", line=number, field=keyword)
            compromisers[rest[0]] = [_integer(number, keyword, x) for x in rest[1:]]
            lines[("compromisers", rest[0])] = number
        elif keyword == "default-compromiser":
            (agent,) = _single(number, keyword, rest)
            data["default_compromiser"] = _integer(number, keyword, agent)
            lines[("default_compromiser",)] = number
        elif keyword == "sub":
            (data["sub"],) = _single(number, keyword, rest)
            lines[("sub",)] = number
        elif keyword == "entry":
            profile, allocation = _single(number, keyword, rest, 2)
            entries[profile] = allocation
            lines[("entries", profile)] = number
        else:
            raise ParseError(f"unknown keyword '{keyword}'", line=number, field=keyword)
    for name, value in (
        ("overrides", overrides),
        ("dictators", dictators),
        ("compromisers", compromisers),
        ("entries", entries),
    ):
        if value:
            data[name] = value
    return _validate(MechanismFile, data, lines)


def parse_allocation(text: str, names: Sequence[str]) -> tuple[int, ...]:
    try:
        return tuple(names.index(x) for x in text.split(","))
    except ValueError as e:
        raise ParseError(f"allocation {text!r} names an unknown object") from e


def parse_preference(text: str, names: Sequence[str], agent: int) -> Preference:
    """Parse "a>b>c" into a preference, naming the agent on failure."""
    items = [x.strip() for x in text.split(">")]
    unknown = [x for x in items if x not in names]
    if unknown:
        raise ParseError(f"agent {agent}: unknown objects {unknown}", field=f"profile[{agent}]")
    if sorted(items) != sorted(names):
        raise ParseError(
            f"agent {agent}: must rank each of {len(names)} objects exactly once",
            field=f"profile[{agent}]",
        )
    return Preference(tuple(names.index(x) for x in items))


def parse_profile(texts: Sequence[str], names: Sequence[str], n: int | None = None) -> Profile:
    if n is not None and len(texts) != n:
        raise ParseError(f"profile has {len(texts)} preferences, expected one per agent ({n})", field="profile")
    return Profile(tuple(parse_preference(t, names, i) for i, t in enumerate(texts)))


def format_allocation(allocation: Sequence[int], names: Sequence[str]) -> str:
    return ",".join(names[x] for x in allocation)


def format_profile(profile: Profile, names: Sequence[str]) -> str:
    return "|".join(">".join(names[x] for x in p.order) for p in profile)


def _suballocation_key(key: str, names: Sequence[str]) -> Suballocation:
    """Translate "agent:object-name,..." into a suballocation over object indices."""
    if not key:
        return Suballocation()
    pairs = []
    for item in key.split(","):
        agent, _, name = item.partition(":")
        if name not in names:
            raise ParseError(f"override key {key!r} names unknown object {name!r}", field="overrides")
        try:
            pairs.append((int(agent), names.index(name)))
        except ValueError as e:
            raise ParseError(f"override key {key!r} has a malformed agent", field="overrides") from e
    return Suballocation(tuple(pairs))


def build_mechanism(
    model: MechanismFile,
    constraint: Constraint,
    names: Sequence[str],
    base_dir: Path = Path("."),
) -> Mechanism:
    """
    Construct the mechanism a file describes over `constraint`.

    Args:
        model: The parsed mechanism file.
        constraint: The instance's constraint.
        names: Object names of the instance.
        base_dir: Directory sub-mechanism paths are relative to.

    Returns:
        Mechanism: The constructed, validated mechanism.
    """
    names = list(names)
    ordering = GsdOrdering(
        model.order,
        {_suballocation_key(k, names): agent for k, agent in model.overrides.items()},
    )
    if model.type is MechanismType.SERIAL_DICTATORSHIP:
        return SerialDictatorship(constraint, model.order)
    if model.type is MechanismType.GSD:
        return Gsd(constraint, ordering)
    if model.type is MechanismType.LOCAL_DICTATORSHIP:
        d = decompose(constraint)
        dictators = {d.block_by_label(label): agent for label, agent in model.dictators.items()}
        return LocalDictatorship(constraint, dictators, d)
    if model.type is MechanismType.CONSTRAINT_TRAVERSING:
        alpha = CompromiserAssignment(
            {parse_allocation(k, names): agents for k, agents in model.compromisers.items()},
            model.default_compromiser,
        )
        return ConstraintTraversing(constraint, alpha)
    if model.type is MechanismType.EXTEND:
        assert model.sub is not None
        sub_path = base_dir / model.sub
        sub_model = parse_mechanism(sub_path.read_text(encoding="utf-8"))
        sub = build_mechanism(sub_model, project(constraint, model.agents), names, sub_path.parent)
        return Extend(sub, model.agents, constraint, ordering)
    return _build_table(model, constraint, names)


def _build_table(model: MechanismFile, constraint: Constraint, names: list[str]) -> TabulatedMechanism:
    space = preference_space(constraint.m)
    table = [-1] * space.profile_count(constraint.n)
    for profile_text, allocation_text in model.entries.items():
        profile = parse_profile(profile_text.split("|"), names, constraint.n)
        allocation = parse_allocation(allocation_text, names)
        if len(allocation) != constraint.n:
            raise ParseError(f"allocation {allocation_text!r} does not have {constraint.n} entries", field="entries")
        index = 0
        for pref in profile:
            index = index * space.size + space.index_of(pref)
        table[index] = constraint.index_of(allocation)
    missing = table.count(-1)
    if missing:
        raise ParseError(f"table is missing {missing} of {len(table)} profiles", field="entries")
    return TabulatedMechanism(constraint, table)


def load_mechanism(path: str | Path, instance: InstanceFile) -> Mechanism:
    log.debug("Loading mechanism %s", path)
    path = Path(path)
    model = parse_mechanism(path.read_text(encoding="utf-8"))
    return build_mechanism(model, instance.constraint(), instance.objects, path.parent)


def table_file(mech: TabulatedMechanism, names: Sequence[str]) -> MechanismFile:
    """Describe a tabulated mechanism as an explicit table file."""
    space = preference_space(mech.m)
    entries = {
        format_profile(space.profile_at(k, mech.n), names): format_allocation(
            mech.constraint.allocation_at(int(v)), names
        )
        for k, v in enumerate(mech.flat.tolist())
    }
    return MechanismFile(type=MechanismType.TABLE, entries=entries)


def write_mechanism_file(model: MechanismFile) -> str:
    """Serialize a mechanism file so that `parse_mechanism` reads it back unchanged."""
    lines = [MECHANISM_HEADER, f"type {model.type}"]
    if model.order:
        lines.append("order " + " ".join(str(a) for a in model.order))
    if model.agents:
        lines.append("agents " + " ".join(str(a) for a in model.agents))
    if model.sub:
        lines.append(f"sub {model.sub}")
    for key, agent in model.overrides.items():
        lines.append(f"override {key or '-'} {agent}")
    for label, agent in model.dictators.items():
        lines.append(f"dictator {label} {agent}")
    for key, agents in model.compromisers.items():
        lines.append(f"compromiser {key} " + " ".join(str(a) for a in agents))
    if model.default_compromiser is not None:
        lines.append(f"default-compromiser {model.default_compromiser}")
    for profile, allocation in model.entries.items():
        lines.append(f"entry {profile} {allocation}")
    return "\n".join(lines) + "\n"

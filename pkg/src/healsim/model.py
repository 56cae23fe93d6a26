"""Architectural runtime model: the live component/connector graph and the
blueprint it is validated against.

The blueprint describes the intended architecture (component types, named
slots, intended connectors). The model holds what is actually running:
at most one component instance per slot, a set of live connectors between
instances, and a logical clock in milliseconds. Faults damage the model;
repairs restore it; ``validate`` lists every deviation from the blueprint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources


class ModelError(Exception):
    """Base class for architecture-model errors."""


class UnknownSlot(ModelError):
    """A slot name does not exist in the blueprint."""


class TargetAbsent(ModelError):
    """A mutation addressed a component or connector that is not there."""


class InterfaceMismatch(ModelError):
    """A connector violates the required/provided interface rules."""


class BlueprintError(ModelError):
    """A blueprint definition is internally inconsistent."""


class ComponentState(Enum):
    STARTED = "STARTED"
    STOPPED = "STOPPED"
    UNDEPLOYED = "UNDEPLOYED"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class ComponentType:
    """Template for component instances: what it provides and requires."""

    name: str
    provided_interface: str
    required_interfaces: tuple[str, ...]


@dataclass
class Component:
    """A running instance filling one slot."""

    instance_id: str
    type_name: str
    state: ComponentState = ComponentState.STARTED
    exception_count: int = 0


@dataclass(frozen=True, order=True)
class ConnectorSpec:
    """Slot-level connector identity: source slot, target slot, interface.

    This is the stable way to name a connector across instance replacement;
    fault targets, violations, and repair subjects all use it.
    """

    source: str
    target: str
    interface: str

    def render(self) -> str:
        return f"{self.source}->{self.target}"


@dataclass(frozen=True)
class Connector:
    """A live edge between two component instances."""

    source_instance: str
    target_instance: str
    interface: str


class ViolationKind(Enum):
    UNKNOWN_STATE = "UNKNOWN_STATE"
    MISSING_COMPONENT = "MISSING_COMPONENT"
    MISSING_CONNECTOR = "MISSING_CONNECTOR"
    NOT_STARTED = "NOT_STARTED"


@dataclass(frozen=True)
class Violation:
    """One deviation of the live model from its blueprint."""

    kind: ViolationKind
    subject: str | ConnectorSpec

    def render_subject(self) -> str:
        return self.subject.render() if isinstance(self.subject, ConnectorSpec) else self.subject


@dataclass(frozen=True)
class Blueprint:
    """The intended architecture. Immutable; validated on construction.

    Slot and connector declaration order is meaningful: it fixes the
    deterministic ordering used by validation, monitoring, dependency
    lookup, and fault target selection.
    """

    component_types: tuple[ComponentType, ...]
    slots: tuple[tuple[str, str], ...]
    intended_connectors: tuple[ConnectorSpec, ...]

    def __post_init__(self) -> None:
        types = {}
        for ct in self.component_types:
            if not ct.name:
                raise BlueprintError("component type with empty name")
            if ct.name in types:
                raise BlueprintError(f"duplicate component type {ct.name!r}")
            if len(set(ct.required_interfaces)) != len(ct.required_interfaces):
                raise BlueprintError(f"type {ct.name!r} lists a required interface twice")
            types[ct.name] = ct
        slot_types = {}
        for slot, type_name in self.slots:
            if slot in slot_types:
                raise BlueprintError(f"duplicate slot {slot!r}")
            if type_name not in types:
                raise BlueprintError(f"slot {slot!r} references unknown type {type_name!r}")
            slot_types[slot] = types[type_name]
        for spec in self.intended_connectors:
            if spec.source not in slot_types or spec.target not in slot_types:
                raise BlueprintError(f"connector {spec.render()} references an unknown slot")
            if spec.source == spec.target:
                raise BlueprintError(f"connector {spec.render()} is a self loop")
            if spec.interface not in slot_types[spec.source].required_interfaces:
                raise BlueprintError(
                    f"{spec.source!r} does not require interface {spec.interface!r}"
                )
            if spec.interface != slot_types[spec.target].provided_interface:
                raise BlueprintError(
                    f"{spec.target!r} does not provide interface {spec.interface!r}"
                )
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        adjacency: dict[str, list[str]] = {slot: [] for slot, _ in self.slots}
        for spec in self.intended_connectors:
            adjacency[spec.source].append(spec.target)
        seen: dict[str, int] = {}  # 1 = on stack, 2 = done

        def visit(slot: str, trail: list[str]) -> None:
            seen[slot] = 1
            trail.append(slot)
            for nxt in adjacency[slot]:
                if seen.get(nxt) == 1:
                    raise BlueprintError(f"dependency cycle through {' -> '.join(trail + [nxt])}")
                if nxt not in seen:
                    visit(nxt, trail)
            trail.pop()
            seen[slot] = 2

        for slot, _ in self.slots:
            if slot not in seen:
                visit(slot, [])

    # -- lookups ---------------------------------------------------------

    def slot_names(self) -> list[str]:
        return [slot for slot, _ in self.slots]

    def has_slot(self, slot: str) -> bool:
        return any(slot == name for name, _ in self.slots)

    def type_of_slot(self, slot: str) -> ComponentType:
        for name, type_name in self.slots:
            if name == slot:
                for ct in self.component_types:
                    if ct.name == type_name:
                        return ct
        raise UnknownSlot(f"no slot named {slot!r}")

    def dependencies_of(self, slot: str) -> list[str]:
        """Slots this slot requires, per intended connectors, in declaration
        order. Reads the blueprint only, so the answer is unaffected by any
        damage to the live graph."""
        if not self.has_slot(slot):
            raise UnknownSlot(f"no slot named {slot!r}")
        deps: list[str] = []
        for spec in self.intended_connectors:
            if spec.source == slot and spec.target not in deps:
                deps.append(spec.target)
        return deps

    def connectors_incident_to(self, slot: str) -> list[ConnectorSpec]:
        return [s for s in self.intended_connectors if slot in (s.source, s.target)]

    def find_intended(self, source: str, target: str) -> ConnectorSpec | None:
        for spec in self.intended_connectors:
            if spec.source == source and spec.target == target:
                return spec
        return None


def blueprint_from_json(obj: dict) -> Blueprint:
    """Build a Blueprint from the documented JSON document shape:
    ``{"types": [{name, provides, requires}], "slots": [{slot, type}],
    "connectors": [{from, to, interface}]}``.
    """
    try:
        types = tuple(
            ComponentType(t["name"], t["provides"], tuple(t["requires"]))
            for t in obj["types"]
        )
        slots = tuple((s["slot"], s["type"]) for s in obj["slots"])
        connectors = tuple(
            ConnectorSpec(c["from"], c["to"], c["interface"]) for c in obj["connectors"]
        )
    except (KeyError, TypeError) as exc:
        raise BlueprintError(f"malformed blueprint document: {exc}") from exc
    return Blueprint(types, slots, connectors)


def load_blueprint(path: str) -> Blueprint:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BlueprintError(f"{path}: {exc}") from exc
    return blueprint_from_json(obj)


def default_blueprint() -> Blueprint:
    """The bundled single-shop blueprint: 7 slots, 9 intended connectors."""
    text = resources.files(__package__).joinpath("data/default_blueprint.json").read_text("utf-8")
    return blueprint_from_json(json.loads(text))


@dataclass
class ArchitectureModel:
    """The live architecture plus the blueprint it should match.

    Mutations are primitive and apply exactly the named change, except that
    removing a component also drops its incident connectors (a connector
    cannot outlive an endpoint). A single writer at a time is assumed;
    reads are safe from anywhere between mutations.
    """

    blueprint: Blueprint
    components: dict[str, Component | None]
    connectors: set[Connector]
    clock: int = 0
    _instance_seq: dict[str, int] = field(default_factory=dict)

    # -- queries ---------------------------------------------------------

    def component(self, slot: str) -> Component | None:
        if slot not in self.components:
            raise UnknownSlot(f"no slot named {slot!r}")
        return self.components[slot]

    def present(self, slot: str) -> bool:
        return self.component(slot) is not None

    def slot_of_instance(self, instance_id: str) -> str | None:
        for slot, comp in self.components.items():
            if comp is not None and comp.instance_id == instance_id:
                return slot
        return None

    def _instances_of(self, spec: ConnectorSpec) -> Connector | None:
        src = self.components.get(spec.source)
        dst = self.components.get(spec.target)
        if src is None or dst is None:
            return None
        candidate = Connector(src.instance_id, dst.instance_id, spec.interface)
        return candidate if candidate in self.connectors else None

    def has_connector(self, spec: ConnectorSpec) -> bool:
        return self._instances_of(spec) is not None

    def live_connector_specs(self) -> list[ConnectorSpec]:
        """Live connectors as slot-level specs, in canonical order: blueprint
        declaration order first, then any non-intended extras sorted."""
        instance_slots = {
            comp.instance_id: slot for slot, comp in self.components.items() if comp is not None
        }
        live = set()
        for conn in self.connectors:
            src = instance_slots.get(conn.source_instance)
            dst = instance_slots.get(conn.target_instance)
            if src is not None and dst is not None:
                live.add(ConnectorSpec(src, dst, conn.interface))
        ordered = [spec for spec in self.blueprint.intended_connectors if spec in live]
        extras = sorted(live.difference(ordered))
        return ordered + extras

    # -- mutations -------------------------------------------------------

    def set_state(self, slot: str, state: ComponentState) -> None:
        comp = self.component(slot)
        if comp is None:
            raise TargetAbsent(f"slot {slot!r} is empty")
        comp.state = state

    def add_exceptions(self, slot: str, n: int) -> None:
        if n < 0:
            raise ValueError("exception increment must be non-negative")
        comp = self.component(slot)
        if comp is None:
            raise TargetAbsent(f"slot {slot!r} is empty")
        comp.exception_count += n

    def reset_exceptions(self, slot: str) -> None:
        comp = self.component(slot)
        if comp is None:
            raise TargetAbsent(f"slot {slot!r} is empty")
        comp.exception_count = 0

    def remove_component(self, slot: str) -> list[ConnectorSpec]:
        """Empty the slot, dropping incident live connectors with it.
        Returns a ConnectorSpec for each connector that went away."""
        comp = self.component(slot)
        if comp is None:
            raise TargetAbsent(f"slot {slot!r} is already empty")
        dropped = [
            spec for spec in self.live_connector_specs() if slot in (spec.source, spec.target)
        ]
        self.connectors = {
            c
            for c in self.connectors
            if comp.instance_id not in (c.source_instance, c.target_instance)
        }
        self.components[slot] = None
        return dropped

    def remove_connector(self, spec: ConnectorSpec) -> None:
        conn = self._instances_of(spec)
        if conn is None:
            raise TargetAbsent(f"connector {spec.render()} is not live")
        self.connectors.discard(conn)

    def add_connector(self, spec: ConnectorSpec) -> None:
        src = self.components.get(spec.source)
        dst = self.components.get(spec.target)
        if spec.source not in self.components or spec.target not in self.components:
            raise UnknownSlot(f"connector {spec.render()} references an unknown slot")
        if src is None or dst is None:
            raise TargetAbsent(f"connector {spec.render()} has an absent endpoint")
        src_type = self.blueprint.type_of_slot(spec.source)
        dst_type = self.blueprint.type_of_slot(spec.target)
        if spec.interface not in src_type.required_interfaces:
            raise InterfaceMismatch(
                f"{spec.source!r} does not require interface {spec.interface!r}"
            )
        if spec.interface != dst_type.provided_interface:
            raise InterfaceMismatch(
                f"{spec.target!r} does not provide interface {spec.interface!r}"
            )
        self.connectors.add(Connector(src.instance_id, dst.instance_id, spec.interface))

    def instantiate(self, slot: str, instance_id: str) -> Component:
        """Fill an empty slot with a fresh instance: STARTED, zero exceptions."""
        if slot not in self.components:
            raise UnknownSlot(f"no slot named {slot!r}")
        if self.components[slot] is not None:
            raise ModelError(f"slot {slot!r} is already occupied")
        comp = Component(instance_id, self.blueprint.type_of_slot(slot).name)
        self.components[slot] = comp
        return comp

    def allocate_instance_id(self, slot: str) -> str:
        """Next never-before-used instance id for this slot."""
        if not self.blueprint.has_slot(slot):
            raise UnknownSlot(f"no slot named {slot!r}")
        seq = self._instance_seq.get(slot, 0) + 1
        self._instance_seq[slot] = seq
        return f"{slot}#{seq}"

    def advance_clock(self, ms: int) -> None:
        if ms < 0:
            raise ValueError("clock can only move forward")
        self.clock += ms


def instantiate_blueprint(blueprint: Blueprint) -> ArchitectureModel:
    """A fresh model with every slot filled, every intended connector live,
    and the clock at zero."""
    model = ArchitectureModel(blueprint=blueprint, components={}, connectors=set())
    for slot, _ in blueprint.slots:
        model.components[slot] = None
        model.instantiate(slot, model.allocate_instance_id(slot))
    for spec in blueprint.intended_connectors:
        model.add_connector(spec)
    return model


def build_default_model() -> ArchitectureModel:
    return instantiate_blueprint(default_blueprint())


def validate(model: ArchitectureModel) -> list[Violation]:
    """Every deviation from the blueprint, in deterministic order: slots in
    declaration order, then intended connectors in declaration order.

    A missing connector is only reported when both endpoints are present;
    an empty slot is already covered by its MISSING_COMPONENT entry. An
    empty list means the architecture carries no further failures.
    """
    violations: list[Violation] = []
    for slot in model.blueprint.slot_names():
        comp = model.components[slot]
        if comp is None:
            violations.append(Violation(ViolationKind.MISSING_COMPONENT, slot))
        elif comp.state is ComponentState.UNKNOWN:
            violations.append(Violation(ViolationKind.UNKNOWN_STATE, slot))
        elif comp.state in (ComponentState.STOPPED, ComponentState.UNDEPLOYED):
            violations.append(Violation(ViolationKind.NOT_STARTED, slot))
    for spec in model.blueprint.intended_connectors:
        if model.components[spec.source] is None or model.components[spec.target] is None:
            continue
        if not model.has_connector(spec):
            violations.append(Violation(ViolationKind.MISSING_CONNECTOR, spec))
    return violations


def dependencies_of(model: ArchitectureModel, slot: str) -> list[str]:
    """Blueprint-declared dependencies of a slot (see Blueprint.dependencies_of)."""
    return model.blueprint.dependencies_of(slot)

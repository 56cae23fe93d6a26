import pytest
from hypothesis import given, strategies as st

from healsim.faults import (
    FaultInstance,
    FaultKind,
    NoEligibleTarget,
    Rng,
    draw_fault,
    draw_interval,
    inject,
)
from healsim.model import (
    ComponentState,
    ConnectorSpec,
    TargetAbsent,
    build_default_model,
    validate,
)

# Known-answer vector for the splitmix64 recurrence (seed 0), cross-checked
# against the published reference outputs.
SPLITMIX_SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

# Frozen from an independent transcription of the recurrence (oracle script
# run ahead of the implementation).
SPLITMIX_SEED42 = [
    13679457532755275413,
    2949826092126892291,
    5139283748462763858,
    6349198060258255764,
]


def test_splitmix64_known_answer_seed0():
    rng = Rng(0)
    assert [rng.next() for _ in range(3)] == SPLITMIX_SEED0


def test_splitmix64_golden_seed42():
    rng = Rng(42)
    assert [rng.next() for _ in range(4)] == SPLITMIX_SEED42


def test_same_seed_same_sequence():
    a, b = Rng(987654321), Rng(987654321)
    assert [a.next() for _ in range(100)] == [b.next() for _ in range(100)]


def test_draw_interval_golden_seed42():
    # 100 + (first seed-42 output mod 401), computed by the oracle script
    assert draw_interval(Rng(42)) == 353


def test_draw_interval_bounds_forced():
    class Fixed:
        def __init__(self, value):
            self.value = value

        def next(self):
            return self.value

    assert draw_interval(Fixed(0)) == 100
    assert draw_interval(Fixed(400)) == 500
    assert draw_interval(Fixed(401)) == 100


@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_draw_interval_always_in_range(seed):
    rng = Rng(seed)
    for _ in range(20):
        assert 100 <= draw_interval(rng) <= 500


def test_draw_fault_golden_seed42():
    # frozen by the oracle script: kind index 1 (CF2), slot index 5,
    # magnitude draw 3 with threshold 5
    fault = draw_fault(Rng(42), build_default_model(), exception_threshold=5)
    assert fault.kind is FaultKind.CF2
    assert fault.target == "Bid Service"
    assert fault.magnitude == 9
    assert fault.injected_at == 0


def test_draw_fault_golden_seed7():
    fault = draw_fault(Rng(7), build_default_model())
    assert fault.kind is FaultKind.CF4
    assert fault.target == ConnectorSpec("Bid Service", "Persistence Service",
                                         "Persistence Service")


def test_draw_fault_single_candidate():
    model = build_default_model()
    # leave exactly one live connector, then force the rng onto CF4
    for spec in list(model.live_connector_specs())[1:]:
        model.remove_connector(spec)

    class Forced:
        def __init__(self, values):
            self.values = list(values)

        def next(self):
            return self.values.pop(0)

    fault = draw_fault(Forced([3, 12345]), model)  # 3 % 4 -> CF4
    assert fault.kind is FaultKind.CF4
    assert fault.target == model.live_connector_specs()[0]


def test_cf2_magnitude_always_exceeds_threshold():
    rng = Rng(1)
    seen = set()
    for _ in range(300):
        fault = draw_fault(rng, build_default_model(), exception_threshold=5)
        if fault.kind is FaultKind.CF2:
            assert 6 <= fault.magnitude <= 10
            seen.add(fault.magnitude)
    assert seen == {6, 7, 8, 9, 10}


def test_no_eligible_target():
    model = build_default_model()
    for spec in list(model.live_connector_specs()):
        model.remove_connector(spec)

    class Forced:
        def next(self):
            return 3  # CF4

    with pytest.raises(NoEligibleTarget):
        draw_fault(Forced(), model)


def test_inject_cf1():
    model = build_default_model()
    inject(model, FaultInstance(FaultKind.CF1, "Bid Service"))
    assert model.component("Bid Service").state is ComponentState.UNKNOWN


def test_inject_cf2():
    model = build_default_model()
    inject(model, FaultInstance(FaultKind.CF2, "Bid Service", magnitude=6))
    assert model.component("Bid Service").exception_count == 6


def test_inject_cf3_removes_component_and_connectors():
    model = build_default_model()
    inject(model, FaultInstance(FaultKind.CF3, "Persistence Service"))
    assert model.component("Persistence Service") is None
    assert len(model.connectors) == 5


def test_inject_cf4_removes_only_that_connector():
    model = build_default_model()
    spec = ConnectorSpec("Query Service", "Reputation Service", "Reputation Service")
    inject(model, FaultInstance(FaultKind.CF4, spec))
    assert not model.has_connector(spec)
    assert len(model.connectors) == 8
    for slot in model.blueprint.slot_names():
        comp = model.component(slot)
        assert comp.state is ComponentState.STARTED
        assert comp.exception_count == 0


def test_inject_absent_target():
    model = build_default_model()
    model.remove_component("Bid Service")
    with pytest.raises(TargetAbsent):
        inject(model, FaultInstance(FaultKind.CF1, "Bid Service"))


def _eligible_faults(model):
    for kind in (FaultKind.CF1, FaultKind.CF3):
        for slot in model.blueprint.slot_names():
            yield FaultInstance(kind, slot)
    for slot in model.blueprint.slot_names():
        yield FaultInstance(FaultKind.CF2, slot, magnitude=6)
    for spec in model.live_connector_specs():
        yield FaultInstance(FaultKind.CF4, spec)


def test_every_injection_is_detectable():
    # CF1/CF3/CF4 damage the architecture itself; CF2 is invisible to
    # blueprint validation (no threshold there) but always pushes the
    # counter past the analyzer's threshold by construction.
    faults = list(_eligible_faults(build_default_model()))
    assert len(faults) == 30  # 7 + 7 + 7 + 9
    for fault in faults:
        model = build_default_model()
        inject(model, fault)
        if fault.kind is FaultKind.CF2:
            assert validate(model) == []
            assert model.component(fault.target).exception_count > 5
        else:
            assert validate(model) != [], fault


def test_fault_instance_shape_checks():
    spec = ConnectorSpec("Query Service", "Reputation Service", "Reputation Service")
    with pytest.raises(ValueError):
        FaultInstance(FaultKind.CF4, "Query Service")
    with pytest.raises(ValueError):
        FaultInstance(FaultKind.CF1, spec)
    with pytest.raises(ValueError):
        FaultInstance(FaultKind.CF2, "Bid Service")  # magnitude required
    with pytest.raises(ValueError):
        FaultInstance(FaultKind.CF1, "Bid Service", magnitude=3)

import math

import pytest
from hypothesis import given, strategies as st

from enclave import errors
from enclave.cloudsim import (
    CloudProvider,
    ConstantDelay,
    InstanceTypeSpec,
    LognormalDelay,
    Market,
    Region,
    SpotPriceTrace,
    load_traces,
    save_traces,
)
from enclave.simclock import Clock, HOUR


def make_provider(tick=60.0, seed=0, delay=ConstantDelay(0.0)):
    return CloudProvider(
        catalog={"m-std": InstanceTypeSpec("m-std", 4, 16.0, 0.239)},
        regions=[Region("r1", ("az-1a", "az-1b"))],
        clock=Clock(tick=tick),
        delay_model=delay,
        seed=seed,
    )


def trace(zone="az-1a", samples=((0.0, 0.10), (2 * HOUR, 0.30))):
    return SpotPriceTrace(zone, "m-std", list(samples))


class TestProvision:
    def test_zero_delay_runs_immediately(self):
        p = make_provider()
        inst = p.provision("m-std", "az-1a", Market.on_demand())
        assert inst.state == "running"
        assert inst.ready_time == p.clock.now

    def test_constant_delay_sets_ready_time(self):
        p = make_provider(delay=ConstantDelay(459.0))
        inst = p.provision("m-std", "az-1a", Market.spot(0.50))
        assert inst.state == "provisioning"
        assert inst.ready_time == p.clock.now + 459.0

    def test_non_positive_bid_rejected(self):
        p = make_provider()
        with pytest.raises(errors.NonPositiveBid):
            p.provision("m-std", "az-1a", Market.spot(-1.0))
        with pytest.raises(errors.NonPositiveBid):
            p.provision("m-std", "az-1a", Market.spot(0.0))

    def test_unknown_type_and_zone(self):
        p = make_provider()
        with pytest.raises(errors.UnknownType):
            p.provision("nope", "az-1a", Market.on_demand())
        with pytest.raises(errors.UnknownZone):
            p.provision("m-std", "az-9z", Market.on_demand())


class TestMarketPrice:
    def test_step_function_before_second_sample(self):
        p = make_provider()
        p.add_traces([trace()])
        assert p.market_price("az-1a", "m-std", 1 * HOUR) == 0.10

    def test_boundary_takes_new_sample(self):
        p = make_provider()
        p.add_traces([trace()])
        assert p.market_price("az-1a", "m-std", 2 * HOUR) == 0.30

    def test_before_trace_start(self):
        p = make_provider()
        p.add_traces([trace()])
        with pytest.raises(errors.BeforeTraceStart):
            p.market_price("az-1a", "m-std", -HOUR)

    def test_no_trace(self):
        p = make_provider()
        with pytest.raises(errors.NoTrace):
            p.market_price("az-1a", "m-std", 0.0)

    def test_trace_invariants_rejected(self):
        with pytest.raises(ValueError):
            SpotPriceTrace("az-1a", "m-std", [(10.0, 0.1), (5.0, 0.2)])
        with pytest.raises(ValueError):
            SpotPriceTrace("az-1a", "m-std", [(0.0, -0.1)])


class TestRevocation:
    def test_price_at_or_below_bid_keeps_running(self):
        p = make_provider()
        p.add_traces([trace(samples=[(0.0, 0.49)])])
        inst = p.provision("m-std", "az-1a", Market.spot(0.50))
        assert p.step_markets(60.0) == []
        assert inst.state == "running"

    def test_price_above_bid_revokes(self):
        p = make_provider()
        p.add_traces([trace(samples=[(0.0, 0.40), (HOUR, 0.51)])])
        inst = p.provision("m-std", "az-1a", Market.spot(0.50))
        assert p.step_markets(60.0) == []
        events = p.step_markets(HOUR)
        assert [e.instance_id for e in events] == [inst.id]
        assert inst.state == "revoked"
        assert inst.end_time == HOUR

    def test_on_demand_never_revoked(self):
        p = make_provider()
        p.add_traces([trace(samples=[(0.0, 99.0)])])
        inst = p.provision("m-std", "az-1a", Market.on_demand())
        assert p.step_markets(60.0) == []
        assert inst.state == "running"

    def test_revocation_soundness_each_tick(self):
        p = make_provider(seed=3)
        p.add_traces(
            [trace(samples=[(k * HOUR, 0.10 + 0.15 * (k % 4)) for k in range(12)])]
        )
        for b in (0.12, 0.2, 0.31, 0.5):
            p.provision("m-std", "az-1a", Market.spot(b))
        t = 0.0
        while t < 12 * HOUR:
            t += 60.0
            p.step_markets(t)
            for inst in p.running():
                if inst.market.is_spot:
                    assert p.market_price(inst.zone, "m-std", t) <= inst.market.bid_per_hour


class TestBillingAndCost:
    def test_ninety_minutes_bills_two_hours(self):
        p = make_provider()
        inst = p.provision("m-std", "az-1a", Market.on_demand())
        p.clock.advance(90 * 60.0)
        p.terminate(inst.id)
        # oracle: brute-force ceiling of wall time in hours
        assert inst.billed_hours(p.clock.now) == math.ceil((90 * 60.0) / HOUR)
        assert inst.billed_hours(p.clock.now) == 2

    def test_exactly_one_hour_bills_one(self):
        p = make_provider()
        inst = p.provision("m-std", "az-1a", Market.on_demand())
        p.clock.advance(HOUR)
        p.terminate(inst.id)
        assert inst.billed_hours(p.clock.now) == 1

    def test_double_terminate(self):
        p = make_provider()
        inst = p.provision("m-std", "az-1a", Market.on_demand())
        p.terminate(inst.id)
        with pytest.raises(errors.AlreadyEnded):
            p.terminate(inst.id)

    def test_on_demand_equivalent_cost(self):
        p = make_provider()
        inst = p.provision("m-std", "az-1a", Market.on_demand())
        p.clock.advance(3 * HOUR)
        p.terminate(inst.id)
        assert p.accrued_cost(inst.id, "on-demand-equivalent") == pytest.approx(3 * 0.239)

    def test_spot_trace_cost_sums_hourly_prices(self):
        p = make_provider()
        p.add_traces([trace(samples=[(0.0, 0.10), (HOUR, 0.20), (2 * HOUR, 0.10)])])
        inst = p.provision("m-std", "az-1a", Market.spot(0.50))
        p.clock.advance(3 * HOUR)
        p.terminate(inst.id)
        assert p.accrued_cost(inst.id, "spot-trace") == pytest.approx(0.40)

    def test_never_ready_instance_costs_nothing(self):
        p = make_provider(delay=ConstantDelay(600.0))
        inst = p.provision("m-std", "az-1a", Market.on_demand())
        p.clock.advance(120.0)
        p.terminate(inst.id)
        assert p.accrued_cost(inst.id, "on-demand-equivalent") == 0.0

    @given(minutes=st.integers(min_value=1, max_value=100 * 60))
    def test_billing_matches_bruteforce_ceiling(self, minutes):
        p = make_provider()
        inst = p.provision("m-std", "az-1a", Market.on_demand())
        p.clock.advance(minutes * 60.0)
        p.terminate(inst.id)
        whole, rem = divmod(minutes, 60)
        assert inst.billed_hours(p.clock.now) == whole + (1 if rem else 0)


class TestDeterminism:
    def run_once(self):
        p = make_provider(seed=42, delay=LognormalDelay())
        p.add_traces([trace(samples=[(k * HOUR, 0.10 + 0.2 * (k % 3)) for k in range(8)])])
        log = []
        for i in range(5):
            inst = p.provision("m-std", "az-1a", Market.spot(0.25))
            log.append((inst.id, inst.ready_time))
        t = 0.0
        while t < 8 * HOUR:
            t += 60.0
            for ev in p.step_markets(t):
                log.append((ev.instance_id, ev.time, ev.market_price))
        return log

    def test_identical_seed_identical_events(self):
        assert self.run_once() == self.run_once()


class TestTraceCsv(object):
    def test_round_trip(self, tmp_path):
        path = str(tmp_path / "traces.csv")
        original = [trace(), trace(zone="az-1b", samples=[(0.0, 0.2), (HOUR, 0.3)])]
        save_traces(original, path)
        loaded = load_traces(path)
        assert {(t.zone, t.instance_type) for t in loaded} == {("az-1a", "m-std"), ("az-1b", "m-std")}
        by_zone = {t.zone: t for t in loaded}
        assert by_zone["az-1a"].samples == [(0.0, 0.10), (2 * HOUR, 0.30)]

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,zone,type,price\n")
        with pytest.raises(errors.ParseError):
            load_traces(str(path))

    def test_decreasing_timestamps_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "timestamp,zone,instance_type,price\n"
            "1970-01-01T02:00:00Z,az-1a,m-std,0.1\n"
            "1970-01-01T01:00:00Z,az-1a,m-std,0.2\n"
        )
        with pytest.raises(errors.ParseError):
            load_traces(str(path))


class TestCatalogConfig:
    def test_load_catalog(self):
        from enclave.cloudsim import load_catalog

        catalog, regions = load_catalog(
            {
                "instance_types": [
                    {"name": "m-std", "vcpus": 4, "memory_gib": 16, "on_demand_price_per_hour": 0.239}
                ],
                "regions": [{"id": "r1", "zones": ["r1-a", "r1-b"]}],
            }
        )
        assert catalog["m-std"].on_demand_price_per_hour == 0.239
        assert regions[0].zones == ("r1-a", "r1-b")

    def test_empty_catalog_rejected(self):
        from enclave.cloudsim import load_catalog

        with pytest.raises(errors.ParseError):
            load_catalog({"instance_types": [], "regions": []})

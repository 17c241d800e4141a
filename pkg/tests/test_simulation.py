import pytest

from enclave import defaults
from enclave.jobqueue import JobDescription
from enclave.provisioner import ScalingStrategy
from enclave.simclock import HOUR
from enclave.simulation import ChaosSpec, Platform, Simulation, build_pool, parse_script
from enclave.workload import TraceSynthesisParams, synthesize_traces


def quiet_traces(base=0.05, hours=24 * 40):
    return synthesize_traces(
        1,
        TraceSynthesisParams(
            zones=tuple(defaults.all_zone_ids()),
            instance_type="m4.xlarge",
            base_price=base,
            volatility=0.0,
            duration_hours=hours,
        ),
    )


def make_sim(platform, strategy=None, chaos=None, market="spot", pre=None):
    platform.provider.add_traces(quiet_traces())
    pool = build_pool(
        platform,
        queue_class="prod",
        strategy=strategy or ScalingStrategy.unlimited(),
        market_kind=market,
        pre_provisioned=pre,
    )
    return Simulation(platform, {"prod": pool}, chaos=chaos, seed=3)


def job(owner="alice", script="sleep 300", inputs=("datasets/in-1",), queue="prod", max_wall=7200.0):
    return JobDescription(
        owner=owner,
        queue_class=queue,
        inputs=tuple(inputs),
        script=script,
        outputs=("result.txt",),
        max_wall_time_s=max_wall,
    )


def seed_dataset(platform, key="in-1", size=2.0):
    platform.store.system_put(defaults.DATASET_BUCKET, key, size, "curator", "service:harness")


class TestScriptParsing:
    def test_sleep_duration(self):
        assert parse_script("sleep 300") == (300.0, 0)

    def test_exit_code(self):
        assert parse_script("sleep 10 && exit 7") == (10.0, 7)

    def test_opaque_command_instant_success(self):
        assert parse_script("python3 analyze.py") == (0.0, 0)


class TestExecutionFlow:
    def test_job_completes_with_staging_and_outputs(self, platform):
        seed_dataset(platform)
        sim = make_sim(platform)
        sim.submit_at(120.0, job())
        sim.run()
        rec = next(iter(platform.queue.records.values()))
        assert rec.state == "completed"
        # staging time: 2 GB at 100 MB/s -> 20 s
        assert rec.stage_done_time - rec.claim_time == pytest.approx(20.0)
        assert rec.end_time - rec.stage_done_time == pytest.approx(300.0)
        assert ("user-alice", f"jobs/{rec.id}/result.txt") in platform.store.objects

    def test_assume_stage_release_sequence_audited(self, platform):
        seed_dataset(platform)
        sim = make_sim(platform)
        sim.submit_at(120.0, job())
        sim.run()
        actions = [
            (r.action, r.outcome)
            for r in platform.access.audit.records
            if r.action in ("assume-role", "read", "release-role") and "curator" not in r.actor
        ]
        i_assume = actions.index(("assume-role", "allowed"))
        i_read = actions.index(("read", "allowed"))
        i_release = actions.index(("release-role", "allowed"))
        assert i_assume < i_read < i_release

    def test_unreadable_input_fails_staging_with_audit_denial(self, platform):
        platform.store.create_bucket("secret")
        platform.store.system_put("secret", "blob", 1.0, "curator", "service:harness")
        sim = make_sim(platform)
        sim.submit_at(120.0, job(inputs=("secret/blob",)))
        sim.run()
        rec = next(iter(platform.queue.records.values()))
        assert rec.state == "failed"
        assert rec.failure == "STAGE_FAILED"
        denials = [r for r in platform.access.audit.records if r.outcome == "denied"]
        assert any(r.resource == "secret/blob" for r in denials)

    def test_walltime_overrun_fails_timed_out(self, platform):
        seed_dataset(platform)
        sim = make_sim(platform)
        sim.submit_at(120.0, job(script="sleep 4000", max_wall=600.0))
        sim.run()
        rec = next(iter(platform.queue.records.values()))
        assert rec.state == "failed"
        assert rec.failure == "TIMED_OUT"
        # bound enforced: ran for exactly max_wall after staging
        assert rec.end_time - rec.stage_done_time == pytest.approx(600.0)

    def test_nonzero_exit_failed_with_outputs(self, platform):
        seed_dataset(platform)
        sim = make_sim(platform)
        sim.submit_at(120.0, job(script="sleep 60 && exit 7"))
        sim.run()
        rec = next(iter(platform.queue.records.values()))
        assert rec.state == "failed"
        assert rec.exit_code == 7
        assert ("user-alice", f"jobs/{rec.id}/result.txt") in platform.store.objects

    def test_status_markers_written_during_run(self, platform):
        seed_dataset(platform)
        sim = make_sim(platform)
        sim.submit_at(120.0, job(script="sleep 300"))
        sim.run()
        rec = next(iter(platform.queue.records.values()))
        markers = platform.queue.markers[rec.id]
        # 300 s run at 30 s cadence leaves nine interior markers
        assert len(markers) == 9
        assert all(0 <= m.cpu_util <= 1 for m in markers)


class TestRevocationRecovery:
    def test_chaos_requeues_and_eventually_completes(self, platform):
        seed_dataset(platform)
        chaos = ChaosSpec(kill_probability_per_hour=0.9, seed=13)
        sim = make_sim(platform, chaos=chaos)
        for i in range(5):
            sim.submit_at(60.0 + i, job(script="sleep 4200", max_wall=9000.0))
        sim.run()
        census = platform.queue.census()
        assert census["completed"] == 5
        assert census["total"] == 5
        assert sum(r.requeues for r in platform.queue.records.values()) > 0

    def test_no_job_active_on_two_instances(self, platform):
        seed_dataset(platform)
        chaos = ChaosSpec(kill_probability_per_hour=0.8, seed=5)
        sim = make_sim(platform, chaos=chaos)
        for i in range(8):
            sim.submit_at(60.0 + i, job(script="sleep 900"))
        sim.run()
        active = {}
        for t, kind, jid, inst in sorted(platform.queue.event_log, key=lambda e: (e[0], e[1])):
            if kind == "claim":
                assert jid not in active, f"{jid} double-claimed"
                active[jid] = inst
            elif kind in ("completed", "failed", "requeue"):
                active.pop(jid, None)

    def test_on_demand_pool_survives_chaos(self, platform):
        seed_dataset(platform)
        chaos = ChaosSpec(kill_probability_per_hour=1.0, seed=1)
        sim = make_sim(platform, chaos=chaos, market="on-demand")
        sim.submit_at(60.0, job(script="sleep 1800"))
        sim.run()
        rec = next(iter(platform.queue.records.values()))
        assert rec.state == "completed"
        assert rec.requeues == 0


class TestIdleReuse:
    def test_second_job_reuses_idle_instance_no_wait(self, platform):
        seed_dataset(platform)
        seed_dataset(platform, key="in-2")
        sim = make_sim(platform)
        sim.submit_at(60.0, job(script="sleep 120"))
        sim.submit_at(HOUR * 0.45, job(inputs=("datasets/in-2",), script="sleep 120"))
        sim.run()
        records = sorted(platform.queue.records.values(), key=lambda r: r.id)
        assert records[0].first_claim_time - records[0].submit_time > 60.0  # provisioning delay
        assert records[1].first_claim_time == records[1].submit_time  # idle instance ready
        ids = {r.assigned_instance for r in records}
        assert len(ids) == 1  # same instance served both

    def test_fixed_pool_wait_zero(self, platform):
        seed_dataset(platform)
        sim = make_sim(platform, strategy=ScalingStrategy.no_scaling(3), pre=True)
        for i in range(3):
            sim.submit_at(100.0 + 40 * i, job(script="sleep 60"))
        sim.run()
        for rec in platform.queue.records.values():
            assert rec.first_claim_time == rec.submit_time


class TestPoolIsolation:
    def test_dev_jobs_only_on_dev_pool(self, platform):
        seed_dataset(platform)
        platform.provider.add_traces(quiet_traces())
        dev_pool = build_pool(
            platform, "dev", ScalingStrategy.no_scaling(1), market_kind="on-demand", pre_provisioned=True
        )
        prod_pool = build_pool(platform, "prod", ScalingStrategy.unlimited())
        sim = Simulation(platform, {"dev": dev_pool, "prod": prod_pool}, seed=3)
        sim.submit_at(60.0, job(queue="dev", script="sleep 60"))
        sim.submit_at(61.0, job(queue="prod", script="sleep 60"))
        sim.run()
        dev_ids = {i.id for i in dev_pool.provisioner.alive_instances()} | set(dev_pool.provisioner.pool)
        for rec in platform.queue.records.values():
            if rec.description.queue_class == "dev":
                assert rec.assigned_instance in dev_ids
                assert not platform.provider.instances[rec.assigned_instance].market.is_spot
            else:
                assert rec.assigned_instance not in dev_ids
                assert platform.provider.instances[rec.assigned_instance].market.is_spot


class TestDeterminismAndConservation:
    def run_fingerprint(self):
        platform = Platform.build(seed=11)
        defaults.provision_user(platform.access, platform.store, "alice")
        seed_dataset(platform)
        chaos = ChaosSpec(kill_probability_per_hour=0.5, seed=2)
        sim = make_sim(platform, chaos=chaos)
        for i in range(6):
            sim.submit_at(60.0 * (i + 1), job(script=f"sleep {600 + i}"))
        sim.run()
        return [
            (round(t, 6), kind, jid, inst) for t, kind, jid, inst in platform.queue.event_log
        ]

    def test_identical_runs_identical_event_logs(self):
        assert self.run_fingerprint() == self.run_fingerprint()

    def test_no_job_lost_at_every_event(self, platform):
        seed_dataset(platform)
        chaos = ChaosSpec(kill_probability_per_hour=0.7, seed=9)
        sim = make_sim(platform, chaos=chaos)
        for i in range(10):
            sim.submit_at(60.0 + i * 30.0, job(script="sleep 600"))
        sim.run()
        census = platform.queue.census()
        assert census["total"] == 10
        assert census["pending"] == census["active"] == 0
        assert census["completed"] == 10

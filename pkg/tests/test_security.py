import pytest

from enclave import errors
from enclave.security import AccessController, Policy, TASK_EXECUTOR
from enclave.simclock import Clock


def make_controller():
    ctl = AccessController(Clock())
    ctl.add_role(TASK_EXECUTOR, internal=True)
    ctl.add_role("admin", internal=True)
    ctl.add_policy("p-wos", ("read", "list"), "wos-private/")
    ctl.add_policy("p-pub", ("read",), "public/")
    ctl.add_policy("p-home", ("read", "write", "list"), "user-u1/")
    ctl.add_role("wos-reader", ("p-wos",))
    ctl.add_role("public-only", ("p-pub",))
    ctl.add_role("home-u1", ("p-home",))
    ctl.add_user("u1", "User One")
    ctl.add_user("u2", "User Two")
    ctl.add_user("ghost", registered=False)
    ctl.grant_role("u1", "wos-reader")
    ctl.grant_role("u1", "home-u1")
    ctl.grant_role("u2", "public-only")
    return ctl


class TestLogin:
    def test_login_token_expires_in_an_hour(self):
        ctl = make_controller()
        token = ctl.login("u1")
        assert token.expiry - token.issued_at == 3600.0
        assert set(token.roles) == {"wos-reader", "home-u1"}

    def test_unregistered_user(self):
        ctl = make_controller()
        with pytest.raises(errors.NotRegistered):
            ctl.login("ghost")

    def test_unknown_user(self):
        ctl = make_controller()
        with pytest.raises(errors.UnknownUser):
            ctl.login("nobody")


class TestCheckAccess:
    def test_policy_grants_read(self):
        ctl = make_controller()
        token = ctl.login("u1")
        decision = ctl.check_access(token, "read", "wos-private/file-1")
        assert decision.allowed and decision.matched_policy == "p-wos"

    def test_roleless_user_denied_everywhere(self):
        ctl = make_controller()
        ctl.add_user("newbie")
        token = ctl.login("newbie")
        assert token.roles == ()
        for action in ("read", "write", "list"):
            for resource in ("wos-private/x", "public/y", "user-u1/z"):
                assert not ctl.check_access(token, action, resource)

    def test_expired_token_denied_despite_policy(self):
        ctl = make_controller()
        token = ctl.login("u1")
        ctl.clock.advance(3600.0)
        assert not ctl.check_access(token, "read", "wos-private/file-1")

    def test_action_must_match(self):
        ctl = make_controller()
        token = ctl.login("u2")
        assert ctl.check_access(token, "read", "public/data")
        assert not ctl.check_access(token, "write", "public/data")

    def test_prefix_matching_is_segment_anchored(self):
        ctl = make_controller()
        policy = Policy("p", frozenset({"read"}), "bucket-a")
        assert policy.matches("read", "bucket-a")
        assert policy.matches("read", "bucket-a/key")
        assert not policy.matches("read", "bucket-ab/key")

    def test_every_check_appends_one_audit_record(self):
        ctl = make_controller()
        token = ctl.login("u1")
        before = len(ctl.audit.records)
        ctl.check_access(token, "read", "wos-private/a")
        ctl.check_access(token, "write", "wos-private/a")
        assert len(ctl.audit.records) == before + 2
        assert ctl.audit.records[-1].outcome == "denied"


class TestAssumeRole:
    def worker(self, ctl, instance="i-1"):
        return ctl.issue_internal_token(TASK_EXECUTOR, instance)

    def test_assume_grants_exactly_user_roles(self):
        ctl = make_controller()
        ctl.set_active_job_checker(lambda w, u: w == "i-1" and u == "u1")
        worker = self.worker(ctl)
        assumed = ctl.assume_role(worker, "u1")
        assert set(assumed.roles) == set(ctl.login("u1").roles)
        assert assumed.expiry - assumed.issued_at == 900.0
        assert assumed.parent == worker.id

    def test_ordinary_user_cannot_assume(self):
        ctl = make_controller()
        token = ctl.login("u1")
        with pytest.raises(errors.NotTrustedRole):
            ctl.assume_role(token, "u2")

    def test_no_active_job_binding(self):
        ctl = make_controller()
        worker = self.worker(ctl)
        with pytest.raises(errors.NoActiveJobForUser):
            ctl.assume_role(worker, "u1")

    def test_assumption_confinement(self):
        # the assumed token reaches exactly the resources the user's own
        # login token reaches, enumerated over a fixture grid
        ctl = make_controller()
        ctl.set_active_job_checker(lambda w, u: True)
        login = ctl.login("u1")
        assumed = ctl.assume_role(self.worker(ctl), "u1")
        grid = [
            (a, r)
            for a in ("read", "write", "list")
            for r in ("wos-private/a", "public/a", "user-u1/a", "user-u2/a", "other/x")
        ]
        own = {(a, r) for a, r in grid if ctl.check_access(login, a, r)}
        via = {(a, r) for a, r in grid if ctl.check_access(assumed, a, r)}
        assert own == via

    def test_release_then_denied(self):
        ctl = make_controller()
        ctl.set_active_job_checker(lambda w, u: True)
        assumed = ctl.assume_role(self.worker(ctl), "u1")
        assert ctl.check_access(assumed, "read", "wos-private/a")
        ctl.release_role(assumed)
        assert not ctl.check_access(assumed, "read", "wos-private/a")

    def test_release_login_token_rejected(self):
        ctl = make_controller()
        token = ctl.login("u1")
        with pytest.raises(errors.NotAssumedToken):
            ctl.release_role(token)

    def test_double_release_rejected(self):
        ctl = make_controller()
        ctl.set_active_job_checker(lambda w, u: True)
        assumed = ctl.assume_role(self.worker(ctl), "u1")
        ctl.release_role(assumed)
        with pytest.raises(errors.NotAssumedToken):
            ctl.release_role(assumed)

    def test_assumed_window_tighter_than_login(self):
        ctl = make_controller()
        ctl.set_active_job_checker(lambda w, u: True)
        assumed = ctl.assume_role(self.worker(ctl), "u1")
        ctl.clock.advance(900.0)
        assert not ctl.check_access(assumed, "read", "wos-private/a")


class TestAudit:
    def test_seq_gap_free(self):
        ctl = make_controller()
        token = ctl.login("u1")
        for i in range(5):
            ctl.check_access(token, "read", f"wos-private/{i}")
        seqs = [r.seq for r in ctl.audit.records]
        assert seqs == list(range(len(seqs)))

    def test_count_matches_operations(self):
        ctl = make_controller()
        ctl.set_active_job_checker(lambda w, u: True)
        ops = 0
        token = ctl.login("u1")
        ops += 1
        worker = ctl.issue_internal_token(TASK_EXECUTOR, "i-9")
        ops += 1
        assumed = ctl.assume_role(worker, "u1")
        ops += 1
        for i in range(7):
            ctl.check_access(assumed, "read", f"wos-private/{i}")
            ops += 1
        ctl.release_role(assumed)
        ops += 1
        assert len(ctl.audit.records) == ops

    def test_export_requires_admin(self):
        ctl = make_controller()
        token = ctl.login("u1")
        with pytest.raises(errors.AccessDenied):
            ctl.export_audit(token)

    def test_export_filters_by_user(self):
        ctl = make_controller()
        t1, t2 = ctl.login("u1"), ctl.login("u2")
        ctl.check_access(t1, "read", "wos-private/a")
        ctl.check_access(t2, "read", "public/b")
        admin = ctl.issue_internal_token("admin", "ops")
        records = ctl.export_audit(admin, user="u1")
        assert records and all("user:u1" in r.actor for r in records)
        assert all(r.actor != "user:u2" for r in records)

    def test_export_filters_assumed_tokens_to_user(self):
        ctl = make_controller()
        ctl.set_active_job_checker(lambda w, u: True)
        worker = ctl.issue_internal_token(TASK_EXECUTOR, "i-1")
        assumed = ctl.assume_role(worker, "u1")
        ctl.check_access(assumed, "read", "wos-private/a")
        admin = ctl.issue_internal_token("admin", "ops")
        records = ctl.export_audit(admin, user="u1")
        assert any(r.actor.startswith("user:u1:via:") for r in records)

    def test_empty_range_empty_list(self):
        ctl = make_controller()
        admin = ctl.issue_internal_token("admin", "ops")
        assert ctl.export_audit(admin, start=50.0, end=50.0) == []

    def test_export_line_format(self):
        ctl = make_controller()
        token = ctl.login("u1")
        ctl.check_access(token, "read", "wos-private/a")
        line = ctl.audit.records[-1].line()
        parts = line.split("|")
        assert len(parts) == 6
        assert parts[0] == str(ctl.audit.records[-1].seq)
        assert parts[1].endswith("Z")
        assert parts[5] == "allowed"

    def test_internal_roles_not_assignable(self):
        ctl = make_controller()
        with pytest.raises(errors.AccessDenied):
            ctl.grant_role("u1", TASK_EXECUTOR)

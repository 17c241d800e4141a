"""Built-in catalog, region layout, and security fixtures used by the
experiments, the demo service, and the test suite. Everything here is plain
configuration; deployments can replace any of it via config files."""
from __future__ import annotations

from .cloudsim import InstanceTypeSpec, Region
from .security import AccessController, TASK_EXECUTOR, WEB_SERVER
from .storage import ObjectStore

HOME_REGION = "us-east-1"

DEFAULT_REGIONS = [
    Region("us-east-1", ("us-east-1a", "us-east-1b", "us-east-1c")),
    Region("us-west-2", ("us-west-2a", "us-west-2b", "us-west-2c")),
    Region("eu-west-1", ("eu-west-1a", "eu-west-1b")),
    Region("ap-southeast-1", ("ap-southeast-1a", "ap-southeast-1b")),
]

DEFAULT_CATALOG = {
    "m4.xlarge": InstanceTypeSpec("m4.xlarge", 4, 16.0, 0.239),
    "c4.8xlarge": InstanceTypeSpec("c4.8xlarge", 36, 60.0, 1.675),
    "m-std": InstanceTypeSpec("m-std", 4, 16.0, 0.239),
}

DATASET_BUCKET = "datasets"
SUBMITTER_ROLE = "submitter"
DATASET_READER_ROLE = "dataset-reader"
ADMIN_ROLE = "admin"


def all_zone_ids(regions=DEFAULT_REGIONS) -> list[str]:
    return [z for region in regions for z in region.zones]


def install_internal_roles(access: AccessController) -> None:
    """Trusted platform roles. The task-executor role deliberately carries no
    data policies; workers must assume a user role to touch data. The admin
    role is assignable (operators log in like anyone else) but is the only
    role honored for audit export."""
    access.add_role(TASK_EXECUTOR, internal=True)
    access.add_role(WEB_SERVER, internal=True)
    access.add_policy("p-audit-export", ("read",), "audit")
    access.add_role(ADMIN_ROLE, ("p-audit-export",))


def install_common_roles(access: AccessController) -> None:
    access.add_policy("p-submit-jobs", ("write",), "jobs/")
    access.add_role(SUBMITTER_ROLE, ("p-submit-jobs",))
    access.add_policy("p-read-datasets", ("read", "list"), f"{DATASET_BUCKET}/")
    access.add_policy("p-list-datasets", ("list",), DATASET_BUCKET)
    access.add_role(DATASET_READER_ROLE, ("p-read-datasets", "p-list-datasets"))


def provision_user(
    access: AccessController,
    store: ObjectStore,
    user_id: str,
    display_name: str = "",
    submitter: bool = True,
    dataset_reader: bool = True,
) -> None:
    """Register a user with a private home bucket plus the usual grants."""
    if user_id not in access.users:
        access.add_user(user_id, display_name or user_id)
    home = f"user-{user_id}"
    store.create_bucket(home)
    role_id = f"home-{user_id}"
    if role_id not in access.roles:
        policy_rw = access.add_policy(f"p-home-rw-{user_id}", ("read", "write", "list"), f"{home}/")
        policy_ls = access.add_policy(f"p-home-ls-{user_id}", ("list",), home)
        access.add_role(role_id, (policy_rw.id, policy_ls.id))
    access.grant_role(user_id, role_id)
    if submitter:
        access.grant_role(user_id, SUBMITTER_ROLE)
    if dataset_reader:
        access.grant_role(user_id, DATASET_READER_ROLE)

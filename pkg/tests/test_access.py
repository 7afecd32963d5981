"""Access control: private by default, grant paths, the permission matrix."""

from __future__ import annotations

import pytest

from fairhaven import errors
from fairhaven.access import PERMISSION_MATRIX, Role


def test_private_by_default(platform, org):
    """Workspace membership alone grants nothing on a dataset."""
    with pytest.raises(errors.Forbidden):
        platform.dataset_view(org.outsider["id"], org.dataset["id"])
    assert platform.list_datasets(org.outsider["id"]) == []
    assert platform.access.effective_role(org.outsider["id"], org.dataset["id"]) is None


def test_owner_has_every_permission(platform, org):
    for action in PERMISSION_MATRIX:
        assert platform.access.check(org.owner["id"], org.dataset["id"], action)


def test_viewer_reads_but_cannot_write(platform, org):
    platform.grant(org.owner["id"], org.dataset["id"], "user", org.outsider["id"], "viewer")
    assert platform.dataset_view(org.outsider["id"], org.dataset["id"])["caller_role"] == "viewer"
    with pytest.raises(errors.Forbidden):
        platform.create_manifest(org.outsider["id"], org.dataset["id"], [])
    with pytest.raises(errors.Forbidden):
        platform.update_attributes(org.outsider["id"], org.dataset["id"], {"description": "x"})


def test_editor_writes_but_cannot_administer(platform, org):
    platform.grant(org.owner["id"], org.dataset["id"], "user", org.outsider["id"], "editor")
    root = platform.get_tree(org.outsider["id"], org.dataset["id"])
    platform.mutate_tree(org.outsider["id"], org.dataset["id"], "create_folder", root["id"], {"name": "mine"})
    with pytest.raises(errors.Forbidden):
        platform.grant(org.outsider["id"], org.dataset["id"], "user", org.stranger["id"], "viewer")
    with pytest.raises(errors.Forbidden):
        platform.set_status(org.outsider["id"], org.dataset["id"], "curating")


def test_manager_administers_but_cannot_destroy(platform, org):
    platform.grant(org.owner["id"], org.dataset["id"], "user", org.outsider["id"], "manager")
    platform.grant(org.outsider["id"], org.dataset["id"], "user", org.reviewer["id"], "viewer")
    platform.set_status(org.outsider["id"], org.dataset["id"], "curating")
    with pytest.raises(errors.Forbidden):
        platform.delete_dataset(org.outsider["id"], org.dataset["id"])
    with pytest.raises(errors.Forbidden):
        platform.submit_for_review(org.outsider["id"], org.dataset["id"])
    with pytest.raises(errors.Forbidden):
        platform.transfer_ownership(org.outsider["id"], org.dataset["id"], org.outsider["id"])


def test_owner_not_grantable(platform, org):
    with pytest.raises(errors.OwnerViaGrant):
        platform.grant(org.owner["id"], org.dataset["id"], "user", org.outsider["id"], "owner")


def test_team_and_workspace_grants_capped_at_manager(platform, org):
    with pytest.raises(errors.OwnerViaGrant):
        platform.access.grant(
            org.dataset["id"],
            __import__("fairhaven.access", fromlist=["Principal"]).Principal("team", org.team["id"]),
            Role.OWNER,
        )
    # the service path rejects it too
    with pytest.raises(errors.OwnerViaGrant):
        platform.grant(org.owner["id"], org.dataset["id"], "team", org.team["id"], "owner")


def test_team_grant_reaches_members_only(platform, org):
    platform.grant(org.owner["id"], org.dataset["id"], "team", org.team["id"], "editor")
    # reviewer is on the team, outsider is not
    assert platform.access.effective_role(org.reviewer["id"], org.dataset["id"]) == Role.EDITOR
    assert platform.access.effective_role(org.outsider["id"], org.dataset["id"]) is None


def test_workspace_grant_reaches_all_members(platform, org):
    platform.grant(org.owner["id"], org.dataset["id"], "workspace", org.workspace["id"], "viewer")
    assert platform.access.effective_role(org.outsider["id"], org.dataset["id"]) == Role.VIEWER
    assert platform.access.effective_role(org.stranger["id"], org.dataset["id"]) is None


def test_max_wins_across_grant_paths(platform, org):
    """A user reachable through several paths gets the strongest role."""
    platform.grant(org.owner["id"], org.dataset["id"], "workspace", org.workspace["id"], "viewer")
    platform.grant(org.owner["id"], org.dataset["id"], "team", org.team["id"], "editor")
    platform.grant(org.owner["id"], org.dataset["id"], "user", org.reviewer["id"], "viewer")
    assert platform.access.effective_role(org.reviewer["id"], org.dataset["id"]) == Role.EDITOR
    platform.grant(org.owner["id"], org.dataset["id"], "user", org.reviewer["id"], "manager")
    assert platform.access.effective_role(org.reviewer["id"], org.dataset["id"]) == Role.MANAGER


def test_revoke_returns_user_to_no_access(platform, org):
    platform.grant(org.owner["id"], org.dataset["id"], "user", org.outsider["id"], "viewer")
    platform.revoke(org.owner["id"], org.dataset["id"], "user", org.outsider["id"])
    with pytest.raises(errors.Forbidden):
        platform.dataset_view(org.outsider["id"], org.dataset["id"])


def test_owner_grant_cannot_be_revoked_or_overwritten(platform, org):
    with pytest.raises(errors.Forbidden):
        platform.revoke(org.owner["id"], org.dataset["id"], "user", org.owner["id"])
    with pytest.raises(errors.Forbidden):
        platform.grant(org.owner["id"], org.dataset["id"], "user", org.owner["id"], "viewer")


def test_transfer_swaps_owner_and_demotes_previous(platform, org):
    platform.transfer_ownership(org.owner["id"], org.dataset["id"], org.outsider["id"])
    assert platform.access.effective_role(org.outsider["id"], org.dataset["id"]) == Role.OWNER
    assert platform.access.effective_role(org.owner["id"], org.dataset["id"]) == Role.MANAGER
    view = platform.dataset_view(org.outsider["id"], org.dataset["id"])
    assert view["owner_id"] == org.outsider["id"]
    # previous owner can no longer transfer it back
    with pytest.raises(errors.Forbidden):
        platform.transfer_ownership(org.owner["id"], org.dataset["id"], org.owner["id"])


def test_transfer_requires_workspace_membership(platform, org):
    with pytest.raises(errors.NotAMember):
        platform.transfer_ownership(org.owner["id"], org.dataset["id"], org.stranger["id"])


def test_grants_to_unknown_principals_rejected(platform, org):
    with pytest.raises(errors.NotFound):
        platform.grant(org.owner["id"], org.dataset["id"], "user", "f" * 32, "viewer")
    with pytest.raises(errors.NotFound):
        platform.grant(org.owner["id"], org.dataset["id"], "team", "f" * 32, "viewer")


def test_grant_changes_logged(platform, org):
    platform.grant(org.owner["id"], org.dataset["id"], "user", org.outsider["id"], "viewer")
    log = platform.query_activity(org.owner["id"], org.dataset["id"])
    assert any(e["action"] == "grant_changed" for e in log)

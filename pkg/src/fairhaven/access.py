"""Role-based access control: the role ladder, grants, and the permission matrix.

Datasets are private by default. A user's effective role is the maximum over
every path that reaches them: dataset ownership, a direct user grant, grants
to teams they belong to, and a workspace-wide grant. There are no deny rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import Forbidden, NotAMember, OwnerViaGrant


class Role(int, Enum):
    """Totally ordered role ladder. Comparisons use the integer rank."""

    VIEWER = 1
    EDITOR = 2
    MANAGER = 3
    OWNER = 4

    @property
    def wire(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, value: str) -> "Role":
        try:
            return cls[value.upper()]
        except KeyError:
            raise ValueError(f"unknown role {value!r}") from None


# action -> minimum role required
PERMISSION_MATRIX: dict[str, Role] = {
    "view_files": Role.VIEWER,
    "download": Role.VIEWER,
    "upload_files": Role.EDITOR,
    "edit_tree": Role.EDITOR,
    "edit_metadata": Role.EDITOR,
    "edit_attributes": Role.MANAGER,
    "change_status": Role.MANAGER,
    "manage_grants": Role.MANAGER,
    "submit_publication": Role.OWNER,
    "delete_dataset": Role.OWNER,
    "transfer_ownership": Role.OWNER,
}

PRINCIPAL_KINDS = ("user", "team", "workspace")


@dataclass(frozen=True)
class Principal:
    kind: str  # user | team | workspace
    id: str

    def __post_init__(self):
        if self.kind not in PRINCIPAL_KINDS:
            raise ValueError(f"unknown principal kind {self.kind!r}")


@dataclass
class Grant:
    dataset_id: str
    principal: Principal
    role: Role


class Directory:
    """What the access layer needs to know about the org chart.

    Implemented by the core-domain store; kept abstract so this module stays
    free of dataset internals.
    """

    def dataset_owner(self, dataset_id: str) -> str:
        raise NotImplementedError

    def dataset_workspace(self, dataset_id: str) -> str:
        raise NotImplementedError

    def teams_of(self, user_id: str, workspace_id: str) -> set[str]:
        raise NotImplementedError

    def is_workspace_member(self, user_id: str, workspace_id: str) -> bool:
        raise NotImplementedError


class AccessControl:
    """Grant store plus the effective-role / check calculus."""

    def __init__(self, directory: Directory):
        self._directory = directory
        # (dataset_id, principal) -> Grant; at most one grant per pair
        self._grants: dict[tuple[str, Principal], Grant] = {}

    # -- grant bookkeeping ----------------------------------------------------

    def seed_owner(self, dataset_id: str, owner_id: str) -> Grant:
        """Install the Owner grant for a fresh dataset. Not a public operation."""
        grant = Grant(dataset_id, Principal("user", owner_id), Role.OWNER)
        self._grants[(dataset_id, grant.principal)] = grant
        return grant

    def grant(self, dataset_id: str, principal: Principal, role: Role) -> Grant:
        """Upsert a grant. Owner is never grantable here (transfer-only)."""
        if role == Role.OWNER:
            raise OwnerViaGrant("owner role is assigned via ownership transfer only")
        if role > Role.MANAGER and principal.kind != "user":
            raise OwnerViaGrant("workspace/team grants are capped at manager")
        owner = self._directory.dataset_owner(dataset_id)
        if principal.kind == "user" and principal.id == owner:
            raise Forbidden("the owner's grant is managed via ownership transfer")
        grant = Grant(dataset_id, principal, role)
        self._grants[(dataset_id, principal)] = grant
        return grant

    def revoke(self, dataset_id: str, principal: Principal) -> bool:
        owner = self._directory.dataset_owner(dataset_id)
        if principal.kind == "user" and principal.id == owner:
            raise Forbidden("the owner's grant cannot be revoked")
        return self._grants.pop((dataset_id, principal), None) is not None

    def transfer_ownership(self, dataset_id: str, new_owner_id: str) -> list[Grant]:
        """Swap ownership: new owner gets Owner, previous owner drops to Manager.

        The caller (service layer) is responsible for the Owner-only check and
        for updating the dataset's owner_id afterwards.
        """
        previous = self._directory.dataset_owner(dataset_id)
        workspace_id = self._directory.dataset_workspace(dataset_id)
        if not self._directory.is_workspace_member(new_owner_id, workspace_id):
            raise NotAMember(f"user {new_owner_id} is not a member of workspace {workspace_id}")
        new_grant = Grant(dataset_id, Principal("user", new_owner_id), Role.OWNER)
        demoted = Grant(dataset_id, Principal("user", previous), Role.MANAGER)
        self._grants[(dataset_id, new_grant.principal)] = new_grant
        self._grants[(dataset_id, demoted.principal)] = demoted
        return [new_grant, demoted]

    def grants_for(self, dataset_id: str) -> list[Grant]:
        return sorted(
            (g for (ds, _), g in self._grants.items() if ds == dataset_id),
            key=lambda g: (g.principal.kind, g.principal.id),
        )

    def drop_dataset(self, dataset_id: str) -> None:
        for key in [k for k in self._grants if k[0] == dataset_id]:
            del self._grants[key]

    # -- the calculus ----------------------------------------------------------

    def effective_role(self, user_id: str, dataset_id: str) -> Role | None:
        """Maximum role over every path reaching the user; None if no path."""
        best: Role | None = None

        def bump(role: Role | None) -> None:
            nonlocal best
            if role is not None and (best is None or role > best):
                best = role

        if self._directory.dataset_owner(dataset_id) == user_id:
            bump(Role.OWNER)
        workspace_id = self._directory.dataset_workspace(dataset_id)
        direct = self._grants.get((dataset_id, Principal("user", user_id)))
        if direct:
            bump(direct.role)
        for team_id in self._directory.teams_of(user_id, workspace_id):
            team_grant = self._grants.get((dataset_id, Principal("team", team_id)))
            if team_grant:
                bump(team_grant.role)
        if self._directory.is_workspace_member(user_id, workspace_id):
            ws_grant = self._grants.get((dataset_id, Principal("workspace", workspace_id)))
            if ws_grant:
                bump(ws_grant.role)
        return best

    def check(self, user_id: str, dataset_id: str, action: str) -> bool:
        required = PERMISSION_MATRIX[action]
        role = self.effective_role(user_id, dataset_id)
        return role is not None and role >= required

    def require(self, user_id: str, dataset_id: str, action: str) -> Role:
        role = self.effective_role(user_id, dataset_id)
        if role is None or role < PERMISSION_MATRIX[action]:
            raise Forbidden(f"{action} requires {PERMISSION_MATRIX[action].wire}")
        return role

    # -- persistence hooks ------------------------------------------------------

    def dump(self) -> list[dict]:
        return [
            {
                "dataset_id": g.dataset_id,
                "principal": {"kind": g.principal.kind, "id": g.principal.id},
                "role": g.role.wire,
            }
            for g in sorted(
                self._grants.values(),
                key=lambda g: (g.dataset_id, g.principal.kind, g.principal.id),
            )
        ]

    def load(self, rows: list[dict]) -> None:
        self._grants.clear()
        for row in rows:
            principal = Principal(row["principal"]["kind"], row["principal"]["id"])
            grant = Grant(row["dataset_id"], principal, Role.from_wire(row["role"]))
            self._grants[(grant.dataset_id, principal)] = grant

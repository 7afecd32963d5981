"""Core domain: users, workspaces, teams, datasets, the file tree, activity log.

The tree is a classic id-indexed node store: folders keep an ordered list of
child ids, every node knows its parent, and soft deletion stamps a timestamp
instead of removing anything (that stamp also drives the 30-day undelete
window). Sibling-name uniqueness is only enforced among live nodes so a
deleted file does not squat on its old name.

Authorization lives in :mod:`fairhaven.access`; this module enforces
*structure* and leaves role checks to the service layer. It implements the
``Directory`` protocol so the access layer can resolve ownership, teams and
workspace membership.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from .access import Directory
from .clock import Clock, isoformat
from .errors import (
    Cycle,
    EmptyName,
    InvalidPath,
    NameConflict,
    NotAMember,
    NotFound,
    SchemaViolation,
    SiblingConflict,
    WindowExpired,
)
from .ids import new_id

UNDELETE_WINDOW_DAYS = 30

ACTIVITY_ACTIONS = (
    "created",
    "renamed",
    "moved",
    "deleted",
    "undeleted",
    "uploaded",
    "attribute_changed",
    "grant_changed",
    "record_changed",
    "publish_event",
)

PUBLICATION_FIELDS = ("subtitle", "description", "license", "tags", "contributors")

DEFAULT_STATUS_LABELS = ["draft", "curating", "ready"]


@dataclass
class User:
    id: str
    display_name: str
    email: str
    created_at: datetime

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "email": self.email,
            "created_at": isoformat(self.created_at),
        }


@dataclass
class Workspace:
    id: str
    name: str
    members: set[str] = field(default_factory=set)
    teams: set[str] = field(default_factory=set)
    publishing_team: str | None = None
    status_labels: list[str] = field(default_factory=lambda: list(DEFAULT_STATUS_LABELS))
    created_at: datetime | None = None

    @property
    def default_status(self) -> str:
        return self.status_labels[0]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "members": sorted(self.members),
            "teams": sorted(self.teams),
            "publishing_team": self.publishing_team,
            "status_labels": list(self.status_labels),
            "created_at": isoformat(self.created_at) if self.created_at else None,
        }


@dataclass
class Team:
    id: str
    workspace_id: str
    name: str
    members: set[str] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "workspace_id": self.workspace_id,
            "name": self.name,
            "members": sorted(self.members),
        }


@dataclass
class Contributor:
    name: str
    affiliation: str | None = None
    role: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.affiliation is not None:
            out["affiliation"] = self.affiliation
        if self.role is not None:
            out["role"] = self.role
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Contributor":
        name = (data.get("name") or "").strip()
        if not name:
            raise EmptyName("contributor name must be non-empty")
        return cls(name=name, affiliation=data.get("affiliation"), role=data.get("role"))


@dataclass
class DatasetAttributes:
    name: str
    subtitle: str | None = None
    description: str | None = None
    license: str | None = None
    tags: set[str] = field(default_factory=set)
    contributors: list[Contributor] = field(default_factory=list)
    banner: str | None = None  # object key

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "subtitle": self.subtitle,
            "description": self.description,
            "license": self.license,
            "tags": sorted(self.tags),
            "contributors": [c.to_dict() for c in self.contributors],
            "banner": self.banner,
        }


@dataclass
class Dataset:
    id: str
    workspace_id: str
    owner_id: str
    attributes: DatasetAttributes
    status: str
    root_id: str
    created_at: datetime
    updated_at: datetime
    collections: set[str] = field(default_factory=set)
    deleted: bool = False
    locked: bool = False  # set while a publication request is in flight
    access_mode: str = "standard"  # standard | requester_pays

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "workspace_id": self.workspace_id,
            "owner_id": self.owner_id,
            "attributes": self.attributes.to_dict(),
            "status": self.status,
            "root_id": self.root_id,
            "created_at": isoformat(self.created_at),
            "updated_at": isoformat(self.updated_at),
            "collections": sorted(self.collections),
            "deleted": self.deleted,
            "locked": self.locked,
            "access_mode": self.access_mode,
        }


@dataclass
class PackageNode:
    id: str
    dataset_id: str
    parent_id: str | None  # None only for the root folder
    kind: str  # folder | file
    name: str
    children: list[str] = field(default_factory=list)  # folders only
    size_bytes: int = 0  # files only
    checksum: str | None = None  # files only, set on verification
    object_key: str | None = None  # files only
    soft_deleted_at: datetime | None = None
    delete_batch: str | None = None  # groups nodes removed by one cascade
    created_at: datetime | None = None

    @property
    def live(self) -> bool:
        return self.soft_deleted_at is None

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "dataset_id": self.dataset_id,
            "parent_id": self.parent_id,
            "kind": self.kind,
            "name": self.name,
            "soft_deleted_at": isoformat(self.soft_deleted_at) if self.soft_deleted_at else None,
            "delete_batch": self.delete_batch,
            "created_at": isoformat(self.created_at) if self.created_at else None,
        }
        if self.kind == "file":
            out["size_bytes"] = self.size_bytes
            out["checksum"] = self.checksum
            out["object_key"] = self.object_key
        else:
            out["children"] = list(self.children)
        return out


@dataclass
class ActivityEntry:
    seq: int
    at: datetime
    user_id: str
    action: str
    detail: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "at": isoformat(self.at),
            "user_id": self.user_id,
            "action": self.action,
            "detail": self.detail,
        }


class CoreStore(Directory):
    """In-memory entity store; snapshot/restore via dump()/load()."""

    def __init__(self, clock: Clock):
        self.clock = clock
        self.users: dict[str, User] = {}
        self.workspaces: dict[str, Workspace] = {}
        self.teams: dict[str, Team] = {}
        self.datasets: dict[str, Dataset] = {}
        self.nodes: dict[str, PackageNode] = {}
        self.activity: dict[str, list[ActivityEntry]] = {}

    # -- org chart ---------------------------------------------------------------

    def create_user(self, display_name: str, email: str) -> User:
        if not display_name.strip() or not email.strip():
            raise EmptyName("display name and email must be non-empty")
        email = email.strip().lower()
        if any(u.email == email for u in self.users.values()):
            raise NameConflict(f"email {email} is already registered")
        user = User(id=new_id(), display_name=display_name.strip(), email=email, created_at=self.clock.now())
        self.users[user.id] = user
        return user

    def create_workspace(self, name: str) -> Workspace:
        name = name.strip()
        if not name:
            raise EmptyName("workspace name must be non-empty")
        if any(w.name == name for w in self.workspaces.values()):
            raise NameConflict(f"workspace {name!r} already exists")
        ws = Workspace(id=new_id(), name=name, created_at=self.clock.now())
        self.workspaces[ws.id] = ws
        return ws

    def add_member(self, workspace_id: str, user_id: str) -> None:
        ws = self.workspace(workspace_id)
        self.user(user_id)
        ws.members.add(user_id)

    def create_team(self, workspace_id: str, name: str) -> Team:
        ws = self.workspace(workspace_id)
        name = name.strip()
        if not name:
            raise EmptyName("team name must be non-empty")
        if any(self.teams[t].name == name for t in ws.teams):
            raise NameConflict(f"team {name!r} already exists in workspace")
        team = Team(id=new_id(), workspace_id=workspace_id, name=name)
        self.teams[team.id] = team
        ws.teams.add(team.id)
        return team

    def add_team_member(self, team_id: str, user_id: str) -> None:
        team = self.team(team_id)
        if user_id not in self.workspace(team.workspace_id).members:
            raise NotAMember("team members must already belong to the workspace")
        team.members.add(user_id)

    def set_publishing_team(self, workspace_id: str, team_id: str) -> None:
        ws = self.workspace(workspace_id)
        if team_id not in ws.teams:
            raise NotFound(f"team {team_id} is not in workspace {workspace_id}")
        ws.publishing_team = team_id

    def set_status_labels(self, workspace_id: str, labels: list[str]) -> None:
        ws = self.workspace(workspace_id)
        cleaned = [label.strip() for label in labels if label.strip()]
        if not cleaned:
            raise EmptyName("a workspace needs at least one status label")
        ws.status_labels = cleaned

    # -- lookups -------------------------------------------------------------------

    def user(self, user_id: str) -> User:
        try:
            return self.users[user_id]
        except KeyError:
            raise NotFound(f"no user {user_id}") from None

    def workspace(self, workspace_id: str) -> Workspace:
        try:
            return self.workspaces[workspace_id]
        except KeyError:
            raise NotFound(f"no workspace {workspace_id}") from None

    def team(self, team_id: str) -> Team:
        try:
            return self.teams[team_id]
        except KeyError:
            raise NotFound(f"no team {team_id}") from None

    def dataset(self, dataset_id: str, include_deleted: bool = False) -> Dataset:
        ds = self.datasets.get(dataset_id)
        if ds is None or (ds.deleted and not include_deleted):
            raise NotFound(f"no dataset {dataset_id}")
        return ds

    def dataset_by_name(self, workspace_id: str, name: str) -> Dataset:
        for ds in self.datasets.values():
            if ds.workspace_id == workspace_id and ds.attributes.name == name and not ds.deleted:
                return ds
        raise NotFound(f"no dataset named {name!r} in workspace")

    def node(self, node_id: str) -> PackageNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NotFound(f"no node {node_id}") from None

    # -- Directory protocol (for the access layer) -----------------------------------

    def dataset_owner(self, dataset_id: str) -> str:
        return self.dataset(dataset_id, include_deleted=True).owner_id

    def dataset_workspace(self, dataset_id: str) -> str:
        return self.dataset(dataset_id, include_deleted=True).workspace_id

    def teams_of(self, user_id: str, workspace_id: str) -> set[str]:
        ws = self.workspaces.get(workspace_id)
        if ws is None:
            return set()
        return {t for t in ws.teams if user_id in self.teams[t].members}

    def is_workspace_member(self, user_id: str, workspace_id: str) -> bool:
        ws = self.workspaces.get(workspace_id)
        return ws is not None and user_id in ws.members

    def is_on_publishing_team(self, user_id: str, workspace_id: str) -> bool:
        ws = self.workspace(workspace_id)
        if ws.publishing_team is None:
            return False
        return user_id in self.teams[ws.publishing_team].members

    # -- datasets -----------------------------------------------------------------

    def create_dataset(self, workspace_id: str, owner_id: str, name: str) -> Dataset:
        ws = self.workspace(workspace_id)
        name = name.strip()
        if not name:
            raise EmptyName("dataset name must be non-empty")
        if owner_id not in ws.members:
            raise NotAMember(f"user {owner_id} is not a member of workspace {ws.name!r}")
        if any(
            d.workspace_id == workspace_id and d.attributes.name == name and not d.deleted
            for d in self.datasets.values()
        ):
            raise NameConflict(f"dataset {name!r} already exists in this workspace")
        now = self.clock.now()
        root = PackageNode(
            id=new_id(), dataset_id="", parent_id=None, kind="folder", name="", created_at=now
        )
        ds = Dataset(
            id=new_id(),
            workspace_id=workspace_id,
            owner_id=owner_id,
            attributes=DatasetAttributes(name=name),
            status=ws.default_status,
            root_id=root.id,
            created_at=now,
            updated_at=now,
        )
        root.dataset_id = ds.id
        self.nodes[root.id] = root
        self.datasets[ds.id] = ds
        self.activity[ds.id] = []
        self.log(ds.id, owner_id, "created", f"dataset {name!r} created")
        return ds

    def touch(self, dataset_id: str) -> None:
        self.dataset(dataset_id, include_deleted=True).updated_at = self.clock.now()

    def soft_delete_dataset(self, dataset_id: str, user_id: str) -> None:
        ds = self.dataset(dataset_id)
        ds.deleted = True
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "deleted", f"dataset {ds.attributes.name!r} deleted")

    def set_attributes(self, dataset_id: str, user_id: str, changes: dict) -> Dataset:
        ds = self.dataset(dataset_id)
        attrs = ds.attributes
        unknown = set(changes) - {"name", "subtitle", "description", "license", "tags", "contributors", "banner"}
        if unknown:
            raise SchemaViolation(f"unknown attributes: {sorted(unknown)}")
        if "name" in changes:
            name = (changes["name"] or "").strip()
            if not name:
                raise EmptyName("dataset name must be non-empty")
            if name != attrs.name and any(
                d.workspace_id == ds.workspace_id and d.attributes.name == name and not d.deleted
                for d in self.datasets.values()
            ):
                raise NameConflict(f"dataset {name!r} already exists in this workspace")
            attrs.name = name
        if "subtitle" in changes:
            attrs.subtitle = changes["subtitle"] or None
        if "description" in changes:
            attrs.description = changes["description"] or None
        if "license" in changes:
            attrs.license = changes["license"] or None
        if "tags" in changes:
            tags = changes["tags"] or []
            attrs.tags = {t.strip().lower() for t in tags if t.strip()}
        if "contributors" in changes:
            attrs.contributors = [Contributor.from_dict(c) for c in changes["contributors"] or []]
        if "banner" in changes:
            attrs.banner = changes["banner"] or None
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "attribute_changed", f"attributes updated: {', '.join(sorted(changes))}")
        return ds

    def set_status(self, dataset_id: str, user_id: str, label: str) -> Dataset:
        ds = self.dataset(dataset_id)
        ws = self.workspace(ds.workspace_id)
        if label not in ws.status_labels:
            raise SchemaViolation(
                f"status {label!r} is not one of the workspace labels {ws.status_labels}"
            )
        ds.status = label
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "attribute_changed", f"status set to {label!r}")
        return ds

    def set_collections(self, dataset_id: str, user_id: str, collections: list[str]) -> Dataset:
        ds = self.dataset(dataset_id)
        ds.collections = {c.strip() for c in collections if c.strip()}
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "attribute_changed", "collections updated")
        return ds

    def validate_publication_fields(self, dataset_id: str) -> list[str]:
        attrs = self.dataset(dataset_id).attributes
        missing = []
        for name in PUBLICATION_FIELDS:
            value = getattr(attrs, name)
            if value is None or (isinstance(value, (set, list, str)) and len(value) == 0):
                missing.append(name)
        return missing

    # -- tree ------------------------------------------------------------------------

    def _assert_same_dataset(self, dataset_id: str, node: PackageNode) -> None:
        if node.dataset_id != dataset_id:
            raise NotFound(f"node {node.id} is not in dataset {dataset_id}")

    def _live_children(self, folder: PackageNode) -> list[PackageNode]:
        return [self.nodes[c] for c in folder.children if self.nodes[c].live]

    def _check_sibling(self, folder: PackageNode, name: str) -> None:
        if any(child.name == name for child in self._live_children(folder)):
            raise SiblingConflict(f"{name!r} already exists in this folder")

    def _require_live_folder(self, dataset_id: str, folder_id: str) -> PackageNode:
        folder = self.node(folder_id)
        self._assert_same_dataset(dataset_id, folder)
        if folder.kind != "folder":
            raise InvalidPath(f"{folder.name!r} is a file, not a folder")
        if not folder.live:
            raise NotFound(f"folder {folder.name!r} is deleted")
        return folder

    @staticmethod
    def _valid_name(name: str) -> str:
        name = name.strip()
        if not name:
            raise EmptyName("node name must be non-empty")
        if "/" in name or name in (".", ".."):
            raise InvalidPath(f"{name!r} is not a legal node name")
        return name

    def create_folder(self, dataset_id: str, user_id: str, parent_id: str, name: str) -> PackageNode:
        self.dataset(dataset_id)
        parent = self._require_live_folder(dataset_id, parent_id)
        name = self._valid_name(name)
        self._check_sibling(parent, name)
        node = PackageNode(
            id=new_id(), dataset_id=dataset_id, parent_id=parent.id, kind="folder",
            name=name, created_at=self.clock.now(),
        )
        self.nodes[node.id] = node
        parent.children.append(node.id)
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "created", f"folder {name!r} created")
        return node

    def attach_file(
        self,
        dataset_id: str,
        user_id: str,
        parent_id: str,
        name: str,
        size_bytes: int,
        checksum: str | None,
        object_key: str | None,
    ) -> PackageNode:
        """Create a file node. Called by upload finalization (and by tests that
        need a file of a declared size without moving the bytes)."""
        self.dataset(dataset_id)
        parent = self._require_live_folder(dataset_id, parent_id)
        name = self._valid_name(name)
        self._check_sibling(parent, name)
        node = PackageNode(
            id=new_id(), dataset_id=dataset_id, parent_id=parent.id, kind="file",
            name=name, size_bytes=size_bytes, checksum=checksum, object_key=object_key,
            created_at=self.clock.now(),
        )
        self.nodes[node.id] = node
        parent.children.append(node.id)
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "uploaded", f"file {name!r} added ({size_bytes} bytes)")
        return node

    def rename_node(self, dataset_id: str, user_id: str, node_id: str, new_name: str) -> PackageNode:
        node = self.node(node_id)
        self._assert_same_dataset(dataset_id, node)
        if node.parent_id is None:
            raise InvalidPath("the root folder cannot be renamed")
        if not node.live:
            raise NotFound(f"node {node.name!r} is deleted")
        new_name = self._valid_name(new_name)
        parent = self.node(node.parent_id)
        if new_name != node.name:
            self._check_sibling(parent, new_name)
        old = node.name
        node.name = new_name
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "renamed", f"{old!r} renamed to {new_name!r}")
        return node

    def move_node(self, dataset_id: str, user_id: str, node_id: str, new_parent_id: str) -> PackageNode:
        node = self.node(node_id)
        self._assert_same_dataset(dataset_id, node)
        if node.parent_id is None:
            raise InvalidPath("the root folder cannot be moved")
        if not node.live:
            raise NotFound(f"node {node.name!r} is deleted")
        new_parent = self._require_live_folder(dataset_id, new_parent_id)
        # walking up from the target: if we meet the node, the move creates a cycle
        probe: PackageNode | None = new_parent
        while probe is not None:
            if probe.id == node.id:
                raise Cycle(f"cannot move {node.name!r} into its own subtree")
            probe = self.nodes[probe.parent_id] if probe.parent_id else None
        if new_parent.id != node.parent_id:
            self._check_sibling(new_parent, node.name)
            old_parent = self.node(node.parent_id)
            old_parent.children.remove(node.id)
            new_parent.children.append(node.id)
            node.parent_id = new_parent.id
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "moved", f"{node.name!r} moved")
        return node

    def subtree(self, node_id: str) -> list[PackageNode]:
        """The node plus every descendant, depth-first, deleted included."""
        node = self.node(node_id)
        out = [node]
        if node.kind == "folder":
            for child_id in node.children:
                out.extend(self.subtree(child_id))
        return out

    def soft_delete_node(self, dataset_id: str, user_id: str, node_id: str) -> list[PackageNode]:
        """Stamp the node and its live descendants; returns the stamped file nodes."""
        node = self.node(node_id)
        self._assert_same_dataset(dataset_id, node)
        if node.parent_id is None:
            raise InvalidPath("the root folder cannot be deleted")
        if not node.live:
            raise NotFound(f"node {node.name!r} is already deleted")
        now = self.clock.now()
        batch = new_id()  # timestamps can collide across cascades; ids cannot
        stamped_files = []
        for member in self.subtree(node_id):
            if member.live:
                member.soft_deleted_at = now
                member.delete_batch = batch
                if member.kind == "file":
                    stamped_files.append(member)
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "deleted", f"{node.kind} {node.name!r} deleted")
        return stamped_files

    def undelete_node(self, dataset_id: str, user_id: str, node_id: str) -> PackageNode:
        """Restore a node and the descendants deleted in the same cascade."""
        node = self.node(node_id)
        self._assert_same_dataset(dataset_id, node)
        if node.live:
            raise NotFound(f"node {node.name!r} is not deleted")
        stamp = node.soft_deleted_at
        batch = node.delete_batch
        age_days = (self.clock.now() - stamp).total_seconds() / 86400.0
        if age_days > UNDELETE_WINDOW_DAYS:
            raise WindowExpired(
                f"{node.name!r} was deleted {age_days:.1f} days ago; the window is {UNDELETE_WINDOW_DAYS} days"
            )
        parent = self.node(node.parent_id)
        if not parent.live:
            raise NotFound(f"parent folder of {node.name!r} is deleted; undelete it first")
        self._check_sibling(parent, node.name)
        for member in self.subtree(node_id):
            if member.delete_batch == batch:
                member.soft_deleted_at = None
                member.delete_batch = None
        self.touch(dataset_id)
        self.log(dataset_id, user_id, "undeleted", f"{node.kind} {node.name!r} restored")
        return node

    def mutate_tree(self, dataset_id: str, user_id: str, op: str, target: str, args: dict):
        """Uniform dispatcher used by the REST layer."""
        if op == "create_folder":
            return self.create_folder(dataset_id, user_id, parent_id=target, name=args["name"])
        if op == "rename":
            return self.rename_node(dataset_id, user_id, target, args["name"])
        if op == "move":
            return self.move_node(dataset_id, user_id, target, args["parent_id"])
        if op == "soft_delete":
            return self.soft_delete_node(dataset_id, user_id, target)
        if op == "undelete":
            return self.undelete_node(dataset_id, user_id, target)
        raise InvalidPath(f"unknown tree operation {op!r}")

    # -- tree reads ---------------------------------------------------------------

    def node_path(self, node_id: str) -> str:
        parts: list[str] = []
        node = self.node(node_id)
        while node.parent_id is not None:
            parts.append(node.name)
            node = self.node(node.parent_id)
        return "/".join(reversed(parts))

    def resolve_path(self, dataset_id: str, path: str) -> PackageNode:
        ds = self.dataset(dataset_id)
        node = self.node(ds.root_id)
        for part in [p for p in path.split("/") if p]:
            if node.kind != "folder":
                raise NotFound(f"no node at {path!r}")
            for child in self._live_children(node):
                if child.name == part:
                    node = child
                    break
            else:
                raise NotFound(f"no node at {path!r}")
        return node

    def ensure_folder_path(self, dataset_id: str, user_id: str, path: str) -> PackageNode:
        """mkdir -p: create missing live folders along the path."""
        ds = self.dataset(dataset_id)
        node = self.node(ds.root_id)
        for part in [p for p in path.split("/") if p]:
            existing = next((c for c in self._live_children(node) if c.name == part), None)
            if existing is not None:
                if existing.kind != "folder":
                    raise InvalidPath(f"{part!r} exists and is a file")
                node = existing
            else:
                node = self.create_folder(dataset_id, user_id, node.id, part)
        return node

    def live_files(self, dataset_id: str) -> list[tuple[str, PackageNode]]:
        """(path, node) for every live file, sorted by path."""
        ds = self.dataset(dataset_id, include_deleted=True)
        out: list[tuple[str, PackageNode]] = []

        def walk(folder: PackageNode, prefix: str) -> None:
            for child in self._live_children(folder):
                path = f"{prefix}{child.name}"
                if child.kind == "file":
                    out.append((path, child))
                else:
                    walk(child, path + "/")

        walk(self.node(ds.root_id), "")
        return sorted(out, key=lambda pair: pair[0])

    def list_folder(self, dataset_id: str, folder_id: str | None = None) -> list[PackageNode]:
        ds = self.dataset(dataset_id)
        folder = self.node(folder_id or ds.root_id)
        self._assert_same_dataset(dataset_id, folder)
        if folder.kind != "folder":
            raise InvalidPath(f"{folder.name!r} is not a folder")
        return self._live_children(folder)

    def dataset_metrics(self, dataset_id: str, record_count: int = 0) -> dict:
        ds = self.dataset(dataset_id, include_deleted=True)
        files = self.live_files(dataset_id)
        return {
            "file_count": len(files),
            "total_size_bytes": sum(node.size_bytes for _, node in files),
            "record_count": record_count,
            "last_updated": isoformat(ds.updated_at),
        }

    def check_tree_invariants(self, dataset_id: str) -> None:
        """Brute-force structural validation (test harness support)."""
        ds = self.dataset(dataset_id, include_deleted=True)
        seen: set[str] = set()

        def walk(node: PackageNode) -> None:
            assert node.id not in seen, "cycle or shared node detected"
            seen.add(node.id)
            if node.kind == "file":
                assert not node.children, "file nodes must not have children"
                return
            live_names = [c.name for c in self._live_children(node)]
            assert len(live_names) == len(set(live_names)), f"sibling clash in {node.name!r}"
            for child_id in node.children:
                child = self.nodes[child_id]
                assert child.parent_id == node.id, "parent pointer mismatch"
                walk(child)

        walk(self.node(ds.root_id))

    # -- activity log ---------------------------------------------------------------

    def log(self, dataset_id: str, user_id: str, action: str, detail: str) -> ActivityEntry:
        if action not in ACTIVITY_ACTIONS:
            raise ValueError(f"unknown activity action {action!r}")
        entries = self.activity.setdefault(dataset_id, [])
        entry = ActivityEntry(
            seq=len(entries) + 1, at=self.clock.now(), user_id=user_id, action=action, detail=detail
        )
        entries.append(entry)
        return entry

    def query_activity(self, dataset_id: str, from_seq: int = 1, limit: int = 100) -> list[ActivityEntry]:
        self.dataset(dataset_id, include_deleted=True)
        entries = self.activity.get(dataset_id, [])
        return [e for e in entries if e.seq >= from_seq][: max(0, limit)]

    # -- persistence -------------------------------------------------------------------

    def dump(self) -> dict:
        return {
            "users": [u.to_dict() for u in self.users.values()],
            "workspaces": [w.to_dict() for w in self.workspaces.values()],
            "teams": [t.to_dict() for t in self.teams.values()],
            "datasets": [d.to_dict() for d in self.datasets.values()],
            "nodes": [n.to_dict() for n in self.nodes.values()],
            "activity": {
                ds: [e.to_dict() for e in entries] for ds, entries in self.activity.items()
            },
        }

    def load(self, data: dict) -> None:
        from .clock import utc

        self.users = {
            u["id"]: User(u["id"], u["display_name"], u["email"], utc(u["created_at"]))
            for u in data.get("users", [])
        }
        self.workspaces = {}
        for w in data.get("workspaces", []):
            self.workspaces[w["id"]] = Workspace(
                id=w["id"], name=w["name"], members=set(w["members"]), teams=set(w["teams"]),
                publishing_team=w["publishing_team"], status_labels=list(w["status_labels"]),
                created_at=utc(w["created_at"]) if w["created_at"] else None,
            )
        self.teams = {
            t["id"]: Team(t["id"], t["workspace_id"], t["name"], set(t["members"]))
            for t in data.get("teams", [])
        }
        self.datasets = {}
        for d in data.get("datasets", []):
            attrs = d["attributes"]
            self.datasets[d["id"]] = Dataset(
                id=d["id"], workspace_id=d["workspace_id"], owner_id=d["owner_id"],
                attributes=DatasetAttributes(
                    name=attrs["name"], subtitle=attrs["subtitle"], description=attrs["description"],
                    license=attrs["license"], tags=set(attrs["tags"]),
                    contributors=[Contributor.from_dict(c) for c in attrs["contributors"]],
                    banner=attrs["banner"],
                ),
                status=d["status"], root_id=d["root_id"],
                created_at=utc(d["created_at"]), updated_at=utc(d["updated_at"]),
                collections=set(d["collections"]), deleted=d["deleted"], locked=d["locked"],
                access_mode=d.get("access_mode", "standard"),
            )
        self.nodes = {}
        for n in data.get("nodes", []):
            self.nodes[n["id"]] = PackageNode(
                id=n["id"], dataset_id=n["dataset_id"], parent_id=n["parent_id"], kind=n["kind"],
                name=n["name"], children=list(n.get("children", [])),
                size_bytes=n.get("size_bytes", 0), checksum=n.get("checksum"),
                object_key=n.get("object_key"),
                soft_deleted_at=utc(n["soft_deleted_at"]) if n.get("soft_deleted_at") else None,
                delete_batch=n.get("delete_batch"),
                created_at=utc(n["created_at"]) if n.get("created_at") else None,
            )
        self.activity = {
            ds: [
                ActivityEntry(e["seq"], utc(e["at"]), e["user_id"], e["action"], e["detail"])
                for e in entries
            ]
            for ds, entries in data.get("activity", {}).items()
        }

"""Static bearer-token authentication with three roles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from mcpcare.errors import FixtureInvalid

ROLES = ("physician", "engineer", "auditor")


@dataclass(frozen=True)
class Session:
    actor_id: str
    role: str


class AuthTable:
    def __init__(self, users: dict[str, Session]):
        self._by_token = dict(users)

    @classmethod
    def from_tree(cls, tree: Any) -> AuthTable:
        if not isinstance(tree, dict) or not isinstance(tree.get("users"), list):
            raise FixtureInvalid("user table needs a users array")
        users: dict[str, Session] = {}
        for i, raw in enumerate(tree["users"]):
            if not isinstance(raw, dict):
                raise FixtureInvalid(f"users[{i}] is not an object")
            token = raw.get("token")
            actor_id = raw.get("actor_id")
            role = raw.get("role")
            if not all(isinstance(v, str) and v for v in (token, actor_id, role)):
                raise FixtureInvalid(f"users[{i}] needs token, actor_id, role")
            if role not in ROLES:
                raise FixtureInvalid(f"users[{i}]: unknown role {role!r}")
            if token in users:
                raise FixtureInvalid(f"users[{i}]: duplicate token")
            users[token] = Session(actor_id=actor_id, role=role)
        return cls(users)

    def session_for(self, authorization: str | None) -> Session | None:
        if not authorization or not authorization.startswith("Bearer "):
            return None
        return self._by_token.get(authorization[len("Bearer "):].strip())

    def roles(self) -> dict[str, str]:
        return {s.actor_id: s.role for s in self._by_token.values()}

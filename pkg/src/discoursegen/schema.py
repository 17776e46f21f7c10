"""Closed discourse-role schemas for the news and recipe domains.

Schemas are compiled-in data (single source of truth) and can be exported to
JSON for external classifiers, or loaded back from JSON for custom domains.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError, UnknownLabelError

NEWS = "news"
RECIPE = "recipe"
BUILTIN_DOMAINS = (NEWS, RECIPE)


@dataclass(frozen=True)
class DiscourseRole:
    """One role of a discourse schema.

    id is the stable snake_case key used in JSONL and config files; display is
    the human label used inside instructions; definition is the one-sentence
    natural-language definition prepended to zero-shot instructions.
    """

    id: str
    display: str
    definition: str


@dataclass(frozen=True)
class DiscourseSchema:
    domain: str
    roles: tuple[DiscourseRole, ...]

    @property
    def size(self) -> int:
        return len(self.roles)

    def __post_init__(self):
        ids = [r.id for r in self.roles]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate role ids in schema {self.domain!r}")
        for r in self.roles:
            if not r.definition.strip():
                raise ConfigurationError(f"role {r.id!r} has an empty definition")

    def role_by_id(self, role_id: str) -> DiscourseRole:
        for r in self.roles:
            if r.id == role_id:
                return r
        raise UnknownLabelError(role_id, self.domain)

    def __contains__(self, role: DiscourseRole) -> bool:
        return role in self.roles

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "roles": [
                {"id": r.id, "display": r.display, "definition": r.definition}
                for r in self.roles
            ],
        }


_NEWS_ROLES = (
    DiscourseRole("main_event", "Main Event", "The major subject of the news article."),
    DiscourseRole("consequence", "Consequence", "An event or phenomenon that is caused by the main event."),
    DiscourseRole("previous_event", "Previous Event", "A specific event that occurred shortly before the main event."),
    DiscourseRole("current_context", "Current Context", "The general context or world state immediately preceding the main event."),
    DiscourseRole("historical_event", "Historical Event", "An event occurring much earlier than the main event."),
    DiscourseRole("future_consequences", "Future Consequences", "An analytical insight into future consequences or projections."),
    DiscourseRole("journalist_evaluation", "Journalist Evaluation", "A summary, opinion or comment made by the journalist."),
    DiscourseRole("anecdotal_event", "Anecdotal Event", "An event that is uncertain and cannot be verified. The primary purpose is to provide more emotional resonance to the main event."),
)

_RECIPE_ROLES = (
    DiscourseRole("pre_processing", "Pre-processing", "means the preparations of ingredients or cooker."),
    DiscourseRole("mixing", "Mixing", "includes actions of combining one or more ingredients together."),
    DiscourseRole("transferring", "Transferring", "is for the actions of moving or transferring food or intermediate food to a specific place."),
    DiscourseRole("cooking", "Cooking", "represents the actual cooking actions, which could vary drastically across different recipes."),
    DiscourseRole("post_processing", "Post-processing", "usually refers to the following up actions after the 'cooking' stage, such as 'cooling down', 'garnish'."),
    DiscourseRole("final", "Final", "refers to the last few actions before serving the food or the serving action itself."),
    DiscourseRole("general", "General", "includes the rest of actions which cannot be classified into the above categories."),
)

_BUILTIN = {
    NEWS: DiscourseSchema(NEWS, _NEWS_ROLES),
    RECIPE: DiscourseSchema(RECIPE, _RECIPE_ROLES),
}


def load_schema(domain: str) -> DiscourseSchema:
    """Return the built-in schema for a domain ("news" or "recipe")."""
    try:
        return _BUILTIN[domain]
    except KeyError:
        raise ConfigurationError(
            f"unknown domain {domain!r}; expected one of {', '.join(BUILTIN_DOMAINS)}"
        ) from None


def parse_role(schema: DiscourseSchema, label: str) -> DiscourseRole:
    """Resolve a role label against a schema.

    Case-insensitive match on either the role id or the display name, with
    surrounding angle brackets and whitespace stripped: "<Main Event>",
    "main_event" and "MAIN EVENT" all resolve to the same role.
    """
    needle = label.strip().strip("<>").strip().lower()
    for role in schema.roles:
        if needle == role.id.lower() or needle == role.display.lower():
            return role
    raise UnknownLabelError(label, schema.domain)


def role_definition(schema: DiscourseSchema, role: DiscourseRole) -> str:
    """Return the definition sentence for a role that belongs to the schema."""
    if role not in schema:
        raise UnknownLabelError(role.id, schema.domain)
    return role.definition


def export_schema(schema: DiscourseSchema, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_schema_from_file(path: str | Path) -> DiscourseSchema:
    """Load a user-defined schema from the JSON format written by export_schema."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        roles = tuple(
            DiscourseRole(r["id"], r["display"], r["definition"]) for r in raw["roles"]
        )
        return DiscourseSchema(raw["domain"], roles)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"malformed schema file {path}: {exc}") from exc

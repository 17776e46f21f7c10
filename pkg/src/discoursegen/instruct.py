"""Instruction rendering for section-by-section generation.

Each generation step gets a natural-language instruction built from three
parts: an optional discourse-context block (how much of the control plan the
model sees), the task directive naming the current role and the input prompt,
and the textual context of everything written so far.

Template strings are frozen; the golden tests pin them byte-for-byte. A
discourse-context line is omitted when its role list is empty, so the first
step carries no "previous" line and the last step no "future" line.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import DataError
from .schema import DiscourseRole, DiscourseSchema, role_definition
from .textseg import TokenBudget, truncate_to_budget


class ExposureMode(str, enum.Enum):
    """How much of the control plan an instruction reveals."""

    LOCAL = "local"                  # only the current role
    PAST_AWARE = "past_aware"        # roles already written
    FULL_STRUCTURE = "full_structure"  # the whole plan

    @classmethod
    def parse(cls, value: "str | ExposureMode") -> "ExposureMode":
        if isinstance(value, ExposureMode):
            return value
        try:
            return cls(value)
        except ValueError:
            raise DataError(
                f"unknown exposure mode {value!r}; expected one of "
                f"{', '.join(m.value for m in cls)}"
            ) from None


@dataclass(frozen=True)
class InputInfo:
    """Task input: a headline for news, title plus ingredients for recipes."""

    task: str
    headline: str = ""
    title: str = ""
    ingredients: tuple[str, ...] = ()

    def __post_init__(self):
        if self.task == "news":
            if not self.headline.strip():
                raise DataError("news input requires a non-empty headline")
        elif self.task == "recipe":
            if not self.title.strip():
                raise DataError("recipe input requires a non-empty title")
            if not self.ingredients:
                raise DataError("recipe input requires at least one ingredient")
        else:
            raise DataError(f"unknown task {self.task!r}")


@dataclass(frozen=True)
class ControlSequence:
    """Ordered discourse roles driving generation, one per output unit."""

    roles: tuple[DiscourseRole, ...]

    def __post_init__(self):
        if not self.roles:
            raise DataError("control sequence must contain at least one role")

    def __len__(self) -> int:
        return len(self.roles)


@dataclass(frozen=True)
class InstructionText:
    text: str
    step_index: int
    mode: ExposureMode


PREVIOUS_LINE = "The previous discourse structure is:"
FUTURE_LINE = "The future discourse structure is:"
NEWS_CONTEXT_HEADER = "News report:"
RECIPE_CONTEXT_HEADER = "Recipe:"
INGREDIENT_SEPARATOR = ", "


def _role_tokens(roles: tuple[DiscourseRole, ...]) -> str:
    return " ".join(f"<{r.display}>" for r in roles)


def _definition_line(schema: DiscourseSchema, role: DiscourseRole) -> str:
    definition = role_definition(schema, role)
    # News definitions are standalone sentences; recipe definitions are
    # predicates continuing the role name.
    if definition[:1].islower():
        return f"<{role.display}> {definition}"
    return f"<{role.display}>: {definition}"


def _directive_line(role: DiscourseRole, input_info: InputInfo) -> str:
    if input_info.task == "news":
        about = f'the news article about "{input_info.headline}"'
    else:
        ingredients = INGREDIENT_SEPARATOR.join(input_info.ingredients)
        about = f'the recipe for "{input_info.title}" with ingredients: {ingredients}'
    return f"Please continue writing a <{role.display}> section for {about}"


def render_instruction(
    input_info: InputInfo,
    seq: ControlSequence,
    i: int,
    mode: ExposureMode,
    prev_text: str,
    schema: DiscourseSchema,
    budget: TokenBudget | None = None,
    include_definition: bool = False,
) -> InstructionText:
    """Render the instruction for step i (1-based) of a control sequence.

    prev_text is the concatenation of all units before the current one: gold
    units when building training pairs, generated units at inference time.
    """
    if not 1 <= i <= len(seq):
        raise DataError(f"step index {i} out of range 1..{len(seq)}")
    mode = ExposureMode.parse(mode)
    budget = budget if budget is not None else TokenBudget()
    role = seq.roles[i - 1]

    lines: list[str] = []
    if include_definition:
        lines.append(_definition_line(schema, role))
    past = seq.roles[: i - 1]
    future = seq.roles[i:]
    if mode is not ExposureMode.LOCAL and past:
        lines.append(f"{PREVIOUS_LINE} {_role_tokens(past)}")
    if mode is ExposureMode.FULL_STRUCTURE and future:
        lines.append(f"{FUTURE_LINE} {_role_tokens(future)}")
    lines.append(_directive_line(role, input_info))
    lines.append(NEWS_CONTEXT_HEADER if input_info.task == "news" else RECIPE_CONTEXT_HEADER)

    prefix = "\n".join(lines) + "\n"
    context = truncate_to_budget(prefix, prev_text, budget)
    return InstructionText(text=(prefix + context).rstrip(), step_index=i, mode=mode)


def export_sft_pairs(
    labeled,
    input_info: InputInfo,
    mode: ExposureMode,
    schema: DiscourseSchema,
    budget: TokenBudget | None = None,
    include_definition: bool = False,
) -> list[tuple[InstructionText, str]]:
    """Build (instruction, target unit) fine-tuning pairs from a labeled article.

    Pair i uses the gold units before i as textual context and gold unit i as
    the target, so the model learns to continue the reference article.
    """
    units = labeled.article.units
    labels = labeled.labels
    if len(units) != len(labels):
        raise DataError(
            f"article {labeled.article.id!r}: {len(units)} units vs {len(labels)} labels"
        )
    seq = ControlSequence(tuple(labels))
    pairs = []
    for i in range(1, len(units) + 1):
        prev_text = " ".join(units[: i - 1])
        instruction = render_instruction(
            input_info, seq, i, mode, prev_text, schema, budget, include_definition
        )
        pairs.append((instruction, units[i - 1]))
    return pairs

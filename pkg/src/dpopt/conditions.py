"""Pass/fail reports for validated run conditions.

Every validator in the package (weight-matrix checks, schedule checks,
noise checks) returns a ConditionReport so the CLI can print one uniform
table and tests can assert on individual named entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ConditionEntry:
    """One validated condition.

    name: stable identifier used by tests and the CLI.
    rule: human-readable statement of the rule that was applied.
    value: the measured quantity the rule was applied to (an exponent,
        a norm, a residual; nan when the rule is purely structural).
    passed: outcome.
    """

    name: str
    rule: str
    value: float
    passed: bool

    def format_row(self) -> str:
        mark = "pass" if self.passed else "FAIL"
        return f"{mark:4s}  {self.name:42s} {self.value:12.6g}  {self.rule}"


@dataclass
class ConditionReport:
    """A named bundle of condition entries plus non-fatal warnings."""

    title: str
    entries: list[ConditionEntry] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, name: str, rule: str, value: float, passed: bool) -> None:
        self.entries.append(ConditionEntry(name, rule, value, bool(passed)))

    def entry(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(f"no condition named {name!r} in report {self.title!r}")

    def failed_names(self) -> list[str]:
        return [e.name for e in self.entries if not e.passed]

    def format_table(self) -> str:
        lines = [f"== {self.title} =="]
        lines.extend(e.format_row() for e in self.entries)
        for w in self.warnings:
            lines.append(f"warn  {w}")
        verdict = "ALL CONDITIONS HOLD" if self.overall else "CONDITIONS VIOLATED"
        lines.append(f"--> {verdict}")
        return "\n".join(lines)

"""Evaluation report assembly and rendering (CSV, text table, JSON)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .metrics import Stage1Report, Stage2Report, Stage3Report

_STAGE1_COLS = ("method", "exact_match", "sbert", "avg_tags")
_STAGE2_COLS = ("method", "exact_match", "sbert")
_STAGE3_COLS = ("method", "in_mask", "score")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


@dataclass(frozen=True)
class EvaluationReport:
    stage1: tuple[tuple[str, Stage1Report], ...] = ()
    stage2: tuple[tuple[str, Stage2Report], ...] = ()
    stage3: tuple[tuple[str, Stage3Report], ...] = ()
    manifest: dict | None = field(default=None)

    def _sections(self):
        if self.stage1:
            yield "stage1", _STAGE1_COLS, [
                (name, _fmt(r.exact_match), _fmt(r.sbert), _fmt(r.avg_tags))
                for name, r in self.stage1
            ]
        if self.stage2:
            yield "stage2", _STAGE2_COLS, [
                (name, _fmt(r.exact_match), _fmt(r.sbert)) for name, r in self.stage2
            ]
        if self.stage3:
            yield "stage3", _STAGE3_COLS, [
                (name, _fmt(r.in_mask), _fmt(r.score)) for name, r in self.stage3
            ]

    def to_csv(self) -> str:
        lines = []
        if self.manifest is not None:
            lines.append("# manifest " + json.dumps(self.manifest, sort_keys=True))
        first = True
        for _, cols, rows in self._sections():
            if not first:
                lines.append("")
            first = False
            lines.append(",".join(cols))
            for row in rows:
                lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        blocks = []
        for stage, cols, rows in self._sections():
            widths = [
                max(len(cols[i]), *(len(r[i]) for r in rows)) if rows else len(cols[i])
                for i in range(len(cols))
            ]
            header = "  ".join(c.ljust(widths[i]) for i, c in enumerate(cols))
            sep = "  ".join("-" * w for w in widths)
            body = [
                "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows
            ]
            blocks.append("\n".join([f"[{stage}]", header, sep, *body]))
        text = "\n\n".join(blocks)
        if self.manifest is not None:
            text += "\n\nmanifest: " + json.dumps(self.manifest, sort_keys=True)
        return text + "\n"

    def to_json(self) -> dict:
        doc: dict = {}
        if self.manifest is not None:
            doc["manifest"] = self.manifest
        if self.stage1:
            doc["stage1"] = [
                {"method": n, "exact_match": r.exact_match, "sbert": r.sbert, "avg_tags": r.avg_tags}
                for n, r in self.stage1
            ]
        if self.stage2:
            doc["stage2"] = [
                {"method": n, "exact_match": r.exact_match, "sbert": r.sbert}
                for n, r in self.stage2
            ]
        if self.stage3:
            doc["stage3"] = [
                {"method": n, "in_mask": r.in_mask, "score": r.score} for n, r in self.stage3
            ]
        return doc

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "table":
            return self.to_text()
        if fmt == "json":
            return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"
        raise ValueError(f"unknown report format {fmt!r}")


def _ordered(rows, method_order):
    if not method_order:
        return tuple(rows)
    position = {name: i for i, name in enumerate(method_order)}
    return tuple(sorted(rows, key=lambda nr: (position.get(nr[0], len(position)), nr[0])))


def build_report(
    stage1: list[tuple[str, Stage1Report]] | None = None,
    stage2: list[tuple[str, Stage2Report]] | None = None,
    stage3: list[tuple[str, Stage3Report]] | None = None,
    method_order: list[str] | None = None,
    manifest: dict | None = None,
) -> EvaluationReport:
    """Assemble a report with a deterministic, configured row order."""
    if not (stage1 or stage2 or stage3):
        raise ValueError("build_report needs at least one stage")
    return EvaluationReport(
        stage1=_ordered(stage1 or [], method_order),
        stage2=_ordered(stage2 or [], method_order),
        stage3=_ordered(stage3 or [], method_order),
        manifest=manifest,
    )
